//! Monotone partitions, full-branch decompositions and distortion bounds.
//!
//! Maps with an exact piecewise-affine form take the exact route; everything
//! else is handled numerically from derivative signs on a grid.

use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::map::{mirror, xor, Interval, MapError, MapExpr, Side};
use crate::pa::{exact_to_f64, to_piecewise_affine, Exact, PiecewiseAffineMap};

pub const DEFAULT_TOL_FULL: f64 = 1e-9;
pub const DEFAULT_GRID: usize = 10_000;
pub const MAX_SIGN_CHANGES: usize = 1_000;

/// Precision of bisection-refined branch endpoints.
const CUT_TOL: f64 = 1e-12;
/// Derivatives below this count as zero when classifying monotonicity.
const FLAT: f64 = 1e-12;
/// `|Df|` below this in a cell marks a critical point. Bisected cell ends sit
/// within `CUT_TOL` of the critical point, so the sampled derivative there is
/// of order `|D²f| * CUT_TOL`.
const VANISHING_SLOPE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BranchError {
    #[error("derivative changes sign more than {MAX_SIGN_CHANGES} times ({0})")]
    TooOscillatory(usize),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    Constant,
}

impl Monotonicity {
    fn of_slope(d: f64) -> Self {
        if d > FLAT {
            Monotonicity::Increasing
        } else if d < -FLAT {
            Monotonicity::Decreasing
        } else {
            Monotonicity::Constant
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub interval: Interval,
    pub monotonicity: Monotonicity,
    pub image: Interval,
    pub is_full: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchDecomposition {
    pub branches: Vec<Branch>,
    pub full_count: usize,
    /// Interior cut points as exact rationals, on the piecewise-affine route.
    #[serde(serialize_with = "ser_exact_list")]
    pub exact_cuts: Option<Vec<Exact>>,
}

fn ser_exact_list<S: Serializer>(v: &Option<Vec<Exact>>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        None => s.serialize_none(),
        Some(list) => s.collect_seq(list.iter().map(|q| q.to_string())),
    }
}

impl BranchDecomposition {
    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn intervals(&self) -> Vec<Interval> {
        self.branches.iter().map(|b| b.interval).collect()
    }

    pub fn all_full(&self) -> bool {
        !self.branches.is_empty() && self.full_count == self.branches.len()
    }
}

impl fmt::Display for BranchDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} full branches / {} branches",
            self.full_count,
            self.branches.len()
        )
    }
}

/// A map as seen by the numeric route: values, one-sided slopes and jumps.
trait Profile: Sync {
    fn value(&self, x: f64) -> Result<f64, MapError>;
    fn slope(&self, x: f64, side: Side) -> Result<f64, MapError>;
    fn jumps(&self) -> Vec<f64>;

    fn left_value(&self, x: f64, jumps: &[f64]) -> Result<f64, MapError> {
        if jumps.iter().any(|j| (j - x).abs() <= CUT_TOL) {
            self.value((x - 4.0 * CUT_TOL).max(0.0))
        } else {
            self.value(x)
        }
    }
}

impl Profile for MapExpr {
    fn value(&self, x: f64) -> Result<f64, MapError> {
        self.eval(x)
    }

    fn slope(&self, x: f64, side: Side) -> Result<f64, MapError> {
        self.derivative_side(x, side)
    }

    fn jumps(&self) -> Vec<f64> {
        self.jump_points()
    }
}

/// `f ∘ f`, for second-order distortion.
struct SecondIterate<'a>(&'a MapExpr);

impl Profile for SecondIterate<'_> {
    fn value(&self, x: f64) -> Result<f64, MapError> {
        self.0.eval(self.0.eval(x)?)
    }

    fn slope(&self, x: f64, side: Side) -> Result<f64, MapError> {
        let inner = self.0.derivative_side(x, side)?;
        let y = self.0.eval(x)?;
        // an increasing inner map keeps the side, a decreasing one flips it
        let outer_side = match (side, inner < 0.0, y >= 1.0) {
            (_, _, true) => Side::Left,
            (s, false, _) => s,
            (Side::Right, true, _) => Side::Left,
            (Side::Left, true, _) => Side::Right,
        };
        Ok(self.0.derivative_side(y, outer_side)? * inner)
    }

    fn jumps(&self) -> Vec<f64> {
        self.0.jump_points()
    }
}

fn side_at(x: f64) -> Side {
    if x >= 1.0 {
        Side::Left
    } else {
        Side::Right
    }
}

/// Maximal intervals of constant derivative sign, cut at every jump.
pub fn monotone_partition(expr: &MapExpr) -> Result<Vec<Interval>, BranchError> {
    monotone_partition_with(expr, DEFAULT_GRID)
}

pub fn monotone_partition_with(
    expr: &MapExpr,
    grid_n: usize,
) -> Result<Vec<Interval>, BranchError> {
    if let Ok(pa) = to_piecewise_affine(expr) {
        return Ok(pa_groups(&pa)
            .into_iter()
            .map(|g| g.interval_f64())
            .collect());
    }
    Ok(numeric_partition(expr, grid_n)?
        .into_iter()
        .map(|(iv, _)| iv)
        .collect())
}

struct PaGroup {
    a: Exact,
    b: Exact,
    first: usize,
    last: usize,
    mono: Monotonicity,
}

impl PaGroup {
    fn interval_f64(&self) -> Interval {
        Interval {
            lo: exact_to_f64(self.a),
            hi: exact_to_f64(self.b),
        }
    }
}

fn pa_groups(pa: &PiecewiseAffineMap) -> Vec<PaGroup> {
    let jumps = pa.jumps();
    let mut groups: Vec<PaGroup> = Vec::new();
    for (i, seg) in pa.segments().iter().enumerate() {
        let (a, b) = pa.cell_bounds(i);
        let mono = Monotonicity::of_slope(exact_to_f64(seg.slope));
        match groups.last_mut() {
            Some(g) if g.mono == mono && !jumps.contains(&a) => {
                g.b = b;
                g.last = i;
            }
            _ => groups.push(PaGroup {
                a,
                b,
                first: i,
                last: i,
                mono,
            }),
        }
    }
    groups
}

fn grid_point(i: usize, n: usize) -> f64 {
    i as f64 / n as f64
}

/// Finds the point in `(lo, hi)` where `class` stops equalling `left`.
fn bisect_class<P: Profile + ?Sized>(
    p: &P,
    mut lo: f64,
    mut hi: f64,
    left: Monotonicity,
) -> Result<f64, MapError> {
    while hi - lo > CUT_TOL {
        let mid = 0.5 * (lo + hi);
        if Monotonicity::of_slope(p.slope(mid, side_at(mid))?) == left {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn numeric_partition<P: Profile + ?Sized>(
    p: &P,
    grid_n: usize,
) -> Result<Vec<(Interval, Monotonicity)>, BranchError> {
    let n = grid_n.max(16);
    let classes = (0..=n)
        .map(|i| {
            let x = grid_point(i, n);
            p.slope(x, side_at(x)).map(Monotonicity::of_slope)
        })
        .collect::<Result<Vec<_>, _>>()?;

    // Runs of equal class; a lone flat sample is a critical point, not a piece.
    let mut runs: Vec<(Monotonicity, usize, usize)> = Vec::new();
    for (i, &c) in classes.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.0 == c => r.2 = i,
            _ => runs.push((c, i, i)),
        }
    }
    let runs: Vec<_> = if runs.len() > 1 {
        runs.into_iter()
            .filter(|r| !(r.0 == Monotonicity::Constant && r.1 == r.2))
            .collect()
    } else {
        runs
    };
    let mut merged: Vec<(Monotonicity, usize, usize)> = Vec::new();
    for r in runs {
        match merged.last_mut() {
            Some(m) if m.0 == r.0 => m.2 = r.2,
            _ => merged.push(r),
        }
    }
    if merged.len() - 1 > MAX_SIGN_CHANGES {
        return Err(BranchError::TooOscillatory(merged.len() - 1));
    }

    let jumps: Vec<f64> = p
        .jumps()
        .into_iter()
        .filter(|j| *j > 0.0 && *j < 1.0)
        .collect();
    let mut cuts = Vec::new();
    for w in merged.windows(2) {
        let (lo, hi) = (grid_point(w[0].2, n), grid_point(w[1].1, n));
        cuts.push(bisect_class(p, lo, hi, w[0].0)?);
    }
    for j in &jumps {
        if cuts.iter().all(|c| (c - j).abs() > 1e-9) {
            cuts.push(*j);
        } else if let Some(c) = cuts.iter_mut().find(|c| (**c - j).abs() <= 1e-9) {
            *c = *j;
        }
    }
    cuts.sort_by(f64::total_cmp);

    let mut bounds = vec![0.0];
    bounds.extend(cuts);
    bounds.push(1.0);
    let mut out = Vec::with_capacity(bounds.len() - 1);
    for w in bounds.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let mono = Monotonicity::of_slope(p.slope(mid, Side::Right)?);
        out.push((Interval { lo: w[0], hi: w[1] }, mono));
    }
    Ok(out)
}

/// Monotone branches with their images; a branch is full when its image
/// covers `[tol_full, 1 - tol_full]` (exactly `[0, 1]` on the affine route).
pub fn full_branch_decomposition(
    expr: &MapExpr,
    tol_full: f64,
) -> Result<BranchDecomposition, BranchError> {
    full_branch_decomposition_with(expr, tol_full, DEFAULT_GRID)
}

pub fn full_branch_decomposition_with(
    expr: &MapExpr,
    tol_full: f64,
    grid_n: usize,
) -> Result<BranchDecomposition, BranchError> {
    if let Ok(pa) = to_piecewise_affine(expr) {
        return Ok(exact_decomposition(&pa));
    }
    numeric_decomposition(expr, tol_full, grid_n, None)
}

fn exact_decomposition(pa: &PiecewiseAffineMap) -> BranchDecomposition {
    let groups = pa_groups(pa);
    let mut branches = Vec::with_capacity(groups.len());
    for g in &groups {
        let start = pa.segments()[g.first].at(g.a);
        let end = pa.segments()[g.last].at(g.b);
        let (lo, hi) = if start <= end {
            (start, end)
        } else {
            (end, start)
        };
        branches.push(Branch {
            interval: g.interval_f64(),
            monotonicity: g.mono,
            image: Interval {
                lo: exact_to_f64(lo),
                hi: exact_to_f64(hi),
            },
            is_full: lo == Exact::from_integer(0) && hi == Exact::from_integer(1),
        });
    }
    let full_count = branches.iter().filter(|b| b.is_full).count();
    BranchDecomposition {
        branches,
        full_count,
        exact_cuts: Some(groups.iter().skip(1).map(|g| g.a).collect()),
    }
}

fn numeric_decomposition<P: Profile + ?Sized>(
    p: &P,
    tol_full: f64,
    grid_n: usize,
    pieces: Option<Vec<(Interval, Monotonicity)>>,
) -> Result<BranchDecomposition, BranchError> {
    let pieces = match pieces {
        Some(v) => v,
        None => numeric_partition(p, grid_n)?,
    };
    let jumps = p.jumps();
    let mut branches = Vec::with_capacity(pieces.len());
    for (iv, mono) in pieces {
        let start = p.value(iv.lo)?;
        let end = p.left_value(iv.hi, &jumps)?;
        let image = Interval {
            lo: start.min(end),
            hi: start.max(end),
        };
        branches.push(Branch {
            interval: iv,
            monotonicity: mono,
            image,
            is_full: image.lo <= tol_full && image.hi >= 1.0 - tol_full,
        });
    }
    let full_count = branches.iter().filter(|b| b.is_full).count();
    Ok(BranchDecomposition {
        branches,
        full_count,
        exact_cuts: None,
    })
}

/// `log(sup|Df| / inf|Df|)` on one branch cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distortion {
    Finite(f64),
    /// The derivative vanishes in the closed cell.
    Unbounded,
}

impl Distortion {
    pub fn is_unbounded(&self) -> bool {
        matches!(self, Distortion::Unbounded)
    }

    pub fn value(&self) -> f64 {
        match self {
            Distortion::Finite(v) => *v,
            Distortion::Unbounded => f64::INFINITY,
        }
    }
}

impl Serialize for Distortion {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Distortion::Finite(v) => s.serialize_f64(*v),
            Distortion::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionEstimate {
    /// Iterate order, 1 or 2.
    pub order: u8,
    pub per_branch: Vec<Distortion>,
    pub overall: Distortion,
    pub exact: bool,
}

/// Distortion of `expr` (order 1) or of its second iterate (order 2).
///
/// For order 1 the cells are the branches of `decomposition`; for order 2 they
/// are the monotone cells of `expr ∘ expr`. Piecewise-affine maps report 0.
pub fn distortion_bound(
    expr: &MapExpr,
    decomposition: &BranchDecomposition,
    order: u8,
    grid_n: usize,
) -> Result<DistortionEstimate, BranchError> {
    let order = order.clamp(1, 2);
    if let Ok(pa) = to_piecewise_affine(expr) {
        let cells = if order == 1 {
            decomposition.len()
        } else {
            pa_groups(&pa.compose(&pa)).len()
        };
        return Ok(DistortionEstimate {
            order,
            per_branch: vec![Distortion::Finite(0.0); cells],
            overall: Distortion::Finite(0.0),
            exact: true,
        });
    }
    let per_branch = if order == 1 {
        decomposition
            .branches
            .iter()
            .map(|b| cell_distortion(expr, b.interval, grid_n))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        let second = SecondIterate(expr);
        numeric_partition(&second, grid_n)?
            .into_iter()
            .map(|(iv, _)| cell_distortion(&second, iv, grid_n))
            .collect::<Result<Vec<_>, _>>()?
    };
    let overall = if per_branch.iter().any(Distortion::is_unbounded) {
        Distortion::Unbounded
    } else {
        Distortion::Finite(per_branch.iter().map(Distortion::value).fold(0.0, f64::max))
    };
    Ok(DistortionEstimate {
        order,
        per_branch,
        overall,
        exact: false,
    })
}

fn cell_distortion<P: Profile + ?Sized>(
    p: &P,
    iv: Interval,
    grid_n: usize,
) -> Result<Distortion, MapError> {
    let n = grid_n.max(16);
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..=n {
        let x = iv.lo + iv.width() * (i as f64 / n as f64);
        // endpoints use the derivative from inside the cell
        let side = if i == n { Side::Left } else { Side::Right };
        let d = p.slope(x, side)?.abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if lo < VANISHING_SLOPE {
        return Ok(Distortion::Unbounded);
    }
    Ok(Distortion::Finite(hi.ln() - lo.ln()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchDoublingReport {
    pub map: String,
    pub k: usize,
    pub count_of_xor: usize,
    pub passes: bool,
    /// Set when the input is not a full-branch map.
    pub precondition_violation: Option<String>,
}

/// Checks that `xor(f, mirror(f))` has twice as many full branches as `f`.
pub fn check_branch_doubling(f: &MapExpr) -> Result<BranchDoublingReport, BranchError> {
    let base = full_branch_decomposition(f, DEFAULT_TOL_FULL)?;
    if !base.all_full() {
        return Ok(BranchDoublingReport {
            map: f.to_string(),
            k: base.full_count,
            count_of_xor: 0,
            passes: false,
            precondition_violation: Some(format!(
                "not a full-branch map: {} of {} branches are full",
                base.full_count,
                base.len()
            )),
        });
    }
    let combined = full_branch_decomposition(&xor(f.clone(), mirror(f.clone())), DEFAULT_TOL_FULL)?;
    Ok(BranchDoublingReport {
        map: f.to_string(),
        k: base.full_count,
        count_of_xor: combined.full_count,
        passes: combined.full_count == 2 * base.full_count,
        precondition_violation: None,
    })
}
