//! Exact piecewise-affine maps and the fuzzy operators on them.
//!
//! Breakpoints, slopes and intercepts are rationals. Catalog PA leaves have
//! integer slopes and intercepts, and `|l - r|`, `min`, `max` and `1 - f` keep
//! them integral, so breakpoint denominators stay bounded by slope differences.

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::map::{CatalogMap, MapExpr};

pub type Exact = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PaError {
    #[error("`{0}` has no exact piecewise-affine form")]
    NonAffine(String),
    #[error("malformed piecewise-affine map: {0}")]
    Malformed(String),
}

/// `slope * x + intercept` on one cell of the partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Segment {
    pub slope: Exact,
    pub intercept: Exact,
}

impl Segment {
    pub fn new(slope: Exact, intercept: Exact) -> Self {
        Segment { slope, intercept }
    }

    pub fn at(&self, x: Exact) -> Exact {
        self.slope * x + self.intercept
    }

    fn zero() -> Self {
        Segment::new(Exact::zero(), Exact::zero())
    }

    fn negate(self) -> Self {
        Segment::new(-self.slope, -self.intercept)
    }

    fn minus(self, o: Segment) -> Self {
        Segment::new(self.slope - o.slope, self.intercept - o.intercept)
    }
}

fn int(v: i128) -> Exact {
    Exact::from_integer(v)
}

fn half() -> Exact {
    Exact::new(1, 2)
}

pub fn exact_to_f64(v: Exact) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Simplest rational within `1e-15` of `v` (continued-fraction convergents).
pub fn exact_from_f64(v: f64) -> Result<Exact, PaError> {
    if !v.is_finite() {
        return Err(PaError::Malformed(format!("non-finite number {v}")));
    }
    let tol = 1e-15 * v.abs().max(1.0);
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut rest = v;
    for _ in 0..64 {
        let a = rest.floor();
        if a.abs() > 1e18 {
            break;
        }
        let a = a as i128;
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2.abs() > 1 << 62 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if ((h1 as f64) / (k1 as f64) - v).abs() <= tol {
            return Ok(Exact::new(h1, k1));
        }
        let frac = rest - rest.floor();
        if frac == 0.0 {
            break;
        }
        rest = 1.0 / frac;
    }
    if k1 == 0 {
        return Err(PaError::Malformed(format!("cannot represent {v}")));
    }
    Ok(Exact::new(h1, k1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FuzzyOp {
    Xor,
    And,
    Or,
}

/// A map on `[0, 1]` that is affine on each cell `[b_i, b_{i+1})`, the last
/// cell closed. The value at `x = 1` is stored separately so that maps with a
/// jump at the right endpoint (the doubling map) are represented exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseAffineMap {
    breakpoints: Vec<Exact>,
    segments: Vec<Segment>,
    value_at_one: Exact,
    fast: FastForm,
}

#[derive(Debug, Clone, PartialEq)]
struct FastForm {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
    value_at_one: f64,
}

impl PiecewiseAffineMap {
    pub fn new(
        breakpoints: Vec<Exact>,
        segments: Vec<Segment>,
        value_at_one: Exact,
    ) -> Result<Self, PaError> {
        if breakpoints.len() < 2 || segments.len() + 1 != breakpoints.len() {
            return Err(PaError::Malformed(format!(
                "{} breakpoints for {} segments",
                breakpoints.len(),
                segments.len()
            )));
        }
        if breakpoints[0] != Exact::zero() || *breakpoints.last().unwrap() != Exact::one() {
            return Err(PaError::Malformed("breakpoints must span [0, 1]".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PaError::Malformed(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let unit = |v: Exact| v >= Exact::zero() && v <= Exact::one();
        for (i, s) in segments.iter().enumerate() {
            let (a, b) = (breakpoints[i], breakpoints[i + 1]);
            if !unit(s.at(a)) || !unit(s.at(b)) {
                return Err(PaError::Malformed(format!(
                    "segment {i} leaves [0, 1] on [{a}, {b}]"
                )));
            }
        }
        if !unit(value_at_one) {
            return Err(PaError::Malformed("value at 1 outside [0, 1]".into()));
        }
        let fast = FastForm {
            breakpoints: breakpoints.iter().copied().map(exact_to_f64).collect(),
            slopes: segments.iter().map(|s| exact_to_f64(s.slope)).collect(),
            intercepts: segments.iter().map(|s| exact_to_f64(s.intercept)).collect(),
            value_at_one: exact_to_f64(value_at_one),
        };
        Ok(PiecewiseAffineMap {
            breakpoints,
            segments,
            value_at_one,
            fast,
        })
    }

    /// Continuous map through the given nodes, linear in between.
    pub fn from_nodes(nodes: &[(Exact, Exact)]) -> Result<Self, PaError> {
        if nodes.len() < 2 {
            return Err(PaError::Malformed("need at least two nodes".into()));
        }
        let segments = nodes
            .windows(2)
            .map(|w| {
                let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                Segment::new(slope, w[0].1 - slope * w[0].0)
            })
            .collect();
        let value_at_one = nodes.last().unwrap().1;
        Self::new(nodes.iter().map(|n| n.0).collect(), segments, value_at_one)
    }

    pub fn catalog(map: &CatalogMap) -> Option<Self> {
        let seg = |s: i128, c: i128| Segment::new(int(s), int(c));
        let bps = vec![Exact::zero(), half(), Exact::one()];
        let (segments, v1) = match map {
            CatalogMap::Tent => (vec![seg(2, 0), seg(-2, 2)], 0),
            CatalogMap::InvertedTent => (vec![seg(-2, 1), seg(2, -1)], 1),
            CatalogMap::Doubling => (vec![seg(2, 0), seg(2, -1)], 0),
            CatalogMap::Logistic { .. } | CatalogMap::Cubic => return None,
        };
        Some(Self::new(bps, segments, int(v1)).expect("catalog forms are valid"))
    }

    pub fn breakpoints(&self) -> &[Exact] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn value_at_one(&self) -> Exact {
        self.value_at_one
    }

    /// Index of the cell `[b_i, b_{i+1})` containing `x` (last cell closed).
    pub fn cell_of(&self, x: Exact) -> usize {
        let i = self.breakpoints.partition_point(|b| *b <= x);
        i.saturating_sub(1).min(self.segments.len() - 1)
    }

    pub fn cell_bounds(&self, i: usize) -> (Exact, Exact) {
        (self.breakpoints[i], self.breakpoints[i + 1])
    }

    pub fn eval_exact(&self, x: Exact) -> Exact {
        if x >= Exact::one() {
            return self.value_at_one;
        }
        self.segments[self.cell_of(x)].at(x)
    }

    /// Limit from the left at `x`; the value at 0 for `x = 0`.
    pub fn left_limit(&self, x: Exact) -> Exact {
        if x <= Exact::zero() {
            return self.segments[0].at(x);
        }
        let i = self.breakpoints.partition_point(|b| *b < x);
        self.segments[(i - 1).min(self.segments.len() - 1)].at(x)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let f = &self.fast;
        if x >= 1.0 {
            return f.value_at_one;
        }
        let i = f
            .breakpoints
            .partition_point(|b| *b <= x)
            .saturating_sub(1)
            .min(f.slopes.len() - 1);
        f.slopes[i] * x + f.intercepts[i]
    }

    /// Slope of the cell containing `x`; the last cell at `x = 1`.
    pub fn slope_at(&self, x: f64) -> f64 {
        let f = &self.fast;
        let i = f
            .breakpoints
            .partition_point(|b| *b <= x)
            .saturating_sub(1)
            .min(f.slopes.len() - 1);
        f.slopes[i]
    }

    /// Breakpoints (including `x = 1`) where the map is discontinuous.
    pub fn jumps(&self) -> Vec<Exact> {
        let mut out = Vec::new();
        for i in 1..self.segments.len() {
            let b = self.breakpoints[i];
            if self.segments[i - 1].at(b) != self.segments[i].at(b) {
                out.push(b);
            }
        }
        if self.segments.last().unwrap().at(Exact::one()) != self.value_at_one {
            out.push(Exact::one());
        }
        out
    }

    /// True when every slope, intercept and the value at 1 are integers.
    pub fn is_integral(&self) -> bool {
        self.value_at_one.is_integer()
            && self
                .segments
                .iter()
                .all(|s| s.slope.is_integer() && s.intercept.is_integer())
    }

    pub fn mirror(&self) -> Self {
        let segments = self
            .segments
            .iter()
            .map(|s| Segment::new(-s.slope, Exact::one() - s.intercept))
            .collect();
        Self::new(
            self.breakpoints.clone(),
            segments,
            Exact::one() - self.value_at_one,
        )
        .expect("mirror keeps [0, 1]")
    }

    pub fn xor(&self, other: &Self) -> Self {
        self.combine(other, FuzzyOp::Xor)
    }

    pub fn and(&self, other: &Self) -> Self {
        self.combine(other, FuzzyOp::And)
    }

    pub fn or(&self, other: &Self) -> Self {
        self.combine(other, FuzzyOp::Or)
    }

    fn merged_breakpoints(&self, other: &Self) -> Vec<Exact> {
        let mut cuts: Vec<Exact> = self
            .breakpoints
            .iter()
            .chain(other.breakpoints.iter())
            .copied()
            .collect();
        cuts.sort();
        cuts.dedup();
        cuts
    }

    fn combine(&self, other: &Self, op: FuzzyOp) -> Self {
        let cuts = self.merged_breakpoints(other);
        let mut breakpoints = vec![Exact::zero()];
        let mut segments = Vec::with_capacity(cuts.len());
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = (a + b) * half();
            let sf = self.segments[self.cell_of(mid)];
            let sg = other.segments[other.cell_of(mid)];
            let gap = sf.minus(sg);
            let mut pieces = vec![(a, b)];
            if !gap.slope.is_zero() {
                let root = -gap.intercept / gap.slope;
                if a < root && root < b {
                    pieces = vec![(a, root), (root, b)];
                }
            }
            for (u, v) in pieces {
                let sign = gap.at((u + v) * half());
                let seg = match op {
                    FuzzyOp::Xor if sign.is_positive() => gap,
                    FuzzyOp::Xor if sign.is_negative() => gap.negate(),
                    FuzzyOp::Xor => Segment::zero(),
                    FuzzyOp::And => {
                        if sign.is_positive() {
                            sg
                        } else {
                            sf
                        }
                    }
                    FuzzyOp::Or => {
                        if sign.is_negative() {
                            sg
                        } else {
                            sf
                        }
                    }
                };
                breakpoints.push(v);
                segments.push(seg);
            }
        }
        let (p, q) = (self.value_at_one, other.value_at_one);
        let v1 = match op {
            FuzzyOp::Xor => (p - q).abs(),
            FuzzyOp::And => p.min(q),
            FuzzyOp::Or => p.max(q),
        };
        Self::new(breakpoints, segments, v1).expect("fuzzy operators keep [0, 1]")
    }

    /// `self ∘ inner`, exact on the interior of every cell.
    pub fn compose(&self, inner: &Self) -> Self {
        let mut breakpoints = vec![Exact::zero()];
        let mut segments = Vec::new();
        for (i, s) in inner.segments.iter().enumerate() {
            let (a, b) = inner.cell_bounds(i);
            let mut cuts = vec![a, b];
            if !s.slope.is_zero() {
                let (ya, yb) = (s.at(a), s.at(b));
                let (lo, hi) = if ya < yb { (ya, yb) } else { (yb, ya) };
                for p in &self.breakpoints {
                    if lo < *p && *p < hi {
                        cuts.push((*p - s.intercept) / s.slope);
                    }
                }
            }
            cuts.sort();
            cuts.dedup();
            for w in cuts.windows(2) {
                let mid = (w[0] + w[1]) * half();
                let outer = self.segments[self.cell_of(s.at(mid))];
                breakpoints.push(w[1]);
                segments.push(Segment::new(
                    outer.slope * s.slope,
                    outer.slope * s.intercept + outer.intercept,
                ));
            }
        }
        let v1 = self.eval_exact(inner.value_at_one);
        Self::new(breakpoints, segments, v1).expect("composition keeps [0, 1]")
    }

    pub fn to_json(&self) -> PaJson {
        let last = self.segments.last().unwrap().at(Exact::one());
        PaJson {
            breakpoints: self.fast.breakpoints.clone(),
            slopes: self.fast.slopes.clone(),
            intercepts: self.fast.intercepts.clone(),
            value_at_one: (last != self.value_at_one).then_some(self.fast.value_at_one),
        }
    }

    pub fn from_json(json: &PaJson) -> Result<Self, PaError> {
        if json.slopes.len() != json.intercepts.len() {
            return Err(PaError::Malformed(
                "slopes and intercepts differ in length".into(),
            ));
        }
        let conv = |v: &[f64]| {
            v.iter()
                .map(|x| exact_from_f64(*x))
                .collect::<Result<Vec<_>, _>>()
        };
        let breakpoints = conv(&json.breakpoints)?;
        let slopes = conv(&json.slopes)?;
        let intercepts = conv(&json.intercepts)?;
        let segments: Vec<Segment> = slopes
            .into_iter()
            .zip(intercepts)
            .map(|(s, c)| Segment::new(s, c))
            .collect();
        let v1 = match json.value_at_one {
            Some(v) => exact_from_f64(v)?,
            None => segments
                .last()
                .ok_or_else(|| PaError::Malformed("no segments".into()))?
                .at(Exact::one()),
        };
        Self::new(breakpoints, segments, v1)
    }
}

/// Wire form of a [`PiecewiseAffineMap`]. `value_at_one` is present only when
/// the map jumps at `x = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaJson {
    pub breakpoints: Vec<f64>,
    pub slopes: Vec<f64>,
    pub intercepts: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_at_one: Option<f64>,
}

/// Exact piecewise-affine form of `expr`, when every leaf has one.
pub fn to_piecewise_affine(expr: &MapExpr) -> Result<PiecewiseAffineMap, PaError> {
    match expr {
        MapExpr::Leaf(m) => {
            PiecewiseAffineMap::catalog(m).ok_or_else(|| PaError::NonAffine(m.to_string()))
        }
        MapExpr::Custom(_) | MapExpr::Rescale(..) => Err(PaError::NonAffine(expr.to_string())),
        MapExpr::Xor(l, r) => Ok(to_piecewise_affine(l)?.xor(&to_piecewise_affine(r)?)),
        MapExpr::And(l, r) => Ok(to_piecewise_affine(l)?.and(&to_piecewise_affine(r)?)),
        MapExpr::Or(l, r) => Ok(to_piecewise_affine(l)?.or(&to_piecewise_affine(r)?)),
        MapExpr::Mirror(c) => Ok(to_piecewise_affine(c)?.mirror()),
    }
}

pub fn pa_eval(pa: &PiecewiseAffineMap, x: f64) -> f64 {
    pa.eval(x)
}

/// Sup-distance of `g` from the mirror image of `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryDefect {
    pub sup_defect: f64,
    pub argmax_x: f64,
    /// Computed from exact piecewise-affine forms rather than a grid.
    pub exact: bool,
}

/// `sup |f(x) + g(x) - 1|`: zero exactly when the graphs are mirror images
/// across `y = 1/2`.
pub fn symmetry_defect(f: &MapExpr, g: &MapExpr, grid_n: usize) -> SymmetryDefect {
    if let (Ok(pf), Ok(pg)) = (to_piecewise_affine(f), to_piecewise_affine(g)) {
        return exact_symmetry_defect(&pf, &pg);
    }
    let n = grid_n.max(2);
    let mut best = SymmetryDefect {
        sup_defect: 0.0,
        argmax_x: 0.0,
        exact: false,
    };
    for i in 0..n {
        let x = i as f64 / (n - 1) as f64;
        let (Ok(a), Ok(b)) = (f.eval(x), g.eval(x)) else {
            continue;
        };
        let d = (a + b - 1.0).abs();
        if d > best.sup_defect {
            best.sup_defect = d;
            best.argmax_x = x;
        }
    }
    best
}

fn exact_symmetry_defect(f: &PiecewiseAffineMap, g: &PiecewiseAffineMap) -> SymmetryDefect {
    let mut sup = (f.value_at_one + g.value_at_one - Exact::one()).abs();
    let mut arg = Exact::one();
    for w in f.merged_breakpoints(g).windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = (a + b) * half();
        let sf = f.segments[f.cell_of(mid)];
        let sg = g.segments[g.cell_of(mid)];
        for x in [a, b] {
            let d = (sf.at(x) + sg.at(x) - Exact::one()).abs();
            if d > sup || (d == sup && x < arg) {
                sup = d;
                arg = x;
            }
        }
    }
    SymmetryDefect {
        sup_defect: exact_to_f64(sup),
        argmax_x: exact_to_f64(arg),
        exact: true,
    }
}
