//! Orbits and the orbit-averaged indicators.
//!
//! Maps with an integral piecewise-affine form are iterated exactly on the
//! lattice `{n / Q}` for a large prime `Q`. In binary floating point such maps
//! shift out mantissa bits every step and every orbit collapses onto `0` or
//! `1` within about 60 iterations; on the lattice the orbit of `n / Q` is the
//! true orbit of that rational seed. Other maps are iterated in `f64`.

use serde::Serialize;

use super::DiagnosticsError;
use crate::exec::{map_slice, Execution};
use crate::map::{MapError, MapExpr, Side};
use crate::pa::{to_piecewise_affine, PiecewiseAffineMap};

/// Prime denominator of the orbit lattice; 2 is a primitive root modulo it,
/// so doubling-type lattice orbits have period `Q - 1`.
pub const LATTICE_DENOMINATOR: i128 = 2_305_843_009_213_693_907;

pub const DEFAULT_TRANSIENT: usize = 1_000;

/// Iterates with `|Df|` below this are left out of Lyapunov sums.
pub const SLOPE_FLOOR: f64 = 1e-15;

/// Share of skipped iterates above which a seed is unreliable.
pub const MAX_SKIPPED_SHARE: f64 = 0.01;

/// Separation that counts as macroscopic in the sensitivity estimate.
pub const SEPARATION_EPSILON: f64 = 0.1;

struct LatticeMap {
    // breakpoints as (numerator, denominator)
    cuts: Vec<(i128, i128)>,
    slopes: Vec<i128>,
    // intercept * Q
    offsets: Vec<i128>,
    at_one: i128,
}

impl LatticeMap {
    fn from_pa(pa: &PiecewiseAffineMap) -> Option<Self> {
        if !pa.is_integral() {
            return None;
        }
        let q = LATTICE_DENOMINATOR;
        Some(LatticeMap {
            cuts: pa
                .breakpoints()
                .iter()
                .map(|b| (*b.numer(), *b.denom()))
                .collect(),
            slopes: pa.segments().iter().map(|s| s.slope.to_integer()).collect(),
            offsets: pa
                .segments()
                .iter()
                .map(|s| s.intercept.to_integer() * q)
                .collect(),
            at_one: pa.value_at_one().to_integer() * q,
        })
    }

    #[inline]
    fn cell(&self, n: i128) -> usize {
        let q = LATTICE_DENOMINATOR;
        let i = self.cuts.partition_point(|(num, den)| num * q <= n * den);
        i.saturating_sub(1).min(self.slopes.len() - 1)
    }

    #[inline]
    fn step(&self, n: i128) -> i128 {
        if n >= LATTICE_DENOMINATOR {
            return self.at_one;
        }
        let i = self.cell(n);
        self.slopes[i] * n + self.offsets[i]
    }
}

/// Iteration engine for one map.
pub struct Dynamics<'a> {
    expr: &'a MapExpr,
    lattice: Option<LatticeMap>,
}

/// Position of an orbit under a [`Dynamics`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrbitState {
    Lattice(i128),
    Float(f64),
}

impl<'a> Dynamics<'a> {
    pub fn new(expr: &'a MapExpr) -> Self {
        let lattice = to_piecewise_affine(expr)
            .ok()
            .and_then(|pa| LatticeMap::from_pa(&pa));
        Dynamics { expr, lattice }
    }

    /// Plain `f64` iteration regardless of the map.
    pub fn floating(expr: &'a MapExpr) -> Self {
        Dynamics {
            expr,
            lattice: None,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.lattice.is_some()
    }

    pub fn expr(&self) -> &MapExpr {
        self.expr
    }

    pub fn start(&self, x: f64) -> OrbitState {
        let x = x.clamp(0.0, 1.0);
        match self.lattice {
            Some(_) => OrbitState::Lattice((x * LATTICE_DENOMINATOR as f64).round() as i128),
            None => OrbitState::Float(x),
        }
    }

    #[inline]
    pub fn advance(&self, state: &mut OrbitState) -> Result<(), MapError> {
        *state = match (*state, &self.lattice) {
            (OrbitState::Lattice(n), Some(l)) => {
                let next = l.step(n);
                debug_assert!((0..=LATTICE_DENOMINATOR).contains(&next));
                OrbitState::Lattice(next.clamp(0, LATTICE_DENOMINATOR))
            }
            (OrbitState::Float(x), _) => OrbitState::Float(self.expr.eval(x)?),
            (OrbitState::Lattice(n), None) => OrbitState::Float(self.expr.eval(lattice_to_f64(n))?),
        };
        Ok(())
    }

    #[inline]
    pub fn position(&self, state: &OrbitState) -> f64 {
        match *state {
            OrbitState::Lattice(n) => lattice_to_f64(n),
            OrbitState::Float(x) => x,
        }
    }

    /// Derivative at the current point (right-sided; left-sided at 1).
    #[inline]
    pub fn slope(&self, state: &OrbitState) -> Result<f64, MapError> {
        match (state, &self.lattice) {
            (OrbitState::Lattice(n), Some(l)) => Ok(l.slopes[l.cell(*n)] as f64),
            _ => {
                let x = self.position(state);
                let side = if x >= 1.0 { Side::Left } else { Side::Right };
                self.expr.derivative_side(x, side)
            }
        }
    }
}

#[inline]
fn lattice_to_f64(n: i128) -> f64 {
    (n as f64 / LATTICE_DENOMINATOR as f64).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Orbit {
    pub seed: f64,
    pub transient: usize,
    pub points: Vec<f64>,
}

/// Drops `transient` iterates and returns the next `n`, starting with the
/// seed itself when `transient` is 0.
pub fn iterate_orbit(
    map: &MapExpr,
    seed: f64,
    n: usize,
    transient: usize,
) -> Result<Orbit, DiagnosticsError> {
    if !(0.0..=1.0).contains(&seed) {
        return Err(MapError::OutOfDomain(seed).into());
    }
    let dynamics = Dynamics::new(map);
    let mut state = dynamics.start(seed);
    for _ in 0..transient {
        dynamics.advance(&mut state)?;
    }
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            dynamics.advance(&mut state)?;
        }
        points.push(dynamics.position(&state));
    }
    Ok(Orbit {
        seed,
        transient,
        points,
    })
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Everything one pass over a post-transient orbit yields.
#[derive(Debug, Clone)]
pub(crate) struct SeedScan {
    pub exponent: f64,
    pub skipped: usize,
    pub counts: Vec<u64>,
}

impl SeedScan {
    pub fn occupied(&self) -> usize {
        self.counts.iter().filter(|c| **c > 0).count()
    }
}

#[inline]
pub(crate) fn bin_of(x: f64, bins: usize) -> usize {
    ((x * bins as f64) as usize).min(bins - 1)
}

pub(crate) fn scan_seed(
    dynamics: &Dynamics,
    seed: f64,
    transient: usize,
    n: usize,
    bins: usize,
) -> Result<SeedScan, MapError> {
    let mut state = dynamics.start(seed);
    for _ in 0..transient {
        dynamics.advance(&mut state)?;
    }
    let mut sum = KahanSum::default();
    let mut skipped = 0;
    let mut counts = vec![0u64; bins.max(1)];
    for _ in 0..n {
        dynamics.advance(&mut state)?;
        let x = dynamics.position(&state);
        counts[bin_of(x, bins.max(1))] += 1;
        let d = dynamics.slope(&state)?.abs();
        if d < SLOPE_FLOOR {
            skipped += 1;
        } else {
            sum.add(d.ln());
        }
    }
    Ok(SeedScan {
        exponent: sum.total() / n as f64,
        skipped,
        counts,
    })
}

pub(crate) fn scan_seeds(
    map: &MapExpr,
    seeds: &[f64],
    transient: usize,
    n: usize,
    bins: usize,
    exec: Execution,
) -> Result<Vec<SeedScan>, MapError> {
    let dynamics = Dynamics::new(map);
    map_slice(exec, seeds, |s| {
        scan_seed(&dynamics, *s, transient, n, bins)
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedExponent {
    pub seed: f64,
    pub exponent: f64,
    pub skipped: usize,
    pub unreliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovSummary {
    pub median: f64,
    pub iqr: f64,
    pub per_seed: Vec<SeedExponent>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

pub(crate) fn summarize_exponents(seeds: &[f64], scans: &[SeedScan], n: usize) -> LyapunovSummary {
    let per_seed: Vec<SeedExponent> = seeds
        .iter()
        .zip(scans)
        .map(|(seed, s)| SeedExponent {
            seed: *seed,
            exponent: s.exponent,
            skipped: s.skipped,
            unreliable: s.skipped as f64 > MAX_SKIPPED_SHARE * n as f64,
        })
        .collect();
    let mut values: Vec<f64> = per_seed.iter().map(|s| s.exponent).collect();
    values.sort_by(f64::total_cmp);
    LyapunovSummary {
        median: quantile(&values, 0.5),
        iqr: quantile(&values, 0.75) - quantile(&values, 0.25),
        per_seed,
    }
}

fn check_budget(n: usize, min: usize, what: &str) -> Result<(), DiagnosticsError> {
    if n < min {
        return Err(DiagnosticsError::Budget(format!(
            "{what} needs at least {min} iterates, got {n}"
        )));
    }
    Ok(())
}

fn check_bins(bins: usize) -> Result<(), DiagnosticsError> {
    if bins < 10 {
        return Err(DiagnosticsError::Budget(format!(
            "at least 10 bins required, got {bins}"
        )));
    }
    Ok(())
}

/// Per-seed orbit averages of `log|Df|` with their median and IQR.
pub fn lyapunov(
    map: &MapExpr,
    seeds: &[f64],
    n: usize,
    transient: usize,
) -> Result<LyapunovSummary, DiagnosticsError> {
    lyapunov_with(map, seeds, n, transient, Execution::default())
}

pub fn lyapunov_with(
    map: &MapExpr,
    seeds: &[f64],
    n: usize,
    transient: usize,
    exec: Execution,
) -> Result<LyapunovSummary, DiagnosticsError> {
    check_budget(n, 1_000, "lyapunov")?;
    let scans = scan_seeds(map, seeds, transient, n, 1, exec)?;
    Ok(summarize_exponents(seeds, &scans, n))
}

/// Largest fraction of the `bins` cells visited by a single post-transient orbit.
pub fn coverage(
    map: &MapExpr,
    seeds: &[f64],
    n: usize,
    bins: usize,
) -> Result<f64, DiagnosticsError> {
    check_bins(bins)?;
    let scans = scan_seeds(map, seeds, DEFAULT_TRANSIENT, n, bins, Execution::default())?;
    Ok(max_coverage(&scans, bins))
}

pub(crate) fn max_coverage(scans: &[SeedScan], bins: usize) -> f64 {
    scans.iter().map(|s| s.occupied()).max().unwrap_or(0) as f64 / bins as f64
}

/// Occupation frequencies of `n` post-transient iterates per seed, pooled.
pub fn invariant_histogram(
    map: &MapExpr,
    seeds: &[f64],
    n: usize,
    bins: usize,
) -> Result<Vec<f64>, DiagnosticsError> {
    check_bins(bins)?;
    check_budget(n * seeds.len(), 100_000, "invariant_histogram")?;
    let scans = scan_seeds(map, seeds, DEFAULT_TRANSIENT, n, bins, Execution::default())?;
    Ok(pooled_densities(&scans, bins))
}

pub(crate) fn pooled_densities(scans: &[SeedScan], bins: usize) -> Vec<f64> {
    let mut pooled = vec![0u64; bins];
    for s in scans {
        for (p, c) in pooled.iter_mut().zip(&s.counts) {
            *p += c;
        }
    }
    let total: u64 = pooled.iter().sum();
    pooled
        .into_iter()
        .map(|c| c as f64 / total.max(1) as f64)
        .collect()
}

/// Fraction of seeds whose orbit separates from a `delta0`-close companion by
/// more than [`SEPARATION_EPSILON`] within `n` steps.
pub fn sensitivity_estimate(
    map: &MapExpr,
    seeds: &[f64],
    delta0: f64,
    n: usize,
) -> Result<f64, DiagnosticsError> {
    sensitivity_with(map, seeds, delta0, n, Execution::default())
}

pub(crate) fn sensitivity_with(
    map: &MapExpr,
    seeds: &[f64],
    delta0: f64,
    n: usize,
    exec: Execution,
) -> Result<f64, DiagnosticsError> {
    if !(delta0 > 0.0 && delta0 <= 1e-4) {
        return Err(DiagnosticsError::Budget(format!(
            "delta0 = {delta0} outside (0, 1e-4]"
        )));
    }
    if seeds.is_empty() {
        return Ok(0.0);
    }
    let dynamics = Dynamics::new(map);
    let separated = map_slice(exec, seeds, |&seed| -> Result<bool, MapError> {
        let (x0, y0) = if seed + delta0 <= 1.0 {
            (seed, seed + delta0)
        } else {
            (seed - delta0, seed)
        };
        let (mut a, mut b) = (dynamics.start(x0), dynamics.start(y0));
        for _ in 0..n {
            dynamics.advance(&mut a)?;
            dynamics.advance(&mut b)?;
            if (dynamics.position(&a) - dynamics.position(&b)).abs() > SEPARATION_EPSILON {
                return Ok(true);
            }
        }
        Ok(false)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(separated.iter().filter(|s| **s).count() as f64 / seeds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::seeds::seed_points;
    use crate::map::parse_map_expr;

    fn expr(text: &str) -> MapExpr {
        parse_map_expr(text).unwrap()
    }

    #[test]
    fn simple_orbits() {
        let o = iterate_orbit(&expr("tent"), 0.0, 5, 0).unwrap();
        assert_eq!(o.points, vec![0.0; 5]);

        let o = iterate_orbit(&expr("doubling"), 1.0 / 3.0, 4, 0).unwrap();
        for (got, want) in o
            .points
            .iter()
            .zip([1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0])
        {
            assert!((got - want).abs() < 1e-12, "{:?}", o.points);
        }

        let p = 0.9 / 3.9;
        let o = iterate_orbit(&expr("xor(logistic(r=3.9),tent)"), p, 3, 0).unwrap();
        assert!(o.points.iter().all(|x| (x - p).abs() < 1e-12));
    }

    #[test]
    fn lattice_orbits_do_not_collapse() {
        let w = expr("xor(tent,inverted_tent)");
        assert!(Dynamics::new(&w).is_exact());
        let o = iterate_orbit(&w, 0.123, 10_000, 0).unwrap();
        let tail = &o.points[5_000..];
        assert!(tail.iter().any(|x| *x < 0.1) && tail.iter().any(|x| *x > 0.9));
        // recurrence holds up to conversion rounding
        for w2 in o.points.windows(2).take(200) {
            let expected = expr("xor(tent,inverted_tent)").eval(w2[0]).unwrap();
            assert!((expected - w2[1]).abs() < 1e-12);
        }
        // while f64 iteration collapses onto the fixed point 1
        let f = Dynamics::floating(&w);
        let mut s = f.start(0.123);
        for _ in 0..200 {
            f.advance(&mut s).unwrap();
        }
        assert_eq!(f.position(&s), 1.0);
    }

    #[test]
    fn lyapunov_of_affine_maps_is_log_slope() {
        let seeds = seed_points(1, 8);
        let s = lyapunov(&expr("tent"), &seeds, 10_000, 100).unwrap();
        for e in &s.per_seed {
            assert!((e.exponent - 2f64.ln()).abs() <= 1e-12);
        }
        let s = lyapunov(&expr("xor(tent,inverted_tent)"), &seeds, 10_000, 100).unwrap();
        assert!((s.median - 4f64.ln()).abs() <= 1e-12);
        assert!(lyapunov(&expr("tent"), &seeds, 10, 0).is_err());
    }

    #[test]
    fn lyapunov_at_stable_point() {
        let seeds = seed_points(3, 8);
        let s = lyapunov(&expr("xor(logistic(r=3.9),tent)"), &seeds, 10_000, 1000).unwrap();
        assert!((s.median - 0.1f64.ln()).abs() < 0.05, "{}", s.median);
    }

    #[test]
    fn zero_map_skips_everything() {
        let seeds = seed_points(3, 4);
        let s = lyapunov(&expr("xor(tent,tent)"), &seeds, 1_000, 0).unwrap();
        assert!(s
            .per_seed
            .iter()
            .all(|e| e.unreliable && e.skipped == 1_000));
        assert_eq!(
            coverage(&expr("xor(tent,tent)"), &seeds, 1000, 100).unwrap(),
            0.01
        );
    }

    #[test]
    fn histograms_conserve_mass() {
        let seeds = seed_points(5, 4);
        let h = invariant_histogram(&expr("xor(tent,inverted_tent)"), &seeds, 50_000, 20).unwrap();
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let h =
            invariant_histogram(&expr("xor(logistic(r=3.9),tent)"), &seeds, 50_000, 100).unwrap();
        assert_eq!(h[23], 1.0);
        let h = invariant_histogram(&expr("xor(tent,tent)"), &seeds, 50_000, 10).unwrap();
        assert_eq!(h[0], 1.0);
        assert!(invariant_histogram(&expr("tent"), &seeds, 50_000, 5).is_err());
    }

    #[test]
    fn sensitivity() {
        let seeds = seed_points(9, 100);
        let w = expr("xor(tent,inverted_tent)");
        assert_eq!(sensitivity_estimate(&w, &seeds, 1e-8, 200).unwrap(), 1.0);
        let h = expr("xor(logistic(r=3.9),tent)");
        assert!(sensitivity_estimate(&h, &seeds, 1e-8, 200).unwrap() < 0.05);
        assert_eq!(
            sensitivity_estimate(&expr("xor(tent,tent)"), &seeds, 1e-8, 200).unwrap(),
            0.0
        );
        assert!(sensitivity_estimate(&w, &seeds, 0.1, 10).is_err());
    }

    #[test]
    fn compensated_sum() {
        let mut s = KahanSum::default();
        for _ in 0..1_000_000 {
            s.add(0.1);
        }
        assert!((s.total() - 100_000.0).abs() < 1e-9);
    }
}
