//! Fixed points, periodic points and zero sets by grid scanning.

use serde::Serialize;

use super::DiagnosticsError;
use crate::exec::{map_indexed, Execution};
use crate::map::{MapError, MapExpr, Side};

/// Roots reported per scan before truncation.
pub const MAX_ROOTS: usize = 1_000;

/// Accepted residual `|F^p(x) - x|` of a reported periodic point.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Depth of a grid local minimum of `|g|` that counts as a tangential root.
pub const TOUCH_TOL: f64 = 1e-10;

/// Default stability band around multiplier 1.
pub const STABILITY_BAND: f64 = 1e-6;

const DEDUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl Stability {
    pub fn classify(multiplier: f64, band: f64) -> Self {
        if multiplier < 1.0 - band {
            Stability::Stable
        } else if multiplier > 1.0 + band {
            Stability::Unstable
        } else {
            Stability::Marginal
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointInfo {
    pub location: f64,
    pub multiplier: f64,
    pub stability: Stability,
    pub period: usize,
    /// Share of the basin grid attracted to this point's cycle, when computed.
    pub basin_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointScan {
    pub period: usize,
    pub points: Vec<FixedPointInfo>,
    /// More than [`MAX_ROOTS`] candidates were found; the list is cut.
    pub truncated: bool,
    /// Candidates dropped as sign changes across jumps or because
    /// `|F^p(x) - x|` exceeded [`RESIDUAL_TOL`].
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroSet {
    /// Isolated roots.
    pub points: Vec<f64>,
    /// Runs of grid points where the map vanishes identically.
    pub intervals: Vec<(f64, f64)>,
    pub truncated: bool,
}

impl ZeroSet {
    pub fn is_isolated(&self) -> bool {
        self.intervals.is_empty()
    }
}

fn grid(n: usize) -> impl Fn(usize) -> f64 {
    move |i| {
        if i + 1 == n {
            1.0
        } else {
            i as f64 / (n - 1) as f64
        }
    }
}

fn check_grid(grid_n: usize) -> Result<(), DiagnosticsError> {
    if grid_n < 1_000 {
        return Err(DiagnosticsError::Budget(format!(
            "grid needs at least 1000 points, got {grid_n}"
        )));
    }
    Ok(())
}

/// Largest `|g|` on both sides of a bisected root; above it the sign change
/// is a jump.
const JUMP_TOL: f64 = 1e-6;

/// Bisects a sign change of `g` on `[a, b]` to floating-point resolution.
/// Returns `None` when the bracket closes on a discontinuity.
fn bisect<G>(g: &G, mut a: f64, mut b: f64, mut ga: f64) -> Result<Option<f64>, MapError>
where
    G: Fn(f64) -> Result<f64, MapError>,
{
    let mut gb = g(b)?;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m)?;
        if gm == 0.0 {
            return Ok(Some(m));
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
            gb = gm;
        }
    }
    if ga.abs().max(gb.abs()) > JUMP_TOL {
        return Ok(None);
    }
    Ok(Some(if ga.abs() <= gb.abs() { a } else { b }))
}

/// Golden-section minimum of `|g|` on `[a, b]`.
fn touch_minimum<G>(g: &G, mut a: f64, mut b: f64) -> Result<(f64, f64), MapError>
where
    G: Fn(f64) -> Result<f64, MapError>,
{
    const PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - PHI * (b - a);
    let mut d = a + PHI * (b - a);
    let (mut gc, mut gd) = (g(c)?.abs(), g(d)?.abs());
    for _ in 0..120 {
        if b - a < 1e-15 {
            break;
        }
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - PHI * (b - a);
            gc = g(c)?.abs();
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + PHI * (b - a);
            gd = g(d)?.abs();
        }
    }
    Ok(if gc < gd { (c, gc) } else { (d, gd) })
}

/// `a` is a one-signed local minimum of `|g|` between its neighbours.
fn is_touch_candidate(prev: f64, a: f64, next: f64) -> bool {
    let same_sign = (prev < 0.0) == (a < 0.0) && (a < 0.0) == (next < 0.0);
    prev != 0.0 && next != 0.0 && same_sign && a.abs() <= prev.abs() && a.abs() <= next.abs()
}

struct Roots {
    points: Vec<f64>,
    intervals: Vec<(f64, f64)>,
    truncated: bool,
    jumps: usize,
}

/// Roots of `g` on the unit interval: exact zeros on the grid, bisected sign
/// changes and tangential touches.
fn scan_roots<G>(g: &G, grid_n: usize, exec: Execution) -> Result<Roots, MapError>
where
    G: Fn(f64) -> Result<f64, MapError> + Sync,
{
    let x = grid(grid_n);
    let values = map_indexed(exec, grid_n, |i| g(x(i)))
        .into_iter()
        .collect::<Result<Vec<f64>, _>>()?;

    let mut points = Vec::new();
    let mut intervals = Vec::new();
    let mut jumps = 0;
    let mut i = 0;
    while i < grid_n {
        if values[i] == 0.0 {
            let start = i;
            while i + 1 < grid_n && values[i + 1] == 0.0 {
                i += 1;
            }
            if i > start {
                intervals.push((x(start), x(i)));
            } else {
                points.push(x(i));
            }
        } else if i + 1 < grid_n {
            let (a, b) = (values[i], values[i + 1]);
            if b != 0.0 && (a < 0.0) != (b < 0.0) {
                match bisect(g, x(i), x(i + 1), a)? {
                    Some(root) => points.push(root),
                    None => jumps += 1,
                }
            } else if i > 0 && is_touch_candidate(values[i - 1], a, b) {
                let (at, depth) = touch_minimum(g, x(i - 1), x(i + 1))?;
                let interior = at - x(i - 1) > DEDUP_TOL && x(i + 1) - at > DEDUP_TOL;
                if depth <= TOUCH_TOL && interior {
                    points.push(at);
                }
            }
        }
        i += 1;
        if points.len() > MAX_ROOTS {
            break;
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup_by(|b, a| (*b - *a).abs() <= DEDUP_TOL);
    let truncated = points.len() > MAX_ROOTS;
    points.truncate(MAX_ROOTS);
    Ok(Roots {
        points,
        intervals,
        truncated,
        jumps,
    })
}

/// `|(F^p)'(x)|` by the chain rule along the orbit of `x`.
pub fn cycle_multiplier(map: &MapExpr, x: f64, period: usize) -> Result<f64, MapError> {
    Ok(map.iterate_derivative(x, period, Side::Right)?.abs())
}

/// Points of exact period `period` of `map`, with their multipliers.
pub fn find_fixed_points(
    map: &MapExpr,
    grid_n: usize,
    period: usize,
) -> Result<FixedPointScan, DiagnosticsError> {
    find_fixed_points_with(map, grid_n, period, STABILITY_BAND, Execution::default())
}

pub fn find_fixed_points_with(
    map: &MapExpr,
    grid_n: usize,
    period: usize,
    band: f64,
    exec: Execution,
) -> Result<FixedPointScan, DiagnosticsError> {
    if !(1..=12).contains(&period) {
        return Err(DiagnosticsError::Budget(format!(
            "period must lie in 1..=12, got {period}"
        )));
    }
    check_grid(grid_n)?;
    let g = |x: f64| map.iterate(x, period).map(|y| y - x);
    let roots = scan_roots(&g, grid_n, exec)?;

    let mut candidates = roots.points;
    for (a, b) in roots.intervals {
        candidates.push(a);
        if b > a {
            candidates.push(b);
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup_by(|b, a| (*b - *a).abs() <= DEDUP_TOL);

    let mut points = Vec::new();
    let mut rejected = roots.jumps;
    for x in candidates {
        if g(x)?.abs() > RESIDUAL_TOL {
            rejected += 1;
            continue;
        }
        let lower = (1..period)
            .filter(|d| period.is_multiple_of(*d))
            .map(|d| map.iterate(x, d).map(|y| (y - x).abs() <= RESIDUAL_TOL))
            .collect::<Result<Vec<_>, _>>()?;
        if lower.into_iter().any(|p| p) {
            continue;
        }
        let multiplier = cycle_multiplier(map, x, period)?;
        points.push(FixedPointInfo {
            location: x,
            multiplier,
            stability: Stability::classify(multiplier, band),
            period,
            basin_fraction: None,
        });
    }
    Ok(FixedPointScan {
        period,
        points,
        truncated: roots.truncated,
        rejected,
    })
}

/// The signed function whose roots are the zeros of `map`: for an `xor`
/// node, the difference of its operands; otherwise the map itself.
fn signed_profile(map: &MapExpr) -> impl Fn(f64) -> Result<f64, MapError> + Sync + '_ {
    move |x| match map {
        MapExpr::Xor(l, r) => Ok(l.eval(x)? - r.eval(x)?),
        other => other.eval(x),
    }
}

/// Roots of `map(x) = 0` on `[0, 1]`.
pub fn zero_set(map: &MapExpr, grid_n: usize) -> Result<ZeroSet, DiagnosticsError> {
    zero_set_with(map, grid_n, Execution::default())
}

pub fn zero_set_with(
    map: &MapExpr,
    grid_n: usize,
    exec: Execution,
) -> Result<ZeroSet, DiagnosticsError> {
    check_grid(grid_n)?;
    let g = signed_profile(map);
    let roots = scan_roots(&g, grid_n, exec)?;
    // a sign change across a jump is not a root
    let mut points = Vec::with_capacity(roots.points.len());
    for x in roots.points {
        if map.eval(x)?.abs() <= RESIDUAL_TOL {
            points.push(x);
        }
    }
    Ok(ZeroSet {
        points,
        intervals: roots.intervals,
        truncated: roots.truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::parse_map_expr;

    fn expr(text: &str) -> MapExpr {
        parse_map_expr(text).unwrap()
    }

    #[test]
    fn example_one_fixed_points() {
        let h = expr("xor(logistic(r=3.9),tent)");
        let scan = find_fixed_points(&h, 10_000, 1).unwrap();
        assert_eq!(scan.points.len(), 2, "{scan:?}");
        let (a, b) = (&scan.points[0], &scan.points[1]);
        assert_eq!(a.location, 0.0);
        assert!((a.multiplier - 1.9).abs() < 1e-6);
        assert_eq!(a.stability, Stability::Unstable);
        assert!((b.location - 0.9 / 3.9).abs() < 1e-9);
        assert!((b.multiplier - 0.1).abs() < 1e-6);
        assert_eq!(b.stability, Stability::Stable);
    }

    #[test]
    fn superstable_at_r4() {
        let h = expr("xor(logistic,tent)");
        let scan = find_fixed_points(&h, 10_000, 1).unwrap();
        let s: Vec<_> = scan
            .points
            .iter()
            .filter(|p| p.stability == Stability::Stable)
            .collect();
        assert_eq!(s.len(), 1);
        assert!((s[0].location - 0.25).abs() < 1e-9);
        assert!(s[0].multiplier < 1e-6);
    }

    #[test]
    fn tent_and_zero_map() {
        let scan = find_fixed_points(&expr("tent"), 10_000, 1).unwrap();
        let locs: Vec<f64> = scan.points.iter().map(|p| p.location).collect();
        assert_eq!(locs.len(), 2);
        assert_eq!(locs[0], 0.0);
        assert!((locs[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!(scan
            .points
            .iter()
            .all(|p| p.stability == Stability::Unstable));

        let scan = find_fixed_points(&expr("xor(tent,tent)"), 10_000, 1).unwrap();
        assert_eq!(scan.points.len(), 1);
        assert_eq!(scan.points[0].location, 0.0);
        assert_eq!(scan.points[0].stability, Stability::Stable);
    }

    #[test]
    fn periodic_points_exclude_lower_periods() {
        // doubling: period-2 points are 1/3 and 2/3
        let scan = find_fixed_points(&expr("doubling"), 10_000, 2).unwrap();
        let locs: Vec<f64> = scan.points.iter().map(|p| p.location).collect();
        assert_eq!(locs.len(), 2, "{locs:?}");
        assert!((locs[0] - 1.0 / 3.0).abs() < 1e-12 && (locs[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!(scan
            .points
            .iter()
            .all(|p| (p.multiplier - 4.0).abs() < 1e-9));
        // the jump at 1/2 is not a fixed point
        let scan = find_fixed_points(&expr("doubling"), 10_000, 1).unwrap();
        assert_eq!(scan.points.len(), 1);
        assert!(scan.rejected >= 1);
    }

    #[test]
    fn jump_limits_are_not_cycles() {
        // F = 0 on [1/2, 1) but F(1) = 1, so points near 0 return close to 0
        let scan = find_fixed_points(&expr("xor(doubling,inverted_tent)"), 10_000, 2).unwrap();
        assert!(scan.points.iter().all(|p| p.location > 0.1), "{scan:?}");
    }

    #[test]
    fn tangential_fixed_point() {
        let touch = crate::map::MapExpr::Custom(crate::map::CustomMap::new(
            "touch",
            crate::map::Interval::UNIT,
            |x| x + (x - 0.3001) * (x - 0.3001) * 0.5 * x * (1.0 - x) * 4.0 * (1.0 - x),
        ));
        let g = |x: f64| touch.eval(x).map(|y| y - x);
        let r = scan_roots(&g, 1_001, Execution::Sequential).unwrap();
        assert!(
            r.points.iter().any(|p| (p - 0.3001).abs() < 1e-4),
            "{:?}",
            r.points
        );
    }

    #[test]
    fn zero_sets() {
        let z = zero_set(&expr("xor(logistic(r=3.9),tent)"), 10_000).unwrap();
        let want = [0.0, 1.9 / 3.9, 2.0 / 3.9, 1.0];
        assert_eq!(z.points.len(), 4, "{z:?}");
        for (a, b) in z.points.iter().zip(want) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(z.is_isolated());

        let z = zero_set(&expr("xor(tent,inverted_tent)"), 10_000).unwrap();
        assert_eq!(z.points.len(), 2);
        assert!((z.points[0] - 0.25).abs() < 1e-12 && (z.points[1] - 0.75).abs() < 1e-12);

        let z = zero_set(&expr("xor(tent,tent)"), 10_000).unwrap();
        assert!(z.points.is_empty());
        assert_eq!(z.intervals, vec![(0.0, 1.0)]);

        // doubling minus tent changes sign across the jump at 1/2 without vanishing
        let z = zero_set(&expr("xor(doubling,tent)"), 10_000).unwrap();
        assert!(
            z.points.iter().all(|p| *p > 0.6 || *p < 0.5 - 1e-3),
            "{z:?}"
        );
    }
}
