//! Interval maps on `[0, 1]` and the fuzzy-combinator expression tree.

mod catalog;
mod interval;
mod parse;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use catalog::{catalog, catalog_get, CatalogEntry, CatalogId, CatalogMap, ParamSpec};
pub use interval::Interval;
pub use parse::{parse_map_expr, ParseError};

/// Largest excursion outside `[0, 1]` absorbed as rounding.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

/// Step of the central difference used for maps without an analytic derivative.
pub const FD_STEP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("unknown map `{0}`")]
    UnknownMap(String),
    #[error("map `{map}` has no parameter `{name}`")]
    UnknownParameter { map: &'static str, name: String },
    #[error("parameter {name} = {value} of `{map}` is outside {range}")]
    ParameterOutOfRange {
        map: &'static str,
        name: &'static str,
        value: f64,
        range: String,
    },
    #[error("x = {0} is outside the domain")]
    OutOfDomain(f64),
    #[error("value {value} at x = {x} escapes [0, 1] beyond rounding")]
    RangeEscape { x: f64, value: f64 },
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("map leaves [{lo}, {hi}]: value {value} at x = {x}")]
    NotInvariant {
        lo: f64,
        hi: f64,
        x: f64,
        value: f64,
    },
    #[error("operand domains differ")]
    DomainMismatch,
}

/// Which one-sided derivative to take at a kink.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A map given by a closure on its own domain. Used for maps outside the
/// catalog, typically wrapped in [`MapExpr::Rescale`].
#[derive(Clone)]
pub struct CustomMap {
    name: String,
    domain: Interval,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl CustomMap {
    pub fn new(
        name: impl Into<String>,
        domain: Interval,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CustomMap {
            name: name.into(),
            domain,
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    fn call(&self, x: f64) -> Result<f64, MapError> {
        let slack = CLAMP_TOLERANCE * self.domain.width().max(1.0);
        if x < self.domain.lo - slack || x > self.domain.hi + slack {
            return Err(MapError::OutOfDomain(x));
        }
        Ok((self.f)(x.clamp(self.domain.lo, self.domain.hi)))
    }

    // Central difference, one-sided at the domain edges.
    fn slope(&self, x: f64) -> Result<f64, MapError> {
        let Interval { lo, hi } = self.domain;
        let h = FD_STEP * self.domain.width();
        let (a, b) = if x - h < lo {
            (x, x + h)
        } else if x + h > hi {
            (x - h, x)
        } else {
            (x - h, x + h)
        };
        Ok((self.call(b)? - self.call(a)?) / (b - a))
    }
}

impl fmt::Debug for CustomMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomMap")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .finish()
    }
}

impl PartialEq for CustomMap {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.domain == other.domain && Arc::ptr_eq(&self.f, &other.f)
    }
}

/// Expression tree over catalog maps and fuzzy combinators.
///
/// Every node except a bare [`MapExpr::Custom`] on a non-unit domain maps
/// `[0, 1]` into itself.
#[derive(Debug, Clone, PartialEq)]
pub enum MapExpr {
    Leaf(CatalogMap),
    Custom(CustomMap),
    /// `max(l, r) - min(l, r)`.
    Xor(Arc<MapExpr>, Arc<MapExpr>),
    /// `min(l, r)`.
    And(Arc<MapExpr>, Arc<MapExpr>),
    /// `max(l, r)`.
    Or(Arc<MapExpr>, Arc<MapExpr>),
    /// `1 - f`, the reflection across `y = 1/2`.
    Mirror(Arc<MapExpr>),
    /// Conjugate of a map on the interval by the affine bijection onto `[0, 1]`.
    Rescale(Arc<MapExpr>, Interval),
}

pub fn leaf(map: CatalogMap) -> MapExpr {
    MapExpr::Leaf(map)
}

pub fn xor(l: MapExpr, r: MapExpr) -> MapExpr {
    MapExpr::Xor(Arc::new(l), Arc::new(r))
}

pub fn and(l: MapExpr, r: MapExpr) -> MapExpr {
    MapExpr::And(Arc::new(l), Arc::new(r))
}

pub fn or(l: MapExpr, r: MapExpr) -> MapExpr {
    MapExpr::Or(Arc::new(l), Arc::new(r))
}

pub fn mirror(f: MapExpr) -> MapExpr {
    MapExpr::Mirror(Arc::new(f))
}

/// Conjugates `child`, a self-map of `[a, b]`, onto `[0, 1]`.
///
/// Invariance of `[a, b]` is checked on a uniform grid of 10^4 points.
pub fn rescale(child: MapExpr, source: Interval) -> Result<MapExpr, MapError> {
    if !(source.lo < source.hi) {
        return Err(MapError::InvalidInterval {
            lo: source.lo,
            hi: source.hi,
        });
    }
    if child.domain() != source {
        return Err(MapError::DomainMismatch);
    }
    if source.is_unit() {
        return Ok(child);
    }
    const GRID: usize = 10_000;
    let slack = CLAMP_TOLERANCE * source.width();
    for i in 0..=GRID {
        let x = source.from_unit(i as f64 / GRID as f64);
        let value = child.raw_on_domain(x)?;
        if !(value >= source.lo - slack && value <= source.hi + slack) {
            return Err(MapError::NotInvariant {
                lo: source.lo,
                hi: source.hi,
                x,
                value,
            });
        }
    }
    Ok(MapExpr::Rescale(Arc::new(child), source))
}

#[inline]
fn clamp_unit(x: f64, value: f64) -> Result<f64, MapError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else if (-CLAMP_TOLERANCE..=1.0 + CLAMP_TOLERANCE).contains(&value) {
        Ok(value.clamp(0.0, 1.0))
    } else {
        Err(MapError::RangeEscape { x, value })
    }
}

impl MapExpr {
    pub fn catalog(map: CatalogMap) -> Self {
        MapExpr::Leaf(map)
    }

    pub fn domain(&self) -> Interval {
        match self {
            MapExpr::Custom(c) => c.domain(),
            _ => Interval::UNIT,
        }
    }

    /// Value of the map at `x ∈ [0, 1]`.
    pub fn eval(&self, x: f64) -> Result<f64, MapError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(MapError::OutOfDomain(x));
        }
        self.value(x)
    }

    fn value(&self, x: f64) -> Result<f64, MapError> {
        let v = match self {
            MapExpr::Leaf(m) => m.eval(x),
            MapExpr::Custom(c) => c.call(x)?,
            MapExpr::Xor(l, r) => (l.value(x)? - r.value(x)?).abs(),
            MapExpr::And(l, r) => l.value(x)?.min(r.value(x)?),
            MapExpr::Or(l, r) => l.value(x)?.max(r.value(x)?),
            MapExpr::Mirror(c) => 1.0 - c.value(x)?,
            MapExpr::Rescale(c, iv) => iv.to_unit(c.raw_on_domain(iv.from_unit(x))?),
        };
        clamp_unit(x, v)
    }

    /// Value at a point of the node's own domain, without range checks.
    fn raw_on_domain(&self, x: f64) -> Result<f64, MapError> {
        match self {
            MapExpr::Custom(c) => c.call(x),
            other => other.value(x),
        }
    }

    /// Derivative at `x`: right-sided, except left-sided at `x = 1`.
    pub fn derivative(&self, x: f64) -> Result<f64, MapError> {
        let side = if x >= 1.0 { Side::Left } else { Side::Right };
        self.derivative_side(x, side)
    }

    /// One-sided derivative at `x` by the chain rule through the tree.
    pub fn derivative_side(&self, x: f64, side: Side) -> Result<f64, MapError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(MapError::OutOfDomain(x));
        }
        self.slope(x, side)
    }

    fn slope(&self, x: f64, side: Side) -> Result<f64, MapError> {
        Ok(match self {
            MapExpr::Leaf(m) => m.derivative(x, side),
            MapExpr::Custom(c) => c.slope(x)?,
            MapExpr::Xor(l, r) => {
                let gap = l.value(x)? - r.value(x)?;
                let d = l.slope(x, side)? - r.slope(x, side)?;
                if gap > 0.0 {
                    d
                } else if gap < 0.0 {
                    -d
                } else {
                    match side {
                        Side::Right => d.abs(),
                        Side::Left => -d.abs(),
                    }
                }
            }
            MapExpr::And(l, r) | MapExpr::Or(l, r) => {
                let is_min = matches!(self, MapExpr::And(..));
                let gap = l.value(x)? - r.value(x)?;
                let (dl, dr) = (l.slope(x, side)?, r.slope(x, side)?);
                if gap == 0.0 {
                    // Right of a tie the smaller slope wins for min; left of it the larger.
                    let take_min = is_min == (side == Side::Right);
                    if take_min {
                        dl.min(dr)
                    } else {
                        dl.max(dr)
                    }
                } else if (gap < 0.0) == is_min {
                    dl
                } else {
                    dr
                }
            }
            MapExpr::Mirror(c) => -c.slope(x, side)?,
            MapExpr::Rescale(c, iv) => match c.as_ref() {
                MapExpr::Custom(cm) => cm.slope(iv.from_unit(x))?,
                other => other.slope(iv.from_unit(x), side)?,
            },
        })
    }

    /// `n`-fold iterate starting at `x`.
    pub fn iterate(&self, mut x: f64, n: usize) -> Result<f64, MapError> {
        for _ in 0..n {
            x = self.eval(x)?;
        }
        Ok(x)
    }

    /// Derivative of the `n`-th iterate at `x` by the chain rule along the orbit.
    pub fn iterate_derivative(&self, mut x: f64, n: usize, side: Side) -> Result<f64, MapError> {
        let mut product = 1.0;
        for _ in 0..n {
            let s = if x >= 1.0 { Side::Left } else { side };
            product *= self.derivative_side(x, s)?;
            x = self.eval(x)?;
        }
        Ok(product)
    }

    /// Discontinuities contributed by the leaves, in `[0, 1]` coordinates.
    pub fn jump_points(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_points(&mut out, &|m: &CatalogMap| m.jump_points());
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Leaf kinks and jumps in `[0, 1]` coordinates. Crossings between
    /// combined operands are not included.
    pub fn leaf_kinks(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_points(&mut out, &|m: &CatalogMap| m.kinks());
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn collect_points(&self, out: &mut Vec<f64>, pick: &dyn Fn(&CatalogMap) -> &'static [f64]) {
        match self {
            MapExpr::Leaf(m) => out.extend_from_slice(pick(m)),
            MapExpr::Custom(_) => {}
            MapExpr::Xor(l, r) | MapExpr::And(l, r) | MapExpr::Or(l, r) => {
                l.collect_points(out, pick);
                r.collect_points(out, pick);
            }
            MapExpr::Mirror(c) => c.collect_points(out, pick),
            MapExpr::Rescale(c, iv) => {
                let mut inner = Vec::new();
                c.collect_points(&mut inner, pick);
                out.extend(inner.into_iter().map(|x| iv.to_unit(x)));
            }
        }
    }

    /// Catalog leaves appearing in the tree, left to right.
    pub fn leaves(&self) -> Vec<CatalogMap> {
        let mut out = Vec::new();
        self.walk_leaves(&mut out);
        out
    }

    fn walk_leaves(&self, out: &mut Vec<CatalogMap>) {
        match self {
            MapExpr::Leaf(m) => out.push(*m),
            MapExpr::Custom(_) => {}
            MapExpr::Xor(l, r) | MapExpr::And(l, r) | MapExpr::Or(l, r) => {
                l.walk_leaves(out);
                r.walk_leaves(out);
            }
            MapExpr::Mirror(c) | MapExpr::Rescale(c, _) => c.walk_leaves(out),
        }
    }

    /// True when the tree consists of catalog leaves and the four combinators
    /// only, so that it round-trips through the text grammar.
    pub fn is_printable(&self) -> bool {
        match self {
            MapExpr::Leaf(_) => true,
            MapExpr::Custom(_) | MapExpr::Rescale(..) => false,
            MapExpr::Xor(l, r) | MapExpr::And(l, r) | MapExpr::Or(l, r) => {
                l.is_printable() && r.is_printable()
            }
            MapExpr::Mirror(c) => c.is_printable(),
        }
    }
}

/// Canonical text form. Catalog trees print in the grammar accepted by
/// [`parse_map_expr`].
impl fmt::Display for MapExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapExpr::Leaf(m) => write!(f, "{m}"),
            MapExpr::Custom(c) => write!(f, "custom:{}", c.name()),
            MapExpr::Xor(l, r) => write!(f, "xor({l},{r})"),
            MapExpr::And(l, r) => write!(f, "and({l},{r})"),
            MapExpr::Or(l, r) => write!(f, "or({l},{r})"),
            MapExpr::Mirror(c) => write!(f, "mirror({c})"),
            MapExpr::Rescale(c, iv) => write!(f, "rescale({c},[{},{}])", iv.lo, iv.hi),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tent() -> MapExpr {
        leaf(CatalogMap::Tent)
    }

    fn inverted() -> MapExpr {
        leaf(CatalogMap::InvertedTent)
    }

    fn logistic(r: f64) -> MapExpr {
        leaf(CatalogMap::Logistic { r })
    }

    #[test]
    fn xor_values() {
        assert_eq!(xor(tent(), inverted()).eval(0.0).unwrap(), 1.0);
        assert_eq!(xor(tent(), inverted()).eval(0.125).unwrap(), 0.5);
        let h = xor(logistic(3.9), tent());
        let p = 0.9 / 3.9;
        assert!((h.eval(p).unwrap() - p).abs() < 1e-15);
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert_eq!(xor(logistic(3.7), logistic(3.7)).eval(x).unwrap(), 0.0);
        }
    }

    #[test]
    fn domain_errors() {
        assert_eq!(tent().eval(1.5), Err(MapError::OutOfDomain(1.5)));
        assert!(tent().eval(-1e-9).is_err());
        assert!(tent().derivative(2.0).is_err());
    }

    #[test]
    fn range_escape_detected() {
        let bad = MapExpr::Custom(CustomMap::new("bad", Interval::UNIT, |x| 1.0 + x));
        assert!(matches!(bad.eval(0.5), Err(MapError::RangeEscape { .. })));
        let rounding = MapExpr::Custom(CustomMap::new("round", Interval::UNIT, |_| 1.0 + 1e-14));
        assert_eq!(rounding.eval(0.5).unwrap(), 1.0);
    }

    #[test]
    fn derivatives() {
        assert_eq!(tent().derivative(0.25).unwrap(), 2.0);
        assert_eq!(tent().derivative(0.5).unwrap(), -2.0);
        assert_eq!(tent().derivative(1.0).unwrap(), -2.0);
        let h = xor(logistic(3.9), tent());
        assert!((h.derivative(0.0).unwrap() - 1.9).abs() < 1e-12);
        assert_eq!(xor(tent(), inverted()).derivative(0.1).unwrap(), -4.0);
        // kink of |4x-1| at 1/4: right derivative
        assert_eq!(xor(tent(), inverted()).derivative(0.25).unwrap(), 4.0);
        assert_eq!(
            xor(tent(), inverted())
                .derivative_side(0.25, Side::Left)
                .unwrap(),
            -4.0
        );
        assert_eq!(mirror(tent()).derivative(0.1).unwrap(), -2.0);
        assert_eq!(and(tent(), inverted()).derivative(0.1).unwrap(), 2.0);
        assert_eq!(or(tent(), inverted()).derivative(0.1).unwrap(), -2.0);
    }

    #[test]
    fn rescale_conjugates() {
        let same = rescale(tent(), Interval::UNIT).unwrap();
        assert_eq!(same, tent());

        let square = MapExpr::Custom(CustomMap::new("square", Interval::UNIT, |x| x * x));
        let r = rescale(square.clone(), Interval::UNIT).unwrap();
        assert_eq!(r.eval(0.3).unwrap(), square.eval(0.3).unwrap());

        let shifted = MapExpr::Custom(CustomMap::new(
            "shifted_tent",
            Interval::new(1.0, 2.0).unwrap(),
            |x| 1.0 + CatalogMap::Tent.eval(x - 1.0),
        ));
        let r = rescale(shifted, Interval::new(1.0, 2.0).unwrap()).unwrap();
        assert_eq!(r.eval(0.5).unwrap(), 1.0);
        assert_eq!(r.eval(0.25).unwrap(), 0.5);
        assert!((r.derivative(0.25).unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn rescale_rejects_escaping_map() {
        let iv = Interval::new(1.0, 2.0).unwrap();
        let escaping = MapExpr::Custom(CustomMap::new("double", iv, |x| 2.0 * x));
        assert!(matches!(
            rescale(escaping, iv),
            Err(MapError::NotInvariant { .. })
        ));
        assert!(matches!(rescale(tent(), iv), Err(MapError::DomainMismatch)));
    }

    #[test]
    fn display_is_canonical() {
        let e = xor(logistic(3.9), mirror(tent()));
        assert_eq!(e.to_string(), "xor(logistic(r=3.9),mirror(tent))");
    }

    #[test]
    fn iterate_derivative_chain_rule() {
        let t = tent();
        assert_eq!(t.iterate_derivative(0.1, 3, Side::Right).unwrap(), 8.0);
        assert_eq!(t.iterate(0.1, 2).unwrap(), 0.4);
    }
}
