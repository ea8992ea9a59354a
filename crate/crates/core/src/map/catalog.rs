//! The fixed catalog of interval maps on `[0, 1]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{MapError, MapExpr, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogId {
    Logistic,
    Tent,
    InvertedTent,
    Doubling,
    Cubic,
}

impl CatalogId {
    pub const ALL: [CatalogId; 5] = [
        CatalogId::Logistic,
        CatalogId::Tent,
        CatalogId::InvertedTent,
        CatalogId::Doubling,
        CatalogId::Cubic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CatalogId::Logistic => "logistic",
            CatalogId::Tent => "tent",
            CatalogId::InvertedTent => "inverted_tent",
            CatalogId::Doubling => "doubling",
            CatalogId::Cubic => "cubic",
        }
    }

    pub fn entry(self) -> &'static CatalogEntry {
        catalog()
            .iter()
            .find(|e| e.id == self)
            .expect("every id has an entry")
    }
}

impl fmt::Display for CatalogId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CatalogId {
    type Err = MapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CatalogId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| MapError::UnknownMap(s.to_string()))
    }
}

/// Declared range of a numeric map parameter.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub lo: f64,
    /// `lo` itself is excluded.
    pub lo_open: bool,
    pub hi: f64,
    pub default: f64,
}

impl ParamSpec {
    pub fn admits(&self, v: f64) -> bool {
        let above = if self.lo_open {
            v > self.lo
        } else {
            v >= self.lo
        };
        v.is_finite() && above && v <= self.hi
    }

    fn range_text(&self) -> String {
        format!(
            "{}{}, {}]",
            if self.lo_open { "(" } else { "[" },
            self.lo,
            self.hi
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub id: CatalogId,
    pub params: &'static [ParamSpec],
    pub formula: &'static str,
    /// Whether the map has an exact piecewise-affine form.
    pub exact_affine: bool,
    /// Full branches on `[0, 1]` at the default parameters.
    pub full_branches: usize,
}

const LOGISTIC_PARAMS: &[ParamSpec] = &[ParamSpec {
    name: "r",
    lo: 0.0,
    lo_open: true,
    hi: 4.0,
    default: 4.0,
}];

static CATALOG: [CatalogEntry; 5] = [
    CatalogEntry {
        id: CatalogId::Logistic,
        params: LOGISTIC_PARAMS,
        formula: "r*x*(1-x)",
        exact_affine: false,
        full_branches: 2,
    },
    CatalogEntry {
        id: CatalogId::Tent,
        params: &[],
        formula: "min(2x, 2-2x)",
        exact_affine: true,
        full_branches: 2,
    },
    CatalogEntry {
        id: CatalogId::InvertedTent,
        params: &[],
        formula: "|2x-1|",
        exact_affine: true,
        full_branches: 2,
    },
    CatalogEntry {
        id: CatalogId::Doubling,
        params: &[],
        formula: "2x mod 1 (0 at x=1)",
        exact_affine: true,
        full_branches: 2,
    },
    CatalogEntry {
        id: CatalogId::Cubic,
        params: &[],
        formula: "x*(4x-3)^2",
        exact_affine: false,
        full_branches: 3,
    },
];

pub fn catalog() -> &'static [CatalogEntry] {
    &CATALOG
}

/// A catalog map with its parameters resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CatalogMap {
    Logistic { r: f64 },
    Tent,
    InvertedTent,
    Doubling,
    Cubic,
}

impl CatalogMap {
    pub fn id(&self) -> CatalogId {
        match self {
            CatalogMap::Logistic { .. } => CatalogId::Logistic,
            CatalogMap::Tent => CatalogId::Tent,
            CatalogMap::InvertedTent => CatalogId::InvertedTent,
            CatalogMap::Doubling => CatalogId::Doubling,
            CatalogMap::Cubic => CatalogId::Cubic,
        }
    }

    /// Builds a map from its id and `name = value` parameters, filling defaults.
    pub fn with_params(id: CatalogId, params: &[(&str, f64)]) -> Result<Self, MapError> {
        let spec = id.entry().params;
        let mut values: Vec<f64> = spec.iter().map(|p| p.default).collect();
        for &(name, value) in params {
            let slot = spec.iter().position(|p| p.name == name).ok_or_else(|| {
                MapError::UnknownParameter {
                    map: id.name(),
                    name: name.to_string(),
                }
            })?;
            if !spec[slot].admits(value) {
                return Err(MapError::ParameterOutOfRange {
                    map: id.name(),
                    name: spec[slot].name,
                    value,
                    range: spec[slot].range_text(),
                });
            }
            values[slot] = value;
        }
        Ok(match id {
            CatalogId::Logistic => CatalogMap::Logistic { r: values[0] },
            CatalogId::Tent => CatalogMap::Tent,
            CatalogId::InvertedTent => CatalogMap::InvertedTent,
            CatalogId::Doubling => CatalogMap::Doubling,
            CatalogId::Cubic => CatalogMap::Cubic,
        })
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            CatalogMap::Logistic { r } => vec![("r", r)],
            _ => Vec::new(),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            CatalogMap::Logistic { r } => r * x * (1.0 - x),
            CatalogMap::Tent => (2.0 * x).min(2.0 - 2.0 * x),
            CatalogMap::InvertedTent => (2.0 * x - 1.0).abs(),
            CatalogMap::Doubling => {
                if x >= 1.0 {
                    0.0
                } else if x >= 0.5 {
                    2.0 * x - 1.0
                } else {
                    2.0 * x
                }
            }
            CatalogMap::Cubic => {
                let t = 4.0 * x - 3.0;
                x * t * t
            }
        }
    }

    /// One-sided derivative; at a kink `side` picks the branch.
    #[inline]
    pub fn derivative(&self, x: f64, side: Side) -> f64 {
        let left_of_half = match side {
            Side::Right => x < 0.5,
            Side::Left => x <= 0.5,
        };
        match *self {
            CatalogMap::Logistic { r } => r * (1.0 - 2.0 * x),
            CatalogMap::Tent => {
                if left_of_half {
                    2.0
                } else {
                    -2.0
                }
            }
            CatalogMap::InvertedTent => {
                if left_of_half {
                    -2.0
                } else {
                    2.0
                }
            }
            CatalogMap::Doubling => 2.0,
            CatalogMap::Cubic => 48.0 * x * x - 48.0 * x + 9.0,
        }
    }

    /// Points where the map is discontinuous.
    pub fn jump_points(&self) -> &'static [f64] {
        match self {
            CatalogMap::Doubling => &[0.5, 1.0],
            _ => &[],
        }
    }

    /// Points where the derivative is discontinuous or the map jumps.
    pub fn kinks(&self) -> &'static [f64] {
        match self {
            CatalogMap::Tent | CatalogMap::InvertedTent => &[0.5],
            CatalogMap::Doubling => &[0.5, 1.0],
            _ => &[],
        }
    }
}

impl fmt::Display for CatalogMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id().name())?;
        let params = self.params();
        if !params.is_empty() {
            f.write_str("(")?;
            for (i, (name, value)) in params.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{name}={value}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Looks up a catalog map by name and wraps it as a leaf expression.
pub fn catalog_get(id: &str, params: &[(&str, f64)]) -> Result<MapExpr, MapError> {
    let id: CatalogId = id.parse()?;
    Ok(MapExpr::Leaf(CatalogMap::with_params(id, params)?))
}
