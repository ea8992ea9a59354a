use serde::{Deserialize, Serialize};

use super::MapError;

/// A closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self, MapError> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(MapError::InvalidInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn is_unit(&self) -> bool {
        *self == Self::UNIT
    }

    /// Affine bijection onto `[0, 1]`.
    pub fn to_unit(&self, x: f64) -> f64 {
        (x - self.lo) / self.width()
    }

    pub fn from_unit(&self, u: f64) -> f64 {
        self.lo + self.width() * u
    }
}
