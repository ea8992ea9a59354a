//! Basins of attraction on a uniform grid.

use serde::Serialize;

use super::orbit::Dynamics;
use super::DiagnosticsError;
use crate::exec::{map_indexed, Execution};
use crate::map::{MapError, MapExpr};

/// Consecutive iterates an orbit must stay near a target to be classified.
pub const HOLD_ITERATES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinMap {
    /// Each target is a set of points, e.g. the points of a cycle.
    pub targets: Vec<Vec<f64>>,
    pub grid_n: usize,
    pub fractions: Vec<f64>,
    pub unresolved: f64,
    /// Target index per grid cell, `None` when unresolved.
    pub classification: Vec<Option<usize>>,
}

/// Classifies `grid_n` uniformly spaced seeds by the first target approached
/// within `tol` and held for [`HOLD_ITERATES`] consecutive iterates.
pub fn basin_map(
    map: &MapExpr,
    targets: &[f64],
    grid_n: usize,
    max_iter: usize,
    tol: f64,
) -> Result<BasinMap, DiagnosticsError> {
    let sets: Vec<Vec<f64>> = targets.iter().map(|t| vec![*t]).collect();
    basin_map_sets(map, &sets, grid_n, max_iter, tol, Execution::default())
}

pub fn basin_map_sets(
    map: &MapExpr,
    targets: &[Vec<f64>],
    grid_n: usize,
    max_iter: usize,
    tol: f64,
    exec: Execution,
) -> Result<BasinMap, DiagnosticsError> {
    if targets.is_empty() || targets.iter().any(|t| t.is_empty()) {
        return Err(DiagnosticsError::Budget(
            "basin targets must be nonempty".into(),
        ));
    }
    if !(tol > 0.0) || grid_n < 2 {
        return Err(DiagnosticsError::Budget(
            "basin needs a positive tolerance and at least 2 grid points".into(),
        ));
    }
    let dynamics = Dynamics::new(map);
    let near = |x: f64| {
        targets
            .iter()
            .position(|set| set.iter().any(|t| (x - t).abs() <= tol))
    };
    let classify = |i: usize| -> Result<Option<usize>, MapError> {
        let seed = i as f64 / (grid_n - 1) as f64;
        let mut state = dynamics.start(seed);
        let mut current = None;
        let mut held = 0;
        for _ in 0..max_iter {
            dynamics.advance(&mut state)?;
            match near(dynamics.position(&state)) {
                Some(t) if current == Some(t) => held += 1,
                Some(t) => {
                    current = Some(t);
                    held = 1;
                }
                None => {
                    current = None;
                    held = 0;
                }
            }
            if held >= HOLD_ITERATES {
                return Ok(current);
            }
        }
        Ok(None)
    };
    let classification = map_indexed(exec, grid_n, classify)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let mut counts = vec![0usize; targets.len()];
    for t in classification.iter().flatten() {
        counts[*t] += 1;
    }
    let fractions: Vec<f64> = counts.iter().map(|c| *c as f64 / grid_n as f64).collect();
    let resolved: usize = counts.iter().sum();
    Ok(BasinMap {
        targets: targets.to_vec(),
        grid_n,
        fractions,
        unresolved: (grid_n - resolved) as f64 / grid_n as f64,
        classification,
    })
}
