//! Orbit statistics, periodic points, basins and the chaos verdict.

pub mod basin;
pub mod orbit;
pub mod roots;
pub mod seeds;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branches::{
    distortion_bound, full_branch_decomposition_with, BranchDecomposition, BranchError,
    DistortionEstimate, DEFAULT_TOL_FULL,
};
use crate::config::{RunConfig, Thresholds};
use crate::map::{MapError, MapExpr};

pub use basin::{basin_map, basin_map_sets, BasinMap};
pub use orbit::{
    coverage, invariant_histogram, iterate_orbit, lyapunov, lyapunov_with, sensitivity_estimate,
    Dynamics, LyapunovSummary, Orbit, SeedExponent,
};
pub use roots::{
    find_fixed_points, find_fixed_points_with, zero_set, zero_set_with, FixedPointInfo,
    FixedPointScan, Stability, ZeroSet,
};
pub use seeds::{seed_point, seed_points};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Branch(#[from] BranchError),
    #[error("invalid budget: {0}")]
    Budget(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Chaotic,
    NonChaotic,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Chaotic => "Chaotic",
            Verdict::NonChaotic => "NonChaotic",
            Verdict::Inconclusive => "Inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub median: f64,
    pub iqr: f64,
    pub per_seed: Vec<SeedExponent>,
    /// Orbits ran on the exact rational lattice.
    pub exact_orbits: bool,
    /// Share of seeds separating beyond 0.1 from a `sensitivity_delta` neighbour.
    pub sensitivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicPointsReport {
    pub max_period: usize,
    pub points: Vec<FixedPointInfo>,
    pub truncated: bool,
    pub rejected: usize,
}

impl PeriodicPointsReport {
    pub fn stable(&self) -> impl Iterator<Item = &FixedPointInfo> {
        self.points
            .iter()
            .filter(|p| p.stability == Stability::Stable)
    }
}

/// Field order is the report schema.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub schema_version: u32,
    pub expression: String,
    pub config: RunConfig,
    pub lyapunov: LyapunovReport,
    pub coverage: f64,
    pub fixed_points: PeriodicPointsReport,
    pub zero_set: ZeroSet,
    pub histogram: Vec<f64>,
    pub branches: Option<BranchDecomposition>,
    pub distortion: Option<DistortionEstimate>,
    pub verdict: Verdict,
    pub fixtures_match: Option<bool>,
}

impl DiagnosticsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// The chaos verdict, a pure function of the report fields.
pub fn verdict(report: &DiagnosticsReport) -> Verdict {
    decide(
        &report.config.thresholds,
        report.lyapunov.median,
        report.coverage,
        &report.fixed_points.points,
    )
}

pub fn decide(t: &Thresholds, lyapunov: f64, coverage: f64, points: &[FixedPointInfo]) -> Verdict {
    let stable: Vec<&FixedPointInfo> = points
        .iter()
        .filter(|p| p.period <= t.max_period && p.stability == Stability::Stable)
        .collect();
    if lyapunov > t.lyapunov_chaotic && coverage >= t.coverage_min && stable.is_empty() {
        return Verdict::Chaotic;
    }
    let attracting = stable
        .iter()
        .any(|p| p.basin_fraction.is_some_and(|b| b >= t.basin_min));
    if attracting || lyapunov < t.lyapunov_nonchaotic {
        Verdict::NonChaotic
    } else {
        Verdict::Inconclusive
    }
}

/// Points of a cycle and the indices of the reported points lying on it.
type Cycle = (Vec<f64>, Vec<usize>);

/// Groups stable periodic points into cycles.
fn stable_cycles(map: &MapExpr, points: &[FixedPointInfo]) -> Result<Vec<Cycle>, MapError> {
    let mut cycles: Vec<Cycle> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if p.stability != Stability::Stable {
            continue;
        }
        if let Some(c) = cycles
            .iter_mut()
            .find(|(orbit, _)| orbit.iter().any(|y| (y - p.location).abs() <= 1e-7))
        {
            c.1.push(i);
            continue;
        }
        let mut orbit = vec![p.location];
        let mut x = p.location;
        for _ in 1..p.period {
            x = map.eval(x)?;
            orbit.push(x);
        }
        cycles.push((orbit, vec![i]));
    }
    Ok(cycles)
}

/// Runs every indicator under `config` and assembles the report.
pub fn diagnose(map: &MapExpr, config: &RunConfig) -> Result<DiagnosticsReport, DiagnosticsError> {
    config.validate().map_err(DiagnosticsError::Budget)?;
    if config.iterates < 1_000 {
        return Err(DiagnosticsError::Budget(format!(
            "lyapunov needs at least 1000 iterates, got {}",
            config.iterates
        )));
    }
    let exec = config.execution;
    let seeds = seed_points(config.base_seed, config.seeds);

    let scans = orbit::scan_seeds(
        map,
        &seeds,
        config.transient,
        config.iterates,
        config.bins,
        exec,
    )?;
    let summary = orbit::summarize_exponents(&seeds, &scans, config.iterates);
    let coverage = orbit::max_coverage(&scans, config.bins);
    let histogram = orbit::pooled_densities(&scans, config.bins);
    drop(scans);
    let sensitivity = orbit::sensitivity_with(
        map,
        &seeds,
        config.sensitivity_delta,
        config.sensitivity_steps,
        exec,
    )?;

    let grid_n = config.grid_n.max(1_000);
    let band = config.thresholds.stability_band;
    let mut points = Vec::new();
    let mut truncated = false;
    let mut rejected = 0;
    for period in 1..=config.thresholds.max_period {
        let scan = find_fixed_points_with(map, grid_n, period, band, exec)?;
        truncated |= scan.truncated;
        rejected += scan.rejected;
        points.extend(scan.points);
    }
    let cycles = stable_cycles(map, &points)?;
    if !cycles.is_empty() {
        let sets: Vec<Vec<f64>> = cycles.iter().map(|(o, _)| o.clone()).collect();
        let basins = basin_map_sets(
            map,
            &sets,
            grid_n,
            config.basin_iterations,
            config.basin_tolerance,
            exec,
        )?;
        for ((_, members), fraction) in cycles.iter().zip(&basins.fractions) {
            for i in members {
                points[*i].basin_fraction = Some(*fraction);
            }
        }
    }

    let zero_set = zero_set_with(map, grid_n, exec)?;
    let branches = match full_branch_decomposition_with(map, DEFAULT_TOL_FULL, grid_n) {
        Ok(d) => Some(d),
        Err(BranchError::TooOscillatory(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let distortion = match &branches {
        Some(d) => Some(distortion_bound(map, d, 1, grid_n)?),
        None => None,
    };

    let mut report = DiagnosticsReport {
        schema_version: SCHEMA_VERSION,
        expression: map.to_string(),
        config: config.clone(),
        lyapunov: LyapunovReport {
            median: summary.median,
            iqr: summary.iqr,
            per_seed: summary.per_seed,
            exact_orbits: Dynamics::new(map).is_exact(),
            sensitivity,
        },
        coverage,
        fixed_points: PeriodicPointsReport {
            max_period: config.thresholds.max_period,
            points,
            truncated,
            rejected,
        },
        zero_set,
        histogram,
        branches,
        distortion,
        verdict: Verdict::Inconclusive,
        fixtures_match: None,
    };
    report.verdict = verdict(&report);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::parse_map_expr;

    fn quick() -> RunConfig {
        RunConfig {
            iterates: 20_000,
            seeds: 8,
            grid_n: 2_000,
            basin_iterations: 2_000,
            ..RunConfig::default()
        }
    }

    fn point(stability: Stability, basin: Option<f64>) -> FixedPointInfo {
        FixedPointInfo {
            location: 0.5,
            multiplier: 0.5,
            stability,
            period: 1,
            basin_fraction: basin,
        }
    }

    #[test]
    fn rule_cases() {
        let t = Thresholds::default();
        assert_eq!(decide(&t, 0.01, 0.5, &[]), Verdict::Inconclusive);
        assert_eq!(decide(&t, 1.0, 1.0, &[]), Verdict::Chaotic);
        assert_eq!(decide(&t, 1.0, 0.97, &[]), Verdict::Inconclusive);
        assert_eq!(decide(&t, -0.1, 0.0, &[]), Verdict::NonChaotic);
        let stable = point(Stability::Stable, Some(0.95));
        assert_eq!(
            decide(&t, 1.0, 1.0, std::slice::from_ref(&stable)),
            Verdict::NonChaotic
        );
        let weak = point(Stability::Stable, Some(0.5));
        assert_eq!(decide(&t, 1.0, 1.0, &[weak]), Verdict::Inconclusive);
        let marginal = point(Stability::Marginal, None);
        assert_eq!(decide(&t, 1.0, 1.0, &[marginal]), Verdict::Chaotic);
    }

    #[test]
    fn examples_diagnose() {
        let w = parse_map_expr("xor(tent,inverted_tent)").unwrap();
        let r = diagnose(&w, &quick()).unwrap();
        assert_eq!(r.verdict, Verdict::Chaotic);
        assert!(r.lyapunov.exact_orbits);
        assert!((r.lyapunov.median - 4f64.ln()).abs() < 1e-12);
        assert_eq!(verdict(&r), r.verdict);
        assert!((r.histogram.iter().sum::<f64>() - 1.0).abs() < 1e-9);

        let h = parse_map_expr("xor(logistic,tent)").unwrap();
        let r = diagnose(&h, &quick()).unwrap();
        assert_eq!(r.verdict, Verdict::NonChaotic);
        let stable: Vec<_> = r.fixed_points.stable().collect();
        assert!(stable[0].basin_fraction.unwrap() > 0.99);
    }

    #[test]
    fn report_keys_in_schema_order() {
        let z = parse_map_expr("xor(tent,tent)").unwrap();
        let r = diagnose(&z, &quick()).unwrap();
        assert_eq!(r.verdict, Verdict::NonChaotic);
        let value: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        let text = r.to_json();
        let keys = [
            "schema_version",
            "expression",
            "config",
            "lyapunov",
            "coverage",
            "fixed_points",
            "zero_set",
            "histogram",
            "branches",
            "distortion",
            "verdict",
            "fixtures_match",
        ];
        let mut last = 0;
        for k in keys {
            let at = text.find(&format!("\n  \"{k}\"")).unwrap();
            assert!(at > last || last == 0);
            last = at;
        }
        assert_eq!(value.as_object().unwrap().len(), keys.len());
    }
}
