use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::exec::Execution;

/// Cut-offs of the chaos verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub lyapunov_chaotic: f64,
    pub lyapunov_nonchaotic: f64,
    pub coverage_min: f64,
    pub basin_min: f64,
    /// Longest period searched for stable cycles.
    pub max_period: usize,
    /// Multipliers within this band around 1 are marginal.
    pub stability_band: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            lyapunov_chaotic: 0.05,
            lyapunov_nonchaotic: -0.05,
            coverage_min: 0.98,
            basin_min: 0.9,
            max_period: 8,
            stability_band: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Svg,
}

/// Budgets and thresholds of a run. Everything that influences a result is
/// serialized into the report; output location and worker count are not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub base_seed: u64,
    pub seeds: usize,
    pub iterates: usize,
    pub transient: usize,
    pub bins: usize,
    pub grid_n: usize,
    pub basin_iterations: usize,
    pub basin_tolerance: f64,
    pub sensitivity_delta: f64,
    pub sensitivity_steps: usize,
    pub thresholds: Thresholds,
    #[serde(skip)]
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub formats: Vec<OutputFormat>,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            base_seed: 0x5eed,
            seeds: 32,
            iterates: 1_000_000,
            transient: 1_000,
            bins: 1_000,
            grid_n: 10_000,
            basin_iterations: 10_000,
            basin_tolerance: 1e-6,
            sensitivity_delta: 1e-8,
            sensitivity_steps: 200,
            thresholds: Thresholds::default(),
            output_dir: PathBuf::from("out"),
            formats: vec![OutputFormat::Json],
            execution: Execution::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        let counts = [
            ("seeds", self.seeds),
            ("iterates", self.iterates),
            ("bins", self.bins),
            ("grid", self.grid_n),
            ("basin iterations", self.basin_iterations),
            ("sensitivity steps", self.sensitivity_steps),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(format!("{name} must be at least 1"));
        }
        let t = &self.thresholds;
        if !(t.lyapunov_nonchaotic < t.lyapunov_chaotic) {
            return Err("non-chaotic Lyapunov bound must be below the chaotic bound".into());
        }
        if !(0.0..=1.0).contains(&t.coverage_min) || !(0.0..=1.0).contains(&t.basin_min) {
            return Err("coverage and basin thresholds must lie in [0, 1]".into());
        }
        if !(self.sensitivity_delta > 0.0 && self.sensitivity_delta <= 1e-4) {
            return Err("sensitivity delta must lie in (0, 1e-4]".into());
        }
        if !(self.basin_tolerance > 0.0) {
            return Err("basin tolerance must be positive".into());
        }
        Ok(())
    }
}
