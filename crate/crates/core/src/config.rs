//! Solver configuration, serializable to TOML or JSON.

use serde::{Deserialize, Serialize};

use crate::potential_step::StepConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Warmup,
    Weighted,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "warmup" => Ok(Mode::Warmup),
            "weighted" => Ok(Mode::Weighted),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

/// Where the target value `F*` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FStarSource {
    /// Dinic on the input graph.
    Oracle,
    /// Binary search driven by IPM probes.
    Search,
    /// `f_star_value`, falling back to search if it turns out wrong.
    Given,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub mode: Mode,
    /// Overrides the default `η`.
    pub eta: Option<f64>,
    /// Overrides `W = m^{6η}`.
    pub big_w: Option<f64>,
    /// Overrides the default even `p`.
    pub p: Option<u32>,
    pub laplacian_tol: f64,
    pub step_tol: f64,
    pub coupling_tol: f64,
    pub kappa: f64,
    pub congestion_limit: f64,
    /// Overrides the per-mode termination threshold on `F* - F`.
    pub round_threshold: Option<f64>,
    /// Hard cap on accepted IPM iterations.
    pub max_iterations: usize,
    pub max_inner_iterations: usize,
    pub max_halvings: u32,
    pub f_star_source: FStarSource,
    pub f_star_value: Option<i64>,
    pub oracle_check: bool,
    /// Abort a weighted run once `‖w‖₁` would exceed `3m`.
    pub enforce_weight_budget: bool,
    /// `c` in the per-iteration budget `‖w″‖₁ ≤ c m^{4η} U`.
    pub weight_budget_const: Option<f64>,
    pub rounding_eps: f64,
    /// Record wall time in traces (makes traces non-reproducible).
    pub timing: bool,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let step = StepConfig::default();
        SolverConfig {
            mode: Mode::Warmup,
            eta: None,
            big_w: None,
            p: None,
            laplacian_tol: step.laplacian_tol,
            step_tol: step.step_tol,
            coupling_tol: step.coupling_tol,
            kappa: step.kappa,
            congestion_limit: step.congestion_limit,
            round_threshold: None,
            max_iterations: 50_000_000,
            max_inner_iterations: step.max_inner_iter,
            max_halvings: 30,
            f_star_source: FStarSource::Oracle,
            f_star_value: None,
            oracle_check: false,
            enforce_weight_budget: true,
            weight_budget_const: None,
            rounding_eps: 1e-7,
            timing: false,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            kappa: self.kappa,
            step_tol: self.step_tol,
            max_inner_iter: self.max_inner_iterations,
            laplacian_tol: self.laplacian_tol,
            coupling_tol: self.coupling_tol,
            congestion_limit: self.congestion_limit,
            check_congestion: true,
            extended: true,
        }
    }
}
