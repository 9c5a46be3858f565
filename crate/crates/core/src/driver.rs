//! Outer loop: preconditioning, the choice of `F*`, the warm-up and weighted
//! schedules with `δ` back-off, and the final combinatorial phase.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::barrier::{coupling_tolerance, potential_state, potential_value};
use crate::combinatorial::{augment_to_optimal, check_integral_flow, dinic_max_flow, integral_edges, round_to_integral};
use crate::config::{FStarSource, Mode, SolverConfig};
use crate::error::{FlowError, Result};
use crate::graph::{precondition, residual_caps, symmetrize, FlowInstance, Graph, Symmetrized};
use crate::potential_step::{advance, potential_decrement_step, Workspace};
use crate::scalar::norm_inf;
use crate::state::IterateState;
use crate::trace::{TraceHeader, TraceRecord};
use crate::weighted_step::{default_big_w, default_eta, default_p, weighted_progress_step, weighted_threshold, WeightedParams};

pub use crate::state::initialize;

/// Why an interior point run stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The gap fell below the rounding threshold.
    Threshold,
    /// Every `δ` back-off failed; carries the last error.
    Stalled(String),
    /// The next step would have broken `‖w‖₁ ≤ 3m` or the per-step cap.
    WeightBudget(String),
    IterationCap,
}

/// One interior point run on the preconditioned graph.
#[derive(Debug, Clone)]
pub struct Phase {
    pub state: IterateState<f64>,
    pub records: Vec<TraceRecord>,
    pub stop: StopReason,
    pub halvings: u64,
}

impl Phase {
    /// The run as the strict operation contract sees it: stopping at the
    /// iteration cap or on the weight budget is an error.
    pub fn into_result(self) -> Result<Phase> {
        match &self.stop {
            StopReason::IterationCap => Err(FlowError::IterationCapExceeded(self.state.iteration)),
            StopReason::WeightBudget(_) => {
                let limit = 3.0 * self.state.w.len() as f64;
                Err(FlowError::WeightBudgetExceeded {
                    value: self.state.w.l1(),
                    limit,
                })
            }
            _ => Ok(self),
        }
    }
}

/// One probe of the `F*` search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    pub guess: i64,
    pub success: bool,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Integral flow on the input edges.
    pub flow: Vec<i64>,
    pub value: i64,
    /// `F*` of the input graph the final run targeted.
    pub f_star: i64,
    pub ipm_iterations: usize,
    pub halvings: u64,
    pub stop: StopReason,
    /// Value of the rounded flow before augmenting paths.
    pub rounded_value: i64,
    pub rounding_fallback: bool,
    pub augmentations: usize,
    pub probes: Vec<Probe>,
    pub oracle_value: Option<i64>,
    pub oracle_agrees: Option<bool>,
    pub header: TraceHeader,
    pub trace: Vec<TraceRecord>,
    /// Final interior point iterate on the preconditioned graph.
    pub final_state: IterateState<f64>,
}

/// The graphs the pipeline works with: input `G`, its two-sided version `H`
/// and the preconditioned `P`.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub original: Graph<f64>,
    pub sym: Symmetrized<f64>,
    pub pre: Graph<f64>,
}

impl Pipeline {
    pub fn new(g: &Graph<f64>) -> Self {
        let sym = symmetrize(g);
        let pre = precondition(&sym.graph);
        Pipeline {
            original: g.clone(),
            sym,
            pre,
        }
    }

    /// `F*` of `P` for a given `F*` of `G`: the symmetrization offset plus
    /// `2U` for every preconditioner edge.
    pub fn f_star_pre(&self, f_star: f64) -> f64 {
        let h = &self.sym.graph;
        f_star + self.sym.value_offset + 2.0 * h.m() as f64 * h.cap_bound()
    }

    pub fn threshold(&self, cfg: &SolverConfig, params: Option<&WeightedParams>) -> f64 {
        if let Some(t) = cfg.round_threshold {
            return t;
        }
        let m = self.pre.m();
        match (cfg.mode, params) {
            (Mode::Weighted, Some(p)) => weighted_threshold(m, p.eta),
            _ => (m as f64).sqrt(),
        }
    }
}

/// Weighted-mode parameters for `P`, with overrides from the config. `η`
/// follows the capacity bound of the input graph.
pub fn weighted_params(pipe: &Pipeline, cfg: &SolverConfig) -> WeightedParams {
    let m = pipe.pre.m();
    let u = pipe.original.cap_bound();
    let eta = cfg.eta.unwrap_or_else(|| default_eta(m, u));
    let mut params = WeightedParams::for_graph(m, u);
    params.eta = eta;
    params.big_w = cfg.big_w.unwrap_or_else(|| default_big_w(m, eta));
    params.p = cfg.p.unwrap_or_else(|| default_p(m));
    params.budget_per_iter = match cfg.weight_budget_const {
        Some(c) if cfg.enforce_weight_budget => c * (m as f64).powf(4.0 * eta) * u,
        _ => f64::INFINITY,
    };
    if !cfg.enforce_weight_budget {
        params.budget_total = f64::INFINITY;
    }
    params
}

fn backoff_worthy(e: &FlowError) -> bool {
    matches!(
        e,
        FlowError::CongestionExceeded { .. }
            | FlowError::StepBoundExceeded { .. }
            | FlowError::NoConvergence { .. }
            | FlowError::PoorDualFit { .. }
            | FlowError::CouplingLost { .. }
            | FlowError::InfeasibleFlow { .. }
            | FlowError::DegenerateStep
    )
}

fn precond_slack(g: &Graph<f64>, f: &[f64]) -> Result<f64> {
    let rc = residual_caps(g, f)?;
    Ok(g.precond_edges().map(|e| rc.min(e)).fold(f64::INFINITY, f64::min))
}

struct StepInfo {
    delta: f64,
    halvings: u32,
    congestion: f64,
    step_max: f64,
    dual_fit: f64,
    inner_iters: usize,
    w_added: Option<f64>,
    q_norm_error: Option<f64>,
}

fn record(g: &Graph<f64>, mode: Mode, next: &IterateState<f64>, info: StepInfo, coupling_tol: f64, start: Option<Instant>) -> Result<TraceRecord> {
    let ps = potential_state(g, &next.w, &next.f, &next.y)?;
    let potential = potential_value(&ps, &next.w, g).unwrap_or(f64::NAN);
    Ok(TraceRecord {
        iteration: next.iteration,
        mode,
        value: next.value,
        gap: next.gap(),
        delta: info.delta,
        halvings: info.halvings,
        potential,
        congestion: info.congestion,
        step_max: info.step_max,
        w_l1: next.w.l1(),
        w_added: info.w_added,
        q_norm_error: info.q_norm_error,
        coupling: next.coupling_error(g)?,
        coupling_tol: coupling_tolerance(coupling_tol, &next.w),
        dual_fit: info.dual_fit,
        inner_iters: info.inner_iters,
        precond_slack: precond_slack(g, &next.f)?,
        wall_time: start.map(|t| t.elapsed().as_secs_f64()),
    })
}

/// Warm-up schedule: `δ = (F* - F)/(1000√m)` until the gap is at most
/// `threshold`.
pub fn run_warmup(g: &Graph<f64>, mut state: IterateState<f64>, threshold: f64, cfg: &SolverConfig) -> Result<Phase> {
    let step_cfg = cfg.step_config();
    let mut ws = Workspace::new(cfg.laplacian_tol);
    let sqrt_m = (g.m() as f64).sqrt();
    let start = cfg.timing.then(Instant::now);
    let mut records = Vec::new();
    let mut total_halvings = 0u64;
    loop {
        if state.gap() <= threshold {
            return Ok(Phase { state, records, stop: StopReason::Threshold, halvings: total_halvings });
        }
        if state.iteration >= cfg.max_iterations {
            return Ok(Phase { state, records, stop: StopReason::IterationCap, halvings: total_halvings });
        }
        let base = state.gap() / (1000.0 * sqrt_m);
        let mut h = 0u32;
        let outcome = loop {
            let delta = base / 2f64.powi(h as i32);
            let attempt = potential_decrement_step(g, &state.w, &state.f, &state.y, delta, &step_cfg, &mut ws)
                .and_then(|step| advance(g, &state, &step, None, cfg.coupling_tol).map(|next| (step, next)));
            match attempt {
                Ok(ok) => break Ok((delta, ok)),
                Err(e) if backoff_worthy(&e) && h < cfg.max_halvings => h += 1,
                Err(e) => break Err(e),
            }
        };
        total_halvings += h as u64;
        let (delta, (step, next)) = match outcome {
            Ok(v) => v,
            Err(e) if backoff_worthy(&e) => {
                return Ok(Phase { state, records, stop: StopReason::Stalled(e.to_string()), halvings: total_halvings })
            }
            Err(e) => return Err(e),
        };
        let info = StepInfo {
            delta,
            halvings: h,
            congestion: step.congestion,
            step_max: norm_inf(&step.fhat),
            dual_fit: step.dual_fit,
            inner_iters: step.solver_iters,
            w_added: None,
            q_norm_error: None,
        };
        records.push(record(g, Mode::Warmup, &next, info, cfg.coupling_tol, start)?);
        state = next;
    }
}

/// Weighted schedule: `δ = (F* - F)/(5000 m^{1/2-η})` while the gap is at
/// least `threshold`.
pub fn run_weighted(
    g: &Graph<f64>,
    mut state: IterateState<f64>,
    threshold: f64,
    params: &WeightedParams,
    cfg: &SolverConfig,
) -> Result<Phase> {
    let step_cfg = cfg.step_config();
    let mut ws = Workspace::new(cfg.laplacian_tol);
    let scale = 5000.0 * weighted_threshold(g.m(), params.eta);
    let start = cfg.timing.then(Instant::now);
    let mut records = Vec::new();
    let mut total_halvings = 0u64;
    loop {
        if state.gap() < threshold {
            return Ok(Phase { state, records, stop: StopReason::Threshold, halvings: total_halvings });
        }
        if state.iteration >= cfg.max_iterations {
            return Ok(Phase { state, records, stop: StopReason::IterationCap, halvings: total_halvings });
        }
        let base = state.gap() / scale;
        let mut h = 0u32;
        let outcome = loop {
            let delta = base / 2f64.powi(h as i32);
            match weighted_progress_step(g, &state, delta, params, &step_cfg, &mut ws) {
                Ok(ok) => break Ok((delta, ok)),
                Err(e) if backoff_worthy(&e) && h < cfg.max_halvings => h += 1,
                Err(e) => break Err(e),
            }
        };
        total_halvings += h as u64;
        let (delta, (next, change, step, _)) = match outcome {
            Ok(v) => v,
            Err(e @ FlowError::WeightBudgetExceeded { .. }) => {
                return Ok(Phase { state, records, stop: StopReason::WeightBudget(e.to_string()), halvings: total_halvings })
            }
            Err(e) if backoff_worthy(&e) => {
                return Ok(Phase { state, records, stop: StopReason::Stalled(e.to_string()), halvings: total_halvings })
            }
            Err(e) => return Err(e),
        };
        let info = StepInfo {
            delta,
            halvings: h,
            congestion: step.congestion,
            step_max: norm_inf(&step.fhat),
            dual_fit: step.dual_fit,
            inner_iters: step.solver_iters,
            w_added: Some(change.reduced.l1()),
            q_norm_error: (params.big_w > 0.0).then(|| change.q_norm - params.big_w),
        };
        records.push(record(g, Mode::Weighted, &next, info, cfg.coupling_tol, start)?);
        state = next;
    }
}

/// Result of one full attempt at a given `F*` of the input graph.
struct Attempt {
    phase: Phase,
    flow: Vec<i64>,
    value: i64,
    rounded_value: i64,
    fallback: bool,
    augmentations: usize,
    path_remains: bool,
    header: TraceHeader,
}

fn attempt(pipe: &Pipeline, f_star: i64, target: Option<i64>, cfg: &SolverConfig) -> Result<Attempt> {
    let pre = &pipe.pre;
    let f_star_pre = pipe.f_star_pre(f_star as f64);
    let params = (cfg.mode == Mode::Weighted).then(|| weighted_params(pipe, cfg));
    let threshold = pipe.threshold(cfg, params.as_ref());
    let state = initialize(pre, f_star_pre);
    let phase = match &params {
        None => run_warmup(pre, state, threshold, cfg)?,
        Some(p) => run_weighted(pre, state, threshold, p, cfg)?,
    };
    let header = TraceHeader {
        kind: "header".into(),
        config: cfg.clone(),
        n: pre.n(),
        m_input: pipe.original.m(),
        m: pre.m(),
        cap_bound: pre.cap_bound(),
        f_star: f_star_pre,
        threshold,
        eta: params.map(|p| p.eta),
        big_w: params.map(|p| p.big_w),
        p: params.map(|p| p.p),
    };
    // drop the preconditioner edges, then undo the symmetrization
    let h_flow = &phase.state.f[..pipe.sym.graph.m()];
    let lifted = pipe.sym.lift_flow(h_flow);
    let (rounded, fallback) = round_to_integral(&pipe.original, &lifted, cfg.rounding_eps)?;
    let rounded_value = pipe.original.flow_value(&rounded.iter().map(|&x| x as f64).collect::<Vec<_>>()) as i64;
    let aug = augment_to_optimal(&pipe.original, &rounded, target)?;
    Ok(Attempt {
        phase,
        flow: aug.flow,
        value: aug.value,
        rounded_value,
        fallback,
        augmentations: aug.augmentations,
        path_remains: aug.path_remains,
        header,
    })
}

/// Largest value any s-t flow of `g` can have: the smaller of the capacity
/// leaving `s` and entering `t`.
pub fn search_upper_bound(g: &Graph<f64>) -> i64 {
    let (s, t) = (g.source(), g.sink());
    let (mut out_s, mut in_t) = (0.0, 0.0);
    for e in g.edges() {
        if e.tail == s {
            out_s += e.cap_fwd;
        }
        if e.head == s {
            out_s += e.cap_bwd;
        }
        if e.head == t {
            in_t += e.cap_fwd;
        }
        if e.tail == t {
            in_t += e.cap_bwd;
        }
    }
    f64::min(out_s, in_t).floor() as i64
}

/// Binary search for the largest `F` with `probe(F)` true, assuming `probe`
/// is monotone and `probe(lo)` holds. Returns the value and the transcript.
pub fn binary_search_flow(mut lo: i64, mut hi: i64, mut probe: impl FnMut(i64) -> Result<bool>) -> Result<(i64, Vec<Probe>)> {
    let mut probes = Vec::new();
    while lo < hi {
        let mid = lo + (hi - lo + 1) / 2;
        let success = probe(mid)?;
        probes.push(Probe { guess: mid, success });
        if success {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok((lo, probes))
}

/// Full pipeline on a connected graph with integral capacities.
pub fn solve(g: &Graph<f64>, cfg: &SolverConfig) -> Result<SolveReport> {
    integral_edges(g)?;
    let pipe = Pipeline::new(g);
    let oracle = if cfg.oracle_check || cfg.f_star_source == FStarSource::Oracle {
        Some(dinic_max_flow(g)?.0)
    } else {
        None
    };

    let search = |probes: &mut Vec<Probe>| -> Result<(i64, Attempt)> {
        let (best, mut transcript) = binary_search_flow(0, search_upper_bound(g), |guess| {
            let a = attempt(&pipe, guess, Some(guess), cfg)?;
            Ok(a.value >= guess)
        })?;
        probes.append(&mut transcript);
        Ok((best, attempt(&pipe, best, None, cfg)?))
    };

    let mut probes = Vec::new();
    let (f_star, run) = match cfg.f_star_source {
        FStarSource::Oracle => {
            let v = oracle.expect("oracle value computed above");
            (v, attempt(&pipe, v, None, cfg)?)
        }
        FStarSource::Search => search(&mut probes)?,
        FStarSource::Given => {
            let guess = cfg
                .f_star_value
                .ok_or_else(|| FlowError::InvalidParameter("f_star_value is required for the given source".into()))?;
            let a = attempt(&pipe, guess.max(0), Some(guess.max(0)), cfg)?;
            let exact = a.value == guess && !a.path_remains;
            probes.push(Probe { guess, success: exact });
            if exact {
                (guess, a)
            } else {
                search(&mut probes)?
            }
        }
    };

    let edges = integral_edges(g)?;
    let checked = check_integral_flow(&edges, g.n(), g.source(), g.sink(), &run.flow);
    if checked != Some(run.value) {
        return Err(FlowError::InfeasibleFlow { edge: usize::MAX });
    }
    let oracle_value = if cfg.oracle_check { oracle } else { None };
    Ok(SolveReport {
        value: run.value,
        flow: run.flow,
        f_star,
        ipm_iterations: run.phase.state.iteration,
        halvings: run.phase.halvings,
        stop: run.phase.stop.clone(),
        rounded_value: run.rounded_value,
        rounding_fallback: run.fallback,
        augmentations: run.augmentations,
        probes,
        oracle_value,
        oracle_agrees: oracle_value.map(|o| o == run.value),
        header: run.header,
        trace: run.phase.records,
        final_state: run.phase.state,
    })
}

/// Solves a raw instance: zero-capacity edges and everything outside the
/// source's component are dropped first, and an unreachable sink gives the
/// zero flow. The returned flow is indexed like `inst.edges`; `None` is
/// returned in place of a report when no interior point run was needed.
pub fn solve_instance(inst: &FlowInstance, cfg: &SolverConfig) -> Result<(i64, Vec<i64>, Option<SolveReport>)> {
    let mut flow = vec![0i64; inst.edges.len()];
    let Some((g, map)) = inst.source_component()? else {
        return Ok((0, flow, None));
    };
    let report = solve(&g, cfg)?;
    for (k, &i) in map.iter().enumerate() {
        flow[i] = report.flow[k];
    }
    Ok((report.value, flow, Some(report)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    fn toy() -> Graph<f64> {
        build_graph(
            4,
            vec![(0, 1, 1.0, 1.0), (1, 3, 1.0, 1.0), (0, 2, 1.0, 1.0), (2, 3, 1.0, 1.0), (1, 2, 1.0, 1.0)],
            0,
            3,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn warmup_gap_factor() {
        let g = precondition(&toy());
        let m = g.m() as f64;
        let st = initialize(&g, 100.0);
        let cfg = SolverConfig { max_iterations: 1, ..SolverConfig::default() };
        let phase = run_warmup(&g, st, 0.0, &cfg).unwrap();
        assert_eq!(phase.stop, StopReason::IterationCap);
        let r = &phase.records[0];
        assert!((r.gap - 100.0 * (1.0 - 1.0 / (1000.0 * m.sqrt()))).abs() < 1e-9);
    }

    #[test]
    fn toy_warmup_matches_oracle() {
        let cfg = SolverConfig { oracle_check: true, ..SolverConfig::default() };
        let rep = solve(&toy(), &cfg).unwrap();
        assert_eq!(rep.value, 2);
        assert_eq!(rep.oracle_agrees, Some(true));
        assert_eq!(rep.stop, StopReason::Threshold);
        for w in rep.trace.windows(2) {
            assert!(w[1].value >= w[0].value);
        }
    }

    #[test]
    fn search_finds_flow_value() {
        let cfg = SolverConfig { f_star_source: FStarSource::Search, ..SolverConfig::default() };
        let rep = solve(&toy(), &cfg).unwrap();
        assert_eq!((rep.value, rep.f_star), (2, 2));
        assert!(rep.probes.iter().all(|p| p.success == (p.guess <= 2)));
    }

    #[test]
    fn off_by_one_guess_is_corrected() {
        for guess in [1, 3] {
            let cfg = SolverConfig {
                f_star_source: FStarSource::Given,
                f_star_value: Some(guess),
                oracle_check: true,
                ..SolverConfig::default()
            };
            let rep = solve(&toy(), &cfg).unwrap();
            assert!(!rep.probes[0].success);
            assert_eq!(rep.value, 2);
            assert_eq!(rep.oracle_agrees, Some(true));
        }
    }

    #[test]
    fn zero_capacity_cut_gives_zero() {
        let inst = FlowInstance {
            n: 3,
            source: 0,
            sink: 2,
            edges: vec![(0, 1, 1.0, 0.0), (1, 2, 0.0, 0.0)],
        };
        let (v, f, rep) = solve_instance(&inst, &SolverConfig::default()).unwrap();
        assert_eq!((v, f, rep.is_none()), (0, vec![0, 0], true));
    }

    #[test]
    fn binary_search_is_monotone() {
        let (v, probes) = binary_search_flow(0, 40, |x| Ok(x <= 17)).unwrap();
        assert_eq!(v, 17);
        assert!(probes.iter().all(|p| p.success == (p.guess <= 17)));
    }
}
