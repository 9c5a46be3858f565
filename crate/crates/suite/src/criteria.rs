//! The acceptance criteria as functions returning a verdict and a one-line
//! summary, shared by the acceptance test target and the CLI.

use std::time::Instant;

use ipmflow::barrier::{box_radius, decrement_edge, decrement_edge_raw, g_edge, g_edge_raw, Weights};
use ipmflow::driver::{run_warmup, run_weighted, weighted_params, Pipeline, StopReason};
use ipmflow::graph::residual_caps;
use ipmflow::laplacian::electrical_flow;
use ipmflow::potential_step::Workspace;
use ipmflow::state::initialize;
use ipmflow::trace::{TraceHeader, TraceRecord};
use ipmflow::weighted_step::{
    composite_hessian_diag, composite_objective, lookup, power_bounds, sandwich_bounds, solve_composite, POWER_CONSTANTS,
    VAL_CONSTANTS,
};
use ipmflow::{build_graph, precondition, Graph, Mode, SolverConfig};
use ipmflow_oracles::{composite, composite_reference, electrical_reference, CompositeEdge};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calibrate::{sample_power_case, sample_val_case, P_VALUES};
use crate::generate::{generate, Family};
use crate::suite::{dinic_value, run_suite, RunRecord};

#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<28} {}  {}",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

/// Wall-clock budget for the exactness suite.
pub const SUITE_SECONDS: f64 = 300.0;

fn records(runs: &[RunRecord]) -> impl Iterator<Item = (&RunRecord, &TraceRecord)> {
    runs.iter()
        .filter_map(|r| r.report.as_ref().map(|rep| (r, rep)))
        .flat_map(|(r, rep)| rep.trace.iter().map(move |t| (r, t)))
}

pub fn exactness(runs: &[RunRecord], seconds: f64) -> Verdict {
    let wrong: Vec<String> = runs
        .iter()
        .filter(|r| !r.exact())
        .map(|r| format!("{}/{:?}#{}", r.family.name(), r.mode, r.index))
        .collect();
    let pass = wrong.is_empty() && seconds <= SUITE_SECONDS && !runs.is_empty();
    Verdict {
        id: 1,
        name: "exactness",
        pass,
        detail: format!(
            "{} runs, {} inexact {:?}, {:.1}s of {:.0}s",
            runs.len(),
            wrong.len(),
            wrong.iter().take(5).collect::<Vec<_>>(),
            seconds,
            SUITE_SECONDS
        ),
    }
}

pub fn congestion(runs: &[RunRecord]) -> Verdict {
    let mut checked = 0;
    let mut rho_bad = 0;
    let mut step_bad = 0;
    let mut worst = 0.0f64;
    for (r, t) in records(runs) {
        checked += 1;
        worst = worst.max(t.congestion);
        if !(t.congestion <= 0.1) {
            rho_bad += 1;
        }
        if r.mode == Mode::Weighted {
            let h = &r.report.as_ref().unwrap().header;
            let bound = 9.0 * (h.m as f64).powf(-2.0 * h.eta.unwrap_or(0.0));
            if !(t.step_max <= bound) {
                step_bad += 1;
            }
        }
    }
    Verdict {
        id: 2,
        name: "congestion invariant",
        pass: rho_bad == 0 && step_bad == 0 && checked > 0,
        detail: format!("{checked} iterates, max ρ {worst:.3e}, {rho_bad} ρ violations, {step_bad} step-bound violations"),
    }
}

pub fn coupling(runs: &[RunRecord]) -> Verdict {
    let mut checked = 0;
    let mut bad = 0;
    let mut worst = 0.0f64;
    for (r, t) in records(runs) {
        checked += 1;
        let m = r.report.as_ref().unwrap().header.m as f64;
        let tol = 1e-8 * (1.0 + t.w_l1 / m);
        worst = worst.max(t.coupling / tol);
        if !(t.coupling <= tol) {
            bad += 1;
        }
    }
    Verdict {
        id: 3,
        name: "coupling",
        pass: bad == 0 && checked > 0,
        detail: format!("{checked} advances, worst residual/tolerance {worst:.3e}, {bad} violations"),
    }
}

pub fn weight_budget(runs: &[RunRecord]) -> Verdict {
    weight_budget_inner(runs, true)
}

fn weight_budget_inner(runs: &[RunRecord], require_uncut: bool) -> Verdict {
    let mut iterates = 0;
    let mut over = 0;
    let mut q_bad = 0;
    let mut worst_q = 0.0f64;
    let mut weighted = 0;
    let mut cut = 0;
    let mut progress = Vec::new();
    for r in runs.iter().filter(|r| r.mode == Mode::Weighted) {
        let Some(rep) = &r.report else { continue };
        weighted += 1;
        let m = rep.header.m as f64;
        for t in &rep.trace {
            iterates += 1;
            if !(t.w_l1 <= 3.0 * m) {
                over += 1;
            }
            let q = t.q_norm_error.unwrap_or(f64::NAN).abs();
            worst_q = worst_q.max(q);
            if !(q <= 1e-10) {
                q_bad += 1;
            }
        }
        if matches!(rep.stop, StopReason::WeightBudget(_)) {
            cut += 1;
            let f0 = rep.header.f_star;
            progress.push(1.0 - rep.final_state.gap() / f0);
        }
    }
    let mean_progress = if progress.is_empty() { 1.0 } else { progress.iter().sum::<f64>() / progress.len() as f64 };
    Verdict {
        id: 4,
        name: "weight budget",
        pass: over == 0 && q_bad == 0 && (cut == 0 || !require_uncut) && weighted > 0,
        detail: format!(
            "{weighted} weighted runs, {cut} stopped because the next step would exceed ‖w‖₁ ≤ 3m \
             (mean fraction of F* routed before stopping {mean_progress:.3}); {iterates} iterates, \
             {over} over budget, max |‖r′‖_q - W| {worst_q:.1e}, {q_bad} q-norm violations"
        ),
    }
}

pub fn preconditioner_slack(runs: &[RunRecord]) -> Verdict {
    let mut checked = 0;
    let mut bad = 0;
    let mut worst = f64::INFINITY;
    for (r, t) in records(runs) {
        checked += 1;
        let m = r.report.as_ref().unwrap().header.m as f64;
        let need = t.gap / (21.0 * m);
        worst = worst.min(t.precond_slack / need);
        if !(t.precond_slack >= need) {
            bad += 1;
        }
    }
    Verdict {
        id: 5,
        name: "preconditioner slack",
        pass: bad == 0 && checked > 0,
        detail: format!("{checked} iterates, min slack/required {worst:.3}, {bad} violations"),
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..hi.ln()).exp()
}

fn random_connected(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<(usize, usize)> {
    let inst = generate(Family::UnitRandom, n, m, 1, rng.gen()).expect("valid random graph");
    inst.edges.iter().map(|&(a, b, _, _)| (a, b)).collect()
}

pub fn electrical_equivalence(seed: u64) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_energy, mut worst_edge) = (0.0f64, 0.0f64);
    let mut bad = 0;
    let graphs = 100;
    for _ in 0..graphs {
        let n = rng.gen_range(2..=50);
        let m = rng.gen_range(n - 1..=(3 * n).min(n * (n - 1) / 2));
        let edges = random_connected(&mut rng, n, m);
        let s = 0;
        let t = rng.gen_range(1..n);
        let g = build_graph(n, edges.iter().map(|&(a, b)| (a, b, 1.0, 1.0)), s, t, 1.0).unwrap();
        let r: Vec<f64> = (0..m).map(|_| log_uniform(&mut rng, 1e-2, 1e2)).collect();
        let demand: Vec<f64> = if rng.gen_bool(0.5) {
            g.st_demand(rng.gen_range(0.1..10.0))
        } else {
            let mut d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mean = d.iter().sum::<f64>() / n as f64;
            d.iter_mut().for_each(|x| *x -= mean);
            d
        };
        let ours = electrical_flow(&g, &r, &demand, 1e-14).unwrap();
        let reference = electrical_reference(n, &edges, &r, &demand).unwrap();
        let energy: f64 = ours.iter().zip(&r).map(|(f, r)| r * f * f).sum();
        let e_err = (energy - reference.energy).abs() / reference.energy.abs().max(f64::MIN_POSITIVE);
        // edges carrying under a millionth of the peak flow are compared absolutely
        let floor = 1e-6 * reference.flow.iter().fold(0.0, |a: f64, b| a.max(b.abs()));
        let f_err = ours
            .iter()
            .zip(&reference.flow)
            .map(|(a, b)| if a == b { 0.0 } else { (a - b).abs() / b.abs().max(floor) })
            .fold(0.0, f64::max);
        worst_energy = worst_energy.max(e_err);
        worst_edge = worst_edge.max(f_err);
        if !(e_err <= 1e-8 && f_err <= 1e-6) {
            bad += 1;
        }
    }
    Verdict {
        id: 6,
        name: "electrical-flow oracle",
        pass: bad == 0,
        detail: format!("{graphs} graphs, worst energy rel {worst_energy:.2e}, worst per-edge rel {worst_edge:.2e}, {bad} failures"),
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Relative gaps between analytic first/second derivatives of a scalar jet
/// and central differences.
fn jet_fd(f: impl Fn(f64) -> (f64, f64, f64), x: f64, h: f64) -> (f64, f64) {
    let (_, d1, d2) = f(x);
    let (vp, dp, _) = f(x + h);
    let (vm, dm, _) = f(x - h);
    (rel_err(d1, (vp - vm) / (2.0 * h)), rel_err(d2, (dp - dm) / (2.0 * h)))
}

pub fn calculus(seed: u64) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = 1000;
    let tol = 1e-5;
    let mut worst = [0.0f64; 3];
    let mut bad = [0usize; 3];
    let mut knot_worst = 0.0f64;

    for _ in 0..samples {
        let (wp, wm) = (log_uniform(&mut rng, 0.1, 10.0), log_uniform(&mut rng, 0.1, 10.0));
        let (up, um) = (log_uniform(&mut rng, 0.1, 10.0), log_uniform(&mut rng, 0.1, 10.0));
        let ell = box_radius(up, um);
        let h = 1e-4 * ell;
        let mut x = rng.gen_range(-3.0 * ell..3.0 * ell);
        if (x.abs() - ell).abs() < 2.0 * h {
            x *= 0.5;
        }
        let (a, b) = jet_fd(|z| decrement_edge(wp, wm, up, um, z), x, h);
        worst[0] = worst[0].max(a.max(b));
        bad[0] += usize::from(!(a <= tol && b <= tol));
        let (a, b) = jet_fd(|z| g_edge(up, um, z), x, h);
        worst[1] = worst[1].max(a.max(b));
        bad[1] += usize::from(!(a <= tol && b <= tol));

        // C² at both knots: jets just inside and just outside agree
        for k in [ell, -ell] {
            let tau = 1e-9 * ell;
            for (inside, outside) in [
                (decrement_edge_raw(wp, wm, up, um, k * (1.0 - 1e-9)), decrement_edge(wp, wm, up, um, k + tau.copysign(k))),
                (g_edge_raw(up, um, k * (1.0 - 1e-9)), g_edge(up, um, k + tau.copysign(k))),
            ] {
                let scale = inside.2 * ell * ell + inside.0.abs();
                knot_worst = knot_worst
                    .max((inside.0 - outside.0).abs() / scale)
                    .max((inside.1 - outside.1).abs() * ell / scale)
                    .max((inside.2 - outside.2).abs() * ell * ell / scale);
            }
        }
    }

    // composite: one random coordinate per sample
    let mut done = 0;
    while done < samples {
        let n = rng.gen_range(4..=8);
        let m = rng.gen_range(n..=(2 * n).min(n * (n - 1) / 2));
        let edges = random_connected(&mut rng, n, m);
        let g: Graph<f64> = precondition(&build_graph(n, edges.iter().map(|&(a, b)| (a, b, 1.0, 1.0)), 0, n - 1, 1.0).unwrap());
        let w = Weights {
            fwd: (0..g.m()).map(|_| log_uniform(&mut rng, 0.5, 2.0)).collect(),
            bwd: (0..g.m()).map(|_| log_uniform(&mut rng, 0.5, 2.0)).collect(),
        };
        let f: Vec<f64> = g.edges().iter().map(|e| rng.gen_range(-0.5..0.5) * e.cap_fwd.min(e.cap_bwd)).collect();
        let rc = residual_caps(&g, &f).unwrap();
        let big_w = rng.gen_range(0.5..20.0);
        let p = [2, 4][rng.gen_range(0..2)];
        for _ in 0..50 {
            let x: Vec<f64> = (0..g.m()).map(|e| rng.gen_range(-2.0..2.0) * box_radius(rc.fwd[e], rc.bwd[e])).collect();
            let e = rng.gen_range(0..g.m());
            let h = 1e-4 * box_radius(rc.fwd[e], rc.bwd[e]);
            let at = |d: f64| {
                let mut y = x.clone();
                y[e] += d;
                y
            };
            let (_, grad) = composite_objective(&g, &w, &f, &x, big_w, p).unwrap();
            let hess = composite_hessian_diag(&g, &w, &f, &x, big_w, p).unwrap();
            let (vp, gp) = composite_objective(&g, &w, &f, &at(h), big_w, p).unwrap();
            let (vm, gm) = composite_objective(&g, &w, &f, &at(-h), big_w, p).unwrap();
            let a = rel_err(grad[e], (vp - vm) / (2.0 * h));
            let b = rel_err(hess[e], (gp[e] - gm[e]) / (2.0 * h));
            worst[2] = worst[2].max(a.max(b));
            bad[2] += usize::from(!(a <= tol && b <= tol));
            done += 1;
        }
    }
    let pass = bad.iter().all(|&b| b == 0) && knot_worst <= 1e-6;
    Verdict {
        id: 7,
        name: "calculus checks",
        pass,
        detail: format!(
            "{samples} samples each; worst rel (ΔΦ, g, composite) = ({:.1e}, {:.1e}, {:.1e}), failures {:?}; knot mismatch {knot_worst:.1e}",
            worst[0], worst[1], worst[2], bad
        ),
    }
}

pub fn sandwich(seed: u64) -> Verdict {
    let samples = 10_000;
    let mut bad_val = 0;
    let mut bad_pow = 0;
    for p in P_VALUES {
        let kv = lookup(&VAL_CONSTANTS, p).expect("constants for every calibrated p");
        let kp = lookup(&POWER_CONSTANTS, p).expect("constants for every calibrated p");
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ p as u64);
        for _ in 0..samples {
            let (edge, f, delta) = sample_val_case(&mut rng);
            let (lo, hi, act) = sandwich_bounds(&edge, f, delta, p, &kv);
            bad_val += usize::from(!(lo <= act && act <= hi));
            let (f, delta) = sample_power_case(&mut rng);
            let (lo, hi, act) = power_bounds(f, delta, p, &kp);
            bad_pow += usize::from(!(lo <= act && act <= hi));
        }
    }
    Verdict {
        id: 8,
        name: "sandwich suite",
        pass: bad_val == 0 && bad_pow == 0,
        detail: format!(
            "{samples} samples per bound for each p in {:?}; violations: val_e {bad_val}, power {bad_pow}",
            P_VALUES
        ),
    }
}

/// A mid-run iterate on a preconditioned random graph with `m ≤ 100`.
fn composite_instance(rng: &mut ChaCha8Rng) -> (Graph<f64>, ipmflow::IterateState64, SolverConfig) {
    let n = rng.gen_range(5..=15);
    let m = rng.gen_range(n..=(3 * n).min(n * (n - 1) / 2).min(50));
    let inst = generate(Family::UnitRandom, n, m, 1, rng.gen()).unwrap();
    let g = inst.to_graph().unwrap();
    let pipe = Pipeline::new(&g);
    let f_star = pipe.f_star_pre(dinic_value(&inst) as f64);
    let cfg = SolverConfig { max_iterations: rng.gen_range(0..300), ..SolverConfig::default() };
    let state = initialize(&pipe.pre, f_star);
    let phase = run_warmup(&pipe.pre, state, 0.0, &cfg).unwrap();
    (pipe.pre, phase.state, SolverConfig { mode: Mode::Weighted, ..cfg })
}

pub fn composite_equivalence(seed: u64) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = 20;
    let mut worst = 0.0f64;
    let mut bad = 0;
    let mut ref_iters = 0;
    for _ in 0..count {
        let (g, st, cfg) = composite_instance(&mut rng);
        let pipe_params = {
            let m = g.m();
            let mut p = ipmflow::weighted_step::WeightedParams::for_graph(m, 1.0);
            p.big_w = rng.gen_range(1.0..(m as f64));
            p
        };
        let thr = ipmflow::weighted_step::weighted_threshold(g.m(), pipe_params.eta);
        let delta = st.gap() / (rng.gen_range(50.0..5000.0) * thr);
        let mut ws = Workspace::new(cfg.laplacian_tol);
        let sol = solve_composite(&g, &st.w, &st.f, &st.y, delta, &pipe_params, &cfg.step_config(), &mut ws).unwrap();

        // independent objective data
        let data: Vec<CompositeEdge> = g
            .edges()
            .iter()
            .enumerate()
            .map(|(e, ed)| {
                let up = ed.cap_fwd - st.f[e];
                let um = ed.cap_bwd + st.f[e];
                let (wp, wm) = (st.w.fwd[e], st.w.bwd[e]);
                let corr = (st.y[ed.head] - st.y[ed.tail]) - (wp / up - wm / um);
                CompositeEdge { wp, wm, up, um, corr }
            })
            .collect();
        let edges: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.tail, e.head)).collect();
        let demand = g.st_demand(delta);
        let reference = composite_reference(g.n(), &edges, &data, pipe_params.big_w, pipe_params.p, &demand, 200_000).unwrap();
        ref_iters = ref_iters.max(reference.iterations);
        let ours = composite(&data, pipe_params.big_w, pipe_params.p, &sol.fhat).0;
        let err = (ours - reference.value).abs() / reference.value.abs();
        worst = worst.max(err);
        if !(err <= 1e-6) {
            bad += 1;
        }
    }
    Verdict {
        id: 9,
        name: "composite solver",
        pass: bad == 0,
        detail: format!("{count} instances, worst relative objective gap {worst:.2e}, {bad} failures (reference ran up to {ref_iters} iterations)"),
    }
}

/// One line of the weighted-mode iteration report.
#[derive(Debug, Clone)]
pub struct WeightedCount {
    pub m: usize,
    pub iterations: usize,
    pub stop: StopReason,
    pub routed: f64,
    pub scale: f64,
    pub seconds: f64,
}

/// Weighted runs on preconditioned random graphs with `m = 2^k`, capped at
/// `cap` iterations. Report only.
pub fn weighted_counts(exponents: std::ops::RangeInclusive<u32>, cap: usize, seed: u64) -> Vec<WeightedCount> {
    let mut out = Vec::new();
    for k in exponents {
        let m_pre = 1usize << k;
        let m = m_pre / 2;
        let n = (m / 3).max(6).min(m);
        let inst = generate(Family::UnitRandom, n, m, 1, seed ^ k as u64).unwrap();
        let g = inst.to_graph().unwrap();
        let pipe = Pipeline::new(&g);
        let cfg = SolverConfig { mode: Mode::Weighted, max_iterations: cap, ..SolverConfig::default() };
        let params = weighted_params(&pipe, &cfg);
        let f_star = pipe.f_star_pre(dinic_value(&inst) as f64);
        let start = Instant::now();
        let threshold = pipe.threshold(&cfg, Some(&params));
        let phase = run_weighted(&pipe.pre, initialize(&pipe.pre, f_star), threshold, &params, &cfg).unwrap();
        out.push(WeightedCount {
            m: pipe.pre.m(),
            iterations: phase.state.iteration,
            stop: phase.stop,
            routed: phase.state.value / f_star,
            scale: ipmflow::weighted_step::weighted_threshold(pipe.pre.m(), params.eta),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    out
}

pub fn iteration_accounting(runs: &[RunRecord], weighted: &[WeightedCount]) -> Verdict {
    let mut checked = 0;
    let mut bad = 0;
    let mut worst = 0.0f64;
    for r in runs.iter().filter(|r| r.mode == Mode::Warmup) {
        let Some(rep) = &r.report else { continue };
        checked += 1;
        let m = rep.header.m as f64;
        let bound = 1.1 * 1000.0 * m.sqrt() * (rep.header.f_star / m.sqrt()).ln();
        worst = worst.max(rep.ipm_iterations as f64 / bound);
        if !(rep.ipm_iterations as f64 <= bound) {
            bad += 1;
        }
    }
    let trend: Vec<String> = weighted
        .iter()
        .map(|w| format!("m={} it={} routed={:.3} m^(1/2-η)={:.1}", w.m, w.iterations, w.routed, w.scale))
        .collect();
    Verdict {
        id: 10,
        name: "iteration accounting",
        pass: bad == 0 && checked > 0,
        detail: format!(
            "{checked} warm-up runs, max iterations/bound {worst:.3}, {bad} over; weighted (report only): [{}]",
            trend.join("; ")
        ),
    }
}

/// Per-iterate checks on a single trace; returns one message per violation.
pub fn trace_violations(header: &TraceHeader, records: &[TraceRecord]) -> Vec<String> {
    let m = header.m as f64;
    let mut out = Vec::new();
    for t in records {
        let it = t.iteration;
        if !(t.congestion <= 0.1) {
            out.push(format!("iteration {it}: congestion {:.3e} > 0.1", t.congestion));
        }
        if !(t.coupling <= 1e-8 * (1.0 + t.w_l1 / m)) {
            out.push(format!("iteration {it}: coupling residual {:.3e}", t.coupling));
        }
        if !(t.precond_slack >= t.gap / (21.0 * m)) {
            out.push(format!("iteration {it}: preconditioner slack {:.3e}", t.precond_slack));
        }
        if t.mode == Mode::Weighted {
            let bound = 9.0 * m.powf(-2.0 * header.eta.unwrap_or(0.0));
            if !(t.step_max <= bound) {
                out.push(format!("iteration {it}: step {:.3e} > {bound:.3e}", t.step_max));
            }
            if !(t.w_l1 <= 3.0 * m) {
                out.push(format!("iteration {it}: ‖w‖₁ = {:.3e} > 3m", t.w_l1));
            }
            if !(t.q_norm_error.unwrap_or(f64::NAN).abs() <= 1e-10) {
                out.push(format!("iteration {it}: q-norm error {:?}", t.q_norm_error));
            }
        }
    }
    out
}

/// Exactness and the per-iterate invariants on a small suite. Weighted runs
/// that stop at the weight budget are allowed here.
pub fn invariants(per_family: usize, seed: u64, base: &SolverConfig) -> Vec<Verdict> {
    let start = Instant::now();
    let runs = run_suite(per_family, seed, base);
    let secs = start.elapsed().as_secs_f64();
    vec![
        exactness(&runs, secs),
        congestion(&runs),
        coupling(&runs),
        weight_budget_inner(&runs, false),
        preconditioner_slack(&runs),
    ]
}

/// Every acceptance criterion, in order.
pub fn acceptance(per_family: usize, seed: u64, base: &SolverConfig) -> Vec<Verdict> {
    let start = Instant::now();
    let runs = run_suite(per_family, seed, base);
    let secs = start.elapsed().as_secs_f64();
    let weighted = weighted_counts(6..=12, 2000, seed);
    vec![
        exactness(&runs, secs),
        congestion(&runs),
        coupling(&runs),
        weight_budget(&runs),
        preconditioner_slack(&runs),
        electrical_equivalence(seed),
        calculus(seed),
        sandwich(seed),
        composite_equivalence(seed),
        iteration_accounting(&runs, &weighted),
    ]
}
