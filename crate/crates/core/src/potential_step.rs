//! The warm-up progress step: minimize the extended potential decrement
//! over `{f̂ : Bᵀf̂ = δχ}`, recover duals, and advance the iterate.

use serde::{Deserialize, Serialize};

use crate::agd::{agd_minimize, AgdConfig, Constraint};
use crate::barrier::{
    barrier_gradient_rc, coupling_tolerance, decrement_edge, decrement_edge_raw, Weights,
};
use crate::error::{FlowError, Result};
use crate::graph::{congestion, residual_caps, Graph, ResidualCaps};
use crate::laplacian::LaplacianSolver;
use crate::scalar::{lit, norm_inf, to_f64, Scalar};
use crate::state::IterateState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub kappa: f64,
    pub step_tol: f64,
    pub max_inner_iter: usize,
    pub laplacian_tol: f64,
    /// Base of the coupling tolerance `base · (1 + ‖w‖₁/m)`.
    pub coupling_tol: f64,
    pub congestion_limit: f64,
    pub check_congestion: bool,
    /// Use the quadratic extension of each edge term.
    pub extended: bool,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            kappa: 1.9,
            step_tol: 1e-10,
            max_inner_iter: 2000,
            laplacian_tol: 1e-12,
            coupling_tol: 1e-8,
            congestion_limit: 0.1,
            check_congestion: true,
            extended: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<S> {
    pub delta: S,
    pub fhat: Vec<S>,
    pub yhat: Vec<S>,
    pub rho_fwd: Vec<S>,
    pub rho_bwd: Vec<S>,
    /// `max(‖ρ⁺‖∞, ‖ρ⁻‖∞)`.
    pub congestion: S,
    /// Extended potential decrement at `f̂`.
    pub objective: S,
    pub solver_iters: usize,
    pub grad_norm: S,
    pub grad_norm0: S,
    pub dual_fit: S,
}

/// Solver scratch reused across steps of one run.
#[derive(Debug, Clone)]
pub struct Workspace<S> {
    pub lap: LaplacianSolver<S>,
    pub phi_step: Vec<S>,
    pub phi_dual: Vec<S>,
}

impl<S: Scalar> Workspace<S> {
    pub fn new(laplacian_tol: f64) -> Self {
        Workspace {
            lap: LaplacianSolver::new(lit(laplacian_tol)),
            phi_step: Vec::new(),
            phi_dual: Vec::new(),
        }
    }

    pub(crate) fn ensure(&mut self, n: usize) {
        if self.phi_step.len() != n {
            self.phi_step = vec![S::zero(); n];
        }
        if self.phi_dual.len() != n {
            self.phi_dual = vec![S::zero(); n];
        }
    }
}

/// `By - ∇φ_w(f)`, the part of the dual that the next step must absorb.
pub(crate) fn coupling_gap<S: Scalar>(g: &Graph<S>, w: &Weights<S>, rc: &ResidualCaps<S>, y: &[S]) -> Vec<S> {
    let grad = barrier_gradient_rc(w, rc);
    g.edges()
        .iter()
        .zip(grad)
        .map(|(e, d)| (y[e.head] - y[e.tail]) - d)
        .collect()
}

/// Starting point `δχ` spread evenly over the preconditioner edges, or the
/// electrical flow under `d` when there are none.
pub(crate) fn warm_start<S: Scalar>(g: &Graph<S>, delta: S, d: &[S], ws: &mut Workspace<S>) -> Result<Vec<S>> {
    let k = g.precond_count();
    let mut x0 = vec![S::zero(); g.m()];
    if k > 0 {
        let share = delta / lit(k as f64);
        for e in g.precond_edges() {
            let edge = g.edge(e);
            x0[e] = if edge.tail == g.source() { share } else { -share };
        }
        return Ok(x0);
    }
    let chi = g.st_demand(delta);
    let zero = vec![S::zero(); g.m()];
    ws.lap.project_into(g, d, &zero, &chi, &mut ws.phi_step, &mut x0)?;
    Ok(x0)
}

/// Hessian diagonal of the potential decrement at `f̂ = 0`.
pub(crate) fn base_hessian<S: Scalar>(w: &Weights<S>, rc: &ResidualCaps<S>) -> Vec<S> {
    (0..rc.len())
        .map(|e| w.fwd[e] / (rc.fwd[e] * rc.fwd[e]) + w.bwd[e] / (rc.bwd[e] * rc.bwd[e]))
        .collect()
}

/// Extended decrement minus the coupling correction `f̂ᵀ(By - ∇φ_w(f))`.
pub(crate) fn step_objective<S: Scalar>(
    w: &Weights<S>,
    rc: &ResidualCaps<S>,
    corr: &[S],
    extended: bool,
    x: &[S],
    grad: &mut [S],
) -> S {
    let mut total = S::zero();
    for e in 0..x.len() {
        let (wp, wm, up, um) = (w.fwd[e], w.bwd[e], rc.fwd[e], rc.bwd[e]);
        let (v, d1, _) = if extended {
            decrement_edge(wp, wm, up, um, x[e])
        } else {
            decrement_edge_raw(wp, wm, up, um, x[e])
        };
        total += v - x[e] * corr[e];
        grad[e] = d1 - corr[e];
    }
    total
}

/// Least-squares `ŷ` with `Bŷ ≈ target`. Returns `ŷ` and `‖Bŷ - target‖∞`.
pub fn fit_duals<S: Scalar>(g: &Graph<S>, target: &[S], ws: &mut Workspace<S>) -> Result<(Vec<S>, S)> {
    ws.ensure(g.n());
    let rhs = g.divergence(target);
    let ones = vec![S::one(); g.m()];
    let mut yhat = std::mem::take(&mut ws.phi_dual);
    let res = ws.lap.solve_into(g, &ones, &rhs, &mut yhat);
    let out = yhat.clone();
    ws.phi_dual = yhat;
    res?;
    let fit = g
        .edges()
        .iter()
        .zip(target)
        .fold(S::zero(), |acc, (e, &t)| acc.max((out[e.head] - out[e.tail] - t).abs()));
    Ok((out, fit))
}

/// Dual update for a coupled iterate: fits `Bŷ` to
/// `∇φ_w(f + f̂) - ∇φ_w(f)`.
pub fn dual_update<S: Scalar>(
    g: &Graph<S>,
    w: &Weights<S>,
    f: &[S],
    fhat: &[S],
    tol: S,
    ws: &mut Workspace<S>,
) -> Result<(Vec<S>, S)> {
    let rc = residual_caps(g, f)?;
    let moved: Vec<S> = f.iter().zip(fhat).map(|(&a, &b)| a + b).collect();
    let rc_new = residual_caps(g, &moved)?;
    let target: Vec<S> = barrier_gradient_rc(w, &rc_new)
        .into_iter()
        .zip(barrier_gradient_rc(w, &rc))
        .map(|(a, b)| a - b)
        .collect();
    let (yhat, fit) = fit_duals(g, &target, ws)?;
    if fit > tol {
        return Err(FlowError::PoorDualFit {
            residual: to_f64(fit),
            tol: to_f64(tol),
        });
    }
    Ok((yhat, fit))
}

/// One warm-up step of size `δ` from the iterate `(f, y, w)`.
pub fn potential_decrement_step<S: Scalar>(
    g: &Graph<S>,
    w: &Weights<S>,
    f: &[S],
    y: &[S],
    delta: S,
    cfg: &StepConfig,
    ws: &mut Workspace<S>,
) -> Result<StepResult<S>> {
    ws.ensure(g.n());
    let rc = residual_caps(g, f)?;
    let corr = coupling_gap(g, w, &rc, y);
    let h0 = base_hessian(w, &rc);
    let shrink = lit::<S>(1.0 / 1.21);
    let d: Vec<S> = h0.iter().map(|&h| h * shrink).collect();
    let x0 = warm_start(g, delta, &d, ws)?;
    let chi = g.st_demand(delta);
    let agd_cfg = AgdConfig {
        kappa: lit(cfg.kappa),
        tol: lit(cfg.step_tol),
        max_iter: cfg.max_inner_iter,
    };
    let res = agd_minimize(
        |x, grad| step_objective(w, &rc, &corr, cfg.extended, x, grad),
        Some(Constraint {
            graph: g,
            demand: &chi,
            solver: &mut ws.lap,
            phi: &mut ws.phi_step,
        }),
        &x0,
        &d,
        &agd_cfg,
    )?;
    finish_step(g, w, None, f, y, &rc, delta, res.x, res.iters, res.grad_map, res.grad_map0, cfg, ws)
}

/// Congestion check and dual recovery shared by both step kinds. `w_add` is
/// the weight increase applied together with the step.
#[allow(clippy::too_many_arguments)]
pub(crate) fn finish_step<S: Scalar>(
    g: &Graph<S>,
    w: &Weights<S>,
    w_add: Option<&Weights<S>>,
    f: &[S],
    y: &[S],
    rc: &ResidualCaps<S>,
    delta: S,
    fhat: Vec<S>,
    iters: usize,
    grad_norm: S,
    grad_norm0: S,
    cfg: &StepConfig,
    ws: &mut Workspace<S>,
) -> Result<StepResult<S>> {
    let rho = congestion(&fhat, rc);
    let cong = rho.max();
    if cfg.check_congestion && to_f64(cong) > cfg.congestion_limit {
        return Err(FlowError::CongestionExceeded {
            congestion: to_f64(cong),
            limit: cfg.congestion_limit,
        });
    }
    let moved: Vec<S> = f.iter().zip(&fhat).map(|(&a, &b)| a + b).collect();
    let rc_new = residual_caps(g, &moved)?;
    let mut w_new = w.clone();
    if let Some(add) = w_add {
        w_new.add_assign(add);
    }
    let by_old: Vec<S> = g.gradient(y);
    let target: Vec<S> = barrier_gradient_rc(&w_new, &rc_new)
        .into_iter()
        .zip(by_old)
        .map(|(a, b)| a - b)
        .collect();
    let (yhat, fit) = fit_duals(g, &target, ws)?;
    let tol = coupling_tolerance(lit(cfg.coupling_tol), &w_new);
    if fit > tol {
        return Err(FlowError::PoorDualFit {
            residual: to_f64(fit),
            tol: to_f64(tol),
        });
    }
    let mut grad = vec![S::zero(); g.m()];
    let mut hess = vec![S::zero(); g.m()];
    let objective = crate::barrier::decrement_eval(w, rc, &fhat, true, &mut grad, &mut hess);
    Ok(StepResult {
        delta,
        fhat,
        yhat,
        rho_fwd: rho.fwd,
        rho_bwd: rho.bwd,
        congestion: cong,
        objective,
        solver_iters: iters,
        grad_norm,
        grad_norm0,
        dual_fit: fit,
    })
}

/// `f ← f + f̂`, `y ← y + ŷ`, `F ← F + δ`, `w ← w + w_add`, then re-checks
/// the coupling condition.
pub fn advance<S: Scalar>(
    g: &Graph<S>,
    state: &IterateState<S>,
    step: &StepResult<S>,
    w_add: Option<&Weights<S>>,
    coupling_tol: f64,
) -> Result<IterateState<S>> {
    let mut next = state.clone();
    for (a, &b) in next.f.iter_mut().zip(&step.fhat) {
        *a += b;
    }
    for (a, &b) in next.y.iter_mut().zip(&step.yhat) {
        *a += b;
    }
    if let Some(add) = w_add {
        next.w.add_assign(add);
    }
    next.value += step.delta;
    next.iteration += 1;
    let err = next.coupling_error(g)?;
    let tol = coupling_tolerance(lit(coupling_tol), &next.w);
    if !(err <= tol) {
        return Err(FlowError::CouplingLost {
            residual: to_f64(err),
            tol: to_f64(tol),
        });
    }
    Ok(next)
}

/// `‖x‖∞` of a step, exposed for diagnostics.
pub fn step_magnitude<S: Scalar>(step: &StepResult<S>) -> S {
    norm_inf(&step.fhat)
}
