//! Weighted-barrier progress step: minimize the composite objective
//! `ΔΦ_w(f̂) + W‖g(f̂)‖_p`, read the weight change off its optimality
//! conditions, reduce it, and advance.

use serde::{Deserialize, Serialize};

use crate::barrier::{decrement_edge, g_edge, Weights};
use crate::error::{FlowError, Result};
use crate::graph::{residual_caps, Graph, ResidualCaps};
use crate::potential_step::{advance, coupling_gap, finish_step, warm_start, StepConfig, StepResult, Workspace};
use crate::scalar::{lit, norm_inf, to_f64, Scalar};
use crate::state::IterateState;

/// `p`: the even integer nearest to `√(log₂ m)`, at least 2.
pub fn default_p(m: usize) -> u32 {
    let target = (m.max(2) as f64).log2().sqrt();
    let half = (target / 2.0).round().max(1.0);
    2 * half as u32
}

/// `η = 1/6 - (1/3) log_m U`, clamped to `[0, 1/6]`.
pub fn default_eta(m: usize, cap_bound: f64) -> f64 {
    let m = m.max(2) as f64;
    let eta = 1.0 / 6.0 - cap_bound.max(1.0).ln() / (3.0 * m.ln());
    eta.clamp(0.0, 1.0 / 6.0)
}

/// `W = m^{6η}`.
pub fn default_big_w(m: usize, eta: f64) -> f64 {
    (m.max(1) as f64).powf(6.0 * eta)
}

/// `m^{1/2-η}`: both the termination threshold and the iteration scale.
pub fn weighted_threshold(m: usize, eta: f64) -> f64 {
    (m.max(1) as f64).powf(0.5 - eta)
}

/// `δ = (F* - F)/(5000 m^{1/2-η})`.
pub fn weighted_delta(gap: f64, m: usize, eta: f64) -> f64 {
    gap / (5000.0 * weighted_threshold(m, eta))
}

/// `9 m^{-2η}`.
pub fn step_bound(m: usize, eta: f64) -> f64 {
    9.0 * (m.max(1) as f64).powf(-2.0 * eta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedParams {
    pub eta: f64,
    pub big_w: f64,
    pub p: u32,
    /// Per-iteration cap on `‖w″‖₁`.
    pub budget_per_iter: f64,
    /// Cap on `‖w‖₁` after every step.
    pub budget_total: f64,
    /// `‖g‖_p` below which the p-th power route is used.
    pub norm_floor: f64,
    pub max_newton_iter: usize,
}

impl WeightedParams {
    pub fn for_graph(m: usize, cap_bound: f64) -> Self {
        let eta = default_eta(m, cap_bound);
        WeightedParams {
            eta,
            big_w: default_big_w(m, eta),
            p: default_p(m),
            budget_per_iter: f64::INFINITY,
            budget_total: 3.0 * m as f64,
            norm_floor: 1e-12,
            max_newton_iter: 200,
        }
    }
}

/// Per-edge derivative data of the composite objective at a point.
struct CompositeEval<S> {
    value: S,
    grad: Vec<S>,
    /// Diagonal part of the Hessian.
    h: Vec<S>,
    /// The Hessian is `diag(h) - c·vvᵀ`.
    v: Vec<S>,
    c: S,
    norm: S,
}

/// The composite objective with a linear correction `-f̂ᵀcorr` absorbing the
/// coupling error of the current iterate.
pub struct Composite<'a, S> {
    pub w: &'a Weights<S>,
    pub rc: &'a ResidualCaps<S>,
    pub corr: &'a [S],
    pub big_w: S,
    pub p: u32,
}

fn p_norm<S: Scalar>(gv: &[S], p: u32) -> S {
    let gmax = norm_inf(gv);
    if gmax == S::zero() {
        return S::zero();
    }
    let s: S = gv.iter().map(|&x| (x / gmax).powi(p as i32)).sum();
    gmax * s.powf(S::one() / lit(p as f64))
}

impl<'a, S: Scalar> Composite<'a, S> {
    pub fn value(&self, x: &[S]) -> S {
        let mut total = S::zero();
        let mut gv = Vec::with_capacity(x.len());
        for e in 0..x.len() {
            let (v, _, _) = decrement_edge(self.w.fwd[e], self.w.bwd[e], self.rc.fwd[e], self.rc.bwd[e], x[e]);
            total += v - x[e] * self.corr[e];
            gv.push(g_edge(self.rc.fwd[e], self.rc.bwd[e], x[e]).0);
        }
        if self.big_w == S::zero() {
            return total;
        }
        total + self.big_w * p_norm(&gv, self.p)
    }

    fn eval(&self, x: &[S]) -> CompositeEval<S> {
        let m = x.len();
        let mut out = CompositeEval {
            value: S::zero(),
            grad: vec![S::zero(); m],
            h: vec![S::zero(); m],
            v: vec![S::zero(); m],
            c: S::zero(),
            norm: S::zero(),
        };
        let mut gj = Vec::with_capacity(m);
        for e in 0..m {
            let (v, d1, d2) = decrement_edge(self.w.fwd[e], self.w.bwd[e], self.rc.fwd[e], self.rc.bwd[e], x[e]);
            out.value += v - x[e] * self.corr[e];
            out.grad[e] = d1 - self.corr[e];
            out.h[e] = d2;
            gj.push(g_edge(self.rc.fwd[e], self.rc.bwd[e], x[e]));
        }
        if self.big_w == S::zero() {
            return out;
        }
        let gv: Vec<S> = gj.iter().map(|j| j.0).collect();
        let n = p_norm(&gv, self.p);
        out.norm = n;
        if n == S::zero() {
            return out;
        }
        out.value += self.big_w * n;
        let p = self.p as i32;
        let pm1 = lit::<S>((self.p - 1) as f64);
        for e in 0..m {
            let (gval, g1, g2) = gj[e];
            let t = gval / n;
            let tp1 = t.powi(p - 1);
            let tp2 = t.powi(p - 2);
            out.grad[e] += self.big_w * tp1 * g1;
            out.h[e] += self.big_w * (pm1 * tp2 * g1 * g1 / n + tp1 * g2);
            out.v[e] = tp1 * g1;
        }
        out.c = self.big_w * pm1 / n;
        out
    }
}

/// `ΔΦ_w(f, f̂) + W‖g(f̂)‖_p` and its gradient.
pub fn composite_objective<S: Scalar>(
    g: &Graph<S>,
    w: &Weights<S>,
    f: &[S],
    fhat: &[S],
    big_w: S,
    p: u32,
) -> Result<(S, Vec<S>)> {
    let rc = residual_caps(g, f)?;
    g.check_len(fhat)?;
    let corr = vec![S::zero(); g.m()];
    let c = Composite { w, rc: &rc, corr: &corr, big_w, p };
    let ev = c.eval(fhat);
    Ok((ev.value, ev.grad))
}

/// Diagonal of the Hessian of [`composite_objective`] in `f̂`.
pub fn composite_hessian_diag<S: Scalar>(
    g: &Graph<S>,
    w: &Weights<S>,
    f: &[S],
    fhat: &[S],
    big_w: S,
    p: u32,
) -> Result<Vec<S>> {
    let rc = residual_caps(g, f)?;
    g.check_len(fhat)?;
    let corr = vec![S::zero(); g.m()];
    let c = Composite { w, rc: &rc, corr: &corr, big_w, p };
    let ev = c.eval(fhat);
    Ok(ev.h.iter().zip(&ev.v).map(|(&h, &v)| h - ev.c * v * v).collect())
}

#[derive(Debug, Clone)]
pub struct CompositeSolution<S> {
    pub fhat: Vec<S>,
    pub value: S,
    pub iters: usize,
    pub decrement: S,
    pub decrement0: S,
    /// The p-th power route was taken.
    pub used_power_route: bool,
}

/// `S z`: the inverse of `diag(h)` restricted to circulations.
fn restricted_inverse<S: Scalar>(g: &Graph<S>, h: &[S], z: &[S], ws: &mut Workspace<S>, out: &mut [S]) -> Result<()> {
    let raw: Vec<S> = z.iter().zip(h).map(|(&a, &b)| a / b).collect();
    let zero = vec![S::zero(); g.n()];
    ws.lap.project_into(g, h, &raw, &zero, &mut ws.phi_dual, out)?;
    Ok(())
}

/// Damped projected Newton on `obj`, starting from a feasible `x0`. Each
/// iteration minimizes the exact second-order model of the residual
/// problem `min_{Bᵀd=0} ∇ᵀd + ½dᵀ(diag(h) - c vvᵀ)d` in closed form with two
/// Laplacian solves (Sherman–Morrison on the rank-one part).
fn newton_refine<S: Scalar>(
    g: &Graph<S>,
    eval: impl Fn(&[S]) -> CompositeEval<S>,
    value: impl Fn(&[S]) -> S,
    x0: Vec<S>,
    tol: S,
    max_iter: usize,
    ws: &mut Workspace<S>,
) -> Result<(Vec<S>, S, usize, S, S)> {
    let m = g.m();
    let mut x = x0;
    let mut a = vec![S::zero(); m];
    let mut b = vec![S::zero(); m];
    let mut lam0 = S::zero();
    let mut prev_lam = S::infinity();
    let mut trial = vec![S::zero(); m];
    for it in 0..max_iter {
        let ev = eval(&x);
        restricted_inverse(g, &ev.h, &ev.grad, ws, &mut a)?;
        let mut dx: Vec<S> = a.iter().map(|&v| -v).collect();
        if ev.c > S::zero() {
            restricted_inverse(g, &ev.h, &ev.v, ws, &mut b)?;
            let vb: S = ev.v.iter().zip(&b).map(|(&p, &q)| p * q).sum();
            let denom = S::one() - ev.c * vb;
            if denom > lit(1e-12) {
                let va: S = ev.v.iter().zip(&a).map(|(&p, &q)| p * q).sum();
                let k = ev.c * va / denom;
                for e in 0..m {
                    dx[e] -= k * b[e];
                }
            }
        }
        let slope: S = ev.grad.iter().zip(&dx).map(|(&p, &q)| p * q).sum();
        let lam = (-slope).max(S::zero());
        if it == 0 {
            lam0 = lam;
        }
        let stalled = lam <= lit::<S>(1e-8) * lam0 && lam >= lit::<S>(0.25) * prev_lam;
        if lam <= tol * tol * lam0 || lam == S::zero() || stalled {
            return Ok((x, ev.value, it, lam, lam0));
        }
        prev_lam = lam;
        // near the optimum the value differences drown in rounding
        let mut t = S::one();
        if lam > lit::<S>(1e-12) * lam0 {
            let armijo = lit::<S>(0.25);
            let mut accepted = false;
            for _ in 0..60 {
                for e in 0..m {
                    trial[e] = x[e] + t * dx[e];
                }
                if value(&trial) <= ev.value + armijo * t * slope {
                    accepted = true;
                    break;
                }
                t = t * lit(0.5);
            }
            if !accepted {
                if lam <= lit::<S>(1e-8) * lam0 {
                    return Ok((x, ev.value, it, lam, lam0));
                }
                return Err(FlowError::NoConvergence {
                    solver: "composite newton",
                    iterations: it,
                    residual: to_f64(lam / lam0),
                });
            }
        }
        for e in 0..m {
            x[e] += t * dx[e];
        }
    }
    Err(FlowError::NoConvergence {
        solver: "composite newton",
        iterations: max_iter,
        residual: f64::NAN,
    })
}

/// Minimizes the composite objective over `{f̂ : Bᵀf̂ = δχ}`.
#[allow(clippy::too_many_arguments)]
pub fn solve_composite<S: Scalar>(
    g: &Graph<S>,
    w: &Weights<S>,
    f: &[S],
    y: &[S],
    delta: S,
    params: &WeightedParams,
    cfg: &StepConfig,
    ws: &mut Workspace<S>,
) -> Result<CompositeSolution<S>> {
    ws.ensure(g.n());
    let rc = residual_caps(g, f)?;
    let corr = coupling_gap(g, w, &rc, y);
    solve_composite_rc(g, w, &rc, &corr, delta, params, cfg, ws)
}

#[allow(clippy::too_many_arguments)]
fn solve_composite_rc<S: Scalar>(
    g: &Graph<S>,
    w: &Weights<S>,
    rc: &ResidualCaps<S>,
    corr: &[S],
    delta: S,
    params: &WeightedParams,
    cfg: &StepConfig,
    ws: &mut Workspace<S>,
) -> Result<CompositeSolution<S>> {
    let big_w = lit::<S>(params.big_w);
    let comp = Composite { w, rc, corr, big_w, p: params.p };
    let d: Vec<S> = crate::potential_step::base_hessian(w, rc);
    let x0 = warm_start(g, delta, &d, ws)?;
    let ev0 = comp.eval(&x0);
    if big_w > S::zero() && to_f64(ev0.norm) < params.norm_floor {
        return solve_power_route(g, &comp, x0, params, cfg, ws);
    }
    let (x, value, iters, lam, lam0) = newton_refine(
        g,
        |x| comp.eval(x),
        |x| comp.value(x),
        x0,
        lit(cfg.step_tol),
        params.max_newton_iter,
        ws,
    )?;
    Ok(CompositeSolution {
        fhat: x,
        value,
        iters,
        decrement: lam,
        decrement0: lam0,
        used_power_route: false,
    })
}

/// Minimizes `αᵀd + Σ (q_e d² + s_e d^p)` over circulations `Bᵀd = 0`.
/// `p` must be even and `q > 0`, `s ≥ 0`.
pub fn solve_residual_problem<S: Scalar>(
    g: &Graph<S>,
    alpha: &[S],
    q: &[S],
    s: &[S],
    p: u32,
    tol: S,
    ws: &mut Workspace<S>,
) -> Result<Vec<S>> {
    ws.ensure(g.n());
    let m = g.m();
    let pi = p as i32;
    let pf = lit::<S>(p as f64);
    let pm1 = lit::<S>((p - 1) as f64);
    let two = lit::<S>(2.0);
    let value = |d: &[S]| -> S {
        (0..m)
            .map(|e| alpha[e] * d[e] + q[e] * d[e] * d[e] + s[e] * d[e].powi(pi))
            .sum()
    };
    let eval = |d: &[S]| -> CompositeEval<S> {
        let mut out = CompositeEval {
            value: value(d),
            grad: vec![S::zero(); m],
            h: vec![S::zero(); m],
            v: vec![S::zero(); m],
            c: S::zero(),
            norm: S::zero(),
        };
        for e in 0..m {
            out.grad[e] = alpha[e] + two * q[e] * d[e] + pf * s[e] * d[e].powi(pi - 1);
            out.h[e] = two * q[e] + pf * pm1 * s[e] * d[e].powi(pi - 2);
        }
        out
    };
    let (d, _, _, _, _) = newton_refine(g, eval, value, vec![S::zero(); m], tol, 200, ws)?;
    Ok(d)
}

/// The p-th power route: for a scalar `λ`, minimize `ΔΦ + λΣg^p` by
/// iterative refinement, then search `λ` so that `λ p ‖g‖_p^{p-1} = W`,
/// which reproduces the optimality conditions of the p-norm objective.
fn solve_power_route<S: Scalar>(
    g: &Graph<S>,
    comp: &Composite<'_, S>,
    x0: Vec<S>,
    params: &WeightedParams,
    cfg: &StepConfig,
    ws: &mut Workspace<S>,
) -> Result<CompositeSolution<S>> {
    let m = g.m();
    let p = params.p;
    let pi = p as i32;
    let pf = lit::<S>(p as f64);
    let pm1 = lit::<S>((p - 1) as f64);
    let tol = lit::<S>(cfg.step_tol);

    let psi = |lambda: S, x: &[S]| -> (S, Vec<S>, Vec<S>, Vec<S>, S) {
        let mut val = S::zero();
        let mut mag = S::zero();
        let mut grad = vec![S::zero(); m];
        let mut hess = vec![S::zero(); m];
        let mut gv = vec![S::zero(); m];
        for e in 0..m {
            let (v, d1, d2) = decrement_edge(comp.w.fwd[e], comp.w.bwd[e], comp.rc.fwd[e], comp.rc.bwd[e], x[e]);
            let (gg, g1, g2) = g_edge(comp.rc.fwd[e], comp.rc.bwd[e], x[e]);
            val += v - x[e] * comp.corr[e] + lambda * gg.powi(pi);
            mag += v.abs() + (x[e] * comp.corr[e]).abs() + lambda * gg.powi(pi);
            grad[e] = d1 - comp.corr[e] + lambda * pf * gg.powi(pi - 1) * g1;
            hess[e] = d2 + lambda * pf * (pm1 * gg.powi(pi - 2) * g1 * g1 + gg.powi(pi - 1) * g2);
            gv[e] = gg;
        }
        (val, grad, hess, gv, mag)
    };

    let minimize = |lambda: S, start: Vec<S>, ws: &mut Workspace<S>| -> Result<(Vec<S>, usize)> {
        let mut x = start;
        let half = lit::<S>(0.5);
        let mut first = S::zero();
        let mut damped = false;
        let mut prev_dec = S::infinity();
        for it in 0..params.max_newton_iter {
            let (val, grad, hess, _, mag) = psi(lambda, &x);
            // residual problem around x: first-order term and half the local
            // curvature; the p-th order term only kicks in after a failed step
            let q: Vec<S> = hess.iter().map(|&h| half * h).collect();
            let s = vec![if damped { lambda } else { S::zero() }; m];
            let d = solve_residual_problem(g, &grad, &q, &s, p, tol, ws)?;
            // for the undamped model -∇ᵀd = dᵀ∇²d, and the right side does not
            // suffer from cancellation against the non-circulation part of ∇
            let dec = if damped {
                -grad.iter().zip(&d).map(|(&a, &b)| a * b).sum::<S>()
            } else {
                hess.iter().zip(&d).map(|(&h, &b)| h * b * b).sum::<S>()
            }
            .max(S::zero());
            let slope = -dec;
            if it == 0 {
                first = dec;
            }
            // progress below the rounding level of the objective is noise
            let noise = lit::<S>(64.0) * S::epsilon() * mag;
            let stalled = dec <= noise || (dec <= lit::<S>(1e-12) * first && dec >= lit::<S>(0.25) * prev_dec);
            if dec <= tol * tol * first || dec == S::zero() || stalled {
                return Ok((x, it));
            }
            prev_dec = dec;
            if dec <= lit::<S>(1e-12) * first {
                for e in 0..m {
                    x[e] += d[e];
                }
                continue;
            }
            let mut t = S::one();
            let mut trial = vec![S::zero(); m];
            let mut ok = false;
            for _ in 0..60 {
                for e in 0..m {
                    trial[e] = x[e] + t * d[e];
                }
                if psi(lambda, &trial).0 <= val + lit::<S>(0.25) * t * slope {
                    ok = true;
                    break;
                }
                t = t * half;
            }
            if !ok && !damped {
                damped = true;
                continue;
            }
            if !ok && dec > lit::<S>(1e-8) * first {
                return Err(FlowError::NoConvergence {
                    solver: "power route refinement",
                    iterations: it,
                    residual: to_f64(dec / first),
                });
            }
            if !ok {
                return Ok((x, it));
            }
            damped = false;
            x = trial;
        }
        Err(FlowError::NoConvergence {
            solver: "power route refinement",
            iterations: params.max_newton_iter,
            residual: f64::NAN,
        })
    };

    let big_w = comp.big_w;
    let mismatch = |lambda: S, x: &[S]| -> S {
        let (_, _, _, gv, _) = psi(lambda, x);
        let n = p_norm(&gv, p);
        (lambda * pf * n.powi(pi - 1) / big_w).ln()
    };

    let mut total_iters = 0;
    let (mut lo, mut hi) = (lit::<S>(-80.0), lit::<S>(80.0));
    let mut x = x0;
    let mut best = x.clone();
    for _ in 0..200 {
        let mid = (lo + hi) * lit(0.5);
        let lambda = mid.exp();
        let (xm, it) = minimize(lambda, x.clone(), ws)?;
        total_iters += it;
        let r = mismatch(lambda, &xm);
        best = xm.clone();
        x = xm;
        if !r.is_finite() || r < S::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < lit(1e-13) {
            break;
        }
    }
    let value = comp.value(&best);
    Ok(CompositeSolution {
        fhat: best,
        value,
        iters: total_iters,
        decrement: S::zero(),
        decrement0: S::zero(),
        used_power_route: true,
    })
}

/// Weight change read off the composite optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightChange<S> {
    /// `r′_e = W (g_e/‖g‖_p)^{p-1}`.
    pub r_prime: Vec<S>,
    /// `w′`.
    pub raw: Weights<S>,
    /// `w″`, the reduced change actually applied.
    pub reduced: Weights<S>,
    /// `‖r′‖_q` with `1/p + 1/q = 1`.
    pub q_norm: S,
}

/// `w′` from the composite optimum: the side with the smaller residual
/// capacity gets `r′ û_min²`, the other `r′ û⁺û⁻`.
pub fn extract_weights<S: Scalar>(rc: &ResidualCaps<S>, fhat: &[S], big_w: S, p: u32) -> Result<(Vec<S>, Weights<S>, S)> {
    let m = fhat.len();
    let gv: Vec<S> = (0..m).map(|e| g_edge(rc.fwd[e], rc.bwd[e], fhat[e]).0).collect();
    let n = p_norm(&gv, p);
    if n == S::zero() {
        return Err(FlowError::DegenerateStep);
    }
    let mut r = vec![S::zero(); m];
    let mut raw = Weights::uniform(m, S::zero());
    for e in 0..m {
        r[e] = big_w * (gv[e] / n).powi(p as i32 - 1);
        let (up, um) = (rc.fwd[e], rc.bwd[e]);
        if up <= um {
            raw.fwd[e] = r[e] * up * up;
            raw.bwd[e] = r[e] * up * um;
        } else {
            raw.fwd[e] = r[e] * up * um;
            raw.bwd[e] = r[e] * um * um;
        }
    }
    let q = lit::<S>(p as f64 / (p as f64 - 1.0));
    let rmax = norm_inf(&r);
    let q_norm = if rmax == S::zero() {
        S::zero()
    } else {
        rmax * r.iter().map(|&x| (x / rmax).powf(q)).sum::<S>().powf(S::one() / q)
    };
    Ok((r, raw, q_norm))
}

/// Smallest non-negative `w″` with the same coupling quantity
/// `w⁺/(û⁺ - f̂) - w⁻/(û⁻ + f̂)` as `w′`.
pub fn reduce_weights<S: Scalar>(rc: &ResidualCaps<S>, fhat: &[S], raw: &Weights<S>) -> Weights<S> {
    let m = fhat.len();
    let mut out = Weights::uniform(m, S::zero());
    for e in 0..m {
        let pa = rc.fwd[e] - fhat[e];
        let pb = rc.bwd[e] + fhat[e];
        let d = raw.fwd[e] / pa - raw.bwd[e] / pb;
        if d >= S::zero() {
            out.fwd[e] = d * pa;
        } else {
            out.bwd[e] = -d * pb;
        }
    }
    out
}

/// One weighted step of size `δ`. Returns the next iterate, the weight
/// change and the step diagnostics.
pub fn weighted_progress_step<S: Scalar>(
    g: &Graph<S>,
    state: &IterateState<S>,
    delta: S,
    params: &WeightedParams,
    cfg: &StepConfig,
    ws: &mut Workspace<S>,
) -> Result<(IterateState<S>, WeightChange<S>, StepResult<S>, bool)> {
    ws.ensure(g.n());
    let rc = residual_caps(g, &state.f)?;
    let corr = coupling_gap(g, &state.w, &rc, &state.y);
    let sol = solve_composite_rc(g, &state.w, &rc, &corr, delta, params, cfg, ws)?;
    let rho = crate::graph::congestion(&sol.fhat, &rc).max();
    if cfg.check_congestion && to_f64(rho) > cfg.congestion_limit {
        return Err(FlowError::CongestionExceeded {
            congestion: to_f64(rho),
            limit: cfg.congestion_limit,
        });
    }
    let bound = step_bound(g.m(), params.eta);
    let mag = to_f64(norm_inf(&sol.fhat));
    if mag > bound {
        return Err(FlowError::StepBoundExceeded { magnitude: mag, bound });
    }
    let big_w = lit::<S>(params.big_w);
    let change = if big_w == S::zero() {
        WeightChange {
            r_prime: vec![S::zero(); g.m()],
            raw: Weights::uniform(g.m(), S::zero()),
            reduced: Weights::uniform(g.m(), S::zero()),
            q_norm: S::zero(),
        }
    } else {
        let (r_prime, raw, q_norm) = extract_weights(&rc, &sol.fhat, big_w, params.p)?;
        let reduced = reduce_weights(&rc, &sol.fhat, &raw);
        WeightChange { r_prime, raw, reduced, q_norm }
    };
    let added = to_f64(change.reduced.l1());
    if added > params.budget_per_iter {
        return Err(FlowError::WeightBudgetExceeded {
            value: added,
            limit: params.budget_per_iter,
        });
    }
    let total = to_f64(state.w.l1()) + added;
    if total > params.budget_total {
        return Err(FlowError::WeightBudgetExceeded {
            value: total,
            limit: params.budget_total,
        });
    }
    let step = finish_step(
        g,
        &state.w,
        Some(&change.reduced),
        &state.f,
        &state.y,
        &rc,
        delta,
        sol.fhat,
        sol.iters,
        sol.decrement,
        sol.decrement0,
        cfg,
        ws,
    )?;
    let next = advance(g, state, &step, Some(&change.reduced), cfg.coupling_tol)?;
    Ok((next, change, step, sol.used_power_route))
}

/// Per-edge objective of the p-th power composite,
/// `val_e(x) = ΔΦ_e(x) + g_e(x)^p`, with value and first two derivatives.
pub fn val_edge<S: Scalar>(wp: S, wm: S, up: S, um: S, p: u32, x: S) -> (S, S, S) {
    let (v, d1, d2) = decrement_edge(wp, wm, up, um, x);
    let (gv, g1, g2) = g_edge(up, um, x);
    let pi = p as i32;
    let pf = lit::<S>(p as f64);
    let pm1 = lit::<S>((p - 1) as f64);
    (
        v + gv.powi(pi),
        d1 + pf * gv.powi(pi - 1) * g1,
        d2 + pf * (pm1 * gv.powi(pi - 2) * g1 * g1 + gv.powi(pi - 1) * g2),
    )
}

/// Lower and upper remainder constants of a two-sided Taylor sandwich.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichConstants {
    pub c_lo: f64,
    pub c_hi: f64,
}

/// Frozen constants for `val_e`, indexed by even `p` (2, 4, 6, 8). Produced
/// by the calibration sweep with a factor-2 margin on each side.
pub const VAL_CONSTANTS: [(u32, SandwichConstants); 4] = [
    (2, SandwichConstants { c_lo: 5.450e-2, c_hi: 1.360e1 }),
    (4, SandwichConstants { c_lo: 3.650e-3, c_hi: 2.590e2 }),
    (6, SandwichConstants { c_lo: 1.900e-4, c_hi: 4.230e3 }),
    (8, SandwichConstants { c_lo: 1.080e-5, c_hi: 6.650e4 }),
];

/// Frozen constants for `(f + δ)^p`, same indexing.
pub const POWER_CONSTANTS: [(u32, SandwichConstants); 4] = [
    (2, SandwichConstants { c_lo: 2.490e-1, c_hi: 1.010e0 }),
    (4, SandwichConstants { c_lo: 1.490e-1, c_hi: 1.350e1 }),
    (6, SandwichConstants { c_lo: 4.960e-2, c_hi: 6.280e1 }),
    (8, SandwichConstants { c_lo: 1.450e-2, c_hi: 2.620e2 }),
];

pub fn lookup(table: &[(u32, SandwichConstants)], p: u32) -> Option<SandwichConstants> {
    table.iter().find(|(q, _)| *q == p).map(|(_, c)| *c)
}

/// One edge of the sandwich bound: residual capacities and weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeState {
    pub up: f64,
    pub um: f64,
    pub wp: f64,
    pub wm: f64,
}

/// Lower bound, upper bound and actual value of `val_e(f + δ)`.
///
/// The quadratic part uses `½(9/11)²` and `½(11/9)²` times the curvature
/// `w⁺/(û⁺-f)² + w⁻/(û⁻+f)²` at `f`, and the remainder term is
/// `|f|^{2p-2}δ² + δ^{2p}`, the scaling of `g^p` with `g` quadratic.
pub fn sandwich_bounds(edge: &EdgeState, f: f64, delta: f64, p: u32, k: &SandwichConstants) -> (f64, f64, f64) {
    let (v, d1, _) = val_edge(edge.wp, edge.wm, edge.up, edge.um, p, f);
    let actual = val_edge(edge.wp, edge.wm, edge.up, edge.um, p, f + delta).0;
    let (lo_q, hi_q) = sandwich_quadratic(edge, f, delta);
    let rem = sandwich_remainder(f, delta, p);
    let base = v + delta * d1;
    (base + lo_q + k.c_lo * rem, base + hi_q + k.c_hi * rem, actual)
}

pub(crate) fn sandwich_quadratic(edge: &EdgeState, f: f64, delta: f64) -> (f64, f64) {
    let r = edge.wp / (edge.up - f).powi(2) + edge.wm / (edge.um + f).powi(2);
    let lo = 0.5 * (9.0f64 / 11.0).powi(2) * r * delta * delta;
    let hi = 0.5 * (11.0f64 / 9.0).powi(2) * r * delta * delta;
    (lo, hi)
}

pub fn sandwich_remainder(f: f64, delta: f64, p: u32) -> f64 {
    let pi = p as i32;
    f.abs().powi(2 * pi - 2) * delta * delta + delta.abs().powi(2 * pi)
}

/// `h_p(f^{p-2}, δ) = f^{p-2}δ² + |δ|^p`.
pub fn h_p(f: f64, delta: f64, p: u32) -> f64 {
    let pi = p as i32;
    f.powi(pi - 2) * delta * delta + delta.abs().powi(pi)
}

/// Lower bound, upper bound and actual value of `(f + δ)^p` around the
/// first-order expansion, with remainder `h_p(f^{p-2}, δ)`.
pub fn power_bounds(f: f64, delta: f64, p: u32, k: &SandwichConstants) -> (f64, f64, f64) {
    let pi = p as i32;
    let base = f.powi(pi) + p as f64 * f.powi(pi - 1) * delta;
    let h = h_p(f, delta, p);
    (base + k.c_lo * h, base + k.c_hi * h, (f + delta).powi(pi))
}

/// Remainder ratios `(actual - base - quadratic) / remainder` for the lower
/// and upper side; the calibration sweep takes their extremes.
pub fn sandwich_ratios(edge: &EdgeState, f: f64, delta: f64, p: u32) -> Option<(f64, f64)> {
    let rem = sandwich_remainder(f, delta, p);
    if rem <= 0.0 {
        return None;
    }
    let (v, d1, _) = val_edge(edge.wp, edge.wm, edge.up, edge.um, p, f);
    let actual = val_edge(edge.wp, edge.wm, edge.up, edge.um, p, f + delta).0;
    let (lo_q, hi_q) = sandwich_quadratic(edge, f, delta);
    let base = v + delta * d1;
    Some(((actual - base - lo_q) / rem, (actual - base - hi_q) / rem))
}

pub fn power_ratio(f: f64, delta: f64, p: u32) -> Option<f64> {
    let h = h_p(f, delta, p);
    if h <= 0.0 {
        return None;
    }
    let pi = p as i32;
    let base = f.powi(pi) + p as f64 * f.powi(pi - 1) * delta;
    Some(((f + delta).powi(pi) - base) / h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, precondition};
    use crate::potential_step::potential_decrement_step;
    use crate::state::initialize;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn toy() -> Graph<f64> {
        let g = build_graph(
            4,
            vec![(0, 1, 1.0, 1.0), (1, 3, 1.0, 1.0), (0, 2, 1.0, 1.0), (2, 3, 1.0, 1.0), (1, 2, 1.0, 1.0)],
            0,
            3,
            1.0,
        )
        .unwrap();
        precondition(&g)
    }

    #[test]
    fn parameter_examples() {
        assert_eq!(default_big_w(64, 1.0 / 6.0).round(), 64.0);
        assert_relative_eq!(weighted_delta(100.0, 10_000, 1.0 / 6.0), 100.0 / (5000.0 * 1e4f64.powf(1.0 / 3.0)));
        assert!((weighted_delta(100.0, 10_000, 1.0 / 6.0) - 9.283e-4).abs() < 1e-6);
        assert_relative_eq!(weighted_threshold(64, 1.0 / 6.0), 4.0, epsilon = 1e-12);
        assert_eq!(default_p(2), 2);
        assert_eq!(default_p(64), 2);
        assert_eq!(default_p(1 << 12), 4);
        assert_eq!(default_p(1 << 20), 4);
        assert_eq!(default_p(1 << 30), 6);
        assert_relative_eq!(default_eta(64, 1.0), 1.0 / 6.0);
        assert!(default_eta(64, 4.0) < 1.0 / 6.0);
    }

    #[test]
    fn composite_examples() {
        let g = build_graph(2, vec![(0, 1, 1.0, 1.0)], 0, 1, 1.0).unwrap();
        let w = Weights::uniform(1, 1.0);
        let (v, _) = composite_objective(&g, &w, &[0.0], &[0.0], 1.0, 2).unwrap();
        assert_eq!(v, 0.0);
        let (v, _) = composite_objective(&g, &w, &[0.0], &[0.1], 1.0, 2).unwrap();
        assert_abs_diff_eq!(v, 0.0201007, epsilon = 1e-7);
    }

    #[test]
    fn residual_problem_zero_gradient() {
        let g = toy();
        let mut ws = Workspace::new(1e-12);
        let m = g.m();
        let d = solve_residual_problem(&g, &vec![0.0; m], &vec![1.0; m], &vec![1.0; m], 4, 1e-10, &mut ws).unwrap();
        assert!(d.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_budget_matches_warmup_step() {
        let g = toy();
        let m = g.m() as f64;
        let st = initialize(&g, 12.0);
        let delta = 12.0 / (1000.0 * m.sqrt());
        let cfg = StepConfig::default();
        let mut ws = Workspace::new(1e-12);
        let warm = potential_decrement_step(&g, &st.w, &st.f, &st.y, delta, &cfg, &mut ws).unwrap();
        let mut params = WeightedParams::for_graph(g.m(), 1.0);
        params.big_w = 0.0;
        let sol = solve_composite(&g, &st.w, &st.f, &st.y, delta, &params, &cfg, &mut ws).unwrap();
        for (a, b) in sol.fhat.iter().zip(&warm.fhat) {
            assert!((a - b).abs() <= 1e-8 * delta);
        }
    }

    #[test]
    fn extraction_examples() {
        let rc = ResidualCaps { fwd: vec![1.0; 4], bwd: vec![1.0; 4] };
        let x = vec![0.05; 4];
        let (r, _, qn) = extract_weights(&rc, &x, 3.0, 4).unwrap();
        let q = 4.0 / 3.0;
        for &v in &r {
            assert_relative_eq!(v, 3.0 * 4f64.powf(-1.0 / q), epsilon = 1e-12);
        }
        assert_relative_eq!(qn, 3.0, epsilon = 1e-12);
        let (r, _, qn) = extract_weights(&rc, &[0.0, 0.02, 0.0, 0.0], 5.0, 4).unwrap();
        assert_eq!(r, vec![0.0, 5.0, 0.0, 0.0]);
        assert_relative_eq!(qn, 5.0);
        assert_eq!(extract_weights(&rc, &[0.0; 4], 5.0, 4).unwrap_err(), FlowError::DegenerateStep);
    }

    #[test]
    fn extracted_weights_preserve_coupling_at_f() {
        let rc = ResidualCaps { fwd: vec![0.5, 2.0], bwd: vec![1.5, 0.25] };
        let (_, raw, _) = extract_weights(&rc, &[0.01, -0.02], 7.0, 4).unwrap();
        for e in 0..2 {
            assert_relative_eq!(raw.fwd[e] / rc.fwd[e], raw.bwd[e] / rc.bwd[e], epsilon = 1e-12);
        }
    }

    #[test]
    fn reduction_examples() {
        // a⁺ = 2, a⁻ = 0.5 with û⁺ - f̂ = 0.5 and û⁻ + f̂ = 2
        let rc = ResidualCaps { fwd: vec![0.5], bwd: vec![2.0] };
        let raw = Weights { fwd: vec![1.0], bwd: vec![1.0] };
        let red = reduce_weights(&rc, &[0.0], &raw);
        assert_relative_eq!(red.fwd[0], 0.75);
        assert_eq!(red.bwd[0], 0.0);
        assert_relative_eq!(red.fwd[0] / 0.5, 1.5);
        let balanced = Weights { fwd: vec![0.5], bwd: vec![2.0] };
        let red = reduce_weights(&rc, &[0.0], &balanced);
        assert_abs_diff_eq!(red.fwd[0], 0.0, epsilon = 1e-15);
        assert_eq!(red.bwd[0], 0.0);
        let zero = reduce_weights(&rc, &[0.0], &Weights::uniform(1, 0.0));
        assert_eq!(zero, Weights::uniform(1, 0.0));
    }

    #[test]
    fn weighted_step_keeps_coupling() {
        let g = toy();
        let m = g.m();
        let st = initialize(&g, 2.0 + 2.0 * 5.0);
        let params = WeightedParams::for_graph(m, 1.0);
        let delta = weighted_delta(st.gap(), m, params.eta);
        let cfg = StepConfig::default();
        let mut ws = Workspace::new(1e-12);
        let (next, change, step, _) = weighted_progress_step(&g, &st, delta, &params, &cfg, &mut ws).unwrap();
        assert!(step.congestion <= 0.1);
        assert_relative_eq!(change.q_norm, params.big_w, epsilon = 1e-10 * params.big_w);
        let err = next.coupling_error(&g).unwrap();
        assert!(err <= 1e-8 * (1.0 + next.w.l1() / m as f64));
        for e in 0..m {
            assert!(change.reduced.fwd[e].min(change.reduced.bwd[e]) == 0.0);
            assert!(change.reduced.fwd[e] + change.reduced.bwd[e] <= change.raw.fwd[e] + change.raw.bwd[e] + 1e-15);
        }
    }

    #[test]
    fn power_route_agrees_with_norm_route() {
        let g = toy();
        let m = g.m();
        let st = initialize(&g, 12.0);
        let mut params = WeightedParams::for_graph(m, 1.0);
        let delta = 0.01;
        let cfg = StepConfig::default();
        let mut ws = Workspace::new(1e-12);
        let a = solve_composite(&g, &st.w, &st.f, &st.y, delta, &params, &cfg, &mut ws).unwrap();
        params.norm_floor = f64::INFINITY;
        let b = solve_composite(&g, &st.w, &st.f, &st.y, delta, &params, &cfg, &mut ws).unwrap();
        assert!(!a.used_power_route && b.used_power_route);
        for (x, y) in a.fhat.iter().zip(&b.fhat) {
            assert!((x - y).abs() <= 1e-7 * delta, "{x} vs {y}");
        }
    }

    #[test]
    fn sandwich_zero_displacement() {
        let e = EdgeState { up: 1.0, um: 1.0, wp: 1.0, wm: 1.0 };
        let k = SandwichConstants { c_lo: 0.1, c_hi: 10.0 };
        let (lo, hi, act) = sandwich_bounds(&e, 0.03, 0.0, 4, &k);
        assert_eq!(lo, act);
        assert_eq!(hi, act);
    }
}
