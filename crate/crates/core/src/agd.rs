//! Accelerated projected gradient descent over `{x : Bᵀx = χ}` for objectives
//! whose Hessian is sandwiched as `D ⪯ ∇² ⪯ κD` for a diagonal `D`.

use crate::error::{FlowError, Result};
use crate::graph::Graph;
use crate::laplacian::LaplacianSolver;
use crate::scalar::{lit, to_f64, Scalar};

#[derive(Debug, Clone, Copy)]
pub struct AgdConfig<S> {
    pub kappa: S,
    /// Stop once the gradient mapping shrinks by this factor.
    pub tol: S,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct AgdResult<S> {
    pub x: Vec<S>,
    pub value: S,
    pub iters: usize,
    /// `κ‖y - x⁺‖_D` at termination.
    pub grad_map: S,
    pub grad_map0: S,
}

/// Affine constraint `Bᵀx = χ` together with the Laplacian workspace used to
/// project onto it.
pub struct Constraint<'a, S> {
    pub graph: &'a Graph<S>,
    pub demand: &'a [S],
    pub solver: &'a mut LaplacianSolver<S>,
    /// Warm start for the projection potentials, length `n`.
    pub phi: &'a mut Vec<S>,
}

/// Minimizes `obj` starting from a feasible `x0`. `obj(x, grad)` returns the
/// value and writes the gradient. Without a constraint the problem is
/// unconstrained.
pub fn agd_minimize<S: Scalar>(
    mut obj: impl FnMut(&[S], &mut [S]) -> S,
    mut constraint: Option<Constraint<'_, S>>,
    x0: &[S],
    d: &[S],
    cfg: &AgdConfig<S>,
) -> Result<AgdResult<S>> {
    let m = x0.len();
    let kappa = cfg.kappa;
    let sk = kappa.sqrt();
    let beta = (sk - S::one()) / (sk + S::one());

    let mut x = x0.to_vec();
    let mut x_new = vec![S::zero(); m];
    let mut y = x0.to_vec();
    let mut grad = vec![S::zero(); m];
    let mut z = vec![S::zero(); m];
    let mut gm0 = S::zero();
    let mut gm = S::zero();

    for it in 0..=cfg.max_iter {
        obj(&y, &mut grad);
        for e in 0..m {
            z[e] = y[e] - grad[e] / (kappa * d[e]);
        }
        match constraint.as_mut() {
            Some(c) => {
                c.solver.project_into(c.graph, d, &z, c.demand, c.phi, &mut x_new)?;
            }
            None => x_new.copy_from_slice(&z),
        }
        gm = kappa
            * (0..m)
                .map(|e| d[e] * (y[e] - x_new[e]) * (y[e] - x_new[e]))
                .sum::<S>()
                .sqrt();
        if it == 0 {
            gm0 = gm;
        }
        let done = gm <= cfg.tol * gm0 || gm == S::zero() || !gm.is_finite();
        if done {
            if !gm.is_finite() {
                return Err(FlowError::NoConvergence {
                    solver: "agd",
                    iterations: it,
                    residual: f64::NAN,
                });
            }
            let value = obj(&x_new, &mut grad);
            return Ok(AgdResult {
                x: x_new,
                value,
                iters: it,
                grad_map: gm,
                grad_map0: gm0,
            });
        }
        // gradient-based adaptive restart
        let restart: S = (0..m).map(|e| (y[e] - x_new[e]) * (x_new[e] - x[e])).sum();
        if restart > S::zero() {
            y.copy_from_slice(&x_new);
        } else {
            for e in 0..m {
                y[e] = x_new[e] + beta * (x_new[e] - x[e]);
            }
        }
        std::mem::swap(&mut x, &mut x_new);
    }
    Err(FlowError::NoConvergence {
        solver: "agd",
        iterations: cfg.max_iter,
        residual: to_f64(gm / gm0.max(lit(f64::MIN_POSITIVE))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use approx::assert_relative_eq;

    fn two_parallel() -> Graph<f64> {
        build_graph(2, vec![(0, 1, 1.0, 1.0), (0, 1, 1.0, 1.0)], 0, 1, 1.0).unwrap()
    }

    fn cfg(kappa: f64) -> AgdConfig<f64> {
        AgdConfig {
            kappa,
            tol: 1e-13,
            max_iter: 10_000,
        }
    }

    #[test]
    fn symmetric_constrained_quadratic() {
        let g = two_parallel();
        let chi = g.st_demand(1.0);
        let mut lap = LaplacianSolver::new(1e-14);
        let mut phi = vec![0.0; 2];
        let res = agd_minimize(
            |x, gr| {
                gr.copy_from_slice(x);
                0.5 * (x[0] * x[0] + x[1] * x[1])
            },
            Some(Constraint { graph: &g, demand: &chi, solver: &mut lap, phi: &mut phi }),
            &[1.0, 0.0],
            &[1.0, 1.0],
            &cfg(1.0),
        )
        .unwrap();
        assert_relative_eq!(res.x[0], 0.5, epsilon = 1e-10);
        assert_relative_eq!(res.x[1], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn unconstrained_goes_to_zero() {
        let res = agd_minimize(
            |x, gr| {
                gr.copy_from_slice(x);
                0.5 * x.iter().map(|v| v * v).sum::<f64>()
            },
            None,
            &[3.0, -2.0, 7.0],
            &[0.5; 3],
            &cfg(2.0),
        )
        .unwrap();
        assert!(res.x.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn diagonal_quadratic_matches_kkt() {
        // min ½(x₁² + 4x₂²) s.t. x₁ + x₂ = 1 → x = (4/5, 1/5)
        let g = two_parallel();
        let chi = g.st_demand(1.0);
        let mut lap = LaplacianSolver::new(1e-14);
        let mut phi = vec![0.0; 2];
        let res = agd_minimize(
            |x, gr| {
                gr[0] = x[0];
                gr[1] = 4.0 * x[1];
                0.5 * (x[0] * x[0] + 4.0 * x[1] * x[1])
            },
            Some(Constraint { graph: &g, demand: &chi, solver: &mut lap, phi: &mut phi }),
            &[0.5, 0.5],
            &[1.0, 4.0],
            &cfg(4.0),
        )
        .unwrap();
        assert_relative_eq!(res.x[0], 0.8, epsilon = 1e-9);
        assert_relative_eq!(res.x[1], 0.2, epsilon = 1e-9);
        assert_relative_eq!(res.x[0] + res.x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn iteration_cap_reports_no_convergence() {
        let mut c = cfg(100.0);
        c.max_iter = 2;
        let err = agd_minimize(
            |x, gr| {
                gr[0] = 100.0 * x[0];
                gr[1] = x[1];
                0.5 * (100.0 * x[0] * x[0] + x[1] * x[1])
            },
            None,
            &[1.0, 1.0],
            &[1.0, 1.0],
            &c,
        );
        assert!(matches!(err, Err(FlowError::NoConvergence { .. })));
    }
}
