//! Laplacian solves, electrical flows and energy-weighted projections.
//!
//! `L = BᵀR⁻¹B` is never formed. Systems are solved by Jacobi-preconditioned
//! conjugate gradient with the potential at the source grounded to zero.

use crate::error::{FlowError, Result};
use crate::graph::Graph;
use crate::scalar::{lit, to_f64, Scalar};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const RATIO_GUARD: f64 = 1e30;

/// `Lφ` for resistances `r`.
pub fn laplacian_apply<S: Scalar>(g: &Graph<S>, r: &[S], phi: &[S]) -> Vec<S> {
    let mut out = vec![S::zero(); g.n()];
    for (e, &re) in g.edges().iter().zip(r) {
        let i = (phi[e.head] - phi[e.tail]) / re;
        out[e.head] += i;
        out[e.tail] -= i;
    }
    out
}

/// Checks positivity and the max/min ratio of a resistance vector.
pub fn check_resistances<S: Scalar>(r: &[S], guard: f64) -> Result<()> {
    let mut lo = S::infinity();
    let mut hi = S::zero();
    for (e, &x) in r.iter().enumerate() {
        if !(x.is_finite() && x > S::zero()) {
            return Err(FlowError::InvalidResistance { edge: e });
        }
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if !r.is_empty() {
        let ratio = to_f64(hi) / to_f64(lo);
        if ratio > guard {
            return Err(FlowError::ResistanceRatio { ratio, guard });
        }
    }
    Ok(())
}

/// Reusable CG workspace. One instance per thread.
#[derive(Debug, Clone)]
pub struct LaplacianSolver<S> {
    pub tol: S,
    /// Iteration cap is `iter_factor · n`.
    pub iter_factor: usize,
    pub ratio_guard: f64,
    cond: Vec<S>,
    diag: Vec<S>,
    res: Vec<S>,
    z: Vec<S>,
    dir: Vec<S>,
    ap: Vec<S>,
    rhs: Vec<S>,
    demand: Vec<S>,
    /// CG iterations spent since construction.
    pub total_iters: usize,
}

impl<S: Scalar> LaplacianSolver<S> {
    pub fn new(tol: S) -> Self {
        LaplacianSolver {
            tol,
            iter_factor: 50,
            ratio_guard: RATIO_GUARD,
            cond: Vec::new(),
            diag: Vec::new(),
            res: Vec::new(),
            z: Vec::new(),
            dir: Vec::new(),
            ap: Vec::new(),
            rhs: Vec::new(),
            demand: Vec::new(),
            total_iters: 0,
        }
    }

    fn apply_grounded(&mut self, g: &Graph<S>, x_is_dir: bool) {
        let x = if x_is_dir { &self.dir } else { &self.z };
        self.ap.iter_mut().for_each(|v| *v = S::zero());
        for (e, &c) in g.edges().iter().zip(&self.cond) {
            let i = (x[e.head] - x[e.tail]) * c;
            self.ap[e.head] += i;
            self.ap[e.tail] -= i;
        }
        self.ap[g.source()] = S::zero();
    }

    /// Solves `Lφ = χ`, using the incoming `phi` as a warm start. On return
    /// `phi[s] = 0`. Returns the number of CG iterations.
    pub fn solve_into(&mut self, g: &Graph<S>, r: &[S], chi: &[S], phi: &mut [S]) -> Result<usize> {
        let n = g.n();
        g.check_len(r)?;
        if chi.len() != n || phi.len() != n {
            return Err(FlowError::DimensionMismatch {
                expected: n,
                got: chi.len().min(phi.len()),
            });
        }
        check_resistances(r, self.ratio_guard)?;
        let sum: S = chi.iter().copied().sum();
        let scale: S = chi.iter().map(|x| x.abs()).sum::<S>().max(S::one());
        if sum.abs() > S::epsilon().sqrt() * scale {
            return Err(FlowError::NotBalanced { sum: to_f64(sum) });
        }
        let shift = sum / lit(n as f64);
        let s = g.source();

        self.cond.clear();
        self.cond.extend(r.iter().map(|&x| S::one() / x));
        for v in [&mut self.diag, &mut self.res, &mut self.z, &mut self.dir, &mut self.ap, &mut self.rhs] {
            v.clear();
            v.resize(n, S::zero());
        }
        for (e, &c) in g.edges().iter().zip(&self.cond) {
            self.diag[e.tail] += c;
            self.diag[e.head] += c;
        }
        for v in 0..n {
            self.rhs[v] = chi[v] - shift;
        }
        let rhs_norm = self.rhs.iter().map(|&x| x * x).sum::<S>().sqrt();
        let p0 = phi[s];
        for x in phi.iter_mut() {
            *x -= p0;
            if !x.is_finite() {
                *x = S::zero();
            }
        }
        if rhs_norm == S::zero() {
            phi.iter_mut().for_each(|x| *x = S::zero());
            return Ok(0);
        }
        self.rhs[s] = S::zero();
        let tol = self.tol.max(lit::<S>(16.0) * S::epsilon());
        let target = tol * rhs_norm / lit::<S>(n as f64).sqrt();

        // res = rhs - Lφ
        self.z.copy_from_slice(phi);
        self.apply_grounded(g, false);
        for v in 0..n {
            self.res[v] = self.rhs[v] - self.ap[v];
        }
        let norm = |v: &[S]| v.iter().map(|&x| x * x).sum::<S>().sqrt();
        let mut rnorm = norm(&self.res);
        if rnorm <= target {
            return Ok(0);
        }
        for v in 0..n {
            self.z[v] = if v == s { S::zero() } else { self.res[v] / self.diag[v] };
        }
        self.dir.copy_from_slice(&self.z);
        let mut rz: S = self.res.iter().zip(&self.z).map(|(&a, &b)| a * b).sum();
        let cap = self.iter_factor * n.max(2);
        for it in 1..=cap {
            self.apply_grounded(g, true);
            let pap: S = self.dir.iter().zip(&self.ap).map(|(&a, &b)| a * b).sum();
            if !(pap > S::zero()) {
                break;
            }
            let alpha = rz / pap;
            for v in 0..n {
                phi[v] += alpha * self.dir[v];
                self.res[v] -= alpha * self.ap[v];
            }
            rnorm = norm(&self.res);
            if rnorm <= target {
                self.total_iters += it;
                return Ok(it);
            }
            for v in 0..n {
                self.z[v] = if v == s { S::zero() } else { self.res[v] / self.diag[v] };
            }
            let rz_new: S = self.res.iter().zip(&self.z).map(|(&a, &b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for v in 0..n {
                self.dir[v] = self.z[v] + beta * self.dir[v];
            }
        }
        self.total_iters += cap;
        Err(FlowError::NoConvergence {
            solver: "laplacian cg",
            iterations: cap,
            residual: to_f64(rnorm / rhs_norm),
        })
    }

    /// Electrical `χ`-flow: `f_e = (φ_head - φ_tail)/r_e`.
    pub fn electrical_flow(&mut self, g: &Graph<S>, r: &[S], chi: &[S]) -> Result<Vec<S>> {
        let mut phi = vec![S::zero(); g.n()];
        self.solve_into(g, r, chi, &mut phi)?;
        Ok(g
            .edges()
            .iter()
            .zip(r)
            .map(|(e, &re)| (phi[e.head] - phi[e.tail]) / re)
            .collect())
    }

    /// Writes into `out` the `r`-weighted least-squares projection of `f_raw`
    /// onto `{f : Bᵀf = χ}`. `phi` is a warm start that is updated in place.
    pub fn project_into(
        &mut self,
        g: &Graph<S>,
        r: &[S],
        f_raw: &[S],
        chi: &[S],
        phi: &mut [S],
        out: &mut [S],
    ) -> Result<usize> {
        g.check_len(f_raw)?;
        let mut demand = std::mem::take(&mut self.demand);
        demand.clear();
        demand.resize(g.n(), S::zero());
        for (e, &fe) in g.edges().iter().zip(f_raw) {
            demand[e.head] += fe;
            demand[e.tail] -= fe;
        }
        for (d, &c) in demand.iter_mut().zip(chi) {
            *d -= c;
        }
        let res = self.solve_into(g, r, &demand, phi);
        self.demand = demand;
        let it = res?;
        for ((o, e), (&fe, &re)) in out.iter_mut().zip(g.edges()).zip(f_raw.iter().zip(r)) {
            *o = fe - (phi[e.head] - phi[e.tail]) / re;
        }
        Ok(it)
    }
}

pub fn solve_laplacian<S: Scalar>(g: &Graph<S>, r: &[S], chi: &[S], tol: S) -> Result<Vec<S>> {
    let mut phi = vec![S::zero(); g.n()];
    LaplacianSolver::new(tol).solve_into(g, r, chi, &mut phi)?;
    Ok(phi)
}

pub fn electrical_flow<S: Scalar>(g: &Graph<S>, r: &[S], chi: &[S], tol: S) -> Result<Vec<S>> {
    LaplacianSolver::new(tol).electrical_flow(g, r, chi)
}

pub fn project_to_demand<S: Scalar>(
    g: &Graph<S>,
    r: &[S],
    f_raw: &[S],
    chi: &[S],
    tol: S,
) -> Result<Vec<S>> {
    let mut phi = vec![S::zero(); g.n()];
    let mut out = vec![S::zero(); g.m()];
    LaplacianSolver::new(tol).project_into(g, r, f_raw, chi, &mut phi, &mut out)?;
    Ok(out)
}

/// `Σ r_e f_e²`.
pub fn energy<S: Scalar>(r: &[S], f: &[S]) -> S {
    r.iter().zip(f).map(|(&re, &fe)| re * fe * fe).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn path() -> Graph<f64> {
        build_graph(3, vec![(0, 1, 1.0, 1.0), (1, 2, 1.0, 1.0)], 0, 2, 1.0).unwrap()
    }

    fn parallel() -> Graph<f64> {
        build_graph(2, vec![(0, 1, 1.0, 1.0), (0, 1, 1.0, 1.0)], 0, 1, 1.0).unwrap()
    }

    #[test]
    fn apply_examples() {
        let g = path();
        assert_eq!(laplacian_apply(&g, &[1.0, 1.0], &[0.0, 1.0, 2.0]), vec![-1.0, 0.0, 1.0]);
        assert_eq!(laplacian_apply(&g, &[1.0, 1.0], &[3.0, 3.0, 3.0]), vec![0.0; 3]);
        let single = build_graph(2, vec![(0, 1, 1.0, 1.0)], 0, 1, 1.0).unwrap();
        assert_eq!(laplacian_apply(&single, &[2.0], &[0.0, 1.0]), vec![-0.5, 0.5]);
    }

    #[test]
    fn solve_examples() {
        let g = path();
        let phi = solve_laplacian(&g, &[1.0, 1.0], &[-1.0, 0.0, 1.0], 1e-12).unwrap();
        assert_relative_eq!(phi[0], 0.0);
        assert_relative_eq!(phi[1], 1.0, epsilon = 1e-10);
        assert_relative_eq!(phi[2], 2.0, epsilon = 1e-10);
        let zero = solve_laplacian(&g, &[1.0, 1.0], &[0.0; 3], 1e-12).unwrap();
        assert_eq!(zero, vec![0.0; 3]);
        assert!(matches!(
            solve_laplacian(&g, &[1.0, 1.0], &[1.0, 0.0, 1.0], 1e-12),
            Err(FlowError::NotBalanced { .. })
        ));
    }

    #[test]
    fn electrical_examples() {
        let g = parallel();
        let chi = g.st_demand(1.0);
        let f = electrical_flow(&g, &[1.0, 1.0], &chi, 1e-12).unwrap();
        assert_relative_eq!(f[0], 0.5, epsilon = 1e-10);
        assert_relative_eq!(f[1], 0.5, epsilon = 1e-10);
        let f = electrical_flow(&g, &[1.0, 3.0], &chi, 1e-12).unwrap();
        assert_relative_eq!(f[0], 0.75, epsilon = 1e-10);
        assert_relative_eq!(f[1], 0.25, epsilon = 1e-10);
        let p = path();
        let f = electrical_flow(&p, &[0.3, 7.0], &p.st_demand(1.0), 1e-12).unwrap();
        assert_relative_eq!(f[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(f[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn resistance_guard() {
        let g = parallel();
        let err = electrical_flow(&g, &[1.0, 1e31], &g.st_demand(1.0), 1e-10);
        assert!(matches!(err, Err(FlowError::ResistanceRatio { .. })));
        let err = electrical_flow(&g, &[1.0, 0.0], &g.st_demand(1.0), 1e-10);
        assert!(matches!(err, Err(FlowError::InvalidResistance { edge: 1 })));
    }

    fn triangle() -> Graph<f64> {
        build_graph(3, vec![(0, 1, 1.0, 1.0), (1, 2, 1.0, 1.0), (2, 0, 1.0, 1.0)], 0, 2, 1.0).unwrap()
    }

    #[test]
    fn projection_examples() {
        let g = triangle();
        let r = [1.0; 3];
        let chi = g.st_demand(1.0);
        let fe = electrical_flow(&g, &r, &chi, 1e-13).unwrap();
        // already feasible input is a fixed point only if it is orthogonal to
        // the cycle space; feasibility is what must be restored exactly
        let fixed = project_to_demand(&g, &r, &fe, &chi, 1e-13).unwrap();
        for (a, b) in fixed.iter().zip(&fe) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
        let from_zero = project_to_demand(&g, &r, &[0.0; 3], &chi, 1e-13).unwrap();
        for (a, b) in from_zero.iter().zip(&fe) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
        // the cycle 0→1→2→0 is in the kernel of Bᵀ
        let with_cycle: Vec<f64> = fe.iter().map(|x| x + 0.3).collect();
        let out = project_to_demand(&g, &r, &with_cycle, &chi, 1e-13).unwrap();
        for (a, b) in out.iter().zip(&with_cycle) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
        let res = crate::graph::conservation_residual(&g, &out, &chi);
        assert!(res.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn works_in_single_precision() {
        let g = build_graph(2, vec![(0, 1, 1.0f32, 1.0), (0, 1, 1.0, 1.0)], 0, 1, 1.0).unwrap();
        let f = electrical_flow(&g, &[1.0f32, 3.0], &g.st_demand(1.0), 1e-5).unwrap();
        assert!((f[0] - 0.75).abs() < 1e-5);
    }

    fn random_graph() -> impl Strategy<Value = (Graph<f64>, Vec<f64>, Vec<f64>)> {
        (3usize..9).prop_flat_map(|n| {
            let extra = prop::collection::vec((0..n, 0..n), 0..12);
            let rs = prop::collection::vec(0.1f64..10.0, n - 1 + 12);
            let fr = prop::collection::vec(-1.0f64..1.0, n - 1 + 12);
            (Just(n), extra, rs, fr).prop_map(|(n, extra, rs, fr)| {
                let mut edges: Vec<_> = (1..n).map(|v| (v - 1, v, 1.0, 1.0)).collect();
                edges.extend(extra.into_iter().filter(|(a, b)| a != b).map(|(a, b)| (a, b, 1.0, 1.0)));
                let m = edges.len();
                let g = build_graph(n, edges, 0, n - 1, 1.0).unwrap();
                (g, rs[..m].to_vec(), fr[..m].to_vec())
            })
        })
    }

    proptest! {
        #[test]
        fn ohm_and_kcl_hold((g, r, _) in random_graph(), value in 0.1f64..5.0) {
            let chi = g.st_demand(value);
            let phi = solve_laplacian(&g, &r, &chi, 1e-12).unwrap();
            let f = electrical_flow(&g, &r, &chi, 1e-12).unwrap();
            for (i, e) in g.edges().iter().enumerate() {
                prop_assert!(((phi[e.head] - phi[e.tail]) / r[i] - f[i]).abs() < 1e-9);
            }
            let res = crate::graph::conservation_residual(&g, &f, &chi);
            prop_assert!(res.iter().all(|x| x.abs() < 1e-9 * value.max(1.0)));
        }

        #[test]
        fn projection_is_idempotent((g, r, fr) in random_graph(), value in 0.1f64..5.0) {
            let tol = 1e-11;
            let chi = g.st_demand(value);
            let once = project_to_demand(&g, &r, &fr, &chi, tol).unwrap();
            let twice = project_to_demand(&g, &r, &once, &chi, tol).unwrap();
            let scale = once.iter().fold(1.0f64, |a, x| a.max(x.abs()));
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() <= 10.0 * tol * scale * g.n() as f64);
            }
        }
    }
}
