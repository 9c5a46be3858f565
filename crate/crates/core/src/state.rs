//! The interior point iterate `(f, y, w)`.

use serde::{Deserialize, Serialize};

use crate::barrier::{coupling_residual, Weights};
use crate::error::Result;
use crate::graph::Graph;
use crate::scalar::{norm_inf, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateState<S> {
    pub f: Vec<S>,
    pub y: Vec<S>,
    pub w: Weights<S>,
    /// Current flow value `F`.
    pub value: S,
    /// Target value `F*`.
    pub f_star: S,
    pub iteration: usize,
}

impl<S: Scalar> IterateState<S> {
    pub fn gap(&self) -> S {
        self.f_star - self.value
    }

    /// `‖By - ∇φ_w(f)‖∞`.
    pub fn coupling_error(&self, g: &Graph<S>) -> Result<S> {
        Ok(norm_inf(&coupling_residual(g, &self.w, &self.f, &self.y)?))
    }
}

/// Zero flow and duals with weights proportional to the capacities,
/// `w⁺ = c_e u⁺`, `w⁻ = c_e u⁻` where `c_e = 2/(u⁺ + u⁻)`. The coupling
/// condition then holds exactly, `‖w‖₁ = 2m`, and unit symmetric edges get
/// `w⁺ = w⁻ = 1`.
pub fn initialize<S: Scalar>(g: &Graph<S>, f_star: S) -> IterateState<S> {
    let two = S::one() + S::one();
    let mut w = Weights::uniform(g.m(), S::zero());
    for (i, e) in g.edges().iter().enumerate() {
        let c = two / (e.cap_fwd + e.cap_bwd);
        w.fwd[i] = c * e.cap_fwd;
        w.bwd[i] = c * e.cap_bwd;
    }
    IterateState {
        f: vec![S::zero(); g.m()],
        y: vec![S::zero(); g.n()],
        w,
        value: S::zero(),
        f_star,
        iteration: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, precondition};
    use approx::assert_abs_diff_eq;

    #[test]
    fn symmetric_unit_start() {
        let g = build_graph(3, vec![(0, 1, 1.0, 1.0), (1, 2, 1.0, 1.0), (0, 2, 1.0, 1.0)], 0, 2, 1.0).unwrap();
        let p = precondition(&g);
        let st = initialize(&p, 7.0);
        assert!(st.w.fwd.iter().chain(&st.w.bwd).all(|&x| x == 1.0));
        assert_eq!(st.w.l1(), 2.0 * p.m() as f64);
        assert_eq!(st.coupling_error(&p).unwrap(), 0.0);
    }

    #[test]
    fn asymmetric_start_is_coupled() {
        let g = build_graph(2, vec![(0, 1, 1.0, 2.0), (0, 1, 2.0, 2.0)], 0, 1, 2.0).unwrap();
        let st = initialize(&g, 1.0);
        let c: f64 = 2.0 / 3.0;
        assert_abs_diff_eq!(st.w.fwd[0], c, epsilon = 1e-15);
        assert_abs_diff_eq!(st.w.bwd[0], 2.0 * c, epsilon = 1e-15);
        assert_eq!(st.coupling_error(&g).unwrap(), 0.0);
        assert_abs_diff_eq!(st.w.l1(), 4.0, epsilon = 1e-12);
    }
}
