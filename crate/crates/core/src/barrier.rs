//! Weighted log barrier, potential function and the per-edge terms of the
//! progress-step objectives.

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::graph::{residual_caps, Graph, ResidualCaps};
use crate::scalar::{lit, to_f64, Scalar};

/// Forward and backward barrier weights, one pair per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights<S> {
    pub fwd: Vec<S>,
    pub bwd: Vec<S>,
}

impl<S: Scalar> Weights<S> {
    pub fn uniform(m: usize, value: S) -> Self {
        Weights {
            fwd: vec![value; m],
            bwd: vec![value; m],
        }
    }

    pub fn len(&self) -> usize {
        self.fwd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fwd.is_empty()
    }

    /// `‖w‖₁ = Σ(w⁺ + w⁻)`.
    pub fn l1(&self) -> S {
        self.fwd.iter().chain(&self.bwd).copied().sum()
    }

    pub fn add_assign(&mut self, other: &Weights<S>) {
        for (a, &b) in self.fwd.iter_mut().zip(&other.fwd) {
            *a += b;
        }
        for (a, &b) in self.bwd.iter_mut().zip(&other.bwd) {
            *a += b;
        }
    }
}

/// `φ_w(f) = -Σ [w⁺ ln(u⁺ - f) + w⁻ ln(u⁻ + f)]`.
pub fn barrier_value<S: Scalar>(g: &Graph<S>, w: &Weights<S>, f: &[S]) -> Result<S> {
    let rc = residual_caps(g, f)?;
    Ok((0..g.m())
        .map(|e| -(w.fwd[e] * rc.fwd[e].ln() + w.bwd[e] * rc.bwd[e].ln()))
        .sum())
}

/// `∇φ_w(f)_e = w⁺/(u⁺ - f) - w⁻/(u⁻ + f)`.
pub fn barrier_gradient<S: Scalar>(g: &Graph<S>, w: &Weights<S>, f: &[S]) -> Result<Vec<S>> {
    let rc = residual_caps(g, f)?;
    Ok(barrier_gradient_rc(w, &rc))
}

pub fn barrier_gradient_rc<S: Scalar>(w: &Weights<S>, rc: &ResidualCaps<S>) -> Vec<S> {
    (0..rc.len())
        .map(|e| w.fwd[e] / rc.fwd[e] - w.bwd[e] / rc.bwd[e])
        .collect()
}

/// Flow, duals and the dual slack `s = ∇φ_w(f)` with the gap `fᵀs`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialState<S> {
    pub f: Vec<S>,
    pub y: Vec<S>,
    pub slack: Vec<S>,
    pub gap: S,
}

pub fn potential_state<S: Scalar>(g: &Graph<S>, w: &Weights<S>, f: &[S], y: &[S]) -> Result<PotentialState<S>> {
    let slack = barrier_gradient(g, w, f)?;
    let gap = f.iter().zip(&slack).map(|(&a, &b)| a * b).sum();
    Ok(PotentialState {
        f: f.to_vec(),
        y: y.to_vec(),
        slack,
        gap,
    })
}

/// `Φ_w = m ln(1 + fᵀs/m) + φ_w(f)`.
pub fn potential_value<S: Scalar>(ps: &PotentialState<S>, w: &Weights<S>, g: &Graph<S>) -> Result<S> {
    let m = lit::<S>(g.m().max(1) as f64);
    let arg = S::one() + ps.gap / m;
    if !(arg > S::zero()) {
        return Err(FlowError::InvalidGap(to_f64(arg)));
    }
    Ok(m * arg.ln() + barrier_value(g, w, &ps.f)?)
}

/// Value, first and second derivative of a scalar function.
pub type Jet<S> = (S, S, S);

/// Replaces `base` outside `[-ℓ, ℓ]` by its second-order Taylor expansion at
/// the nearest knot.
#[inline]
pub fn quad_ext_eval<S: Scalar>(base: impl Fn(S) -> Jet<S>, ell: S, x: S) -> Jet<S> {
    if x.abs() <= ell {
        return base(x);
    }
    let knot = if x > S::zero() { ell } else { -ell };
    let (v, d1, d2) = base(knot);
    let t = x - knot;
    (v + d1 * t + lit::<S>(0.5) * d2 * t * t, d1 + d2 * t, d2)
}

/// Box radius `ℓ = min(û⁺, û⁻)/10`.
#[inline]
pub fn box_radius<S: Scalar>(up: S, um: S) -> S {
    up.min(um) / lit(10.0)
}

/// Per-edge potential decrement without extension:
/// `-w⁺ ln(1 - x/û⁺) - w⁻ ln(1 + x/û⁻) - x (w⁺/û⁺ - w⁻/û⁻)`.
#[inline]
pub fn decrement_edge_raw<S: Scalar>(wp: S, wm: S, up: S, um: S, x: S) -> Jet<S> {
    let a = up - x;
    let b = um + x;
    if !(a > S::zero() && b > S::zero()) {
        return (S::infinity(), S::nan(), S::nan());
    }
    let v = -wp * (-x / up).ln_1p() - wm * (x / um).ln_1p() - x * (wp / up - wm / um);
    let d1 = wp / a - wm / b - (wp / up - wm / um);
    let d2 = wp / (a * a) + wm / (b * b);
    (v, d1, d2)
}

#[inline]
pub fn decrement_edge<S: Scalar>(wp: S, wm: S, up: S, um: S, x: S) -> Jet<S> {
    quad_ext_eval(|z| decrement_edge_raw(wp, wm, up, um, z), box_radius(up, um), x)
}

/// Value, gradient and Hessian diagonal of an edge-separable objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Decrement<S> {
    pub value: S,
    pub grad: Vec<S>,
    pub hess: Vec<S>,
}

/// Quadratically extended potential decrement `ΔΦ_w(f, f̂)`.
pub fn decrement_value<S: Scalar>(g: &Graph<S>, w: &Weights<S>, f: &[S], fhat: &[S]) -> Result<Decrement<S>> {
    let rc = residual_caps(g, f)?;
    g.check_len(fhat)?;
    let mut grad = vec![S::zero(); g.m()];
    let mut hess = vec![S::zero(); g.m()];
    let value = decrement_eval(w, &rc, fhat, true, &mut grad, &mut hess);
    Ok(Decrement { value, grad, hess })
}

/// Workhorse behind [`decrement_value`] writing into caller buffers.
pub fn decrement_eval<S: Scalar>(
    w: &Weights<S>,
    rc: &ResidualCaps<S>,
    fhat: &[S],
    extended: bool,
    grad: &mut [S],
    hess: &mut [S],
) -> S {
    let mut total = S::zero();
    for e in 0..fhat.len() {
        let (wp, wm, up, um) = (w.fwd[e], w.bwd[e], rc.fwd[e], rc.bwd[e]);
        let (v, d1, d2) = if extended {
            decrement_edge(wp, wm, up, um, fhat[e])
        } else {
            decrement_edge_raw(wp, wm, up, um, fhat[e])
        };
        total += v;
        grad[e] = d1;
        hess[e] = d2;
    }
    total
}

/// Per-edge `g(x) = |(û⁺)² ln(1 - x/û⁺) + û⁺û⁻ ln(1 + x/û⁻)|` with the
/// orientation normalized so the smaller residual capacity plays the role
/// of `û⁺`. Not extended.
#[inline]
pub fn g_edge_raw<S: Scalar>(up: S, um: S, x: S) -> Jet<S> {
    let (a, b, sx, sign) = if up <= um {
        (up, um, x, S::one())
    } else {
        (um, up, -x, -S::one())
    };
    let p = a - sx;
    let q = b + sx;
    if !(p > S::zero() && q > S::zero()) {
        return (S::infinity(), S::nan(), S::nan());
    }
    let v = -a * a * (-sx / a).ln_1p() - a * b * (sx / b).ln_1p();
    let d1 = sign * (a * a / p - a * b / q);
    let d2 = a * a / (p * p) + a * b / (q * q);
    (v.max(S::zero()), d1, d2)
}

#[inline]
pub fn g_edge<S: Scalar>(up: S, um: S, x: S) -> Jet<S> {
    quad_ext_eval(|z| g_edge_raw(up, um, z), box_radius(up, um), x)
}

/// Quadratically extended `g_e(f̂)` for every edge.
pub fn g_terms<S: Scalar>(g: &Graph<S>, f: &[S], fhat: &[S]) -> Result<Vec<S>> {
    let rc = residual_caps(g, f)?;
    g.check_len(fhat)?;
    Ok((0..g.m()).map(|e| g_edge(rc.fwd[e], rc.bwd[e], fhat[e]).0).collect())
}

/// `(y_head - y_tail) - ∇φ_w(f)_e` per edge.
pub fn coupling_residual<S: Scalar>(g: &Graph<S>, w: &Weights<S>, f: &[S], y: &[S]) -> Result<Vec<S>> {
    let grad = barrier_gradient(g, w, f)?;
    Ok(g
        .edges()
        .iter()
        .zip(grad)
        .map(|(e, d)| (y[e.head] - y[e.tail]) - d)
        .collect())
}

/// `base · (1 + ‖w‖₁/m)`.
pub fn coupling_tolerance<S: Scalar>(base: S, w: &Weights<S>) -> S {
    let m = lit::<S>(w.len().max(1) as f64);
    base * (S::one() + w.l1() / m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn unit_edge() -> Graph<f64> {
        build_graph(2, vec![(0, 1, 1.0, 1.0)], 0, 1, 1.0).unwrap()
    }

    #[test]
    fn barrier_examples() {
        let g = unit_edge();
        let w = Weights::uniform(1, 1.0);
        assert_eq!(barrier_value(&g, &w, &[0.0]).unwrap(), 0.0);
        assert_relative_eq!(barrier_value(&g, &w, &[0.5]).unwrap(), 0.2876820724517809, epsilon = 1e-12);
        assert!((barrier_value(&g, &w, &[0.5]).unwrap() - 0.28768).abs() < 1e-5);
        let near = barrier_value(&g, &w, &[1.0 - 1e-12]).unwrap();
        assert!(near > 25.0);
        assert!(barrier_value(&g, &w, &[1.0]).is_err());
    }

    #[test]
    fn potential_examples() {
        let g = unit_edge();
        let w = Weights::uniform(1, 1.0);
        let ps = potential_state(&g, &w, &[0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(potential_value(&ps, &w, &g).unwrap(), 0.0);
        let ps = PotentialState {
            f: vec![0.0],
            y: vec![0.0; 2],
            slack: vec![0.0],
            gap: 1.0,
        };
        assert_relative_eq!(potential_value(&ps, &w, &g).unwrap(), 2f64.ln());
    }

    #[test]
    fn decrement_examples() {
        let g = unit_edge();
        let w = Weights::uniform(1, 1.0);
        let zero = decrement_value(&g, &w, &[0.0], &[0.0]).unwrap();
        assert_eq!((zero.value, zero.grad[0]), (0.0, 0.0));
        let inside = decrement_value(&g, &w, &[0.0], &[0.05]).unwrap();
        assert_relative_eq!(inside.value, -(1.0f64 - 0.0025).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(inside.value, 0.0025031, epsilon = 1e-7);
        let outside = decrement_value(&g, &w, &[0.0], &[0.15]).unwrap();
        let (b, b1, b2) = decrement_edge_raw(1.0, 1.0, 1.0, 1.0, 0.1);
        assert_abs_diff_eq!(b, 0.0100503, epsilon = 1e-7);
        assert_abs_diff_eq!(b1, 0.20202, epsilon = 1e-5);
        assert_abs_diff_eq!(b2, 2.061014, epsilon = 1e-6);
        assert_abs_diff_eq!(outside.value, 0.0227276, epsilon = 1e-7);
    }

    #[test]
    fn quad_ext_examples() {
        let base = |x: f64| (-(1.0 - x).ln(), 1.0 / (1.0 - x), 1.0 / ((1.0 - x) * (1.0 - x)));
        assert_eq!(quad_ext_eval(base, 0.1, 0.05), base(0.05));
        assert_eq!(quad_ext_eval(base, 0.1, 0.1), base(0.1));
        let (v, _, _) = quad_ext_eval(base, 0.1, 0.2);
        assert_abs_diff_eq!(v, 0.22265, epsilon = 1e-5);
        let (vl, dl, hl) = quad_ext_eval(base, 0.1, -0.3);
        let (b, b1, b2) = base(-0.1);
        assert_relative_eq!(vl, b - 0.2 * b1 + 0.02 * b2, epsilon = 1e-15);
        assert_relative_eq!(dl, b1 - 0.2 * b2, epsilon = 1e-15);
        assert_eq!(hl, b2);
    }

    #[test]
    fn g_examples() {
        assert_eq!(g_edge(1.0, 1.0, 0.0).0, 0.0);
        let v = g_edge(1.0, 1.0, 0.1).0;
        assert_abs_diff_eq!(v, 0.0100503, epsilon = 1e-7);
        assert!(0.01 <= v && v <= 0.02);
        // asymmetric residual capacities fall below x² for positive steps
        let (a, _, _) = g_edge(0.5, 1.0, 0.04);
        let expect = -0.25 * (1.0f64 - 0.08).ln() - 0.5 * (1.04f64).ln();
        assert_relative_eq!(a, expect, epsilon = 1e-15);
        assert_abs_diff_eq!(a, 0.001235, epsilon = 1e-6);
        let r: f64 = 0.5;
        assert!(a >= (1.0 + r) / 2.42 * 0.0016 && a <= (1.0 + r) / 1.62 * 0.0016);
        // orientation normalization is a mirror image
        let (b, db, hb) = g_edge(1.0, 0.5, -0.04);
        let (_, da, ha) = g_edge(0.5, 1.0, 0.04);
        assert_relative_eq!(a, b, epsilon = 1e-15);
        assert_relative_eq!(da, -db, epsilon = 1e-15);
        assert_relative_eq!(ha, hb, epsilon = 1e-15);
    }

    #[test]
    fn coupling_examples() {
        let g = build_graph(3, vec![(0, 1, 1.0, 2.0), (1, 2, 3.0, 1.0)], 0, 2, 3.0).unwrap();
        let w = Weights {
            fwd: vec![1.0, 3.0],
            bwd: vec![2.0, 1.0],
        };
        let r = coupling_residual(&g, &w, &[0.0, 0.0], &[0.0; 3]).unwrap();
        assert_eq!(r, vec![0.0, 0.0]);
        let sym = unit_edge();
        let r = coupling_residual(&sym, &Weights::uniform(1, 1.0), &[0.0], &[0.0; 2]).unwrap();
        assert_eq!(r, vec![0.0]);
        let eps = 1e-3;
        let r = coupling_residual(&g, &w, &[0.0, 0.0], &[0.0, eps, 0.0]).unwrap();
        assert_relative_eq!(r[0], eps);
        assert_relative_eq!(r[1], -eps);
    }

    fn fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> (f64, f64) {
        let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
        let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        (d1, d2)
    }

    fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()) + abs
    }

    proptest! {
        #[test]
        fn decrement_derivatives_match_differences(
            wp in 0.1f64..5.0, wm in 0.1f64..5.0,
            up in 0.2f64..3.0, um in 0.2f64..3.0,
            t in -3.0f64..3.0,
        ) {
            let x = t * box_radius(up, um);
            let h = 1e-6;
            let (_, d1, d2) = decrement_edge(wp, wm, up, um, x);
            let (n1, _) = fd(|z| decrement_edge(wp, wm, up, um, z).0, x, h);
            let (g2, _) = fd(|z| decrement_edge(wp, wm, up, um, z).1, x, h);
            prop_assert!(close(d1, n1, 1e-5, 1e-9));
            prop_assert!(close(d2, g2, 1e-5, 1e-7));
        }

        #[test]
        fn g_derivatives_match_differences(
            up in 0.2f64..3.0, um in 0.2f64..3.0, t in -3.0f64..3.0,
        ) {
            let x = t * box_radius(up, um);
            let h = 1e-6;
            let (_, d1, d2) = g_edge(up, um, x);
            let (n1, _) = fd(|z| g_edge(up, um, z).0, x, h);
            let (g2, _) = fd(|z| g_edge(up, um, z).1, x, h);
            prop_assert!(close(d1, n1, 1e-5, 1e-9));
            prop_assert!(close(d2, g2, 1e-5, 1e-7));
        }

        #[test]
        fn extension_is_c2_at_knots(up in 0.2f64..3.0, um in 0.2f64..3.0, wp in 0.1f64..5.0, wm in 0.1f64..5.0) {
            let ell = box_radius(up, um);
            for knot in [ell, -ell] {
                let inner = decrement_edge_raw(wp, wm, up, um, knot);
                let eps = 1e-9 * knot.signum();
                let outer = decrement_edge(wp, wm, up, um, knot + eps);
                prop_assert!((inner.0 - outer.0).abs() < 1e-6);
                prop_assert!((inner.1 - outer.1).abs() < 1e-6);
                prop_assert!((inner.2 - outer.2).abs() < 1e-6 * inner.2.max(1.0));
            }
        }

        #[test]
        fn decrement_hessian_in_envelope(
            wp in 0.1f64..5.0, wm in 0.1f64..5.0,
            up in 0.2f64..3.0, um in 0.2f64..3.0, t in -1.0f64..1.0,
        ) {
            let x = t * box_radius(up, um);
            let h0 = wp / (up * up) + wm / (um * um);
            let (_, _, d2) = decrement_edge(wp, wm, up, um, x);
            prop_assert!(d2 >= 0.81 * h0 - 1e-12 && d2 <= 1.24 * h0 + 1e-12);
        }

        #[test]
        fn g_symmetric_sandwich(u in 0.05f64..4.0, t in -1.0f64..1.0) {
            let x = t * u / 10.0;
            let v = g_edge(u, u, x).0;
            prop_assert!(v >= x * x * (1.0 - 1e-12) && v <= 2.0 * x * x);
        }

        #[test]
        fn g_general_envelope(up in 0.05f64..4.0, um in 0.05f64..4.0, t in -1.0f64..1.0) {
            let x = t * box_radius(up, um);
            let r = up.min(um) / up.max(um);
            let v = g_edge(up, um, x).0;
            prop_assert!(v >= (1.0 + r) / 2.42 * x * x * (1.0 - 1e-9));
            prop_assert!(v <= (1.0 + r) / 1.62 * x * x * (1.0 + 1e-9));
        }
    }
}
