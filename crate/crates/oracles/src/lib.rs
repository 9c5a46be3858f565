//! Slow, dense, independently written reference solvers. Nothing here shares
//! code with the main solver.

use std::collections::VecDeque;

use nalgebra::{Cholesky, DMatrix, DVector};

/// Edmonds–Karp on directed arcs `(tail, head, cap)`.
pub fn edmonds_karp(n: usize, s: usize, t: usize, arcs: &[(usize, usize, i64)]) -> i64 {
    // residual capacities on a dense adjacency list with paired reverse arcs
    let mut head = Vec::new();
    let mut cap = Vec::new();
    let mut adj = vec![Vec::new(); n];
    for &(a, b, c) in arcs {
        adj[a].push(head.len());
        head.push(b);
        cap.push(c);
        adj[b].push(head.len());
        head.push(a);
        cap.push(0);
    }
    let mut total = 0;
    loop {
        let mut prev = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &a in &adj[v] {
                let u = head[a];
                if cap[a] > 0 && !seen[u] {
                    seen[u] = true;
                    prev[u] = a;
                    queue.push_back(u);
                }
            }
        }
        if !seen[t] {
            return total;
        }
        let mut bottleneck = i64::MAX;
        let mut v = t;
        while v != s {
            let a = prev[v];
            bottleneck = bottleneck.min(cap[a]);
            v = head[a ^ 1];
        }
        let mut v = t;
        while v != s {
            let a = prev[v];
            cap[a] -= bottleneck;
            cap[a ^ 1] += bottleneck;
            v = head[a ^ 1];
        }
        total += bottleneck;
    }
}

/// Edmonds–Karp on two-sided edges `(tail, head, u⁺, u⁻)`.
pub fn edmonds_karp_two_sided(n: usize, s: usize, t: usize, edges: &[(usize, usize, i64, i64)]) -> i64 {
    let mut arcs = Vec::new();
    for &(a, b, up, um) in edges {
        if up > 0 {
            arcs.push((a, b, up));
        }
        if um > 0 {
            arcs.push((b, a, um));
        }
    }
    edmonds_karp(n, s, t, &arcs)
}

/// Dense signed incidence matrix with vertex `ground` removed: row `e` has
/// `+1` at the head and `-1` at the tail.
fn grounded_incidence(n: usize, edges: &[(usize, usize)], ground: usize) -> DMatrix<f64> {
    let col = |v: usize| if v < ground { v } else { v - 1 };
    let mut b = DMatrix::zeros(edges.len(), n - 1);
    for (e, &(a, h)) in edges.iter().enumerate() {
        if h != ground {
            b[(e, col(h))] += 1.0;
        }
        if a != ground {
            b[(e, col(a))] -= 1.0;
        }
    }
    b
}

fn drop_ground(v: &[f64], ground: usize) -> DVector<f64> {
    DVector::from_iterator(v.len() - 1, v.iter().enumerate().filter(|&(i, _)| i != ground).map(|(_, &x)| x))
}

#[derive(Debug, Clone)]
pub struct ElectricalReference {
    pub flow: Vec<f64>,
    pub energy: f64,
}

/// `argmin Σ r_e f_e²` subject to `Bᵀf = demand` (inflow minus outflow),
/// from the dense KKT system. Returns `None` when the system is singular.
pub fn electrical_reference(n: usize, edges: &[(usize, usize)], r: &[f64], demand: &[f64]) -> Option<ElectricalReference> {
    let m = edges.len();
    let b = grounded_incidence(n, edges, 0);
    let k = n - 1;
    let mut kkt = DMatrix::zeros(m + k, m + k);
    for e in 0..m {
        kkt[(e, e)] = 2.0 * r[e];
    }
    kkt.view_mut((0, m), (m, k)).copy_from(&b);
    kkt.view_mut((m, 0), (k, m)).copy_from(&b.transpose());
    let mut rhs = DVector::zeros(m + k);
    rhs.rows_mut(m, k).copy_from(&drop_ground(demand, 0));
    let sol = kkt.lu().solve(&rhs)?;
    let flow: Vec<f64> = sol.rows(0, m).iter().copied().collect();
    let energy = flow.iter().zip(r).map(|(f, r)| r * f * f).sum();
    Some(ElectricalReference { flow, energy })
}

/// Data of one edge for the composite objective: barrier weights, residual
/// capacities and the linear correction.
#[derive(Debug, Clone, Copy)]
pub struct CompositeEdge {
    pub wp: f64,
    pub wm: f64,
    pub up: f64,
    pub um: f64,
    pub corr: f64,
}

/// Value and first two derivatives of `h` at `x`, continued quadratically
/// outside `[-l, l]`.
fn extend(h: impl Fn(f64) -> (f64, f64, f64), l: f64, x: f64) -> (f64, f64, f64) {
    if x.abs() <= l {
        return h(x);
    }
    let k = l.copysign(x);
    let (v, d, dd) = h(k);
    let z = x - k;
    (v + d * z + 0.5 * dd * z * z, d + dd * z, dd)
}

fn barrier_change(c: &CompositeEdge, x: f64) -> (f64, f64, f64) {
    let (wp, wm, up, um) = (c.wp, c.wm, c.up, c.um);
    let raw = |x: f64| {
        let a = 1.0 - x / up;
        let b = 1.0 + x / um;
        (
            -wp * a.ln() - wm * b.ln() - x * (wp / up - wm / um),
            wp / (up * a) - wm / (um * b) - (wp / up - wm / um),
            wp / (up * up * a * a) + wm / (um * um * b * b),
        )
    };
    extend(raw, up.min(um) / 10.0, x)
}

fn g_term(c: &CompositeEdge, x: f64) -> (f64, f64, f64) {
    let (up, um) = (c.up, c.um);
    // the smaller side plays the role of û⁺
    let (a, b, sg) = if up <= um { (up, um, 1.0) } else { (um, up, -1.0) };
    let raw = |x: f64| {
        let y = sg * x;
        let p = 1.0 - y / a;
        let q = 1.0 + y / b;
        (
            -a * a * p.ln() - a * b * q.ln(),
            sg * (a / p - a / q),
            1.0 / (p * p) + a / (b * q * q),
        )
    };
    extend(raw, a / 10.0, x)
}

/// `Σ_e ΔΦ_e(x_e) - xᵀcorr + W (Σ g_e^p)^{1/p}` and its gradient.
pub fn composite(edges: &[CompositeEdge], big_w: f64, p: u32, x: &[f64]) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = vec![0.0; x.len()];
    let mut g = vec![0.0; x.len()];
    let mut g1 = vec![0.0; x.len()];
    for (e, c) in edges.iter().enumerate() {
        let (v, d, _) = barrier_change(c, x[e]);
        value += v - x[e] * c.corr;
        grad[e] = d - c.corr;
        let (gv, gd, _) = g_term(c, x[e]);
        g[e] = gv.max(0.0);
        g1[e] = gd;
    }
    let scale = g.iter().cloned().fold(0.0, f64::max);
    if scale > 0.0 && big_w != 0.0 {
        let pf = p as f64;
        let sum: f64 = g.iter().map(|v| (v / scale).powf(pf)).sum();
        let norm = scale * sum.powf(1.0 / pf);
        value += big_w * norm;
        for e in 0..x.len() {
            grad[e] += big_w * (g[e] / norm).powf(pf - 1.0) * g1[e];
        }
    }
    (value, grad)
}

/// Second derivatives of the separable part, used for a diagonal metric.
pub fn composite_curvature(edges: &[CompositeEdge], x: &[f64]) -> Vec<f64> {
    edges.iter().zip(x).map(|(c, &v)| barrier_change(c, v).2).collect()
}

/// Orthogonal projector onto `{Bᵀx = d}` in the metric `diag(h)`.
struct Projector {
    bh: DMatrix<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
    hinv: DVector<f64>,
    b: DMatrix<f64>,
    d: DVector<f64>,
}

impl Projector {
    fn new(n: usize, edges: &[(usize, usize)], h: &[f64], demand: &[f64]) -> Option<Self> {
        let b = grounded_incidence(n, edges, 0);
        let hinv = DVector::from_iterator(h.len(), h.iter().map(|v| 1.0 / v));
        let bh = DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] * hinv[i]);
        let lap = b.transpose() * &bh;
        let chol = Cholesky::new(lap)?;
        Some(Projector { bh, chol, hinv, b, d: drop_ground(demand, 0) })
    }

    /// `argmin_z ‖z - x‖²_h` over the affine set.
    fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let res = self.b.transpose() * x - &self.d;
        let phi = self.chol.solve(&res);
        x - &self.bh * phi
    }

    fn precondition(&self, g: &DVector<f64>) -> DVector<f64> {
        g.component_mul(&self.hinv)
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Long-run accelerated projected gradient on the composite objective over
/// `{Bᵀx = demand}`, in the diagonal metric of the barrier curvature at the
/// origin, with backtracking and function-value restarts.
pub fn composite_reference(
    n: usize,
    edges: &[(usize, usize)],
    data: &[CompositeEdge],
    big_w: f64,
    p: u32,
    demand: &[f64],
    max_iter: usize,
) -> Option<ReferenceSolution> {
    let m = edges.len();
    let h0 = composite_curvature(data, &vec![0.0; m]);
    let proj = Projector::new(n, edges, &h0, demand)?;
    let eval = |v: &DVector<f64>| -> (f64, DVector<f64>) {
        let (f, g) = composite(data, big_w, p, v.as_slice());
        (f, DVector::from_vec(g))
    };
    let mut x = proj.project(&DVector::zeros(m));
    let (mut fx, _) = eval(&x);
    let mut y = x.clone();
    let mut theta: f64 = 1.0;
    let mut lip: f64 = 1.0;
    let mut iterations = 0;
    let mut stall = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        let (fy, gy) = eval(&y);
        let dir = proj.precondition(&gy);
        let (x_new, f_new) = loop {
            let cand = proj.project(&(&y - &dir / lip));
            let diff = &cand - &y;
            let quad: f64 = diff.iter().zip(h0.iter()).map(|(d, h)| h * d * d).sum();
            let (fc, _) = eval(&cand);
            if fc <= fy + gy.dot(&diff) + 0.5 * lip * quad + 1e-15 * fy.abs() || lip > 1e12 {
                break (cand, fc);
            }
            lip *= 2.0;
        };
        if f_new > fx {
            // restart the momentum
            theta = 1.0;
            y = x.clone();
            continue;
        }
        let improvement = fx - f_new;
        let theta_new = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        y = &x_new + (&x_new - &x) * ((theta - 1.0) / theta_new);
        theta = theta_new;
        x = x_new;
        fx = f_new;
        lip = (lip * 0.9).max(1e-6);
        if improvement <= 1e-17 * fx.abs().max(1e-300) {
            stall += 1;
            if stall > 200 {
                break;
            }
        } else {
            stall = 0;
        }
    }
    Some(ReferenceSolution {
        x: x.iter().copied().collect(),
        value: fx,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edmonds_karp_small() {
        let arcs = [(0, 1, 1), (1, 3, 1), (0, 2, 1), (2, 3, 1), (1, 2, 1)];
        assert_eq!(edmonds_karp(4, 0, 3, &arcs), 2);
        assert_eq!(edmonds_karp(2, 0, 1, &[(0, 1, 5)]), 5);
        assert_eq!(edmonds_karp(3, 0, 2, &[(0, 1, 5)]), 0);
        assert_eq!(edmonds_karp_two_sided(2, 0, 1, &[(1, 0, 0, 3)]), 3);
    }

    #[test]
    fn electrical_two_parallel() {
        let r = electrical_reference(2, &[(0, 1), (0, 1)], &[1.0, 3.0], &[-1.0, 1.0]).unwrap();
        assert!((r.flow[0] - 0.75).abs() < 1e-12 && (r.flow[1] - 0.25).abs() < 1e-12);
        assert!((r.energy - 0.75).abs() < 1e-12);
    }

    #[test]
    fn composite_values() {
        let c = CompositeEdge { wp: 1.0, wm: 1.0, up: 1.0, um: 1.0, corr: 0.0 };
        let (v, _) = composite(&[c], 1.0, 2, &[0.1]);
        assert!((v - 0.0201007).abs() < 1e-7);
        let (v, _) = composite(&[c], 0.0, 2, &[0.05]);
        assert!((v - 0.0025031).abs() < 1e-7);
    }

    #[test]
    fn reference_solves_symmetric_split() {
        let c = CompositeEdge { wp: 1.0, wm: 1.0, up: 1.0, um: 1.0, corr: 0.0 };
        let sol = composite_reference(2, &[(0, 1), (0, 1)], &[c, c], 1.0, 2, &[-0.02, 0.02], 20_000).unwrap();
        assert!((sol.x[0] - 0.01).abs() < 1e-9 && (sol.x[1] - 0.01).abs() < 1e-9);
    }
}
