//! Flow networks with two-sided capacities.
//!
//! Sign convention used throughout the crate: `f[e] > 0` moves flow from
//! `tail` to `head`. `Bᵀf` is inflow minus outflow at every vertex, so an
//! s-t flow of value `F` satisfies `Bᵀf = F·χ` with `χ[s] = -1`, `χ[t] = +1`.
//! `By` for vertex values `y` is `y[head] - y[tail]` per edge.

use std::collections::HashMap;

use crate::error::{FlowError, Result};
use crate::scalar::{lit, norm_inf, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Edge<S> {
    pub tail: usize,
    pub head: usize,
    /// `u⁺`: how far the flow may go in the tail→head direction.
    pub cap_fwd: S,
    /// `u⁻`: how far the flow may go in the head→tail direction.
    pub cap_bwd: S,
    /// Set on the s-t edges added by [`precondition`].
    pub precond: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph<S> {
    n: usize,
    edges: Vec<Edge<S>>,
    source: usize,
    sink: usize,
    cap_bound: S,
}

impl<S: Scalar> Graph<S> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge<S>] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge<S> {
        &self.edges[e]
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    /// The capacity bound `U` of the instance. Preconditioner edges carry `2U`.
    pub fn cap_bound(&self) -> S {
        self.cap_bound
    }

    pub fn precond_count(&self) -> usize {
        self.edges.iter().filter(|e| e.precond).count()
    }

    pub fn precond_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.precond)
            .map(|(i, _)| i)
    }

    /// True when every edge admits flow in both directions (`u⁺ > 0` and `u⁻ > 0`).
    pub fn is_two_sided(&self) -> bool {
        self.edges
            .iter()
            .all(|e| e.cap_fwd > S::zero() && e.cap_bwd > S::zero())
    }

    /// `Bᵀf`: inflow minus outflow per vertex.
    pub fn divergence(&self, f: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.n];
        self.divergence_into(f, &mut out);
        out
    }

    pub fn divergence_into(&self, f: &[S], out: &mut [S]) {
        out.iter_mut().for_each(|x| *x = S::zero());
        for (e, &fe) in self.edges.iter().zip(f) {
            out[e.head] += fe;
            out[e.tail] -= fe;
        }
    }

    /// `By`: potential difference `y[head] - y[tail]` per edge.
    pub fn gradient(&self, y: &[S]) -> Vec<S> {
        self.edges.iter().map(|e| y[e.head] - y[e.tail]).collect()
    }

    /// `value · χ_{s,t}`.
    pub fn st_demand(&self, value: S) -> Vec<S> {
        let mut chi = vec![S::zero(); self.n];
        chi[self.source] = -value;
        chi[self.sink] = value;
        chi
    }

    /// Net flow out of the source.
    pub fn flow_value(&self, f: &[S]) -> S {
        -self.divergence(f)[self.source]
    }

    pub(crate) fn check_len(&self, v: &[S]) -> Result<()> {
        if v.len() != self.m() {
            return Err(FlowError::DimensionMismatch {
                expected: self.m(),
                got: v.len(),
            });
        }
        Ok(())
    }
}

/// Validates an edge list `(tail, head, u⁺, u⁻)` and builds a [`Graph`].
pub fn build_graph<S: Scalar>(
    n: usize,
    edges: impl IntoIterator<Item = (usize, usize, S, S)>,
    source: usize,
    sink: usize,
    cap_bound: S,
) -> Result<Graph<S>> {
    for &v in &[source, sink] {
        if v >= n {
            return Err(FlowError::VertexOutOfRange { index: v, n });
        }
    }
    if source == sink {
        return Err(FlowError::SourceEqualsSink);
    }
    if !(cap_bound.is_finite() && cap_bound > S::zero()) {
        return Err(FlowError::InvalidParameter(
            "capacity bound must be positive".into(),
        ));
    }
    let mut list = Vec::new();
    for (i, (tail, head, cap_fwd, cap_bwd)) in edges.into_iter().enumerate() {
        for &v in &[tail, head] {
            if v >= n {
                return Err(FlowError::VertexOutOfRange { index: v, n });
            }
        }
        if tail == head {
            return Err(FlowError::SelfLoop(tail));
        }
        let bad = |reason: &str| FlowError::InvalidCapacity {
            edge: i,
            reason: reason.to_string(),
        };
        if !cap_fwd.is_finite() || !cap_bwd.is_finite() {
            return Err(bad("non-finite capacity"));
        }
        if cap_fwd < S::zero() || cap_bwd < S::zero() {
            return Err(bad("negative capacity"));
        }
        if cap_fwd + cap_bwd <= S::zero() {
            return Err(bad("u+ + u- must be positive"));
        }
        if cap_fwd > cap_bound || cap_bwd > cap_bound {
            return Err(bad("capacity exceeds U"));
        }
        list.push(Edge {
            tail,
            head,
            cap_fwd,
            cap_bwd,
            precond: false,
        });
    }
    let g = Graph {
        n,
        edges: list,
        source,
        sink,
        cap_bound,
    };
    if !is_connected(&g) {
        return Err(FlowError::DisconnectedGraph);
    }
    Ok(g)
}

fn is_connected<S: Scalar>(g: &Graph<S>) -> bool {
    let mut parent: Vec<usize> = (0..g.n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut components = g.n;
    for e in &g.edges {
        let (a, b) = (find(&mut parent, e.tail), find(&mut parent, e.head));
        if a != b {
            parent[a] = b;
            components -= 1;
        }
    }
    components == 1
}

/// Appends `m` undirected s-t edges of capacity `2U` each.
pub fn precondition<S: Scalar>(g: &Graph<S>) -> Graph<S> {
    let mut out = g.clone();
    let cap = lit::<S>(2.0) * g.cap_bound;
    for _ in 0..g.m() {
        out.edges.push(Edge {
            tail: g.source,
            head: g.sink,
            cap_fwd: cap,
            cap_bwd: cap,
            precond: true,
        });
    }
    out
}

/// Forward (`û⁺ = u⁺ - f`) and backward (`û⁻ = u⁻ + f`) residual capacities.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualCaps<S> {
    pub fwd: Vec<S>,
    pub bwd: Vec<S>,
}

impl<S: Scalar> ResidualCaps<S> {
    /// `û_e = min(û⁺_e, û⁻_e)`.
    pub fn min(&self, e: usize) -> S {
        self.fwd[e].min(self.bwd[e])
    }

    pub fn min_caps(&self) -> Vec<S> {
        (0..self.fwd.len()).map(|e| self.min(e)).collect()
    }

    pub fn len(&self) -> usize {
        self.fwd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fwd.is_empty()
    }
}

pub fn residual_caps<S: Scalar>(g: &Graph<S>, f: &[S]) -> Result<ResidualCaps<S>> {
    g.check_len(f)?;
    let mut fwd = Vec::with_capacity(g.m());
    let mut bwd = Vec::with_capacity(g.m());
    for (i, (e, &fe)) in g.edges.iter().zip(f).enumerate() {
        let up = e.cap_fwd - fe;
        let down = e.cap_bwd + fe;
        if !(up > S::zero() && down > S::zero()) {
            return Err(FlowError::InfeasibleFlow { edge: i });
        }
        fwd.push(up);
        bwd.push(down);
    }
    Ok(ResidualCaps { fwd, bwd })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Congestion<S> {
    pub fwd: Vec<S>,
    pub bwd: Vec<S>,
}

impl<S: Scalar> Congestion<S> {
    /// `‖ρ‖∞` over both directions.
    pub fn max(&self) -> S {
        norm_inf(&self.fwd).max(norm_inf(&self.bwd))
    }
}

/// `ρ⁺ = |f̂|/û⁺`, `ρ⁻ = |f̂|/û⁻`.
pub fn congestion<S: Scalar>(step: &[S], rc: &ResidualCaps<S>) -> Congestion<S> {
    let fwd = step.iter().zip(&rc.fwd).map(|(&x, &u)| x.abs() / u).collect();
    let bwd = step.iter().zip(&rc.bwd).map(|(&x, &u)| x.abs() / u).collect();
    Congestion { fwd, bwd }
}

/// `Bᵀf - σ`.
pub fn conservation_residual<S: Scalar>(g: &Graph<S>, f: &[S], demand: &[S]) -> Vec<S> {
    let mut r = g.divergence(f);
    for (x, &d) in r.iter_mut().zip(demand) {
        *x -= d;
    }
    r
}

/// How a flow on a two-sided graph maps back onto an edge of the original graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeLift<S> {
    /// Same edge, same orientation.
    Direct { edge: usize },
    /// One arc of a merged antiparallel pair: `sign · max(dir · f, 0)`.
    Merged { edge: usize, dir: S, sign: S },
    /// One-sided arc replaced by a shifted symmetric edge: `sign · (f + offset)`.
    Shifted { edge: usize, offset: S, sign: S },
}

/// A two-sided equivalent of a graph that may contain one-sided arcs.
///
/// Antiparallel one-sided arcs are merged into a single two-sided edge. Each
/// remaining arc `a→b` of capacity `c` is replaced by symmetric edges
/// `{a,b}`, `{s,b}`, `{a,t}` of capacity `c/2`; every s-t cut then gains exactly
/// `c/2`, so `maxflow(H) = maxflow(G) + value_offset`.
#[derive(Debug, Clone)]
pub struct Symmetrized<S> {
    pub graph: Graph<S>,
    /// One entry per original edge.
    pub lift: Vec<EdgeLift<S>>,
    pub value_offset: S,
}

impl<S: Scalar> Symmetrized<S> {
    /// Maps a flow on the two-sided graph to a capacity-respecting (but not
    /// necessarily conserving) flow on the original graph.
    pub fn lift_flow(&self, f: &[S]) -> Vec<S> {
        self.lift
            .iter()
            .map(|l| match *l {
                EdgeLift::Direct { edge } => f[edge],
                EdgeLift::Merged { edge, dir, sign } => sign * (dir * f[edge]).max(S::zero()),
                EdgeLift::Shifted { edge, offset, sign } => sign * (f[edge] + offset),
            })
            .collect()
    }
}

pub fn symmetrize<S: Scalar>(g: &Graph<S>) -> Symmetrized<S> {
    let half = lit::<S>(0.5);
    let mut edges: Vec<Edge<S>> = Vec::new();
    let mut lift = vec![EdgeLift::Direct { edge: 0 }; g.m()];
    let mut offset = S::zero();

    // one-sided arcs normalized to (from, to, cap, sign) where sign maps
    // flow along from→to back to the stored orientation
    let mut pending: HashMap<(usize, usize), Vec<(usize, S, S)>> = HashMap::new();
    let mut order: Vec<usize> = Vec::new();
    for (i, e) in g.edges.iter().enumerate() {
        if e.cap_fwd > S::zero() && e.cap_bwd > S::zero() {
            lift[i] = EdgeLift::Direct { edge: edges.len() };
            edges.push(Edge {
                precond: false,
                ..e.clone()
            });
        } else {
            order.push(i);
        }
    }
    let arc = |e: &Edge<S>| -> (usize, usize, S, S) {
        if e.cap_fwd > S::zero() {
            (e.tail, e.head, e.cap_fwd, S::one())
        } else {
            (e.head, e.tail, e.cap_bwd, -S::one())
        }
    };
    let mut merged = vec![false; g.m()];
    for &i in &order {
        let (from, to, cap, sign) = arc(&g.edges[i]);
        if let Some(list) = pending.get_mut(&(to, from)) {
            if let Some((j, cap_j, sign_j)) = list.pop() {
                let h = edges.len();
                edges.push(Edge {
                    tail: to,
                    head: from,
                    cap_fwd: cap_j,
                    cap_bwd: cap,
                    precond: false,
                });
                lift[j] = EdgeLift::Merged {
                    edge: h,
                    dir: S::one(),
                    sign: sign_j,
                };
                lift[i] = EdgeLift::Merged {
                    edge: h,
                    dir: -S::one(),
                    sign,
                };
                merged[i] = true;
                merged[j] = true;
                continue;
            }
        }
        pending.entry((from, to)).or_default().push((i, cap, sign));
    }
    let (s, t) = (g.source, g.sink);
    for &i in &order {
        if merged[i] {
            continue;
        }
        let (from, to, cap, sign) = arc(&g.edges[i]);
        let c = cap * half;
        lift[i] = EdgeLift::Shifted {
            edge: edges.len(),
            offset: c,
            sign,
        };
        edges.push(Edge {
            tail: from,
            head: to,
            cap_fwd: c,
            cap_bwd: c,
            precond: false,
        });
        for (a, b) in [(s, to), (from, t)] {
            if a != b {
                edges.push(Edge {
                    tail: a,
                    head: b,
                    cap_fwd: c,
                    cap_bwd: c,
                    precond: false,
                });
            }
        }
        offset += c;
    }
    let cap_bound = edges
        .iter()
        .fold(S::zero(), |acc, e| acc.max(e.cap_fwd).max(e.cap_bwd));
    Symmetrized {
        graph: Graph {
            n: g.n,
            edges,
            source: s,
            sink: t,
            cap_bound: if cap_bound > S::zero() {
                cap_bound
            } else {
                g.cap_bound
            },
        },
        lift,
        value_offset: offset,
    }
}

/// Raw instance data as read from a file or produced by a generator.
/// Unlike [`Graph`] it may be disconnected and may carry zero capacities.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowInstance {
    pub n: usize,
    pub source: usize,
    pub sink: usize,
    /// `(tail, head, u⁺, u⁻)`.
    pub edges: Vec<(usize, usize, f64, f64)>,
}

impl FlowInstance {
    pub fn cap_bound(&self) -> f64 {
        self.edges
            .iter()
            .fold(1.0f64, |acc, &(_, _, a, b)| acc.max(a).max(b))
    }

    /// Builds a [`Graph`], failing if the instance is not a valid connected graph.
    pub fn to_graph(&self) -> Result<Graph<f64>> {
        build_graph(self.n, self.edges.iter().copied(), self.source, self.sink, self.cap_bound())
    }

    /// Drops zero-capacity edges and keeps only the component of the source.
    /// Returns `None` when the sink is unreachable, together with the index
    /// map from kept edges to input edges.
    pub fn source_component(&self) -> Result<Option<(Graph<f64>, Vec<usize>)>> {
        for &v in &[self.source, self.sink] {
            if v >= self.n {
                return Err(FlowError::VertexOutOfRange { index: v, n: self.n });
            }
        }
        if self.source == self.sink {
            return Err(FlowError::SourceEqualsSink);
        }
        let mut adj = vec![Vec::new(); self.n];
        for (i, &(a, b, up, um)) in self.edges.iter().enumerate() {
            if a >= self.n || b >= self.n {
                return Err(FlowError::VertexOutOfRange { index: a.max(b), n: self.n });
            }
            if a == b {
                return Err(FlowError::SelfLoop(a));
            }
            if up + um > 0.0 {
                adj[a].push((b, i));
                adj[b].push((a, i));
            }
        }
        let mut id = vec![usize::MAX; self.n];
        let mut order = vec![self.source];
        id[self.source] = 0;
        let mut k = 0;
        while k < order.len() {
            let v = order[k];
            k += 1;
            for &(u, _) in &adj[v] {
                if id[u] == usize::MAX {
                    id[u] = order.len();
                    order.push(u);
                }
            }
        }
        if id[self.sink] == usize::MAX {
            return Ok(None);
        }
        let mut edges = Vec::new();
        let mut map = Vec::new();
        for (i, &(a, b, up, um)) in self.edges.iter().enumerate() {
            if up + um > 0.0 && id[a] != usize::MAX {
                edges.push((id[a], id[b], up, um));
                map.push(i);
            }
        }
        let g = build_graph(order.len(), edges, 0, id[self.sink], self.cap_bound())?;
        Ok(Some((g, map)))
    }
}
