//! Integral flows: Dinic's algorithm, BFS augmenting paths and rounding of a
//! fractional flow to an integral one.

use std::collections::VecDeque;

use crate::error::{FlowError, Result};
use crate::graph::Graph;
use crate::scalar::{to_f64, Scalar};

/// Integral two-sided edge list `(tail, head, u⁺, u⁻)`.
pub type IntEdges = Vec<(usize, usize, i64, i64)>;

/// Integral copy of the capacities. Fails on fractional capacities.
pub fn integral_edges<S: Scalar>(g: &Graph<S>) -> Result<IntEdges> {
    g.edges()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let a = to_f64(e.cap_fwd);
            let b = to_f64(e.cap_bwd);
            if a.fract() != 0.0 || b.fract() != 0.0 || a > i64::MAX as f64 || b > i64::MAX as f64 {
                return Err(FlowError::NonIntegralCapacity { edge: i });
            }
            Ok((e.tail, e.head, a as i64, b as i64))
        })
        .collect()
}

/// Residual network where every edge is a pair of mutually reverse arcs.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    n: usize,
    s: usize,
    t: usize,
    /// arc `2e` goes tail→head, arc `2e+1` head→tail
    to: Vec<usize>,
    res: Vec<i64>,
    cap_fwd: Vec<i64>,
    adj: Vec<Vec<usize>>,
}

impl FlowNetwork {
    pub fn new(n: usize, edges: &[(usize, usize, i64, i64)], s: usize, t: usize) -> Self {
        let mut to = Vec::with_capacity(2 * edges.len());
        let mut res = Vec::with_capacity(2 * edges.len());
        let mut cap_fwd = Vec::with_capacity(edges.len());
        let mut adj = vec![Vec::new(); n];
        for (e, &(a, b, up, um)) in edges.iter().enumerate() {
            to.push(b);
            res.push(up);
            to.push(a);
            res.push(um);
            adj[a].push(2 * e);
            adj[b].push(2 * e + 1);
            cap_fwd.push(up);
        }
        FlowNetwork { n, s, t, to, res, cap_fwd, adj }
    }

    /// Starts from an existing flow `f` with `-u⁻ ≤ f ≤ u⁺`.
    pub fn with_flow(n: usize, edges: &[(usize, usize, i64, i64)], s: usize, t: usize, f: &[i64]) -> Self {
        let mut net = Self::new(n, edges, s, t);
        for (e, &x) in f.iter().enumerate() {
            net.res[2 * e] -= x;
            net.res[2 * e + 1] += x;
        }
        net
    }

    pub fn flow(&self) -> Vec<i64> {
        (0..self.cap_fwd.len()).map(|e| self.cap_fwd[e] - self.res[2 * e]).collect()
    }

    pub fn value(&self) -> i64 {
        let mut out = 0;
        for &a in &self.adj[self.s] {
            let e = a / 2;
            let fe = self.cap_fwd[e] - self.res[2 * e];
            out += if a % 2 == 0 { fe } else { -fe };
        }
        out
    }

    fn bfs_levels(&self, level: &mut [i64]) -> bool {
        level.iter_mut().for_each(|l| *l = -1);
        level[self.s] = 0;
        let mut q = VecDeque::from([self.s]);
        while let Some(v) = q.pop_front() {
            for &a in &self.adj[v] {
                let u = self.to[a];
                if self.res[a] > 0 && level[u] < 0 {
                    level[u] = level[v] + 1;
                    q.push_back(u);
                }
            }
        }
        level[self.t] >= 0
    }

    fn dfs_push(&mut self, v: usize, limit: i64, level: &[i64], it: &mut [usize]) -> i64 {
        if v == self.t {
            return limit;
        }
        while it[v] < self.adj[v].len() {
            let a = self.adj[v][it[v]];
            let u = self.to[a];
            if self.res[a] > 0 && level[u] == level[v] + 1 {
                let pushed = self.dfs_push(u, limit.min(self.res[a]), level, it);
                if pushed > 0 {
                    self.res[a] -= pushed;
                    self.res[a ^ 1] += pushed;
                    return pushed;
                }
            }
            it[v] += 1;
        }
        0
    }

    /// Dinic's blocking-flow algorithm from the current flow.
    pub fn dinic(&mut self) -> i64 {
        let mut level = vec![-1; self.n];
        let mut it = vec![0; self.n];
        while self.bfs_levels(&mut level) {
            it.iter_mut().for_each(|x| *x = 0);
            loop {
                let pushed = self.dfs_push(self.s, i64::MAX, &level, &mut it);
                if pushed == 0 {
                    break;
                }
            }
        }
        self.value()
    }

    /// One shortest augmenting path; returns the amount pushed, capped by `limit`.
    pub fn augment_once(&mut self, limit: i64) -> i64 {
        let mut parent = vec![usize::MAX; self.n];
        let mut seen = vec![false; self.n];
        seen[self.s] = true;
        let mut q = VecDeque::from([self.s]);
        while let Some(v) = q.pop_front() {
            if v == self.t {
                break;
            }
            for &a in &self.adj[v] {
                let u = self.to[a];
                if self.res[a] > 0 && !seen[u] {
                    seen[u] = true;
                    parent[u] = a;
                    q.push_back(u);
                }
            }
        }
        if !seen[self.t] {
            return 0;
        }
        let mut bottleneck = limit;
        let mut v = self.t;
        while v != self.s {
            let a = parent[v];
            bottleneck = bottleneck.min(self.res[a]);
            v = self.to[a ^ 1];
        }
        let mut v = self.t;
        while v != self.s {
            let a = parent[v];
            self.res[a] -= bottleneck;
            self.res[a ^ 1] += bottleneck;
            v = self.to[a ^ 1];
        }
        bottleneck
    }

    pub fn has_augmenting_path(&self) -> bool {
        let mut seen = vec![false; self.n];
        seen[self.s] = true;
        let mut stack = vec![self.s];
        while let Some(v) = stack.pop() {
            for &a in &self.adj[v] {
                let u = self.to[a];
                if self.res[a] > 0 && !seen[u] {
                    if u == self.t {
                        return true;
                    }
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        false
    }
}

/// Exact maximum flow by Dinic's algorithm on an integral graph.
pub fn dinic_max_flow<S: Scalar>(g: &Graph<S>) -> Result<(i64, Vec<i64>)> {
    let edges = integral_edges(g)?;
    let mut net = FlowNetwork::new(g.n(), &edges, g.source(), g.sink());
    let v = net.dinic();
    Ok((v, net.flow()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub flow: Vec<i64>,
    pub value: i64,
    pub augmentations: usize,
    /// An augmenting path still exists after stopping at the target.
    pub path_remains: bool,
}

/// BFS augmenting paths from an integral feasible flow until the value
/// reaches `target` (if given) or no augmenting path is left.
pub fn augment_to_optimal<S: Scalar>(g: &Graph<S>, f: &[i64], target: Option<i64>) -> Result<Augmented> {
    let edges = integral_edges(g)?;
    let mut net = FlowNetwork::with_flow(g.n(), &edges, g.source(), g.sink(), f);
    let mut value = net.value();
    let mut count = 0;
    loop {
        let want = target.map_or(i64::MAX, |t| t - value);
        if want <= 0 {
            break;
        }
        let pushed = net.augment_once(want);
        if pushed == 0 {
            break;
        }
        value += pushed;
        count += 1;
    }
    Ok(Augmented {
        flow: net.flow(),
        value,
        augmentations: count,
        path_remains: net.has_augmenting_path(),
    })
}

/// Checks capacity bounds and exact conservation of an integral s-t flow and
/// returns its value.
pub fn check_integral_flow(edges: &[(usize, usize, i64, i64)], n: usize, s: usize, t: usize, f: &[i64]) -> Option<i64> {
    let mut div = vec![0i64; n];
    for (&(a, b, up, um), &x) in edges.iter().zip(f) {
        if x > up || x < -um {
            return None;
        }
        div[b] += x;
        div[a] -= x;
    }
    for (v, &d) in div.iter().enumerate() {
        if v != s && v != t && d != 0 {
            return None;
        }
    }
    if div[s] + div[t] != 0 {
        return None;
    }
    Some(div[t])
}

/// Rounds a fractional flow on an integral graph to an integral feasible flow.
///
/// The flow is clipped to the capacity box, s-t paths are peeled off its
/// oriented support (dropping whatever does not lie on a path), and the
/// remaining fractional parts are cancelled along cycles through a virtual
/// t→s edge, always moving in the direction that increases the value.
/// Returns the flow and whether the result had to be replaced by zero.
pub fn round_to_integral<S: Scalar>(g: &Graph<S>, f: &[S], eps: f64) -> Result<(Vec<i64>, bool)> {
    let edges = integral_edges(g)?;
    g.check_len(f)?;
    let (n, s, t) = (g.n(), g.source(), g.sink());
    let m = edges.len();

    // orientation and clipped magnitude
    let mut orient = vec![1i8; m];
    let mut x = vec![0.0f64; m];
    for (e, &(_, _, up, um)) in edges.iter().enumerate() {
        let v = to_f64(f[e]).clamp(-(um as f64), up as f64);
        if v < 0.0 {
            orient[e] = -1;
        }
        x[e] = v.abs();
    }
    let ends = |e: usize| -> (usize, usize) {
        let (a, b, _, _) = edges[e];
        if orient[e] > 0 {
            (a, b)
        } else {
            (b, a)
        }
    };

    // path peeling
    let mut out_arcs = vec![Vec::new(); n];
    for e in 0..m {
        out_arcs[ends(e).0].push(e);
    }
    let mut kept = vec![0.0f64; m];
    let mut ptr = vec![0usize; n];
    loop {
        ptr.iter_mut().for_each(|p| *p = 0);
        let mut path = Vec::new();
        let mut on_path = vec![false; n];
        let mut v = s;
        on_path[s] = true;
        while v != t {
            let mut advanced = false;
            while ptr[v] < out_arcs[v].len() {
                let e = out_arcs[v][ptr[v]];
                let u = ends(e).1;
                if x[e] > eps && !on_path[u] {
                    path.push(e);
                    on_path[u] = true;
                    v = u;
                    advanced = true;
                    break;
                }
                ptr[v] += 1;
            }
            if !advanced {
                // dead end: retreat
                match path.pop() {
                    Some(e) => {
                        on_path[v] = false;
                        v = ends(e).0;
                        ptr[v] += 1;
                    }
                    None => break,
                }
            }
        }
        if v != t {
            break;
        }
        let b = path.iter().fold(f64::INFINITY, |acc, &e| acc.min(x[e]));
        for &e in &path {
            x[e] -= b;
            kept[e] += b;
        }
    }

    // cycle cancelling on fractional edges, virtual edge index m (t→s)
    let mut value: f64 = 0.0;
    for &e in &out_arcs[s] {
        value += kept[e];
    }
    for e in 0..m {
        if ends(e).1 == s {
            value -= kept[e];
        }
    }
    let frac = |v: f64| (v - v.round()).abs() > eps;
    let mut incident = vec![Vec::new(); n];
    for e in 0..m {
        let (a, b) = ends(e);
        incident[a].push(e);
        incident[b].push(e);
    }
    incident[t].push(m);
    incident[s].push(m);
    let endpoints = |e: usize| if e == m { (t, s) } else { ends(e) };
    let get = |kept: &[f64], value: f64, e: usize| if e == m { value } else { kept[e] };
    let mut guard = 0;
    loop {
        guard += 1;
        if guard > 4 * (m + 2) {
            break;
        }
        let start = (0..=m).find(|&e| frac(get(&kept, value, e)));
        let Some(start) = start else { break };
        // walk until a vertex repeats
        let mut walk_edges: Vec<(usize, bool)> = Vec::new();
        let mut walk_vertices = vec![endpoints(start).0];
        let mut pos = vec![usize::MAX; n];
        pos[walk_vertices[0]] = 0;
        let mut cur_edge = start;
        let mut cur = endpoints(start).1;
        walk_edges.push((start, true));
        let cycle = loop {
            if pos[cur] != usize::MAX {
                break Some(pos[cur]);
            }
            pos[cur] = walk_vertices.len();
            walk_vertices.push(cur);
            let next = incident[cur]
                .iter()
                .copied()
                .find(|&e| e != cur_edge && frac(get(&kept, value, e)));
            let Some(e) = next else { break None };
            let (a, b) = endpoints(e);
            let forward = a == cur;
            walk_edges.push((e, forward));
            cur = if forward { b } else { a };
            cur_edge = e;
        };
        let Some(k) = cycle else {
            // conservation noise left an isolated fractional edge: snap it
            let e = cur_edge;
            if e == m {
                value = value.round();
            } else {
                kept[e] = kept[e].round();
            }
            continue;
        };
        let cyc = &walk_edges[k..];
        let room = |dir: f64| -> f64 {
            cyc.iter().fold(f64::INFINITY, |acc, &(e, fwd)| {
                let v = get(&kept, value, e);
                let up = if (fwd as i32 as f64 * 2.0 - 1.0) * dir > 0.0 { v.ceil() - v } else { v - v.floor() };
                acc.min(up)
            })
        };
        let virt = cyc.iter().find(|&&(e, _)| e == m).map(|&(_, fwd)| fwd);
        let dir = match virt {
            Some(true) => 1.0,
            Some(false) => -1.0,
            None => {
                if room(1.0) <= room(-1.0) {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        let theta = room(dir);
        for &(e, fwd) in cyc {
            let sgn = if fwd { dir } else { -dir };
            if e == m {
                value += sgn * theta;
            } else {
                kept[e] += sgn * theta;
            }
        }
    }

    let flow: Vec<i64> = (0..m).map(|e| orient[e] as i64 * kept[e].round() as i64).collect();
    match check_integral_flow(&edges, n, s, t, &flow) {
        Some(v) if v >= 0 => Ok((flow, false)),
        _ => Ok((vec![0; m], true)),
    }
}
