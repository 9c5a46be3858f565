//! Deterministic instance families.

use std::str::FromStr;

use ipmflow::{FlowError, FlowInstance, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Symmetric edges on a random connected graph.
    UnitRandom,
    /// `k` disjoint directed s-t paths.
    ParallelPaths,
    /// Symmetric grid, source and sink in opposite corners.
    Grid,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::UnitRandom, Family::ParallelPaths, Family::Grid];

    pub fn name(self) -> &'static str {
        match self {
            Family::UnitRandom => "unit-random",
            Family::ParallelPaths => "parallel-paths",
            Family::Grid => "grid",
        }
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "unit-random" => Ok(Family::UnitRandom),
            "parallel-paths" => Ok(Family::ParallelPaths),
            "grid" => Ok(Family::Grid),
            other => Err(format!("unknown family {other:?}")),
        }
    }
}

fn bad(msg: impl Into<String>) -> FlowError {
    FlowError::InvalidParameter(msg.into())
}

fn cap(rng: &mut ChaCha8Rng, u: u32) -> f64 {
    rng.gen_range(1..=u.max(1)) as f64
}

/// Generates an instance with `n` vertices. `m` is the edge count for
/// `unit-random` and `parallel-paths` (which then has `m - n + 2` paths);
/// grids use the most square `r × c = n` layout and ignore `m`. Capacities
/// are drawn from `1..=u`.
pub fn generate(family: Family, n: usize, m: usize, u: u32, seed: u64) -> Result<FlowInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match family {
        Family::UnitRandom => unit_random(&mut rng, n, m, u),
        Family::ParallelPaths => {
            if n < 2 || m + 2 < n + 1 {
                return Err(bad("parallel-paths needs n >= 2 and m >= n - 1"));
            }
            parallel_paths(&mut rng, m + 2 - n, n - 2, u)
        }
        Family::Grid => {
            let rows = (1..=((n as f64).sqrt() as usize)).rev().find(|r| n % r == 0).unwrap_or(1);
            grid(&mut rng, rows, n / rows, u)
        }
    }
}

fn unit_random(rng: &mut ChaCha8Rng, n: usize, m: usize, u: u32) -> Result<FlowInstance> {
    if n < 2 {
        return Err(bad("unit-random needs n >= 2"));
    }
    let max_edges = n * (n - 1) / 2;
    if m < n - 1 || m > max_edges {
        return Err(bad(format!("unit-random needs n - 1 <= m <= {max_edges}")));
    }
    let mut used = std::collections::BTreeSet::new();
    let mut edges = Vec::with_capacity(m);
    // random spanning tree first
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for i in 1..n {
        let a = order[i];
        let b = order[rng.gen_range(0..i)];
        used.insert((a.min(b), a.max(b)));
        let c = cap(rng, u);
        edges.push((a, b, c, c));
    }
    while edges.len() < m {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b || !used.insert((a.min(b), a.max(b))) {
            continue;
        }
        let c = cap(rng, u);
        edges.push((a, b, c, c));
    }
    Ok(FlowInstance { n, source: 0, sink: n - 1, edges })
}

/// `k` paths sharing `inner` internal vertices at random; vertex 0 is the
/// source and vertex 1 the sink.
pub fn parallel_paths(rng: &mut ChaCha8Rng, k: usize, inner: usize, u: u32) -> Result<FlowInstance> {
    if k == 0 {
        return Err(bad("parallel-paths needs at least one path"));
    }
    let mut lens = vec![0usize; k];
    for _ in 0..inner {
        lens[rng.gen_range(0..k)] += 1;
    }
    let mut edges = Vec::new();
    let mut next = 2;
    for &l in &lens {
        let mut prev = 0;
        for _ in 0..l {
            edges.push((prev, next, cap(rng, u), 0.0));
            prev = next;
            next += 1;
        }
        edges.push((prev, 1, cap(rng, u), 0.0));
    }
    Ok(FlowInstance { n: 2 + inner, source: 0, sink: 1, edges })
}

pub fn grid(rng: &mut ChaCha8Rng, rows: usize, cols: usize, u: u32) -> Result<FlowInstance> {
    if rows * cols < 2 {
        return Err(bad("grid needs at least two vertices"));
    }
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                let x = cap(rng, u);
                edges.push((id(r, c), id(r, c + 1), x, x));
            }
            if r + 1 < rows {
                let x = cap(rng, u);
                edges.push((id(r, c), id(r + 1, c), x, x));
            }
        }
    }
    Ok(FlowInstance { n: rows * cols, source: 0, sink: rows * cols - 1, edges })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        for f in Family::ALL {
            assert_eq!(generate(f, 9, 12, 1, 5).unwrap(), generate(f, 9, 12, 1, 5).unwrap());
        }
    }

    #[test]
    fn shapes() {
        let g = generate(Family::UnitRandom, 8, 12, 1, 1).unwrap();
        assert_eq!((g.n, g.edges.len()), (8, 12));
        let p = generate(Family::ParallelPaths, 10, 20, 1, 1).unwrap();
        assert_eq!((p.n, p.edges.len()), (10, 20));
        let q = generate(Family::Grid, 16, 0, 1, 1).unwrap();
        assert_eq!((q.n, q.edges.len()), (16, 24));
        assert!(generate(Family::UnitRandom, 4, 2, 1, 1).is_err());
    }
}
