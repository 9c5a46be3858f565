//! The exactness suite: generated instances solved in both modes, with the
//! answers checked against two combinatorial oracles.

use std::time::Instant;

use ipmflow::combinatorial::FlowNetwork;
use ipmflow::driver::solve_instance;
use ipmflow::{FlowInstance, Mode, SolveReport, SolverConfig};
use ipmflow_oracles::edmonds_karp_two_sided;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::generate::{generate, grid, parallel_paths, Family};

/// A small instance of `family`, derived from `(seed, index)`.
pub fn suite_instance(family: Family, index: usize, seed: u64) -> FlowInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((index as u64) << 16) ^ family as u64);
    let sub = rng.gen();
    match family {
        Family::UnitRandom => {
            let n = rng.gen_range(5..=7);
            let m = rng.gen_range(n..=n + 3);
            generate(family, n, m, 1, sub).expect("valid unit-random parameters")
        }
        Family::ParallelPaths => {
            let k = rng.gen_range(2..=3);
            let inner = rng.gen_range(1..=3);
            parallel_paths(&mut ChaCha8Rng::seed_from_u64(sub), k, inner, 1).expect("valid path parameters")
        }
        Family::Grid => {
            let (r, c) = if rng.gen_bool(0.5) { (2, 3) } else { (3, 3) };
            grid(&mut ChaCha8Rng::seed_from_u64(sub), r, c, 1).expect("valid grid parameters")
        }
    }
}

fn integral(inst: &FlowInstance) -> Vec<(usize, usize, i64, i64)> {
    inst.edges.iter().map(|&(a, b, u, v)| (a, b, u as i64, v as i64)).collect()
}

/// Dinic value straight from the raw instance (any connectivity).
pub fn dinic_value(inst: &FlowInstance) -> i64 {
    FlowNetwork::new(inst.n, &integral(inst), inst.source, inst.sink).dinic()
}

pub fn edmonds_karp_value(inst: &FlowInstance) -> i64 {
    edmonds_karp_two_sided(inst.n, inst.source, inst.sink, &integral(inst))
}

/// Value of `flow` if it respects capacities and conserves flow at every
/// vertex other than the terminals.
pub fn check_flow(inst: &FlowInstance, flow: &[i64]) -> Option<i64> {
    if flow.len() != inst.edges.len() {
        return None;
    }
    let mut net = vec![0i64; inst.n];
    for (&(a, b, up, um), &x) in inst.edges.iter().zip(flow) {
        if (x as f64) > up || (x as f64) < -um {
            return None;
        }
        net[b] += x;
        net[a] -= x;
    }
    let inner_ok = (0..inst.n).all(|v| v == inst.source || v == inst.sink || net[v] == 0);
    (inner_ok && net[inst.source] == -net[inst.sink]).then_some(net[inst.sink])
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub family: Family,
    pub mode: Mode,
    pub index: usize,
    pub instance: FlowInstance,
    pub value: Option<i64>,
    pub flow: Vec<i64>,
    pub dinic: i64,
    pub edmonds_karp: i64,
    pub report: Option<SolveReport>,
    pub error: Option<String>,
    pub seconds: f64,
}

impl RunRecord {
    pub fn exact(&self) -> bool {
        self.error.is_none()
            && self.value == Some(self.dinic)
            && self.dinic == self.edmonds_karp
            && check_flow(&self.instance, &self.flow) == Some(self.dinic)
    }
}

pub fn run_one(family: Family, mode: Mode, index: usize, seed: u64, base: &SolverConfig) -> RunRecord {
    let instance = suite_instance(family, index, seed);
    let cfg = SolverConfig { mode, ..base.clone() };
    let start = Instant::now();
    let out = solve_instance(&instance, &cfg);
    let seconds = start.elapsed().as_secs_f64();
    let dinic = dinic_value(&instance);
    let edmonds_karp = edmonds_karp_value(&instance);
    let (value, flow, report, error) = match out {
        Ok((v, f, r)) => (Some(v), f, r, None),
        Err(e) => (None, Vec::new(), None, Some(e.to_string())),
    };
    RunRecord { family, mode, index, instance, value, flow, dinic, edmonds_karp, report, error, seconds }
}

/// `per_family` instances of every family, each solved in both modes.
pub fn run_suite(per_family: usize, seed: u64, base: &SolverConfig) -> Vec<RunRecord> {
    let mut out = Vec::new();
    for family in Family::ALL {
        for mode in [Mode::Warmup, Mode::Weighted] {
            for index in 0..per_family {
                out.push(run_one(family, mode, index, seed, base));
            }
        }
    }
    out
}
