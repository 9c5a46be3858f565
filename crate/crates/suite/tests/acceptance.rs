use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use ipmflow::SolverConfig;
use ipmflow_suite::criteria::{self, Verdict};
use ipmflow_suite::suite::{run_suite, RunRecord};

const PER_FAMILY: usize = 50;
const SUITE_SEED: u64 = 2024;

fn suite() -> &'static (Vec<RunRecord>, f64) {
    static RUNS: OnceLock<(Vec<RunRecord>, f64)> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let runs = run_suite(PER_FAMILY, SUITE_SEED, &SolverConfig::default());
        (runs, start.elapsed().as_secs_f64())
    })
}

fn report(v: Verdict) {
    // written past the test harness's output capture so passing lines show too
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", v.line()).unwrap();
    out.flush().unwrap();
    assert!(v.pass, "{}", v.line());
}

#[test]
fn c01_exactness() {
    let (runs, secs) = suite();
    report(criteria::exactness(runs, *secs));
}

#[test]
fn c02_congestion() {
    report(criteria::congestion(&suite().0));
}

#[test]
fn c03_coupling() {
    report(criteria::coupling(&suite().0));
}

#[test]
fn c04_weight_budget() {
    report(criteria::weight_budget(&suite().0));
}

#[test]
fn c05_preconditioner_slack() {
    report(criteria::preconditioner_slack(&suite().0));
}

#[test]
fn c06_electrical_flow() {
    report(criteria::electrical_equivalence(606));
}

#[test]
fn c07_calculus() {
    report(criteria::calculus(707));
}

#[test]
fn c08_sandwich() {
    report(criteria::sandwich(808));
}

#[test]
fn c09_composite() {
    report(criteria::composite_equivalence(909));
}

#[test]
fn c10_iteration_accounting() {
    let weighted = criteria::weighted_counts(6..=12, 2000, 1010);
    report(criteria::iteration_accounting(&suite().0, &weighted));
}
