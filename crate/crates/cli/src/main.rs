use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use ipmflow::dimacs::{parse_dimacs, write_dimacs};
use ipmflow::trace::write_trace;
use ipmflow::{solve_instance, FlowError, Mode, SolverConfig};
use ipmflow_suite::calibrate::calibrate;
use ipmflow_suite::criteria::{self, trace_violations, Verdict};
use ipmflow_suite::generate::{generate, Family};

const CONFIG_ENV: &str = "IPMFLOW_CONFIG";

#[derive(Parser)]
#[command(name = "ipmflow", version, about = "Interior point exact max-flow")]
struct Cli {
    /// TOML solver config; defaults to $IPMFLOW_CONFIG when set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a DIMACS max-flow instance.
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        p: Option<u32>,
        /// Laplacian solver tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        oracle_check: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write a random instance in DIMACS format.
    Generate {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        u: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a check suite and print one line per check.
    Verify {
        #[arg(long, value_parser = ["invariants", "acceptance"])]
        suite: String,
        #[arg(long)]
        per_family: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Rerun the sandwich-constant sweep and print the tables.
    Calibrate {
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn load_config(path: Option<&Path>) -> Result<SolverConfig> {
    let env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
    match path.map(Path::to_path_buf).or(env) {
        Some(p) => {
            let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(SolverConfig::default()),
    }
}

/// Process exit codes.
mod exit {
    pub const ERROR: u8 = 1;
    pub const INVARIANT: u8 = 2;
    pub const ORACLE: u8 = 3;
}

fn failure(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<FlowError>() {
        Some(FlowError::OracleMismatch { .. }) => exit::ORACLE,
        Some(FlowError::Parse { .. } | FlowError::Io(_) | FlowError::InvalidParameter(_)) => exit::ERROR,
        Some(_) => exit::INVARIANT,
        None => exit::ERROR,
    }
}

fn run_solve(mut cfg: SolverConfig, args: Command) -> Result<u8> {
    let Command::Solve { input, mode, eta, p, tol, trace, oracle_check, seed } = args else { unreachable!() };
    if let Some(mode) = mode {
        cfg.mode = mode;
    }
    cfg.eta = eta.or(cfg.eta);
    cfg.p = p.or(cfg.p);
    if let Some(tol) = tol {
        cfg.laplacian_tol = tol;
    }
    cfg.oracle_check |= oracle_check;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }

    let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
    let inst = parse_dimacs(BufReader::new(file))?;
    let (value, flow, report) = solve_instance(&inst, &cfg)?;

    if let Some(path) = trace {
        let mut out = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        if let Some(rep) = &report {
            write_trace(&mut out, &rep.header, &rep.trace)?;
        }
        out.flush()?;
    }

    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    writeln!(out, "s {value}")?;
    for (&(a, b, _, _), f) in inst.edges.iter().zip(&flow) {
        writeln!(out, "f {} {} {f}", a + 1, b + 1)?;
    }
    out.flush()?;

    if let Some(rep) = &report {
        let bad = trace_violations(&rep.header, &rep.trace);
        for v in &bad {
            eprintln!("invariant violated: {v}");
        }
        if rep.oracle_agrees == Some(false) {
            let oracle = rep.oracle_value.unwrap_or_default();
            eprintln!("{}", FlowError::OracleMismatch { solver: value, oracle });
            return Ok(exit::ORACLE);
        }
        if !bad.is_empty() {
            return Ok(exit::INVARIANT);
        }
    }
    Ok(0)
}

fn print_verdicts(verdicts: &[Verdict]) -> u8 {
    for v in verdicts {
        println!("{}", v.line());
    }
    if verdicts.iter().all(|v| v.pass) {
        0
    } else {
        exit::INVARIANT
    }
}

fn run(cli: Cli) -> Result<u8> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        args @ Command::Solve { .. } => run_solve(cfg, args),
        Command::Generate { family, n, m, u, seed, out } => {
            let inst = generate(family, n, m, u, seed)?;
            let mut w = BufWriter::new(File::create(&out).with_context(|| format!("creating {}", out.display()))?);
            write_dimacs(&inst, &mut w)?;
            w.flush()?;
            Ok(0)
        }
        Command::Verify { suite, per_family, seed } => Ok(match suite.as_str() {
            "invariants" => print_verdicts(&criteria::invariants(per_family.unwrap_or(5), seed, &cfg)),
            _ => print_verdicts(&criteria::acceptance(per_family.unwrap_or(50), seed, &cfg)),
        }),
        Command::Calibrate { samples, seed } => {
            print!("{}", calibrate(samples, seed));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(failure(&e))
        }
    }
}
