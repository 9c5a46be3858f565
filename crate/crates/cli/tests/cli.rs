use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ipmflow"));
    c.env_remove("IPMFLOW_CONFIG");
    c
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ipmflow-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn generate(family: &str, seed: u64, out: &PathBuf) {
    let o = run(bin().args(["generate", "--family", family, "--n", "6", "--m", "9", "--seed", &seed.to_string(), "--out"]).arg(out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn generate_is_deterministic() {
    for family in ["unit-random", "parallel-paths", "grid"] {
        let (a, b) = (scratch(&format!("{family}-a.max")), scratch(&format!("{family}-b.max")));
        generate(family, 3, &a);
        generate(family, 3, &b);
        let text = std::fs::read(&a).unwrap();
        assert!(text.windows(5).any(|w| w == b"p max"));
        assert_eq!(text, std::fs::read(&b).unwrap());
    }
}

#[test]
fn solve_reports_value_and_writes_identical_traces() {
    let input = scratch("solve.max");
    generate("unit-random", 11, &input);
    for mode in ["warmup", "weighted"] {
        let traces: Vec<Vec<u8>> = (0..2)
            .map(|i| {
                let trace = scratch(&format!("trace-{mode}-{i}.jsonl"));
                let o = run(bin()
                    .args(["solve", "--mode", mode, "--oracle-check", "--seed", "5", "--input"])
                    .arg(&input)
                    .arg("--trace")
                    .arg(&trace));
                assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
                let stdout = String::from_utf8(o.stdout).unwrap();
                assert!(stdout.lines().next().unwrap().starts_with("s "));
                std::fs::read(&trace).unwrap()
            })
            .collect();
        assert!(!traces[0].is_empty());
        assert_eq!(traces[0], traces[1]);
    }
}

#[test]
fn config_file_is_honored() {
    let input = scratch("cfg.max");
    generate("grid", 2, &input);
    let good = scratch("good.toml");
    std::fs::write(&good, "mode = \"weighted\"\nlaplacian_tol = 1e-11\n").unwrap();
    let o = run(bin().env("IPMFLOW_CONFIG", &good).args(["solve", "--input"]).arg(&input));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let bad = scratch("bad.toml");
    std::fs::write(&bad, "no_such_key = 1\n").unwrap();
    let o = run(bin().env("IPMFLOW_CONFIG", &bad).args(["solve", "--input"]).arg(&input));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_input_fails() {
    let input = scratch("broken.max");
    std::fs::write(&input, "p max 2 1\nn 1 s\nn 2 t\na 1 2 x\n").unwrap();
    let o = run(bin().args(["solve", "--input"]).arg(&input));
    assert!(!o.status.success());
    let o = run(bin().args(["solve", "--input", "/nonexistent/file.max"]));
    assert!(!o.status.success());
}

#[test]
fn invariants_suite_passes() {
    let o = run(bin().args(["verify", "--suite", "invariants", "--per-family", "2"]));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.contains("PASS")).count(), 5);
}
