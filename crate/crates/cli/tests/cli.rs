//! End-to-end checks of the binary: exit codes, determinism, output
//! formats, and the JSON round-trip guarantee.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use damq_cli::report::{
    AsymptoticReport, Envelope, ExactReport, OptimizeReport, Report, SimulateReport, SweepReport,
    ValidateReport, SCHEMA_VERSION,
};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn damq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_damq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(args: &[&str]) -> String {
    let out = damq(args);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn exact_prints_unit_normalization() {
    let text = stdout_of(&["exact", "--config", config("mm1.toml").to_str().unwrap()]);
    assert!(text.contains("p1+p2+sum q"));
    assert!(text.contains("1.000000000"), "normalization echo missing:\n{text}");
}

#[test]
fn simulate_seed_7_is_deterministic() {
    let cfg = config("mm1.toml");
    let args = [
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--events",
        "100000",
        "--seed",
        "7",
    ];
    let first = damq(&args);
    let second = damq(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout, "same seed must give identical bytes");
}

#[test]
fn json_round_trips_into_record_types() {
    let cfg = config("mm1.toml");
    let cfg = cfg.to_str().unwrap();
    let parse = |args: &[&str]| -> serde_json::Value {
        serde_json::from_str(&stdout_of(args)).expect("valid JSON")
    };

    let exact = stdout_of(&["exact", "--config", cfg, "--format", "json"]);
    let env: Envelope<ExactReport> = serde_json::from_str(&exact).unwrap();
    assert_eq!(env.schema_version, SCHEMA_VERSION);
    assert_eq!(env.command, "exact");
    // losslessness: re-rendering the parsed record reproduces the document
    assert_eq!(env.result.render(damq_cli::report::Format::Json), exact);

    let doc = parse(&["asymptotic", "--config", cfg, "--format", "json"]);
    let env: Envelope<AsymptoticReport> = serde_json::from_value(doc).unwrap();
    assert_eq!(env.command, "asymptotic");

    let doc = parse(&[
        "simulate", "--config", cfg, "--events", "50000", "--seed", "3", "--format", "json",
    ]);
    let env: Envelope<SimulateReport> = serde_json::from_value(doc).unwrap();
    assert_eq!(env.result.seed, 3);

    let doc = parse(&["optimize", "--config", cfg, "--format", "json"]);
    let env: Envelope<OptimizeReport> = serde_json::from_value(doc).unwrap();
    assert!(env.result.solution.objective.is_finite());

    let doc = parse(&[
        "sweep", "--config", cfg, "--param", "damage.j2", "--from", "1.1", "--to", "1.2",
        "--step", "0.05", "--format", "json",
    ]);
    let env: Envelope<SweepReport> = serde_json::from_value(doc).unwrap();
    assert_eq!(env.result.rows.len(), 3);

    let doc = parse(&["validate", "--config", cfg, "--format", "json"]);
    let env: Envelope<ValidateReport> = serde_json::from_value(doc).unwrap();
    assert!(env.result.pass);
}

#[test]
fn config_errors_exit_1_with_diagnostic() {
    // missing file
    let out = damq(&["exact", "--config", "/nonexistent/x.toml"]);
    assert_eq!(out.status.code(), Some(1));

    // syntax error, diagnostic carries a line reference
    let bad = std::env::temp_dir().join("damq_bad_syntax.toml");
    std::fs::write(&bad, "[arrivals]\nrate = = 1.0\n").unwrap();
    let out = damq(&["exact", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "missing line diagnostic: {err}");

    // override creating rho2 >= 1 is rejected by the model check, not a crash
    let out = damq(&[
        "exact",
        "--config",
        config("mm1.toml").to_str().unwrap(),
        "--set",
        "service.b2.rate=0.1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("rho2"), "missing model diagnostic: {err}");
}

#[test]
fn numerical_failures_exit_2_naming_module() {
    // a bracket that does not straddle zero is a search failure
    let out = damq(&[
        "optimize",
        "--config",
        config("table1.toml").to_str().unwrap(),
        "--set",
        "control.c_min=1.0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("objective-control"), "module not named: {err}");
}

#[test]
fn sweep_rows_ordered_by_grid_index() {
    let csv = stdout_of(&[
        "sweep",
        "--config",
        config("table1.toml").to_str().unwrap(),
        "--param",
        "damage.j2",
        "--from",
        "1.06",
        "--to",
        "1.14",
        "--step",
        "0.02",
        "--format",
        "csv",
    ]);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "index,damage.j2,c_opt,delta,objective");
    let indices: Vec<usize> =
        lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(indices, vec![0, 1, 2, 3, 4]);
}

#[test]
fn sweep_reproduces_published_column() {
    let json = stdout_of(&[
        "sweep",
        "--config",
        config("table1.toml").to_str().unwrap(),
        "--param",
        "damage.j2",
        "--from",
        "1.06",
        "--to",
        "1.34",
        "--step",
        "0.02",
        "--format",
        "json",
    ]);
    let env: Envelope<SweepReport> = serde_json::from_str(&json).unwrap();
    let expected = [
        0.200, 0.180, 0.162, 0.144, 0.128, 0.112, 0.096, 0.081, 0.067, 0.054, 0.042, 0.030,
        0.019, 0.009, 0.0,
    ];
    assert_eq!(env.result.rows.len(), expected.len());
    for (row, want) in env.result.rows.iter().zip(expected) {
        assert!(
            (row.c_opt - want).abs() <= 0.01,
            "j2 = {}: c_opt {} vs {want}",
            row.value,
            row.c_opt
        );
    }
}

#[test]
fn plot_file_holds_xy_pairs() {
    let plot = std::env::temp_dir().join("damq_sweep_plot.dat");
    stdout_of(&[
        "sweep",
        "--config",
        config("table1.toml").to_str().unwrap(),
        "--param",
        "damage.j2",
        "--from",
        "1.1",
        "--to",
        "1.2",
        "--step",
        "0.05",
        "--plot",
        plot.to_str().unwrap(),
    ]);
    let data = std::fs::read_to_string(&plot).unwrap();
    let rows: Vec<&str> = data.lines().collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let parts: Vec<&str> = row.split(' ').collect();
        assert_eq!(parts.len(), 2);
        parts[0].parse::<f64>().unwrap();
        parts[1].parse::<f64>().unwrap();
    }
}
