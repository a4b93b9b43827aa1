mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{fixture, TWO_BUS};
use riskdispatch::dispatch::DispatchSolution;
use riskdispatch::risk::RiskReport;

fn dispatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dispatch")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const IEEE30: [&str; 6] = ["--wind-buses", "1,2,5,9,15,24,30", "--conventional-scale", "0.8", "--penetration", "0.2"];

#[test]
fn solve_prints_json() {
    let case = fixture("case30.m");
    let mut args = vec!["solve", "--case", s(&case), "--scenario", "high-wind", "--alpha", "0.05"];
    args.extend(IEEE30);
    let out = dispatch(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sol = DispatchSolution::<f64>::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(sol.lmp.len(), 30);
    assert_eq!(sol.w.len(), 7);
}

#[test]
fn solve_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let case = fixture("ieee30_wind.toml");
    let (sol, model, table) = (dir.path().join("s.json"), dir.path().join("m.json"), dir.path().join("t.csv"));
    let out = dispatch(&[
        "solve", "--case", s(&case), "--scenario", "high-wind", "--alpha", "0.1", "--output", s(&sol),
        "--model-out", s(&model), "--csv", s(&table),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&table).unwrap();
    assert_eq!(csv.lines().count(), 1 + 30 + 41);

    let out = dispatch(&["validate", "--solution", s(&sol), "--model", s(&model), "--trials", "5000", "--alpha", "0.1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: RiskReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.n_trials, 5000);
    assert_eq!(report.per_farm_violation_rates.len(), 7);
}

#[test]
fn infeasible_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("tight.toml");
    std::fs::write(&case, TWO_BUS.replace("load_mw = 50.0", "load_mw = 150.0")).unwrap();
    let out = dispatch(&["solve", "--case", s(&case), "--scenario", "1.0", "--alpha", "0.05"]);
    // a case without farms is rejected before solving
    assert_eq!(out.status.code(), Some(3));

    let case30 = fixture("case30.m");
    let mut args = vec!["solve", "--case", s(&case30), "--scenario", "high-wind", "--alpha", "0.05", "--beta", "2.5"];
    args.extend(IEEE30);
    let out = dispatch(&args);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn input_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "base_mva = \"x\"\n").unwrap();
    let out = dispatch(&["solve", "--case", s(&bad), "--scenario", "high-wind", "--alpha", "0.05"]);
    assert_eq!(out.status.code(), Some(3));
    let out = dispatch(&["solve", "--case", "/nonexistent.m", "--scenario", "high-wind", "--alpha", "0.05"]);
    assert_eq!(out.status.code(), Some(3));
    let case = fixture("ieee30_wind.toml");
    let out = dispatch(&["solve", "--case", s(&case), "--scenario", "gale", "--alpha", "0.05"]);
    assert_eq!(out.status.code(), Some(3));
    let out = dispatch(&["solve", "--case", s(&case), "--scenario", "high-wind", "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(dispatch(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(dispatch(&["--help"]).status.code(), Some(0));
}

#[test]
fn gen_trace_writes_csv() {
    let out = dispatch(&["gen-trace", "--hours", "48", "--farms", "3", "--seed", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 49);
    assert!(text.starts_with("timestamp,farm_1,farm_2,farm_3"));
    let again = dispatch(&["gen-trace", "--hours", "48", "--farms", "3", "--seed", "2"]);
    assert_eq!(again.stdout, text.as_bytes());
}

#[test]
fn sweep_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    std::fs::write(
        &config,
        format!(
            "case_path = \"{}\"\nwind_buses = [1, 2, 5, 9, 15, 24, 30]\npenetration = 0.2\nscenario = \"high-wind\"\n\
             alpha_list = [0.05, 0.1]\nbeta_list = [1.0, 1.2]\nn_trials = 2000\nseed = 3\noutput_dir = \"out\"\n",
            s(&fixture("case30.m"))
        ),
    )
    .unwrap();
    let out = dispatch(&["sweep", "--config", s(&config), "--jobs", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["alpha_sweep.csv", "beta_sweep.csv", "lmp_profiles.csv", "schedules.csv"] {
        assert!(dir.path().join("out").join(name).exists(), "{name}");
    }
}
