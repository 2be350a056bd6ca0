use std::path::Path;
use std::process::Command;

use stopbound::{two_point_drift, BoundaryValue, Verdict};
use stopbound_cli::config::{CheckName, Format};
use stopbound_cli::run::build_problem;
use stopbound_cli::*;

const MARTINGALE: &str = r#"
name = "martingale"
checks = ["g_monotone", "mu_time_monotone_everywhere", "value_time_monotone", "boundary_monotone", "residual_complementarity"]

[problem]
drift = "0"
sigma = "1"
reward = "x"
horizon = 1.0

[grid]
nt = 100
nx = 100
x_pad = 5.0
theta = 0.5

[simulation]
seed = 42
n_paths = 500
n_steps = 50
"#;

fn small(mut cfg: RunConfig) -> RunConfig {
    cfg.grid.nt = 80;
    cfg.grid.nx = 80;
    cfg.simulation.n_paths = 500;
    cfg.simulation.n_steps = 40;
    if let Some(l) = cfg.simulation.lsmc.as_mut() {
        l.n_paths = 2_000;
        l.n_steps = 40;
    }
    cfg
}

#[test]
fn martingale_run_passes_and_stops_everywhere() {
    let cfg = RunConfig::from_toml(MARTINGALE).unwrap();
    let a = run_problem(&cfg).unwrap();
    assert!(a.all_passed(), "{:#?}", a.checks);
    assert_eq!(a.checks.len(), 5);
    assert!(a.checks.iter().all(|c| c.verdict == Verdict::Pass));
    assert!(a
        .boundary
        .values
        .iter()
        .all(|b| *b == BoundaryValue::PosInf));
}

#[test]
fn time_drift_example_passes_theorem_checks() {
    let a = run_problem(&small(find_example("bm_time_drift").unwrap())).unwrap();
    for name in [
        "g_monotone",
        "mu_time_monotone_everywhere",
        "value_time_monotone",
        "boundary_monotone",
    ] {
        let c = a.checks.iter().find(|c| c.check == name).unwrap();
        assert_eq!(c.verdict, Verdict::Pass, "{c:?}");
    }
}

#[test]
fn filtering_example_is_wired_to_two_point_drift() {
    let spec = build_problem(&find_example("two_point_filtering").unwrap()).unwrap();
    let expect = two_point_drift(0.5, -1.0, 2.0, 0.0, 0.0).unwrap();
    assert_eq!(spec.drift().eval(0.0, 0.0).unwrap(), expect);
}

#[test]
fn saved_examples_load_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in builtin_examples() {
        let path = dir.path().join(format!("{}.toml", cfg.name));
        save_config(&cfg, &path).unwrap();
        assert_eq!(load_config(&path).unwrap(), cfg);
    }
}

#[test]
fn every_example_runs_end_to_end_at_small_scale() {
    for cfg in builtin_examples() {
        let a = run_problem(&small(cfg.clone())).unwrap_or_else(|e| panic!("{}: {e}", cfg.name));
        assert!(a.checks.len() >= cfg.checks.len(), "{}", cfg.name);
        assert!(a.run_id.starts_with(&cfg.name));
    }
}

#[test]
fn exported_files_follow_formats() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::from_toml(MARTINGALE).unwrap();
    cfg.output.formats.push(Format::PathsCsv);
    let a = run_problem(&cfg).unwrap();
    let paths = export_artifacts(&a, dir.path()).unwrap();
    assert_eq!(paths.len(), 6);
    let surface = std::fs::read_to_string(dir.path().join("surface.csv")).unwrap();
    assert_eq!(surface.lines().count(), 1 + 101 * 101);
    // Full printed precision reproduces the solved values.
    let row: Vec<&str> = surface.lines().nth(1 + 50).unwrap().split(',').collect();
    assert_eq!(row[2].parse::<f64>().unwrap(), a.surface.v()[0][50]);
    let boundary = std::fs::read_to_string(dir.path().join("boundary.csv")).unwrap();
    assert!(boundary.lines().skip(1).all(|l| l.ends_with(",+inf")));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    for key in ["run_id", "config_digest", "checks", "timings"] {
        assert!(report.get(key).is_some(), "{key}");
    }
    let first = &report["checks"][0];
    for key in ["check", "verdict", "worst", "witness", "tol", "notes"] {
        assert!(first.get(key).is_some(), "{key}");
    }
    assert_eq!(first["verdict"], "PASS");
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("5 checks, 0 failed"));
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stopbound"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn binary_exit_status_contract() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.toml", MARTINGALE);
    let out = dir.path().join("run");
    let st = bin()
        .arg("solve")
        .arg(&good)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(
        st.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&st.stderr)
    );
    assert!(out.join("report.json").exists());

    // Increasing drift violates the time-monotonicity hypothesis.
    let failing = write(
        dir.path(),
        "fail.toml",
        &MARTINGALE.replace("drift = \"0\"", "drift = \"t\""),
    );
    let st = bin()
        .arg("solve")
        .arg(&failing)
        .arg("--out")
        .arg(dir.path().join("f"))
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&st.stdout).contains("FAIL"));

    let bad = write(
        dir.path(),
        "bad.toml",
        &MARTINGALE.replace("drift = \"0\"", "driftt = \"0\""),
    );
    let st = bin().arg("solve").arg(&bad).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    let err = String::from_utf8_lossy(&st.stderr);
    assert!(
        err.contains("config stage") && err.contains("driftt"),
        "{err}"
    );

    let pole = write(
        dir.path(),
        "pole.toml",
        &MARTINGALE.replace("reward = \"x\"", "reward = \"log(x)\""),
    );
    let st = bin().arg("solve").arg(&pole).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stderr).contains("validate stage"));
}

#[test]
fn binary_lists_examples_and_checks_hypotheses() {
    let st = bin().args(["examples", "list"]).output().unwrap();
    let names: Vec<String> = String::from_utf8(st.stdout)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    assert_eq!(names.len(), builtin_examples().len());
    assert!(names.contains(&"brownian_bridge_exp".to_string()));

    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", MARTINGALE);
    let st = bin().arg("check").arg(&cfg).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    let reports: serde_json::Value = serde_json::from_slice(&st.stdout).unwrap();
    let names: Vec<&str> = reports
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["check"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["g_monotone", "mu_time_monotone_everywhere"]);

    let st = bin()
        .args(["examples", "run", "no_such_example"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));
}

#[test]
fn refine_and_seed_flags_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        &MARTINGALE.replace("nt = 100\nnx = 100", "nt = 20\nnx = 20"),
    );
    let out = dir.path().join("r");
    let st = bin()
        .arg("solve")
        .arg(&cfg)
        .args(["--refine", "1", "--seed", "7", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0));
    let surface = std::fs::read_to_string(out.join("surface.csv")).unwrap();
    assert_eq!(surface.lines().count(), 1 + 41 * 41);
    let sim: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("simulation.json")).unwrap())
            .unwrap();
    assert_eq!(sim["seed"], 7);
}

#[test]
fn hypothesis_only_mode_reports_h_checks() {
    let mut cfg = RunConfig::from_toml(MARTINGALE).unwrap();
    cfg.problem.drift = Some("1-t".into());
    cfg.checks = vec![CheckName::HMonotone, CheckName::ValueTimeMonotone];
    let r = check_hypotheses(&cfg).unwrap();
    let names: Vec<&str> = r.iter().map(|c| c.check.as_str()).collect();
    assert_eq!(names, ["h_monotone", "h_monotone_x", "h_monotone_t"]);
    assert!(r.iter().all(|c| c.passed()));
}
