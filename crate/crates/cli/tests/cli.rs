//! End-to-end checks of the `greenline` binary: subcommands, exit codes,
//! output-directory precedence.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_greenline"))
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

const GOOD: &str = r#"{
    "mode": "forward",
    "task": {"kind": "sine"},
    "operator": {"kind": "alpha", "h": 1, "alpha": [0.999, 1.0], "theta": 1.0, "mu": 0},
    "lambda": -3.0,
    "tau": 0.1,
    "tau_prime": 1.0,
    "epochs": 2
}"#;

// gross positive feedback: the state passes 1e12 within a few epochs
const DIVERGENT: &str = r#"{
    "mode": "forward",
    "task": {"kind": "sine"},
    "operator": {"kind": "alpha", "h": 1, "alpha": [0.999, 1.0], "theta": 1.0, "mu": 0},
    "lambda": 1e-9,
    "tau": 0.1,
    "epochs": 30
}"#;

#[test]
fn validate_reports_ok_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    write(&good, GOOD);
    let out = bin().args(["validate"]).arg(&good).output().unwrap();
    assert!(out.status.success(), "{out:?}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("config ok"));

    let bad = dir.path().join("bad.json");
    write(&bad, &GOOD.replace("-3.0", "0.0"));
    let out = bin().args(["validate"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda"));
}

#[test]
fn run_exits_zero_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    write(&cfg, GOOD);
    let out_dir = dir.path().join("artifacts");
    let out = bin().args(["run"]).arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(out_dir.join("mse.csv").exists());
}

#[test]
fn divergence_exits_two_with_flagged_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("div.json");
    write(&cfg, DIVERGENT);
    let out_dir = dir.path().join("artifacts");
    let out = bin().args(["run"]).arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let diag = fs::read_to_string(out_dir.join("diagnostics.csv")).unwrap();
    assert!(diag.contains("diverged,true"), "{diag}");
}

#[test]
fn missing_config_exits_one() {
    let out = bin().args(["run", "/nonexistent/nope.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn env_var_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    write(&cfg, GOOD);
    let out_dir = dir.path().join("from_env");
    let out = bin()
        .args(["run"])
        .arg(&cfg)
        .env("GREENLINE_OUT", &out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(out_dir.join("mse.csv").exists());

    // --out wins over the environment
    let flag_dir = dir.path().join("from_flag");
    let out = bin()
        .args(["run"])
        .arg(&cfg)
        .arg("--out")
        .arg(&flag_dir)
        .env("GREENLINE_OUT", dir.path().join("ignored"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(flag_dir.join("mse.csv").exists());
    assert!(!dir.path().join("ignored").join("mse.csv").exists());
}

#[test]
fn seed_override_changes_shuffled_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("shuffled.json");
    write(
        &cfg,
        &GOOD.replace(
            "\"epochs\": 2",
            "\"epochs\": 2, \"shuffle\": {\"kind\": \"once\", \"seed\": 1}",
        ),
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let out_c = dir.path().join("c");
    for (target, seed) in [(&out_a, None), (&out_b, Some("1")), (&out_c, Some("2"))] {
        let mut cmd = bin();
        cmd.args(["run"]).arg(&cfg).arg("--out").arg(target);
        if let Some(s) = seed {
            cmd.args(["--seed", s]);
        }
        assert_eq!(cmd.output().unwrap().status.code(), Some(0));
    }
    let a = fs::read(out_a.join("trace.csv")).unwrap();
    let b = fs::read(out_b.join("trace.csv")).unwrap();
    let c = fs::read(out_c.join("trace.csv")).unwrap();
    assert_eq!(a, b, "explicit seed equal to the config seed must not change bytes");
    assert_ne!(a, c, "a different seed must change the shuffled order");
}
