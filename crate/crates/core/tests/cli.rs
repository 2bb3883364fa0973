//! End-to-end checks of the `dea` binary: artifact layout, byte-level
//! reproducibility, exit codes, and the report round trip.

use std::path::Path;
use std::process::{Command, Output};

fn dea(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dea"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    let base = r#"
env = "pendulum"
regime = "desk-interactive"
total_steps = 260
warmup_steps = 60
batch_size = 16
layer_size = 6
eval_interval = 100
eval_episodes = 2
"#;
    std::fs::write(&path, format!("{base}{extra}")).unwrap();
    path
}

#[test]
fn train_twice_produces_identical_artifact_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "method = \"dea\"\n");
    let out1 = tmp.path().join("r1");
    let out2 = tmp.path().join("r2");
    for out in [&out1, &out2] {
        let res = dea(
            &["train", "--config", cfg.to_str().unwrap(), "--seed", "1", "--out-dir", out.to_str().unwrap()],
            &[],
        );
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    for file in ["metrics.csv", "kappa.csv"] {
        let a = std::fs::read(out1.join(file)).unwrap();
        let b = std::fs::read(out2.join(file)).unwrap();
        assert_eq!(a, b, "{file} not reproducible");
    }
    // run.json echoes the resolved config.
    let text = std::fs::read_to_string(out1.join("run.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["env"], "pendulum");
    assert_eq!(json["method"], "dea");
    assert_eq!(json["seed"], 1);
    assert_eq!(json["total_steps"], 260);
}

#[test]
fn regime_preset_is_echoed_into_run_json() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = tmp.path().join("run");
    let res = dea(
        &[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--regime",
            "desk-interactive",
            "--method",
            "sac",
            "--out-dir",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(json["regime"], "desk-interactive");
    assert_eq!(json["ensemble_size"], 2);
    assert_eq!(json["utd"], 1);
    // No kappa trajectory for non-directional methods.
    assert!(!out.join("kappa.csv").exists());
    assert!(out.join("metrics.csv").exists());
}

#[test]
fn unknown_method_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let res = dea(&["train", "--config", cfg.to_str().unwrap(), "--method", "td3"], &[]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("td3"), "stderr: {err}");
}

#[test]
fn config_errors_exit_2_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    // Unknown key.
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "mystery = 1\n").unwrap();
    let res = dea(&["train", "--config", bad.to_str().unwrap()], &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("mystery"));
    // Type error carries a line number.
    std::fs::write(&bad, "gamma = \"high\"\n").unwrap();
    let res = dea(&["train", "--config", bad.to_str().unwrap()], &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line"));
    // Missing file.
    let res = dea(&["train", "--config", "/nonexistent/x.toml"], &[]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn non_finite_abort_uses_distinct_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    // An absurd temperature makes the first critic target overflow.
    let cfg = write_config(tmp.path(), "method = \"sac\"\nalpha_init = 1e300\nlr = 1e4\n");
    let out = tmp.path().join("run");
    let res = dea(
        &["train", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(res.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("non-finite"), "stderr: {err}");
    assert!(err.contains("step"), "stderr: {err}");
}

#[test]
fn sweep_writes_subdirs_summary_and_dedups() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "method = \"sac\"\n");
    let out = tmp.path().join("sweep");
    let res = dea(
        &[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--seeds",
            "1,2,2,3",
            "--jobs",
            "2",
            "--out-dir",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stderr).contains("duplicate seed 2"));
    for seed in [1, 2, 3] {
        assert!(out.join(format!("seed_{seed}")).join("metrics.csv").exists());
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next().unwrap(), "env,method,seed,status,final_return,aulc");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.starts_with("pendulum,sac,") && r.contains(",ok,")));
}

#[test]
fn sweep_records_failed_seed_and_finishes_others() {
    let tmp = tempfile::tempdir().unwrap();
    // Blows up for every seed; sweep should still produce a summary where
    // each row is marked failed, and exit nonzero because nothing passed.
    let cfg = write_config(tmp.path(), "method = \"sac\"\nalpha_init = 1e300\nlr = 1e4\n");
    let out = tmp.path().join("sweep");
    let res = dea(
        &[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--seeds",
            "1..2",
            "--out-dir",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(res.status.code(), Some(1));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().filter(|l| l.contains(",failed,")).count(), 2);
}

#[test]
fn report_round_trip_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let sweeps = [("sac", tmp.path().join("s_sac")), ("dea", tmp.path().join("s_dea"))];
    for (method, dir) in &sweeps {
        let res = dea(
            &[
                "sweep",
                "--config",
                cfg.to_str().unwrap(),
                "--method",
                method,
                "--seeds",
                "1..2",
                "--out-dir",
                dir.to_str().unwrap(),
            ],
            &[],
        );
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let out1 = tmp.path().join("rep1");
    let out2 = tmp.path().join("rep2");
    for out in [&out1, &out2] {
        let res = dea(
            &[
                "report",
                "--in",
                sweeps[0].1.to_str().unwrap(),
                sweeps[1].1.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ],
            &[],
        );
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let report1 = std::fs::read(out1.join("report.csv")).unwrap();
    let report2 = std::fs::read(out2.join("report.csv")).unwrap();
    assert_eq!(report1, report2);
    let text = String::from_utf8(report1).unwrap();
    assert!(text.starts_with("env,method,final_return,iqm,aulc,rank_final,rank_iqm,rank_aulc\n"));
    assert!(text.contains("pendulum,dea,"));
    assert!(text.contains("average,sac,"));
    assert!(out1.join("learning_curve_pendulum.svg").exists());
    assert!(out1.join("kappa_pendulum.svg").exists());
}

#[test]
fn report_on_empty_dir_fails_without_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("empty");
    std::fs::create_dir_all(&input).unwrap();
    let out = tmp.path().join("rep");
    let res = dea(
        &["report", "--in", input.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(res.status.code(), Some(1));
    assert!(!out.join("report.csv").exists());
}

#[test]
fn out_dir_env_var_is_the_default_root() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "method = \"sac\"\n");
    let root = tmp.path().join("artifacts_root");
    let res = dea(
        &["train", "--config", cfg.to_str().unwrap(), "--seed", "4"],
        &[("DEA_OUT_DIR", root.to_str().unwrap())],
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let expected = root.join("pendulum_sac_desk-interactive_seed4");
    assert!(expected.join("metrics.csv").exists(), "missing {}", expected.display());
}
