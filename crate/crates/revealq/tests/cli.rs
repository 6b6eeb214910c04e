use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "environment": "tabletop",
  "users": 2,
  "rounds": 3,
  "particles": 50,
  "human_candidates": 50,
  "candidates": 20
}"#;

fn revealq(args: &[&str], data_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_revealq"));
    cmd.args(args).env_remove("REVEALQ_DATA_DIR");
    if let Some(d) = data_dir {
        cmd.env("REVEALQ_DATA_DIR", d);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_writes_three_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("run");
    let o = revealq(
        &[
            "simulate",
            "--config",
            &config,
            "--out",
            out.to_str().unwrap(),
            "--parallelism",
            "2",
        ],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let printed = String::from_utf8(o.stdout).unwrap();
    assert_eq!(printed.trim(), out.join("aggregate.csv").to_str().unwrap());
    for f in ["records.jsonl", "aggregate.csv", "manifest.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let records = std::fs::read_to_string(out.join("records.jsonl")).unwrap();
    // 4 default strategies x 2 users x 3 rounds.
    assert_eq!(records.lines().count(), 24);
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = revealq(
            &[
                "simulate",
                "--config",
                &config,
                "--out",
                out.to_str().unwrap(),
                "--parallelism",
                threads,
            ],
            None,
        );
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out.join("records.jsonl")).unwrap()
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "4"));
    assert_eq!(a, run("c", "1"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = revealq(
            &[
                "simulate",
                "--config",
                &config,
                "--out",
                out.to_str().unwrap(),
                "--seed",
                seed,
            ],
            None,
        );
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out.join("records.jsonl")).unwrap()
    };
    assert_ne!(run("a", "1"), run("b", "2"));
}

#[test]
fn missing_environment_fails_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "{\n  \"users\": 2,\n  \"rounds\": 3\n}\n");
    let o = revealq(
        &["simulate", "--config", &config, "--out", dir.path().to_str().unwrap()],
        None,
    );
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("environment"), "{err}");
    assert!(err.contains("config.json:4:"), "{err}");
}

#[test]
fn invalid_value_points_at_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "{\n  \"environment\": \"tabletop\",\n  \"users\": 0\n}\n");
    let o = revealq(&["simulate", "--config", &config], Some(dir.path()));
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("config.json:3:3") && err.contains("users"), "{err}");
}

#[test]
fn data_dir_env_sets_default_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let data = dir.path().join("data");
    let o = revealq(&["simulate", "--config", &config], Some(&data));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(data.join("aggregate.csv").is_file());
}

#[test]
fn sweep_writes_one_output_set_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("sweep");
    let args = [
        "sweep",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--parameter",
        "k",
        "--values",
        "1,3",
    ];
    let o = revealq(&args, None);
    assert!(o.status.success(), "{}", stderr(&o));
    for v in ["k=1", "k=3"] {
        for f in ["records.jsonl", "aggregate.csv", "manifest.json"] {
            assert!(out.join(v).join(f).is_file(), "missing {v}/{f}");
        }
    }
    let first = std::fs::read(out.join("k=1/records.jsonl")).unwrap();
    let o = revealq(&args, None);
    assert!(o.status.success());
    assert_eq!(first, std::fs::read(out.join("k=1/records.jsonl")).unwrap());
}

#[test]
fn sweep_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "{\"users\": 1}");
    let o = revealq(
        &["sweep", "--config", &bad, "--parameter", "lambda", "--values", "1"],
        Some(dir.path()),
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("environment"));

    let config = write_config(dir.path(), SMALL);
    let o = revealq(
        &["sweep", "--config", &config, "--parameter", "k", "--values", "0.5"],
        Some(dir.path()),
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("positive integer"), "{}", stderr(&o));
    let o = revealq(
        &["sweep", "--config", &config, "--parameter", "gamma", "--values", "1"],
        Some(dir.path()),
    );
    assert!(!o.status.success());
}

#[test]
fn serve_reports_bind_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = revealq(
        &[
            "serve",
            "--bind",
            "256.0.0.1:1",
            "--data-dir",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("cannot bind"), "{}", stderr(&o));
}
