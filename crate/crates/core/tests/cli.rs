use std::path::Path;
use std::process::{Command, Output};

fn raf(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_raf"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RAF_SEED")
        .output()
        .expect("binary runs")
}

fn csv_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for flag in ["--help", "--version"] {
        let out = raf(&[flag], dir.path());
        assert_eq!(out.status.code(), Some(0));
        assert!(!out.stdout.is_empty());
    }
    let out = raf(&["bench", "--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["bench", "no-such-experiment"][..],
        &["solve", "--model", "quaternion"],
        &["cdp", "--random-signal", "16", "--masks", "0"],
        &["cdp"],
        &["bench", "success-rate", "--ratios", "5:1:1"],
        &["solve", "--instance", "missing.json"],
        &["solve", "--n", "0"],
        &["cdp", "--image", "missing.png"],
    ] {
        let out = raf(args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"solver": {"learning_rate": 1}}"#,
    )
    .unwrap();
    let out = raf(&["solve", "--config", "c.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solve_reports_success_in_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = raf(&["solve", "--n", "40", "--seed", "5"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["success"], true);
    assert_eq!(v["m"], 200);

    let out = raf(
        &[
            "solve",
            "--model",
            "real-gaussian",
            "--n",
            "200",
            "--m",
            "1000",
            "--seed",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));

    let out = raf(
        &["solve", "--n", "40", "--m", "40", "--iters", "20"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn saved_instance_reloads_to_identical_result() {
    let dir = tempfile::tempdir().unwrap();
    let a = raf(
        &[
            "solve",
            "--model",
            "cdp",
            "--n",
            "32",
            "--masks",
            "4",
            "--seed",
            "9",
            "--save-instance",
            "i.json",
        ],
        dir.path(),
    );
    let b = raf(
        &["solve", "--instance", "i.json", "--seed", "9"],
        dir.path(),
    );
    assert_eq!(a.status.code(), b.status.code());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_raf"))
        .args(["solve", "--n", "20", "--iters", "5"])
        .env("RAF_SEED", "42")
        .current_dir(dir.path())
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["seed"], 42);
}

#[test]
fn bench_row_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = raf(
        &[
            "bench",
            "success-rate",
            "--n",
            "16",
            "--trials",
            "2",
            "--ratios",
            "1:5:0.5",
            "--iters",
            "50",
            "--out",
            "sr.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(csv_rows(&dir.path().join("sr.csv")), 9);
    assert!(dir.path().join("sr.json").exists());

    let out = raf(
        &[
            "bench", "nmse", "--n", "16", "--trials", "2", "--iters", "50", "--out", "nmse.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(csv_rows(&dir.path().join("nmse.csv")), 15);
}

#[test]
fn bench_output_is_byte_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, name: &str| {
        let out = raf(
            &[
                "--threads",
                threads,
                "bench",
                "success-rate",
                "--n",
                "20",
                "--trials",
                "4",
                "--ratios",
                "2,4",
                "--iters",
                "200",
                "--seed",
                "11",
                "--out",
                name,
            ],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0));
        (
            std::fs::read(dir.path().join(name)).unwrap(),
            std::fs::read(dir.path().join(name).with_extension("json")).unwrap(),
        )
    };
    assert_eq!(run("1", "a.csv"), run("3", "b.csv"));
}

#[test]
fn cdp_random_signal_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = raf(
        &[
            "cdp",
            "--random-signal",
            "32",
            "--masks",
            "4",
            "--iters",
            "300",
            "--report",
            "r.json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(v["rows"][0]["successes"], 1);
    assert!(!dir.path().join("recovered.png").exists());
}
