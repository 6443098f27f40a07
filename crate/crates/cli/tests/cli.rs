//! End-to-end checks of the installed binary: workflow wiring, file
//! contracts, determinism of outputs, and exit-code categories.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fairpoison"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

fn run_ok(args: &[&str], dir: &Path) -> Output {
    let output = binary().args(args).current_dir(dir).output().expect("binary runs");
    assert!(
        output.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn read(path: PathBuf) -> Vec<u8> {
    std::fs::read(&path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn generate_twice_with_same_flags_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["generate", "--n", "120", "--separation", "6", "--seed", "11"];
    run_ok(&[&args[..], &["--out-dir", "a"]].concat(), dir.path());
    run_ok(&[&args[..], &["--out-dir", "b"]].concat(), dir.path());
    assert_eq!(read(dir.path().join("a/data.csv")), read(dir.path().join("b/data.csv")));
    assert_eq!(read(dir.path().join("a/config.toml")), read(dir.path().join("b/config.toml")));
}

#[test]
fn attack_budget_fraction_yields_exact_row_count() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &["generate", "--n", "1000", "--separation", "7", "--seed", "2", "--out-dir", "gen"],
        dir.path(),
    );
    run_ok(
        &[
            "attack",
            "--train-data",
            "gen/data.csv",
            "--validation-data",
            "gen/data.csv",
            "--budget-fraction",
            "0.05",
            "--seed",
            "2",
            "--out-dir",
            "atk",
        ],
        dir.path(),
    );
    let points = String::from_utf8(read(dir.path().join("atk/poison_points.csv"))).unwrap();
    let rows = points.lines().count() - 1;
    assert_eq!(rows, 50, "5% of 1000 training samples");
    let header = points.lines().next().unwrap();
    assert_eq!(header, "x1,x2,label,group");
}

#[test]
fn attack_on_single_dataset_writes_splits_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &["generate", "--n", "300", "--separation", "6", "--seed", "4", "--out-dir", "gen"],
        dir.path(),
    );
    run_ok(
        &[
            "attack",
            "--data",
            "gen/data.csv",
            "--budget-count",
            "3",
            "--seed",
            "4",
            "--out-dir",
            "atk",
        ],
        dir.path(),
    );
    for name in [
        "train.csv",
        "validation.csv",
        "test.csv",
        "poison_points.csv",
        "attack_trace.csv",
        "clean_model.json",
        "poisoned_model.json",
        "clean_metrics.json",
        "poisoned_metrics.json",
        "config.toml",
    ] {
        assert!(dir.path().join("atk").join(name).exists(), "missing {name}");
    }
    let train = String::from_utf8(read(dir.path().join("atk/train.csv"))).unwrap();
    let validation = String::from_utf8(read(dir.path().join("atk/validation.csv"))).unwrap();
    let test = String::from_utf8(read(dir.path().join("atk/test.csv"))).unwrap();
    assert_eq!(
        (train.lines().count() - 1) + (validation.lines().count() - 1)
            + (test.lines().count() - 1),
        300,
        "splits partition the dataset"
    );
}

#[test]
fn train_then_evaluate_round_trips_the_model() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &["generate", "--n", "200", "--separation", "6", "--seed", "9", "--out-dir", "gen"],
        dir.path(),
    );
    run_ok(
        &["train", "--data", "gen/data.csv", "--seed", "9", "--out-dir", "tr"],
        dir.path(),
    );
    let output = run_ok(
        &[
            "evaluate",
            "--data",
            "gen/data.csv",
            "--model",
            "tr/model.json",
            "--out-dir",
            "ev",
        ],
        dir.path(),
    );
    let stdout: serde_json::Value = serde_json::from_slice(&output.stdout).expect("metrics JSON");
    let file: serde_json::Value =
        serde_json::from_slice(&read(dir.path().join("ev/metrics.json"))).unwrap();
    assert_eq!(stdout, file, "stdout and metrics.json agree");
    let train_metrics: serde_json::Value =
        serde_json::from_slice(&read(dir.path().join("tr/metrics.json"))).unwrap();
    assert_eq!(stdout["accuracy"], train_metrics["accuracy"]);
}

#[test]
fn experiment_rerun_is_byte_identical_and_has_expected_rows() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.toml"),
        "n_samples = 160\nseparations = [2.0, 6.0]\nruns = 2\nattack_max_iterations = 5\n",
    )
    .unwrap();
    let args = [
        "experiment",
        "--sweep",
        "separation",
        "--config",
        "exp.toml",
        "--seed",
        "21",
        "--jobs",
        "2",
    ];
    run_ok(&[&args[..], &["--out-dir", "a"]].concat(), dir.path());
    run_ok(&[&args[..], &["--out-dir", "b"]].concat(), dir.path());
    assert_eq!(read(dir.path().join("a/report.csv")), read(dir.path().join("b/report.csv")));
    assert_eq!(read(dir.path().join("a/report.json")), read(dir.path().join("b/report.json")));

    let report = String::from_utf8(read(dir.path().join("a/report.csv"))).unwrap();
    let rows: Vec<&str> = report.lines().skip(1).collect();
    // 2 separations x 2 runs x (white-box + black-box) rows.
    assert_eq!(rows.len(), 8);
    for row in rows {
        assert!(row.starts_with("1,separation_sweep,"), "schema and protocol prefix: {row}");
    }
}

#[test]
fn experiment_fraction_sweep_on_a_fixed_dataset() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &["generate", "--n", "400", "--separation", "6", "--seed", "13", "--out-dir", "gen"],
        dir.path(),
    );
    std::fs::write(
        dir.path().join("exp.toml"),
        "fractions = [0.0, 0.1]\nruns = 2\nattack_max_iterations = 5\n",
    )
    .unwrap();
    run_ok(
        &[
            "experiment",
            "--sweep",
            "fraction",
            "--data",
            "gen/data.csv",
            "--config",
            "exp.toml",
            "--include-generic",
            "--seed",
            "13",
            "--out-dir",
            "exp",
        ],
        dir.path(),
    );
    let report = String::from_utf8(read(dir.path().join("exp/report.csv"))).unwrap();
    // 2 fractions x 2 runs x (white fairness + black fairness + white generic).
    assert_eq!(report.lines().count() - 1, 12);
    assert!(report.contains("gen/data.csv"));
    assert!(report.contains(",generic,"));
}

#[test]
fn unknown_config_keys_and_violations_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "typo_key = 1\nstep_size = -2.0\n").unwrap();
    let output = binary()
        .args(["attack", "--config", "bad.toml", "--out-dir", "out"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("typo_key"), "names the unknown key: {stderr}");
    assert!(stderr.contains("step_size"), "names the violated field: {stderr}");
    assert!(!dir.path().join("out").exists(), "no outputs on config failure");
}

#[test]
fn missing_input_file_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let output = binary()
        .args(["train", "--data", "missing.csv", "--out-dir", "out"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn commands_do_not_mutate_their_inputs() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &["generate", "--n", "200", "--separation", "6", "--seed", "8", "--out-dir", "gen"],
        dir.path(),
    );
    let before = read(dir.path().join("gen/data.csv"));
    run_ok(
        &[
            "attack",
            "--data",
            "gen/data.csv",
            "--budget-count",
            "2",
            "--seed",
            "8",
            "--out-dir",
            "atk",
        ],
        dir.path(),
    );
    assert_eq!(before, read(dir.path().join("gen/data.csv")));
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &["generate", "--n", "150", "--separation", "4", "--seed", "17", "--out-dir", "a"],
        dir.path(),
    );
    // The echo is a complete config; rerunning from it alone must match.
    run_ok(
        &["generate", "--config", "a/config.toml", "--out-dir", "b"],
        dir.path(),
    );
    assert_eq!(read(dir.path().join("a/data.csv")), read(dir.path().join("b/data.csv")));
}
