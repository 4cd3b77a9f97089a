//! The command-line interface as a black box.

use std::process::{Command, Output};

fn hybo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybo")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn list_names_every_benchmark() {
    let o = hybo(&["list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in hybo::bench::REGISTRY {
        assert!(text.contains(name), "{name} missing from:\n{text}");
    }
}

#[test]
fn bench_eval_matches_library() {
    let o = hybo(&["bench", "eval", "pressure_vessel", "13", "7", "40.5", "200"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert_eq!(v, hybo::bench::pressure_vessel(13, 7, 40.5, 200.0).unwrap());
}

#[test]
fn errors_exit_non_zero_with_a_message() {
    for args in [
        &["bench", "eval", "pressure_vessel", "1", "2"][..],
        &["bench", "eval", "no_such_benchmark", "1"],
        &["run", "--benchmark", "no_such_benchmark", "--seed", "0"],
        &["run", "--method", "magic", "--seed", "0"],
        &["run", "--set", "budget", "--seed", "0"],
        &["run", "--set", "unknown_key=3", "--seed", "0"],
    ] {
        let o = hybo(args);
        assert!(!o.status.success(), "{args:?}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.starts_with("error:"), "{args:?}: {err}");
    }
}

#[test]
fn run_writes_csv_to_stdout() {
    let o = hybo(&["run", "--benchmark", "pressure_vessel", "--method", "random", "--budget", "2", "--seed", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "iter,y,best,fit_s,sample_s,afo_s,wall_s,x1,x2,x3,x4");
    assert_eq!(rows.len(), 1 + 5 + 2);
    assert!(text.contains("# config: seed = 1"));
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "benchmark = \"speed_reducer\"\nmethod = \"random\"\nbudget = 7\nn_init = 2\n").unwrap();
    let out = dir.path().join("out.csv");
    let o = hybo(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--budget",
        "3",
        "--set",
        "n_init=4",
        "--seed",
        "2",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let parsed = hybo::runner::parse_csv(&out).unwrap();
    assert_eq!(parsed.rows.len(), 4 + 3);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("# config: benchmark = \"speed_reducer\""));
}

#[test]
fn sweep_writes_one_file_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = hybo(&[
        "sweep",
        "--benchmark",
        "pressure_vessel",
        "--method",
        "random",
        "--budget",
        "2",
        "--seeds",
        "3..5",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    for seed in [3, 4] {
        let path = dir.path().join(format!("random_pressure_vessel_seed{seed}.csv"));
        assert_eq!(hybo::runner::parse_csv(&path).unwrap().rows.len(), 7);
    }
}

#[test]
fn mae_reports_rows_and_summaries() {
    let o = hybo(&[
        "mae",
        "--benchmark",
        "pressure_vessel",
        "--train-sizes",
        "5,10",
        "--test-size",
        "20",
        "--seeds",
        "0,1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("seed,train_size,mae"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 4);
    assert_eq!(text.lines().filter(|l| l.starts_with("# summary")).count(), 2);
}
