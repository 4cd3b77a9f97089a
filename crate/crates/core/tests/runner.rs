//! End-to-end properties of the optimization loop and its result files.

use hybo::bench;
use hybo::runner::{self, parse_csv, MaeOptions, Method, RunConfig, TIMING_COLUMNS};

fn config(benchmark: &str, method: Method, budget: usize, seed: u64) -> RunConfig {
    RunConfig {
        benchmark: benchmark.into(),
        method,
        budget,
        seed,
        ..RunConfig::default()
    }
}

#[test]
fn every_method_evaluates_exactly_init_plus_budget() {
    for method in Method::ALL {
        let log = runner::run(&config("pressure_vessel", method, 4, 3)).unwrap();
        assert_eq!(log.records.len(), 5 + 4, "{method}");
        let iters: Vec<usize> = log.records.iter().map(|r| r.iter).collect();
        assert_eq!(iters, (1..=9).collect::<Vec<_>>(), "{method}");
    }
}

#[test]
fn incumbent_column_is_running_minimum() {
    for method in Method::ALL {
        let log = runner::run(&config("speed_reducer", method, 3, 5)).unwrap();
        let mut best = f64::INFINITY;
        for r in &log.records {
            best = best.min(r.y);
            assert_eq!(r.best, best, "{method}");
        }
        assert_eq!(log.final_best(), Some(best));
        assert_eq!(log.argbest().unwrap().y, best);
    }
}

#[test]
fn timings_are_non_negative_and_within_iteration_wall_time() {
    for method in [Method::Hybo, Method::HyboNoMarg, Method::ContBo] {
        let log = runner::run(&config("pressure_vessel", method, 3, 2)).unwrap();
        for r in &log.records {
            let parts = [r.fit_s, r.sample_s, r.afo_s];
            assert!(parts.iter().chain([&r.wall_s]).all(|&t| t >= 0.0), "{method}");
            assert!(parts.iter().sum::<f64>() <= 1.1 * r.wall_s + 1e-6, "{method}: {r:?}");
        }
    }
}

#[test]
fn proposals_are_valid_raw_points() {
    let b = bench::lookup("welded_beam").unwrap();
    for method in [Method::ContBo, Method::VanillaBo, Method::Hybo] {
        let log = runner::run(&config("welded_beam", method, 3, 9)).unwrap();
        for r in &log.records {
            let x = b.from_raw(&r.point).unwrap();
            assert!(b.spec.contains(&x), "{method}: {:?}", r.point);
            assert_eq!(b.evaluate(&r.point).unwrap(), r.y, "{method}");
        }
    }
}

#[test]
fn repeated_runs_are_identical_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    for method in [Method::Hybo, Method::ContBo, Method::Random] {
        let cfg = config("mixint_sphere", method, 2, 21);
        let mut bodies = Vec::new();
        for k in 0..2 {
            let path = dir.path().join(format!("{method}_{k}.csv"));
            runner::run(&cfg).unwrap().emit(&path).unwrap();
            bodies.push(parse_csv(&path).unwrap().without_timings());
        }
        assert_eq!(bodies[0], bodies[1], "{method}");
    }
}

#[test]
fn emitted_file_has_documented_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested").join("run.csv");
    let log = runner::run(&config("pressure_vessel", Method::Random, 3, 0)).unwrap();
    log.emit(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# version: hybo "));
    assert!(text.contains("# config: method = \"random\""));
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("# summary: final_best="), "{last}");

    let parsed = parse_csv(&path).unwrap();
    let mut expected = vec!["iter", "y", "best"];
    expected.extend(TIMING_COLUMNS);
    expected.extend(["x1", "x2", "x3", "x4"]);
    assert_eq!(parsed.columns, expected);
    assert_eq!(parsed.floats("best").unwrap(), log.incumbent_curve());
}

#[test]
fn mae_table_has_one_row_per_seed_and_size() {
    let b = bench::lookup("pressure_vessel").unwrap();
    let rows = runner::surrogate_mae_experiment(&b, &[5, 8, 12], 10, &[1, 2], &MaeOptions::default()).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.mae.is_finite() && r.mae >= 0.0));
    let summary = runner::summarize_mae(&rows);
    assert_eq!(summary.iter().map(|s| s.train_size).collect::<Vec<_>>(), [5, 8, 12]);
}

#[test]
fn noiseless_surrogate_interpolates_its_training_set() {
    let b = bench::lookup("mixint_sphere").unwrap();
    let mut r = hybo::rng::seeded(4);
    let xs: Vec<_> = (0..20).map(|_| b.spec.sample_uniform(&mut r)).collect();
    let opts = MaeOptions {
        noiseless: true,
        ..MaeOptions::default()
    };
    let mae = runner::surrogate_mae(&b, &xs, &xs, &opts, 4).unwrap();
    assert!(mae < 1e-6, "{mae}");
}

#[test]
fn invalid_configurations_are_rejected() {
    assert!(runner::run(&config("no_such_benchmark", Method::Random, 1, 0)).is_err());
    let mut cfg = config("pressure_vessel", Method::Hybo, 1, 0);
    cfg.n_init = 0;
    assert!(runner::run(&cfg).is_err());
}
