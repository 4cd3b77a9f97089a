//! Experiment orchestration: the BO loop, baselines, the surrogate-accuracy
//! experiment, and result logging.
//!
//! Objectives are minimized at this boundary and maximized internally: the
//! loop hands `−f` to the models and acquisition.

mod config;
mod log;

pub use config::{parse_assignment, MaxOrder, Method, RunConfig};
pub use log::{parse_csv, CsvWriter, IterRecord, ParsedCsv, RunLog, CODE_VERSION, TIMING_COLUMNS};

use std::time::Instant;

use crate::acq::AcquisitionContext;
use crate::afo::optimize_acquisition;
use crate::bench::{self, Benchmark};
use crate::gp::GPModel;
use crate::hyper::{fit_map, posterior_samples, HyperPriorSpec, HyperProblem, MapConfig};
use crate::kernel::{KernelHypers, KernelKind};
use crate::rng::{self, Stream};
use crate::space::{HybridPoint, SpaceSpec};
use crate::{Error, Result};

/// Evaluations made so far, in raw units, with the incumbent tracked.
struct Trace<'a> {
    bench: &'a Benchmark,
    records: Vec<IterRecord>,
    best: f64,
    on_record: &'a mut dyn FnMut(&IterRecord) -> Result<()>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Timings {
    fit_s: f64,
    sample_s: f64,
    afo_s: f64,
}

impl<'a> Trace<'a> {
    fn new(bench: &'a Benchmark, on_record: &'a mut dyn FnMut(&IterRecord) -> Result<()>) -> Self {
        Self {
            bench,
            records: Vec::new(),
            best: f64::INFINITY,
            on_record,
        }
    }

    /// Evaluates `x` (normalized coordinates of the benchmark space) and
    /// returns the objective value.
    fn evaluate(&mut self, x: &HybridPoint, t: Timings, started: Instant) -> Result<f64> {
        let point = self.bench.to_raw(x)?;
        let y = self.bench.evaluate(&point)?;
        self.best = self.best.min(y);
        let record = IterRecord {
            iter: self.records.len() + 1,
            point,
            y,
            best: self.best,
            fit_s: t.fit_s,
            sample_s: t.sample_s,
            afo_s: t.afo_s,
            wall_s: started.elapsed().as_secs_f64(),
        };
        (self.on_record)(&record)?;
        self.records.push(record);
        Ok(y)
    }
}

fn variable_names(spec: &SpaceSpec) -> Vec<String> {
    spec.variable_names().into_iter().map(str::to_string).collect()
}

/// Runs `cfg` to completion.
pub fn run(cfg: &RunConfig) -> Result<RunLog> {
    run_with(cfg, &mut |_| Ok(()))
}

/// Runs `cfg`, handing every evaluation to `on_record` as soon as it exists.
pub fn run_with(cfg: &RunConfig, on_record: &mut dyn FnMut(&IterRecord) -> Result<()>) -> Result<RunLog> {
    cfg.validate()?;
    let bench = bench::lookup(&cfg.benchmark)?;
    match cfg.method {
        Method::Hybo | Method::HyboNoMarg => run_bo(cfg, &bench, on_record),
        Method::Random | Method::ContBo | Method::VanillaBo => run_baseline(cfg, &bench, on_record),
    }
}

/// Uniform initial design, shared by every method for a given seed.
fn initial_design(spec: &SpaceSpec, n: usize, seed: u64) -> Vec<HybridPoint> {
    let mut r = rng::stream(seed, Stream::InitialDesign);
    (0..n).map(|_| spec.sample_uniform(&mut r)).collect()
}

/// How a model-based method represents the problem.
struct Surrogate {
    kind: KernelKind,
    /// Space the model and optimizer work in.
    space: SpaceSpec,
    max_order: usize,
    marginalize: bool,
    /// Discrete variables are relaxed to continuous ones.
    relaxed: bool,
}

impl Surrogate {
    fn for_method(cfg: &RunConfig, bench: &Benchmark) -> Result<Self> {
        let spec = &bench.spec;
        Ok(match cfg.method {
            Method::Hybo | Method::HyboNoMarg => Surrogate {
                kind: KernelKind::Additive,
                space: spec.clone(),
                max_order: cfg.max_order.resolve(spec.dims())?,
                marginalize: cfg.method == Method::Hybo,
                relaxed: false,
            },
            Method::VanillaBo => Surrogate {
                kind: KernelKind::Product,
                space: spec.clone(),
                max_order: 1,
                marginalize: false,
                relaxed: false,
            },
            Method::ContBo => Surrogate {
                kind: KernelKind::Product,
                space: spec.relaxed(),
                max_order: 1,
                marginalize: false,
                relaxed: true,
            },
            Method::Random => unreachable!("random search has no surrogate"),
        })
    }

    fn to_model_space(&self, bench: &Benchmark, x: &HybridPoint) -> HybridPoint {
        if self.relaxed {
            bench.spec.relax_point(x)
        } else {
            x.clone()
        }
    }

    fn to_benchmark_space(&self, bench: &Benchmark, x: &HybridPoint) -> HybridPoint {
        if self.relaxed {
            bench.spec.round_relaxed(x)
        } else {
            x.clone()
        }
    }
}

/// The BO loop for model-based methods: infer hyper-parameters, fit one
/// model per hyper-parameter draw, maximize the averaged expected
/// improvement, evaluate, repeat.
fn model_based_loop(
    cfg: &RunConfig,
    bench: &Benchmark,
    surrogate: &Surrogate,
    trace: &mut Trace<'_>,
) -> Result<()> {
    let mut xs: Vec<HybridPoint> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for x in initial_design(&bench.spec, cfg.n_init, cfg.seed) {
        let t = Instant::now();
        let f = trace.evaluate(&x, Timings::default(), t)?;
        xs.push(surrogate.to_model_space(bench, &x));
        ys.push(-f);
    }

    let mut hyper_rng = rng::stream(cfg.seed, Stream::Hypers);
    let mut acq_rng = rng::stream(cfg.seed, Stream::Acquisition);
    let priors = HyperPriorSpec::default();
    let afo = cfg.afo();
    let map_cfg = cfg.map();
    let mut warm: Option<KernelHypers> = None;

    for _ in 0..cfg.budget {
        let iter_start = Instant::now();
        let mut t = Timings::default();

        let clock = Instant::now();
        let problem = HyperProblem::new(
            surrogate.kind,
            &surrogate.space,
            surrogate.max_order,
            &xs,
            &ys,
            priors,
        )?;
        let hypers: Vec<KernelHypers> = if surrogate.marginalize {
            let draws = posterior_samples(
                &problem,
                cfg.hyper_samples,
                cfg.hyper_burn_in,
                warm.as_ref(),
                &mut hyper_rng,
            )?;
            draws.into_iter().map(|d| d.hypers).collect()
        } else {
            vec![fit_map(&problem, warm.as_ref(), map_cfg, &mut hyper_rng)?.hypers]
        };
        warm = hypers.last().cloned();
        t.sample_s = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let mut models = Vec::with_capacity(hypers.len());
        let mut last_err = None;
        for h in &hypers {
            match GPModel::fit(surrogate.kind, &surrogate.space, &xs, &ys, h) {
                Ok(m) => models.push(m),
                Err(e) => last_err = Some(e),
            }
        }
        if models.is_empty() {
            return Err(last_err.unwrap_or(Error::NotPositiveDefinite {
                jitter: crate::gp::MAX_JITTER,
            }));
        }
        t.fit_s = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let (best_idx, best_y) = ys
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let ctx = AcquisitionContext::new(models, best_y)?;
        let (proposal, _) = optimize_acquisition(&ctx, &surrogate.space, &afo, &mut acq_rng, &xs[best_idx])?;
        t.afo_s = clock.elapsed().as_secs_f64();

        let x = surrogate.to_benchmark_space(bench, &proposal);
        let f = trace.evaluate(&x, t, iter_start)?;
        xs.push(surrogate.to_model_space(bench, &x));
        ys.push(-f);
    }
    Ok(())
}

fn finish(cfg: &RunConfig, bench: &Benchmark, trace: Trace<'_>, started: Instant) -> RunLog {
    RunLog {
        config: cfg.clone(),
        version: CODE_VERSION.to_string(),
        variables: variable_names(&bench.spec),
        records: trace.records,
        total_wall_s: started.elapsed().as_secs_f64(),
    }
}

/// The HyBO loop (`hybo`, or `hybo_no_marg` with a MAP estimate in place of
/// posterior draws).
pub fn run_bo(
    cfg: &RunConfig,
    bench: &Benchmark,
    on_record: &mut dyn FnMut(&IterRecord) -> Result<()>,
) -> Result<RunLog> {
    if !matches!(cfg.method, Method::Hybo | Method::HyboNoMarg) {
        return Err(Error::Config(format!("run_bo does not handle method {}", cfg.method)));
    }
    let started = Instant::now();
    let surrogate = Surrogate::for_method(cfg, bench)?;
    let mut trace = Trace::new(bench, on_record);
    model_based_loop(cfg, bench, &surrogate, &mut trace)?;
    Ok(finish(cfg, bench, trace, started))
}

/// Baselines: uniform random search, continuous relaxation, and a product
/// kernel with the alternating optimizer.
pub fn run_baseline(
    cfg: &RunConfig,
    bench: &Benchmark,
    on_record: &mut dyn FnMut(&IterRecord) -> Result<()>,
) -> Result<RunLog> {
    let started = Instant::now();
    let mut trace = Trace::new(bench, on_record);
    match cfg.method {
        Method::Random => {
            for x in initial_design(&bench.spec, cfg.n_init, cfg.seed) {
                trace.evaluate(&x, Timings::default(), Instant::now())?;
            }
            let mut r = rng::stream(cfg.seed, Stream::Acquisition);
            for _ in 0..cfg.budget {
                let clock = Instant::now();
                let x = bench.spec.sample_uniform(&mut r);
                trace.evaluate(&x, Timings::default(), clock)?;
            }
        }
        Method::ContBo | Method::VanillaBo => {
            let surrogate = Surrogate::for_method(cfg, bench)?;
            model_based_loop(cfg, bench, &surrogate, &mut trace)?;
        }
        Method::Hybo | Method::HyboNoMarg => {
            return Err(Error::Config(format!("{} is not a baseline", cfg.method)));
        }
    }
    Ok(finish(cfg, bench, trace, started))
}

/// Runs `cfg` once per seed. Seeds are spread over the available cores;
/// every run is independent, so results do not depend on the scheduling.
pub fn sweep(cfg: &RunConfig, seeds: &[u64]) -> Vec<Result<RunLog>> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(seeds.len().max(1));
    let mut results: Vec<Option<Result<RunLog>>> = (0..seeds.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots = std::sync::Mutex::new(&mut results);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let mut c = cfg.clone();
                c.seed = seeds[i];
                let out = run(&c);
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(out);
            });
        }
    });
    results
        .into_iter()
        .map(|r| r.expect("every seed was run"))
        .collect()
}

/// Settings of the surrogate-accuracy experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaeOptions {
    pub max_order: MaxOrder,
    pub map: MapConfig,
    /// Refit with zero noise variance after estimating the other
    /// hyper-parameters.
    pub noiseless: bool,
}

impl Default for MaeOptions {
    fn default() -> Self {
        Self {
            max_order: MaxOrder::Full,
            map: MapConfig::default(),
            noiseless: false,
        }
    }
}

/// Surrogate error for one seed and training-set size.
#[derive(Debug, Clone, PartialEq)]
pub struct MaeRow {
    pub seed: u64,
    pub train_size: usize,
    pub mae: f64,
}

/// Aggregate over seeds for one training-set size.
#[derive(Debug, Clone, PartialEq)]
pub struct MaeSummary {
    pub train_size: usize,
    pub mean: f64,
    /// Twice the standard error of the mean.
    pub two_se: f64,
    pub median: f64,
}

/// Mean absolute error of the posterior mean of a MAP-fitted additive model
/// trained on `train` and tested on `test` (normalized points).
pub fn surrogate_mae(
    bench: &Benchmark,
    train: &[HybridPoint],
    test: &[HybridPoint],
    opts: &MaeOptions,
    seed: u64,
) -> Result<f64> {
    let spec = &bench.spec;
    let y_train: Vec<f64> = train
        .iter()
        .map(|x| bench.evaluate_normalized(x))
        .collect::<Result<_>>()?;
    let problem = HyperProblem::new(
        KernelKind::Additive,
        spec,
        opts.max_order.resolve(spec.dims())?,
        train,
        &y_train,
        HyperPriorSpec::default(),
    )?;
    let mut r = rng::stream(seed, Stream::Hypers);
    let mut h = fit_map(&problem, None, opts.map, &mut r)?.hypers;
    if opts.noiseless {
        h.noise_var = 0.0;
    }
    let model = GPModel::fit(KernelKind::Additive, spec, train, &y_train, &h)?;
    let mut total = 0.0;
    for x in test {
        let (mean, _) = model.predict(x);
        total += (mean - bench.evaluate_normalized(x)?).abs();
    }
    Ok(total / test.len().max(1) as f64)
}

/// For every seed and training size: uniform training data (nested across
/// sizes within a seed), a uniform test set of `test_size` points, and the
/// resulting surrogate MAE. Rows are ordered by seed, then size.
pub fn surrogate_mae_experiment(
    bench: &Benchmark,
    train_sizes: &[usize],
    test_size: usize,
    seeds: &[u64],
    opts: &MaeOptions,
) -> Result<Vec<MaeRow>> {
    let largest = train_sizes.iter().copied().max().unwrap_or(0);
    let mut rows = Vec::with_capacity(train_sizes.len() * seeds.len());
    for &seed in seeds {
        let pool = initial_design(&bench.spec, largest, seed);
        let mut test_rng = rng::stream(seed, Stream::Evaluation);
        let test: Vec<_> = (0..test_size)
            .map(|_| bench.spec.sample_uniform(&mut test_rng))
            .collect();
        for &n in train_sizes {
            if n == 0 {
                return Err(Error::Config("training sizes must be positive".into()));
            }
            let mae = surrogate_mae(bench, &pool[..n], &test, opts, rng::derive_seed(seed, n as u64))?;
            rows.push(MaeRow {
                seed,
                train_size: n,
                mae,
            });
        }
    }
    Ok(rows)
}

/// Per-size mean, twice the standard error, and median, in order of first
/// appearance.
pub fn summarize_mae(rows: &[MaeRow]) -> Vec<MaeSummary> {
    let mut sizes: Vec<usize> = Vec::new();
    for r in rows {
        if !sizes.contains(&r.train_size) {
            sizes.push(r.train_size);
        }
    }
    sizes
        .into_iter()
        .map(|n| {
            let mut v: Vec<f64> = rows.iter().filter(|r| r.train_size == n).map(|r| r.mae).collect();
            let k = v.len() as f64;
            let mean = v.iter().sum::<f64>() / k;
            let var = if v.len() > 1 {
                v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            MaeSummary {
                train_size: n,
                mean,
                two_se: 2.0 * (var / k).sqrt(),
                median: median(&mut v),
            }
        })
        .collect()
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(method: Method) -> RunConfig {
        RunConfig {
            benchmark: "pressure_vessel".into(),
            method,
            budget: 1,
            n_init: 1,
            seed: 3,
            hyper_samples: 2,
            hyper_burn_in: 2,
            map_starts: 2,
            cma_budget: 100,
            ls_restarts: 2,
            ..RunConfig::default()
        }
    }

    #[test]
    fn budget_one_gives_two_evaluations() {
        for m in Method::ALL {
            let log = run(&tiny(m)).unwrap();
            assert_eq!(log.records.len(), 2, "{m}");
        }
    }

    #[test]
    fn initial_design_is_shared_across_methods() {
        let a = run(&tiny(Method::Random)).unwrap();
        let b = run(&tiny(Method::ContBo)).unwrap();
        assert_eq!(a.records[0].point, b.records[0].point);
    }

    #[test]
    fn median_and_summary() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        let rows = vec![
            MaeRow { seed: 0, train_size: 5, mae: 1.0 },
            MaeRow { seed: 1, train_size: 5, mae: 3.0 },
        ];
        let s = summarize_mae(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].mean, 2.0);
        assert!((s[0].two_se - 2.0).abs() < 1e-12);
    }
}
