use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use hybo::bench::{self, RawPoint};
use hybo::hyper::MapConfig;
use hybo::runner::{self, parse_assignment, CsvWriter, MaeOptions, RunConfig};

#[derive(Parser)]
#[command(name = "hybo", version, about = "Bayesian optimization over hybrid spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration with one seed.
    Run {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        seed: u64,
        /// Output CSV (overrides `output` in the config; stdout if neither).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run one configuration for several seeds, one CSV per seed.
    Sweep {
        #[command(flatten)]
        common: ConfigArgs,
        /// Seeds as a list (`0,1,5`) or half-open range (`0..10`).
        #[arg(long)]
        seeds: String,
        /// Directory for `<method>_<benchmark>_seed<k>.csv` files.
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
    },
    /// Surrogate error against training-set size.
    Mae {
        #[arg(long, default_value = "mixint_sphere")]
        benchmark: String,
        #[arg(long, default_value = "10,25,50,100")]
        train_sizes: String,
        #[arg(long, default_value_t = 200)]
        test_size: usize,
        #[arg(long, default_value = "0..10")]
        seeds: String,
        #[arg(long, default_value = "full")]
        max_order: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Benchmark utilities.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
    /// List registered benchmarks.
    List,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Evaluate a benchmark at raw values (discrete first, then continuous).
    Eval {
        name: String,
        #[arg(allow_negative_numbers = true)]
        values: Vec<f64>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    benchmark: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    n_init: Option<usize>,
    #[arg(long)]
    max_order: Option<String>,
    /// Any configuration key, as `key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self, extra: &[(String, String)]) -> anyhow::Result<RunConfig> {
        let mut overrides = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                overrides.push((k.to_string(), v));
            }
        };
        push("benchmark", self.benchmark.as_ref().map(|v| format!("{v:?}")));
        push("method", self.method.as_ref().map(|v| format!("{v:?}")));
        push("budget", self.budget.map(|v| v.to_string()));
        push("n_init", self.n_init.map(|v| v.to_string()));
        push("max_order", self.max_order.clone());
        for s in &self.set {
            overrides.push(parse_assignment(s)?);
        }
        overrides.extend_from_slice(extra);
        let text = match &self.config {
            Some(path) => std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?,
            None => String::new(),
        };
        Ok(RunConfig::from_toml_with_overrides(&text, &overrides)?)
    }
}

fn parse_seeds(s: &str) -> anyhow::Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().context("range start")?;
        let b: u64 = b.trim().parse().context("range end")?;
        if a >= b {
            bail!("empty seed range `{s}`");
        }
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|v| v.trim().parse::<u64>().with_context(|| format!("invalid seed `{v}`")))
        .collect()
}

fn parse_sizes(s: &str) -> anyhow::Result<Vec<usize>> {
    s.split(',')
        .map(|v| v.trim().parse::<usize>().with_context(|| format!("invalid size `{v}`")))
        .collect()
}

fn run_to(cfg: &RunConfig, path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(path) => {
            let bench = bench::lookup(&cfg.benchmark)?;
            let names: Vec<String> = bench.spec.variable_names().iter().map(|s| s.to_string()).collect();
            let mut writer = CsvWriter::create(path, cfg, &names)?;
            let log = runner::run_with(cfg, &mut |r| writer.append(r))?;
            writer.finish(&log)?;
        }
        None => {
            let log = runner::run(cfg)?;
            std::io::stdout().write_all(log.to_csv_string().as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            common,
            seed,
            output,
        } => {
            let cfg = common.load(&[("seed".into(), seed.to_string())])?;
            let path = output.or_else(|| cfg.output.as_ref().map(PathBuf::from));
            run_to(&cfg, path.as_deref())
        }
        Command::Sweep {
            common,
            seeds,
            out_dir,
        } => {
            let cfg = common.load(&[])?;
            let seeds = parse_seeds(&seeds)?;
            std::fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            let stem = format!("{}_{}", cfg.method, cfg.benchmark);
            let mut failed = 0;
            for (seed, result) in seeds.iter().zip(runner::sweep(&cfg, &seeds)) {
                let path = out_dir.join(format!("{stem}_seed{seed}.csv"));
                match result {
                    Ok(log) => {
                        log.emit(&path)?;
                        println!(
                            "seed {seed}: final best {} -> {}",
                            log.final_best().unwrap_or(f64::NAN),
                            path.display()
                        );
                    }
                    Err(e) => {
                        eprintln!("seed {seed}: {e}");
                        failed += 1;
                    }
                }
            }
            if failed > 0 {
                bail!("{failed} of {} runs failed", seeds.len());
            }
            Ok(())
        }
        Command::Mae {
            benchmark,
            train_sizes,
            test_size,
            seeds,
            max_order,
            output,
        } => {
            let bench = bench::lookup(&benchmark)?;
            let order_cfg = RunConfig::from_toml_with_overrides("", &[("max_order".into(), max_order)])?;
            let opts = MaeOptions {
                max_order: order_cfg.max_order,
                map: MapConfig::default(),
                noiseless: false,
            };
            let rows = runner::surrogate_mae_experiment(
                &bench,
                &parse_sizes(&train_sizes)?,
                test_size,
                &parse_seeds(&seeds)?,
                &opts,
            )?;
            let mut text = String::from("seed,train_size,mae\n");
            for r in &rows {
                text.push_str(&format!("{},{},{}\n", r.seed, r.train_size, r.mae));
            }
            for s in runner::summarize_mae(&rows) {
                text.push_str(&format!(
                    "# summary: train_size={} mean={} two_se={} median={}\n",
                    s.train_size, s.mean, s.two_se, s.median
                ));
            }
            match output {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Bench {
            command: BenchCommand::Eval { name, values },
        } => {
            let b = bench::lookup(&name)?;
            let (m, n) = (b.spec.m(), b.spec.n());
            if values.len() != m + n {
                bail!("{name} takes {} values ({m} discrete, then {n} continuous), got {}", m + n, values.len());
            }
            let mut discrete = Vec::with_capacity(m);
            for &v in &values[..m] {
                if v.fract() != 0.0 {
                    bail!("discrete value {v} is not an integer");
                }
                discrete.push(v as i64);
            }
            let raw = RawPoint {
                discrete,
                continuous: values[m..].to_vec(),
            };
            println!("{}", b.evaluate(&raw)?);
            Ok(())
        }
        Command::List => {
            for name in bench::REGISTRY {
                println!("{}", bench::lookup(name)?);
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("4, 7").unwrap(), vec![4, 7]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("a").is_err());
    }
}
