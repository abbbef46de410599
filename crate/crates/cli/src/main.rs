//! `rahbo`: run, validate and compare risk-averse BO experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rahbo_core::benchmarks::{benchmark_by_name, BENCHMARK_NAMES};
use rahbo_core::config::validate_config;
use rahbo_core::harness::{compare, run_experiment, CompareMetric};
use rahbo_core::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "rahbo", version, about = "Risk-averse heteroscedastic Bayesian optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write traces, aggregate and metadata.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds overriding the config's list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Output directory overriding the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for seed-level parallelism.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Compare finished runs side by side.
    Compare {
        /// Run directories; the first is the reference for differences.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// cumulative_regret or simple_regret.
        #[arg(long, default_value = "cumulative_regret")]
        metric: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and print its normalized form.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the built-in benchmarks.
    ListBenchmarks,
}

fn config_error(e: Error) -> ExitCode {
    match e {
        Error::Config(msgs) => {
            for m in msgs {
                eprintln!("config error: {m}");
            }
        }
        other => eprintln!("config error: {other}"),
    }
    ExitCode::from(EXIT_CONFIG)
}

fn run_error(e: Error) -> ExitCode {
    match e {
        Error::Numerical(msg) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Error::Config(_) => config_error(e),
        other => {
            eprintln!("error: {other}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seeds,
            out,
            threads,
        } => {
            let mut cfg = match validate_config(&config) {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            if let Some(s) = seeds {
                cfg.seeds = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o.to_string_lossy().into_owned();
            }
            if let Err(e) = cfg.validate() {
                return config_error(e);
            }
            match run_experiment(&cfg, threads) {
                Ok(res) => {
                    let last = res.summary.final_row();
                    println!(
                        "{} on {}: {} seeds, T = {}, cumulative regret {:.4} +/- {:.4}",
                        cfg.algorithm,
                        cfg.benchmark,
                        res.results.len(),
                        cfg.rounds,
                        last.r_cum.mean,
                        2.0 * last.r_cum.se
                    );
                    println!("wrote {}", res.dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => run_error(e),
            }
        }
        Command::Compare { runs, metric, out } => {
            let metric = match CompareMetric::parse(&metric) {
                Ok(m) => m,
                Err(e) => return run_error(e),
            };
            match compare(&runs, metric, out.as_deref()) {
                Ok(c) => {
                    print!("{}", c.table);
                    ExitCode::SUCCESS
                }
                Err(e) => run_error(e),
            }
        }
        Command::Validate { config } => match validate_config(&config) {
            Ok(c) => match serde_json::to_string_pretty(&c) {
                Ok(s) => {
                    println!("{s}");
                    ExitCode::SUCCESS
                }
                Err(e) => run_error(e.into()),
            },
            Err(e) => config_error(e),
        },
        Command::ListBenchmarks => {
            for name in BENCHMARK_NAMES {
                let b = benchmark_by_name(name).expect("listed benchmark exists");
                let bounds: Vec<String> = b
                    .domain
                    .bounds
                    .iter()
                    .map(|(lo, hi)| format!("[{lo}, {hi}]"))
                    .collect();
                println!(
                    "{name}\tdim={}\tdomain={}\tvariance in [{}, {}]",
                    b.dim(),
                    bounds.join(" x "),
                    b.var_lo,
                    b.var_hi
                );
            }
            ExitCode::SUCCESS
        }
    }
}
