//! Benchmark CLI: two-sample tests on CSV data, synthetic power and Type-I
//! experiments, and the fast-vs-oracle equivalence check.

mod config;
mod experiments;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};
use specmmd::reference::equivalence_suite;
use specmmd::seed::substream_rng;

use config::{Experiment, ExperimentConfig, Method};
use experiments::{run_experiment, run_test};
use report::{emit_results, print_results};

#[derive(Parser)]
#[command(
    name = "specmmd",
    about = "Spectral-regularized kernel two-sample tests and MMD baselines",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test whether two CSV samples come from the same distribution
    Test {
        /// CSV file with the first sample (rows are observations)
        x_csv: PathBuf,
        /// CSV file with the second sample
        y_csv: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a power experiment over a sweep of alternatives
    Power {
        #[command(flatten)]
        overrides: Overrides,
        /// Results CSV path; a companion <stem>_plot.csv is written next to it
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Type-I error calibration (P = Q), sweeping the permutation count
    Type1 {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Run the brute-force oracle equivalence suite
    OracleCheck {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Flat key=value config file, applied before any flags
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Experiment name (power subcommand)
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Covariance-block size (0 = (N+M)/20)
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// Comma-separated sweep values
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    w_tilde: Option<f64>,
    /// Number of permutations B
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    lambda_l: Option<f64>,
    #[arg(long)]
    lambda_u: Option<f64>,
    #[arg(long)]
    w_l: Option<f64>,
    #[arg(long)]
    w_u: Option<f64>,
    /// gaussian | laplacian
    #[arg(long)]
    kernel: Option<String>,
    /// tikhonov | showalter | cutoff
    #[arg(long)]
    regularizer: Option<String>,
    /// spectral | mmd-perm | mmd-cheb
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replications (0 = all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// wall | none (none zeroes the seconds column for byte-stable output)
    #[arg(long)]
    timing: Option<String>,
    /// Shuffle rows before the tail split
    #[arg(long)]
    pre_shuffle: bool,
    /// Treat the first CSV line as a header
    #[arg(long)]
    has_header: bool,
    #[arg(long)]
    mnist_images: Option<PathBuf>,
    #[arg(long)]
    mnist_labels: Option<PathBuf>,
}

impl Overrides {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.load_file(path)?;
        }
        macro_rules! set_str {
            ($key:literal, $field:expr) => {
                if let Some(v) = &$field {
                    cfg.set($key, v)?;
                }
            };
        }
        macro_rules! set_val {
            ($key:literal, $field:expr) => {
                if let Some(v) = $field {
                    cfg.set($key, &v.to_string())?;
                }
            };
        }
        set_str!("experiment", self.experiment);
        set_val!("n", self.n);
        set_val!("m", self.m);
        set_val!("s", self.s);
        set_val!("d", self.d);
        set_str!("sweep", self.sweep);
        set_val!("reps", self.reps);
        set_val!("alpha", self.alpha);
        set_val!("w", self.w);
        set_val!("w_tilde", self.w_tilde);
        set_val!("b", self.b);
        set_val!("lambda_l", self.lambda_l);
        set_val!("lambda_u", self.lambda_u);
        set_val!("w_l", self.w_l);
        set_val!("w_u", self.w_u);
        set_str!("kernel", self.kernel);
        set_str!("regularizer", self.regularizer);
        set_str!("method", self.method);
        set_val!("seed", self.seed);
        set_val!("threads", self.threads);
        set_str!("timing", self.timing);
        if self.pre_shuffle {
            cfg.pre_shuffle = true;
        }
        if self.has_header {
            cfg.has_header = true;
        }
        if let Some(p) = &self.mnist_images {
            cfg.mnist_images = Some(p.clone());
        }
        if let Some(p) = &self.mnist_labels {
            cfg.mnist_labels = Some(p.clone());
        }
        Ok(cfg)
    }
}

fn cmd_test(x_csv: &PathBuf, y_csv: &PathBuf, overrides: &Overrides) -> Result<u8> {
    let mut cfg = overrides.build()?;
    cfg.experiment = Experiment::CsvTwoSample;
    cfg.csv_x = Some(x_csv.clone());
    cfg.csv_y = Some(y_csv.clone());

    let x = specmmd::distributions::load_csv(x_csv, cfg.has_header)?;
    let y = specmmd::distributions::load_csv(y_csv, cfg.has_header)?;
    if x.ncols() != y.ncols() {
        return Err(anyhow!(
            "column counts differ: {} has {}, {} has {}",
            x_csv.display(),
            x.ncols(),
            y_csv.display(),
            y.ncols()
        ));
    }
    cfg.n = x.nrows();
    cfg.m = y.nrows();
    cfg.d = x.ncols();
    cfg.validate()?;

    let mut rng = substream_rng(cfg.master_seed, &[]);
    let outcome = run_test(&cfg, &x, &y, cfg.b, &mut rng)?;

    println!(
        "# N={} M={} d={} method={} alpha={} B={}",
        cfg.n,
        cfg.m,
        cfg.d,
        cfg.method.name(),
        cfg.alpha,
        cfg.b
    );
    println!(
        "{:>12} {:>12} {:>14} {:>14} {:>7}",
        "lambda", "bandwidth", "statistic", "threshold", "reject"
    );
    for c in &outcome.per_config {
        let lambda = c
            .lambda
            .map(|l| format!("{l:.3e}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:>12} {:>12.5} {:>14.6e} {:>14.6e} {:>7}",
            lambda,
            c.bandwidth,
            c.statistic,
            c.threshold,
            if c.reject { "yes" } else { "no" }
        );
    }
    println!(
        "effective level per configuration: {:.6e}",
        outcome.effective_level
    );
    println!("smallest Monte-Carlo p-value over the grid: {:.6}", outcome.p_value);
    if outcome.theory_bound_unmet {
        println!("note: w < 1 but B falls short of the permutation-count bound");
    }
    if cfg.method == Method::Spectral {
        println!("grid size: {} configurations", outcome.per_config.len());
    }
    println!(
        "decision: {}",
        if outcome.reject {
            "REJECT the null of equal distributions"
        } else {
            "fail to reject the null"
        }
    );
    Ok(outcome.reject as u8)
}

fn cmd_power(overrides: &Overrides, out: &Option<PathBuf>, force_type1: bool) -> Result<u8> {
    let mut cfg = overrides.build()?;
    if force_type1 {
        cfg.experiment = Experiment::Type1;
    }
    cfg.validate()?;
    let results = run_experiment(&cfg)?;
    print_results(&results, &cfg);
    if let Some(path) = out {
        emit_results(&results, &cfg, path)?;
        println!(
            "wrote {} and {}",
            path.display(),
            report::plot_path(path).display()
        );
    }
    Ok(0)
}

fn cmd_oracle_check(seed: u64) -> Result<u8> {
    let report = equivalence_suite(seed)?;
    for check in &report.checks {
        println!(
            "{}: {} over {} cases, max rel err {:.3e} (tol {:.1e}) in {:.2}s",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.cases,
            check.max_rel_err,
            check.tolerance,
            check.seconds
        );
    }
    Ok(if report.passed() { 0 } else { 1 })
}

fn run() -> Result<u8> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Test { x_csv, y_csv, overrides } => cmd_test(x_csv, y_csv, overrides),
        Command::Power { overrides, out } => cmd_power(overrides, out, false),
        Command::Type1 { overrides, out } => cmd_power(overrides, out, true),
        Command::OracleCheck { seed } => cmd_oracle_check(*seed),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
