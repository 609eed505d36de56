//! Experiment execution: synthetic data generation, per-replication test
//! dispatch, and the parallel replication loop.

use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use ndarray::{Array1, Array2};
use rand::Rng;
use rayon::prelude::*;
use specmmd::distributions::{
    load_csv, load_mnist_7x7, sample_cauchy, sample_gaussian, sample_perturbed_uniform,
    sample_uniform_sphere, sample_vmf, sample_watson_mixture, PerturbedUniformSpec,
};
use specmmd::kernels::{bandwidth_grid, median_heuristic, Kernel};
use specmmd::seed::substream_rng;
use specmmd::testing::{
    adaptive_test, mmd_chebyshev_test, mmd_permutation_test, LambdaGrid, TestOptions, TestOutcome,
};
use specmmd::{Error, Mat64};

use crate::config::{Experiment, ExperimentConfig, Method, Timing};

/// Digit pools for the image-subset experiment: the reference pool holds all
/// digits, pool i drops digit sets of increasing overlap with the reference.
pub const MNIST_P: [u8; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];
pub const MNIST_Q: [&[u8]; 5] = [
    &[1, 3, 5, 7, 9],
    &[0, 1, 3, 5, 7, 9],
    &[0, 1, 2, 3, 5, 7, 9],
    &[0, 1, 2, 3, 4, 5, 7, 9],
    &[0, 1, 2, 3, 4, 5, 6, 7, 9],
];

/// Resolved data source: either synthetic samplers or pre-loaded pools that
/// replications resample with replacement.
pub enum DataSource {
    Synthetic,
    Pools { x: Mat64, y_per_sweep: Vec<Mat64> },
}

pub fn prepare_data_source(config: &ExperimentConfig) -> Result<DataSource> {
    match config.experiment {
        Experiment::MnistSubsets => {
            let images = config.mnist_images.as_ref().expect("validated");
            let labels = config.mnist_labels.as_ref().expect("validated");
            let x = load_mnist_7x7(images, labels, &MNIST_P).context("loading MNIST reference pool")?;
            let mut y_per_sweep = Vec::new();
            for v in config.sweep_values() {
                let idx = v as usize - 1;
                let q = load_mnist_7x7(images, labels, MNIST_Q[idx])
                    .with_context(|| format!("loading MNIST pool Q{}", idx + 1))?;
                y_per_sweep.push(q);
            }
            Ok(DataSource::Pools { x, y_per_sweep })
        }
        Experiment::CsvTwoSample => {
            let x = load_csv(config.csv_x.as_ref().expect("validated"), config.has_header)
                .context("loading csv_x")?;
            let y = load_csv(config.csv_y.as_ref().expect("validated"), config.has_header)
                .context("loading csv_y")?;
            if x.ncols() != y.ncols() {
                return Err(anyhow!(
                    "csv_x/csv_y: column counts differ ({} vs {})",
                    x.ncols(),
                    y.ncols()
                ));
            }
            Ok(DataSource::Pools { x, y_per_sweep: vec![y] })
        }
        _ => Ok(DataSource::Synthetic),
    }
}

fn resample_rows(pool: &Mat64, n: usize, rng: &mut impl Rng) -> Mat64 {
    let mut out = Array2::zeros((n, pool.ncols()));
    for i in 0..n {
        let src = rng.random_range(0..pool.nrows());
        out.row_mut(i).assign(&pool.row(src));
    }
    out
}

fn unit_ones(d: usize) -> Array1<f64> {
    Array1::from_elem(d, 1.0 / (d as f64).sqrt())
}

/// Draw one replication's (X, Y) pair for the sweep point.
pub fn sample_pair(
    config: &ExperimentConfig,
    source: &DataSource,
    sweep_index: usize,
    sweep_value: f64,
    rng: &mut impl Rng,
) -> Result<(Mat64, Mat64)> {
    let (n, m, d) = config.effective_dims();
    let zero = Array1::zeros(d);
    match config.experiment {
        Experiment::Type1 => {
            let x = sample_gaussian(d, &zero, 1.0, n, rng)?;
            let y = sample_gaussian(d, &zero, 1.0, m, rng)?;
            Ok((x, y))
        }
        Experiment::GaussianShift => {
            let x = sample_gaussian(d, &zero, 1.0, n, rng)?;
            let mut mean = Array1::zeros(d);
            mean[0] = sweep_value;
            let y = sample_gaussian(d, &mean, 1.0, m, rng)?;
            Ok((x, y))
        }
        Experiment::GaussianScale => {
            let x = sample_gaussian(d, &zero, 1.0, n, rng)?;
            let y = sample_gaussian(d, &zero, sweep_value, m, rng)?;
            Ok((x, y))
        }
        Experiment::CauchyShift => {
            let x = sample_cauchy(d, 0.0, n, rng);
            let y = sample_cauchy(d, sweep_value, m, rng);
            Ok((x, y))
        }
        Experiment::PerturbedUniform => {
            let p = sweep_value as usize;
            let x = Array2::from_shape_fn((n, d), |_| rng.random());
            let signs = PerturbedUniformSpec::random_signs(d, p, rng);
            let spec = PerturbedUniformSpec::new(d, p, signs)?;
            let y = sample_perturbed_uniform(&spec, m, rng)?;
            Ok((x, y))
        }
        Experiment::VmfVsUniform => {
            let x = sample_uniform_sphere(d, n, rng)?;
            let y = sample_vmf(d, &unit_ones(d), sweep_value, m, rng)?;
            Ok((x, y))
        }
        Experiment::WatsonVsUniform => {
            let x = sample_uniform_sphere(d, n, rng)?;
            let mut mu2 = Array1::from_elem(d, 1.0);
            mu2[0] = -1.0;
            let y = sample_watson_mixture(d, &Array1::from_elem(d, 1.0), &mu2, sweep_value, m, rng)?;
            Ok((x, y))
        }
        Experiment::MnistSubsets | Experiment::CsvTwoSample => {
            let DataSource::Pools { x, y_per_sweep } = source else {
                return Err(anyhow!("pooled experiment without loaded pools"));
            };
            let y_pool = &y_per_sweep[sweep_index.min(y_per_sweep.len() - 1)];
            Ok((resample_rows(x, n, rng), resample_rows(y_pool, m, rng)))
        }
    }
}

/// Run the configured test on one (X, Y) pair. The bandwidth grid centers on
/// the median heuristic of the pooled input; degenerate data falls back to
/// bandwidth scale 1.
pub fn run_test(
    config: &ExperimentConfig,
    x: &Mat64,
    y: &Mat64,
    b: usize,
    rng: &mut impl Rng,
) -> Result<TestOutcome<f64>> {
    let metric = config.kernel.metric();
    let mut pooled = Array2::zeros((x.nrows() + y.nrows(), x.ncols()));
    pooled.slice_mut(ndarray::s![..x.nrows(), ..]).assign(x);
    pooled.slice_mut(ndarray::s![x.nrows().., ..]).assign(y);
    let h_m = match median_heuristic(&pooled, metric) {
        Ok(h) => h,
        Err(Error::DegenerateData(_)) => 1.0,
        Err(e) => return Err(e.into()),
    };

    match config.method {
        Method::Spectral => {
            let bandwidths = bandwidth_grid(h_m, config.w_l, config.w_u)?;
            let lambdas = LambdaGrid::new(config.lambda_l, config.lambda_u)?;
            let opts = TestOptions {
                alpha: config.alpha,
                w: config.w,
                w_tilde: config.w_tilde,
                permutations: b,
                pre_shuffle: config.pre_shuffle,
            };
            Ok(adaptive_test(
                x,
                y,
                config.kernel,
                &bandwidths,
                &lambdas,
                config.regularizer,
                config.effective_s(),
                &opts,
                rng,
            )?)
        }
        Method::MmdPerm => {
            let kernel = Kernel::new(config.kernel, h_m)?;
            Ok(mmd_permutation_test(x, y, &kernel, config.alpha, b, rng)?)
        }
        Method::MmdCheb => {
            let kernel = Kernel::new(config.kernel, h_m)?;
            Ok(mmd_chebyshev_test(x, y, &kernel, config.alpha)?)
        }
    }
}

/// Aggregated result for one sweep point.
#[derive(Clone, Debug)]
pub struct PointResult {
    pub sweep_value: f64,
    pub reps: usize,
    pub rejections: usize,
    pub power: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub mean_seconds: f64,
}

/// Wilson 95% score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    let z = 1.959963984540054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (((center - spread) / denom).max(0.0), ((center + spread) / denom).min(1.0))
}

/// Run every sweep point with `reps` independent replications each: fresh
/// data, fresh split, fresh permutations, substream seed derived from
/// (master seed, point, replication). Replications run on a worker pool and
/// are reduced in replication order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<PointResult>> {
    config.validate().map_err(|e| anyhow!("config validation: {e}"))?;
    let source = prepare_data_source(config)?;
    let sweep = config.sweep_values();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .context("building worker pool")?;

    let mut results = Vec::with_capacity(sweep.len());
    for (point, &sweep_value) in sweep.iter().enumerate() {
        let b = if config.experiment == Experiment::Type1 {
            sweep_value as usize
        } else {
            config.b
        };
        let outcomes: Result<Vec<(bool, f64)>> = pool.install(|| {
            (0..config.reps)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = substream_rng(config.master_seed, &[point as u64, rep as u64]);
                    let started = Instant::now();
                    let (x, y) = sample_pair(config, &source, point, sweep_value, &mut rng)?;
                    let outcome = run_test(config, &x, &y, b, &mut rng)?;
                    let seconds = match config.timing {
                        Timing::Wall => started.elapsed().as_secs_f64(),
                        Timing::None => 0.0,
                    };
                    Ok((outcome.reject, seconds))
                })
                .collect()
        });
        let outcomes = outcomes?;
        let rejections = outcomes.iter().filter(|(r, _)| *r).count();
        let mean_seconds = outcomes.iter().map(|(_, s)| s).sum::<f64>() / config.reps as f64;
        let (ci_lo, ci_hi) = wilson_interval(rejections, config.reps);
        results.push(PointResult {
            sweep_value,
            reps: config.reps,
            rejections,
            power: rejections as f64 / config.reps as f64,
            ci_lo,
            ci_hi,
            mean_seconds,
        });
    }
    Ok(results)
}
