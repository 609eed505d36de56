//! Experiment configuration: defaults, flat key=value config files, and
//! command-line overrides.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use specmmd::kernels::KernelFamily;
use specmmd::spectral::FilterKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    GaussianShift,
    GaussianScale,
    CauchyShift,
    PerturbedUniform,
    VmfVsUniform,
    WatsonVsUniform,
    MnistSubsets,
    CsvTwoSample,
    Type1,
}

impl Experiment {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "gaussian_shift" => Self::GaussianShift,
            "gaussian_scale" => Self::GaussianScale,
            "cauchy_shift" => Self::CauchyShift,
            "perturbed_uniform" => Self::PerturbedUniform,
            "vmf_vs_uniform" => Self::VmfVsUniform,
            "watson_vs_uniform" => Self::WatsonVsUniform,
            "mnist_subsets" => Self::MnistSubsets,
            "csv_two_sample" => Self::CsvTwoSample,
            "type1" => Self::Type1,
            other => bail!(
                "experiment: unknown value {other:?} (expected gaussian_shift, gaussian_scale, \
                 cauchy_shift, perturbed_uniform, vmf_vs_uniform, watson_vs_uniform, \
                 mnist_subsets, csv_two_sample, type1)"
            ),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::GaussianShift => "gaussian_shift",
            Self::GaussianScale => "gaussian_scale",
            Self::CauchyShift => "cauchy_shift",
            Self::PerturbedUniform => "perturbed_uniform",
            Self::VmfVsUniform => "vmf_vs_uniform",
            Self::WatsonVsUniform => "watson_vs_uniform",
            Self::MnistSubsets => "mnist_subsets",
            Self::CsvTwoSample => "csv_two_sample",
            Self::Type1 => "type1",
        }
    }

    pub fn sweep_param(&self) -> &'static str {
        match self {
            Self::GaussianShift | Self::CauchyShift => "shift",
            Self::GaussianScale => "variance",
            Self::PerturbedUniform => "perturbations",
            Self::VmfVsUniform | Self::WatsonVsUniform => "concentration",
            Self::MnistSubsets => "q_set",
            Self::CsvTwoSample => "none",
            Self::Type1 => "permutations",
        }
    }

    fn default_sweep(&self) -> Vec<f64> {
        match self {
            Self::GaussianShift | Self::CauchyShift => vec![0.0, 0.25, 0.5, 1.0],
            Self::GaussianScale => vec![1.0, 1.5, 2.0, 3.0],
            Self::PerturbedUniform => vec![1.0, 2.0, 3.0, 4.0],
            Self::VmfVsUniform => vec![1.0, 2.0, 4.0, 6.0],
            Self::WatsonVsUniform => vec![2.0, 4.0, 6.0, 8.0],
            Self::MnistSubsets => vec![1.0, 2.0, 3.0, 4.0, 5.0],
            Self::CsvTwoSample => vec![0.0],
            Self::Type1 => vec![250.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Spectral,
    MmdPerm,
    MmdCheb,
}

impl Method {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "spectral" => Self::Spectral,
            "mmd-perm" => Self::MmdPerm,
            "mmd-cheb" => Self::MmdCheb,
            other => bail!("method: unknown value {other:?} (expected spectral, mmd-perm, mmd-cheb)"),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Spectral => "spectral",
            Self::MmdPerm => "mmd-perm",
            Self::MmdCheb => "mmd-cheb",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Timing {
    Wall,
    None,
}

/// Full run configuration. Defaults follow the benchmark settings:
/// alpha = 0.05, B = 250, lambda in [1e-6, 5], bandwidth multipliers in
/// [0.01, 100] around the median heuristic, s = (N + M)/20.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub m: usize,
    /// Covariance-block size; 0 selects (N + M) / 20.
    pub s: usize,
    pub d: usize,
    pub sweep: Option<Vec<f64>>,
    pub reps: usize,
    pub alpha: f64,
    pub w: f64,
    pub w_tilde: f64,
    pub b: usize,
    pub lambda_l: f64,
    pub lambda_u: f64,
    pub w_l: f64,
    pub w_u: f64,
    pub kernel: KernelFamily,
    pub regularizer: FilterKind,
    pub method: Method,
    pub master_seed: u64,
    pub threads: usize,
    pub timing: Timing,
    pub pre_shuffle: bool,
    pub has_header: bool,
    pub mnist_images: Option<PathBuf>,
    pub mnist_labels: Option<PathBuf>,
    pub csv_x: Option<PathBuf>,
    pub csv_y: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Type1,
            n: 200,
            m: 200,
            s: 0,
            d: 1,
            sweep: None,
            reps: 200,
            alpha: 0.05,
            w: 1.0,
            w_tilde: 0.0,
            b: 250,
            lambda_l: 1e-6,
            lambda_u: 5.0,
            w_l: 0.01,
            w_u: 100.0,
            kernel: KernelFamily::Gaussian,
            regularizer: FilterKind::Tikhonov,
            method: Method::Spectral,
            master_seed: 0,
            threads: 0,
            timing: Timing::Wall,
            pre_shuffle: false,
            has_header: false,
            mnist_images: None,
            mnist_labels: None,
            csv_x: None,
            csv_y: None,
        }
    }
}

pub fn parse_kernel(name: &str) -> Result<KernelFamily> {
    Ok(match name {
        "gaussian" => KernelFamily::Gaussian,
        "laplacian" => KernelFamily::Laplacian,
        other => bail!("kernel: unknown value {other:?} (expected gaussian, laplacian)"),
    })
}

pub fn kernel_name(family: KernelFamily) -> &'static str {
    match family {
        KernelFamily::Gaussian => "gaussian",
        KernelFamily::Laplacian => "laplacian",
    }
}

pub fn parse_regularizer(name: &str) -> Result<FilterKind> {
    Ok(match name {
        "tikhonov" => FilterKind::Tikhonov,
        "showalter" => FilterKind::Showalter,
        "cutoff" => FilterKind::SpectralCutoff,
        other => bail!("regularizer: unknown value {other:?} (expected tikhonov, showalter, cutoff)"),
    })
}

pub fn regularizer_name(kind: FilterKind) -> &'static str {
    match kind {
        FilterKind::Tikhonov => "tikhonov",
        FilterKind::Showalter => "showalter",
        FilterKind::SpectralCutoff => "cutoff",
    }
}

fn parse_sweep(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("sweep: not a number: {tok:?}"))
        })
        .collect()
}

impl ExperimentConfig {
    /// Apply one key=value setting; keys match the struct fields.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let field = key.trim();
        let value = value.trim();
        let bad_num = || anyhow!("{field}: not a number: {value:?}");
        match field {
            "experiment" => self.experiment = Experiment::parse(value)?,
            "N" | "n" => self.n = value.parse().map_err(|_| bad_num())?,
            "M" | "m" => self.m = value.parse().map_err(|_| bad_num())?,
            "s" => self.s = value.parse().map_err(|_| bad_num())?,
            "d" => self.d = value.parse().map_err(|_| bad_num())?,
            "sweep" => self.sweep = Some(parse_sweep(value)?),
            "reps" => self.reps = value.parse().map_err(|_| bad_num())?,
            "alpha" => self.alpha = value.parse().map_err(|_| bad_num())?,
            "w" => self.w = value.parse().map_err(|_| bad_num())?,
            "w_tilde" => self.w_tilde = value.parse().map_err(|_| bad_num())?,
            "B" | "b" => self.b = value.parse().map_err(|_| bad_num())?,
            "lambda_l" => self.lambda_l = value.parse().map_err(|_| bad_num())?,
            "lambda_u" => self.lambda_u = value.parse().map_err(|_| bad_num())?,
            "w_l" => self.w_l = value.parse().map_err(|_| bad_num())?,
            "w_u" => self.w_u = value.parse().map_err(|_| bad_num())?,
            "kernel" => self.kernel = parse_kernel(value)?,
            "regularizer" => self.regularizer = parse_regularizer(value)?,
            "method" => self.method = Method::parse(value)?,
            "master_seed" | "seed" => self.master_seed = value.parse().map_err(|_| bad_num())?,
            "threads" => self.threads = value.parse().map_err(|_| bad_num())?,
            "timing" => {
                self.timing = match value {
                    "wall" => Timing::Wall,
                    "none" => Timing::None,
                    other => bail!("timing: unknown value {other:?} (expected wall, none)"),
                }
            }
            "pre_shuffle" => self.pre_shuffle = parse_bool(field, value)?,
            "has_header" => self.has_header = parse_bool(field, value)?,
            "mnist_images" => self.mnist_images = Some(PathBuf::from(value)),
            "mnist_labels" => self.mnist_labels = Some(PathBuf::from(value)),
            "csv_x" => self.csv_x = Some(PathBuf::from(value)),
            "csv_y" => self.csv_y = Some(PathBuf::from(value)),
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    /// Merge a flat key=value file ('#' starts a comment).
    pub fn load_file(&mut self, path: &std::path::Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), idx + 1))?;
            self.set(key, value)
                .with_context(|| format!("{}:{}", path.display(), idx + 1))?;
        }
        Ok(())
    }

    /// Effective covariance-block size.
    pub fn effective_s(&self) -> usize {
        if self.s > 0 {
            self.s
        } else {
            ((self.n + self.m) / 20).max(2)
        }
    }

    pub fn sweep_values(&self) -> Vec<f64> {
        self.sweep
            .clone()
            .unwrap_or_else(|| self.experiment.default_sweep())
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            bail!("reps: must be at least 1");
        }
        if self.b == 0 {
            bail!("B: must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha: must lie in (0,1), got {}", self.alpha);
        }
        if !(self.w > 0.0 && self.w <= 1.0) {
            bail!("w: must lie in (0,1], got {}", self.w);
        }
        if !(self.lambda_l > 0.0 && self.lambda_l <= self.lambda_u) {
            bail!(
                "lambda_l/lambda_u: need 0 < lambda_l <= lambda_u, got {} and {}",
                self.lambda_l,
                self.lambda_u
            );
        }
        if !(self.w_l > 0.0 && self.w_l <= self.w_u) {
            bail!("w_l/w_u: need 0 < w_l <= w_u, got {} and {}", self.w_l, self.w_u);
        }
        let s = self.effective_s();
        let (n_eff, m_eff, d_eff) = self.effective_dims();
        if self.method == Method::Spectral && (n_eff.min(m_eff) < s + 2 || s < 2) {
            bail!(
                "s: need 2 <= s <= min(N, M) - 2, got s={s} with N={n_eff}, M={m_eff}"
            );
        }
        match self.experiment {
            Experiment::PerturbedUniform => {
                if d_eff != 1 && d_eff != 2 {
                    bail!("d: perturbed_uniform supports d in {{1,2}}, got {d_eff}");
                }
                for v in self.sweep_values() {
                    if v < 1.0 || v.fract() != 0.0 {
                        bail!("sweep: perturbation counts must be positive integers, got {v}");
                    }
                }
            }
            Experiment::VmfVsUniform | Experiment::WatsonVsUniform => {
                if d_eff < 2 {
                    bail!("d: spherical experiments need d >= 2, got {d_eff}");
                }
                if self.sweep_values().iter().any(|&v| v < 0.0) {
                    bail!("sweep: concentrations must be non-negative");
                }
            }
            Experiment::MnistSubsets => {
                if self.mnist_images.is_none() || self.mnist_labels.is_none() {
                    bail!("mnist_images/mnist_labels: required for the mnist_subsets experiment");
                }
                for v in self.sweep_values() {
                    if !(1.0..=5.0).contains(&v) || v.fract() != 0.0 {
                        bail!("sweep: q_set indices must lie in 1..=5, got {v}");
                    }
                }
            }
            Experiment::CsvTwoSample => {
                if self.csv_x.is_none() || self.csv_y.is_none() {
                    bail!("csv_x/csv_y: required for the csv_two_sample experiment");
                }
            }
            Experiment::Type1 => {
                for v in self.sweep_values() {
                    if v < 1.0 || v.fract() != 0.0 {
                        bail!("sweep: permutation counts must be positive integers, got {v}");
                    }
                }
            }
            Experiment::GaussianScale => {
                if self.sweep_values().iter().any(|&v| v <= 0.0) {
                    bail!("sweep: variances must be positive");
                }
            }
            _ => {}
        }
        if self.d == 0 {
            bail!("d: must be at least 1");
        }
        Ok(())
    }

    /// Dimensions after experiment-specific overrides (MNIST pins d = 49).
    pub fn effective_dims(&self) -> (usize, usize, usize) {
        match self.experiment {
            Experiment::MnistSubsets => (self.n, self.m, 49),
            _ => (self.n, self.m, self.d),
        }
    }
}

fn parse_bool(field: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => bail!("{field}: expected true/false, got {other:?}"),
    }
}
