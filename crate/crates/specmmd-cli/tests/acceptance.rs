//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantity. Tolerances are pinned in the assertions.
//!
//! Run with `cargo test -p specmmd-cli --test acceptance -- --nocapture`.

use std::process::Command;
use std::time::Instant;

use ndarray::{s, Array1, Array2};
use rand::Rng;
use specmmd::distributions::{
    perturbation_bump, sample_perturbed_uniform, sample_uniform_sphere, sample_vmf,
    sample_watson, PerturbedUniformSpec,
};
use specmmd::kernels::{gram, Kernel, KernelFamily};
use specmmd::reference::equivalence_suite;
use specmmd::seed::substream_rng;
use specmmd::spectral::{
    centered_kernel_eigs, filter_matrix, mmd_u_stat, pooled_operator, regularized_stat,
    FilterKind, Regularizer,
};
use specmmd::testing::split_samples;

fn randn(n: usize, d: usize, shift: f64, rng: &mut impl Rng) -> Array2<f64> {
    use rand_distr_shim::sample_standard_normal;
    Array2::from_shape_fn((n, d), |_| sample_standard_normal(rng) + shift)
}

// rand_distr is not a direct dev-dependency of the CLI crate; a Box-Muller
// shim keeps the acceptance data generation self-contained and seeded.
mod rand_distr_shim {
    use rand::Rng;

    pub fn sample_standard_normal(rng: &mut impl Rng) -> f64 {
        let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

#[test]
fn criterion_01_statistic_oracle_equivalence() {
    let report = equivalence_suite(2024).unwrap();
    let check = &report.checks[0];
    assert_eq!(check.name, "regularized statistic vs quadruple-sum oracle");
    assert_eq!(check.cases, 600); // 50 instances x 12 configurations
    assert!(
        check.max_rel_err <= 1e-8,
        "max rel err {} exceeds 1e-8",
        check.max_rel_err
    );
    assert!(check.seconds < 5.0, "took {:.2}s (budget 5s)", check.seconds);
    println!(
        "ACCEPTANCE 1 PASS - statistic oracle equivalence: max rel err {:.3e} over {} cases in {:.2}s",
        check.max_rel_err, check.cases, check.seconds
    );
}

#[test]
fn criterion_02_mmd_oracle_equivalence() {
    let report = equivalence_suite(2024).unwrap();
    let check = &report.checks[1];
    assert_eq!(check.name, "MMD matrix form vs naive loops");
    assert!(
        check.max_rel_err <= 1e-12,
        "max rel err {} exceeds 1e-12",
        check.max_rel_err
    );
    assert!(check.seconds < 1.0, "took {:.2}s (budget 1s)", check.seconds);
    println!(
        "ACCEPTANCE 2 PASS - MMD oracle equivalence: max rel err {:.3e} over {} cases in {:.2}s",
        check.max_rel_err, check.cases, check.seconds
    );
}

#[test]
fn criterion_03_exhaustive_permutation_validation() {
    let report = equivalence_suite(2024).unwrap();
    let quantile = &report.checks[2];
    let identity = &report.checks[3];
    assert!(quantile.passed, "quantile does not match the order-statistic definition");
    assert_eq!(quantile.cases, 720);
    assert!(identity.passed, "identity permutation is not bitwise-identical");
    assert!(quantile.seconds < 1.0, "took {:.2}s (budget 1s)", quantile.seconds);
    println!(
        "ACCEPTANCE 3 PASS - exhaustive permutation validation: 720 permutations, quantile exact, identity bitwise, {:.2}s",
        quantile.seconds
    );
}

#[test]
fn criterion_04_large_lambda_limit() {
    let lam = 1e8;
    let mut worst = 0.0f64;
    for instance in 0..20u64 {
        let mut rng = substream_rng(4040, &[instance]);
        let x = randn(10 + 8, 2, 0.0, &mut rng);
        let y = randn(10 + 8, 2, 2.0, &mut rng);
        let split = split_samples(&x, &y, 8, &mut rng).unwrap();
        let kernel = Kernel::new(KernelFamily::Gaussian, 1.0).unwrap();
        let n = split.n();
        let m = split.m();
        let mut pooled = Array2::zeros((n + m, 2));
        pooled.slice_mut(s![..n, ..]).assign(&split.x_main);
        pooled.slice_mut(s![n.., ..]).assign(&split.y_main);
        let k_pool = gram(&kernel, &pooled, &pooled).unwrap();
        let k_pool_s = gram(&kernel, &pooled, &split.z).unwrap();
        let k_s = gram(&kernel, &split.z, &split.z).unwrap();
        let eigs = centered_kernel_eigs(&k_s).unwrap();

        let k_xx = gram(&kernel, &split.x_main, &split.x_main).unwrap();
        let k_yy = gram(&kernel, &split.y_main, &split.y_main).unwrap();
        let k_xy = gram(&kernel, &split.x_main, &split.y_main).unwrap();
        let mmd = mmd_u_stat(&k_xx, &k_yy, &k_xy).unwrap();

        for kind in [FilterKind::Tikhonov, FilterKind::Showalter] {
            let reg = Regularizer::new(kind, lam).unwrap();
            let g = filter_matrix(&eigs, &reg);
            let q = pooled_operator(&k_pool, &k_pool_s, &g, reg.at_zero(), n, m).unwrap();
            let idx_x: Vec<usize> = (0..n).collect();
            let idx_y: Vec<usize> = (n..n + m).collect();
            let stat = regularized_stat(&q, &idx_x, &idx_y).unwrap();
            let rel = (lam * stat - mmd).abs() / mmd.abs().max(1e-12);
            worst = worst.max(rel);
            assert!(rel <= 1e-6, "{kind:?} instance {instance}: rel {rel}");
        }
    }
    println!("ACCEPTANCE 4 PASS - large-lambda limit: worst rel deviation {worst:.3e} <= 1e-6");
}

#[test]
fn criterion_05_filter_assumption_grid() {
    for &lam in &[1e-6, 1e-3, 1.0, 5.0] {
        let xs = [0.0, lam / 2.0, lam, 2.0 * lam, 0.5, 1.0];
        for kind in [FilterKind::Tikhonov, FilterKind::Showalter, FilterKind::SpectralCutoff] {
            let reg = Regularizer::new(kind, lam).unwrap();
            for &x in &xs {
                let g = reg.value(x);
                assert!(x * g <= 1.0 + 1e-12, "{kind:?} lam={lam} x={x}: xg={}", x * g);
                assert!(lam * g <= 1.0 + 1e-12, "{kind:?} lam={lam} x={x}");
                match kind {
                    FilterKind::Tikhonov => {
                        assert!(f64::abs(g * (x + lam) - 1.0) <= 1e-12, "lam={lam} x={x}")
                    }
                    FilterKind::Showalter => {
                        assert!(g * (x + lam) >= 1.0 - 1e-9, "lam={lam} x={x}")
                    }
                    FilterKind::SpectralCutoff => {}
                }
            }
            if kind == FilterKind::SpectralCutoff {
                // the lower filter bound fails at the origin by construction
                assert_eq!(reg.at_zero() * (0.0 + lam), 0.0);
            }
        }
    }
    println!(
        "ACCEPTANCE 5 PASS - filter assumptions: upper bounds hold with constant 1, lower bound holds for Tikhonov/Showalter, cutoff violation asserted"
    );
}

fn run_experiment_config(extra: &[(&str, &str)]) -> Vec<specmmd_cli_shim::PointResult> {
    specmmd_cli_shim::run(extra)
}

// The heavy Monte-Carlo criteria drive the harness through the same code the
// binary uses, via a thin process-level shim (the binary is the deliverable
// interface).
mod specmmd_cli_shim {
    #[derive(Debug)]
    pub struct PointResult {
        pub sweep_value: f64,
        pub reps: usize,
        pub rejections: usize,
        pub power: f64,
    }

    pub fn run(pairs: &[(&str, &str)]) -> Vec<PointResult> {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("acceptance_run.csv");
        let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_specmmd"));
        cmd.arg("power");
        for (k, v) in pairs {
            cmd.arg(format!("--{k}")).arg(v);
        }
        cmd.arg("--timing").arg("none");
        cmd.arg("--out").arg(&out);
        let status = cmd.status().expect("running specmmd power");
        assert!(status.success(), "specmmd power failed");
        let text = std::fs::read_to_string(&out).unwrap();
        text.lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("experiment,"))
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                PointResult {
                    sweep_value: f[3].parse().unwrap(),
                    reps: f[4].parse().unwrap(),
                    rejections: f[5].parse().unwrap(),
                    power: f[6].parse().unwrap(),
                }
            })
            .collect()
    }
}

#[test]
fn criterion_06_type1_calibration_at_defaults() {
    // Adaptive test, P = Q = N(0, I_1), N = M = 100, s = 20, alpha = 0.05,
    // B = 250, full default grids, 500 replications.
    let started = Instant::now();
    let results = run_experiment_config(&[
        ("experiment", "type1"),
        ("n", "100"),
        ("m", "100"),
        ("s", "20"),
        ("d", "1"),
        ("reps", "500"),
        ("sweep", "250"),
        ("seed", "606"),
    ]);
    let rate = results[0].power;
    assert!(
        (0.02..=0.08).contains(&rate),
        "type-I rate {rate} outside [0.02, 0.08] ({}/{} rejections)",
        results[0].rejections,
        results[0].reps
    );
    println!(
        "ACCEPTANCE 6 PASS - type-I calibration: rate {rate:.4} in [0.02, 0.08] ({} reps, {:.0}s)",
        results[0].reps,
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_07_power_reproduction_gaussian_shift() {
    let started = Instant::now();
    let results = run_experiment_config(&[
        ("experiment", "gaussian_shift"),
        ("n", "200"),
        ("m", "200"),
        ("s", "20"),
        ("d", "1"),
        ("reps", "200"),
        ("sweep", "0,0.25,0.5,1.0"),
        ("seed", "707"),
    ]);
    let powers: Vec<f64> = results.iter().map(|r| r.power).collect();
    let reps = results[0].reps as f64;
    assert!(
        powers[3] >= 0.9,
        "power at shift 1.0 is {} < 0.9",
        powers[3]
    );
    for i in 0..3 {
        let se = ((powers[i] * (1.0 - powers[i]) + powers[i + 1] * (1.0 - powers[i + 1])) / reps)
            .sqrt()
            .max(1.0 / reps);
        assert!(
            powers[i + 1] >= powers[i] - 2.0 * se,
            "power not monotone within 2 MC se: {powers:?}"
        );
    }
    println!(
        "ACCEPTANCE 7 PASS - Gaussian-shift power: {:?} (endpoint >= 0.9, monotone within 2 se, {:.0}s)",
        powers,
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_08_perturbed_uniform_properties() {
    // density non-negative on dense grids for the benchmark constants
    let mut rng = substream_rng(808, &[]);
    for p in 1..=6usize {
        let signs = PerturbedUniformSpec::random_signs(1, p, &mut rng);
        let spec = PerturbedUniformSpec::new(1, p, signs).unwrap();
        for i in 0..10_000 {
            let x = (i as f64 + 0.5) / 10_000.0;
            assert!(spec.density(&[x]) >= 0.0, "d=1 P={p} x={x}");
        }
    }
    for p in 1..=3usize {
        let signs = PerturbedUniformSpec::random_signs(2, p, &mut rng);
        let spec = PerturbedUniformSpec::new(2, p, signs).unwrap();
        for i in 0..100 {
            for j in 0..100 {
                let x = [(i as f64 + 0.5) / 100.0, (j as f64 + 0.5) / 100.0];
                assert!(spec.density(&x) >= 0.0, "d=2 P={p}");
            }
        }
    }

    // bump integrates to zero (composite Simpson)
    let steps = 20_000usize;
    let h = 1.0 / steps as f64;
    let mut integral = perturbation_bump(-1.0) + perturbation_bump(0.0);
    for i in 1..steps {
        let w = if i % 2 == 0 { 2.0 } else { 4.0 };
        integral += w * perturbation_bump(-1.0 + i as f64 * h);
    }
    integral *= h / 3.0;
    assert!(integral.abs() <= 1e-8, "bump integral {integral}");

    // sampler coordinate means (balanced signs in d = 1; any signs in d = 2)
    let spec1 = PerturbedUniformSpec::new(1, 2, vec![1.0, -1.0]).unwrap();
    let draws = sample_perturbed_uniform(&spec1, 50_000, &mut substream_rng(808, &[1])).unwrap();
    let mean = draws.column(0).sum() / 50_000.0;
    assert!((mean - 0.5).abs() <= 0.01, "d=1 mean {mean}");
    let spec2 = PerturbedUniformSpec::new(2, 1, vec![1.0]).unwrap();
    let draws = sample_perturbed_uniform(&spec2, 50_000, &mut substream_rng(808, &[2])).unwrap();
    for j in 0..2 {
        let mean = draws.column(j).sum() / 50_000.0;
        assert!((mean - 0.5).abs() <= 0.01, "d=2 mean {mean}");
    }

    // power decays in the perturbation count: P = 1 beats P = 4 by >= 0.2
    let started = Instant::now();
    let results = run_experiment_config(&[
        ("experiment", "perturbed_uniform"),
        ("n", "500"),
        ("m", "500"),
        ("s", "50"),
        ("d", "1"),
        ("reps", "200"),
        ("sweep", "1,4"),
        ("seed", "909"),
    ]);
    let gap = results[0].power - results[1].power;
    assert!(
        gap >= 0.2,
        "power gap P=1 vs P=4 is {gap} (powers {} and {})",
        results[0].power,
        results[1].power
    );
    println!(
        "ACCEPTANCE 8 PASS - perturbed uniform: density >= 0, |bump integral| {:.2e} <= 1e-8, means centered, power gap {:.3} >= 0.2 ({:.0}s)",
        integral.abs(),
        gap,
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_09_spherical_samplers() {
    // unit norms
    let mu = Array1::from_elem(3, 1.0 / 3.0f64.sqrt());
    let vmf = sample_vmf(3, &mu, 50.0, 5_000, &mut substream_rng(910, &[])).unwrap();
    let watson = sample_watson(3, &mu, 6.0, 5_000, &mut substream_rng(911, &[])).unwrap();
    let uniform = sample_uniform_sphere(3, 5_000, &mut substream_rng(912, &[])).unwrap();
    for draws in [&vmf, &watson, &uniform] {
        for row in draws.rows() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-12, "norm {norm}");
        }
    }

    // zero concentration: mean resultant length of the uniform limit
    let n = 10_000;
    let draws = sample_vmf(3, &mu, 0.0, n, &mut substream_rng(913, &[])).unwrap();
    let resultant = (0..3)
        .map(|j| {
            let s = draws.column(j).sum() / n as f64;
            s * s
        })
        .sum::<f64>()
        .sqrt();
    assert!(
        resultant <= 4.0 / (n as f64).sqrt(),
        "resultant {resultant} exceeds {}",
        4.0 / (n as f64).sqrt()
    );

    // antipodal symmetry of one Watson component
    let n = 50_000;
    let draws = sample_watson(3, &mu, 6.0, n, &mut substream_rng(914, &[])).unwrap();
    let positive = draws
        .rows()
        .into_iter()
        .filter(|row| mu.dot(row) > 0.0)
        .count();
    let frac = positive as f64 / n as f64;
    assert!((frac - 0.5).abs() <= 0.01, "antipodal fraction {frac}");
    println!(
        "ACCEPTANCE 9 PASS - spherical samplers: unit norms <= 1e-12, uniform resultant {resultant:.4} <= {:.4}, antipodal fraction {frac:.4}",
        4.0 / (n as f64).sqrt()
    );
}

#[test]
fn criterion_10_byte_identical_output_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_specmmd"))
            .args([
                "power",
                "--experiment",
                "gaussian_shift",
                "--n",
                "40",
                "--m",
                "40",
                "--s",
                "4",
                "--reps",
                "12",
                "--sweep",
                "0,1",
                "--b",
                "60",
                "--lambda-l",
                "0.01",
                "--lambda-u",
                "0.08",
                "--w-l",
                "0.5",
                "--w-u",
                "4",
                "--seed",
                "1234",
                "--timing",
                "none",
                "--threads",
                threads,
            ])
            .arg("--out")
            .arg(&out)
            .status()
            .expect("running specmmd power");
        assert!(status.success());
        let plot = out.with_file_name(format!(
            "{}_plot.csv",
            out.file_stem().unwrap().to_string_lossy()
        ));
        (
            std::fs::read(&out).unwrap(),
            std::fs::read(&plot).unwrap(),
        )
    };
    let (a_csv, a_plot) = run("1", "one.csv");
    let (b_csv, b_plot) = run("2", "two.csv");
    assert_eq!(a_csv, b_csv, "results CSV differs across thread counts");
    assert_eq!(a_plot, b_plot, "plot CSV differs across thread counts");
    println!(
        "ACCEPTANCE 10 PASS - determinism: {} result bytes and {} plot bytes identical across 1 and 2 threads",
        a_csv.len(),
        a_plot.len()
    );
}
