//! Slow, independent brute-force oracles used to validate the fast
//! implementations, plus the packaged equivalence suite behind the CLI's
//! oracle check.
//!
//! The oracles share exactly two primitives with the fast path: kernel
//! evaluation and the symmetric eigensolver. All matrix assembly is done
//! here with explicit loops, and inner products are expanded per pair of
//! kernel sections rather than through pooled matrices.

use itertools::Itertools;
use ndarray::{s, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernels::{gram, Kernel, KernelFamily};
use crate::linalg::sym_eigen_desc;
use crate::scalar::{count, Scalar};
use crate::spectral::{
    centered_kernel_eigs, filter_matrix, mmd_u_stat, pooled_operator, regularized_stat,
    FilterKind, PooledOperator, Regularizer,
};
use crate::testing::{permutation_quantile, split_samples, SplitData};

const MAX_MAIN: usize = 12;
const MAX_COV: usize = 10;
const MAX_POOLED_FACTORIAL: usize = 8;

/// Direct evaluation of the two-sample U-statistic defining the regularized
/// discrepancy: the quadruple sum over distinct index pairs of
/// ⟨g(Σ̂)A(X_i,Y_i'), A(X_j,Y_j')⟩, with every inner product expanded through
/// the eigensystem action on kernel sections.
pub fn eta_hat_bruteforce<T: Scalar>(
    split: &SplitData<T>,
    kernel: &Kernel<T>,
    reg: &Regularizer<T>,
) -> Result<T> {
    let n = split.n();
    let m = split.m();
    let s = split.s();
    if n > MAX_MAIN || m > MAX_MAIN || s > MAX_COV {
        return Err(Error::SizeCap(format!(
            "brute-force statistic limited to n,m <= {MAX_MAIN}, s <= {MAX_COV}; got n={n}, m={m}, s={s}"
        )));
    }
    if n < 2 || m < 2 {
        return Err(Error::InvalidParameter("need n, m >= 2".into()));
    }

    // Z Gram by direct evaluation.
    let mut k_s = Array2::zeros((s, s));
    for i in 0..s {
        for j in 0..s {
            k_s[[i, j]] = kernel.eval(split.z.row(i), split.z.row(j));
        }
    }

    // Centered scaled matrix assembled the long way: explicit H = I - 11ᵀ/s,
    // naive triple-loop products, symmetrized.
    let sf = count::<T>(s);
    let h = Array2::from_shape_fn((s, s), |(i, j)| {
        let delta = if i == j { T::one() } else { T::zero() };
        delta - T::one() / sf
    });
    let naive_product = |a: &Array2<T>, b: &Array2<T>| {
        let mut out = Array2::zeros((a.nrows(), b.ncols()));
        for i in 0..a.nrows() {
            for j in 0..b.ncols() {
                let mut acc = T::zero();
                for k in 0..a.ncols() {
                    acc += a[[i, k]] * b[[k, j]];
                }
                out[[i, j]] = acc;
            }
        }
        out
    };
    let hk = naive_product(&h, &k_s);
    let hkh = naive_product(&hk, &h);
    let mut centered = Array2::zeros((s, s));
    let scale = T::one() / count::<T>(s - 1);
    for i in 0..s {
        for j in 0..s {
            centered[[i, j] ] = (hkh[[i, j]] + hkh[[j, i]]) / (T::one() + T::one()) * scale;
        }
    }

    let (values, vectors) = sym_eigen_desc(&centered)?;
    let lambda_max = values.first().copied().unwrap_or(T::zero()).max(T::zero());
    let rank_epsilon = sf * T::epsilon() * lambda_max;
    let retained: Vec<usize> = (0..values.len())
        .filter(|&i| values[i].max(T::zero()) > rank_epsilon)
        .collect();

    let g0 = reg.at_zero();
    let gains: Vec<T> = retained.iter().map(|&r| reg.value(values[r]) - g0).collect();

    // Projection of one point's centered kernel section onto each retained
    // eigenfunction: ⟨u_r, K(·,v)⟩ = α̂_rᵀ H̃½ k_Z(v) / sqrt(s λ̂_r).
    let c_center = (sf / count::<T>(s - 1)).sqrt();
    let project = |v: ndarray::ArrayView1<T>| -> Vec<T> {
        let mut section = vec![T::zero(); s];
        for (i, slot) in section.iter_mut().enumerate() {
            *slot = kernel.eval(split.z.row(i), v);
        }
        let mean = section.iter().copied().sum::<T>() / sf;
        let centered_section: Vec<T> = section.iter().map(|&k| c_center * (k - mean)).collect();
        retained
            .iter()
            .map(|&r| {
                let mut acc = T::zero();
                for i in 0..s {
                    acc += vectors[[i, r]] * centered_section[i];
                }
                acc / (sf * values[r]).sqrt()
            })
            .collect()
    };
    let proj_x: Vec<Vec<T>> = (0..n).map(|i| project(split.x_main.row(i))).collect();
    let proj_y: Vec<Vec<T>> = (0..m).map(|j| project(split.y_main.row(j))).collect();

    // Raw kernel values between main points, by direct evaluation.
    let eval = |a: ndarray::ArrayView1<T>, b: ndarray::ArrayView1<T>| kernel.eval(a, b);
    let mut kxx = vec![vec![T::zero(); n]; n];
    let mut kyy = vec![vec![T::zero(); m]; m];
    let mut kxy = vec![vec![T::zero(); m]; n];
    for i in 0..n {
        for j in 0..n {
            kxx[i][j] = eval(split.x_main.row(i), split.x_main.row(j));
        }
    }
    for i in 0..m {
        for j in 0..m {
            kyy[i][j] = eval(split.y_main.row(i), split.y_main.row(j));
        }
    }
    for i in 0..n {
        for j in 0..m {
            kxy[i][j] = eval(split.x_main.row(i), split.y_main.row(j));
        }
    }

    // Per-pair eigen coordinates of A(X_i, Y_i').
    let r = retained.len();
    let diff: Vec<Vec<Vec<T>>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|ip| (0..r).map(|k| proj_x[i][k] - proj_y[ip][k]).collect())
                .collect()
        })
        .collect();

    let mut total = T::zero();
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            for ip in 0..m {
                for jp in 0..m {
                    if jp == ip {
                        continue;
                    }
                    let raw = kxx[i][j] - kxy[i][jp] - kxy[j][ip] + kyy[ip][jp];
                    let mut spectral = T::zero();
                    let a = &diff[i][ip];
                    let b = &diff[j][jp];
                    for k in 0..r {
                        spectral += gains[k] * a[k] * b[k];
                    }
                    total += g0 * raw + spectral;
                }
            }
        }
    }
    let nf = count::<T>(n);
    let mf = count::<T>(m);
    Ok(total / (nf * (nf - T::one()) * mf * (mf - T::one())))
}

/// MMD U-statistic by naive loops, no matrix assembly.
pub fn mmd_bruteforce<T: Scalar>(
    x: &Array2<T>,
    y: &Array2<T>,
    kernel: &Kernel<T>,
) -> Result<T> {
    let n = x.nrows();
    let m = y.nrows();
    if n > 200 || m > 200 {
        return Err(Error::SizeCap(format!(
            "brute-force MMD limited to N, M <= 200; got {n}, {m}"
        )));
    }
    if n < 2 || m < 2 {
        return Err(Error::InvalidParameter("need N, M >= 2".into()));
    }
    let mut acc_x = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc_x += kernel.eval(x.row(i), x.row(j));
            }
        }
    }
    let mut acc_y = T::zero();
    for i in 0..m {
        for j in 0..m {
            if i != j {
                acc_y += kernel.eval(y.row(i), y.row(j));
            }
        }
    }
    let mut acc_xy = T::zero();
    for i in 0..n {
        for j in 0..m {
            acc_xy += kernel.eval(x.row(i), y.row(j));
        }
    }
    let nf = count::<T>(n);
    let mf = count::<T>(m);
    Ok(acc_x / (nf * (nf - T::one())) + acc_y / (mf * (mf - T::one()))
        - (T::one() + T::one()) * acc_xy / (nf * mf))
}

/// The full permutation distribution: the statistic under every one of the
/// (n+m)! relabelings of the pooled rows, identity first.
pub fn exhaustive_permutation_distribution<T: Scalar>(q: &PooledOperator<T>) -> Result<Vec<T>> {
    let n = q.n();
    let total = n + q.m();
    if total > MAX_POOLED_FACTORIAL {
        return Err(Error::SizeCap(format!(
            "exhaustive enumeration limited to n + m <= {MAX_POOLED_FACTORIAL}, got {total}"
        )));
    }
    let mut out = Vec::with_capacity((1..=total).product());
    for perm in (0..total).permutations(total) {
        let mut xs = perm[..n].to_vec();
        let mut ys = perm[n..].to_vec();
        xs.sort_unstable();
        ys.sort_unstable();
        out.push(regularized_stat(q, &xs, &ys)?);
    }
    Ok(out)
}

/// One check of the equivalence suite.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
}

/// Report for the full fast-vs-oracle equivalence suite.
#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    pub checks: Vec<CheckResult>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn shifted_normal(n: usize, d: usize, shift: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| {
        let g: f64 = StandardNormal.sample(rng);
        g + shift
    })
}

fn fast_statistic(
    split: &SplitData<f64>,
    kernel: &Kernel<f64>,
    reg: &Regularizer<f64>,
) -> Result<f64> {
    let n = split.n();
    let m = split.m();
    let mut pooled = Array2::zeros((n + m, split.dim()));
    pooled.slice_mut(s![..n, ..]).assign(&split.x_main);
    pooled.slice_mut(s![n.., ..]).assign(&split.y_main);
    let k_pool = gram(kernel, &pooled, &pooled)?;
    let k_pool_s = gram(kernel, &pooled, &split.z)?;
    let k_s = gram(kernel, &split.z, &split.z)?;
    let eigs = centered_kernel_eigs(&k_s)?;
    let g = filter_matrix(&eigs, reg);
    let q = pooled_operator(&k_pool, &k_pool_s, &g, reg.at_zero(), n, m)?;
    let idx_x: Vec<usize> = (0..n).collect();
    let idx_y: Vec<usize> = (n..n + m).collect();
    regularized_stat(&q, &idx_x, &idx_y)
}

/// Fast-vs-oracle agreement on randomized instances: the regularized
/// statistic (50 instances x 12 configurations, rel tol 1e-8), the MMD
/// U-statistic (50 instances, rel tol 1e-12), and exact permutation
/// enumeration at n = m = 3 (quantile identity and bitwise identity of the
/// unpermuted statistic).
pub fn equivalence_suite(seed: u64) -> Result<EquivalenceReport> {
    let mut checks = Vec::new();

    // regularized statistic vs quadruple-sum oracle
    let started = std::time::Instant::now();
    let eta_tol = 1e-8;
    let mut eta_max = 0.0f64;
    let mut eta_cases = 0usize;
    let bandwidths = [0.5, 2.0];
    let kinds = [FilterKind::Tikhonov, FilterKind::Showalter];
    let lambdas = [1e-4, 0.1, 1.0];
    for instance in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(instance));
        let x = shifted_normal(8 + 6, 2, 0.0, &mut rng);
        let y = shifted_normal(8 + 6, 2, 1.0, &mut rng);
        let split = split_samples(&x, &y, 6, &mut rng)?;
        for &h in &bandwidths {
            let kernel = Kernel::new(KernelFamily::Gaussian, h)?;
            for kind in kinds {
                for &lam in &lambdas {
                    let reg = Regularizer::new(kind, lam)?;
                    let fast = fast_statistic(&split, &kernel, &reg)?;
                    let slow = eta_hat_bruteforce(&split, &kernel, &reg)?;
                    let rel = (fast - slow).abs() / slow.abs().max(1e-12);
                    eta_max = eta_max.max(rel);
                    eta_cases += 1;
                }
            }
        }
    }
    checks.push(CheckResult {
        name: "regularized statistic vs quadruple-sum oracle",
        cases: eta_cases,
        max_rel_err: eta_max,
        tolerance: eta_tol,
        passed: eta_max <= eta_tol,
        seconds: started.elapsed().as_secs_f64(),
    });

    // MMD matrix form vs naive loops
    let started = std::time::Instant::now();
    let mmd_tol = 1e-12;
    let mut mmd_max = 0.0f64;
    for instance in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000 + instance));
        let n = 10 + (instance as usize * 7) % 41;
        let m = 10 + (instance as usize * 11) % 41;
        let d = 1 + (instance as usize) % 3;
        let x = shifted_normal(n, d, 0.0, &mut rng);
        let y = shifted_normal(m, d, 1.0, &mut rng);
        let kernel = Kernel::new(KernelFamily::Gaussian, 1.0)?;
        let k_xx = gram(&kernel, &x, &x)?;
        let k_yy = gram(&kernel, &y, &y)?;
        let k_xy = gram(&kernel, &x, &y)?;
        let fast = mmd_u_stat(&k_xx, &k_yy, &k_xy)?;
        let slow = mmd_bruteforce(&x, &y, &kernel)?;
        let rel = (fast - slow).abs() / slow.abs().max(1e-12);
        mmd_max = mmd_max.max(rel);
    }
    checks.push(CheckResult {
        name: "MMD matrix form vs naive loops",
        cases: 50,
        max_rel_err: mmd_max,
        tolerance: mmd_tol,
        passed: mmd_max <= mmd_tol,
        seconds: started.elapsed().as_secs_f64(),
    });

    // exhaustive permutation distribution at n = m = 3
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(5000));
    let x = shifted_normal(3 + 4, 2, 0.0, &mut rng);
    let y = shifted_normal(3 + 4, 2, 1.0, &mut rng);
    let split = split_samples(&x, &y, 4, &mut rng)?;
    let kernel = Kernel::new(KernelFamily::Gaussian, 1.0)?;
    let reg = Regularizer::new(FilterKind::Tikhonov, 0.1)?;
    let n = split.n();
    let m = split.m();
    let mut pooled = Array2::zeros((n + m, 2));
    pooled.slice_mut(s![..n, ..]).assign(&split.x_main);
    pooled.slice_mut(s![n.., ..]).assign(&split.y_main);
    let k_pool = gram(&kernel, &pooled, &pooled)?;
    let k_pool_s = gram(&kernel, &pooled, &split.z)?;
    let k_s = gram(&kernel, &split.z, &split.z)?;
    let eigs = centered_kernel_eigs(&k_s)?;
    let g = filter_matrix(&eigs, &reg);
    let q = pooled_operator(&k_pool, &k_pool_s, &g, reg.at_zero(), n, m)?;

    let all = exhaustive_permutation_distribution(&q)?;
    let quantile = permutation_quantile(&all, 0.95)?;
    let mut sorted = all.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let k = (0.95 * all.len() as f64).ceil() as usize;
    let manual = sorted[k - 1];
    let quantile_exact = quantile.to_bits() == manual.to_bits();

    let idx_x: Vec<usize> = (0..n).collect();
    let idx_y: Vec<usize> = (n..n + m).collect();
    let observed = regularized_stat(&q, &idx_x, &idx_y)?;
    let identity_bitwise = all[0].to_bits() == observed.to_bits();

    let enumeration_seconds = started.elapsed().as_secs_f64();
    checks.push(CheckResult {
        name: "exhaustive permutation quantile (720 permutations)",
        cases: all.len(),
        max_rel_err: if quantile_exact { 0.0 } else { f64::INFINITY },
        tolerance: 0.0,
        passed: quantile_exact,
        seconds: enumeration_seconds,
    });
    checks.push(CheckResult {
        name: "identity permutation reproduces observed statistic bitwise",
        cases: 1,
        max_rel_err: if identity_bitwise { 0.0 } else { f64::INFINITY },
        tolerance: 0.0,
        passed: identity_bitwise,
        seconds: enumeration_seconds,
    });

    Ok(EquivalenceReport { checks })
}
