//! Spectral filters, the centered-Gram eigensystem, and the regularized
//! two-sample statistic assembled from pooled kernel blocks.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::sym_eigen_desc;
use crate::scalar::{count, real, Scalar};

/// Spectral filter family applied to covariance eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterKind {
    /// g(x) = 1 / (x + lambda)
    Tikhonov,
    /// g(x) = (1 - exp(-x/lambda)) / x, continued by 1/lambda at x = 0
    Showalter,
    /// g(x) = (1/x)·1{x >= lambda}; zero at the origin
    SpectralCutoff,
}

/// A spectral filter with its regularization parameter.
#[derive(Clone, Copy, Debug)]
pub struct Regularizer<T> {
    pub kind: FilterKind,
    lambda: T,
}

impl<T: Scalar> Regularizer<T> {
    pub fn new(kind: FilterKind, lambda: T) -> Result<Self> {
        if !(lambda.is_finite() && lambda > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self { kind, lambda })
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Filter value g(x) for x >= 0.
    ///
    /// The Showalter branch switches to the series 1/lambda - x/(2 lambda²)
    /// for x/lambda < 1e-8, where the direct form loses all precision to
    /// cancellation.
    pub fn value(&self, x: T) -> T {
        let x = x.max(T::zero());
        let lam = self.lambda;
        match self.kind {
            FilterKind::Tikhonov => T::one() / (x + lam),
            FilterKind::Showalter => {
                let t = x / lam;
                if t < real(1e-8) {
                    T::one() / lam - x / (real::<T>(2.0) * lam * lam)
                } else {
                    -(-t).exp_m1() / x
                }
            }
            FilterKind::SpectralCutoff => {
                if x >= lam {
                    T::one() / x
                } else {
                    T::zero()
                }
            }
        }
    }

    /// g(0): 1/lambda for Tikhonov and Showalter, 0 for the spectral cutoff.
    pub fn at_zero(&self) -> T {
        match self.kind {
            FilterKind::Tikhonov | FilterKind::Showalter => T::one() / self.lambda,
            FilterKind::SpectralCutoff => T::zero(),
        }
    }
}

/// Retained eigenpairs of the centered, scaled Gram matrix of the covariance
/// block: eigenvalues descending and strictly above `rank_epsilon`,
/// eigenvectors column-orthonormal.
#[derive(Clone, Debug)]
pub struct EigenSystem<T> {
    eigenvalues: Vec<T>,
    eigenvectors: Array2<T>,
    sample_count: usize,
    rank_epsilon: T,
}

impl<T: Scalar> EigenSystem<T> {
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Array2<T> {
        &self.eigenvectors
    }

    /// Number of retained eigenpairs.
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Size s of the covariance sample block.
    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn rank_epsilon(&self) -> T {
        self.rank_epsilon
    }
}

/// Double-center a square matrix: row means, column means and the grand mean
/// are subtracted, which equals H·K·H with H = I - 11ᵀ/s.
fn double_center<T: Scalar>(k: &Array2<T>) -> Array2<T> {
    let s = k.nrows();
    let sn = count::<T>(s);
    let row_means: Array1<T> = k.rows().into_iter().map(|r| r.sum() / sn).collect();
    let col_means: Array1<T> = k.columns().into_iter().map(|c| c.sum() / sn).collect();
    let grand = row_means.sum() / sn;
    let mut out = k.clone();
    for ((i, j), v) in out.indexed_iter_mut() {
        *v = *v - row_means[i] - col_means[j] + grand;
    }
    out
}

/// Eigendecomposition of (1/s)·H̃½·K_s·H̃½ where H̃½ = sqrt(s/(s-1))·H.
///
/// H is idempotent, so the product collapses to the double-centered Gram
/// scaled by 1/(s-1); no matrix square root is ever formed. Eigenvalues are
/// clamped at zero and pairs at or below `s·eps·lambda_max` are dropped as
/// numerical null space.
pub fn centered_kernel_eigs<T: Scalar>(k_s: &Array2<T>) -> Result<EigenSystem<T>> {
    let s = k_s.nrows();
    if k_s.ncols() != s {
        return Err(Error::DimensionMismatch(format!(
            "covariance-block Gram must be square, got {}x{}",
            k_s.nrows(),
            k_s.ncols()
        )));
    }
    if s < 2 {
        return Err(Error::InvalidParameter("need s >= 2 covariance samples".into()));
    }
    let scale = k_s.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let asym = k_s
        .indexed_iter()
        .fold(T::zero(), |acc, ((i, j), v)| acc.max((*v - k_s[[j, i]]).abs()));
    if asym > real::<T>(1e-8) * scale.max(T::one()) {
        return Err(Error::InvalidParameter("covariance-block Gram is not symmetric".into()));
    }

    let mut m = double_center(k_s);
    let inv = T::one() / count::<T>(s - 1);
    m.mapv_inplace(|v| v * inv);

    let (values, vectors) = sym_eigen_desc(&m)?;
    let lambda_max = values.first().copied().unwrap_or(T::zero()).max(T::zero());
    let rank_epsilon = count::<T>(s) * T::epsilon() * lambda_max;

    let retained: Vec<usize> = (0..values.len())
        .filter(|&i| values[i].max(T::zero()) > rank_epsilon)
        .collect();
    let mut eigenvalues = Vec::with_capacity(retained.len());
    let mut eigenvectors = Array2::zeros((s, retained.len()));
    for (dst, &src) in retained.iter().enumerate() {
        eigenvalues.push(values[src]);
        eigenvectors.column_mut(dst).assign(&vectors.column(src));
    }
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
        sample_count: s,
        rank_epsilon,
    })
}

/// Spectral weight matrix Σᵢ ((g(λ̂ᵢ) - g(0)) / λ̂ᵢ) α̂ᵢ α̂ᵢᵀ over the retained
/// eigenpairs. The dropped null space contributes only through the separate
/// g(0) identity term of the pooled operator.
pub fn filter_matrix<T: Scalar>(eigs: &EigenSystem<T>, reg: &Regularizer<T>) -> Array2<T> {
    let s = eigs.sample_count();
    let r = eigs.rank();
    if r == 0 {
        return Array2::zeros((s, s));
    }
    let coeffs = filter_coefficients(eigs, reg);
    let a = eigs.eigenvectors();
    let mut scaled = a.clone();
    for (mut col, c) in scaled.columns_mut().into_iter().zip(coeffs.iter()) {
        col.mapv_inplace(|v| v * *c);
    }
    scaled.dot(&a.t())
}

/// Per-eigenpair coefficients (g(λ̂ᵢ) - g(0)) / λ̂ᵢ.
pub(crate) fn filter_coefficients<T: Scalar>(eigs: &EigenSystem<T>, reg: &Regularizer<T>) -> Vec<T> {
    let g0 = reg.at_zero();
    eigs.eigenvalues()
        .iter()
        .map(|&l| (reg.value(l) - g0) / l)
        .collect()
}

/// The pooled operator Q over the concatenated main samples U = (X; Y):
/// Q_ij = ⟨g(Σ̂) K(·,U_i), K(·,U_j)⟩, assembled as
/// Q = g(0)·K_pool + (1/s)·K_pool_s·H̃½·G·H̃½·K_pool_sᵀ.
#[derive(Clone, Debug)]
pub struct PooledOperator<T> {
    q: Array2<T>,
    n: usize,
    m: usize,
    g_at_zero: T,
}

impl<T: Scalar> PooledOperator<T> {
    /// Wrap an already-assembled pooled matrix (test plumbing).
    #[cfg(test)]
    pub(crate) fn from_matrix(q: Array2<T>, n: usize, m: usize, g_at_zero: T) -> Result<Self> {
        if q.nrows() != n + m || q.ncols() != n + m {
            return Err(Error::DimensionMismatch(format!(
                "pooled matrix must be {}x{}, got {}x{}",
                n + m,
                n + m,
                q.nrows(),
                q.ncols()
            )));
        }
        Ok(Self { q, n, m, g_at_zero })
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn g_at_zero(&self) -> T {
        self.g_at_zero
    }
}

/// Assemble the pooled operator from the pooled Gram, the pooled-to-Z cross
/// Gram, the spectral weight matrix and g(0). `n` and `m` are the X and Y
/// block sizes of the pooled rows.
pub fn pooled_operator<T: Scalar>(
    k_pool: &Array2<T>,
    k_pool_s: &Array2<T>,
    g: &Array2<T>,
    g_at_zero: T,
    n: usize,
    m: usize,
) -> Result<PooledOperator<T>> {
    let total = n + m;
    let s = g.nrows();
    if k_pool.nrows() != total || k_pool.ncols() != total {
        return Err(Error::DimensionMismatch(format!(
            "pooled Gram must be {total}x{total}, got {}x{}",
            k_pool.nrows(),
            k_pool.ncols()
        )));
    }
    if k_pool_s.nrows() != total || k_pool_s.ncols() != s || g.ncols() != s {
        return Err(Error::DimensionMismatch(format!(
            "cross Gram must be {total}x{s} and G square, got {}x{} and {}x{}",
            k_pool_s.nrows(),
            k_pool_s.ncols(),
            g.nrows(),
            g.ncols()
        )));
    }
    if s < 2 {
        return Err(Error::InvalidParameter("need s >= 2 covariance samples".into()));
    }

    // H̃½ G H̃½ = (s/(s-1)) · HGH, and HGH is G double-centered.
    let mut core = double_center(g);
    let scale = count::<T>(s) / count::<T>(s - 1);
    core.mapv_inplace(|v| v * scale);

    let inv_s = T::one() / count::<T>(s);
    let spectral_part = k_pool_s.dot(&core).dot(&k_pool_s.t());
    let mut q = k_pool.mapv(|v| v * g_at_zero);
    q.zip_mut_with(&spectral_part, |a, b| *a += *b * inv_s);

    Ok(PooledOperator { q, n, m, g_at_zero })
}

/// Block sums of a symmetric pooled matrix for given disjoint index blocks:
/// returns (S_xx, diag_x, S_yy, diag_y, S_yx).
pub(crate) fn block_sums<T: Scalar>(q: &Array2<T>, idx_x: &[usize], idx_y: &[usize]) -> (T, T, T, T, T) {
    let data = q.as_slice().expect("pooled matrix in standard layout");
    let w = q.ncols();
    let mut s_xx = T::zero();
    let mut s_yy = T::zero();
    let mut s_yx = T::zero();
    let mut d_x = T::zero();
    let mut d_y = T::zero();
    for &i in idx_x {
        let row = &data[i * w..(i + 1) * w];
        for &j in idx_x {
            s_xx += row[j];
        }
        d_x += row[i];
    }
    for &i in idx_y {
        let row = &data[i * w..(i + 1) * w];
        for &j in idx_x {
            s_yx += row[j];
        }
        for &j in idx_y {
            s_yy += row[j];
        }
        d_y += row[i];
    }
    (s_xx, d_x, s_yy, d_y, s_yx)
}

/// U-statistic combination of the five block sums.
pub(crate) fn combine_blocks<T: Scalar>(
    s_xx: T,
    d_x: T,
    s_yy: T,
    d_y: T,
    s_yx: T,
    n: usize,
    m: usize,
) -> T {
    let nf = count::<T>(n);
    let mf = count::<T>(m);
    (s_xx - d_x) / (nf * (nf - T::one()))
        + (s_yy - d_y) / (mf * (mf - T::one()))
        - real::<T>(2.0) * s_yx / (nf * mf)
}

fn check_partition(total: usize, idx_x: &[usize], idx_y: &[usize]) -> Result<()> {
    if idx_x.len() < 2 || idx_y.len() < 2 {
        return Err(Error::InvalidParameter(
            "each block needs at least two indices".into(),
        ));
    }
    if idx_x.len() + idx_y.len() != total {
        return Err(Error::DimensionMismatch(format!(
            "index blocks cover {} of {total} pooled rows",
            idx_x.len() + idx_y.len()
        )));
    }
    let mut seen = vec![false; total];
    for &i in idx_x.iter().chain(idx_y.iter()) {
        if i >= total || seen[i] {
            return Err(Error::InvalidParameter(
                "index blocks must be disjoint and within range".into(),
            ));
        }
        seen[i] = true;
    }
    Ok(())
}

/// The regularized two-sample statistic evaluated on a block partition of the
/// pooled rows. May be negative; no flooring is applied, since permutation
/// thresholds compare raw values.
pub fn regularized_stat<T: Scalar>(
    q: &PooledOperator<T>,
    idx_x: &[usize],
    idx_y: &[usize],
) -> Result<T> {
    if idx_x.len() != q.n() || idx_y.len() != q.m() {
        return Err(Error::DimensionMismatch(format!(
            "index blocks must have sizes {}/{}, got {}/{}",
            q.n(),
            q.m(),
            idx_x.len(),
            idx_y.len()
        )));
    }
    check_partition(q.n() + q.m(), idx_x, idx_y)?;
    let (s_xx, d_x, s_yy, d_y, s_yx) = block_sums(q.matrix(), idx_x, idx_y);
    Ok(combine_blocks(s_xx, d_x, s_yy, d_y, s_yx, idx_x.len(), idx_y.len()))
}

/// Unbiased squared-MMD U-statistic from precomputed Gram blocks.
pub fn mmd_u_stat<T: Scalar>(k_xx: &Array2<T>, k_yy: &Array2<T>, k_xy: &Array2<T>) -> Result<T> {
    let n = k_xx.nrows();
    let m = k_yy.nrows();
    if k_xx.ncols() != n || k_yy.ncols() != m || k_xy.nrows() != n || k_xy.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "blocks must be {n}x{n}, {m}x{m}, {n}x{m}"
        )));
    }
    if n < 2 || m < 2 {
        return Err(Error::InvalidParameter("MMD U-statistic needs n, m >= 2".into()));
    }
    let s_xx = k_xx.sum();
    let d_x = k_xx.diag().sum();
    let s_yy = k_yy.sum();
    let d_y = k_yy.diag().sum();
    let s_yx = k_xy.sum();
    Ok(combine_blocks(s_xx, d_x, s_yy, d_y, s_yx, n, m))
}
