//! Kernel families, Gram matrices, and bandwidth selection.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};

/// Positive-definite kernel family. Both families satisfy K(x,x) = 1, so the
/// kernel sup bound is 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFamily {
    /// exp(-|x-y|₂² / 2h)
    Gaussian,
    /// exp(-|x-y|₁ / 2h)
    Laplacian,
}

impl KernelFamily {
    /// Distance used by the median heuristic for this family.
    pub fn metric(self) -> DistanceMetric {
        match self {
            KernelFamily::Gaussian => DistanceMetric::SqEuclidean,
            KernelFamily::Laplacian => DistanceMetric::L1,
        }
    }
}

/// A kernel: family plus strictly positive bandwidth.
#[derive(Clone, Copy, Debug)]
pub struct Kernel<T> {
    family: KernelFamily,
    bandwidth: T,
}

impl<T: Scalar> Kernel<T> {
    pub fn new(family: KernelFamily, bandwidth: T) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(Self { family, bandwidth })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    /// Evaluate K(x, y). Entries lie in (0, 1] for finite inputs.
    pub fn eval(&self, x: ArrayView1<T>, y: ArrayView1<T>) -> T {
        let two = real::<T>(2.0);
        match self.family {
            KernelFamily::Gaussian => {
                let mut sq = T::zero();
                for (a, b) in x.iter().zip(y.iter()) {
                    let d = *a - *b;
                    sq += d * d;
                }
                (-sq / (two * self.bandwidth)).exp()
            }
            KernelFamily::Laplacian => {
                let mut l1 = T::zero();
                for (a, b) in x.iter().zip(y.iter()) {
                    l1 += (*a - *b).abs();
                }
                (-l1 / (two * self.bandwidth)).exp()
            }
        }
    }
}

fn check_finite<T: Scalar>(m: &ArrayView2<T>, what: &'static str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

/// Gram matrix with entry (i, j) = K(row_i(a), row_j(b)).
///
/// When `a` and `b` are the same array the upper triangle is mirrored, so the
/// result is symmetric bit-for-bit.
pub fn gram<T: Scalar>(kernel: &Kernel<T>, a: &Array2<T>, b: &Array2<T>) -> Result<Array2<T>> {
    if a.ncols() != b.ncols() || a.ncols() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "gram inputs must share a positive column count, got {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    check_finite(&a.view(), "gram input A")?;
    let same = std::ptr::eq(a, b);
    if !same {
        check_finite(&b.view(), "gram input B")?;
    }

    let (n, m) = (a.nrows(), b.nrows());
    let mut k = Array2::zeros((n, m));
    if same {
        for i in 0..n {
            for j in i..m {
                let v = kernel.eval(a.row(i), b.row(j));
                k[[i, j]] = v;
                k[[j, i]] = v;
            }
        }
    } else {
        for i in 0..n {
            for j in 0..m {
                k[[i, j]] = kernel.eval(a.row(i), b.row(j));
            }
        }
    }
    Ok(k)
}

/// Distance used for the pairwise median.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceMetric {
    SqEuclidean,
    L1,
}

fn pair_distance<T: Scalar>(x: ArrayView1<T>, y: ArrayView1<T>, metric: DistanceMetric) -> T {
    match metric {
        DistanceMetric::SqEuclidean => {
            let mut sq = T::zero();
            for (a, b) in x.iter().zip(y.iter()) {
                let d = *a - *b;
                sq += d * d;
            }
            sq
        }
        DistanceMetric::L1 => {
            let mut l1 = T::zero();
            for (a, b) in x.iter().zip(y.iter()) {
                l1 += (*a - *b).abs();
            }
            l1
        }
    }
}

/// Median of the pairwise distances over all distinct unordered pairs of rows.
///
/// An even pair count takes the midpoint of the two central order statistics.
/// A zero median (all points identical) is reported as degenerate data.
pub fn median_heuristic<T: Scalar>(pooled: &Array2<T>, metric: DistanceMetric) -> Result<T> {
    let n = pooled.nrows();
    if n < 2 {
        return Err(Error::Empty("median heuristic needs at least two rows"));
    }
    check_finite(&pooled.view(), "median heuristic input")?;

    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            dists.push(pair_distance(pooled.row(i), pooled.row(j), metric));
        }
    }
    let len = dists.len();
    let mid = len / 2;
    let median = if len % 2 == 1 {
        *dists
            .select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite distances"))
            .1
    } else {
        let hi = *dists
            .select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite distances"))
            .1;
        let lo = dists[..mid]
            .iter()
            .copied()
            .fold(T::neg_infinity(), T::max);
        (lo + hi) / real(2.0)
    };
    if median <= T::zero() {
        return Err(Error::DegenerateData(
            "median pairwise distance is zero (all points identical?)".into(),
        ));
    }
    Ok(median)
}

/// Doubling sequence from `start`, capped at `cap`; the cap is appended when
/// the doublings do not land on it. Shared by the bandwidth and the
/// regularization grids.
pub(crate) fn doubling_grid<T: Scalar>(start: T, cap: T) -> Vec<T> {
    let rel = real::<T>(1e-9);
    let mut values = vec![start];
    loop {
        let next = *values.last().expect("non-empty") * real(2.0);
        if next <= cap * (T::one() + rel) {
            values.push(next);
        } else {
            break;
        }
    }
    let last = *values.last().expect("non-empty");
    if (cap - last) > rel * cap {
        values.push(cap);
    }
    values
}

/// Geometric bandwidth grid {w_L·h_m, 2·w_L·h_m, …} capped at w_U·h_m.
#[derive(Clone, Debug)]
pub struct BandwidthGrid<T> {
    values: Vec<T>,
}

impl<T: Scalar> BandwidthGrid<T> {
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Build the bandwidth grid from the median heuristic value `h_m` and the
/// span multipliers `w_l ≤ w_u`.
pub fn bandwidth_grid<T: Scalar>(h_m: T, w_l: T, w_u: T) -> Result<BandwidthGrid<T>> {
    if !(h_m.is_finite() && h_m > T::zero()) {
        return Err(Error::InvalidParameter(format!("h_m must be positive, got {h_m}")));
    }
    if !(w_l.is_finite() && w_u.is_finite() && w_l > T::zero() && w_l <= w_u) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < w_l <= w_u, got w_l={w_l} w_u={w_u}"
        )));
    }
    Ok(BandwidthGrid {
        values: doubling_grid(w_l * h_m, w_u * h_m),
    })
}
