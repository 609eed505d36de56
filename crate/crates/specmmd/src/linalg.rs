//! Dense symmetric eigendecomposition via cyclic Jacobi rotations.
//!
//! The matrices handled here are small (the s×s centered Gram of the
//! covariance block), where Jacobi is accurate and its eigenvectors are
//! orthonormal to machine precision. Storage is flat row-major; rotations
//! skip entries that are already negligible against their diagonal.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix.
///
/// Returns unsorted eigenvalues and the matrix whose columns are the matching
/// eigenvectors, so `a = v · diag(values) · vᵀ`.
pub fn sym_eigen<T: Scalar>(a: &Array2<T>) -> Result<(Vec<T>, Array2<T>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("symmetric eigendecomposition input"));
    }
    if n == 0 {
        return Ok((Vec::new(), Array2::zeros((0, 0))));
    }

    let mut m: Vec<T> = a.iter().copied().collect();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let frob = m.iter().map(|x| *x * *x).sum::<T>().sqrt();
    let tol = T::epsilon() * frob.max(T::min_positive_value());

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&m, n) <= tol {
            return Ok(collect(m, v, n));
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut m, &mut v, n, p, q);
            }
        }
    }
    if off_diagonal_norm(&m, n) <= tol * real(1e3) {
        return Ok(collect(m, v, n));
    }
    Err(Error::EigenFailure)
}

fn collect<T: Scalar>(m: Vec<T>, v: Vec<T>, n: usize) -> (Vec<T>, Array2<T>) {
    let values = (0..n).map(|i| m[i * n + i]).collect();
    let vectors = Array2::from_shape_vec((n, n), v).expect("square buffer");
    (values, vectors)
}

fn off_diagonal_norm<T: Scalar>(m: &[T], n: usize) -> T {
    let mut acc = T::zero();
    for p in 0..n {
        for q in p + 1..n {
            let x = m[p * n + q];
            acc += x * x;
        }
    }
    (acc + acc).sqrt()
}

#[inline]
fn rotate<T: Scalar>(m: &mut [T], v: &mut [T], n: usize, p: usize, q: usize) {
    let apq = m[p * n + q];
    let app = m[p * n + p];
    let aqq = m[q * n + q];
    // negligible against the diagonal: zero it and move on
    if apq.abs() <= T::epsilon() * (app.abs() + aqq.abs()) {
        m[p * n + q] = T::zero();
        m[q * n + p] = T::zero();
        return;
    }
    let theta = (aqq - app) / (real::<T>(2.0) * apq);
    let t = if theta >= T::zero() {
        T::one() / (theta + (theta * theta + T::one()).sqrt())
    } else {
        -T::one() / (-theta + (theta * theta + T::one()).sqrt())
    };
    let c = T::one() / (t * t + T::one()).sqrt();
    let s = t * c;

    m[p * n + p] = app - t * apq;
    m[q * n + q] = aqq + t * apq;
    m[p * n + q] = T::zero();
    m[q * n + p] = T::zero();
    for i in 0..n {
        if i == p || i == q {
            continue;
        }
        let aip = m[i * n + p];
        let aiq = m[i * n + q];
        let new_p = c * aip - s * aiq;
        let new_q = s * aip + c * aiq;
        m[i * n + p] = new_p;
        m[p * n + i] = new_p;
        m[i * n + q] = new_q;
        m[q * n + i] = new_q;
    }
    for i in 0..n {
        let vip = v[i * n + p];
        let viq = v[i * n + q];
        v[i * n + p] = c * vip - s * viq;
        v[i * n + q] = s * vip + c * viq;
    }
}

/// Eigenvalues/vectors sorted by descending eigenvalue.
pub fn sym_eigen_desc<T: Scalar>(a: &Array2<T>) -> Result<(Vec<T>, Array2<T>)> {
    let (values, vectors) = sym_eigen(a)?;
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).expect("finite eigenvalues"));
    let sorted_values: Vec<T> = order.iter().map(|&i| values[i]).collect();
    let mut sorted_vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        sorted_vectors.column_mut(dst).assign(&vectors.column(src));
    }
    Ok((sorted_values, sorted_vectors))
}
