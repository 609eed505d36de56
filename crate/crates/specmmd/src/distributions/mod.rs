//! Seeded samplers for the synthetic experiment families, plus dataset
//! ingestion (CSV, MNIST IDX). Samplers are pure functions of their inputs
//! and the RNG stream; none evaluates a density normalizer.

mod io;

pub use io::{load_csv, load_mnist_7x7};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Hard cap on consecutive rejection-sampler misses before giving up.
pub const REJECTION_CAP: u64 = 1_000_000;

/// I.i.d. rows from N(mean, variance·I_d).
pub fn sample_gaussian(
    d: usize,
    mean: &Array1<f64>,
    variance: f64,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Array2<f64>> {
    if mean.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "mean has {} coordinates, expected {d}",
            mean.len()
        )));
    }
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::InvalidParameter(format!("variance must be positive, got {variance}")));
    }
    let sd = variance.sqrt();
    Ok(Array2::from_shape_fn((n, d), |(_, j)| {
        let g: f64 = StandardNormal.sample(rng);
        mean[j] + sd * g
    }))
}

/// I.i.d. rows with independent standard-Cauchy coordinates shifted by
/// `median_shift`, generated by the inverse CDF tan(pi (u - 1/2)).
pub fn sample_cauchy(d: usize, median_shift: f64, n: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| {
        let u: f64 = rng.random();
        median_shift + (std::f64::consts::PI * (u - 0.5)).tan()
    })
}

/// The compactly supported mean-zero bump driving the perturbed-uniform
/// density: one positive lobe on (-1, -1/2), one mirrored negative lobe on
/// (-1/2, 0), zero elsewhere.
pub fn perturbation_bump(x: f64) -> f64 {
    if x > -1.0 && x < -0.5 {
        let t = 4.0 * x + 3.0;
        (-1.0 / (1.0 - t * t)).exp()
    } else if x > -0.5 && x < 0.0 {
        let t = 4.0 * x + 1.0;
        -(-1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

/// Perturbed uniform on [0,1]^d: density
/// 1 + c_d P^{-1} Σ_v w_v Π_i bump(P x_i - v_i) with signs w in {-1,+1}^{P^d}.
#[derive(Clone, Debug)]
pub struct PerturbedUniformSpec {
    d: usize,
    perturbations: usize,
    signs: Vec<f64>,
    amplitude: f64,
}

impl PerturbedUniformSpec {
    /// Default amplitudes: 2.7 in one dimension, 7.3 in two.
    pub fn new(d: usize, perturbations: usize, signs: Vec<f64>) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::InvalidParameter(format!(
                "perturbed uniform supports d in {{1,2}}, got {d}"
            )));
        }
        if perturbations == 0 {
            return Err(Error::InvalidParameter("need at least one perturbation cell".into()));
        }
        let cells = perturbations.pow(d as u32);
        if signs.len() != cells {
            return Err(Error::DimensionMismatch(format!(
                "need {cells} signs for P={perturbations}, d={d}; got {}",
                signs.len()
            )));
        }
        if signs.iter().any(|&w| w != 1.0 && w != -1.0) {
            return Err(Error::InvalidParameter("signs must be +1 or -1".into()));
        }
        let amplitude = if d == 1 { 2.7 } else { 7.3 };
        let max_dip = amplitude / perturbations as f64 * (-(d as f64)).exp();
        if max_dip > 1.0 {
            return Err(Error::InvalidParameter(
                "amplitude would drive the density negative".into(),
            ));
        }
        Ok(Self {
            d,
            perturbations,
            signs,
            amplitude,
        })
    }

    /// Fresh uniformly random signs for P^d cells.
    pub fn random_signs(d: usize, perturbations: usize, rng: &mut impl Rng) -> Vec<f64> {
        let cells = perturbations.pow(d as u32);
        (0..cells)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn perturbations(&self) -> usize {
        self.perturbations
    }

    /// Upper bound on the density, used as the rejection envelope.
    pub fn envelope(&self) -> f64 {
        1.0 + self.amplitude / self.perturbations as f64 * (-(self.d as f64)).exp()
    }

    /// Density at x (zero outside [0,1]^d). At most one perturbation cell is
    /// active per point since the bump support is one unit cell wide.
    pub fn density(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.d, "point dimension mismatch");
        if x.iter().any(|&xi| !(0.0..=1.0).contains(&xi)) {
            return 0.0;
        }
        let p = self.perturbations as f64;
        let mut cell = 0usize;
        let mut product = 1.0;
        for &xi in x {
            let scaled = p * xi;
            let v = scaled.floor() + 1.0;
            if v < 1.0 || v > p {
                return 1.0;
            }
            let b = perturbation_bump(scaled - v);
            if b == 0.0 {
                return 1.0;
            }
            product *= b;
            cell = cell * self.perturbations + (v as usize - 1);
        }
        1.0 + self.amplitude / p * self.signs[cell] * product
    }
}

/// Rejection sampling against the uniform proposal on [0,1]^d.
pub fn sample_perturbed_uniform(
    spec: &PerturbedUniformSpec,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Array2<f64>> {
    let envelope = spec.envelope();
    let d = spec.dim();
    let mut out = Array2::zeros((n, d));
    let mut point = vec![0.0; d];
    for i in 0..n {
        let mut misses = 0u64;
        loop {
            for c in point.iter_mut() {
                *c = rng.random();
            }
            let u: f64 = rng.random();
            if u * envelope <= spec.density(&point) {
                break;
            }
            misses += 1;
            if misses >= REJECTION_CAP {
                return Err(Error::RejectionCap(REJECTION_CAP));
            }
        }
        for (j, &c) in point.iter().enumerate() {
            out[[i, j]] = c;
        }
    }
    Ok(out)
}

fn normalize(v: &mut Array1<f64>) -> Result<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::InvalidParameter("direction vector must be nonzero".into()));
    }
    v.mapv_inplace(|x| x / norm);
    Ok(())
}

fn uniform_sphere_point(d: usize, rng: &mut impl Rng) -> Array1<f64> {
    loop {
        let mut v = Array1::from_shape_fn(d, |_| {
            let g: f64 = StandardNormal.sample(rng);
            g
        });
        if normalize(&mut v).is_ok() {
            return v;
        }
    }
}

/// Uniform draws on the unit sphere S^{d-1}.
pub fn sample_uniform_sphere(d: usize, n: usize, rng: &mut impl Rng) -> Result<Array2<f64>> {
    if d < 2 {
        return Err(Error::InvalidParameter("spherical samplers need d >= 2".into()));
    }
    let mut out = Array2::zeros((n, d));
    for i in 0..n {
        out.row_mut(i).assign(&uniform_sphere_point(d, rng));
    }
    Ok(out)
}

/// Random unit vector orthogonal to `mu`.
fn tangent_direction(mu: &Array1<f64>, rng: &mut impl Rng) -> Array1<f64> {
    loop {
        let g = uniform_sphere_point(mu.len(), rng);
        let proj = mu.dot(&g);
        let mut v = &g - &(mu * proj);
        if normalize(&mut v).is_ok() {
            return v;
        }
    }
}

/// Von Mises-Fisher draws on S^{d-1} via the tangent-normal decomposition
/// with Wood's rejection scheme for the mean-direction cosine; concentration
/// zero falls back to the uniform sphere.
pub fn sample_vmf(
    d: usize,
    mu: &Array1<f64>,
    concentration: f64,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Array2<f64>> {
    if d < 2 {
        return Err(Error::InvalidParameter("spherical samplers need d >= 2".into()));
    }
    if mu.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "mean direction has {} coordinates, expected {d}",
            mu.len()
        )));
    }
    if !(concentration.is_finite() && concentration >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "concentration must be non-negative, got {concentration}"
        )));
    }
    if concentration == 0.0 {
        return sample_uniform_sphere(d, n, rng);
    }
    let mut mean = mu.clone();
    normalize(&mut mean)?;

    let k = concentration;
    let dm1 = (d - 1) as f64;
    let b = dm1 / (2.0 * k + (4.0 * k * k + dm1 * dm1).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = k * x0 + dm1 * (1.0 - x0 * x0).ln();
    let beta = Beta::new(dm1 / 2.0, dm1 / 2.0)
        .map_err(|e| Error::InvalidParameter(format!("beta parameters: {e}")))?;

    let mut out = Array2::zeros((n, d));
    for i in 0..n {
        let mut misses = 0u64;
        let t = loop {
            let z: f64 = beta.sample(rng);
            let t = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
            let u: f64 = rng.random();
            if k * t + dm1 * (1.0 - x0 * t).ln() - c >= u.ln() {
                break t;
            }
            misses += 1;
            if misses >= REJECTION_CAP {
                return Err(Error::RejectionCap(REJECTION_CAP));
            }
        };
        let tangent = tangent_direction(&mean, rng);
        let sine = (1.0 - t * t).max(0.0).sqrt();
        let mut row = &mean * t + &tangent * sine;
        normalize(&mut row)?;
        out.row_mut(i).assign(&row);
    }
    Ok(out)
}

/// Watson draws on S^{d-1} by rejection from the uniform sphere with
/// acceptance probability exp(k ((muᵀx)² - 1)); cost grows like e^k.
pub fn sample_watson(
    d: usize,
    mu: &Array1<f64>,
    concentration: f64,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Array2<f64>> {
    if d < 2 {
        return Err(Error::InvalidParameter("spherical samplers need d >= 2".into()));
    }
    if mu.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "mean direction has {} coordinates, expected {d}",
            mu.len()
        )));
    }
    if !(concentration.is_finite() && concentration >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "concentration must be non-negative, got {concentration}"
        )));
    }
    let mut mean = mu.clone();
    normalize(&mut mean)?;
    let mut out = Array2::zeros((n, d));
    for i in 0..n {
        let mut misses = 0u64;
        loop {
            let x = uniform_sphere_point(d, rng);
            let dot = mean.dot(&x);
            let u: f64 = rng.random();
            if u <= (concentration * (dot * dot - 1.0)).exp() {
                out.row_mut(i).assign(&x);
                break;
            }
            misses += 1;
            if misses >= REJECTION_CAP {
                return Err(Error::RejectionCap(REJECTION_CAP));
            }
        }
    }
    Ok(out)
}

/// Equal-weight mixture of two Watson components sharing one concentration.
/// Mean directions are normalized before use.
pub fn sample_watson_mixture(
    d: usize,
    mu1: &Array1<f64>,
    mu2: &Array1<f64>,
    concentration: f64,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((n, d));
    for i in 0..n {
        let mu = if rng.random_bool(0.5) { mu1 } else { mu2 };
        let row = sample_watson(d, mu, concentration, 1, rng)?;
        out.row_mut(i).assign(&row.row(0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::substream_rng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bump_lobe_peaks() {
        assert_abs_diff_eq!(perturbation_bump(-0.75), (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(perturbation_bump(-0.25), -(-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn bump_vanishes_off_support() {
        for x in [-1.0, -0.5, 0.0, 0.3, 1.7, -2.0] {
            assert_eq!(perturbation_bump(x), 0.0, "x = {x}");
        }
    }

    #[test]
    fn bump_integrates_to_zero() {
        // composite Simpson over [-1, 0]
        let steps = 20_000usize;
        let h = 1.0 / steps as f64;
        let mut integral = perturbation_bump(-1.0) + perturbation_bump(0.0);
        for i in 1..steps {
            let x = -1.0 + i as f64 * h;
            let w = if i % 2 == 0 { 2.0 } else { 4.0 };
            integral += w * perturbation_bump(x);
        }
        integral *= h / 3.0;
        assert!(integral.abs() <= 1e-8, "integral {integral}");
    }

    #[test]
    fn perturbed_density_single_cell_value() {
        // d=1, P=1, w=+1 at x=1/4: 1 + 2.7 e^{-1}
        let spec = PerturbedUniformSpec::new(1, 1, vec![1.0]).unwrap();
        assert_abs_diff_eq!(
            spec.density(&[0.25]),
            1.0 + 2.7 * (-1.0f64).exp(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn perturbed_density_non_negative_on_grid() {
        let mut rng = substream_rng(17, &[]);
        for p in 1..=6usize {
            let signs = PerturbedUniformSpec::random_signs(1, p, &mut rng);
            let spec = PerturbedUniformSpec::new(1, p, signs).unwrap();
            for i in 0..10_000 {
                let x = (i as f64 + 0.5) / 10_000.0;
                assert!(spec.density(&[x]) >= 0.0, "P={p}, x={x}");
            }
        }
        for p in 1..=3usize {
            let all_minus = vec![-1.0; p * p];
            let spec = PerturbedUniformSpec::new(2, p, all_minus).unwrap();
            for i in 0..100 {
                for j in 0..100 {
                    let x = [(i as f64 + 0.5) / 100.0, (j as f64 + 0.5) / 100.0];
                    assert!(spec.density(&x) >= 0.0, "P={p}, x={x:?}");
                }
            }
        }
    }

    #[test]
    fn perturbed_sampler_mean_and_acceptance() {
        // Balanced signs keep the coordinate mean at exactly 1/2; the
        // acceptance rate approaches 1/envelope.
        let spec = PerturbedUniformSpec::new(1, 2, vec![1.0, -1.0]).unwrap();
        let mut rng = substream_rng(23, &[]);
        let n = 50_000;
        let draws = sample_perturbed_uniform(&spec, n, &mut rng).unwrap();
        let mean = draws.column(0).sum() / n as f64;
        assert!((mean - 0.5).abs() <= 0.01, "mean {mean}");

        // acceptance-rate identity, counted through a wrapped RNG pass
        let mut rng2 = substream_rng(23, &[1]);
        let mut accepted = 0usize;
        let mut proposals = 0usize;
        let envelope = spec.envelope();
        while accepted < 20_000 {
            let x: f64 = rng2.random();
            let u: f64 = rng2.random();
            proposals += 1;
            if u * envelope <= spec.density(&[x]) {
                accepted += 1;
            }
        }
        let rate = accepted as f64 / proposals as f64;
        assert!((rate - 1.0 / envelope).abs() <= 0.02, "rate {rate}");
    }

    #[test]
    fn perturbed_two_dimensional_mean_is_centered() {
        let spec = PerturbedUniformSpec::new(2, 1, vec![1.0]).unwrap();
        let mut rng = substream_rng(29, &[]);
        let n = 50_000;
        let draws = sample_perturbed_uniform(&spec, n, &mut rng).unwrap();
        for j in 0..2 {
            let mean = draws.column(j).sum() / n as f64;
            assert!((mean - 0.5).abs() <= 0.01, "coordinate {j} mean {mean}");
        }
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = substream_rng(31, &[]);
        let n = 10_000;
        let mean = ndarray::array![1.0, 0.0];
        let draws = sample_gaussian(2, &mean, 4.0, n, &mut rng).unwrap();
        let m0 = draws.column(0).sum() / n as f64;
        let m1 = draws.column(1).sum() / n as f64;
        assert!((m0 - 1.0).abs() < 4.0 / (n as f64).sqrt() * 2.0, "mean {m0}");
        assert!(m1.abs() < 4.0 / (n as f64).sqrt() * 2.0, "mean {m1}");
        let var0 = draws.column(0).iter().map(|v| (v - m0) * (v - m0)).sum::<f64>() / n as f64;
        assert!((var0 - 4.0).abs() < 0.3, "variance {var0}");
    }

    #[test]
    fn cauchy_median_and_symmetry() {
        let mut rng = substream_rng(37, &[]);
        let n = 50_000;
        let shift = 0.7;
        let draws = sample_cauchy(1, shift, n, &mut rng);
        let mut col: Vec<f64> = draws.column(0).to_vec();
        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = col[n / 2];
        assert!((median - shift).abs() <= 0.05, "median {median}");

        let centered = sample_cauchy(1, 0.0, n, &mut substream_rng(38, &[]));
        let above = centered.column(0).iter().filter(|&&v| v > 0.0).count();
        let frac = above as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.01, "fraction {frac}");
    }

    #[test]
    fn cauchy_reproduces_inverse_cdf_bitwise() {
        let n = 64;
        let draws = sample_cauchy(2, 0.25, n, &mut substream_rng(39, &[]));
        let mut rng = substream_rng(39, &[]);
        for i in 0..n {
            for j in 0..2 {
                let u: f64 = rng.random();
                let want = 0.25 + (std::f64::consts::PI * (u - 0.5)).tan();
                assert_eq!(draws[[i, j]].to_bits(), want.to_bits());
            }
        }
    }

    fn resultant_length(draws: &Array2<f64>) -> f64 {
        let n = draws.nrows() as f64;
        (0..draws.ncols())
            .map(|j| {
                let s = draws.column(j).sum() / n;
                s * s
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn vmf_rows_unit_norm() {
        let mu = ndarray::array![0.0, 0.0, 1.0];
        let draws = sample_vmf(3, &mu, 50.0, 2_000, &mut substream_rng(41, &[])).unwrap();
        for row in draws.rows() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn vmf_zero_concentration_is_uniform() {
        let mu = ndarray::array![1.0, 0.0, 0.0];
        let n = 10_000;
        let draws = sample_vmf(3, &mu, 0.0, n, &mut substream_rng(43, &[])).unwrap();
        assert!(resultant_length(&draws) <= 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn vmf_concentrates_near_mean_direction() {
        let mu = ndarray::array![0.0, 1.0, 0.0];
        let n = 10_000;
        let draws = sample_vmf(3, &mu, 50.0, n, &mut substream_rng(47, &[])).unwrap();
        let mut mean = Array1::zeros(3);
        for row in draws.rows() {
            mean = mean + row;
        }
        normalize(&mut mean).unwrap();
        let angle = mean.dot(&mu).clamp(-1.0, 1.0).acos().to_degrees();
        assert!(angle <= 2.0, "angle {angle} degrees");
    }

    #[test]
    fn watson_axial_symmetry_and_norms() {
        let mu = ndarray::array![1.0, 1.0, 1.0]; // normalized internally
        let n = 50_000;
        let draws = sample_watson(3, &mu, 6.0, n, &mut substream_rng(53, &[])).unwrap();
        let mut unit = mu.clone();
        normalize(&mut unit).unwrap();
        let mut positive = 0usize;
        for row in draws.rows() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-12);
            if unit.dot(&row) > 0.0 {
                positive += 1;
            }
        }
        let frac = positive as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.01, "fraction {frac}");
    }

    #[test]
    fn watson_zero_concentration_is_uniform() {
        let mu = ndarray::array![0.0, 0.0, 1.0];
        let n = 10_000;
        let draws = sample_watson(3, &mu, 0.0, n, &mut substream_rng(59, &[])).unwrap();
        assert!(resultant_length(&draws) <= 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn watson_mixture_unit_norms() {
        let mu1 = ndarray::array![1.0, 1.0, 1.0, 1.0];
        let mu2 = ndarray::array![-1.0, 1.0, 1.0, 1.0];
        let draws =
            sample_watson_mixture(4, &mu1, &mu2, 4.0, 500, &mut substream_rng(61, &[])).unwrap();
        assert_eq!(draws.nrows(), 500);
        for row in draws.rows() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn samplers_are_seed_deterministic() {
        let mu = ndarray::array![0.0, 1.0, 0.0];
        let a = sample_vmf(3, &mu, 5.0, 50, &mut substream_rng(67, &[2])).unwrap();
        let b = sample_vmf(3, &mu, 5.0, 50, &mut substream_rng(67, &[2])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spec_validation() {
        assert!(PerturbedUniformSpec::new(3, 1, vec![1.0]).is_err());
        assert!(PerturbedUniformSpec::new(1, 2, vec![1.0]).is_err());
        assert!(PerturbedUniformSpec::new(1, 1, vec![0.5]).is_err());
        assert!(sample_uniform_sphere(1, 5, &mut substream_rng(1, &[])).is_err());
    }
}
