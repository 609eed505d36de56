//! Enumeration oracles for the permutation machinery: exact quantiles,
//! bitwise identity reproduction, sampled-vs-exhaustive consistency, and the
//! order-statistic size guarantee.

use itertools::Itertools;
use ndarray::{s, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use specmmd::kernels::{gram, Kernel, KernelFamily};
use specmmd::reference::exhaustive_permutation_distribution;
use specmmd::seed::substream_rng;
use specmmd::spectral::{
    centered_kernel_eigs, filter_matrix, pooled_operator, regularized_stat, FilterKind,
    PooledOperator, Regularizer,
};
use specmmd::testing::{
    permutation_quantile, permutation_statistics, split_samples, mmd_permutation_test,
};

fn randn(n: usize, d: usize, shift: f64, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| {
        let g: f64 = StandardNormal.sample(rng);
        g + shift
    })
}

fn build_q(seed: u64, shift: f64) -> (PooledOperator<f64>, usize, usize) {
    let mut rng = substream_rng(seed, &[1]);
    let x = randn(3 + 4, 2, 0.0, &mut rng);
    let y = randn(3 + 4, 2, shift, &mut rng);
    let split = split_samples(&x, &y, 4, &mut rng).unwrap();
    let kernel = Kernel::new(KernelFamily::Gaussian, 1.0).unwrap();
    let reg = Regularizer::new(FilterKind::Tikhonov, 0.1).unwrap();
    let n = split.n();
    let m = split.m();
    let mut pooled = Array2::zeros((n + m, 2));
    pooled.slice_mut(s![..n, ..]).assign(&split.x_main);
    pooled.slice_mut(s![n.., ..]).assign(&split.y_main);
    let k_pool = gram(&kernel, &pooled, &pooled).unwrap();
    let k_pool_s = gram(&kernel, &pooled, &split.z).unwrap();
    let k_s = gram(&kernel, &split.z, &split.z).unwrap();
    let eigs = centered_kernel_eigs(&k_s).unwrap();
    let g = filter_matrix(&eigs, &reg);
    let q = pooled_operator(&k_pool, &k_pool_s, &g, reg.at_zero(), n, m).unwrap();
    (q, n, m)
}

#[test]
fn exhaustive_quantile_matches_order_statistic_definition() {
    let (q, n, m) = build_q(42, 1.0);
    let all = exhaustive_permutation_distribution(&q).unwrap();
    assert_eq!(all.len(), 720);

    let mut sorted = all.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for level in [0.5, 0.9, 0.95, 0.99, 1.0] {
        let got = permutation_quantile(&all, level).unwrap();
        let k = (level * 720.0).ceil() as usize;
        assert_eq!(got.to_bits(), sorted[k - 1].to_bits(), "level {level}");
    }

    // identity permutation comes first in lexicographic enumeration and must
    // reproduce the observed statistic bitwise
    let idx_x: Vec<usize> = (0..n).collect();
    let idx_y: Vec<usize> = (n..n + m).collect();
    let observed = regularized_stat(&q, &idx_x, &idx_y).unwrap();
    assert_eq!(all[0].to_bits(), observed.to_bits());
}

#[test]
fn sampled_permutations_live_in_the_exhaustive_multiset() {
    let (q, _, _) = build_q(7, 0.5);
    let all = exhaustive_permutation_distribution(&q).unwrap();
    let mut rng = substream_rng(7, &[2]);
    let sampled = permutation_statistics(&q, 720, &mut rng).unwrap();
    for v in sampled {
        assert!(
            all.iter().any(|a| a.to_bits() == v.to_bits()),
            "sampled statistic {v} not among the 720 exact values"
        );
    }
}

#[test]
fn exact_test_size_bound_on_every_dataset() {
    // For each dataset, at most floor(alpha * 720) of the 720 permuted
    // statistics lie strictly above the exact 0.95 quantile.
    let cap = (0.05f64 * 720.0).floor() as usize;
    for seed in 0..200u64 {
        let (q, _, _) = build_q(1000 + seed, 0.0);
        let all = exhaustive_permutation_distribution(&q).unwrap();
        let quant = permutation_quantile(&all, 0.95).unwrap();
        let above = all.iter().filter(|&&v| v > quant).count();
        assert!(above <= cap, "seed {seed}: {above} > {cap}");
    }
}

#[test]
fn mmd_sampled_permutations_match_exhaustive_set() {
    // N = M = 3 pooled MMD statistics: every sampled relabeling value equals
    // one of the 720 enumerated values.
    let mut rng = substream_rng(11, &[]);
    let x = randn(3, 1, 0.0, &mut rng);
    let y = randn(3, 1, 2.0, &mut rng);
    let kernel = Kernel::new(KernelFamily::Gaussian, 1.0).unwrap();

    let mut pooled = Array2::zeros((6, 1));
    pooled.slice_mut(s![..3, ..]).assign(&x);
    pooled.slice_mut(s![3.., ..]).assign(&y);
    let k = gram(&kernel, &pooled, &pooled).unwrap();
    let stat_of = |xs: &[usize], ys: &[usize]| {
        let mut kxx = 0.0;
        let mut dx = 0.0;
        let mut kyy = 0.0;
        let mut dy = 0.0;
        let mut kyx = 0.0;
        for &i in xs {
            for &j in xs {
                kxx += k[[i, j]];
            }
            dx += k[[i, i]];
        }
        for &i in ys {
            for &j in xs {
                kyx += k[[i, j]];
            }
            for &j in ys {
                kyy += k[[i, j]];
            }
            dy += k[[i, i]];
        }
        (kxx - dx) / 6.0 + (kyy - dy) / 6.0 - 2.0 * kyx / 9.0
    };
    let exhaustive: Vec<f64> = (0..6)
        .permutations(6)
        .map(|p| {
            let mut xs = p[..3].to_vec();
            let mut ys = p[3..].to_vec();
            xs.sort_unstable();
            ys.sort_unstable();
            stat_of(&xs, &ys)
        })
        .collect();
    assert_eq!(exhaustive.len(), 720);

    let out = mmd_permutation_test(&x, &y, &kernel, 0.05, 720, &mut substream_rng(11, &[3])).unwrap();
    for v in &out.per_config[0].null_stats {
        assert!(
            exhaustive.iter().any(|a| (a - v).abs() <= 1e-12),
            "sampled MMD statistic {v} not in exhaustive set"
        );
    }
    // identity relabeling reproduces the observed statistic
    let idx_x = [0usize, 1, 2];
    let idx_y = [3usize, 4, 5];
    assert!((stat_of(&idx_x, &idx_y) - out.per_config[0].statistic).abs() <= 1e-15);
}
