use l12prox::linalg::{partial_svd, PowerOptions};
use l12prox::prox::prox_nuc_minus_frob;
use l12prox::rng::seeded;
use l12prox::{Matrix, PenaltyWeight, ThinSvd};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(m: usize, n: usize, seed: u64) -> Matrix {
    let mut rng = seeded(seed);
    Matrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))
}

#[test]
fn random_dense_top_five() {
    let opts = PowerOptions { max_iters: 1000, tol: 1e-9, ..PowerOptions::default() };
    for seed in 0..5 {
        let a = gaussian(40, 60, seed);
        let dense = ThinSvd::from_dense(&a);
        let part = partial_svd(&a, 5, None, &opts).unwrap();
        assert!(part.converged);
        for i in 0..5 {
            assert!((part.svd.sigma[i] - dense.sigma[i]).abs() <= 1e-6, "seed {seed} σ{i}");
        }
    }
}

#[test]
fn warm_start_needs_fewer_sweeps() {
    let a = gaussian(50, 70, 9);
    let opts = PowerOptions { max_iters: 1000, tol: 1e-8, ..PowerOptions::default() };
    let cold = partial_svd(&a, 4, None, &opts).unwrap();
    let nudged = &a + gaussian(50, 70, 10) * 1e-6;
    let warm = partial_svd(&nudged, 4, Some(&cold.svd), &opts).unwrap();
    assert!(warm.converged);
    assert!(warm.iterations < cold.iterations);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn factors_are_orthonormal(m in 2usize..30, n in 2usize..30, k in 1usize..6, seed in any::<u64>()) {
        let a = gaussian(m, n, seed);
        let k = k.min(m.min(n));
        let out = partial_svd(&a, k, None, &PowerOptions::default()).unwrap().svd;
        let eye = Matrix::identity(out.rank(), out.rank());
        prop_assert!((out.u.tr_mul(&out.u) - &eye).norm() <= 1e-8);
        prop_assert!((out.v.tr_mul(&out.v) - &eye).norm() <= 1e-8);
        prop_assert!(out.sigma.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    /// Low-rank-plus-small-noise matrices, as seen inside the completion
    /// solver: the prox through the partial SVD matches the dense one.
    #[test]
    fn prox_through_partial_svd(m in 5usize..50, n in 5usize..70, r in 1usize..4, seed in any::<u64>()) {
        let a = gaussian(m, r, seed) * gaussian(r, n, seed ^ 7) * 3.0 + gaussian(m, n, seed ^ 11) * 0.05;
        let dense = ThinSvd::from_dense(&a);
        let lambda = 0.5 * (dense.sigma[r - 1] + dense.sigma[r]);
        let w = PenaltyWeight::new(lambda).unwrap();
        let reference = prox_nuc_minus_frob(&dense, w).unwrap().to_dense();
        let opts = PowerOptions { max_iters: 300, tol: 1e-10, ..PowerOptions::default() };
        let part = partial_svd(&a, r + 1, None, &opts).unwrap();
        let ours = prox_nuc_minus_frob(&part.svd, w).unwrap().to_dense();
        prop_assert!((ours - reference).norm() <= 1e-6);
    }
}
