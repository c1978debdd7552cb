//! Property suites for the spectral primitives and alignments: norm
//! orderings, orthogonal invariance, the min-distance sandwich, Procrustes
//! optimality against brute-force oracles, and determinism.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use specnoise_core::*;

fn rng(seed: u64) -> ChaCha8Rng {
    rng_from_seed(seed)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_frame(rng: &mut ChaCha8Rng, n: usize, r: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, n, r).qr().q()
}

/// Nearby frame pair with genuine (well above the acos floor) angles.
fn perturbed_pair(rng: &mut ChaCha8Rng, n: usize, r: usize, scale: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let u = random_frame(rng, n, r);
    let u_hat = (&u + gaussian_matrix(rng, n, r) * scale).qr().q();
    (u_hat, u)
}

#[test]
fn norm_chain_on_random_matrices() {
    // ||T||_max <= ||T||_{2->inf} <= ||T|| <= ||T||_F
    let mut rng = rng(101);
    for case in 0..120 {
        let n = 5 + (case % 40);
        let m = 1 + (case % 7);
        let t = gaussian_matrix(&mut rng, n, m);
        let norms = matrix_norms(&t);
        let t2i = two_to_inf_norm(&t);
        assert!(norms.max_abs <= t2i + 1e-12);
        assert!(t2i <= norms.spectral + 1e-9 * norms.spectral.max(1.0));
        assert!(norms.spectral <= norms.frobenius + 1e-9 * norms.frobenius.max(1.0));
    }
}

#[test]
fn spectral_norm_against_svd_oracle() {
    // independent oracle: nalgebra's Golub-Kahan SVD on 50 random 20x3 inputs
    let mut rng = rng(103);
    for _ in 0..50 {
        let t = gaussian_matrix(&mut rng, 20, 3);
        let oracle = t.clone().svd(false, false).singular_values[0];
        let norms = matrix_norms(&t);
        assert!((norms.spectral - oracle).abs() <= 1e-9 * oracle.max(1.0));
        assert!(two_to_inf_norm(&t) <= oracle + 1e-9);
        assert!(norms.max_abs <= two_to_inf_norm(&t) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn two_to_inf_invariant_under_right_rotation(
        seed in 0u64..1_000_000,
        n in 4usize..24,
        r in 1usize..4,
    ) {
        let mut rng = rng(seed);
        let t = gaussian_matrix(&mut rng, n, r);
        let q = random_frame(&mut rng, r, r);
        let base = two_to_inf_norm(&t);
        let rotated = two_to_inf_norm(&(&t * &q));
        prop_assert!((base - rotated).abs() <= 1e-12 * base.max(1.0));
    }

    #[test]
    fn procrustes_quadratic_closeness(
        seed in 0u64..1_000_000,
        r in 1usize..4,
    ) {
        // ||U^T U_hat - W|| <= ||sin Theta||^2 + 1e-9
        let mut rng = rng(seed);
        let (u_hat, u) = perturbed_pair(&mut rng, 18, r, 0.3);
        let w = procrustes_align(&u_hat, &u).unwrap().rotation;
        let angles = canonical_angles(&u_hat, &u).unwrap();
        let gap = matrix_norms(&(u.transpose() * &u_hat - &w)).spectral;
        let sin = angles.sin_theta_spectral();
        prop_assert!(gap <= sin * sin + 1e-9, "gap {} vs sin^2 {}", gap, sin * sin);
    }
}

#[test]
fn min_distance_sandwich_both_norms() {
    // ||sin Theta||_eta <= ||U_hat - U W||_eta <= sqrt(2) ||sin Theta||_eta
    let mut rng = rng(107);
    for case in 0..120 {
        let r = 1 + case % 3;
        let scale = [0.6, 0.25, 0.08, 0.02][case % 4];
        let (u_hat, u) = perturbed_pair(&mut rng, 24, r, scale);
        let w = procrustes_align(&u_hat, &u).unwrap().rotation;
        let diff = &u_hat - &u * &w;
        let angles = canonical_angles(&u_hat, &u).unwrap();
        let norms = matrix_norms(&diff);

        let sin_spec = angles.sin_theta_spectral();
        let sin_frob = angles.sin_theta_frobenius();
        let slack = 1e-7; // acos floor keeps tiny angles from resolving below sqrt(eps)
        assert!(sin_spec <= norms.spectral + slack);
        assert!(norms.spectral <= 2f64.sqrt() * sin_spec + slack);
        assert!(sin_frob <= norms.frobenius + slack);
        assert!(norms.frobenius <= 2f64.sqrt() * sin_frob + slack);
    }
}

#[test]
fn procrustes_beats_random_rotations() {
    // 100 random pairs, each compared against 1000 random orthogonal W'
    let mut rng = rng(109);
    for case in 0..100 {
        let r = 1 + case % 3;
        let (u_hat, u) = perturbed_pair(&mut rng, 16, r, 0.4);
        let w = procrustes_align(&u_hat, &u).unwrap().rotation;
        let best = (&u_hat - &u * &w).norm();
        for _ in 0..1000 {
            let candidate = random_frame(&mut rng, r, r);
            let cost = (&u_hat - &u * &candidate).norm();
            assert!(best <= cost + 1e-9, "candidate beat procrustes: {cost} < {best}");
        }
    }
}

#[test]
fn procrustes_beats_exhaustive_2x2_grid() {
    // brute-force oracle over O(2): rotations and reflections at 1e-3 step
    let mut rng = rng(111);
    let steps = 6284; // ~2 pi / 1e-3
    for _ in 0..100 {
        let (u_hat, u) = perturbed_pair(&mut rng, 12, 2, 0.5);
        let w = procrustes_align(&u_hat, &u).unwrap().rotation;
        let best = (&u_hat - &u * &w).norm();
        let mut grid_best = f64::INFINITY;
        for s in 0..steps {
            let theta = s as f64 * 1e-3;
            let (c, sn) = (theta.cos(), theta.sin());
            let rot = DMatrix::from_row_slice(2, 2, &[c, -sn, sn, c]);
            let refl = DMatrix::from_row_slice(2, 2, &[c, sn, sn, -c]);
            grid_best = grid_best
                .min((&u_hat - &u * rot).norm())
                .min((&u_hat - &u * refl).norm());
        }
        assert!(
            best <= grid_best + 1e-9,
            "grid found better rotation: {grid_best} < {best}"
        );
    }
}

#[test]
fn full_eig_reconstructs_to_relative_tolerance() {
    let mut rng = rng(113);
    for case in 0..20 {
        let n = 10 + 7 * case;
        let raw = gaussian_matrix(&mut rng, n, n);
        let m = SymmetricMatrix::from_upper(&raw + raw.transpose()).unwrap();
        let eig = full_eig(&m).unwrap();
        let d = DMatrix::from_fn(n, n, |i, j| if i == j { eig.values[i] } else { 0.0 });
        let recon = &eig.vectors * d * eig.vectors.transpose();
        let err = matrix_norms(&(recon - m.matrix())).spectral;
        let scale = matrix_norms(m.matrix()).spectral.max(1.0);
        assert!(err <= 1e-9 * scale, "reconstruction error {err} at n = {n}");
        assert!(specnoise_core::linalg::orthonormality_defect(&eig.vectors) <= 1e-10);
    }
}

#[test]
fn eigenvalue_order_and_trailing_complement() {
    let mut rng = rng(115);
    let raw = gaussian_matrix(&mut rng, 30, 30);
    let m = SymmetricMatrix::from_upper(&raw + raw.transpose()).unwrap();
    let eig = full_eig(&m).unwrap();
    for i in 1..30 {
        assert!(eig.values[i - 1].abs() >= eig.values[i].abs());
    }
    let pair = eig.leading(4).unwrap();
    let (u_perp, lambda_perp) = eig.trailing(4).unwrap();
    assert_eq!(u_perp.ncols(), 26);
    assert_eq!(lambda_perp.len(), 26);
    // complement is orthogonal to the leading frame
    let cross = matrix_norms(&(pair.frame().transpose() * &u_perp)).max_abs;
    assert!(cross <= 1e-10);
}

#[test]
fn spectral_outputs_are_deterministic() {
    let spec = SbmSpec::new(
        DMatrix::from_row_slice(2, 2, &[0.5, 0.3, 0.3, 0.3]),
        DVector::from_vec(vec![0.4, 0.6]),
        150,
        1.0,
    )
    .unwrap();
    let pop = sbm_population(&spec).unwrap();
    let instance = sbm_sample(&pop.matrix, 1.0, false, 31).unwrap();

    let a = top_r(&instance.observed, 2).unwrap();
    let b = top_r(&instance.observed, 2).unwrap();
    assert_eq!(a.frame(), b.frame());
    assert_eq!(a.eigenvalues(), b.eigenvalues());

    let other = sbm_sample(&pop.matrix, 1.0, false, 31).unwrap();
    assert_eq!(instance.noise.matrix(), other.noise.matrix());
}

#[test]
fn fluctuation_centering_identity() {
    // mean(uncentered - centers) == mean(centered) up to floating point
    let spec = SbmSpec::new(
        DMatrix::from_row_slice(2, 2, &[0.5, 0.3, 0.3, 0.3]),
        DVector::from_vec(vec![0.4, 0.6]),
        100,
        1.0,
    )
    .unwrap();
    let pop = sbm_population(&spec).unwrap();
    let latent = pop.latent.as_ref().unwrap();
    let pair = top_r(&pop.matrix, 2).unwrap();
    let instance = sbm_sample(&pop.matrix, 1.0, false, 77).unwrap();
    let pair_hat = top_r(&instance.observed, 2).unwrap();
    let alignment = AlignmentPair::compute(pair_hat.frame(), &pair, &latent.x, 1.0).unwrap();
    let set = fluctuation_rows(&pair, &pair_hat, &alignment, 1.0).unwrap();

    let direct = &set.uncentered - &set.centers;
    let n = set.centered.nrows();
    for j in 0..set.centered.ncols() {
        let mean_direct: f64 = direct.column(j).sum() / n as f64;
        let mean_centered: f64 = set.centered.column(j).sum() / n as f64;
        assert!((mean_direct - mean_centered).abs() <= 1e-10);
    }
    // and entrywise the two routes agree
    assert!((direct - &set.centered).amax() <= 1e-9);
}
