//! Numerical laboratory for eigenvector perturbations of signal-plus-noise
//! symmetric matrices.
//!
//! A deterministic low-rank signal `M = U Lambda U^T` is observed through an
//! additive symmetric noise matrix, `M_hat = M + E`, and the question is how
//! close the perturbed leading eigenvector frame `U_hat` is to `U` row by
//! row. The crate provides:
//!
//! * [`linalg`] — dense symmetric spectral primitives, the two-to-infinity
//!   norm, and canonical-angle subspace distances;
//! * [`alignment`] — orthogonal Procrustes alignment `W` and the latent
//!   rotation `W_X`;
//! * [`models`] — stochastic block models, spiked low-rank models, and
//!   symmetric noise ensembles with deterministic seeding;
//! * [`perturbation`] — the first-order expansion
//!   `U_hat - U W = E U Lambda^-1 W + R` with its exact residual
//!   decomposition, the matrix Neumann series, and entrywise concentration
//!   diagnostics;
//! * [`limit`] — fluctuation vectors `n rho^(1/2) W_X^T (W U_hat_i - U_i)`,
//!   their limit covariances `Xi^(-3/2) Gamma_i Xi^(-3/2)`, empirical
//!   covariance pooling, level curves, and normality diagnostics.
//!
//! All functions are pure: values are immutable after construction and safe
//! to share across threads, so replicate-level parallelism needs no
//! synchronization beyond collecting results.

pub mod alignment;
pub mod error;
pub mod limit;
pub mod linalg;
pub mod models;
pub mod perturbation;

pub use alignment::{procrustes_align, latent_rotation, AlignmentPair, LatentRotation, ProcrustesAlignment};
pub use error::{Error, Result};
pub use limit::{
    chi_square_2_level_95, collect_samples, ellipse_level_95, empirical_covariance,
    fluctuation_rows, gamma_for_noise, gamma_homogeneous, gamma_plugin, gamma_sbm,
    normality_diagnostics, sigma_i, xi_analytic_sbm, xi_plugin, Ellipse, FluctuationSample,
    FluctuationSet, GroupCovariance, NormalityReport, XiEstimate, XiSource,
};
pub use linalg::{
    canonical_angles, full_eig, matrix_norms, spectral_norm, top_r, two_to_inf_norm,
    CanonicalAngles, FullEig, MatrixNorms, SpectralPair, SymmetricMatrix,
};
pub use models::{
    latent_from_b, noise_sample, replicate_seed, rng_from_seed, sbm_population, sbm_sample,
    spike_1d, spike_2d_signs, spike_model, LatentPositions, ModelInstance, NoiseKind, Provenance,
    RegimeConstants, SbmPopulation, SbmSpec, SpikeSignal, SpikeSpec, SpikeValidation,
};
pub use perturbation::{
    check_noise_concentration, decompose, first_order_leading, k_of_n, neumann_partial, phi_benchmark,
    ConcentrationReport, ConcentrationRow, DecompositionNorms, DecompositionReport, LeadingTerm,
    NeumannReport,
};
