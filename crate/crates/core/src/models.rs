//! Generators for signal matrices `M` and noise matrices `E`: stochastic
//! block models, spiked low-rank models, and symmetric noise ensembles, all
//! under the sparsity scaling `rho`.
//!
//! # Randomness
//!
//! Every sampler is a pure function of `(spec, seed)`. The fixed generator is
//! ChaCha8 seeded through [`rng_from_seed`]; replicate streams derive their
//! seed as `base_seed XOR replicate_index` (see [`replicate_seed`]). Entries
//! of a symmetric matrix are always drawn in row-major upper-triangle order
//! (diagonal included), so output is bit-identical across runs and across the
//! serial/parallel execution paths.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{full_eig, orthonormality_defect, SymmetricMatrix};

/// Seed for the replicate stream: `base XOR replicate`.
pub fn replicate_seed(base_seed: u64, replicate: u64) -> u64 {
    base_seed ^ replicate
}

/// The project's fixed pseudorandom generator.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Asymptotic-regime constants from the model assumptions.
///
/// Purely documentary: they parameterize limit statements, not finite-n
/// computation, and have no runtime effect.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeConstants {
    pub c_rho: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Symmetric noise ensembles with independent entries (up to symmetry).
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseKind {
    /// `N(0, variance)` entries; `variance = 0` yields the zero matrix.
    Gaussian { variance: f64 },
    /// Gaussian entries with per-entry variances `sigma_ij^2`.
    GaussianProfile { variances: SymmetricMatrix },
    /// `Laplace(0, scale)`; per-entry variance `2 scale^2`.
    Laplace { scale: f64 },
    /// `Uniform[-half_width, half_width]`; per-entry variance `half_width^2 / 3`.
    Uniform { half_width: f64 },
}

impl NoiseKind {
    /// Common per-entry variance, when the profile is homogeneous.
    pub fn homogeneous_variance(&self) -> Option<f64> {
        match self {
            NoiseKind::Gaussian { variance } => Some(*variance),
            NoiseKind::GaussianProfile { .. } => None,
            NoiseKind::Laplace { scale } => Some(2.0 * scale * scale),
            NoiseKind::Uniform { half_width } => Some(half_width * half_width / 3.0),
        }
    }
}

/// Stochastic block model specification.
#[derive(Clone, Debug)]
pub struct SbmSpec {
    /// Block count `K`.
    pub blocks: usize,
    /// `K x K` symmetric edge probability matrix `B`.
    pub probabilities: DMatrix<f64>,
    /// Block proportions, positive, summing to 1.
    pub proportions: DVector<f64>,
    /// Vertex count.
    pub n: usize,
    /// Sparsity factor in `(0, 1]`.
    pub rho: f64,
    /// Force a zero diagonal on sampled adjacency matrices. Off by default:
    /// sampling the diagonal keeps `E = A - P` exactly centered.
    pub hollow_diagonal: bool,
    pub regime: Option<RegimeConstants>,
}

impl SbmSpec {
    pub fn new(
        probabilities: DMatrix<f64>,
        proportions: DVector<f64>,
        n: usize,
        rho: f64,
    ) -> Result<Self> {
        let spec = Self {
            blocks: proportions.len(),
            probabilities,
            proportions,
            n,
            rho,
            hollow_diagonal: false,
            regime: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.blocks;
        if self.probabilities.nrows() != k || self.probabilities.ncols() != k {
            return Err(Error::DimensionMismatch {
                context: "block probability matrix",
                expected: k,
                actual: self.probabilities.nrows(),
            });
        }
        for i in 0..k {
            for j in 0..k {
                let p = self.probabilities[(i, j)];
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::ProbabilityOutOfRange {
                        row: i,
                        col: j,
                        value: p,
                    });
                }
                if self.probabilities[(i, j)] != self.probabilities[(j, i)] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        let sum: f64 = self.proportions.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || self.proportions.iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidProportions { sum });
        }
        let total: usize = self.block_sizes().iter().sum();
        if total != self.n {
            return Err(Error::BlockSizeMismatch {
                total,
                n: self.n,
            });
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::ProbabilityOutOfRange {
                row: 0,
                col: 0,
                value: self.rho,
            });
        }
        Ok(())
    }

    /// Deterministic block sizes `round(n pi_k)`.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.proportions
            .iter()
            .map(|&p| (self.n as f64 * p).round() as usize)
            .collect()
    }

    /// Contiguous memberships: vertices `0..n_1` in block 0, and so on.
    pub fn memberships(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n);
        for (block, &size) in self.block_sizes().iter().enumerate() {
            out.extend(std::iter::repeat(block).take(size));
        }
        out
    }
}

/// Latent positions recovered from a PSD block matrix `B = N N^T`.
#[derive(Clone, Debug)]
pub struct LatentPositions {
    /// One row per vertex, `x_i = nu_{g(i)}`.
    pub x: DMatrix<f64>,
    /// One row per block: `nu_k`, scaled eigenvector rows of `B`.
    pub class_positions: DMatrix<f64>,
    /// Rank of `B` after thresholding.
    pub rank: usize,
}

/// Factor `B = N N^T` over its positive eigenvalues and lift the block rows
/// to per-vertex latent positions.
///
/// `N` is the canonical lower-trapezoidal factor with nonnegative staircase
/// diagonal -- the Cholesky factor when `B` has full rank. This is the basis
/// in which the tabulated fluctuation covariances of the two-block model are
/// expressed; any other factor differs by a right orthogonal rotation that
/// would rotate every downstream covariance.
///
/// Eigenvalues of `B` below `1e-10 ||B||` are treated as zero; any eigenvalue
/// below `-1e-10 ||B||` rejects `B` as not positive semidefinite.
pub fn latent_from_b(b: &DMatrix<f64>, memberships: &[usize]) -> Result<LatentPositions> {
    let sym = SymmetricMatrix::new(b.clone())?;
    let eig = full_eig(&sym)?;
    let scale = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let threshold = 1e-10 * scale;
    if let Some(&min) = eig
        .values
        .iter()
        .filter(|&&v| v < -threshold)
        .min_by(|a, b| a.partial_cmp(b).unwrap())
    {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    let kept: Vec<usize> = (0..eig.values.len())
        .filter(|&i| eig.values[i] > threshold)
        .collect();
    let rank = kept.len();
    let k = b.nrows();
    let eigenfactor = DMatrix::from_fn(k, rank, |row, col| {
        let idx = kept[col];
        eig.vectors[(row, idx)] * eig.values[idx].sqrt()
    });
    // rotate the factor into lower-trapezoidal form: with N0^T = Q R, the
    // factor N = N0 Q = R^T still satisfies N N^T = B
    let qr = eigenfactor.transpose().qr();
    let mut class_positions = qr.r().transpose();
    for col in 0..rank {
        // flip the column if its leading (staircase) entry is negative
        let pivot = (0..k).map(|row| class_positions[(row, col)]).find(|v| *v != 0.0);
        if matches!(pivot, Some(v) if v < 0.0) {
            for row in 0..k {
                class_positions[(row, col)] = -class_positions[(row, col)];
            }
        }
    }
    let x = DMatrix::from_fn(memberships.len(), rank, |row, col| {
        class_positions[(memberships[row], col)]
    });
    Ok(LatentPositions {
        x,
        class_positions,
        rank,
    })
}

/// Population side of a block model: `P`, memberships, and latent positions
/// when `B` is positive semidefinite.
#[derive(Clone, Debug)]
pub struct SbmPopulation {
    /// `P_ij = rho B_{g(i) g(j)}`.
    pub matrix: SymmetricMatrix,
    pub memberships: Vec<usize>,
    /// `None` when `B` is not PSD (the population matrix alone is still valid).
    pub latent: Option<LatentPositions>,
}

/// Builds the population edge probability matrix of a block model.
///
/// Latent positions (with `P = rho X X^T`) are attached when `B` is PSD;
/// callers that require them use [`latent_from_b`] directly to surface the
/// PSD violation.
pub fn sbm_population(spec: &SbmSpec) -> Result<SbmPopulation> {
    spec.validate()?;
    let memberships = spec.memberships();
    let matrix = SymmetricMatrix::from_fn_upper(spec.n, |i, j| {
        spec.rho * spec.probabilities[(memberships[i], memberships[j])]
    })?;
    let latent = match latent_from_b(&spec.probabilities, &memberships) {
        Ok(l) => Some(l),
        Err(Error::NotPsd { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(SbmPopulation {
        matrix,
        memberships,
        latent,
    })
}

/// Where an instance came from.
#[derive(Clone, Debug)]
pub enum Provenance {
    SbmAdjacency { rho: f64, hollow_diagonal: bool },
    Spike { rho: f64, noise: NoiseKind },
    NoiseOnly { noise: NoiseKind },
}

impl Provenance {
    pub fn rho(&self) -> f64 {
        match self {
            Provenance::SbmAdjacency { rho, .. } | Provenance::Spike { rho, .. } => *rho,
            Provenance::NoiseOnly { .. } => 1.0,
        }
    }
}

/// The triple `(M, E, M_hat = M + E)` with its provenance.
#[derive(Clone, Debug)]
pub struct ModelInstance {
    pub signal: SymmetricMatrix,
    pub noise: SymmetricMatrix,
    /// Always the entrywise sum of `signal` and `noise`.
    pub observed: SymmetricMatrix,
    pub seed: u64,
    pub provenance: Provenance,
}

impl ModelInstance {
    pub fn new(
        signal: SymmetricMatrix,
        noise: SymmetricMatrix,
        seed: u64,
        provenance: Provenance,
    ) -> Self {
        let observed = &signal + &noise;
        Self {
            signal,
            noise,
            observed,
            seed,
            provenance,
        }
    }

    pub fn order(&self) -> usize {
        self.signal.order()
    }

    pub fn rho(&self) -> f64 {
        self.provenance.rho()
    }
}

/// Samples a Bernoulli adjacency matrix `A` with `E[A] = P` and returns the
/// instance `(P, A - P, A)`.
///
/// The diagonal is sampled too (`A_ii ~ Bernoulli(P_ii)`) unless
/// `hollow_diagonal` is set, keeping the noise exactly centered by default.
pub fn sbm_sample(
    p: &SymmetricMatrix,
    rho: f64,
    hollow_diagonal: bool,
    seed: u64,
) -> Result<ModelInstance> {
    let n = p.order();
    for i in 0..n {
        for j in i..n {
            let v = p.matrix()[(i, j)];
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ProbabilityOutOfRange {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    let mut rng = rng_from_seed(seed);
    let mut adjacency = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let u: f64 = rng.random();
            let edge = if i == j && hollow_diagonal {
                0.0
            } else if u < p.matrix()[(i, j)] {
                1.0
            } else {
                0.0
            };
            adjacency[(i, j)] = edge;
            adjacency[(j, i)] = edge;
        }
    }
    let noise = SymmetricMatrix::from_fn_upper(n, |i, j| adjacency[(i, j)] - p.matrix()[(i, j)])?;
    Ok(ModelInstance::new(
        p.clone(),
        noise,
        seed,
        Provenance::SbmAdjacency {
            rho,
            hollow_diagonal,
        },
    ))
}

/// Draws a symmetric noise matrix with independent upper-triangle entries.
pub fn noise_sample(kind: &NoiseKind, n: usize, seed: u64) -> Result<SymmetricMatrix> {
    match kind {
        NoiseKind::Gaussian { variance } => {
            if *variance < 0.0 {
                return Err(Error::NonPositiveScale { value: *variance });
            }
        }
        NoiseKind::GaussianProfile { variances } => {
            if variances.order() != n {
                return Err(Error::DimensionMismatch {
                    context: "variance profile",
                    expected: n,
                    actual: variances.order(),
                });
            }
            for i in 0..n {
                for j in i..n {
                    if variances.matrix()[(i, j)] < 0.0 {
                        return Err(Error::NonPositiveScale {
                            value: variances.matrix()[(i, j)],
                        });
                    }
                }
            }
        }
        NoiseKind::Laplace { scale } => {
            if *scale <= 0.0 {
                return Err(Error::NonPositiveScale { value: *scale });
            }
        }
        NoiseKind::Uniform { half_width } => {
            if *half_width <= 0.0 {
                return Err(Error::NonPositiveScale { value: *half_width });
            }
        }
    }

    let mut rng = rng_from_seed(seed);
    SymmetricMatrix::from_fn_upper(n, |i, j| match kind {
        NoiseKind::Gaussian { variance } => {
            let z: f64 = rng.sample(StandardNormal);
            variance.sqrt() * z
        }
        NoiseKind::GaussianProfile { variances } => {
            let z: f64 = rng.sample(StandardNormal);
            variances.matrix()[(i, j)].sqrt() * z
        }
        NoiseKind::Laplace { scale } => {
            // difference of two exponentials is Laplace(0, scale) exactly
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            scale * ((1.0 - u2).ln() - (1.0 - u1).ln())
        }
        NoiseKind::Uniform { half_width } => {
            let u: f64 = rng.random();
            half_width * (2.0 * u - 1.0)
        }
    })
}

/// Signal side of a spiked model.
#[derive(Clone, Debug)]
pub enum SpikeSignal {
    /// Explicit eigenvector frame and strictly signed eigenvalue block.
    Frame {
        frame: DMatrix<f64>,
        eigenvalues: DVector<f64>,
    },
    /// Latent positions; the signal is `rho X X^T`.
    Latent { x: DMatrix<f64> },
}

/// Spiked low-rank model specification.
#[derive(Clone, Debug)]
pub struct SpikeSpec {
    pub n: usize,
    pub rank: usize,
    pub signal: SpikeSignal,
    pub noise: NoiseKind,
    pub rho: f64,
    pub regime: Option<RegimeConstants>,
}

impl SpikeSpec {
    pub fn validate(&self) -> Result<SpikeValidation> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::ProbabilityOutOfRange {
                row: 0,
                col: 0,
                value: self.rho,
            });
        }
        match &self.signal {
            SpikeSignal::Frame { frame, eigenvalues } => {
                if frame.nrows() != self.n || frame.ncols() != self.rank {
                    return Err(Error::DimensionMismatch {
                        context: "spike frame",
                        expected: self.n * self.rank,
                        actual: frame.nrows() * frame.ncols(),
                    });
                }
                let defect = orthonormality_defect(frame);
                if defect.is_nan() || defect > 1e-10 {
                    return Err(Error::NotOrthonormal { defect });
                }
                for &lambda in eigenvalues.iter() {
                    if lambda == 0.0 || !lambda.is_finite() {
                        return Err(Error::NonPositiveEigenvalue {
                            context: "spike eigenvalue block (must be strictly signed)",
                            value: lambda,
                        });
                    }
                }
                Ok(SpikeValidation {
                    xtx_condition: None,
                })
            }
            SpikeSignal::Latent { x } => {
                if x.nrows() != self.n || x.ncols() != self.rank {
                    return Err(Error::DimensionMismatch {
                        context: "spike latent positions",
                        expected: self.n * self.rank,
                        actual: x.nrows() * x.ncols(),
                    });
                }
                let gram = SymmetricMatrix::from_upper(x.transpose() * x / self.n as f64)?;
                let eig = full_eig(&gram)?;
                let max = eig.values[0].abs();
                let min = eig
                    .values
                    .iter()
                    .fold(f64::INFINITY, |a, v| a.min(v.abs()));
                if min <= 1e-12 * max.max(1.0) {
                    return Err(Error::SingularXi {
                        min_eigenvalue: min,
                    });
                }
                Ok(SpikeValidation {
                    xtx_condition: Some(max / min),
                })
            }
        }
    }
}

/// Diagnostics from validating a [`SpikeSpec`].
#[derive(Clone, Copy, Debug)]
pub struct SpikeValidation {
    /// Condition number of `n^-1 X^T X` when latent positions were given.
    pub xtx_condition: Option<f64>,
}

/// Samples a spiked instance `M + E` with `M` built from the spec's signal.
pub fn spike_model(spec: &SpikeSpec, seed: u64) -> Result<ModelInstance> {
    spec.validate()?;
    let signal = match &spec.signal {
        SpikeSignal::Frame { frame, eigenvalues } => {
            SymmetricMatrix::from_fn_upper(spec.n, |i, j| {
                (0..spec.rank)
                    .map(|k| frame[(i, k)] * eigenvalues[k] * frame[(j, k)])
                    .sum()
            })?
        }
        SpikeSignal::Latent { x } => SymmetricMatrix::from_fn_upper(spec.n, |i, j| {
            spec.rho * x.row(i).dot(&x.row(j))
        })?,
    };
    let noise = noise_sample(&spec.noise, spec.n, seed)?;
    Ok(ModelInstance::new(
        signal,
        noise,
        seed,
        Provenance::Spike {
            rho: spec.rho,
            noise: spec.noise.clone(),
        },
    ))
}

/// The one-dimensional spike: latent positions `sqrt(lambda / n) * ones`, so
/// the signal is `lambda u u^T` with `u = n^(-1/2) (1, ..., 1)`.
pub fn spike_1d(n: usize, lambda: f64, noise: NoiseKind) -> SpikeSpec {
    let scale = (lambda / n as f64).sqrt();
    SpikeSpec {
        n,
        rank: 1,
        signal: SpikeSignal::Latent {
            x: DMatrix::from_element(n, 1, scale),
        },
        noise,
        rho: 1.0,
        regime: None,
    }
}

/// The two-dimensional sign-split spike: first latent coordinate constant,
/// second `+` on the first half and `-` on the second. Requires even `n`.
pub fn spike_2d_signs(n: usize, lambda: f64, noise: NoiseKind) -> SpikeSpec {
    assert!(n % 2 == 0, "sign-split spike needs even n");
    let scale = (lambda / n as f64).sqrt();
    let x = DMatrix::from_fn(n, 2, |i, j| {
        if j == 0 || i < n / 2 {
            scale
        } else {
            -scale
        }
    });
    SpikeSpec {
        n,
        rank: 2,
        signal: SpikeSignal::Latent { x },
        noise,
        rho: 1.0,
        regime: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::top_r;
    use approx::assert_abs_diff_eq;

    pub(crate) fn two_block_spec(n: usize) -> SbmSpec {
        SbmSpec::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.3, 0.3, 0.3]),
            DVector::from_vec(vec![0.4, 0.6]),
            n,
            1.0,
        )
        .unwrap()
    }

    pub(crate) fn three_block_spec(n: usize) -> SbmSpec {
        let b = DMatrix::from_fn(3, 3, |i, j| if i == j { 0.5 } else { 0.3 });
        SbmSpec::new(b, DVector::from_element(3, 1.0 / 3.0), n, 1.0).unwrap()
    }

    #[test]
    fn three_block_population_eigenvalues() {
        let spec = three_block_spec(300);
        let pop = sbm_population(&spec).unwrap();
        let eig = full_eig(&pop.matrix).unwrap();
        assert_abs_diff_eq!(eig.values[0], 110.0, epsilon = 1e-8);
        assert_abs_diff_eq!(eig.values[1], 20.0, epsilon = 1e-8);
        assert_abs_diff_eq!(eig.values[2], 20.0, epsilon = 1e-8);
        // rank(P) = rank(B) = 3
        for k in 3..10 {
            assert!(eig.values[k].abs() <= 1e-9 * 110.0);
        }
    }

    #[test]
    fn two_block_b_eigenvalues() {
        let spec = two_block_spec(200);
        let latent = latent_from_b(&spec.probabilities, &spec.memberships()).unwrap();
        assert_eq!(latent.rank, 2);
        // eigenvalues of B: trace 0.8, det 0.06
        let b_eig = full_eig(&SymmetricMatrix::new(spec.probabilities.clone()).unwrap()).unwrap();
        assert_abs_diff_eq!(b_eig.values[0], 0.7162277660168379, epsilon = 1e-12);
        assert_abs_diff_eq!(b_eig.values[1], 0.08377223398316206, epsilon = 1e-12);
    }

    #[test]
    fn latent_reconstructs_population() {
        for spec in [two_block_spec(120), three_block_spec(120)] {
            let pop = sbm_population(&spec).unwrap();
            let latent = pop.latent.as_ref().unwrap();
            let recon = &latent.x * latent.x.transpose() * spec.rho;
            let gap = (&recon - pop.matrix.matrix()).amax();
            assert!(gap <= 1e-12, "reconstruction gap {gap}");
        }
    }

    #[test]
    fn identity_b_gives_standard_basis_positions() {
        let spec = SbmSpec::new(
            DMatrix::identity(3, 3),
            DVector::from_element(3, 1.0 / 3.0),
            9,
            1.0,
        )
        .unwrap();
        let latent = latent_from_b(&spec.probabilities, &spec.memberships()).unwrap();
        for k in 0..3 {
            for c in 0..3 {
                let v = latent.class_positions[(k, c)].abs();
                let expect = if latent.class_positions[(k, c)].abs() > 0.5 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(v, expect, epsilon = 1e-12);
            }
            let row_norm: f64 = latent.class_positions.row(k).norm();
            assert_abs_diff_eq!(row_norm, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_block_is_rank_one() {
        let spec = SbmSpec::new(
            DMatrix::from_element(1, 1, 0.25),
            DVector::from_element(1, 1.0),
            50,
            1.0,
        )
        .unwrap();
        let pop = sbm_population(&spec).unwrap();
        let pair = top_r(&pop.matrix, 1).unwrap();
        assert_abs_diff_eq!(pair.eigenvalues()[0], 50.0 * 0.25, epsilon = 1e-10);
    }

    #[test]
    fn block_size_rounding_must_sum() {
        let bad = SbmSpec::new(
            DMatrix::from_element(2, 2, 0.5),
            DVector::from_vec(vec![0.5, 0.5]),
            101,
            1.0,
        );
        assert!(matches!(bad, Err(Error::BlockSizeMismatch { .. })));
    }

    #[test]
    fn degenerate_probabilities_sample_exactly() {
        let zero = SymmetricMatrix::zeros(30);
        let inst = sbm_sample(&zero, 1.0, false, 5).unwrap();
        assert_eq!(inst.observed.matrix().amax(), 0.0);
        assert_eq!(inst.noise.matrix().amax(), 0.0);

        let ones = SymmetricMatrix::from_fn_upper(30, |_, _| 1.0).unwrap();
        let inst = sbm_sample(&ones, 1.0, false, 5).unwrap();
        assert_eq!(inst.noise.matrix().amax(), 0.0);
        assert_eq!(inst.observed.matrix().min(), 1.0);
    }

    #[test]
    fn sample_rejects_bad_probability() {
        let p = SymmetricMatrix::from_fn_upper(4, |_, _| 1.5).unwrap();
        assert!(matches!(
            sbm_sample(&p, 1.0, false, 0),
            Err(Error::ProbabilityOutOfRange { .. })
        ));
    }

    #[test]
    fn adjacency_is_binary_and_sum_identity_exact() {
        let spec = two_block_spec(80);
        let pop = sbm_population(&spec).unwrap();
        let inst = sbm_sample(&pop.matrix, spec.rho, false, 99).unwrap();
        for i in 0..80 {
            for j in 0..80 {
                let a = inst.observed.matrix()[(i, j)];
                assert!(a == 0.0 || a == 1.0, "non-binary adjacency entry {a}");
                // M_hat == M + E bitwise
                assert_eq!(
                    a,
                    inst.signal.matrix()[(i, j)] + inst.noise.matrix()[(i, j)]
                );
            }
        }
    }

    #[test]
    fn sample_means_match_probabilities() {
        // 1000 samples of the two-block model; per block-pair pooled means
        // within 3 binomial standard errors of the target probability
        let spec = two_block_spec(200);
        let pop = sbm_population(&spec).unwrap();
        let memberships = pop.memberships.clone();
        let mut sums = [[0.0f64; 2]; 2];
        let mut counts = [[0usize; 2]; 2];
        for rep in 0..1000u64 {
            let inst = sbm_sample(&pop.matrix, 1.0, false, replicate_seed(77, rep)).unwrap();
            for i in 0..200 {
                for j in i..200 {
                    let (bi, bj) = (memberships[i].min(memberships[j]), memberships[i].max(memberships[j]));
                    sums[bi][bj] += inst.observed.matrix()[(i, j)];
                    counts[bi][bj] += 1;
                }
            }
        }
        for bi in 0..2 {
            for bj in bi..2 {
                let p = spec.probabilities[(bi, bj)];
                let mean = sums[bi][bj] / counts[bi][bj] as f64;
                let se = (p * (1.0 - p) / counts[bi][bj] as f64).sqrt();
                assert!(
                    (mean - p).abs() <= 3.0 * se,
                    "block pair ({bi},{bj}): mean {mean} vs {p}, se {se}"
                );
            }
        }
    }

    #[test]
    fn hollow_diagonal_toggle() {
        let spec = two_block_spec(60);
        let pop = sbm_population(&spec).unwrap();
        let inst = sbm_sample(&pop.matrix, spec.rho, true, 7).unwrap();
        for i in 0..60 {
            assert_eq!(inst.observed.matrix()[(i, i)], 0.0);
        }
    }

    #[test]
    fn noise_is_centered_with_stated_variance() {
        // 1e4 replicates of a 20x20 instance per kind
        let n = 20;
        let reps = 10_000u64;
        let kinds = [
            NoiseKind::Laplace {
                scale: std::f64::consts::FRAC_1_SQRT_2,
            },
            NoiseKind::Uniform { half_width: 1.0 },
            NoiseKind::Gaussian { variance: 1.0 },
        ];
        let expected = [1.0, 1.0 / 3.0, 1.0];
        for (kind, expect) in kinds.iter().zip(expected) {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut count = 0usize;
            for rep in 0..reps {
                let e = noise_sample(kind, n, replicate_seed(1234, rep)).unwrap();
                for i in 0..n {
                    for j in i..n {
                        let v = e.matrix()[(i, j)];
                        sum += v;
                        sum_sq += v * v;
                        count += 1;
                    }
                }
            }
            let mean = sum / count as f64;
            let var = sum_sq / count as f64 - mean * mean;
            // 4 standard errors of the mean at variance `expect`
            let se = (expect / count as f64).sqrt();
            assert!(mean.abs() <= 4.0 * se, "mean {mean} vs se {se}");
            assert!(
                (var - expect).abs() <= 0.02 * expect,
                "variance {var} vs expected {expect}"
            );
        }
    }

    #[test]
    fn gaussian_zero_variance_is_zero_matrix() {
        let e = noise_sample(&NoiseKind::Gaussian { variance: 0.0 }, 10, 3).unwrap();
        assert_eq!(e.matrix().amax(), 0.0);
    }

    #[test]
    fn nonpositive_scales_rejected() {
        assert!(noise_sample(&NoiseKind::Laplace { scale: 0.0 }, 4, 0).is_err());
        assert!(noise_sample(&NoiseKind::Uniform { half_width: -1.0 }, 4, 0).is_err());
        assert!(noise_sample(&NoiseKind::Gaussian { variance: -0.5 }, 4, 0).is_err());
    }

    #[test]
    fn seed_determinism_bitwise() {
        let kind = NoiseKind::Laplace { scale: 1.0 };
        let a = noise_sample(&kind, 25, 42).unwrap();
        let b = noise_sample(&kind, 25, 42).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        let c = noise_sample(&kind, 25, 43).unwrap();
        assert_ne!(a.matrix(), c.matrix());
    }

    #[test]
    fn spike_without_noise_recovers_frame() {
        // repeated eigenvalue: the recovered frame spans the same subspace
        let spec = spike_2d_signs(64, 64.0, NoiseKind::Gaussian { variance: 0.0 });
        let inst = spike_model(&spec, 0).unwrap();
        let pair = top_r(&inst.observed, 2).unwrap();
        assert_abs_diff_eq!(pair.eigenvalues()[0], 64.0, epsilon = 1e-9);
        assert_abs_diff_eq!(pair.eigenvalues()[1], 64.0, epsilon = 1e-9);
        let x = match &spec.signal {
            SpikeSignal::Latent { x } => x / 8.0,
            _ => unreachable!(),
        };
        // projector comparison resolves below the acos noise floor
        let gap = (pair.frame() * pair.frame().transpose() - &x * x.transpose()).amax();
        assert!(gap <= 1e-12, "projector gap {gap}");

        // distinct eigenvalues: frame matches entrywise up to the sign convention
        let frame = DMatrix::from_fn(4, 1, |i, _| if i < 2 { 0.5 } else { -0.5 });
        let spec = SpikeSpec {
            n: 4,
            rank: 1,
            signal: SpikeSignal::Frame {
                frame: frame.clone(),
                eigenvalues: DVector::from_vec(vec![-6.0]),
            },
            noise: NoiseKind::Gaussian { variance: 0.0 },
            rho: 1.0,
            regime: None,
        };
        let inst = spike_model(&spec, 0).unwrap();
        let pair = top_r(&inst.observed, 1).unwrap();
        assert_abs_diff_eq!(pair.eigenvalues()[0], -6.0, epsilon = 1e-12);
        for i in 0..4 {
            assert_abs_diff_eq!(pair.frame()[(i, 0)], frame[(i, 0)], epsilon = 1e-12);
        }
    }

    #[test]
    fn spike_1d_has_unit_latent_second_moment() {
        let spec = spike_1d(100, 100.0, NoiseKind::Laplace {
            scale: std::f64::consts::FRAC_1_SQRT_2,
        });
        let validation = spec.validate().unwrap();
        assert_abs_diff_eq!(validation.xtx_condition.unwrap(), 1.0, epsilon = 1e-12);
        let inst = spike_model(&spec, 11).unwrap();
        // signal is exactly lambda u u^T = ones
        assert_abs_diff_eq!(inst.signal.matrix()[(3, 70)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigenvalue_scale_ratios_for_three_block() {
        // |Lambda_rr| = 0.2 (n/3) rho and |Lambda_11| / |Lambda_rr| = 5.5
        for n in [300usize, 600, 1200] {
            let spec = three_block_spec(n);
            let pop = sbm_population(&spec).unwrap();
            let pair = top_r(&pop.matrix, 3).unwrap();
            let ratio = pair.eigenvalues()[0] / pair.eigenvalues()[2];
            assert_abs_diff_eq!(ratio, 5.5, epsilon = 1e-9);
            let c = pair.eigenvalues()[2] / (n as f64 * spec.rho);
            assert_abs_diff_eq!(c, 1.0 / 15.0, epsilon = 1e-12);
        }
    }
}
