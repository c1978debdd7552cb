//! Row-wise fluctuation machinery: theoretical limit covariances
//! `(Xi, Gamma_i, Sigma_i)`, scaled fluctuation vectors, empirical covariance
//! estimation, level curves, and normality diagnostics.
//!
//! The fluctuation vector of row `i` is
//! `v_i = n rho^(1/2) W_X^T (W U_hat_i - U_i)` and converges to
//! `N_r(0, Sigma_i)` with `Sigma_i = Xi^(-3/2) Gamma_i Xi^(-3/2)`, where `Xi`
//! is the limiting second moment of the latent rows and `Gamma_i` the
//! limiting covariance of the scaled noise-row projection.

use nalgebra::{DMatrix, DVector};

use crate::alignment::AlignmentPair;
use crate::error::{Error, Result};
use crate::linalg::{full_eig, SpectralPair, SymmetricMatrix};
use crate::models::{LatentPositions, NoiseKind, SbmSpec};

/// How a second-moment matrix was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XiSource {
    /// Analytic limit `sum_k pi_k nu_k nu_k^T` of a block model.
    AnalyticBlocks,
    /// Finite-n plug-in `n^-1 X^T X`.
    PlugIn,
}

/// The limiting latent second-moment matrix with provenance.
#[derive(Clone, Debug)]
pub struct XiEstimate {
    pub matrix: DMatrix<f64>,
    pub source: XiSource,
    pub min_eigenvalue: f64,
}

/// Analytic `Xi = sum_k pi_k nu_k nu_k^T` for a block model.
pub fn xi_analytic_sbm(
    proportions: &DVector<f64>,
    class_positions: &DMatrix<f64>,
) -> Result<XiEstimate> {
    let r = class_positions.ncols();
    let mut xi = DMatrix::<f64>::zeros(r, r);
    for k in 0..proportions.len() {
        let nu = class_positions.row(k).transpose();
        xi += proportions[k] * &nu * nu.transpose();
    }
    validate_xi(xi, XiSource::AnalyticBlocks)
}

/// Finite-n plug-in `Xi_hat = n^-1 X^T X`, flagged as such.
pub fn xi_plugin(x: &DMatrix<f64>) -> Result<XiEstimate> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::Empty {
            context: "latent positions",
        });
    }
    let xi = x.transpose() * x / n as f64;
    validate_xi(xi, XiSource::PlugIn)
}

fn validate_xi(xi: DMatrix<f64>, source: XiSource) -> Result<XiEstimate> {
    let sym = SymmetricMatrix::from_upper(xi)?;
    let eig = full_eig(&sym)?;
    let min_eigenvalue = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eigenvalue <= 1e-12 {
        return Err(Error::SingularXi { min_eigenvalue });
    }
    Ok(XiEstimate {
        matrix: sym.into_inner(),
        source,
        min_eigenvalue,
    })
}

/// Analytic noise projection covariance for a vertex of the given block in a
/// Bernoulli block model:
/// `Gamma = sum_k pi_k B_{gk} (1 - rho B_{gk}) nu_k nu_k^T`.
pub fn gamma_sbm(spec: &SbmSpec, latent: &LatentPositions, block: usize) -> Result<DMatrix<f64>> {
    if block >= spec.blocks {
        return Err(Error::DimensionMismatch {
            context: "block index",
            expected: spec.blocks,
            actual: block,
        });
    }
    let r = latent.class_positions.ncols();
    let mut gamma = DMatrix::<f64>::zeros(r, r);
    for k in 0..spec.blocks {
        let b = spec.probabilities[(block, k)];
        let weight = spec.proportions[k] * b * (1.0 - spec.rho * b);
        let nu = latent.class_positions.row(k).transpose();
        gamma += weight * &nu * nu.transpose();
    }
    Ok(gamma)
}

/// Homogeneous-variance case: `Gamma = sigma^2 Xi`.
pub fn gamma_homogeneous(variance: f64, xi: &DMatrix<f64>) -> DMatrix<f64> {
    xi * variance
}

/// Finite-n plug-in for a heterogeneous profile:
/// `Gamma_i = n^-1 sum_j sigma_ij^2 X_j X_j^T`.
pub fn gamma_plugin(x: &DMatrix<f64>, row_variances: &[f64]) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    if row_variances.len() != n {
        return Err(Error::DimensionMismatch {
            context: "row variance profile",
            expected: n,
            actual: row_variances.len(),
        });
    }
    let r = x.ncols();
    let mut gamma = DMatrix::<f64>::zeros(r, r);
    for (j, &variance) in row_variances.iter().enumerate() {
        let xj = x.row(j).transpose();
        gamma += variance * &xj * xj.transpose();
    }
    Ok(gamma / n as f64)
}

/// Dispatches on the noise kind's variance structure.
///
/// Profile-valued kinds need the per-row variances and latent positions; use
/// [`gamma_plugin`] for those.
pub fn gamma_for_noise(kind: &NoiseKind, xi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match kind.homogeneous_variance() {
        Some(v) => Ok(gamma_homogeneous(v, xi)),
        None => Err(Error::VarianceProfileUnsupported),
    }
}

/// `Sigma = Xi^(-3/2) Gamma Xi^(-3/2)` via the symmetric eigendecomposition
/// of `Xi` (eigenvalue floor `1e-12`).
pub fn sigma_i(xi: &DMatrix<f64>, gamma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r = xi.nrows();
    if gamma.nrows() != r || gamma.ncols() != r || xi.ncols() != r {
        return Err(Error::DimensionMismatch {
            context: "sigma factors",
            expected: r,
            actual: gamma.nrows(),
        });
    }
    let sym = SymmetricMatrix::from_upper(xi.clone())?;
    let eig = full_eig(&sym)?;
    let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 1e-12 {
        return Err(Error::SingularXi {
            min_eigenvalue: min,
        });
    }
    let mut inv_pow = DMatrix::<f64>::zeros(r, r);
    for k in 0..r {
        let scale = eig.values[k].powf(-1.5);
        let v = eig.vectors.column(k);
        for i in 0..r {
            for j in 0..r {
                inv_pow[(i, j)] += scale * v[i] * v[j];
            }
        }
    }
    Ok(&inv_pow * gamma * &inv_pow)
}

/// Scaled fluctuation rows of one instance.
#[derive(Clone, Debug)]
pub struct FluctuationSet {
    /// Rows `v_i^T` of `n rho^(1/2) (U_hat - U W) W^T W_X`.
    pub centered: DMatrix<f64>,
    /// Uncentered variant `n rho^(1/2) U_hat W^T W_X` (scatter-plot form).
    pub uncentered: DMatrix<f64>,
    /// Per-row centers `n rho^(1/2) U W_X`.
    pub centers: DMatrix<f64>,
}

/// Computes every row's fluctuation vector
/// `v_i = n rho^(1/2) W_X^T (W U_hat_i - U_i)`.
///
/// Requires the strictly positive eigenvalue block of the second-order
/// setting; alignment failures propagate from [`AlignmentPair::compute`].
pub fn fluctuation_rows(
    pair: &SpectralPair,
    pair_hat: &SpectralPair,
    alignment: &AlignmentPair,
    rho: f64,
) -> Result<FluctuationSet> {
    for &lambda in pair.eigenvalues().iter() {
        if lambda <= 0.0 {
            return Err(Error::NonPositiveEigenvalue {
                context: "fluctuation rows",
                value: lambda,
            });
        }
    }
    let n = pair.order();
    let scale = n as f64 * rho.sqrt();
    // row form of W_X^T (W u_hat_i - u_i) is (U_hat - U W) W^T W_X
    let carrier = alignment.w.transpose() * &alignment.w_x;
    let centered = (pair_hat.frame() - pair.frame() * &alignment.w) * &carrier * scale;
    let uncentered = pair_hat.frame() * &carrier * scale;
    let centers = pair.frame() * &alignment.w_x * scale;
    Ok(FluctuationSet {
        centered,
        uncentered,
        centers,
    })
}

/// One row's scaled fluctuation vector with its bookkeeping.
#[derive(Clone, Debug)]
pub struct FluctuationSample {
    pub row: usize,
    pub block: Option<usize>,
    pub replicate: u64,
    pub seed: u64,
    pub vector: DVector<f64>,
}

/// Flattens a [`FluctuationSet`] into per-row samples.
pub fn collect_samples(
    set: &FluctuationSet,
    blocks: Option<&[usize]>,
    replicate: u64,
    seed: u64,
) -> Vec<FluctuationSample> {
    (0..set.centered.nrows())
        .map(|i| FluctuationSample {
            row: i,
            block: blocks.map(|b| b[i]),
            replicate,
            seed,
            vector: set.centered.row(i).transpose(),
        })
        .collect()
}

/// Sample mean and unbiased covariance of one block's pooled vectors.
#[derive(Clone, Debug)]
pub struct GroupCovariance {
    pub block: usize,
    pub count: usize,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// Block-conditional sample covariances of pooled fluctuation vectors.
///
/// Samples without a block label pool into group 0. Every discovered group
/// needs at least two samples.
pub fn empirical_covariance(samples: &[FluctuationSample]) -> Result<Vec<GroupCovariance>> {
    if samples.is_empty() {
        return Err(Error::Empty {
            context: "fluctuation samples",
        });
    }
    let r = samples[0].vector.len();
    let max_block = samples
        .iter()
        .map(|s| s.block.unwrap_or(0))
        .max()
        .unwrap_or(0);

    let mut counts = vec![0usize; max_block + 1];
    let mut sums = vec![DVector::<f64>::zeros(r); max_block + 1];
    for s in samples {
        let b = s.block.unwrap_or(0);
        counts[b] += 1;
        sums[b] += &s.vector;
    }
    for (b, &count) in counts.iter().enumerate() {
        if count == 1 {
            return Err(Error::TooFewSamples {
                group: b,
                need: 2,
                got: count,
            });
        }
    }

    let means: Vec<DVector<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { s.clone() })
        .collect();
    let mut scatters = vec![DMatrix::<f64>::zeros(r, r); max_block + 1];
    for s in samples {
        let b = s.block.unwrap_or(0);
        let d = &s.vector - &means[b];
        scatters[b] += &d * d.transpose();
    }

    Ok(counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(b, &c)| GroupCovariance {
            block: b,
            count: c,
            mean: means[b].clone(),
            covariance: &scatters[b] / (c as f64 - 1.0),
        })
        .collect())
}

/// 95% chi-square(2) quantile: `-2 ln(0.05)`.
pub fn chi_square_2_level_95() -> f64 {
    -2.0 * 0.05f64.ln()
}

/// Axis-aligned description of a covariance level curve.
#[derive(Clone, Copy, Debug)]
pub struct Ellipse {
    pub center: [f64; 2],
    /// Semi-axis lengths, major first.
    pub semi_axes: [f64; 2],
    /// Rotation of the major axis from the x-axis, radians.
    pub rotation: f64,
    /// The quantile defining the level set `x^T Sigma^-1 x = q`.
    pub quantile: f64,
}

impl Ellipse {
    pub fn with_center(mut self, center: [f64; 2]) -> Self {
        self.center = center;
        self
    }
}

/// The 95% level curve of a bivariate normal with covariance `sigma`,
/// centered at the origin.
pub fn ellipse_level_95(sigma: &DMatrix<f64>) -> Result<Ellipse> {
    if sigma.nrows() != 2 || sigma.ncols() != 2 {
        return Err(Error::EllipseDimension {
            rank: sigma.nrows(),
        });
    }
    let sym = SymmetricMatrix::from_upper(sigma.clone())?;
    let eig = full_eig(&sym)?;
    // descending magnitude = descending value for an SPD matrix
    if eig.values[1] <= 0.0 {
        return Err(Error::NotPsd {
            min_eigenvalue: eig.values[1],
        });
    }
    let q = chi_square_2_level_95();
    let major = eig.vectors.column(0);
    Ok(Ellipse {
        center: [0.0, 0.0],
        semi_axes: [(q * eig.values[0]).sqrt(), (q * eig.values[1]).sqrt()],
        rotation: major[1].atan2(major[0]),
        quantile: q,
    })
}

/// Kolmogorov-Smirnov statistic and standardized moments against
/// `N(0, variance)`.
#[derive(Clone, Copy, Debug)]
pub struct NormalityReport {
    pub count: usize,
    pub ks_statistic: f64,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub skewness: f64,
    /// Standardized fourth moment (3 for a normal).
    pub kurtosis: f64,
}

/// One-sample KS diagnostic; needs at least 50 samples and nonzero spread.
pub fn normality_diagnostics(samples: &[f64], variance: f64) -> Result<NormalityReport> {
    let m = samples.len();
    if m < 50 {
        return Err(Error::TooFewSamples {
            group: 0,
            need: 50,
            got: m,
        });
    }
    if variance.is_nan() || variance <= 0.0 {
        return Err(Error::NonPositiveScale { value: variance });
    }
    let mean = samples.iter().sum::<f64>() / m as f64;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &x in samples {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= m as f64;
    m3 /= m as f64;
    m4 /= m as f64;
    if m2 == 0.0 {
        return Err(Error::DegenerateSample);
    }
    let sample_variance = m2 * m as f64 / (m as f64 - 1.0);
    let skewness = m3 / m2.powf(1.5);
    let kurtosis = m4 / (m2 * m2);

    let sigma = variance.sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let mut ks = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = normal_cdf(x / sigma);
        let upper = (i as f64 + 1.0) / m as f64 - cdf;
        let lower = cdf - i as f64 / m as f64;
        ks = ks.max(upper.max(lower));
    }

    Ok(NormalityReport {
        count: m,
        ks_statistic: ks,
        mean,
        variance: sample_variance,
        skewness,
        kurtosis,
    })
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}
