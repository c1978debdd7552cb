//! Orthogonal alignment of eigenvector frames: the Procrustes matrix `W`
//! aligning a perturbed frame toward an unperturbed one, and the latent
//! rotation `W_X` tying a frame to latent positions via
//! `rho^(1/2) X = U Lambda^(1/2) W_X`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{orthonormality_defect, SpectralPair};

/// Singular values at or below this threshold mark the alignment as
/// non-unique.
const DEGENERACY_TOL: f64 = 1e-12;

/// Result of an orthogonal Procrustes fit.
#[derive(Clone, Debug)]
pub struct ProcrustesAlignment {
    /// `W = V1 V2^T` from the SVD `U^T U_hat = V1 S V2^T`; minimizes
    /// `||U_hat - U W'||_F` over orthogonal `W'`.
    pub rotation: DMatrix<f64>,
    /// `max |W^T W - I|`.
    pub orthogonality_defect: f64,
    /// True when `U^T U_hat` had a numerically zero singular value, in which
    /// case the minimizer is not unique (the SVD factors are still returned).
    pub degenerate: bool,
}

/// Orthogonal matrix best aligning `U` toward `U_hat` in Frobenius norm.
pub fn procrustes_align(u_hat: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<ProcrustesAlignment> {
    check_frames(u_hat, u)?;
    let product = u.transpose() * u_hat;
    let svd = product.svd(true, true);
    let rotation = svd.u.expect("svd with u") * svd.v_t.expect("svd with v_t");
    let degenerate = svd
        .singular_values
        .iter()
        .any(|&s| s <= DEGENERACY_TOL);
    let orthogonality_defect = orthonormality_defect(&rotation);
    Ok(ProcrustesAlignment {
        rotation,
        orthogonality_defect,
        degenerate,
    })
}

/// Result of the latent-position rotation fit.
#[derive(Clone, Debug)]
pub struct LatentRotation {
    /// Orthogonal `W_X` with `rho^(1/2) X ~= U Lambda^(1/2) W_X`.
    pub rotation: DMatrix<f64>,
    /// `||rho^(1/2) X - U Lambda^(1/2) W_X||_F`, a diagnostic.
    pub residual: f64,
    /// `max |W_X^T W_X - I|`.
    pub orthogonality_defect: f64,
}

/// Rotation aligning the spectral frame with latent positions.
///
/// Requires strictly positive `Lambda` and `rho X X^T = U Lambda U^T` to
/// `1e-8` relative in Frobenius norm. `W_X` is the orthogonal polar factor of
/// `Lambda^(-1/2) U^T (rho^(1/2) X)`, which is robust to the residual
/// floating-point non-orthogonality of the inputs.
pub fn latent_rotation(x: &DMatrix<f64>, pair: &SpectralPair, rho: f64) -> Result<LatentRotation> {
    let n = pair.order();
    let r = pair.rank();
    if x.nrows() != n || x.ncols() != r {
        return Err(Error::DimensionMismatch {
            context: "latent positions",
            expected: n * r,
            actual: x.nrows() * x.ncols(),
        });
    }
    for &lambda in pair.eigenvalues().iter() {
        if lambda <= 0.0 {
            return Err(Error::NonPositiveEigenvalue {
                context: "latent rotation",
                value: lambda,
            });
        }
    }

    // rho X X^T must reproduce U Lambda U^T
    let scaled = x * x.transpose() * rho;
    let target = pair.reconstruct();
    let defect = (&scaled - target.matrix()).norm();
    let scale = target.matrix().norm().max(1.0);
    let tolerance = 1e-8;
    if defect > tolerance * scale {
        return Err(Error::SignalMismatch {
            context: "rho X X^T vs U Lambda U^T",
            defect: defect / scale,
            tolerance,
        });
    }

    let sqrt_rho_x = x * rho.sqrt();
    let inv_sqrt_lambda =
        DMatrix::from_fn(r, r, |i, j| if i == j { pair.eigenvalues()[i].powf(-0.5) } else { 0.0 });
    let core = inv_sqrt_lambda * pair.frame().transpose() * &sqrt_rho_x;
    let svd = core.svd(true, true);
    let rotation = svd.u.expect("svd with u") * svd.v_t.expect("svd with v_t");

    let sqrt_lambda =
        DMatrix::from_fn(r, r, |i, j| if i == j { pair.eigenvalues()[i].sqrt() } else { 0.0 });
    let residual = (&sqrt_rho_x - pair.frame() * sqrt_lambda * &rotation).norm();
    let orthogonality_defect = orthonormality_defect(&rotation);
    Ok(LatentRotation {
        rotation,
        residual,
        orthogonality_defect,
    })
}

/// The pair `(W, W_X)` of alignments for one instance.
#[derive(Clone, Debug)]
pub struct AlignmentPair {
    pub w: DMatrix<f64>,
    pub w_x: DMatrix<f64>,
    pub w_defect: f64,
    pub w_x_defect: f64,
    pub degenerate: bool,
    pub latent_residual: f64,
}

impl AlignmentPair {
    /// Computes both alignments for `(U_hat, (U, Lambda), X, rho)`.
    pub fn compute(
        u_hat: &DMatrix<f64>,
        pair: &SpectralPair,
        x: &DMatrix<f64>,
        rho: f64,
    ) -> Result<Self> {
        let procrustes = procrustes_align(u_hat, pair.frame())?;
        let latent = latent_rotation(x, pair, rho)?;
        Ok(Self {
            w: procrustes.rotation,
            w_x: latent.rotation,
            w_defect: procrustes.orthogonality_defect,
            w_x_defect: latent.orthogonality_defect,
            degenerate: procrustes.degenerate,
            latent_residual: latent.residual,
        })
    }
}

fn check_frames(u_hat: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<()> {
    if u_hat.ncols() != u.ncols() || u_hat.nrows() != u.nrows() {
        return Err(Error::DimensionMismatch {
            context: "procrustes frames",
            expected: u.nrows() * u.ncols(),
            actual: u_hat.nrows() * u_hat.ncols(),
        });
    }
    for frame in [u_hat, u] {
        let defect = orthonormality_defect(frame);
        if defect.is_nan() || defect > 1e-8 {
            return Err(Error::NotOrthonormal { defect });
        }
    }
    Ok(())
}
