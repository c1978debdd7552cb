//! Dense symmetric spectral primitives, matrix norms, and subspace distances.
//!
//! Everything downstream builds on three conventions fixed here:
//!
//! * eigenvalues are sorted by descending magnitude, ties broken by
//!   descending signed value, then by ascending pre-sort index;
//! * each eigenvector is normalized so that its largest-magnitude entry is
//!   positive (ties resolved toward the lowest index);
//! * singular values of frame products are clamped into `[0, 1]` before
//!   `acos` when forming canonical angles.
//!
//! The conventions make every spectral output a deterministic function of the
//! input bytes, which the experiment harness relies on for reproducible CSVs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Maximum allowed `max |U^T U - I|` for a frame to count as orthonormal.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// A real symmetric matrix with symmetry guaranteed at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    data: DMatrix<f64>,
}

impl SymmetricMatrix {
    /// Wraps a dense matrix, requiring exact (bitwise) symmetry.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::NotSquare {
                rows: data.nrows(),
                cols: data.ncols(),
            });
        }
        check_finite(&data)?;
        for i in 0..data.nrows() {
            for j in (i + 1)..data.ncols() {
                if data[(i, j)] != data[(j, i)] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { data })
    }

    /// Builds the matrix from its upper triangle, mirroring into the lower.
    pub fn from_upper(mut data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::NotSquare {
                rows: data.nrows(),
                cols: data.ncols(),
            });
        }
        for i in 0..data.nrows() {
            for j in (i + 1)..data.ncols() {
                data[(j, i)] = data[(i, j)];
            }
        }
        check_finite(&data)?;
        Ok(Self { data })
    }

    /// Builds an order-`n` matrix entrywise; `f` is invoked only for `i <= j`.
    pub fn from_fn_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        check_finite(&data)?;
        Ok(Self { data })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            data: DMatrix::zeros(n, n),
        }
    }

    pub fn order(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }
}

impl std::ops::Add for &SymmetricMatrix {
    type Output = SymmetricMatrix;

    fn add(self, rhs: &SymmetricMatrix) -> SymmetricMatrix {
        assert_eq!(self.order(), rhs.order(), "order mismatch in sum");
        SymmetricMatrix {
            data: &self.data + &rhs.data,
        }
    }
}

impl std::ops::Sub for &SymmetricMatrix {
    type Output = SymmetricMatrix;

    fn sub(self, rhs: &SymmetricMatrix) -> SymmetricMatrix {
        assert_eq!(self.order(), rhs.order(), "order mismatch in difference");
        SymmetricMatrix {
            data: &self.data - &rhs.data,
        }
    }
}

/// Leading eigenvector frame `U` with its diagonal eigenvalue block `Lambda`.
#[derive(Clone, Debug)]
pub struct SpectralPair {
    frame: DMatrix<f64>,
    eigenvalues: DVector<f64>,
}

impl SpectralPair {
    /// Validates the frame (orthonormal to [`ORTHONORMALITY_TOL`]) and the
    /// magnitude ordering of the eigenvalues.
    pub fn new(frame: DMatrix<f64>, eigenvalues: DVector<f64>) -> Result<Self> {
        if frame.ncols() != eigenvalues.len() {
            return Err(Error::DimensionMismatch {
                context: "spectral pair",
                expected: frame.ncols(),
                actual: eigenvalues.len(),
            });
        }
        let defect = orthonormality_defect(&frame);
        if defect.is_nan() || defect > ORTHONORMALITY_TOL {
            return Err(Error::NotOrthonormal { defect });
        }
        for i in 1..eigenvalues.len() {
            if eigenvalues[i].abs() > eigenvalues[i - 1].abs() {
                return Err(Error::NotMagnitudeSorted { position: i });
            }
        }
        Ok(Self { frame, eigenvalues })
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Number of retained eigenpairs `r`.
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Ambient dimension `n`.
    pub fn order(&self) -> usize {
        self.frame.nrows()
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn min_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, v| a.min(v.abs()))
    }

    /// `U Lambda U^T`, symmetric by construction.
    pub fn reconstruct(&self) -> SymmetricMatrix {
        let n = self.order();
        let r = self.rank();
        SymmetricMatrix::from_fn_upper(n, |i, j| {
            (0..r)
                .map(|k| self.frame[(i, k)] * self.eigenvalues[k] * self.frame[(j, k)])
                .sum()
        })
        .expect("reconstruction of a finite pair is finite")
    }
}

/// Complete eigendecomposition, magnitude-sorted.
#[derive(Clone, Debug)]
pub struct FullEig {
    /// Eigenvalues, `|values[0]| >= |values[1]| >= ...`.
    pub values: DVector<f64>,
    /// Eigenvectors as columns, matching `values`, sign-normalized.
    pub vectors: DMatrix<f64>,
}

impl FullEig {
    /// The `r` leading-magnitude eigenpairs as a [`SpectralPair`].
    pub fn leading(&self, r: usize) -> Result<SpectralPair> {
        let n = self.values.len();
        if r == 0 || r > n {
            return Err(Error::RankOutOfRange { rank: r, order: n });
        }
        SpectralPair::new(
            self.vectors.columns(0, r).into_owned(),
            DVector::from_iterator(r, self.values.iter().take(r).copied()),
        )
    }

    /// The `n - r` trailing eigenpairs (the complement `(U_perp, Lambda_perp)`).
    pub fn trailing(&self, r: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let n = self.values.len();
        if r > n {
            return Err(Error::RankOutOfRange { rank: r, order: n });
        }
        Ok((
            self.vectors.columns(r, n - r).into_owned(),
            DVector::from_iterator(n - r, self.values.iter().skip(r).copied()),
        ))
    }
}

/// Complete eigendecomposition of a symmetric matrix.
///
/// Backed by a dense sequential solver; the magnitude ordering, tie-breaking
/// and sign convention described in the module docs are applied on top, so
/// identical input bytes yield identical output bytes.
pub fn full_eig(m: &SymmetricMatrix) -> Result<FullEig> {
    let (raw_values, raw_vectors) = self_adjoint_eig(m.matrix())?;
    let n = raw_values.len();

    // magnitude-descending order; ties by descending signed value, then by
    // ascending pre-sort index
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (la, lb) = (raw_values[a], raw_values[b]);
        lb.abs()
            .partial_cmp(&la.abs())
            .expect("finite eigenvalues")
            .then(lb.partial_cmp(&la).expect("finite eigenvalues"))
            .then(a.cmp(&b))
    });

    let values = DVector::from_iterator(n, order.iter().map(|&k| raw_values[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &raw_vectors.column(src));
    }
    for j in 0..n {
        normalize_column_sign(&mut vectors, j);
    }
    Ok(FullEig { values, vectors })
}

/// The `r` leading-magnitude eigenpairs of `m`.
pub fn top_r(m: &SymmetricMatrix, r: usize) -> Result<SpectralPair> {
    if r == 0 || r > m.order() {
        return Err(Error::RankOutOfRange {
            rank: r,
            order: m.order(),
        });
    }
    full_eig(m)?.leading(r)
}

/// Maximum Euclidean norm of the rows of `t`; equals `sup_{|x|=1} ||Tx||_inf`.
///
/// Non-finite entries propagate as NaN.
pub fn two_to_inf_norm(t: &DMatrix<f64>) -> f64 {
    (0..t.nrows())
        .map(|i| t.row(i).norm())
        .fold(0.0, f64::max)
}

/// Spectral, Frobenius, and max-entry norms of a real matrix.
#[derive(Clone, Copy, Debug)]
pub struct MatrixNorms {
    /// Largest singular value.
    pub spectral: f64,
    pub frobenius: f64,
    pub max_abs: f64,
}

/// Computes the standard norm triple.
///
/// The spectral norm is the square root of the top eigenvalue of the smaller
/// Gram matrix. Non-finite inputs yield NaN norms.
pub fn matrix_norms(t: &DMatrix<f64>) -> MatrixNorms {
    if check_finite(t).is_err() {
        return MatrixNorms {
            spectral: f64::NAN,
            frobenius: f64::NAN,
            max_abs: f64::NAN,
        };
    }
    MatrixNorms {
        spectral: spectral_norm(t),
        frobenius: t.norm(),
        max_abs: t.amax(),
    }
}

/// Largest singular value via the smaller of the two Gram matrices.
pub fn spectral_norm(t: &DMatrix<f64>) -> f64 {
    if t.nrows() == 0 || t.ncols() == 0 {
        return 0.0;
    }
    let gram = if t.nrows() >= t.ncols() {
        t.transpose() * t
    } else {
        t * t.transpose()
    };
    let gram = SymmetricMatrix::from_upper(gram).expect("gram of finite matrix");
    let eig = full_eig(&gram).expect("gram eigendecomposition");
    eig.values[0].max(0.0).sqrt()
}

/// Principal angles between two `r`-dimensional subspaces.
#[derive(Clone, Debug)]
pub struct CanonicalAngles {
    angles: DVector<f64>,
}

impl CanonicalAngles {
    /// Angles in ascending order, radians in `[0, pi/2]`.
    pub fn angles(&self) -> &DVector<f64> {
        &self.angles
    }

    pub fn sines(&self) -> DVector<f64> {
        self.angles.map(f64::sin)
    }

    pub fn cosines(&self) -> DVector<f64> {
        self.angles.map(f64::cos)
    }

    /// `||sin Theta||` (spectral norm of the diagonal sine matrix).
    pub fn sin_theta_spectral(&self) -> f64 {
        self.angles
            .iter()
            .fold(0.0f64, |a, t| a.max(t.sin()))
    }

    /// `||sin Theta||_F`.
    pub fn sin_theta_frobenius(&self) -> f64 {
        self.sines().norm()
    }
}

/// Canonical angles of the pair `(U_hat, U)` from the singular values of
/// `U^T U_hat`, clamped into `[0, 1]` before `acos`.
pub fn canonical_angles(u_hat: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<CanonicalAngles> {
    if u_hat.ncols() != u.ncols() {
        return Err(Error::DimensionMismatch {
            context: "canonical angles",
            expected: u.ncols(),
            actual: u_hat.ncols(),
        });
    }
    if u_hat.nrows() != u.nrows() {
        return Err(Error::DimensionMismatch {
            context: "canonical angles rows",
            expected: u.nrows(),
            actual: u_hat.nrows(),
        });
    }
    for frame in [u_hat, u] {
        let defect = orthonormality_defect(frame);
        if defect.is_nan() || defect > 1e-8 {
            return Err(Error::NotOrthonormal { defect });
        }
    }
    let product = u.transpose() * u_hat;
    let sigma = product.svd(false, false).singular_values;
    // descending singular values give ascending angles
    let angles = DVector::from_iterator(
        sigma.len(),
        sigma.iter().map(|&s| s.clamp(0.0, 1.0).acos()),
    );
    Ok(CanonicalAngles { angles })
}

/// `max |F^T F - I|` for a tall frame `F`.
pub fn orthonormality_defect(frame: &DMatrix<f64>) -> f64 {
    let r = frame.ncols();
    let gram = frame.transpose() * frame;
    let mut defect = 0.0f64;
    for i in 0..r {
        for j in 0..r {
            let target = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((gram[(i, j)] - target).abs());
        }
    }
    defect
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// Flips the column sign so the largest-magnitude entry is positive,
/// ties resolved toward the lowest index.
fn normalize_column_sign(m: &mut DMatrix<f64>, col: usize) {
    let mut best = 0usize;
    let mut best_abs = 0.0f64;
    for i in 0..m.nrows() {
        let a = m[(i, col)].abs();
        if a > best_abs {
            best_abs = a;
            best = i;
        }
    }
    if m[(best, col)] < 0.0 {
        for i in 0..m.nrows() {
            m[(i, col)] = -m[(i, col)];
        }
    }
}

/// Sequential dense self-adjoint eigendecomposition (ascending eigenvalues).
fn self_adjoint_eig(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    use faer::dyn_stack::{MemBuffer, MemStack};
    use faer::linalg::evd::{
        self_adjoint_evd, self_adjoint_evd_scratch, ComputeEigenvectors, SelfAdjointEvdParams,
    };
    use faer::{Par, Spec};

    let n = m.nrows();
    let mut a = faer::Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            a[(i, j)] = m[(i, j)];
        }
    }
    let params = Spec::<SelfAdjointEvdParams, f64>::default();
    let mut s = faer::diag::Diag::<f64>::zeros(n);
    let mut u = faer::Mat::<f64>::zeros(n, n);
    let mut buf = MemBuffer::new(self_adjoint_evd_scratch::<f64>(
        n,
        ComputeEigenvectors::Yes,
        Par::Seq,
        params,
    ));
    self_adjoint_evd(
        a.as_ref(),
        s.as_mut(),
        Some(u.as_mut()),
        Par::Seq,
        MemStack::new(&mut buf),
        params,
    )
    .map_err(|e| Error::EigenSolver(format!("{e:?}")))?;

    let values = DVector::from_fn(n, |i, _| s[i]);
    let vectors = DMatrix::from_fn(n, n, |i, j| u[(i, j)]);
    Ok((values, vectors))
}
