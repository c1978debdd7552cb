//! Error type shared by every module of the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by matrix validation, model generation, and the
/// perturbation/limit machinery.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("matrix is not square: {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("matrix is not symmetric: entries ({row}, {col}) and ({col}, {row}) differ")]
    NotSymmetric { row: usize, col: usize },

    #[error("rank {rank} out of range for order-{order} matrix")]
    RankOutOfRange { rank: usize, order: usize },

    #[error("{context}: dimension mismatch, expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("frame columns are not orthonormal: max |U^T U - I| = {defect:e}")]
    NotOrthonormal { defect: f64 },

    #[error("eigenvalues not sorted by descending magnitude at position {position}")]
    NotMagnitudeSorted { position: usize },

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("{context}: eigenvalue block must be strictly positive, found {value:e}")]
    NonPositiveEigenvalue { context: &'static str, value: f64 },

    #[error("entry ({row}, {col}) = {value} is not a probability in [0, 1]")]
    ProbabilityOutOfRange { row: usize, col: usize, value: f64 },

    #[error("noise scale must be positive, got {value}")]
    NonPositiveScale { value: f64 },

    #[error("block proportions must be positive and sum to 1, got sum {sum}")]
    InvalidProportions { sum: f64 },

    #[error("rounded block sizes sum to {total}, expected {n}")]
    BlockSizeMismatch { total: usize, n: usize },

    #[error("{context}: relative defect {defect:e} exceeds tolerance {tolerance:e}")]
    SignalMismatch {
        context: &'static str,
        defect: f64,
        tolerance: f64,
    },

    #[error("perturbed eigenvalue block is numerically singular: |lambda_rr| = {value:e}")]
    SingularEigenblock { value: f64 },

    #[error("Neumann series does not converge: ||E|| ||Lambda_hat^-1|| = {ratio}")]
    NeumannDivergent { ratio: f64 },

    #[error("sparsity regime requires n*rho > 1, got {n_rho}")]
    SparsityRegime { n_rho: f64 },

    #[error("second-moment matrix is numerically singular: smallest eigenvalue {min_eigenvalue:e}")]
    SingularXi { min_eigenvalue: f64 },

    #[error("variance profile of this noise kind needs explicit per-row variances")]
    VarianceProfileUnsupported,

    #[error("group {group} has {got} samples, need at least {need}")]
    TooFewSamples { group: usize, need: usize, got: usize },

    #[error("sample is degenerate: zero variance")]
    DegenerateSample,

    #[error("level curves are only defined for 2x2 covariances, got {rank}x{rank}")]
    EllipseDimension { rank: usize },

    #[error("empty input: {context}")]
    Empty { context: &'static str },

    #[error("eigensolver failed: {0}")]
    EigenSolver(String),
}
