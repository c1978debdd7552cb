//! JSON experiment configuration.
//!
//! The schema is flat with explicit `kind` discriminators and rejects unknown
//! fields. Serialization preserves the canonical field order (declaration
//! order below), so a config written in canonical order round-trips to the
//! same bytes.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use specnoise_core::{NoiseKind, SbmSpec, SpikeSpec};

use crate::CliError;

/// Which reproduction the run performs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Deviation curve: `||U_hat - U W||` statistics over an n-grid.
    FirstOrder,
    /// Fluctuation scatter, covariance table, and level-curve figure.
    SecondOrder,
    /// One-dimensional spike fluctuation density.
    #[serde(rename = "spike-1d")]
    Spike1d,
    /// Two-dimensional spike fluctuation scatter.
    #[serde(rename = "spike-2d")]
    Spike2d,
    /// Entrywise noise-power concentration diagnostics.
    AssumptionCheck,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::FirstOrder => "first-order",
            ExperimentKind::SecondOrder => "second-order",
            ExperimentKind::Spike1d => "spike-1d",
            ExperimentKind::Spike2d => "spike-2d",
            ExperimentKind::AssumptionCheck => "assumption-check",
        }
    }
}

/// Model side of the configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    Sbm {
        /// Symmetric `K x K` block edge probabilities.
        probabilities: Vec<Vec<f64>>,
        /// Positive block proportions summing to 1.
        proportions: Vec<f64>,
        rho: f64,
        #[serde(default)]
        hollow_diagonal: bool,
    },
    Spike {
        /// 1 or 2; rank 2 uses the sign-split latent pattern.
        rank: usize,
        /// Spike strength as a multiple of n (`lambda = lambda_over_n * n`).
        lambda_over_n: f64,
        noise: NoiseConfig,
    },
}

/// Noise ensemble for spike models.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseConfig {
    Gaussian { variance: f64 },
    Laplace { scale: f64 },
    Uniform { half_width: f64 },
}

impl NoiseConfig {
    pub fn to_kind(self) -> NoiseKind {
        match self {
            NoiseConfig::Gaussian { variance } => NoiseKind::Gaussian { variance },
            NoiseConfig::Laplace { scale } => NoiseKind::Laplace { scale },
            NoiseConfig::Uniform { half_width } => NoiseKind::Uniform { half_width },
        }
    }
}

/// Tolerance knobs with conservative defaults.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    /// Abort threshold on the replicate failure rate (default 0.1).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_failure_rate: Option<f64>,
    /// Concentration exponent `xi` for assumption checks (default 1.1).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
}

/// A full experiment description, parseable from and re-serializable to the
/// same JSON bytes (canonical field order, unknown fields rejected).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: ModelConfig,
    /// Strictly increasing vertex counts.
    pub n_grid: Vec<usize>,
    /// Replicates per grid point, at least 1.
    pub replicates: usize,
    pub base_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceOverrides>,
    /// Worker thread count; defaults to the available cores.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self, CliError> {
        let config: ExperimentConfig =
            serde_json::from_slice(bytes).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Canonical serialization (the byte form that hashes and round-trips).
    pub fn to_canonical_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("config serializes");
        out.push('\n');
        out
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.replicates == 0 {
            return Err(CliError::Config("replicates must be at least 1".into()));
        }
        if self.n_grid.is_empty() {
            return Err(CliError::Config("n_grid must be nonempty".into()));
        }
        for pair in self.n_grid.windows(2) {
            if pair[1] <= pair[0] {
                return Err(CliError::Config(
                    "n_grid must be strictly increasing".into(),
                ));
            }
        }
        if let Some(t) = &self.tolerances {
            if let Some(rate) = t.max_failure_rate {
                if !(0.0..=1.0).contains(&rate) {
                    return Err(CliError::Config(
                        "max_failure_rate must lie in [0, 1]".into(),
                    ));
                }
            }
            if let Some(xi) = t.xi {
                if xi.is_nan() || xi <= 1.0 {
                    return Err(CliError::Config("xi must exceed 1".into()));
                }
            }
        }
        match &self.model {
            ModelConfig::Sbm {
                probabilities,
                proportions,
                rho,
                ..
            } => {
                let k = proportions.len();
                if probabilities.len() != k || probabilities.iter().any(|row| row.len() != k) {
                    return Err(CliError::Config(
                        "probabilities must be a K x K matrix matching proportions".into(),
                    ));
                }
                if rho.is_nan() || *rho <= 0.0 || *rho > 1.0 {
                    return Err(CliError::Config("rho must lie in (0, 1]".into()));
                }
                // full validation happens per n; check the smallest grid point now
                self.sbm_spec(self.n_grid[0])
                    .map_err(|e| CliError::Config(e.to_string()))?;
            }
            ModelConfig::Spike {
                rank,
                lambda_over_n,
                noise,
            } => {
                if !matches!(rank, 1 | 2) {
                    return Err(CliError::Config("spike rank must be 1 or 2".into()));
                }
                if lambda_over_n.is_nan() || *lambda_over_n <= 0.0 {
                    return Err(CliError::Config("lambda_over_n must be positive".into()));
                }
                if *rank == 2 {
                    for &n in &self.n_grid {
                        if n % 2 != 0 {
                            return Err(CliError::Config(format!(
                                "rank-2 spike needs even n, got {n}"
                            )));
                        }
                    }
                }
                match noise {
                    NoiseConfig::Gaussian { variance } if *variance < 0.0 => {
                        return Err(CliError::Config("gaussian variance must be >= 0".into()))
                    }
                    NoiseConfig::Laplace { scale } if *scale <= 0.0 => {
                        return Err(CliError::Config("laplace scale must be positive".into()))
                    }
                    NoiseConfig::Uniform { half_width } if *half_width <= 0.0 => {
                        return Err(CliError::Config("uniform half-width must be positive".into()))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Effective failure-rate threshold.
    pub fn max_failure_rate(&self) -> f64 {
        self.tolerances
            .and_then(|t| t.max_failure_rate)
            .unwrap_or(0.1)
    }

    /// Effective concentration exponent.
    pub fn xi(&self) -> f64 {
        self.tolerances.and_then(|t| t.xi).unwrap_or(1.1)
    }

    pub fn rho(&self) -> f64 {
        match &self.model {
            ModelConfig::Sbm { rho, .. } => *rho,
            ModelConfig::Spike { .. } => 1.0,
        }
    }

    /// Instantiates the block model at one grid point.
    pub fn sbm_spec(&self, n: usize) -> specnoise_core::Result<SbmSpec> {
        match &self.model {
            ModelConfig::Sbm {
                probabilities,
                proportions,
                rho,
                hollow_diagonal,
            } => {
                let k = proportions.len();
                let b = DMatrix::from_fn(k, k, |i, j| probabilities[i][j]);
                let pi = DVector::from_vec(proportions.clone());
                let mut spec = SbmSpec::new(b, pi, n, *rho)?;
                spec.hollow_diagonal = *hollow_diagonal;
                Ok(spec)
            }
            ModelConfig::Spike { .. } => unreachable!("sbm_spec on a spike model"),
        }
    }

    /// Instantiates the spike model at one grid point.
    pub fn spike_spec(&self, n: usize) -> SpikeSpec {
        match &self.model {
            ModelConfig::Spike {
                rank,
                lambda_over_n,
                noise,
            } => {
                let lambda = lambda_over_n * n as f64;
                match rank {
                    1 => specnoise_core::spike_1d(n, lambda, noise.to_kind()),
                    2 => specnoise_core::spike_2d_signs(n, lambda, noise.to_kind()),
                    _ => unreachable!("validated rank"),
                }
            }
            ModelConfig::Sbm { .. } => unreachable!("spike_spec on an sbm model"),
        }
    }

    pub fn is_sbm(&self) -> bool {
        matches!(self.model, ModelConfig::Sbm { .. })
    }

    /// Signal rank at a grid point (block-matrix rank or spike rank).
    pub fn signal_rank(&self, n: usize) -> specnoise_core::Result<usize> {
        match &self.model {
            ModelConfig::Sbm { .. } => {
                let spec = self.sbm_spec(n)?;
                let latent =
                    specnoise_core::latent_from_b(&spec.probabilities, &spec.memberships())?;
                Ok(latent.rank)
            }
            ModelConfig::Spike { rank, .. } => Ok(*rank),
        }
    }
}
