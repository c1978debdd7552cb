//! Run manifest: configuration hash, derived seeds, failures, and a content
//! hash for every output file.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Seeds used at one grid point, in replicate order.
#[derive(Clone, Debug, Serialize)]
pub struct GridSeeds {
    pub n: usize,
    pub seeds: Vec<u64>,
}

/// A replicate that failed and was excluded from aggregates.
#[derive(Clone, Debug, Serialize)]
pub struct ReplicateFailure {
    pub n: usize,
    pub replicate: u64,
    pub message: String,
}

/// One output file with its content hash.
#[derive(Clone, Debug, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

/// The complete record of one run.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    /// SHA-256 of the canonical config serialization.
    pub config_hash: String,
    pub version: String,
    pub kind: String,
    pub base_seed: u64,
    pub threads: usize,
    pub replicate_seeds: Vec<GridSeeds>,
    pub failures: Vec<ReplicateFailure>,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn new(config_hash: String, kind: &str, base_seed: u64, threads: usize) -> Self {
        Self {
            config_hash,
            version: env!("CARGO_PKG_VERSION").to_string(),
            kind: kind.to_string(),
            base_seed,
            threads,
            replicate_seeds: Vec::new(),
            failures: Vec::new(),
            wall_clock_seconds: 0.0,
            outputs: Vec::new(),
        }
    }

    /// Registers a written file by name and content.
    pub fn record_output(&mut self, path: &Path, contents: &[u8]) {
        self.outputs.push(OutputFile {
            path: path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            bytes: contents.len(),
            sha256: sha256_hex(contents),
        });
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("manifest serializes");
        out.push('\n');
        out
    }
}
