//! Run manifests: what ran, with which settings, and what it wrote.

use serde::Serialize;
use sha2::{Digest, Sha256};

use swrl_core::lowdeg::{JACKKNIFE_BLOCKS, MIN_MC_TRIALS};
use swrl_core::roc::{DEFAULT_GAMMA_DISCRETIZE, DEFAULT_GAMMA_PERTURB, QUAD_TOL};
use swrl_core::spectral::{CLIP_EPS, MIN_CALIB_TRIALS};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    pub quad_tol: f64,
    pub clip_eps: f64,
    pub min_calib_trials: usize,
    pub min_mc_trials: usize,
    pub jackknife_blocks: usize,
    pub default_gamma_discretize: f64,
    pub default_gamma_perturb: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            quad_tol: QUAD_TOL,
            clip_eps: CLIP_EPS,
            min_calib_trials: MIN_CALIB_TRIALS,
            min_mc_trials: MIN_MC_TRIALS,
            jackknife_blocks: JACKKNIFE_BLOCKS,
            default_gamma_discretize: DEFAULT_GAMMA_DISCRETIZE,
            default_gamma_perturb: DEFAULT_GAMMA_PERTURB,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputDigest {
    /// File path, or `-` for stdout.
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub config_sha256: String,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub tolerances: Tolerances,
    pub outputs: Vec<OutputDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Digest of the canonical JSON form of the resolved config.
pub fn config_digest(cfg: &ExperimentConfig) -> String {
    sha256_hex(
        serde_json::to_string(cfg)
            .expect("plain data serializes")
            .as_bytes(),
    )
}

impl RunManifest {
    pub fn new(
        cfg: &ExperimentConfig,
        threads: usize,
        wall_time_seconds: f64,
        outputs: Vec<OutputDigest>,
    ) -> Self {
        RunManifest {
            tool: "swrl",
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: config_digest(cfg),
            config: cfg.clone(),
            threads,
            wall_time_seconds,
            tolerances: Tolerances::default(),
            outputs,
        }
    }
}
