//! Reproducible experiment driver for antithetic noise designs on analytic
//! diffusion models. Each run reads a JSON config and writes one output
//! directory: `manifest.json`, `tables/*.csv`, `plotdata/*.csv` and, for
//! some experiments, `reports/*.json`.

pub mod config;
pub mod experiments;
pub mod model;
pub mod output;

use std::path::Path;

use thiserror::Error;

pub use config::{Experiment, ExperimentConfig};
pub use output::Manifest;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("numerical failure: {0}")]
    Numerical(#[from] antithetic_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        LabError::Config { field: field.into(), message: message.into() }
    }

    /// 2 for config problems, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config { .. } => 2,
            LabError::Numerical(_) => 3,
            LabError::Io(_) => 1,
        }
    }
}

/// Stable stream ids; every random quantity in a run is drawn from
/// `RngStream::new(seed, id)` or a numbered child of it.
pub mod streams {
    pub const PN_NOISE: u64 = 1;
    pub const RR_NOISE_A: u64 = 2;
    pub const RR_NOISE_B: u64 = 3;
    pub const STEP_NOISE: u64 = 4;
    pub const MC: u64 = 10;
    pub const AMC: u64 = 11;
    pub const K_ANTITHETIC: u64 = 12;
    pub const RQMC: u64 = 13;
    pub const ANCHORS: u64 = 20;
    pub const CENTERS: u64 = 21;
    pub const PROBES: u64 = 30;
    pub const CHAINS: u64 = 40;
    pub const CHAIN_SAMPLES: u64 = 41;
    pub const ADDITIVE: u64 = 42;
    pub const ADDITIVE_SAMPLES: u64 = 43;
    pub const MONOTONICITY: u64 = 44;
}

/// Runs `config` into `out`, using `threads` workers (0 picks the default).
/// Outputs do not depend on the thread count.
pub fn run(config: &ExperimentConfig, out: &Path, threads: usize) -> Result<Manifest, LabError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| LabError::config("threads", e.to_string()))?;
    pool.install(|| experiments::dispatch(config, out))
}
