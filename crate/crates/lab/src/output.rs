use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{ExperimentConfig, LabError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Everything needed to tell two runs apart; deliberately free of
/// timestamps, hostnames and output paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    pub config_sha256: String,
    pub streams: BTreeMap<String, u64>,
    pub sampler_calls: BTreeMap<String, usize>,
    pub artifacts: Vec<Artifact>,
    pub summary: serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct RunDir {
    root: PathBuf,
    artifacts: BTreeMap<String, Artifact>,
    pub streams: BTreeMap<String, u64>,
    pub sampler_calls: BTreeMap<String, usize>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, LabError> {
        for sub in ["tables", "plotdata", "reports"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(Self { root: root.to_path_buf(), artifacts: BTreeMap::new(), streams: BTreeMap::new(), sampler_calls: BTreeMap::new() })
    }

    pub fn stream(&mut self, name: &str, id: u64) -> u64 {
        self.streams.insert(name.to_string(), id);
        id
    }

    fn write(&mut self, rel: String, bytes: &[u8]) -> Result<(), LabError> {
        fs::write(self.root.join(&rel), bytes)?;
        let artifact = Artifact { path: rel.clone(), sha256: sha256_hex(bytes), bytes: bytes.len() };
        self.artifacts.insert(rel, artifact);
        Ok(())
    }

    pub fn table<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), LabError> {
        self.write(format!("tables/{name}.csv"), &csv_bytes(rows)?)
    }

    pub fn plotdata<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), LabError> {
        self.write(format!("plotdata/{name}.csv"), &csv_bytes(rows)?)
    }

    pub fn raw(&mut self, dir: &str, name: &str, bytes: &[u8]) -> Result<(), LabError> {
        self.write(format!("{dir}/{name}"), bytes)
    }

    pub fn report<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), LabError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(antithetic_core::Error::from)?;
        bytes.push(b'\n');
        self.write(format!("reports/{name}.json"), &bytes)
    }

    pub fn finish(self, config: &ExperimentConfig, summary: serde_json::Value) -> Result<Manifest, LabError> {
        let manifest = Manifest {
            schema_version: crate::config::SCHEMA_VERSION,
            experiment: config.experiment.kind().to_string(),
            seed: config.seed,
            config_sha256: sha256_hex(config.canonical_json().as_bytes()),
            streams: self.streams,
            sampler_calls: self.sampler_calls,
            artifacts: self.artifacts.into_values().collect(),
            summary,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(antithetic_core::Error::from)?;
        bytes.push(b'\n');
        fs::write(self.root.join("manifest.json"), bytes)?;
        Ok(manifest)
    }
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, LabError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| antithetic_core::Error::Format(e.to_string()))?;
    }
    w.into_inner().map_err(|e| LabError::Io(e.into_error()))
}
