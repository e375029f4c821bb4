use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::selection::CandidateRecord;
use super::sweep::{run_sweep, SweepSpec};
use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA: &str = "reward-uq/manifest/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// Digest of one candidate's serialized record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordDigest {
    pub index: usize,
    pub config: String,
    pub sha256: String,
}

/// Everything needed to rerun a sweep and check that it reproduces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub schema: String,
    pub tool_version: String,
    pub seed: u64,
    pub datasets: Vec<FileDigest>,
    pub config: SweepSpec,
    pub records: Vec<RecordDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn record_digest(r: &CandidateRecord) -> Result<RecordDigest> {
    let text = serde_json::to_string(r).map_err(|e| Error::json("candidate record", e))?;
    Ok(RecordDigest {
        index: r.index,
        config: r.config.clone(),
        sha256: sha256_hex(text.as_bytes()),
    })
}

fn dataset_digests(spec: &SweepSpec) -> Result<Vec<FileDigest>> {
    // Fixed-candidate sweeps read no data.
    if !spec.candidates.is_empty() {
        return Ok(Vec::new());
    }
    [("train", &spec.train), ("validation", &spec.validation), ("category_weights", &spec.category_weights)]
        .into_iter()
        .filter_map(|(role, p)| p.as_ref().map(|p| (role, p)))
        .map(|(role, p)| {
            Ok(FileDigest {
                role: role.to_string(),
                path: p.clone(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

/// Outcome of re-running a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCheck {
    pub reproduced: bool,
    pub mismatches: Vec<String>,
}

impl ExperimentManifest {
    pub fn for_sweep(spec: &SweepSpec, records: &[CandidateRecord]) -> Result<Self> {
        Ok(ExperimentManifest {
            schema: MANIFEST_SCHEMA.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: spec.seed,
            datasets: dataset_digests(spec)?,
            config: spec.clone(),
            records: records.iter().map(record_digest).collect::<Result<_>>()?,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(Error::InvalidInput(format!("unsupported manifest schema {:?}", m.schema)));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json("manifest", e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Checks the input digests, reruns the sweep and compares every
    /// candidate record digest.
    pub fn verify(&self) -> Result<ManifestCheck> {
        let mut mismatches = Vec::new();
        for d in &self.datasets {
            let now = sha256_file(&d.path)?;
            if now != d.sha256 {
                mismatches.push(format!("{} {} changed", d.role, d.path.display()));
            }
        }
        let rerun = run_sweep(&self.config)?;
        if rerun.manifest.records.len() != self.records.len() {
            mismatches.push("candidate count differs".to_string());
        }
        for (a, b) in self.records.iter().zip(&rerun.manifest.records) {
            if a != b {
                mismatches.push(format!("candidate {} ({}) differs", a.index, a.config));
            }
        }
        Ok(ManifestCheck {
            reproduced: mismatches.is_empty(),
            mismatches,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
