//! Content fingerprints, run manifests and JSON output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::markov::ProcessModel;
use crate::observables::Decomposition;
use crate::schedule::Schedule;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

fn hash_floats(hasher: &mut Sha256, values: impl IntoIterator<Item = f64>) {
    for v in values {
        hasher.update(v.to_bits().to_le_bytes());
    }
}

/// Hash of the model's kind, rates or probabilities, observable map and
/// initial law, bit-exact in the stored doubles.
pub fn model_fingerprint(model: &ProcessModel) -> String {
    let mut h = Sha256::new();
    let (tag, matrix, initial) = match model {
        ProcessModel::Discrete(m) => ("dtmc", m.transition(), m.initial()),
        ProcessModel::Continuous(m) => ("ctmc", m.generator(), m.initial()),
    };
    h.update(tag.as_bytes());
    h.update((matrix.nrows() as u64).to_le_bytes());
    // row-major
    hash_floats(&mut h, (0..matrix.nrows()).flat_map(|a| (0..matrix.ncols()).map(move |b| matrix[(a, b)])));
    hash_floats(&mut h, initial.iter().copied());
    for p in model.observable() {
        h.update((p.len() as u64).to_le_bytes());
        hash_floats(&mut h, p.iter().copied());
    }
    hex::encode(h.finalize())
}

pub fn schedule_fingerprint(schedule: &Schedule) -> String {
    sha256_hex(serde_json::to_string(schedule).expect("schedule serialises").as_bytes())
}

/// Hash of the tabulated `F` and the marginal it was decomposed against.
pub fn observable_fingerprint(decomposition: &Decomposition) -> String {
    let mut h = Sha256::new();
    h.update((decomposition.ell() as u64).to_le_bytes());
    hash_floats(&mut h, decomposition.mu().iter().copied());
    hash_floats(&mut h, decomposition.full().iter().copied());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprints {
    pub model: String,
    pub schedule: String,
    pub observable: String,
}

impl Fingerprints {
    pub fn of(model: &ProcessModel, schedule: &Schedule, decomposition: &Decomposition) -> Self {
        Self {
            model: model_fingerprint(model),
            schedule: schedule_fingerprint(schedule),
            observable: observable_fingerprint(decomposition),
        }
    }

    /// Errors on the first differing field.
    pub fn ensure_matches(&self, other: &Self) -> Result<()> {
        for (a, b) in [(&self.model, &other.model), (&self.schedule, &other.schedule), (&self.observable, &other.observable)] {
            if a != b {
                return Err(Error::FingerprintMismatch { expected: a.clone(), found: b.clone() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch.
    pub started_at: u64,
    pub finished_at: u64,
    pub outputs: Vec<OutputFile>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn new(command: &str, config_text: &str, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            config_hash: sha256_hex(config_text.as_bytes()),
            tool_version: TOOL_VERSION.into(),
            seed,
            started_at: unix_now(),
            finished_at: 0,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path)?;
        self.outputs.push(OutputFile { path: path.to_path_buf(), sha256: sha256_hex(&bytes) });
        Ok(())
    }

    /// Recomputes every output hash; returns the first stale entry.
    pub fn verify(&self) -> Result<()> {
        for out in &self.outputs {
            let found = sha256_hex(&fs::read(&out.path)?);
            if found != out.sha256 {
                return Err(Error::FingerprintMismatch { expected: out.sha256.clone(), found });
            }
        }
        Ok(())
    }

    pub fn finish(&mut self, path: &Path) -> Result<()> {
        self.finished_at = unix_now();
        write_json(path, self)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("a.json");
        write_json(&out, &vec![1, 2, 3]).unwrap();
        let mut m = RunManifest::new("covariance", "x = 1", Some(7));
        m.record(&out).unwrap();
        m.verify().unwrap();
        fs::write(&out, "changed").unwrap();
        assert!(matches!(m.verify(), Err(Error::FingerprintMismatch { .. })));
    }
}
