use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl Artifact {
    pub fn of(path: &Path) -> Result<Self, CliError> {
        let data =
            std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Ok(Self {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&data)),
            bytes: data.len() as u64,
        })
    }
}

/// Record of one command invocation.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config: Map<String, Value>,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
    pub started_unix_ms: u128,
    pub elapsed_ms: f64,
    pub status: String,
    #[serde(skip)]
    clock: Option<Instant>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            seed,
            config: Map::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_millis()),
            elapsed_ms: 0.0,
            status: "ok".into(),
            clock: Some(Instant::now()),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("config values serialize");
        self.config.insert(key.to_string(), v);
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.push(Artifact::of(path)?);
        Ok(())
    }

    /// Writes `bytes` to `out_dir/name` and records it.
    pub fn write_output(
        &mut self,
        out_dir: &Path,
        name: &str,
        bytes: &[u8],
    ) -> Result<PathBuf, CliError> {
        let path = out_dir.join(name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))?;
        self.record_output(&path)?;
        Ok(path)
    }

    pub fn record_output(&mut self, path: &Path) -> Result<(), CliError> {
        self.outputs
            .push(Artifact::of(path).map_err(|e| CliError::Internal(e.to_string()))?);
        Ok(())
    }

    pub fn finish(mut self, out_dir: &Path, status: &str) -> Result<PathBuf, CliError> {
        self.status = status.to_string();
        self.elapsed_ms = self.clock.map_or(0.0, |c| c.elapsed().as_secs_f64() * 1e3);
        let path = out_dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        std::fs::write(&path, text + "\n")
            .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}
