use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const TOOL: &str = "vrd";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub kind: String,
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config_sha256: String,
    /// Resolved config: rerunning with this as `--config` reproduces every artifact.
    pub config: RunConfig,
    pub artifacts: Vec<ArtifactRecord>,
    pub started_at_unix_s: u64,
    pub wall_time_s: f64,
    pub threads: Option<usize>,
}

/// Collects artifacts for one run and writes them under `<command>-<hash12>-*`.
pub struct ArtifactWriter {
    dir: PathBuf,
    prefix: String,
    records: Vec<ArtifactRecord>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path, command: &str, hash: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            prefix: format!("{command}-{}", &hash[..12]),
            records: Vec::new(),
        })
    }

    /// Writes `<prefix>-<kind>.<ext>`.
    pub fn write(&mut self, kind: &str, ext: &str, bytes: &[u8]) -> Result<PathBuf> {
        let file = format!("{}-{kind}.{ext}", self.prefix);
        let path = self.dir.join(&file);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.records.push(ArtifactRecord {
            kind: kind.to_string(),
            file,
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, kind: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(kind, "json", &bytes)
    }

    pub fn finish(
        self,
        cfg: &RunConfig,
        threads: Option<usize>,
        started: SystemTime,
        clock: Instant,
    ) -> Result<PathBuf> {
        let hash = cfg.hash();
        let manifest = Manifest {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: cfg.command.name().into(),
            seed: cfg.seed,
            config_sha256: hash,
            config: cfg.recorded(),
            artifacts: self.records,
            started_at_unix_s: started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            wall_time_s: clock.elapsed().as_secs_f64(),
            threads,
        };
        let path = self.dir.join(format!("{}.manifest.json", self.prefix));
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
