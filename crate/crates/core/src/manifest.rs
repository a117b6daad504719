//! Run manifests: a structured text record of the configuration, the stages
//! executed, and every produced file with its content hash.

use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub stage: String,
    /// "ok", "failed: <message>", or "skipped".
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub experiment: String,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub config: Vec<(String, String)>,
    pub stages: Vec<StageOutcome>,
    /// Produced files, relative to the output directory, with sha256 hashes.
    pub files: Vec<(String, String)>,
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

impl RunManifest {
    pub fn begin(config: &ExperimentConfig) -> Self {
        RunManifest {
            experiment: config.experiment.name().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: now_unix(),
            finished_unix: None,
            config: config.echo().into_iter().collect(),
            stages: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn record_stage(&mut self, stage: &str, status: &str) {
        self.stages.push(StageOutcome {
            stage: stage.to_string(),
            status: status.to_string(),
        });
    }

    /// Register a produced file (path relative to the output directory).
    pub fn record_file(&mut self, out_dir: &Path, relative: &str) -> Result<()> {
        let hash = sha256_file(&out_dir.join(relative))?;
        self.files.push((relative.to_string(), hash));
        Ok(())
    }

    pub fn finalize(&mut self) {
        self.finished_unix = Some(now_unix());
    }

    /// Write the manifest (provisional while `finished_unix` is unset).
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# run manifest")?;
        writeln!(f, "experiment {}", self.experiment)?;
        writeln!(f, "version {}", self.version)?;
        writeln!(f, "started_unix {}", self.started_unix)?;
        match self.finished_unix {
            Some(t) => writeln!(f, "finished_unix {t}")?,
            None => writeln!(f, "finished_unix pending")?,
        }
        writeln!(f, "[config]")?;
        for (k, v) in &self.config {
            writeln!(f, "{k} = {v}")?;
        }
        writeln!(f, "[stages]")?;
        for s in &self.stages {
            writeln!(f, "{} {}", s.stage, s.status)?;
        }
        writeln!(f, "[files]")?;
        for (name, hash) in &self.files {
            writeln!(f, "{hash}  {name}")?;
        }
        Ok(())
    }

    pub fn path_in(out_dir: &Path) -> PathBuf {
        out_dir.join("manifest.txt")
    }
}
