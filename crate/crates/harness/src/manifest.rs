//! Output directories and the run manifest.
//!
//! Every file a command produces goes through [`OutDir`], which keeps the
//! index. The manifest is written last, so its presence marks a finished run.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::spec::{Command, ExperimentSpec, Overrides};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// The simulation produced a non-finite value and stopped.
    Aborted { step: u64, t: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagEcho {
    pub config: String,
    pub out: String,
    pub overrides: Overrides,
    pub threads_env: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub flags: FlagEcho,
    /// The configuration after defaults and overrides were applied.
    pub config: serde_json::Value,
    pub threads: usize,
    pub status: RunStatus,
    pub started_unix: f64,
    pub wall_clock_seconds: f64,
    pub stages: Vec<StageTiming>,
    pub outputs: Vec<OutputEntry>,
}

/// An output directory that records what is written into it.
pub struct OutDir {
    root: PathBuf,
    entries: Vec<OutputEntry>,
    stages: Vec<StageTiming>,
    started: Instant,
    started_unix: f64,
}

impl OutDir {
    /// Creates `root` and removes a manifest left by an earlier run.
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        let stale = root.join(MANIFEST_FILE);
        if stale.exists() {
            fs::remove_file(&stale)?;
        }
        Ok(OutDir {
            root: root.to_path_buf(),
            entries: Vec::new(),
            stages: Vec::new(),
            started: Instant::now(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Adds a file that was written by other means.
    pub fn record(&mut self, rel: &str) -> Result<()> {
        let bytes = fs::metadata(self.path(rel)).with_context(|| format!("missing output {rel}"))?.len();
        self.entries.retain(|e| e.path != rel);
        self.entries.push(OutputEntry { path: rel.to_string(), bytes });
        Ok(())
    }

    pub fn write_bytes(&mut self, rel: &str, data: &[u8]) -> Result<()> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, data).with_context(|| format!("writing {}", path.display()))?;
        self.record(rel)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    /// Writes through `fill` into an in-memory buffer, then to disk.
    pub fn write_with<F>(&mut self, rel: &str, fill: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<()>,
    {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write_bytes(rel, &buf)
    }

    /// Runs `f` and records its wall time under `name`.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t0 = Instant::now();
        let out = f(self);
        self.stages.push(StageTiming {
            name: name.to_string(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        out
    }

    /// Writes the manifest and returns it.
    pub fn finish(mut self, spec: &ExperimentSpec, config: serde_json::Value, status: RunStatus) -> Result<RunManifest> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = RunManifest {
            tool: "epicycle".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: spec.command,
            flags: FlagEcho {
                config: spec.config.display().to_string(),
                out: spec.out.display().to_string(),
                overrides: spec.overrides,
                threads_env: std::env::var(crate::THREADS_ENV).ok(),
            },
            config,
            threads: rayon::current_num_threads(),
            status,
            started_unix: self.started_unix,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            stages: self.stages,
            outputs: self.entries,
        };
        let path = self.root.join(MANIFEST_FILE);
        let mut f = fs::File::create(&path)?;
        f.write_all(serde_json::to_string_pretty(&manifest)?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(manifest)
    }
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    crate::spec::load_json(&dir.join(MANIFEST_FILE))
}
