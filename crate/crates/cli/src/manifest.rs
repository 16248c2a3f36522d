//! The run manifest: a JSON index of every artifact a run has produced,
//! keyed by command, carrying the config hash, tool version, and timings.
//! Also the output-directory lock.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    /// Per-command records in execution order (BTreeMap keeps the JSON
    /// stable across runs).
    pub commands: BTreeMap<String, CommandRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommandRecord {
    pub config_hash: String,
    /// Paths relative to the run directory.
    pub artifacts: Vec<String>,
    pub wall_ms: u128,
}

impl RunManifest {
    pub fn load_or_new(dir: &Path, config_hash: &str) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if path.exists() {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let manifest: RunManifest = serde_json::from_str(&text).context("parsing manifest")?;
            if manifest.config_hash != config_hash {
                bail!(
                    "output dir {} holds artifacts for config {}, current config is {}; \
                     use a fresh output dir or delete the stale run",
                    dir.display(),
                    manifest.config_hash,
                    config_hash
                );
            }
            Ok(manifest)
        } else {
            Ok(RunManifest {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config_hash: config_hash.to_string(),
                commands: BTreeMap::new(),
            })
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    /// A command is cached when it already ran under the same config hash
    /// and all of its artifacts still exist.
    pub fn is_cached(&self, dir: &Path, command: &str, config_hash: &str) -> bool {
        match self.commands.get(command) {
            Some(rec) => {
                rec.config_hash == config_hash
                    && rec.artifacts.iter().all(|a| dir.join(a).exists())
            }
            None => false,
        }
    }

    pub fn record(&mut self, command: &str, record: CommandRecord) {
        self.commands.insert(command.to_string(), record);
    }

    pub fn artifacts_of(&self, command: &str) -> Option<&[String]> {
        self.commands.get(command).map(|r| r.artifacts.as_slice())
    }
}

/// Tracks every file a command writes so the manifest stays complete.
pub struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<String>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Open a new artifact file for writing and record it.
    pub fn create(&mut self, rel: &str) -> Result<std::fs::File> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = std::fs::File::create(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        self.written.push(rel.to_string());
        Ok(file)
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        use std::io::Write;
        let mut f = self.create(rel)?;
        f.write_all(bytes)?;
        Ok(())
    }

    pub fn into_artifacts(self) -> Vec<String> {
        self.written
    }
}

/// An exclusive advisory lock on the output directory; commands run one at
/// a time per directory.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_FILE);
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                bail!(
                    "output dir {} is locked by another command (stale? remove {})",
                    dir.display(),
                    path.display()
                )
            }
            Err(e) => Err(e).context("acquiring output dir lock"),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}
