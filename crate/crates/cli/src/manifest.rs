//! The run manifest: a JSON index of every (cell, seed) job in an output
//! directory. Resume reads it to skip completed work; aggregation reads it
//! to find result files and to report missing ones explicitly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::{Cell, ExperimentConfig};

/// Bumped whenever the output layout or file formats change shape.
pub const ARTIFACT_VERSION: u32 = 1;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunEntry {
    pub status: RunStatus,
    /// Files this job wrote, relative to the output directory.
    pub files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Unix seconds.
    pub finished_at: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: u32,
    /// Unix seconds.
    pub created_at: u64,
    pub updated_at: u64,
    pub config_digest: String,
    /// Resolved configuration echo, for humans and for digest verification.
    pub config: serde_json::Value,
    pub cells: Vec<Cell>,
    /// Keyed by [`RunManifest::key`]; BTreeMap keeps the file diffable.
    pub runs: BTreeMap<String, RunEntry>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        let stamp = now();
        RunManifest {
            artifact_version: ARTIFACT_VERSION,
            created_at: stamp,
            updated_at: stamp,
            config_digest: config.digest(),
            config: serde_json::to_value(config).expect("config serializes"),
            cells: config.cells(),
            runs: BTreeMap::new(),
        }
    }

    pub fn key(cell: usize, seed: u32) -> String {
        format!("cell{cell:03}-seed{seed:05}")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let manifest: RunManifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        if manifest.artifact_version != ARTIFACT_VERSION {
            bail!(
                "manifest {} has artifact version {}, this binary writes {}",
                path.display(),
                manifest.artifact_version,
                ARTIFACT_VERSION
            );
        }
        Ok(manifest)
    }

    /// Atomic save: write a sibling temp file, then rename over the target.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, path).with_context(|| format!("replacing {}", path.display()))?;
        Ok(())
    }

    /// Guard for resume: the stored experiment must be the one on disk.
    pub fn check_matches(&self, config: &ExperimentConfig) -> Result<()> {
        let digest = config.digest();
        if self.config_digest != digest {
            bail!(
                "existing manifest was produced by a different configuration \
                 (digest {} vs {digest}); use a fresh output directory",
                self.config_digest
            );
        }
        Ok(())
    }

    pub fn is_completed(&self, cell: usize, seed: u32) -> bool {
        matches!(
            self.runs.get(&Self::key(cell, seed)),
            Some(RunEntry {
                status: RunStatus::Completed,
                ..
            })
        )
    }

    pub fn record(&mut self, cell: usize, seed: u32, entry: RunEntry) {
        self.runs.insert(Self::key(cell, seed), entry);
        self.updated_at = now();
    }

    pub fn completed_entry(entry_files: Vec<String>) -> RunEntry {
        RunEntry {
            status: RunStatus::Completed,
            files: entry_files,
            error: None,
            finished_at: now(),
        }
    }

    pub fn failed_entry(error: String) -> RunEntry {
        RunEntry {
            status: RunStatus::Failed,
            files: Vec::new(),
            error: Some(error),
            finished_at: now(),
        }
    }

    pub fn completed_keys(&self) -> impl Iterator<Item = (&String, &RunEntry)> {
        self.runs
            .iter()
            .filter(|(_, e)| e.status == RunStatus::Completed)
    }

    pub fn failed_keys(&self) -> Vec<&String> {
        self.runs
            .iter()
            .filter(|(_, e)| e.status == RunStatus::Failed)
            .map(|(k, _)| k)
            .collect()
    }

    /// Every file a completed run claims to have written but which is not
    /// on disk, as (run key, relative path) pairs.
    pub fn missing_files(&self, out_dir: &Path) -> Vec<(String, PathBuf)> {
        let mut missing = Vec::new();
        for (key, entry) in self.completed_keys() {
            for file in &entry.files {
                let path = out_dir.join(file);
                if !path.exists() {
                    missing.push((key.clone(), PathBuf::from(file)));
                }
            }
        }
        missing
    }
}
