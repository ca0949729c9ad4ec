//! Workspace paths, the lock file and the provenance log.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use synthgen_core::digest::sha256_file;
use synthgen_core::fsutil::{append_jsonl, read_jsonl};

use crate::failure::{CmdResult, Failure};

pub const PROVENANCE_FILE: &str = "provenance.jsonl";
const LOCK_FILE: &str = ".lock";

pub struct Workspace {
    root: PathBuf,
}

/// Removes the lock file when dropped.
pub struct WorkspaceLock {
    path: PathBuf,
}

impl Drop for WorkspaceLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    /// Workspace-relative (or absolute, for external inputs) path → sha256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl Workspace {
    pub fn open(root: PathBuf) -> CmdResult<Self> {
        fs::create_dir_all(&root)
            .with_context(|| format!("creating workspace {}", root.display()))?;
        Ok(Self { root })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// The path of a prerequisite artifact, or exit 3 naming it.
    pub fn require(&self, rel: &str, produced_by: &str) -> CmdResult<PathBuf> {
        let p = self.path(rel);
        if p.exists() {
            Ok(p)
        } else {
            Err(Failure::missing(format!("{} (run `{produced_by}` first)", p.display())))
        }
    }

    pub fn lock(&self) -> CmdResult<WorkspaceLock> {
        let path = self.path(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(WorkspaceLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Failure::Stage(anyhow::anyhow!(
                "workspace {} is locked by another command (remove {} if no command is running)",
                self.root.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }

    fn key(&self, path: &Path) -> String {
        match path.strip_prefix(&self.root) {
            Ok(rel) => synthgen_core::fsutil::slash_path(rel),
            Err(_) => path.display().to_string(),
        }
    }

    fn checksums(&self, paths: &[PathBuf]) -> CmdResult<BTreeMap<String, String>> {
        paths
            .iter()
            .map(|p| Ok((self.key(p), sha256_file(p)?)))
            .collect()
    }

    pub fn record(
        &self,
        command: &str,
        config: &impl Serialize,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
    ) -> CmdResult {
        let record = ProvenanceRecord {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: synthgen_core::digest::json_hash(config)?,
            inputs: self.checksums(inputs)?,
            outputs: self.checksums(outputs)?,
        };
        append_jsonl(&self.path(PROVENANCE_FILE), &record)?;
        Ok(())
    }

    pub fn provenance(&self) -> CmdResult<Vec<ProvenanceRecord>> {
        let p = self.path(PROVENANCE_FILE);
        if !p.exists() {
            return Ok(Vec::new());
        }
        Ok(read_jsonl(&p)?)
    }

    /// Latest recorded checksum of every output, checked against disk.
    pub fn verify_outputs(&self) -> CmdResult<BTreeMap<String, String>> {
        let mut latest = BTreeMap::new();
        for rec in self.provenance()? {
            latest.extend(rec.outputs);
        }
        for (key, expected) in &latest {
            let path = if Path::new(key).is_absolute() { PathBuf::from(key) } else { self.root.join(key) };
            if !path.exists() {
                return Err(Failure::Stage(anyhow::anyhow!(
                    "artifact {} listed in {PROVENANCE_FILE} is missing",
                    path.display()
                )));
            }
            let actual = sha256_file(&path)?;
            if &actual != expected {
                return Err(Failure::Stage(anyhow::anyhow!(
                    "checksum mismatch for {}: recorded {expected}, found {actual}",
                    path.display()
                )));
            }
        }
        Ok(latest)
    }
}
