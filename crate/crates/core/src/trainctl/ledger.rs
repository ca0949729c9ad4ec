use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::{append_jsonl, read_jsonl};

pub const LEDGER_FILE: &str = "train_ledger.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub step: u64,
    pub loss: f64,
    /// Checkpoint directory relative to the job directory.
    pub checkpoint_ref: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header { config_hash: String },
    Step(LedgerEntry),
}

/// Append-only training history. When backed by a file every append is
/// written and synced before it becomes visible in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainLedger {
    entries: Vec<LedgerEntry>,
    config_hash: String,
    path: Option<PathBuf>,
}

impl TrainLedger {
    pub fn in_memory(config_hash: impl Into<String>) -> Self {
        Self {
            entries: Vec::new(),
            config_hash: config_hash.into(),
            path: None,
        }
    }

    /// Build from entries without persistence; steps must strictly increase.
    pub fn from_entries(config_hash: impl Into<String>, entries: Vec<LedgerEntry>) -> Result<Self> {
        let mut ledger = Self::in_memory(config_hash);
        for e in entries {
            ledger.append(e)?;
        }
        Ok(ledger)
    }

    /// Open an existing ledger file, or start one. An existing ledger must
    /// have been produced by the same configuration.
    pub fn open(path: &Path, config_hash: &str) -> Result<Self> {
        if !path.exists() {
            append_jsonl(path, &Line::Header { config_hash: config_hash.to_string() })?;
            return Ok(Self {
                entries: Vec::new(),
                config_hash: config_hash.to_string(),
                path: Some(path.to_path_buf()),
            });
        }
        let loaded = Self::load(path)?;
        if loaded.config_hash != config_hash {
            return Err(Error::State(format!(
                "{} was written by a different configuration (hash {})",
                path.display(),
                loaded.config_hash
            )));
        }
        Ok(loaded)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let lines: Vec<Line> = read_jsonl(path)?;
        let mut iter = lines.into_iter();
        let config_hash = match iter.next() {
            Some(Line::Header { config_hash }) => config_hash,
            _ => return Err(Error::State(format!("{}: missing ledger header", path.display()))),
        };
        let mut ledger = Self::in_memory(config_hash);
        for line in iter {
            match line {
                Line::Step(e) => ledger.push(e)?,
                Line::Header { .. } => {
                    return Err(Error::State(format!("{}: repeated header", path.display())))
                }
            }
        }
        ledger.path = Some(path.to_path_buf());
        Ok(ledger)
    }

    fn push(&mut self, entry: LedgerEntry) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if entry.step <= last.step {
                return Err(Error::State(format!(
                    "ledger step {} does not follow {}",
                    entry.step, last.step
                )));
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn append(&mut self, entry: LedgerEntry) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if entry.step <= last.step {
                return Err(Error::State(format!(
                    "ledger step {} does not follow {}",
                    entry.step, last.step
                )));
            }
        }
        if let Some(path) = &self.path {
            append_jsonl(path, &Line::Step(entry.clone()))?;
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn last_step(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.step)
    }

    /// Check that checkpoints sit exactly on multiples of `interval`.
    pub fn check_checkpoint_cadence(&self, interval: u64) -> Result<()> {
        for e in &self.entries {
            if (e.step % interval == 0) != e.checkpoint_ref.is_some() {
                return Err(Error::State(format!(
                    "step {} breaks the checkpoint interval {interval}",
                    e.step
                )));
            }
        }
        Ok(())
    }
}

/// The checkpointed step with the lowest trailing-window mean loss
/// (`window` ledger entries ending at the checkpoint). Ties go to the
/// earliest step.
pub fn select_best_checkpoint(ledger: &TrainLedger, window: usize) -> Result<(u64, String)> {
    if window == 0 {
        return Err(Error::arg("smoothing window must be at least 1"));
    }
    let entries = ledger.entries();
    let mut best: Option<(f64, u64, &str)> = None;
    for (i, e) in entries.iter().enumerate() {
        let Some(path) = e.checkpoint_ref.as_deref() else { continue };
        let start = (i + 1).saturating_sub(window);
        let span = &entries[start..=i];
        let score = span.iter().map(|s| s.loss).sum::<f64>() / span.len() as f64;
        if best.is_none_or(|(b, _, _)| score < b) {
            best = Some((score, e.step, path));
        }
    }
    best.map(|(_, step, path)| (step, path.to_string()))
        .ok_or_else(|| Error::State("ledger has no checkpoints".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ckpt(step: u64, loss: f64) -> LedgerEntry {
        LedgerEntry { step, loss, checkpoint_ref: Some(format!("ckpt/step-{step}")) }
    }

    #[test]
    fn picks_the_minimum_of_the_reference_curve() {
        let ledger = TrainLedger::from_entries(
            "h",
            vec![ckpt(500, 0.31), ckpt(1000, 0.27), ckpt(1500, 0.25), ckpt(2000, 0.22), ckpt(2500, 0.20), ckpt(3000, 0.22)],
        )
        .unwrap();
        assert_eq!(select_best_checkpoint(&ledger, 1).unwrap(), (2500, "ckpt/step-2500".into()));
    }

    #[test]
    fn singleton_and_ties() {
        let one = TrainLedger::from_entries("h", vec![ckpt(3, 0.5)]).unwrap();
        assert_eq!(select_best_checkpoint(&one, 1).unwrap().0, 3);
        let tie = TrainLedger::from_entries("h", vec![ckpt(1, 0.4), ckpt(2, 0.3), ckpt(3, 0.3)]).unwrap();
        assert_eq!(select_best_checkpoint(&tie, 1).unwrap().0, 2);
    }

    #[test]
    fn no_checkpoints_is_a_state_error() {
        let l = TrainLedger::from_entries("h", vec![LedgerEntry { step: 1, loss: 0.1, checkpoint_ref: None }]).unwrap();
        assert!(matches!(select_best_checkpoint(&l, 1), Err(Error::State(_))));
    }

    #[test]
    fn windowed_selection_smooths_spikes() {
        let plain = |step, loss| LedgerEntry { step, loss, checkpoint_ref: None };
        let l = TrainLedger::from_entries(
            "h",
            vec![plain(1, 0.9), plain(2, 0.9), ckpt(3, 0.1), plain(4, 0.3), plain(5, 0.3), ckpt(6, 0.3)],
        )
        .unwrap();
        assert_eq!(select_best_checkpoint(&l, 1).unwrap().0, 3);
        assert_eq!(select_best_checkpoint(&l, 3).unwrap().0, 6);
    }

    #[test]
    fn steps_must_increase() {
        let mut l = TrainLedger::in_memory("h");
        l.append(ckpt(2, 0.1)).unwrap();
        assert!(l.append(ckpt(2, 0.1)).is_err());
        assert!(l.append(ckpt(1, 0.1)).is_err());
    }

    #[test]
    fn persisted_ledger_reloads_and_rejects_foreign_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LEDGER_FILE);
        let mut l = TrainLedger::open(&path, "abc").unwrap();
        l.append(ckpt(1, 0.5)).unwrap();
        l.append(LedgerEntry { step: 2, loss: 0.25, checkpoint_ref: None }).unwrap();
        let back = TrainLedger::open(&path, "abc").unwrap();
        assert_eq!(back.entries(), l.entries());
        assert!(TrainLedger::open(&path, "other").is_err());
    }

    proptest! {
        #[test]
        fn appending_worse_entries_keeps_the_choice(
            losses in proptest::collection::vec(0.0f64..1.0, 1..20),
            extra in proptest::collection::vec(1.0f64..2.0, 0..10),
        ) {
            let entries: Vec<_> = losses.iter().enumerate().map(|(i, &l)| ckpt(i as u64 + 1, l)).collect();
            let mut ledger = TrainLedger::from_entries("h", entries).unwrap();
            let before = select_best_checkpoint(&ledger, 1).unwrap();
            let n = ledger.entries().len() as u64;
            for (j, l) in extra.iter().enumerate() {
                ledger.append(ckpt(n + j as u64 + 1, *l + 1e-9)).unwrap();
            }
            prop_assert_eq!(select_best_checkpoint(&ledger, 1).unwrap(), before);
        }
    }
}
