use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use super::backend::{DiffusionBackend, TrainItem};
use super::ledger::{LedgerEntry, TrainLedger, LEDGER_FILE};
use super::FinetuneConfig;
use crate::error::{Error, Result};
use crate::ingest::{read_layout, stats::stats_of_rasters, ChannelStats, LayoutManifest};
use crate::seed;

/// Optimizer steps for `n` items: `epochs × ceil(n / (batch × accum))`.
pub fn optimizer_steps(config: &FinetuneConfig, n: usize) -> u64 {
    u64::from(config.epochs) * n.div_ceil(config.items_per_step()) as u64
}

#[derive(Debug)]
pub struct FinetuneOutcome {
    pub ledger: TrainLedger,
    /// Weights after the last step, outside the interval cadence.
    pub final_checkpoint: PathBuf,
    pub stats: ChannelStats,
}

fn checkpoint_ref(step: u64) -> String {
    format!("ckpt/step-{step}")
}

/// Train `backend` on a layout, writing `train_ledger.jsonl` and
/// `ckpt/step-<N>/` under `job_dir`.
///
/// Every step's shuffling and noise are derived from `(seed, epoch)` and
/// `(seed, step)`, so a job can resume from its latest checkpoint: steps
/// already in the ledger are replayed without being re-appended.
pub fn run_finetune(
    config: &FinetuneConfig,
    data: &LayoutManifest,
    backend: &mut dyn DiffusionBackend,
    job_dir: &Path,
) -> Result<FinetuneOutcome> {
    config.validate()?;
    let (_, pairs) = read_layout(&data.root_dir)?;
    let items: Vec<TrainItem> = pairs
        .into_iter()
        .map(|(entry, image)| TrainItem { image, caption: entry.text })
        .collect();
    if items.is_empty() {
        return Err(Error::arg("layout has no images"));
    }
    let stats = stats_of_rasters(&items.iter().map(|i| &i.image).collect::<Vec<_>>())?;
    backend.configure(config, &stats)?;

    let mut ledger = TrainLedger::open(&job_dir.join(LEDGER_FILE), &config.config_hash())?;
    let recorded = ledger.last_step();
    let resume_from = ledger
        .entries()
        .iter()
        .rev()
        .filter_map(|e| e.checkpoint_ref.as_ref().map(|r| (e.step, r)))
        .find(|(_, r)| job_dir.join(r).is_dir())
        .map(|(step, r)| -> Result<u64> {
            backend.load_checkpoint(&job_dir.join(r))?;
            Ok(step)
        })
        .transpose()?
        .unwrap_or(0);
    if recorded > 0 {
        log::info!("resuming at step {resume_from}; ledger already holds {recorded} steps");
    }

    let per_step = config.items_per_step();
    let mut step = 0u64;
    let mut last_ok = resume_from;
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.shuffle(&mut seed::derived_rng(config.seed, &["finetune", "epoch", &epoch.to_string()]));
        for chunk in order.chunks(per_step) {
            step += 1;
            if step <= resume_from {
                continue;
            }
            let selected: Vec<TrainItem> = chunk.iter().map(|&i| items[i].clone()).collect();
            let micro: Vec<&[TrainItem]> = selected.chunks(config.batch_size).collect();
            let mut rng = seed::derived_rng(config.seed, &["finetune", "step", &step.to_string()]);
            let loss = backend.train_step(&micro, &mut rng).map_err(|e| Error::Job {
                last_step: last_ok,
                source: Box::new(e),
            })?;

            let on_interval = step % config.checkpoint_interval_steps == 0;
            let ckpt = on_interval.then(|| checkpoint_ref(step));
            if let Some(r) = &ckpt {
                backend.save_checkpoint(&job_dir.join(r)).map_err(|e| Error::Job {
                    last_step: last_ok,
                    source: Box::new(e),
                })?;
            }
            if step <= recorded {
                let logged = ledger.entries().iter().find(|e| e.step == step);
                if logged.is_some_and(|e| e.loss != loss) {
                    log::warn!("replayed step {step} produced a different loss than recorded");
                }
            } else {
                ledger.append(LedgerEntry { step, loss, checkpoint_ref: ckpt })?;
            }
            last_ok = step;
        }
    }

    let final_checkpoint = job_dir.join("ckpt").join("final");
    backend.save_checkpoint(&final_checkpoint)?;
    Ok(FinetuneOutcome { ledger, final_checkpoint, stats })
}
