//! Diffusion fine-tuning orchestration.
//!
//! The loop here is backend-agnostic: it shuffles the layout per epoch,
//! groups items into gradient-accumulation micro-batches, logs a loss per
//! optimizer step into an append-only ledger and checkpoints on a fixed
//! interval. [`ReferenceDiffusion`] is a small CPU denoiser that stands in
//! for a real latent-diffusion model.

mod backend;
mod config;
mod ledger;
mod reference;
mod run;

pub use backend::{DiffusionBackend, TrainItem};
pub use config::{build_finetune_config, FinetuneConfig, EPOCH_WARNING_THRESHOLD};
pub use ledger::{select_best_checkpoint, LedgerEntry, TrainLedger, LEDGER_FILE};
pub use reference::{stub_class_color, toy_denoise_loss, ReferenceDiffusion};
pub use run::{optimizer_steps, run_finetune, FinetuneOutcome};
