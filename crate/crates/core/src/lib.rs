//! Remote-sensing synthetic data pipeline.
//!
//! Stages, one module each:
//!
//! * [`ingest`]: image-caption datasets to a fine-tuning layout, holdout,
//!   channel statistics, resizing, dihedral augmentation.
//! * [`trainctl`]: diffusion fine-tune configuration, run loop, checkpoint
//!   ledger and best-checkpoint selection.
//! * [`promptforge`]: text corpus chunking, retrieval index, class prompt
//!   assembly, LLM fine-tune job specs, perplexity.
//! * [`genfarm`]: per-class generation plans, resumable generation, the
//!   labeled synthetic dataset file.
//! * [`fidlab`]: feature statistics and Fréchet distance, sampled FID runs.
//! * [`benchdown`]: downstream land-cover classifier training and metrics.
//!
//! Heavy models sit behind adapter traits ([`trainctl::DiffusionBackend`],
//! [`promptforge::Embedder`], [`fidlab::FeatureExtractor`],
//! [`benchdown::ClassifierBackend`]) with small deterministic reference
//! implementations.

pub mod benchdown;
pub mod classes;
pub mod digest;
mod error;
pub mod fidlab;
pub mod fsutil;
pub mod genfarm;
pub mod ingest;
pub mod promptforge;
pub mod raster;
pub mod seed;
pub mod trainctl;

pub use error::{Error, Result};
pub use raster::{Raster, RealRaster};
