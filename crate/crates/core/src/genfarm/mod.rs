//! Synthetic image generation: per-class plans, a resumable run loop over a
//! diffusion backend, and the labeled synthetic dataset file.

mod dataset;
mod plan;
mod run;

pub use dataset::{read_synth_dataset, write_synth_dataset, SynthRecord};
pub use plan::{plan_generation, GenerationPlan};
pub use run::{read_manifest, run_generation, ManifestEntry, GEN_MANIFEST_FILE};
