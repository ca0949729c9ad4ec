use std::path::Path;

use crate::error::Result;
use crate::ingest::ChannelStats;
use crate::promptforge::PromptSpec;
use crate::raster::Raster;
use crate::seed::SeededRng;

use super::FinetuneConfig;

/// One image-caption pair from the fine-tuning layout.
#[derive(Clone, Debug)]
pub struct TrainItem {
    pub image: Raster,
    pub caption: String,
}

/// Adapter around a text-to-image diffusion model.
///
/// `train_step` receives every micro-batch of one optimizer step and returns
/// the mean loss over them. Given the same weights and RNG state it must
/// return the same loss and leave the same weights.
pub trait DiffusionBackend {
    fn id(&self) -> &str;

    /// Called once before training, with dataset statistics of the layout.
    fn configure(&mut self, config: &FinetuneConfig, stats: &ChannelStats) -> Result<()>;

    fn train_step(&mut self, micro_batches: &[&[TrainItem]], rng: &mut SeededRng) -> Result<f64>;

    fn save_checkpoint(&self, dir: &Path) -> Result<()>;

    fn load_checkpoint(&mut self, dir: &Path) -> Result<()>;

    /// Render one image at the spec's width, height and step count.
    fn generate(&self, spec: &PromptSpec) -> Result<Raster>;
}
