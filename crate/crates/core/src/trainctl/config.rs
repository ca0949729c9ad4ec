use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::digest::json_hash;
use crate::error::{Error, Result};

/// Above this many epochs the model starts to lose its general image prior;
/// the config is accepted but a warning is logged.
pub const EPOCH_WARNING_THRESHOLD: u32 = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneConfig {
    pub epochs: u32,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub grad_accum_steps: usize,
    pub mixed_precision: bool,
    pub checkpoint_interval_steps: u64,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 4,
            learning_rate: 1e-6,
            grad_accum_steps: 4,
            mixed_precision: true,
            checkpoint_interval_steps: 500,
            seed: 0,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::validation("epochs", "must be at least 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::validation("batch_size", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning_rate", "must be a positive finite number"));
        }
        if self.grad_accum_steps < 1 {
            return Err(Error::validation("grad_accum_steps", "must be at least 1"));
        }
        if self.checkpoint_interval_steps < 1 {
            return Err(Error::validation("checkpoint_interval_steps", "must be at least 1"));
        }
        if self.epochs > EPOCH_WARNING_THRESHOLD {
            log::warn!(
                "fine-tuning for {} epochs; beyond {EPOCH_WARNING_THRESHOLD} the model tends to \
                 overfit the training imagery",
                self.epochs
            );
        }
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        json_hash(self).expect("config serializes")
    }

    /// Items consumed by one optimizer step.
    pub fn items_per_step(&self) -> usize {
        self.batch_size * self.grad_accum_steps
    }
}

fn parse<T: std::str::FromStr>(field: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::validation(field, format!("cannot parse `{raw}`")))
}

/// Defaults with `overrides` applied, then validated.
pub fn build_finetune_config(overrides: &BTreeMap<String, String>) -> Result<FinetuneConfig> {
    let mut c = FinetuneConfig::default();
    for (key, raw) in overrides {
        match key.as_str() {
            "epochs" => c.epochs = parse(key, raw)?,
            "batch_size" => c.batch_size = parse(key, raw)?,
            "learning_rate" => c.learning_rate = parse(key, raw)?,
            "grad_accum_steps" => c.grad_accum_steps = parse(key, raw)?,
            "mixed_precision" => c.mixed_precision = parse(key, raw)?,
            "checkpoint_interval_steps" => c.checkpoint_interval_steps = parse(key, raw)?,
            "seed" => c.seed = parse(key, raw)?,
            _ => return Err(Error::validation(key.clone(), "unknown finetune field")),
        }
    }
    c.validate()?;
    Ok(c)
}
