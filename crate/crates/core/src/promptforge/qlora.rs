use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Self-attention projections that receive LoRA adapters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetModule {
    K,
    Q,
    V,
}

impl std::str::FromStr for TargetModule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "k" | "k_proj" => Ok(TargetModule::K),
            "q" | "q_proj" => Ok(TargetModule::Q),
            "v" | "v_proj" => Ok(TargetModule::V),
            other => Err(Error::validation("target_modules", format!("unknown module `{other}`"))),
        }
    }
}

/// Quantized low-rank fine-tune job for a causal language model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QLoraJobSpec {
    pub lora_alpha: u32,
    pub rank: u32,
    pub target_modules: BTreeSet<TargetModule>,
    pub dropout: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: u32,
    pub batch_size: usize,
    pub context_length: usize,
}

impl Default for QLoraJobSpec {
    fn default() -> Self {
        Self {
            lora_alpha: 8,
            rank: 16,
            target_modules: [TargetModule::K, TargetModule::Q, TargetModule::V].into(),
            dropout: 0.05,
            learning_rate: 2e-5,
            weight_decay: 0.01,
            epochs: 3,
            batch_size: 8,
            context_length: 512,
        }
    }
}

impl QLoraJobSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rank < 1 {
            return Err(Error::validation("rank", "must be at least 1"));
        }
        if self.lora_alpha < 1 {
            return Err(Error::validation("lora_alpha", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::validation("dropout", "must lie in [0, 1)"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning_rate", "must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::validation("weight_decay", "must be non-negative"));
        }
        if self.epochs < 1 {
            return Err(Error::validation("epochs", "must be at least 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::validation("batch_size", "must be at least 1"));
        }
        if self.context_length < 1 {
            return Err(Error::validation("context_length", "must be at least 1"));
        }
        if self.target_modules.is_empty() {
            return Err(Error::validation("target_modules", "at least one module is required"));
        }
        Ok(())
    }

    /// LoRA scaling factor `alpha / rank`.
    pub fn scaling(&self) -> f64 {
        f64::from(self.lora_alpha) / f64::from(self.rank)
    }
}

fn parse<T: std::str::FromStr>(field: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::validation(field, format!("cannot parse `{raw}`")))
}

pub fn build_qlora_spec(overrides: &BTreeMap<String, String>) -> Result<QLoraJobSpec> {
    let mut s = QLoraJobSpec::default();
    for (key, raw) in overrides {
        match key.as_str() {
            "lora_alpha" => s.lora_alpha = parse(key, raw)?,
            "rank" => s.rank = parse(key, raw)?,
            "target_modules" => {
                s.target_modules = raw
                    .split(',')
                    .filter(|m| !m.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "dropout" => s.dropout = parse(key, raw)?,
            "learning_rate" => s.learning_rate = parse(key, raw)?,
            "weight_decay" => s.weight_decay = parse(key, raw)?,
            "epochs" => s.epochs = parse(key, raw)?,
            "batch_size" => s.batch_size = parse(key, raw)?,
            "context_length" => s.context_length = parse(key, raw)?,
            _ => return Err(Error::validation(key.clone(), "unknown qlora field")),
        }
    }
    s.validate()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults() {
        let s = build_qlora_spec(&BTreeMap::new()).unwrap();
        assert_eq!((s.lora_alpha, s.rank), (8, 16));
        assert_eq!(s.target_modules.len(), 3);
        assert_eq!((s.dropout, s.learning_rate, s.weight_decay), (0.05, 2e-5, 0.01));
        assert_eq!((s.epochs, s.batch_size, s.context_length), (3, 8, 512));
        assert_eq!(s.scaling(), 0.5);
    }

    #[test]
    fn invalid_values() {
        assert!(build_qlora_spec(&ov(&[("rank", "0")])).is_err());
        assert!(build_qlora_spec(&ov(&[("dropout", "1.0")])).is_err());
        assert!(build_qlora_spec(&ov(&[("dropout", "-0.1")])).is_err());
        assert!(build_qlora_spec(&ov(&[("target_modules", "o")])).is_err());
        assert!(build_qlora_spec(&ov(&[("alpha", "8")])).is_err());
    }

    #[test]
    fn overrides() {
        let s = build_qlora_spec(&ov(&[("epochs", "5"), ("target_modules", "q, v")])).unwrap();
        assert_eq!(s.epochs, 5);
        assert_eq!(s.target_modules, [TargetModule::Q, TargetModule::V].into());
    }
}
