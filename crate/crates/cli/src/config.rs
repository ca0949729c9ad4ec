//! Declarative pipeline configuration (TOML, six stage sections).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::failure::Failure;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub workspace: Option<PathBuf>,
    pub ingest: IngestSection,
    /// Passed key by key to the fine-tune config builder, which rejects
    /// unknown fields.
    pub finetune: toml::Table,
    pub prompts: PromptsSection,
    pub generate: GenerateSection,
    pub fid: FidSection,
    pub downstream: DownstreamSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub image_column: String,
    pub captions_column: String,
    pub id_column: String,
    pub class_column: String,
    pub holdout: usize,
    pub side: usize,
    pub augment: bool,
    /// `first` or `random`.
    pub caption_policy: String,
}

impl Default for IngestSection {
    fn default() -> Self {
        Self {
            image_column: "image".into(),
            captions_column: "captions".into(),
            id_column: "filename".into(),
            class_column: "class_name".into(),
            holdout: 500,
            side: 224,
            augment: true,
            caption_policy: "first".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptsSection {
    pub per_class: usize,
    pub template: String,
    pub top_k: usize,
    pub min_chars: usize,
    pub test_fraction: f64,
    pub index_chunk_size: usize,
    pub embed_dim: usize,
    /// Overrides for the language-model fine-tune job spec.
    pub qlora: toml::Table,
}

impl Default for PromptsSection {
    fn default() -> Self {
        Self {
            per_class: 3,
            template: "aerial".into(),
            top_k: 3,
            min_chars: 500,
            test_fraction: 0.05,
            index_chunk_size: 256,
            embed_dim: 256,
            qlora: toml::Table::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSection {
    /// Per-class image counts; the 388-image reference counts when absent.
    pub counts: Option<BTreeMap<String, usize>>,
    pub width: usize,
    pub height: usize,
    pub steps: usize,
    pub scheduler: String,
    pub backend: String,
}

impl Default for GenerateSection {
    fn default() -> Self {
        Self {
            counts: None,
            width: 512,
            height: 512,
            steps: 50,
            scheduler: "PNDM".into(),
            backend: "reference".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FidSection {
    pub sample_size: usize,
    pub runs: usize,
    pub extractor: String,
    pub extractor_side: usize,
    pub extractor_dim: usize,
}

impl Default for FidSection {
    fn default() -> Self {
        Self {
            sample_size: 250,
            runs: 4,
            extractor: "reference".into(),
            extractor_side: 16,
            extractor_dim: 16,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DownstreamSection {
    pub learning_rate: f64,
    pub epochs: u32,
    pub batch_size: usize,
    pub crop_side: usize,
    pub backend: String,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
}

impl Default for DownstreamSection {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            epochs: 20,
            batch_size: 16,
            crop_side: 224,
            backend: "logistic-probe".into(),
            split: [0.7, 0.15, 0.15],
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
    }
}

/// TOML scalars rendered the way the core config builders parse them.
pub fn table_to_strings(table: &toml::Table) -> Result<BTreeMap<String, String>, Failure> {
    table
        .iter()
        .map(|(k, v)| {
            let s = match v {
                toml::Value::String(s) => s.clone(),
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                toml::Value::Array(items) => items
                    .iter()
                    .map(|i| i.as_str().map(str::to_string).unwrap_or_else(|| i.to_string()))
                    .collect::<Vec<_>>()
                    .join(","),
                other => return Err(Failure::config(format!("`{k}`: unsupported value {other}"))),
            };
            Ok((k.clone(), s))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_file() {
        let c: PipelineConfig = toml::from_str("").unwrap();
        assert_eq!(c.ingest.holdout, 500);
        assert_eq!((c.fid.sample_size, c.fid.runs), (250, 4));
        assert_eq!(c.downstream.epochs, 20);
        assert_eq!((c.generate.width, c.generate.steps), (512, 50));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<PipelineConfig>("[fid]\nsample = 3\n").is_err());
        assert!(toml::from_str::<PipelineConfig>("[upscale]\n").is_err());
    }

    #[test]
    fn sections_parse() {
        let c: PipelineConfig = toml::from_str(
            "seed = 7\n[finetune]\nepochs = 2\nlearning_rate = 1e-5\n[generate.counts]\n\"Water Body\" = 3\n",
        )
        .unwrap();
        let ft = table_to_strings(&c.finetune).unwrap();
        assert_eq!(ft["epochs"], "2");
        assert_eq!(c.generate.counts.unwrap()["Water Body"], 3);
    }
}
