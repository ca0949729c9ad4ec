//! Class-conditioned prompt assembly.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::index::{retrieve, Embedder, VectorIndex};
use crate::classes::LULC_CLASSES;
use crate::error::{Error, Result};
use crate::fsutil::{read_jsonl, write_bytes_atomic};
use crate::seed;

/// Fixed negative cues, identical for every class and seed.
pub const NEGATIVE_CUES: &str = "wrapped, repeating, blurry, deformed, low quality";
pub const DEFAULT_SCHEDULER: &str = "PNDM";
pub const DEFAULT_STEPS: usize = 50;
pub const DEFAULT_SIDE: usize = 512;
/// Retrieved context is reduced to at most this many keywords.
pub const MAX_CONTEXT_WORDS: usize = 20;

/// Template ids understood by [`assemble_prompt`].
pub const TEMPLATES: [&str; 2] = ["aerial", "satellite"];

/// Everything a diffusion backend needs to render one image.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptSpec {
    pub class_name: String,
    pub positive: String,
    pub negative: String,
    pub seed: u64,
    pub steps: usize,
    pub scheduler: String,
    pub width: usize,
    pub height: usize,
}

impl PromptSpec {
    /// Defaults: fixed negative cues, PNDM, 50 steps, 512×512, seed 0.
    pub fn for_class(class_name: &str, positive: &str) -> Self {
        Self {
            class_name: class_name.to_string(),
            positive: positive.to_string(),
            negative: NEGATIVE_CUES.to_string(),
            seed: 0,
            steps: DEFAULT_STEPS,
            scheduler: DEFAULT_SCHEDULER.to_string(),
            width: DEFAULT_SIDE,
            height: DEFAULT_SIDE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.positive.trim().is_empty() {
            return Err(Error::validation("positive", "prompt is empty"));
        }
        if self.steps == 0 {
            return Err(Error::validation("steps", "must be at least 1"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::validation("width/height", "must be positive"));
        }
        Ok(())
    }
}

/// Classes and the scene phrases that seed their prompts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassCatalog {
    pub phrases: BTreeMap<String, Vec<String>>,
}

impl Default for ClassCatalog {
    fn default() -> Self {
        let table: [(&str, &[&str]); 7] = [
            ("Bare Land", &[
                "Barren landscape of a rocky desert canyon",
                "Dry salt flats with cracked exposed soil",
                "Sand dunes bordering an abandoned gravel quarry",
            ]),
            ("Crop Land", &[
                "Vineyards and orchards in a wine-producing region",
                "Irrigated centre-pivot fields in a semi-arid valley",
                "Patchwork of small rice paddies and field boundaries",
            ]),
            ("Cultivated Vegetation", &[
                "Golden hues of ripe wheat fields ready for harvest",
                "Rows of green maize plantations along a river",
                "Terraced tea gardens on gentle hillsides",
            ]),
            ("Natural Vegetation", &[
                "Mixed oak-hickory forest with vibrant autumn foliage",
                "Open savanna grassland with scattered shrubs",
                "Alpine meadow with wildflowers below a ridge",
            ]),
            ("Snow Ice", &[
                "Ice floes drifting in the Arctic Ocean under the northern lights",
                "Snow-covered mountain glacier with crevasses",
                "Frozen lake surface with wind-swept snow drifts",
            ]),
            ("Water Body", &[
                "Cluster of small islands surrounded by shallow turquoise waters",
                "Winding river delta meeting the open sea",
                "Reservoir behind a concrete dam in hilly terrain",
            ]),
            ("Woody Vegetation", &[
                "Coastal mangrove swamp with meandering tidal creeks",
                "Dense tropical rainforest canopy after rain",
                "Pine plantation with straight logging roads",
            ]),
        ];
        debug_assert!(table.iter().map(|(c, _)| *c).eq(LULC_CLASSES));
        Self {
            phrases: table
                .iter()
                .map(|(c, p)| (c.to_string(), p.iter().map(|s| s.to_string()).collect()))
                .collect(),
        }
    }
}

impl ClassCatalog {
    pub fn class_names(&self) -> impl Iterator<Item = &str> {
        self.phrases.keys().map(String::as_str)
    }

    fn phrases_for(&self, class_name: &str) -> Result<&[String]> {
        match self.phrases.get(class_name) {
            Some(p) if !p.is_empty() => Ok(p),
            Some(_) => Err(Error::arg(format!("class `{class_name}` has no phrases"))),
            None => Err(Error::arg(format!("unknown class `{class_name}`"))),
        }
    }
}

const STOPWORDS: &[&str] = &[
    "about", "above", "after", "also", "among", "been", "being", "between", "both", "could",
    "does", "each", "from", "have", "here", "into", "more", "most", "much", "only", "other",
    "over", "same", "some", "such", "than", "that", "their", "them", "then", "there", "these",
    "they", "this", "those", "through", "under", "very", "were", "what", "when", "where",
    "which", "while", "with", "within", "would", "your", "using", "used", "based",
];

/// Distinct lowercase content words of `context`, in order of first
/// appearance, capped at [`MAX_CONTEXT_WORDS`].
pub fn context_keywords<S: AsRef<str>>(context: &[S]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for text in context {
        for word in text.as_ref().split(|c: char| !(c.is_alphanumeric() || c == '-')) {
            let w = word.trim_matches('-').to_lowercase();
            if w.chars().count() < 4 || w.chars().all(|c| c.is_numeric()) || STOPWORDS.contains(&w.as_str()) {
                continue;
            }
            if seen.insert(w.clone()) {
                out.push(w);
                if out.len() == MAX_CONTEXT_WORDS {
                    return out;
                }
            }
        }
    }
    out
}

/// Build one prompt for `class_name`. The scene phrase is
/// `phrases[seed % phrases.len()]`; `seed` also becomes the generation seed.
pub fn assemble_prompt<S: AsRef<str>>(
    catalog: &ClassCatalog,
    class_name: &str,
    context: &[S],
    template_id: &str,
    seed: u64,
) -> Result<PromptSpec> {
    let phrases = catalog.phrases_for(class_name)?;
    let phrase = &phrases[(seed % phrases.len() as u64) as usize];
    let keywords = context_keywords(context).join(", ");
    let class_lower = class_name.to_lowercase();
    let context_part = if keywords.is_empty() { String::new() } else { format!(", {keywords}") };
    let positive = match template_id {
        "aerial" => format!(
            "{phrase}, aerial view of {class_lower}{context_part}, high resolution, realistic satellite image"
        ),
        "satellite" => format!(
            "high resolution satellite photo of {class_lower}: {phrase}{context_part}, realistic, detailed"
        ),
        other => return Err(Error::arg(format!("unknown template `{other}`"))),
    };
    let spec = PromptSpec {
        seed,
        ..PromptSpec::for_class(class_name, &positive)
    };
    spec.validate()?;
    Ok(spec)
}

/// `per_class` prompts per catalog class, cycling through the class phrases.
/// When an index is given, each prompt is grounded with the top `k`
/// segments retrieved for "<class> <phrase>".
pub fn build_prompt_bank(
    catalog: &ClassCatalog,
    per_class: usize,
    retrieval: Option<(&VectorIndex, &dyn Embedder)>,
    k: usize,
    template_id: &str,
    seed: u64,
) -> Result<Vec<PromptSpec>> {
    let mut bank = Vec::new();
    for class in catalog.class_names() {
        let n_phrases = catalog.phrases_for(class)?.len() as u64;
        // Align the base so prompt j uses phrase j mod n.
        let raw = seed::derive_seed(seed, &["prompt-bank", class]) >> 1;
        let base = raw - raw % n_phrases;
        for j in 0..per_class as u64 {
            let prompt_seed = base + j;
            let phrase = &catalog.phrases[class][(prompt_seed % n_phrases) as usize];
            let context: Vec<String> = match retrieval {
                Some((index, embedder)) => retrieve(index, embedder, &format!("{class} {phrase}"), k)?
                    .iter()
                    .filter_map(|h| index.entry(h).map(|e| e.text.clone()))
                    .collect(),
                None => Vec::new(),
            };
            bank.push(assemble_prompt(catalog, class, &context, template_id, prompt_seed)?);
        }
    }
    Ok(bank)
}

pub fn write_prompt_bank(bank: &[PromptSpec], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    for spec in bank {
        serde_json::to_writer(&mut buf, spec)?;
        buf.push(b'\n');
    }
    write_bytes_atomic(path, &buf)
}

pub fn read_prompt_bank(path: &Path) -> Result<Vec<PromptSpec>> {
    read_jsonl(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::promptforge::{chunk_corpus, index_corpus, HashedBowEmbedder};

    #[test]
    fn bare_land_without_context() {
        let cat = ClassCatalog::default();
        let p = assemble_prompt::<&str>(&cat, "Bare Land", &[], "aerial", 0).unwrap();
        assert!(p.positive.contains("bare land"));
        assert!(p.positive.contains("realistic"));
        assert_eq!(p.negative, NEGATIVE_CUES);
        assert_eq!((p.scheduler.as_str(), p.steps, p.width, p.height), ("PNDM", 50, 512, 512));
    }

    #[test]
    fn water_body_uses_island_phrase() {
        let cat = ClassCatalog::default();
        let p = assemble_prompt::<&str>(&cat, "Water Body", &[], "aerial", 0).unwrap();
        assert!(p.positive.contains("Cluster of small islands surrounded by shallow turquoise waters"));
    }

    #[test]
    fn deterministic_and_negative_constant() {
        let cat = ClassCatalog::default();
        let ctx = ["Multispectral indices highlight vegetation vigour."];
        for class in cat.class_names() {
            for seed in 0..5 {
                let a = assemble_prompt(&cat, class, &ctx, "satellite", seed).unwrap();
                assert_eq!(a, assemble_prompt(&cat, class, &ctx, "satellite", seed).unwrap());
                assert_eq!(a.negative, NEGATIVE_CUES);
            }
        }
    }

    #[test]
    fn unknown_class_and_template() {
        let cat = ClassCatalog::default();
        assert!(matches!(assemble_prompt::<&str>(&cat, "Urban", &[], "aerial", 0), Err(Error::Argument(_))));
        assert!(assemble_prompt::<&str>(&cat, "Bare Land", &[], "poster", 0).is_err());
    }

    #[test]
    fn keywords_are_capped_and_deduplicated() {
        let text: String = (0..40).map(|i| format!("keyword{i} keyword{i} ")).collect();
        let kw = context_keywords(&[text]);
        assert_eq!(kw.len(), MAX_CONTEXT_WORDS);
        assert_eq!(kw[0], "keyword0");
        assert_eq!(context_keywords(&["the of and 2023 with"]), Vec::<String>::new());
    }

    #[test]
    fn bank_cycles_phrases_and_uses_retrieval() {
        let cat = ClassCatalog::default();
        let e = HashedBowEmbedder::default();
        let chunks = chunk_corpus("Glacier mass balance from radar altimetry. Mangrove mapping with Sentinel imagery.", 10).unwrap();
        let idx = index_corpus(&chunks, &e, 256).unwrap();
        let bank = build_prompt_bank(&cat, 4, Some((&idx, &e)), 1, "aerial", 3).unwrap();
        assert_eq!(bank.len(), 28);
        let water: Vec<_> = bank.iter().filter(|p| p.class_name == "Water Body").collect();
        assert!(water[0].positive.starts_with("Cluster of small islands"));
        assert!(water[3].positive.starts_with("Cluster of small islands"));
        assert!(water[1].positive.starts_with("Winding river delta"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.jsonl");
        write_prompt_bank(&bank, &path).unwrap();
        assert_eq!(read_prompt_bank(&path).unwrap(), bank);
    }
}
