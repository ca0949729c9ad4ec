use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GenerationPlan, SynthRecord};
use crate::classes;
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::fsutil::{append_jsonl, read_jsonl, slash_path, write_bytes_atomic};
use crate::promptforge::PromptSpec;
use crate::raster::Raster;
use crate::trainctl::DiffusionBackend;

pub const GEN_MANIFEST_FILE: &str = "gen_manifest.jsonl";

/// One completed generation, keyed by `(class_name, seed)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub class_name: String,
    pub seed: u64,
    pub task_index: usize,
    /// Relative to the manifest's directory.
    pub image_path: String,
    pub image_sha256: String,
    pub backend_id: String,
    pub prompt: PromptSpec,
}

fn image_rel_path(class_name: &str, seed: u64) -> PathBuf {
    Path::new("images").join(classes::slug(class_name)).join(format!("{seed}.png"))
}

fn load_completed(manifest: &Path, root: &Path) -> Result<HashMap<(String, u64), (ManifestEntry, Vec<u8>)>> {
    let mut done = HashMap::new();
    if !manifest.exists() {
        return Ok(done);
    }
    for entry in read_jsonl::<ManifestEntry>(manifest)? {
        let path = root.join(&entry.image_path);
        // A missing or altered image means the task is redone.
        let Ok(bytes) = fs::read(&path) else { continue };
        if sha256_hex(&bytes) != entry.image_sha256 {
            log::warn!("{}: checksum mismatch, regenerating", path.display());
            continue;
        }
        done.insert((entry.class_name.clone(), entry.seed), (entry, bytes));
    }
    Ok(done)
}

fn to_record(class_name: &str, spec: &PromptSpec, image: Raster) -> Result<SynthRecord> {
    let label_index = classes::label_index(class_name)
        .ok_or_else(|| Error::arg(format!("`{class_name}` is not a known land-cover class")))?;
    Ok(SynthRecord {
        image,
        class_name: class_name.to_string(),
        label_index,
        prompt: spec.positive.clone(),
        negative_prompt: spec.negative.clone(),
        seed: spec.seed,
        scheduler: spec.scheduler.clone(),
        steps: spec.steps,
    })
}

/// Render every task of `plan`, appending each completed task to
/// `manifest` as it finishes. Tasks already in the manifest with an intact
/// image are not regenerated. Records come back sorted by (class, seed).
pub fn run_generation(
    plan: &GenerationPlan,
    backend: &dyn DiffusionBackend,
    manifest: &Path,
) -> Result<Vec<SynthRecord>> {
    plan.validate()?;
    if plan.is_empty() {
        return Ok(Vec::new());
    }
    let root = manifest.parent().unwrap_or(Path::new("")).to_path_buf();
    let mut done = load_completed(manifest, &root)?;
    let mut records = Vec::with_capacity(plan.len());
    let mut fresh = 0usize;

    for (task_index, (class_name, spec)) in plan.tasks.iter().enumerate() {
        let fail = |source: Error| Error::Generation {
            task_index,
            class_name: class_name.clone(),
            seed: spec.seed,
            source: Box::new(source),
        };
        if let Some((_, bytes)) = done.remove(&(class_name.clone(), spec.seed)) {
            let image = Raster::decode(&bytes).map_err(fail)?;
            records.push(to_record(class_name, spec, image).map_err(fail)?);
            continue;
        }
        let image = backend.generate(spec).map_err(fail)?;
        if (image.width(), image.height(), image.channels()) != (spec.width, spec.height, 3) {
            return Err(fail(Error::Backend(format!(
                "backend returned {}×{}×{}, expected {}×{}×3",
                image.width(),
                image.height(),
                image.channels(),
                spec.width,
                spec.height
            ))));
        }
        let rel = image_rel_path(class_name, spec.seed);
        let png = image.encode_png().map_err(fail)?;
        write_bytes_atomic(&root.join(&rel), &png).map_err(fail)?;
        let entry = ManifestEntry {
            class_name: class_name.clone(),
            seed: spec.seed,
            task_index,
            image_path: slash_path(&rel),
            image_sha256: sha256_hex(&png),
            backend_id: backend.id().to_string(),
            prompt: spec.clone(),
        };
        append_jsonl(manifest, &entry).map_err(fail)?;
        records.push(to_record(class_name, spec, image).map_err(fail)?);
        fresh += 1;
    }
    log::info!("{fresh} generated, {} reused", plan.len() - fresh);
    records.sort_by(|a, b| (a.label_index, a.seed).cmp(&(b.label_index, b.seed)));
    Ok(records)
}

/// Completed entries of a manifest file, if it exists.
pub fn read_manifest(manifest: &Path) -> Result<Vec<ManifestEntry>> {
    if !manifest.exists() {
        return Ok(Vec::new());
    }
    read_jsonl(manifest)
}
