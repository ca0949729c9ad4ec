//! The image-folder fine-tuning layout:
//!
//! ```text
//! <root>/images/<file>.png
//! <root>/metadata.jsonl   {"file_name": "images/<file>.png", "text": "<caption>"}
//! <root>/manifest.json    {root_dir, image_count, metadata_path, checksum}
//! ```
//!
//! The checksum is SHA-256 over the metadata bytes followed by every image
//! file's bytes in metadata order.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RecordSet;
use crate::error::{Error, IoContext, Result};
use crate::fsutil::{read_json, write_bytes_atomic, write_json_pretty};
use crate::raster::Raster;
use crate::seed;

pub const METADATA_FILE: &str = "metadata.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Which caption conditions each training image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "seed")]
pub enum CaptionPolicy {
    #[default]
    First,
    Random(u64),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutManifest {
    pub root_dir: PathBuf,
    pub image_count: usize,
    pub metadata_path: PathBuf,
    pub checksum: String,
}

/// One metadata line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutEntry {
    pub file_name: String,
    pub text: String,
}

fn file_stem(source_id: &str) -> String {
    source_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn export_layout(rs: &RecordSet, dir: &Path, policy: CaptionPolicy) -> Result<LayoutManifest> {
    if rs.is_empty() {
        return Err(Error::arg("cannot export an empty record set"));
    }
    let image_dir = dir.join("images");
    fs::create_dir_all(&image_dir).at(&image_dir)?;

    let mut names = HashSet::with_capacity(rs.len());
    let mut metadata = Vec::new();
    let mut hasher_tail = Vec::with_capacity(rs.len());
    for r in rs.iter() {
        let file_name = format!("images/{}.png", file_stem(&r.source_id));
        if !names.insert(file_name.clone()) {
            return Err(Error::Internal(format!("duplicate file_name `{file_name}`")));
        }
        let text = match policy {
            CaptionPolicy::First => r.captions[0].clone(),
            CaptionPolicy::Random(seed) => {
                let mut rng = seed::derived_rng(seed, &["caption", &r.source_id]);
                r.captions[rng.random_range(0..r.captions.len())].clone()
            }
        };
        let png = r.image.encode_png()?;
        write_bytes_atomic(&dir.join(&file_name), &png)?;
        hasher_tail.push(Sha256::digest(&png));
        let entry = LayoutEntry { file_name, text };
        serde_json::to_writer(&mut metadata, &entry)?;
        metadata.push(b'\n');
    }
    let metadata_path = dir.join(METADATA_FILE);
    write_bytes_atomic(&metadata_path, &metadata)?;

    let manifest = LayoutManifest {
        root_dir: dir.to_path_buf(),
        image_count: rs.len(),
        metadata_path,
        checksum: layout_checksum(&metadata, hasher_tail.iter().map(|d| d.as_slice())),
    };
    write_json_pretty(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

fn layout_checksum<'a>(metadata: &[u8], image_digests: impl Iterator<Item = &'a [u8]>) -> String {
    let mut h = Sha256::new();
    h.update(metadata);
    for d in image_digests {
        h.update(d);
    }
    hex::encode(h.finalize())
}

impl LayoutManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        read_json(&dir.join(MANIFEST_FILE))
    }

    pub fn entries(&self) -> Result<Vec<LayoutEntry>> {
        let text = fs::read_to_string(&self.metadata_path).at(&self.metadata_path)?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(Error::from))
            .collect()
    }

    /// Recompute the checksum from disk and check the image count.
    pub fn verify(&self) -> Result<()> {
        let metadata = fs::read(&self.metadata_path).at(&self.metadata_path)?;
        let entries = self.entries()?;
        if entries.len() != self.image_count {
            return Err(Error::State(format!(
                "manifest lists {} images, metadata has {}",
                self.image_count,
                entries.len()
            )));
        }
        let mut digests = Vec::with_capacity(entries.len());
        for e in &entries {
            let path = self.root_dir.join(&e.file_name);
            digests.push(Sha256::digest(fs::read(&path).at(&path)?));
        }
        let sum = layout_checksum(&metadata, digests.iter().map(|d| d.as_slice()));
        if sum != self.checksum {
            return Err(Error::State(format!(
                "{}: checksum mismatch",
                self.root_dir.display()
            )));
        }
        Ok(())
    }
}

/// Load a verified layout with its decoded images.
pub fn read_layout(dir: &Path) -> Result<(LayoutManifest, Vec<(LayoutEntry, Raster)>)> {
    let manifest = LayoutManifest::load(dir)?;
    manifest.verify()?;
    let items = manifest
        .entries()?
        .into_iter()
        .map(|e| {
            let path = manifest.root_dir.join(&e.file_name);
            let image = Raster::decode(&fs::read(&path).at(&path)?)?;
            Ok((e, image))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, items))
}
