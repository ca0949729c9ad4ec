//! Dataset ingestion: columnar image-caption datasets in, fine-tuning layout
//! out, plus holdout splitting, channel statistics, resizing and dihedral
//! augmentation.

mod augment;
pub(crate) mod columnar;
mod layout;
mod resize;
mod split;
pub(crate) mod stats;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

pub use augment::{augment_dihedral, expand_dihedral, Dihedral};
pub use columnar::{ingest_columnar, write_columnar, ColumnSpec};
pub use layout::{export_layout, read_layout, CaptionPolicy, LayoutEntry, LayoutManifest, MANIFEST_FILE, METADATA_FILE};
pub use resize::{resize, resize_real, resize_to};
pub use split::split_holdout;
pub use stats::{
    compute_stats, normalize, normalize_in_place, stats_of_rasters, ChannelStats, STD_FLOOR,
};

/// One image with its captions.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageCaptionRecord {
    pub image: Raster,
    pub captions: Vec<String>,
    pub class_name: Option<String>,
    pub source_id: String,
}

impl ImageCaptionRecord {
    fn validate(&self) -> Result<()> {
        if self.image.channels() != 3 {
            return Err(Error::Record {
                source_id: self.source_id.clone(),
                reason: format!("expected 3 channels, found {}", self.image.channels()),
            });
        }
        if self.captions.is_empty() {
            return Err(Error::Record {
                source_id: self.source_id.clone(),
                reason: "no captions".into(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Holdout,
    Unsplit,
}

/// An ordered collection of records with pairwise distinct source ids.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordSet {
    records: Vec<ImageCaptionRecord>,
    split_tag: SplitTag,
}

impl RecordSet {
    pub fn new(records: Vec<ImageCaptionRecord>, split_tag: SplitTag) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            r.validate()?;
            if !seen.insert(r.source_id.as_str()) {
                return Err(Error::Record {
                    source_id: r.source_id.clone(),
                    reason: "duplicate source_id".into(),
                });
            }
        }
        Ok(Self { records, split_tag })
    }

    pub fn empty(split_tag: SplitTag) -> Self {
        Self { records: Vec::new(), split_tag }
    }

    pub fn records(&self) -> &[ImageCaptionRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<ImageCaptionRecord> {
        self.records
    }

    pub fn split_tag(&self) -> SplitTag {
        self.split_tag
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ImageCaptionRecord> {
        self.records.iter()
    }

    /// Apply `f` to every image, keeping captions and ids.
    pub fn map_images(&self, mut f: impl FnMut(&Raster) -> Result<Raster>) -> Result<Self> {
        let records = self
            .records
            .iter()
            .map(|r| {
                Ok(ImageCaptionRecord {
                    image: f(&r.image)?,
                    ..r.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(records, self.split_tag)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn record(id: &str, side: usize, salt: u8) -> ImageCaptionRecord {
        ImageCaptionRecord {
            image: Raster::from_fn(side, side, 3, |y, x, c| {
                (y as u8).wrapping_mul(17) ^ (x as u8).wrapping_mul(29) ^ (c as u8 * 71) ^ salt
            }),
            captions: (0..5).map(|i| format!("{id} caption {i}.")).collect(),
            class_name: Some("Bare Land".into()),
            source_id: id.to_string(),
        }
    }

    pub fn record_set(n: usize) -> RecordSet {
        let records = (0..n).map(|i| record(&format!("img-{i:04}"), 6, i as u8)).collect();
        RecordSet::new(records, SplitTag::Unsplit).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_ids_and_empty_captions_are_rejected() {
        let a = fixtures::record("a", 2, 0);
        assert!(RecordSet::new(vec![a.clone(), a.clone()], SplitTag::Unsplit).is_err());
        let mut b = a;
        b.captions.clear();
        assert!(matches!(
            RecordSet::new(vec![b], SplitTag::Unsplit),
            Err(Error::Record { .. })
        ));
    }
}
