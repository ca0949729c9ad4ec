//! The eight symmetries of the square.

use serde::{Deserialize, Serialize};

use super::{ImageCaptionRecord, RecordSet};
use crate::error::{Error, Result};
use crate::raster::Raster;

/// A dihedral transform. Rotations are counter-clockwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dihedral {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    /// Mirror left-right.
    FlipH,
    /// Mirror top-bottom.
    FlipV,
    /// Mirror about the main diagonal.
    Transpose,
    /// Mirror about the anti-diagonal.
    AntiTranspose,
}

impl Dihedral {
    /// Output order of [`augment_dihedral`].
    pub const NON_IDENTITY: [Dihedral; 7] = [
        Dihedral::Rot90,
        Dihedral::Rot180,
        Dihedral::Rot270,
        Dihedral::FlipH,
        Dihedral::FlipV,
        Dihedral::Transpose,
        Dihedral::AntiTranspose,
    ];

    pub const ALL: [Dihedral; 8] = [
        Dihedral::Identity,
        Dihedral::Rot90,
        Dihedral::Rot180,
        Dihedral::Rot270,
        Dihedral::FlipH,
        Dihedral::FlipV,
        Dihedral::Transpose,
        Dihedral::AntiTranspose,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dihedral::Identity => "identity",
            Dihedral::Rot90 => "rot90",
            Dihedral::Rot180 => "rot180",
            Dihedral::Rot270 => "rot270",
            Dihedral::FlipH => "hflip",
            Dihedral::FlipV => "vflip",
            Dihedral::Transpose => "transpose",
            Dihedral::AntiTranspose => "antitranspose",
        }
    }

    fn swaps_axes(self) -> bool {
        matches!(
            self,
            Dihedral::Rot90 | Dihedral::Rot270 | Dihedral::Transpose | Dihedral::AntiTranspose
        )
    }

    /// Source coordinate for output `(y, x)` of an `h × w` input.
    #[inline]
    fn source(self, y: usize, x: usize, h: usize, w: usize) -> (usize, usize) {
        match self {
            Dihedral::Identity => (y, x),
            Dihedral::Rot90 => (x, w - 1 - y),
            Dihedral::Rot180 => (h - 1 - y, w - 1 - x),
            Dihedral::Rot270 => (h - 1 - x, y),
            Dihedral::FlipH => (y, w - 1 - x),
            Dihedral::FlipV => (h - 1 - y, x),
            Dihedral::Transpose => (x, y),
            Dihedral::AntiTranspose => (h - 1 - x, w - 1 - y),
        }
    }

    /// Apply to any raster; axis-swapping transforms swap height and width.
    pub fn apply(self, image: &Raster) -> Raster {
        let (h, w) = (image.height(), image.width());
        let (oh, ow) = if self.swaps_axes() { (w, h) } else { (h, w) };
        Raster::from_fn(oh, ow, image.channels(), |y, x, c| {
            let (sy, sx) = self.source(y, x, h, w);
            image.get(sy, sx, c)
        })
    }
}

/// The seven non-identity flips and rotations of a square image, in the
/// order of [`Dihedral::NON_IDENTITY`].
pub fn augment_dihedral(image: &Raster) -> Result<Vec<Raster>> {
    if !image.is_square() {
        return Err(Error::arg(format!(
            "dihedral augmentation needs a square image, got {}x{}",
            image.height(),
            image.width()
        )));
    }
    Ok(Dihedral::NON_IDENTITY.iter().map(|t| t.apply(image)).collect())
}

/// Each record followed by its seven transforms; ids get a `__<transform>`
/// suffix and captions are shared.
pub fn expand_dihedral(rs: &RecordSet) -> Result<RecordSet> {
    let mut out = Vec::with_capacity(rs.len() * 8);
    for r in rs.iter() {
        let variants = augment_dihedral(&r.image).map_err(|e| Error::Record {
            source_id: r.source_id.clone(),
            reason: e.to_string(),
        })?;
        out.push(r.clone());
        for (t, image) in Dihedral::NON_IDENTITY.iter().zip(variants) {
            out.push(ImageCaptionRecord {
                image,
                source_id: format!("{}__{}", r.source_id, t.name()),
                ..r.clone()
            });
        }
    }
    RecordSet::new(out, rs.split_tag())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: &[&[u8]]) -> Raster {
        let n = rows.len();
        Raster::from_fn(n, rows[0].len(), 1, |y, x, _| rows[y][x])
    }

    #[test]
    fn hflip_of_small_grid() {
        let im = grid(&[&[1, 2], &[3, 4]]);
        assert_eq!(Dihedral::FlipH.apply(&im), grid(&[&[2, 1], &[4, 3]]));
        assert_eq!(Dihedral::FlipV.apply(&im), grid(&[&[3, 4], &[1, 2]]));
        // Counter-clockwise quarter turn.
        assert_eq!(Dihedral::Rot90.apply(&im), grid(&[&[2, 4], &[1, 3]]));
        assert_eq!(Dihedral::Transpose.apply(&im), grid(&[&[1, 3], &[2, 4]]));
        assert_eq!(Dihedral::AntiTranspose.apply(&im), grid(&[&[4, 2], &[3, 1]]));
    }

    #[test]
    fn rot180_twice_is_identity() {
        let im = Raster::from_fn(4, 4, 3, |y, x, c| (y * 16 + x * 4 + c) as u8);
        let r = Dihedral::Rot180;
        assert_eq!(r.apply(&r.apply(&im)), im);
    }

    #[test]
    fn generic_3x3_gives_seven_distinct_outputs() {
        let im = Raster::from_fn(3, 3, 1, |y, x, _| (y * 3 + x) as u8);
        let outs = augment_dihedral(&im).unwrap();
        assert_eq!(outs.len(), 7);
        for i in 0..7 {
            assert_ne!(outs[i], im);
            for j in i + 1..7 {
                assert_ne!(outs[i], outs[j], "{i} vs {j}");
            }
        }
    }

    #[test]
    fn non_square_is_rejected() {
        assert!(augment_dihedral(&Raster::filled(2, 3, 3, 0)).is_err());
    }

    #[test]
    fn rectangular_apply_swaps_dimensions() {
        let im = Raster::filled(2, 5, 3, 1);
        let out = Dihedral::Rot90.apply(&im);
        assert_eq!((out.height(), out.width()), (5, 2));
    }

    #[test]
    fn expansion_multiplies_by_eight() {
        let rs = crate::ingest::fixtures::record_set(2);
        let ex = expand_dihedral(&rs).unwrap();
        assert_eq!(ex.len(), 16);
        assert_eq!(ex.records()[1].source_id, "img-0000__rot90");
    }
}
