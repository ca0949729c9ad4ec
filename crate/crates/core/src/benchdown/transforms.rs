use rand::Rng;

use crate::error::{Error, Result};
use crate::ingest::{normalize_in_place, ChannelStats};
use crate::raster::{Raster, RealRaster};
use crate::seed::SeededRng;

pub const DEFAULT_CROP_SIDE: usize = 224;
const JITTER: f64 = 0.2;

/// Train: random crop, horizontal and vertical flips (p = 0.5 each),
/// brightness/contrast jitter, normalize. Eval: center crop, normalize.
#[derive(Clone, Debug)]
pub struct TransformPipeline {
    stats: ChannelStats,
    crop_side: usize,
    train: bool,
}

pub fn build_transforms(stats: &ChannelStats, crop_side: usize, train: bool) -> Result<TransformPipeline> {
    if crop_side == 0 {
        return Err(Error::arg("crop side must be positive"));
    }
    Ok(TransformPipeline { stats: stats.clone(), crop_side, train })
}

impl TransformPipeline {
    pub fn crop_side(&self) -> usize {
        self.crop_side
    }

    pub fn is_train(&self) -> bool {
        self.train
    }

    /// The RNG is only consumed by the train pipeline.
    pub fn apply(&self, image: &Raster, rng: &mut SeededRng) -> Result<RealRaster> {
        let (h, w, ch, side) = (image.height(), image.width(), image.channels(), self.crop_side);
        if side > h || side > w {
            return Err(Error::arg(format!("crop {side} exceeds image {h}×{w}")));
        }
        let (mut top, mut left) = ((h - side) / 2, (w - side) / 2);
        let (mut flip_h, mut flip_v, mut alpha, mut beta) = (false, false, 1.0, 0.0);
        if self.train {
            top = rng.random_range(0..=h - side);
            left = rng.random_range(0..=w - side);
            flip_h = rng.random_bool(0.5);
            flip_v = rng.random_bool(0.5);
            alpha = 1.0 + rng.random_range(-JITTER..=JITTER);
            beta = 255.0 * rng.random_range(-JITTER..=JITTER);
        }
        let mut data = Vec::with_capacity(side * side * ch);
        for y in 0..side {
            let sy = top + if flip_v { side - 1 - y } else { y };
            for x in 0..side {
                let sx = left + if flip_h { side - 1 - x } else { x };
                for c in 0..ch {
                    let v = f64::from(image.get(sy, sx, c));
                    data.push(if self.train { (alpha * v + beta).clamp(0.0, 255.0) } else { v });
                }
            }
        }
        let mut out = RealRaster::new(side, side, ch, data)?;
        normalize_in_place(&mut out, &self.stats)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::normalize;
    use crate::seed;

    fn img() -> Raster {
        Raster::from_fn(9, 7, 3, |y, x, c| (y * 20 + x * 3 + c) as u8)
    }

    fn stats() -> ChannelStats {
        ChannelStats::new(vec![90.0, 91.0, 92.0], vec![40.0, 41.0, 42.0]).unwrap()
    }

    #[test]
    fn eval_is_deterministic_and_matches_ingest_normalize() {
        let t = build_transforms(&stats(), 5, false).unwrap();
        let a = t.apply(&img(), &mut seed::rng(0)).unwrap();
        assert_eq!(a, t.apply(&img(), &mut seed::rng(99)).unwrap());
        // Center crop of a 9×7 image to 5: rows 2..7, cols 1..6.
        let cropped = Raster::from_fn(5, 5, 3, |y, x, c| img().get(y + 2, x + 1, c));
        assert_eq!(a, normalize(&cropped, &stats()).unwrap());
    }

    #[test]
    fn train_shape_and_crop_errors() {
        let t = build_transforms(&stats(), 6, true).unwrap();
        let mut rng = seed::rng(1);
        for _ in 0..20 {
            let out = t.apply(&img(), &mut rng).unwrap();
            assert_eq!((out.height(), out.width(), out.channels()), (6, 6, 3));
        }
        let too_big = build_transforms(&stats(), 8, true).unwrap();
        assert!(too_big.apply(&img(), &mut rng).is_err());
        assert!(build_transforms(&stats(), 0, false).is_err());
    }

    #[test]
    fn train_jitter_stays_in_pixel_range() {
        let t = build_transforms(&ChannelStats::identity(3), 7, true).unwrap();
        let bright = Raster::filled(7, 7, 3, 250);
        let mut rng = seed::rng(2);
        for _ in 0..50 {
            let out = t.apply(&bright, &mut rng).unwrap();
            assert!(out.data().iter().all(|v| (0.0..=255.0).contains(v)));
            // A constant image stays constant under crop, flip and jitter.
            assert!(out.data().iter().all(|v| *v == out.data()[0]));
        }
    }
}
