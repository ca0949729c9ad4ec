use serde::{Deserialize, Serialize};

use super::RecordSet;
use crate::error::{Error, Result};
use crate::raster::{Raster, RealRaster};

/// Lower bound applied to every per-channel standard deviation.
pub const STD_FLOOR: f64 = 1e-6;

/// Whole-dataset per-channel mean and population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() || mean.is_empty() {
            return Err(Error::arg("mean and std must have the same non-zero length"));
        }
        let std = std.into_iter().map(|s| s.max(STD_FLOOR)).collect();
        Ok(Self { mean, std })
    }

    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    /// Statistics of real-valued rasters (two passes, fixed order).
    pub fn of_real(images: &[RealRaster]) -> Result<Self> {
        let first = images.first().ok_or_else(|| Error::arg("no images"))?;
        let ch = first.channels();
        if images.iter().any(|im| im.channels() != ch) {
            return Err(Error::arg("images disagree on channel count"));
        }
        let mut sum = vec![0.0; ch];
        let mut count = 0usize;
        for im in images {
            for px in im.data().chunks_exact(ch) {
                for (s, v) in sum.iter_mut().zip(px) {
                    *s += v;
                }
            }
            count += im.height() * im.width();
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut sq = vec![0.0; ch];
        for im in images {
            for px in im.data().chunks_exact(ch) {
                for c in 0..ch {
                    let d = px[c] - mean[c];
                    sq[c] += d * d;
                }
            }
        }
        let std = sq.iter().map(|s| (s / count as f64).sqrt()).collect();
        Self::new(mean, std)
    }
}

/// Per-channel mean and population std over every pixel of every image.
///
/// Accumulation is exact integer arithmetic, so the result is independent of
/// image order and thread scheduling.
pub fn compute_stats(rs: &RecordSet) -> Result<ChannelStats> {
    let images: Vec<&Raster> = rs.iter().map(|r| &r.image).collect();
    stats_of_rasters(&images)
}

/// [`compute_stats`] over bare images.
pub fn stats_of_rasters(images: &[&Raster]) -> Result<ChannelStats> {
    let first = images
        .first()
        .ok_or_else(|| Error::arg("cannot compute statistics of an empty record set"))?;
    let ch = first.channels();
    let mut sum = vec![0u128; ch];
    let mut sum_sq = vec![0u128; ch];
    let mut count = 0u128;
    for im in images {
        if im.channels() != ch {
            return Err(Error::arg("images disagree on channel count"));
        }
        let mut s = vec![0u64; ch];
        let mut ss = vec![0u64; ch];
        for px in im.data().chunks_exact(ch) {
            for c in 0..ch {
                let v = u64::from(px[c]);
                s[c] += v;
                ss[c] += v * v;
            }
        }
        for c in 0..ch {
            sum[c] += u128::from(s[c]);
            sum_sq[c] += u128::from(ss[c]);
        }
        count += (im.height() * im.width()) as u128;
    }
    let n = count as f64;
    let mean = sum.iter().map(|&s| s as f64 / n).collect();
    // n² · var = n·Σx² − (Σx)², exact in integers.
    let std = sum
        .iter()
        .zip(&sum_sq)
        .map(|(&s, &ss)| {
            let scaled = count * ss - s * s;
            (scaled as f64).sqrt() / n
        })
        .collect();
    ChannelStats::new(mean, std)
}

/// `(pixel − mean) / std` per channel.
pub fn normalize(image: &Raster, stats: &ChannelStats) -> Result<RealRaster> {
    let mut out = RealRaster::from_raster(image);
    normalize_in_place(&mut out, stats)?;
    Ok(out)
}

pub fn normalize_in_place(image: &mut RealRaster, stats: &ChannelStats) -> Result<()> {
    let ch = image.channels();
    if ch != stats.channels() {
        return Err(Error::arg(format!(
            "image has {ch} channels, statistics have {}",
            stats.channels()
        )));
    }
    for px in image.data_mut().chunks_exact_mut(ch) {
        for c in 0..ch {
            px[c] = (px[c] - stats.mean[c]) / stats.std[c];
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{fixtures, RecordSet, SplitTag};

    fn set_of(images: Vec<Raster>) -> RecordSet {
        let records = images
            .into_iter()
            .enumerate()
            .map(|(i, image)| {
                let mut r = fixtures::record(&format!("r{i}"), 1, 0);
                r.image = image;
                r
            })
            .collect();
        RecordSet::new(records, SplitTag::Unsplit).unwrap()
    }

    #[test]
    fn constant_image_has_floored_std() {
        let s = compute_stats(&set_of(vec![Raster::filled(4, 4, 3, 0)])).unwrap();
        assert_eq!(s.mean, vec![0.0; 3]);
        assert_eq!(s.std, vec![STD_FLOOR; 3]);
    }

    #[test]
    fn two_pixels_zero_and_two() {
        let s = compute_stats(&set_of(vec![
            Raster::filled(1, 1, 3, 0),
            Raster::filled(1, 1, 3, 2),
        ]))
        .unwrap();
        assert_eq!(s.mean, vec![1.0; 3]);
        assert_eq!(s.std, vec![1.0; 3]);
    }

    /// Independent per-pixel accumulation in floating point, two passes.
    fn two_pass_oracle(images: &[Raster]) -> (Vec<f64>, Vec<f64>) {
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); 3];
        for im in images {
            for y in 0..im.height() {
                for x in 0..im.width() {
                    for c in 0..3 {
                        values[c].push(im.get(y, x, c) as f64);
                    }
                }
            }
        }
        let mean: Vec<f64> = values.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
        let std = values
            .iter()
            .zip(&mean)
            .map(|(v, m)| (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt())
            .collect();
        (mean, std)
    }

    #[test]
    fn four_image_fixture_matches_oracle() {
        let images: Vec<Raster> = (0..4u8)
            .map(|k| Raster::from_fn(3 + k as usize, 5, 3, |y, x, c| {
                ((y * 37 + x * 11 + c * 53) as u8).wrapping_mul(k + 3)
            }))
            .collect();
        let s = compute_stats(&set_of(images.clone())).unwrap();
        let (mean, std) = two_pass_oracle(&images);
        for c in 0..3 {
            assert!((s.mean[c] - mean[c]).abs() < 1e-9);
            assert!((s.std[c] - std[c]).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_set_is_an_argument_error() {
        assert!(matches!(
            compute_stats(&RecordSet::empty(SplitTag::Unsplit)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn normalize_forced_arithmetic_and_identity() {
        let im = Raster::new(1, 2, 1, vec![0, 2]).unwrap();
        let stats = ChannelStats::new(vec![1.0], vec![1.0]).unwrap();
        assert_eq!(normalize(&im, &stats).unwrap().data(), &[-1.0, 1.0]);
        let id = normalize(&im, &ChannelStats::identity(1)).unwrap();
        assert_eq!(id.data(), &[0.0, 2.0]);
        assert!(normalize(&im, &ChannelStats::identity(3)).is_err());
    }

    #[test]
    fn normalized_fixture_has_zero_mean_unit_std() {
        let rs = fixtures::record_set(4);
        let stats = compute_stats(&rs).unwrap();
        let normed: Vec<RealRaster> = rs.iter().map(|r| normalize(&r.image, &stats).unwrap()).collect();
        let s = ChannelStats::of_real(&normed).unwrap();
        for c in 0..3 {
            assert!(s.mean[c].abs() < 1e-6, "mean {c} = {}", s.mean[c]);
            assert!((s.std[c] - 1.0).abs() < 1e-6, "std {c} = {}", s.std[c]);
        }
    }
}
