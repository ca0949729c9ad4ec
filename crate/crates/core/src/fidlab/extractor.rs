use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ingest::resize_to;
use crate::raster::{Raster, RealRaster};
use crate::seed;

/// Maps preprocessed images to fixed-length feature vectors.
pub trait FeatureExtractor {
    fn id(&self) -> String;

    fn dim(&self) -> usize;

    /// Side length images are resized to before embedding.
    fn input_side(&self) -> usize;

    /// Embed `side × side × 3` rasters with values in [0, 1]; one row each.
    fn embed(&self, inputs: &[RealRaster]) -> Result<DMatrix<f64>>;
}

/// Fixed Gaussian random projection of downscaled pixels.
#[derive(Clone, Debug)]
pub struct ReferenceExtractor {
    side: usize,
    seed: u64,
    projection: DMatrix<f64>,
}

impl ReferenceExtractor {
    pub fn new(side: usize, dim: usize, seed: u64) -> Self {
        let inputs = side * side * 3;
        let scale = (inputs as f64).sqrt();
        let mut rng = seed::derived_rng(seed, &["reference-extractor"]);
        let projection = DMatrix::from_fn(dim, inputs, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z / scale
        });
        Self { side, seed, projection }
    }

    /// `dim × (side·side·3)`; columns follow the HWC pixel order.
    pub fn projection(&self) -> &DMatrix<f64> {
        &self.projection
    }
}

impl Default for ReferenceExtractor {
    /// 16×16 input, 16 features, seed 0.
    fn default() -> Self {
        Self::new(16, 16, 0)
    }
}

impl FeatureExtractor for ReferenceExtractor {
    fn id(&self) -> String {
        format!("reference-projection-s{}-d{}-seed{}", self.side, self.projection.nrows(), self.seed)
    }

    fn dim(&self) -> usize {
        self.projection.nrows()
    }

    fn input_side(&self) -> usize {
        self.side
    }

    fn embed(&self, inputs: &[RealRaster]) -> Result<DMatrix<f64>> {
        let n_in = self.projection.ncols();
        let mut x = DMatrix::zeros(n_in, inputs.len());
        for (j, im) in inputs.iter().enumerate() {
            if im.data().len() != n_in {
                return Err(Error::Backend(format!(
                    "expected {n_in} input values, got {}",
                    im.data().len()
                )));
            }
            x.column_mut(j).copy_from_slice(im.data());
        }
        Ok((&self.projection * x).transpose())
    }
}

/// Resize each image to the extractor's input side, scale to [0, 1] and
/// embed. Returns an `N × d` matrix.
pub fn extract_features(images: &[&Raster], extractor: &dyn FeatureExtractor) -> Result<DMatrix<f64>> {
    if images.is_empty() {
        return Err(Error::arg("no images to embed"));
    }
    let side = extractor.input_side();
    let inputs = images
        .iter()
        .map(|im| {
            if im.channels() != 3 {
                return Err(Error::arg("feature extraction expects RGB images"));
            }
            let small = resize_to(im, side)?;
            let data = small.data().iter().map(|&v| f64::from(v) / 255.0).collect();
            RealRaster::new(side, side, 3, data)
        })
        .collect::<Result<Vec<_>>>()?;
    let features = extractor.embed(&inputs)?;
    if features.shape() != (images.len(), extractor.dim()) {
        return Err(Error::Backend(format!(
            "extractor `{}` returned a {:?} matrix for {} images",
            extractor.id(),
            features.shape(),
            images.len()
        )));
    }
    Ok(features)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(salt: u8) -> Raster {
        Raster::from_fn(20, 20, 3, |y, x, c| (y * 11 + x * 5 + c * 40) as u8 ^ salt)
    }

    #[test]
    fn shape_and_determinism() {
        let e = ReferenceExtractor::default();
        let (a, b) = (image(0), image(7));
        let f = extract_features(&[&a, &b, &a], &e).unwrap();
        assert_eq!(f.shape(), (3, 16));
        assert_eq!(f.row(0), f.row(2));
        assert_ne!(f.row(0), f.row(1));
    }

    #[test]
    fn matches_explicit_projection() {
        let e = ReferenceExtractor::new(4, 5, 3);
        let img = image(3);
        let f = extract_features(&[&img], &e).unwrap();
        let small = resize_to(&img, 4).unwrap();
        let p = e.projection();
        for k in 0..5 {
            let mut acc = 0.0;
            for (i, &v) in small.data().iter().enumerate() {
                acc += p[(k, i)] * (f64::from(v) / 255.0);
            }
            assert!((f[(0, k)] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_scale() {
        let e = ReferenceExtractor::default();
        let p = e.projection();
        assert_eq!(p.shape(), (16, 768));
        // Entries are N(0, 1/768), so their mean square is close to 1/768.
        let ms = p.iter().map(|v| v * v).sum::<f64>() / p.len() as f64;
        assert!((ms * 768.0 - 1.0).abs() < 0.1);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(extract_features(&[], &ReferenceExtractor::default()).is_err());
    }
}
