use nalgebra::DMatrix;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{extract_features, fit_gaussian, frechet_distance, FeatureExtractor};
use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::seed;

pub const DEFAULT_SAMPLE_SIZE: usize = 250;
pub const DEFAULT_RUNS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledFid {
    pub mean_fid: f64,
    pub per_run: Vec<f64>,
}

fn rows(features: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), features.ncols(), |i, j| features[(idx[i], j)])
}

/// FID between the full real and generated sets.
pub fn full_fid(real: &[&Raster], gen: &[&Raster], extractor: &dyn FeatureExtractor) -> Result<f64> {
    let a = fit_gaussian(&extract_features(real, extractor)?)?;
    let b = fit_gaussian(&extract_features(gen, extractor)?)?;
    frechet_distance(&a, &b)
}

/// Mean FID over `runs` draws of `sample_size` images, without replacement,
/// from each set. Run `r` draws both samples from one RNG state derived from
/// `(seed, r)`, so equally sized sets are sampled at the same positions.
pub fn sampled_fid(
    real: &[&Raster],
    gen: &[&Raster],
    extractor: &dyn FeatureExtractor,
    sample_size: usize,
    runs: usize,
    seed: u64,
) -> Result<SampledFid> {
    if runs == 0 {
        return Err(Error::arg("runs must be at least 1"));
    }
    if sample_size < 2 || sample_size > real.len().min(gen.len()) {
        return Err(Error::arg(format!(
            "sample size {sample_size} must lie in [2, {}] (real {}, generated {})",
            real.len().min(gen.len()),
            real.len(),
            gen.len()
        )));
    }
    let fr = extract_features(real, extractor)?;
    let fg = extract_features(gen, extractor)?;
    let mut per_run = Vec::with_capacity(runs);
    for r in 0..runs {
        let rng = seed::derived_rng(seed, &["fid-run", &r.to_string()]);
        let ir = sample(&mut rng.clone(), real.len(), sample_size).into_vec();
        let ig = sample(&mut rng.clone(), gen.len(), sample_size).into_vec();
        let a = fit_gaussian(&rows(&fr, &ir))?;
        let b = fit_gaussian(&rows(&fg, &ig))?;
        per_run.push(frechet_distance(&a, &b)?);
    }
    let mean_fid = per_run.iter().sum::<f64>() / runs as f64;
    Ok(SampledFid { mean_fid, per_run })
}
