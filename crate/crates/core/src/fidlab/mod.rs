//! Fréchet distance between Gaussian fits of image features, and the
//! sampled-run FID protocol.

mod extractor;
mod frechet;
mod sampled;

pub use extractor::{extract_features, FeatureExtractor, ReferenceExtractor};
pub use frechet::{fit_gaussian, frechet_distance, FeatureStats};
pub use sampled::{full_fid, sampled_fid, SampledFid, DEFAULT_RUNS, DEFAULT_SAMPLE_SIZE};
