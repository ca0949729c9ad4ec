//! Downstream land-cover classification on the synthetic dataset: a
//! stratified loader, train/eval transforms, a classifier adapter with a
//! logistic-regression reference, and the evaluation metric suite.

mod classifier;
mod data;
mod metrics;
mod transforms;

pub use classifier::{
    train_classifier, ClassifierBackend, ClassifyConfig, EpochRecord, LogisticProbe, TrainOutcome,
};
pub use data::{labeled_from_records, load_synth, split_stratified, LabeledImage, SynthSplits};
pub use metrics::{evaluate_classifier, ClassMetrics, MetricsReport};
pub use transforms::{build_transforms, TransformPipeline, DEFAULT_CROP_SIDE};
