use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::{argmax, cross_entropy, score};
use super::{build_transforms, LabeledImage, SynthSplits, DEFAULT_CROP_SIDE};
use crate::classes::LULC_CLASSES;
use crate::error::{Error, Result};
use crate::ingest::ChannelStats;
use crate::raster::RealRaster;
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub learning_rate: f64,
    pub epochs: u32,
    pub batch_size: usize,
    pub crop_side: usize,
    pub seed: u64,
    pub backend_id: String,
    /// Random crop, flips and colour jitter on training batches. When off,
    /// training sees the evaluation transform.
    pub augment: bool,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            epochs: 20,
            batch_size: 16,
            crop_side: DEFAULT_CROP_SIDE,
            seed: 0,
            backend_id: LogisticProbe::ID.to_string(),
            augment: true,
        }
    }
}

impl ClassifyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning_rate", "must be positive"));
        }
        if self.epochs < 1 {
            return Err(Error::validation("epochs", "must be at least 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::validation("batch_size", "must be at least 1"));
        }
        if self.crop_side < 1 {
            return Err(Error::validation("crop_side", "must be at least 1"));
        }
        Ok(())
    }
}

/// Adapter around an image classifier.
pub trait ClassifierBackend {
    fn id(&self) -> &str;

    /// Reset to fresh weights for `num_classes` outputs.
    fn init(&mut self, num_classes: usize, seed: u64) -> Result<()>;

    /// One row of unnormalized class scores per input.
    fn logits(&self, inputs: &[RealRaster]) -> Result<Vec<Vec<f64>>>;

    /// One optimizer step; returns the batch mean cross-entropy before it.
    fn train_batch(&mut self, inputs: &[RealRaster], labels: &[usize], learning_rate: f64) -> Result<f64>;

    fn snapshot(&self) -> Result<serde_json::Value>;

    fn restore(&mut self, state: &serde_json::Value) -> Result<()>;
}

/// Multinomial logistic regression on block-averaged `8 × 8` inputs,
/// trained with Adam from zero weights.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LogisticProbe {
    pool: usize,
    classes: usize,
    channels: usize,
    weights: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl LogisticProbe {
    pub const ID: &'static str = "logistic-probe";

    pub fn new() -> Self {
        Self { pool: 8, channels: 3, ..Default::default() }
    }

    fn n_features(&self) -> usize {
        self.pool * self.pool * self.channels + 1
    }

    /// Block means over a `pool × pool` grid, plus a trailing bias term.
    fn features(&self, im: &RealRaster) -> Result<Vec<f64>> {
        let (h, w, ch, p) = (im.height(), im.width(), im.channels(), self.pool);
        if ch != self.channels || h < p || w < p {
            return Err(Error::Backend(format!(
                "{}: input {h}×{w}×{ch} is too small or has the wrong channel count",
                Self::ID
            )));
        }
        let mut out = vec![0.0; self.n_features()];
        for by in 0..p {
            let (y0, y1) = (by * h / p, (by + 1) * h / p);
            for bx in 0..p {
                let (x0, x1) = (bx * w / p, (bx + 1) * w / p);
                let count = ((y1 - y0) * (x1 - x0)) as f64;
                for c in 0..ch {
                    let mut s = 0.0;
                    for y in y0..y1 {
                        for x in x0..x1 {
                            s += im.get(y, x, c);
                        }
                    }
                    out[(by * p + bx) * ch + c] = s / count;
                }
            }
        }
        *out.last_mut().expect("bias") = 1.0;
        Ok(out)
    }

    fn scores(&self, x: &[f64]) -> Vec<f64> {
        let f = x.len();
        (0..self.classes)
            .map(|k| self.weights[k * f..(k + 1) * f].iter().zip(x).map(|(w, v)| w * v).sum())
            .collect()
    }
}

impl ClassifierBackend for LogisticProbe {
    fn id(&self) -> &str {
        Self::ID
    }

    fn init(&mut self, num_classes: usize, _seed: u64) -> Result<()> {
        if num_classes < 2 {
            return Err(Error::arg("need at least two classes"));
        }
        self.classes = num_classes;
        let n = num_classes * self.n_features();
        (self.weights, self.m, self.v, self.t) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], 0);
        Ok(())
    }

    fn logits(&self, inputs: &[RealRaster]) -> Result<Vec<Vec<f64>>> {
        if self.classes == 0 {
            return Err(Error::State("classifier is not initialized".into()));
        }
        inputs.iter().map(|im| Ok(self.scores(&self.features(im)?))).collect()
    }

    fn train_batch(&mut self, inputs: &[RealRaster], labels: &[usize], learning_rate: f64) -> Result<f64> {
        if inputs.len() != labels.len() || inputs.is_empty() {
            return Err(Error::arg("batch inputs and labels differ in length or are empty"));
        }
        if self.classes == 0 {
            return Err(Error::State("classifier is not initialized".into()));
        }
        let f = self.n_features();
        let mut grad = vec![0.0; self.weights.len()];
        let mut loss = 0.0;
        let scale = 1.0 / inputs.len() as f64;
        for (im, &label) in inputs.iter().zip(labels) {
            if label >= self.classes {
                return Err(Error::arg(format!("label {label} outside {} classes", self.classes)));
            }
            let x = self.features(im)?;
            let z = self.scores(&x);
            loss += cross_entropy(&z, label);
            let max = z[argmax(&z)];
            let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
            let total: f64 = e.iter().sum();
            for k in 0..self.classes {
                let d = (e[k] / total - if k == label { 1.0 } else { 0.0 }) * scale;
                for (g, xi) in grad[k * f..(k + 1) * f].iter_mut().zip(&x) {
                    *g += d * xi;
                }
            }
        }
        self.t += 1;
        let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
        let (c1, c2) = (1.0 - b1.powi(self.t as i32), 1.0 - b2.powi(self.t as i32));
        for i in 0..self.weights.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * grad[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * grad[i] * grad[i];
            self.weights[i] -= learning_rate * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + eps);
        }
        Ok(loss * scale)
    }

    fn snapshot(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(self)?)
    }

    fn restore(&mut self, state: &serde_json::Value) -> Result<()> {
        *self = serde_json::from_value(state.clone())?;
        Ok(())
    }
}

/// Losses and accuracies after one epoch, both on eval-transformed data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub epoch_log: Vec<EpochRecord>,
    pub best_epoch: u32,
    /// Backend snapshot of the best epoch; the backend is left restored to it.
    pub model: serde_json::Value,
}

fn accuracy(items: &[LabeledImage], preds: &[usize]) -> f64 {
    let hits = items.iter().zip(preds).filter(|(it, p)| it.label == **p).count();
    hits as f64 / items.len().max(1) as f64
}

/// Train for `config.epochs`, keeping the epoch with the best validation
/// accuracy (train accuracy when there is no validation split; earliest
/// epoch on ties). `on_epoch` sees each record as soon as it exists.
pub fn train_classifier(
    config: &ClassifyConfig,
    data: &SynthSplits,
    stats: &ChannelStats,
    backend: &mut dyn ClassifierBackend,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(Error::arg("training set is empty"));
    }
    let num_classes = LULC_CLASSES.len();
    let all = data.train.iter().chain(&data.val).chain(&data.test);
    if let Some(bad) = all.clone().find(|it| it.label >= num_classes) {
        return Err(Error::arg(format!("label {} outside {num_classes} classes", bad.label)));
    }
    let min_side = all.map(|it| it.image.height().min(it.image.width())).min().unwrap_or(0);
    if config.crop_side > min_side {
        return Err(Error::validation(
            "crop_side",
            format!("{} exceeds the smallest image side {min_side}", config.crop_side),
        ));
    }
    let train_tf = build_transforms(stats, config.crop_side, config.augment)?;
    let eval_tf = build_transforms(stats, config.crop_side, false)?;
    backend.init(num_classes, config.seed)?;

    let mut log: Vec<EpochRecord> = Vec::new();
    let mut best: Option<(f64, u32, serde_json::Value)> = None;
    for epoch in 1..=config.epochs {
        let job_err = |e: Error| Error::Job { last_step: u64::from(epoch - 1), source: Box::new(e) };
        let tag = epoch.to_string();
        let mut order: Vec<usize> = (0..data.train.len()).collect();
        order.shuffle(&mut seed::derived_rng(config.seed, &["classify", "order", &tag]));
        let mut aug = seed::derived_rng(config.seed, &["classify", "augment", &tag]);
        for batch in order.chunks(config.batch_size) {
            let inputs = batch
                .iter()
                .map(|&i| train_tf.apply(&data.train[i].image, &mut aug))
                .collect::<Result<Vec<_>>>()?;
            let labels: Vec<usize> = batch.iter().map(|&i| data.train[i].label).collect();
            let loss = backend.train_batch(&inputs, &labels, config.learning_rate).map_err(job_err)?;
            if !loss.is_finite() {
                return Err(job_err(Error::Numerical(format!("training loss became {loss}"))));
            }
        }
        let (train_loss, train_preds) = score(backend, &data.train, &eval_tf).map_err(job_err)?;
        let (val_loss, val_accuracy) = if data.val.is_empty() {
            (None, None)
        } else {
            let (l, p) = score(backend, &data.val, &eval_tf).map_err(job_err)?;
            (Some(l), Some(accuracy(&data.val, &p)))
        };
        let record = EpochRecord {
            epoch,
            train_loss,
            train_accuracy: accuracy(&data.train, &train_preds),
            val_loss,
            val_accuracy,
        };
        let key = record.val_accuracy.unwrap_or(record.train_accuracy);
        if best.as_ref().is_none_or(|(b, _, _)| key > *b) {
            best = Some((key, epoch, backend.snapshot().map_err(job_err)?));
        }
        on_epoch(&record);
        log.push(record);
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    backend.restore(&model)?;
    Ok(TrainOutcome { epoch_log: log, best_epoch, model })
}
