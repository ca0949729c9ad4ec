use serde::{Deserialize, Serialize};

use super::{ClassifierBackend, LabeledImage, TransformPipeline};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub support: u64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub iou: f64,
}

/// Test-set metric suite. Confusion rows are true labels, columns predicted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub test_loss: f64,
    /// Mean per-class recall.
    pub average_accuracy: f64,
    /// trace(confusion) / N.
    pub overall_accuracy: f64,
    pub macro_f1: f64,
    /// Mean per-class intersection over union.
    pub jaccard: f64,
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricsReport {
    /// Every class of the matrix counts in the macro means; a ratio with a
    /// zero denominator is 0.
    pub fn from_confusion(confusion: Vec<Vec<u64>>, test_loss: f64) -> Result<Self> {
        let k = confusion.len();
        if k == 0 || confusion.iter().any(|row| row.len() != k) {
            return Err(Error::arg("confusion matrix must be square and non-empty"));
        }
        let n: u64 = confusion.iter().flatten().sum();
        if n == 0 {
            return Err(Error::arg("confusion matrix is empty"));
        }
        if !(test_loss >= 0.0) {
            return Err(Error::arg(format!("test loss {test_loss} is not a non-negative number")));
        }
        let per_class: Vec<ClassMetrics> = (0..k)
            .map(|c| {
                let tp = confusion[c][c];
                let support: u64 = confusion[c].iter().sum();
                let predicted: u64 = confusion.iter().map(|row| row[c]).sum();
                let (fn_, fp) = (support - tp, predicted - tp);
                ClassMetrics {
                    support,
                    recall: ratio(tp, support),
                    precision: ratio(tp, predicted),
                    f1: ratio(2 * tp, 2 * tp + fp + fn_),
                    iou: ratio(tp, tp + fp + fn_),
                }
            })
            .collect();
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
        let trace: u64 = (0..k).map(|c| confusion[c][c]).sum();
        Ok(Self {
            test_loss,
            average_accuracy: mean(|m| m.recall),
            overall_accuracy: ratio(trace, n),
            macro_f1: mean(|m| m.f1),
            jaccard: mean(|m| m.iou),
            confusion,
            per_class,
        })
    }
}

/// Stable `−log softmax(logits)[label]`.
pub(crate) fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

pub(crate) fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in logits.iter().enumerate() {
        if *v > logits[best] {
            best = i;
        }
    }
    best
}

/// Mean loss, predictions and logits of `items` under the eval transform.
pub(crate) fn score(
    backend: &dyn ClassifierBackend,
    items: &[LabeledImage],
    transforms: &TransformPipeline,
) -> Result<(f64, Vec<usize>)> {
    let mut rng = seed::rng(0);
    let mut loss = 0.0;
    let mut preds = Vec::with_capacity(items.len());
    for chunk in items.chunks(64) {
        let inputs = chunk
            .iter()
            .map(|it| transforms.apply(&it.image, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let logits = backend.logits(&inputs)?;
        if logits.len() != chunk.len() {
            return Err(Error::Backend(format!(
                "backend returned {} logit rows for {} inputs",
                logits.len(),
                chunk.len()
            )));
        }
        for (it, row) in chunk.iter().zip(&logits) {
            if it.label >= row.len() {
                return Err(Error::arg(format!("label {} outside {} classes", it.label, row.len())));
            }
            loss += cross_entropy(row, it.label);
            preds.push(argmax(row));
        }
    }
    Ok((loss / items.len().max(1) as f64, preds))
}

/// Score a trained classifier on the test set with the eval transform.
pub fn evaluate_classifier(
    backend: &dyn ClassifierBackend,
    test: &[LabeledImage],
    transforms: &TransformPipeline,
    num_classes: usize,
) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::arg("test set is empty"));
    }
    if transforms.is_train() {
        return Err(Error::arg("evaluation needs the eval transform pipeline"));
    }
    let (loss, preds) = score(backend, test, transforms)?;
    let mut confusion = vec![vec![0u64; num_classes]; num_classes];
    for (it, &p) in test.iter().zip(&preds) {
        if it.label >= num_classes || p >= num_classes {
            return Err(Error::arg(format!("label outside the {num_classes} classes")));
        }
        confusion[it.label][p] += 1;
    }
    MetricsReport::from_confusion(confusion, loss)
}
