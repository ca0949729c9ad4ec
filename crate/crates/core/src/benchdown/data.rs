use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::genfarm::{read_synth_dataset, SynthRecord};
use crate::raster::Raster;
use crate::seed;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImage {
    pub image: Raster,
    pub label: usize,
}

#[derive(Clone, Debug, Default)]
pub struct SynthSplits {
    pub train: Vec<LabeledImage>,
    pub val: Vec<LabeledImage>,
    pub test: Vec<LabeledImage>,
}

pub fn labeled_from_records(records: Vec<SynthRecord>) -> Vec<LabeledImage> {
    records
        .into_iter()
        .map(|r| LabeledImage { image: r.image, label: r.label_index })
        .collect()
}

/// Largest-remainder allocation of `total` across classes in proportion
/// to `weights`, capped by `caps`.
fn apportion(weights: &[f64], total: usize, caps: &[usize]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum == 0.0 || total == 0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut out: Vec<usize> = quotas.iter().zip(caps).map(|(q, &c)| (q.floor() as usize).min(c)).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // Largest fractional part first; ties go to the lower class index.
    order.sort_by(|&a, &b| {
        let (fa, fb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut left = total.saturating_sub(out.iter().sum());
    while left > 0 {
        let before = left;
        for &i in &order {
            if left > 0 && out[i] < caps[i] {
                out[i] += 1;
                left -= 1;
            }
        }
        if left == before {
            break;
        }
    }
    out
}

/// Split by class so each part keeps the class proportions. Overall val
/// and test sizes are `round(N·fraction)`, distributed across classes by
/// largest remainder; train takes the rest.
pub fn split_stratified(items: Vec<LabeledImage>, fractions: [f64; 3], seed: u64) -> Result<SynthSplits> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::arg(format!("split fractions {fractions:?} must lie in [0, 1] and sum to 1")));
    }
    let mut by_class: BTreeMap<usize, Vec<LabeledImage>> = BTreeMap::new();
    for item in items {
        by_class.entry(item.label).or_default().push(item);
    }
    let non_zero = fractions.iter().filter(|&&f| f > 0.0).count();
    if non_zero > 1 {
        if let Some((label, v)) = by_class.iter().find(|(_, v)| v.len() < 3) {
            return Err(Error::Split(format!("class {label} has only {} items", v.len())));
        }
    }
    let n: usize = by_class.values().map(Vec::len).sum();
    let sizes: Vec<usize> = by_class.values().map(Vec::len).collect();
    let weights: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let val = apportion(&weights, (n as f64 * fractions[1]).round() as usize, &sizes);
    let caps: Vec<usize> = sizes.iter().zip(&val).map(|(s, v)| s - v).collect();
    let test = apportion(&weights, (n as f64 * fractions[2]).round() as usize, &caps);

    let mut out = SynthSplits::default();
    for (k, (label, mut members)) in by_class.into_iter().enumerate() {
        let mut rng = seed::derived_rng(seed, &["stratified-split", &label.to_string()]);
        members.shuffle(&mut rng);
        let mut it = members.into_iter();
        out.val.extend(it.by_ref().take(val[k]));
        out.test.extend(it.by_ref().take(test[k]));
        out.train.extend(it);
    }
    Ok(out)
}

/// Read a synthetic dataset file and split it by class.
pub fn load_synth(path: &Path, fractions: [f64; 3], seed: u64) -> Result<SynthSplits> {
    split_stratified(labeled_from_records(read_synth_dataset(path)?), fractions, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::REFERENCE_COUNTS;

    fn items(counts: &[usize]) -> Vec<LabeledImage> {
        let mut out = Vec::new();
        for (label, &n) in counts.iter().enumerate() {
            for i in 0..n {
                out.push(LabeledImage { image: Raster::filled(1, 1, 3, i as u8), label });
            }
        }
        out
    }

    fn reference() -> Vec<LabeledImage> {
        items(&REFERENCE_COUNTS.map(|(_, n)| n))
    }

    #[test]
    fn reference_counts_split_272_58_58() {
        let s = split_stratified(reference(), [0.7, 0.15, 0.15], 0).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (272, 58, 58));
        for (label, (_, n)) in REFERENCE_COUNTS.iter().enumerate() {
            let v = s.val.iter().filter(|i| i.label == label).count() as f64;
            // Stratified: each class within one item of its exact share.
            assert!((v - *n as f64 * 58.0 / 388.0).abs() < 1.0);
        }
    }

    #[test]
    fn degenerate_and_deterministic() {
        let s = split_stratified(reference(), [1.0, 0.0, 0.0], 0).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (388, 0, 0));
        let a = split_stratified(reference(), [0.7, 0.15, 0.15], 5).unwrap();
        let b = split_stratified(reference(), [0.7, 0.15, 0.15], 5).unwrap();
        assert_eq!(a.test, b.test);
        assert_eq!(a.train, b.train);
    }

    #[test]
    fn tiny_class_and_bad_fractions() {
        assert!(matches!(
            split_stratified(items(&[5, 2]), [0.6, 0.2, 0.2], 0),
            Err(Error::Split(_))
        ));
        assert!(split_stratified(items(&[5]), [0.5, 0.2, 0.2], 0).is_err());
    }
}
