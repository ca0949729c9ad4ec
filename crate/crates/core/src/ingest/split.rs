use rand::seq::index;

use super::{RecordSet, SplitTag};
use crate::error::{Error, Result};
use crate::seed;

/// Reserve `holdout_n` records chosen uniformly at random (no
/// stratification). Both parts keep the input order.
pub fn split_holdout(rs: &RecordSet, holdout_n: usize, seed: u64) -> Result<(RecordSet, RecordSet)> {
    if rs.split_tag() != SplitTag::Unsplit {
        return Err(Error::arg("record set is already split"));
    }
    if holdout_n > rs.len() {
        return Err(Error::arg(format!(
            "holdout of {holdout_n} requested from {} records",
            rs.len()
        )));
    }
    let mut rng = seed::derived_rng(seed, &["ingest", "holdout"]);
    let mut is_holdout = vec![false; rs.len()];
    for i in index::sample(&mut rng, rs.len(), holdout_n) {
        is_holdout[i] = true;
    }
    let (mut train, mut holdout) = (Vec::new(), Vec::new());
    for (record, held) in rs.records().iter().zip(is_holdout) {
        if held {
            holdout.push(record.clone());
        } else {
            train.push(record.clone());
        }
    }
    Ok((
        RecordSet::new(train, SplitTag::Train)?,
        RecordSet::new(holdout, SplitTag::Holdout)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::fixtures;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn zero_holdout_keeps_everything() {
        let rs = fixtures::record_set(5);
        let (train, holdout) = split_holdout(&rs, 0, 1).unwrap();
        assert!(holdout.is_empty());
        assert_eq!(train.records(), rs.records());
    }

    #[test]
    fn oversized_holdout_is_rejected() {
        let rs = fixtures::record_set(3);
        assert!(matches!(split_holdout(&rs, 4, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn split_sets_cannot_be_resplit() {
        let (train, _) = split_holdout(&fixtures::record_set(3), 1, 0).unwrap();
        assert!(split_holdout(&train, 1, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn partition_is_exact_and_deterministic(n in 0usize..24, frac in 0.0f64..=1.0, seed in any::<u64>()) {
            let rs = fixtures::record_set(n);
            let k = ((n as f64) * frac).floor() as usize;
            let (train, holdout) = split_holdout(&rs, k, seed).unwrap();
            prop_assert_eq!(holdout.len(), k);
            prop_assert_eq!(train.len() + holdout.len(), n);
            let a: HashSet<_> = train.iter().map(|r| r.source_id.clone()).collect();
            let b: HashSet<_> = holdout.iter().map(|r| r.source_id.clone()).collect();
            prop_assert!(a.is_disjoint(&b));
            prop_assert_eq!(a.len() + b.len(), n);
            let (train2, holdout2) = split_holdout(&rs, k, seed).unwrap();
            prop_assert_eq!(train, train2);
            prop_assert_eq!(holdout, holdout2);
        }
    }
}
