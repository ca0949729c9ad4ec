use std::collections::BTreeMap;

use synthgen_core::benchdown::{load_synth, train_classifier, ClassifyConfig, LogisticProbe};
use synthgen_core::classes::LULC_CLASSES;
use synthgen_core::genfarm::{plan_generation, run_generation, write_synth_dataset};
use synthgen_core::ingest::{
    export_layout, ingest_columnar, split_holdout, stats_of_rasters, write_columnar, CaptionPolicy, ColumnSpec,
    ImageCaptionRecord,
};
use synthgen_core::promptforge::{build_prompt_bank, ClassCatalog};
use synthgen_core::trainctl::{run_finetune, select_best_checkpoint, FinetuneConfig, ReferenceDiffusion};
use synthgen_core::Raster;

#[test]
fn columnar_to_layout_to_finetune() {
    let dir = tempfile::tempdir().unwrap();
    let records: Vec<ImageCaptionRecord> = (0..14)
        .map(|i| ImageCaptionRecord {
            image: Raster::from_fn(10, 10, 3, |y, x, c| (i * 11 + y * 4 + x * 2 + c * 60) as u8),
            captions: vec![format!("scene {i}")],
            class_name: Some(LULC_CLASSES[i % 7].to_string()),
            source_id: format!("s{i}"),
        })
        .collect();
    let path = dir.path().join("in.parquet");
    write_columnar(&records, &path, &ColumnSpec::default()).unwrap();
    let rs = ingest_columnar(&path, &ColumnSpec::default()).unwrap();
    assert_eq!(rs.records(), &records[..]);

    let (train, holdout) = split_holdout(&rs, 4, 1).unwrap();
    assert_eq!((train.len(), holdout.len()), (10, 4));
    let layout = export_layout(&train, &dir.path().join("layout"), CaptionPolicy::First).unwrap();
    let config = FinetuneConfig {
        epochs: 2,
        batch_size: 2,
        grad_accum_steps: 1,
        checkpoint_interval_steps: 5,
        ..Default::default()
    };
    let out = run_finetune(&config, &layout, &mut ReferenceDiffusion::new(4, 4), &dir.path().join("job")).unwrap();
    assert_eq!(out.ledger.last_step(), 10);
    let (step, _) = select_best_checkpoint(&out.ledger, 1).unwrap();
    assert!(step == 5 || step == 10);
}

#[test]
fn prompts_to_synthetic_dataset_to_classifier() {
    let dir = tempfile::tempdir().unwrap();
    let mut bank = build_prompt_bank(&ClassCatalog::default(), 2, None, 0, "aerial", 3).unwrap();
    for p in &mut bank {
        (p.width, p.height) = (20, 20);
    }
    let counts: BTreeMap<String, usize> = LULC_CLASSES.iter().map(|c| (c.to_string(), 6)).collect();
    let plan = plan_generation(&counts, &bank, 3).unwrap();
    let synth = run_generation(&plan, &ReferenceDiffusion::default(), &dir.path().join("gen/manifest.jsonl")).unwrap();
    assert_eq!(synth.len(), 42);
    let path = dir.path().join("synth.parquet");
    write_synth_dataset(&synth, &path).unwrap();

    let splits = load_synth(&path, [4.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0], 0).unwrap();
    assert_eq!((splits.train.len(), splits.val.len(), splits.test.len()), (28, 7, 7));
    let stats = stats_of_rasters(&splits.train.iter().map(|i| &i.image).collect::<Vec<_>>()).unwrap();
    let config = ClassifyConfig { crop_side: 16, epochs: 3, ..Default::default() };
    let out = train_classifier(&config, &splits, &stats, &mut LogisticProbe::new(), &mut |_| {}).unwrap();
    assert_eq!(out.epoch_log.len(), 3);
    assert!((1..=3).contains(&out.best_epoch));
}
