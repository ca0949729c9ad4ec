use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use synthgen_core::ingest::{write_columnar, ColumnSpec, ImageCaptionRecord};
use synthgen_core::Raster;

fn rs_synthgen(ws: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rs-synthgen"))
        .arg("--workspace")
        .arg(ws)
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn tiny_parquet(path: &Path, n: usize) {
    let records: Vec<ImageCaptionRecord> = (0..n)
        .map(|i| ImageCaptionRecord {
            image: Raster::from_fn(12, 12, 3, |y, x, c| (i * 9 + y * 5 + x * 3 + c * 40) as u8),
            captions: vec![format!("tile {i}"), format!("another view {i}")],
            class_name: None,
            source_id: format!("tile-{i}"),
        })
        .collect();
    write_columnar(&records, path, &ColumnSpec::default()).unwrap();
}

#[test]
fn missing_input_exits_3_and_names_producer() {
    let dir = tempfile::tempdir().unwrap();
    let out = rs_synthgen(dir.path(), &["stats"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("prepare"));
}

#[test]
fn report_without_history_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rs_synthgen(dir.path(), &["report"]).status.code(), Some(3));
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[fid]\nsample_sise = 10\n").unwrap();
    let out = rs_synthgen(dir.path(), &["--config", cfg.to_str().unwrap(), "stats"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let out = rs_synthgen(dir.path(), &["generate", "--counts", "Marsh Land=3"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rs_synthgen(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn report_refuses_tampered_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    let input = dir.path().join("tiles.parquet");
    tiny_parquet(&input, 12);
    let out = rs_synthgen(&ws, &["prepare", "--in", input.to_str().unwrap(), "--holdout", "4", "--side", "8"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = rs_synthgen(&ws, &["stats"]);
    assert!(out.status.success(), "{}", stderr(&out));

    let out = rs_synthgen(&ws, &["report"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(ws.join("report.html").exists());

    let stats = ws.join("stats.json");
    let mut text = fs::read_to_string(&stats).unwrap();
    text.push(' ');
    fs::write(&stats, text).unwrap();
    let out = rs_synthgen(&ws, &["report"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("checksum mismatch"), "{}", stderr(&out));
}

#[test]
fn prepare_records_provenance_and_layout() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    let input = dir.path().join("tiles.parquet");
    tiny_parquet(&input, 10);
    let out = rs_synthgen(&ws, &["prepare", "--in", input.to_str().unwrap(), "--holdout", "2", "--side", "8"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let meta = fs::read_to_string(ws.join("layout/metadata.jsonl")).unwrap();
    assert_eq!(meta.lines().count(), 8 * 8);
    let prov = fs::read_to_string(ws.join("provenance.jsonl")).unwrap();
    let rec: serde_json::Value = serde_json::from_str(prov.lines().next().unwrap()).unwrap();
    assert_eq!(rec["command"], "prepare");
    assert!(rec["outputs"].as_object().unwrap().contains_key("holdout.parquet"));
    assert!(!ws.join(".lock").exists());
}
