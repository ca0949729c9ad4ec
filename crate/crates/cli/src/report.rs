//! Static review report: metric tables and a per-class sample grid.

use std::fmt::Write as _;
use std::path::Path;

use base64::Engine;
use serde_json::{json, Value};
use synthgen_core::classes::LULC_CLASSES;
use synthgen_core::fsutil::{read_json, write_bytes_atomic, write_json_pretty};
use synthgen_core::genfarm::read_synth_dataset;
use synthgen_core::ingest::resize_to;

use crate::failure::{CmdResult, Failure};
use crate::stages::{FID_FILE, METRICS_FILE, PREPARE_FILE, SYNTH_FILE};
use crate::workspace::Workspace;

const THUMBS_PER_CLASS: usize = 4;
const THUMB_SIDE: usize = 96;

fn optional_json(path: &Path) -> CmdResult<Option<Value>> {
    if path.exists() {
        Ok(Some(read_json(path)?))
    } else {
        Ok(None)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn num(v: &Value) -> String {
    v.as_f64().map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}

pub fn report(ws: &Workspace) -> CmdResult {
    if ws.provenance()?.is_empty() {
        return Err(Failure::missing("provenance.jsonl (run a pipeline stage first)"));
    }
    let artifacts = ws.verify_outputs()?;
    let fid = optional_json(&ws.path(FID_FILE))?;
    let metrics = optional_json(&ws.path(METRICS_FILE))?;
    let prepare = optional_json(&ws.path(PREPARE_FILE))?;

    let mut grid: Vec<(String, Vec<(String, String)>)> = Vec::new();
    let mut counts = serde_json::Map::new();
    let synth_path = ws.path(SYNTH_FILE);
    if synth_path.exists() {
        let records = read_synth_dataset(&synth_path)?;
        for class in LULC_CLASSES {
            let of_class: Vec<_> = records.iter().filter(|r| r.class_name == class).collect();
            counts.insert(class.to_string(), json!(of_class.len()));
            let mut thumbs = Vec::new();
            for r in of_class.iter().take(THUMBS_PER_CLASS) {
                let side = THUMB_SIDE.min(r.image.width().min(r.image.height()));
                let png = resize_to(&r.image, side)?.encode_png()?;
                let b64 = base64::engine::general_purpose::STANDARD.encode(png);
                thumbs.push((b64, r.prompt.clone()));
            }
            grid.push((class.to_string(), thumbs));
        }
    }

    let summary = json!({
        "fid": fid,
        "downstream": metrics,
        "prepare": prepare,
        "class_counts": counts,
        "artifacts": artifacts,
    });
    write_json_pretty(&ws.path("report.json"), &summary)?;

    let mut html = String::new();
    html.push_str("<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>Synthetic dataset report</title>\n");
    html.push_str("<style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse}td,th{border:1px solid #999;padding:4px 8px}img{margin:2px}</style>\n");
    html.push_str("</head><body>\n<h1>Synthetic dataset report</h1>\n");

    if let Some(f) = &fid {
        let _ = write!(
            html,
            "<h2>FID</h2>\n<table><tr><th>mean</th><th>per run</th><th>extractor</th><th>n real</th><th>n generated</th></tr>\
             <tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr></table>\n",
            num(&f["mean_fid"]),
            f["per_run"].as_array().map(|v| v.iter().map(num).collect::<Vec<_>>().join(", ")).unwrap_or_default(),
            escape(f["extractor_id"].as_str().unwrap_or("")),
            f["n_real"],
            f["n_gen"],
        );
    }
    if let Some(m) = &metrics {
        let r = &m["metrics"];
        html.push_str("<h2>Downstream classification (test set)</h2>\n<table><tr><th>loss</th><th>average accuracy</th><th>overall accuracy</th><th>macro F1</th><th>Jaccard</th></tr>");
        let _ = writeln!(
            html,
            "<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr></table>",
            num(&r["test_loss"]),
            num(&r["average_accuracy"]),
            num(&r["overall_accuracy"]),
            num(&r["macro_f1"]),
            num(&r["jaccard"]),
        );
        if let Some(rows) = r["confusion"].as_array() {
            html.push_str("<h3>Confusion (rows: true, columns: predicted)</h3>\n<table><tr><th></th>");
            for c in LULC_CLASSES {
                let _ = write!(html, "<th>{}</th>", escape(c));
            }
            html.push_str("</tr>\n");
            for (i, row) in rows.iter().enumerate() {
                let _ = write!(html, "<tr><th>{}</th>", escape(LULC_CLASSES.get(i).copied().unwrap_or("?")));
                for v in row.as_array().into_iter().flatten() {
                    let _ = write!(html, "<td>{v}</td>");
                }
                html.push_str("</tr>\n");
            }
            html.push_str("</table>\n");
        }
    }
    if !grid.is_empty() {
        html.push_str("<h2>Samples per class</h2>\n<table>\n");
        for (class, thumbs) in &grid {
            let _ = write!(html, "<tr><th>{} ({})</th><td>", escape(class), counts[class]);
            for (b64, prompt) in thumbs {
                let _ = write!(html, "<img src=\"data:image/png;base64,{b64}\" title=\"{}\">", escape(prompt));
            }
            html.push_str("</td></tr>\n");
        }
        html.push_str("</table>\n");
    }
    html.push_str("<h2>Artifacts</h2>\n<table><tr><th>path</th><th>sha256</th></tr>\n");
    for (path, sha) in summary["artifacts"].as_object().into_iter().flatten() {
        let _ = writeln!(html, "<tr><td>{}</td><td><code>{}</code></td></tr>", escape(path), sha.as_str().unwrap_or(""));
    }
    html.push_str("</table>\n</body></html>\n");
    write_bytes_atomic(&ws.path("report.html"), html.as_bytes())?;
    log::info!("wrote {}", ws.path("report.html").display());
    Ok(())
}
