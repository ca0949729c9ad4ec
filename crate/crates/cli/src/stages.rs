//! One function per subcommand. Each reads its inputs from the workspace
//! (or explicit paths), writes its artifacts atomically and appends a
//! provenance record.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::json;
use synthgen_core::benchdown::{
    build_transforms, evaluate_classifier, load_synth, train_classifier, ClassifyConfig, LogisticProbe,
};
use synthgen_core::classes::{self, LULC_CLASSES};
use synthgen_core::fidlab::{sampled_fid, FeatureExtractor, ReferenceExtractor};
use synthgen_core::fsutil::{write_bytes_atomic, write_json_pretty};
use synthgen_core::genfarm::{plan_generation, read_synth_dataset, run_generation, write_synth_dataset, GEN_MANIFEST_FILE};
use synthgen_core::ingest::{
    export_layout, expand_dihedral, ingest_columnar, read_layout, resize_to, split_holdout, stats_of_rasters,
    write_columnar, CaptionPolicy, ColumnSpec, LayoutManifest, MANIFEST_FILE,
};
use synthgen_core::promptforge::{
    build_corpus, build_prompt_bank, build_qlora_spec, chunk_corpus, index_corpus, read_corpus_file,
    read_prompt_bank, split_corpus, write_corpus_file, write_prompt_bank, ClassCatalog, Embedder,
    HashedBowEmbedder, VectorIndex, TEMPLATES,
};
use synthgen_core::trainctl::{build_finetune_config, run_finetune, select_best_checkpoint, ReferenceDiffusion};
use synthgen_core::Raster;

use crate::config::{table_to_strings, PipelineConfig};
use crate::failure::{CmdResult, Failure};
use crate::workspace::Workspace;
use crate::{CorpusArgs, DownstreamArgs, FidArgs, FinetuneArgs, GenerateArgs, IndexArgs, PrepareArgs, PromptsArgs};

pub const LAYOUT_DIR: &str = "layout";
pub const HOLDOUT_FILE: &str = "holdout.parquet";
pub const PREPARE_FILE: &str = "prepare.json";
pub const STATS_FILE: &str = "stats.json";
pub const FINETUNE_DIR: &str = "finetune";
pub const CORPUS_TRAIN: &str = "corpus/train.parquet";
pub const CORPUS_TEST: &str = "corpus/test.parquet";
pub const QLORA_FILE: &str = "corpus/qlora_job.json";
pub const INDEX_FILE: &str = "index.jsonl";
pub const PROMPTS_FILE: &str = "prompts.jsonl";
pub const GEN_DIR: &str = "gen";
pub const PLAN_FILE: &str = "gen/plan.json";
pub const SYNTH_FILE: &str = "synth.parquet";
pub const FID_FILE: &str = "fid.json";
pub const METRICS_FILE: &str = "downstream/metrics.json";
pub const EPOCHS_FILE: &str = "downstream/epochs.csv";
pub const MODEL_FILE: &str = "downstream/model.json";

fn require_input(path: &Path) -> CmdResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::missing(path.display().to_string()))
    }
}

pub fn prepare(ws: &Workspace, config: &PipelineConfig, a: PrepareArgs) -> CmdResult {
    require_input(&a.input)?;
    let mut s = config.ingest.clone();
    s.holdout = a.holdout.unwrap_or(s.holdout);
    s.side = a.side.unwrap_or(s.side);
    s.augment &= !a.no_augment;
    if let Some(p) = a.caption_policy {
        s.caption_policy = p;
    }
    let policy = match s.caption_policy.as_str() {
        "first" => CaptionPolicy::First,
        "random" => CaptionPolicy::Random(config.seed),
        other => return Err(Failure::config(format!("caption_policy: unknown policy `{other}`"))),
    };
    if s.side == 0 {
        return Err(Failure::config("side: must be positive"));
    }
    let columns = ColumnSpec {
        image: s.image_column.clone(),
        captions: s.captions_column.clone(),
        source_id: s.id_column.clone(),
        class_name: s.class_column.clone(),
    };
    let rs = ingest_columnar(&a.input, &columns)?;
    let (train, holdout) = split_holdout(&rs, s.holdout, config.seed)?;
    let resized = train.map_images(|im| resize_to(im, s.side))?;
    let layout_set = if s.augment { expand_dihedral(&resized)? } else { resized };

    let layout_dir = ws.path(LAYOUT_DIR);
    if layout_dir.join(MANIFEST_FILE).exists() {
        fs::remove_dir_all(&layout_dir).with_context(|| format!("clearing {}", layout_dir.display()))?;
    }
    let manifest = export_layout(&layout_set, &layout_dir, policy)?;
    let holdout_path = ws.path(HOLDOUT_FILE);
    write_columnar(holdout.records(), &holdout_path, &columns)?;
    let summary = json!({
        "input": a.input,
        "n_input": rs.len(),
        "n_train": train.len(),
        "n_holdout": holdout.len(),
        "n_layout": layout_set.len(),
        "side": s.side,
        "augment": s.augment,
        "caption_policy": s.caption_policy,
        "layout_checksum": manifest.checksum,
    });
    let prepare_path = ws.path(PREPARE_FILE);
    write_json_pretty(&prepare_path, &summary)?;
    log::info!("layout: {} images, holdout: {}", layout_set.len(), holdout.len());
    ws.record(
        "prepare",
        &(&s, config.seed),
        &[a.input.clone()],
        &[layout_dir.join(MANIFEST_FILE), holdout_path, prepare_path],
    )
}

pub fn stats(ws: &Workspace, config: &PipelineConfig) -> CmdResult {
    let manifest_path = ws.require(&format!("{LAYOUT_DIR}/{MANIFEST_FILE}"), "prepare")?;
    let (_, pairs) = read_layout(&ws.path(LAYOUT_DIR))?;
    let images: Vec<&Raster> = pairs.iter().map(|(_, im)| im).collect();
    let stats = stats_of_rasters(&images)?;
    let out = ws.path(STATS_FILE);
    write_json_pretty(&out, &json!({ "n_images": images.len(), "mean": stats.mean, "std": stats.std }))?;
    ws.record("stats", &config.seed, &[manifest_path], &[out])
}

pub fn finetune(ws: &Workspace, config: &PipelineConfig, a: FinetuneArgs) -> CmdResult {
    ws.require(&format!("{LAYOUT_DIR}/{MANIFEST_FILE}"), "prepare")?;
    let mut overrides = table_to_strings(&config.finetune)?;
    overrides.entry("seed".into()).or_insert_with(|| config.seed.to_string());
    let flags = [
        ("epochs", a.epochs.map(|v| v.to_string())),
        ("learning_rate", a.learning_rate.map(|v| v.to_string())),
        ("batch_size", a.batch_size.map(|v| v.to_string())),
        ("checkpoint_interval_steps", a.checkpoint_interval_steps.map(|v| v.to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            overrides.insert(k.into(), v);
        }
    }
    let ft = build_finetune_config(&overrides)?;
    if a.smooth_window == 0 {
        return Err(Failure::config("smooth-window: must be at least 1"));
    }
    let layout = LayoutManifest::load(&ws.path(LAYOUT_DIR))?;
    layout.verify()?;
    let job_dir = ws.path(FINETUNE_DIR);
    let mut backend = ReferenceDiffusion::default();
    let outcome = run_finetune(&ft, &layout, &mut backend, &job_dir)?;
    let best = select_best_checkpoint(&outcome.ledger, a.smooth_window).ok();
    let last = outcome.ledger.entries().last();
    let summary = json!({
        "config": ft,
        "steps": outcome.ledger.last_step(),
        "final_loss": last.map(|e| e.loss),
        "final_checkpoint": outcome.final_checkpoint,
        "best_step": best.as_ref().map(|b| b.0),
        "best_checkpoint": best.as_ref().map(|b| job_dir.join(&b.1)),
        "smooth_window": a.smooth_window,
    });
    if best.is_none() {
        log::warn!("no interval checkpoint was written; only the final weights exist");
    }
    let summary_path = job_dir.join("best.json");
    write_json_pretty(&summary_path, &summary)?;
    let ledger_path = job_dir.join(synthgen_core::trainctl::LEDGER_FILE);
    ws.record(
        "finetune",
        &ft,
        &[ws.path(&format!("{LAYOUT_DIR}/{MANIFEST_FILE}"))],
        &[ledger_path, summary_path],
    )
}

fn collect_documents(inputs: &[PathBuf]) -> CmdResult<Vec<String>> {
    let mut docs = Vec::new();
    for input in inputs {
        require_input(input)?;
        if input.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("txt" | "md")))
                .collect();
            files.sort();
            for f in files {
                docs.push(fs::read_to_string(&f).with_context(|| f.display().to_string())?);
            }
        } else if input.extension().and_then(|e| e.to_str()) == Some("parquet") {
            docs.extend(read_corpus_file(input, "text")?.into_iter().map(|c| c.text));
        } else {
            docs.push(fs::read_to_string(input).with_context(|| input.display().to_string())?);
        }
    }
    Ok(docs)
}

pub fn corpus(ws: &Workspace, config: &PipelineConfig, a: CorpusArgs) -> CmdResult {
    let min_chars = a.min_chars.unwrap_or(config.prompts.min_chars);
    let test_fraction = a.test_fraction.unwrap_or(config.prompts.test_fraction);
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Failure::config("test_fraction: must lie in [0, 1)"));
    }
    let qlora = build_qlora_spec(&table_to_strings(&config.prompts.qlora)?)?;
    let docs = collect_documents(&a.inputs)?;
    let text = build_corpus(&docs)?;
    let chunks = chunk_corpus(&text, min_chars)?;
    let (train, test) = split_corpus(&chunks, test_fraction, config.seed)?;
    let (train_path, test_path, qlora_path) = (ws.path(CORPUS_TRAIN), ws.path(CORPUS_TEST), ws.path(QLORA_FILE));
    write_corpus_file(&train, &train_path)?;
    write_corpus_file(&test, &test_path)?;
    write_json_pretty(&qlora_path, &qlora)?;
    log::info!("{} chunks: {} train, {} test", chunks.len(), train.len(), test.len());
    ws.record(
        "corpus",
        &json!({ "min_chars": min_chars, "test_fraction": test_fraction, "seed": config.seed }),
        &a.inputs,
        &[train_path, test_path, qlora_path],
    )
}

pub fn index(ws: &Workspace, config: &PipelineConfig, a: IndexArgs) -> CmdResult {
    let corpus_path = ws.require(CORPUS_TRAIN, "corpus")?;
    let chunk_size = a.chunk_size.unwrap_or(config.prompts.index_chunk_size);
    if chunk_size == 0 || config.prompts.embed_dim == 0 {
        return Err(Failure::config("index_chunk_size and embed_dim must be positive"));
    }
    let chunks = read_corpus_file(&corpus_path, "text")?;
    let embedder = HashedBowEmbedder::new(config.prompts.embed_dim);
    let index = index_corpus(&chunks, &embedder, chunk_size)?;
    let out = ws.path(INDEX_FILE);
    index.save(&out)?;
    ws.record(
        "index",
        &json!({ "chunk_size": chunk_size, "embedder": embedder.id() }),
        &[corpus_path],
        &[out],
    )
}

pub fn prompts(ws: &Workspace, config: &PipelineConfig, a: PromptsArgs) -> CmdResult {
    let p = &config.prompts;
    let per_class = a.per_class.unwrap_or(p.per_class);
    let template = a.template.unwrap_or_else(|| p.template.clone());
    let top_k = a.top_k.unwrap_or(p.top_k);
    if !TEMPLATES.contains(&template.as_str()) {
        return Err(Failure::config(format!("template: unknown `{template}` (known: {})", TEMPLATES.join(", "))));
    }
    if per_class == 0 {
        return Err(Failure::config("per_class: must be at least 1"));
    }
    let index_path = ws.path(INDEX_FILE);
    let use_index = !a.no_index && index_path.exists() && top_k > 0;
    let embedder = HashedBowEmbedder::new(p.embed_dim.max(1));
    let index = if use_index { Some(VectorIndex::load(&index_path)?) } else { None };
    let retrieval = index.as_ref().map(|i| (i, &embedder as &dyn Embedder));
    let bank = build_prompt_bank(&ClassCatalog::default(), per_class, retrieval, top_k, &template, config.seed)?;
    let out = ws.path(PROMPTS_FILE);
    write_prompt_bank(&bank, &out)?;
    let inputs = if use_index { vec![index_path] } else { Vec::new() };
    ws.record(
        "prompts",
        &json!({ "per_class": per_class, "template": template, "top_k": top_k, "retrieval": use_index, "seed": config.seed }),
        &inputs,
        &[out],
    )
}

fn parse_counts(raw: &str) -> CmdResult<BTreeMap<String, usize>> {
    raw.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Failure::config(format!("counts: expected `Class=N`, got `{pair}`")))?;
            let n = v.trim().parse().map_err(|_| Failure::config(format!("counts: bad number `{v}`")))?;
            Ok((k.trim().to_string(), n))
        })
        .collect()
}

pub fn generate(ws: &Workspace, config: &PipelineConfig, a: GenerateArgs) -> CmdResult {
    let g = &config.generate;
    let counts = match &a.counts {
        Some(raw) => parse_counts(raw)?,
        None => g.counts.clone().unwrap_or_else(classes::reference_counts),
    };
    if let Some(unknown) = counts.keys().find(|c| classes::label_index(c).is_none()) {
        return Err(Failure::config(format!(
            "counts: `{unknown}` is not one of {}",
            LULC_CLASSES.join(", ")
        )));
    }
    let (width, height, steps) = (a.width.unwrap_or(g.width), a.height.unwrap_or(g.height), a.steps.unwrap_or(g.steps));
    if width == 0 || height == 0 || steps == 0 {
        return Err(Failure::config("width, height and steps must be positive"));
    }
    let backend_id = a.backend.unwrap_or_else(|| g.backend.clone());
    if backend_id != "reference" {
        return Err(Failure::config(format!("backend: unknown `{backend_id}` (available: reference)")));
    }
    let bank_path = ws.require(PROMPTS_FILE, "prompts")?;
    let mut bank = read_prompt_bank(&bank_path)?;
    for spec in &mut bank {
        (spec.width, spec.height, spec.steps) = (width, height, steps);
        spec.scheduler = g.scheduler.clone();
    }
    let plan = plan_generation(&counts, &bank, config.seed)?;
    let plan_path = ws.path(PLAN_FILE);
    write_json_pretty(&plan_path, &plan)?;
    let manifest = ws.path(&format!("{GEN_DIR}/{GEN_MANIFEST_FILE}"));
    let backend = ReferenceDiffusion::default();
    let records = run_generation(&plan, &backend, &manifest)?;
    let out = ws.path(SYNTH_FILE);
    write_synth_dataset(&records, &out)?;
    log::info!("{} synthetic records", records.len());
    ws.record(
        "generate",
        &json!({ "counts": counts, "width": width, "height": height, "steps": steps, "scheduler": g.scheduler, "backend": backend_id, "seed": config.seed }),
        &[bank_path],
        &[plan_path, manifest, out],
    )
}

/// Images from a directory (PNG/JPEG files, name order), an image-caption
/// Parquet file or a synthetic dataset file.
pub fn load_images(path: &Path) -> CmdResult<Vec<Raster>> {
    require_input(path)?;
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                    Some("png" | "jpg" | "jpeg")
                )
            })
            .collect();
        files.sort();
        return files
            .iter()
            .map(|f| Ok(Raster::decode(&fs::read(f)?).with_context(|| f.display().to_string())?))
            .collect();
    }
    match ingest_columnar(path, &ColumnSpec::default()) {
        Ok(rs) => Ok(rs.into_records().into_iter().map(|r| r.image).collect()),
        Err(synthgen_core::Error::Schema(_)) => {
            Ok(read_synth_dataset(path)?.into_iter().map(|r| r.image).collect())
        }
        Err(e) => Err(e.into()),
    }
}

pub fn fid(ws: &Workspace, config: &PipelineConfig, a: FidArgs) -> CmdResult {
    let f = &config.fid;
    let sample_size = a.sample_size.unwrap_or(f.sample_size);
    let runs = a.runs.unwrap_or(f.runs);
    let extractor_name = a.extractor.unwrap_or_else(|| f.extractor.clone());
    if extractor_name != "reference" {
        return Err(Failure::config(format!("extractor: unknown `{extractor_name}` (available: reference)")));
    }
    if runs == 0 {
        return Err(Failure::config("runs: must be at least 1"));
    }
    let real_path = match a.real {
        Some(p) => p,
        None => ws.require(HOLDOUT_FILE, "prepare")?,
    };
    let gen_path = match a.gen {
        Some(p) => p,
        None => ws.require(SYNTH_FILE, "generate")?,
    };
    let real = load_images(&real_path)?;
    let gen = load_images(&gen_path)?;
    if sample_size < 2 || sample_size > real.len().min(gen.len()) {
        return Err(Failure::config(format!(
            "sample_size: {sample_size} must lie in [2, {}] (real {}, generated {})",
            real.len().min(gen.len()),
            real.len(),
            gen.len()
        )));
    }
    let extractor = ReferenceExtractor::new(f.extractor_side, f.extractor_dim, config.seed);
    let r: Vec<&Raster> = real.iter().collect();
    let g: Vec<&Raster> = gen.iter().collect();
    let out = sampled_fid(&r, &g, &extractor, sample_size, runs, config.seed)?;
    let report = json!({
        "mean_fid": out.mean_fid,
        "per_run": out.per_run,
        "extractor_id": extractor.id(),
        "n_real": real.len(),
        "n_gen": gen.len(),
        "sample_size": sample_size,
        "runs": runs,
        "seed": config.seed,
    });
    let out_path = ws.path(FID_FILE);
    write_json_pretty(&out_path, &report)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    ws.record("fid", &report, &[real_path, gen_path], &[out_path])
}

pub fn train_downstream(ws: &Workspace, config: &PipelineConfig, a: DownstreamArgs) -> CmdResult {
    let d = &config.downstream;
    if d.backend != LogisticProbe::ID {
        return Err(Failure::config(format!("backend: unknown `{}` (available: {})", d.backend, LogisticProbe::ID)));
    }
    let cc = ClassifyConfig {
        learning_rate: a.learning_rate.unwrap_or(d.learning_rate),
        epochs: a.epochs.unwrap_or(d.epochs),
        batch_size: a.batch_size.unwrap_or(d.batch_size),
        crop_side: a.crop_side.unwrap_or(d.crop_side),
        seed: config.seed,
        backend_id: d.backend.clone(),
        augment: true,
    };
    cc.validate()?;
    let data_path = match a.data {
        Some(p) => p,
        None => ws.require(SYNTH_FILE, "generate")?,
    };
    require_input(&data_path)?;
    let splits = load_synth(&data_path, d.split, config.seed)?;
    if splits.test.is_empty() {
        return Err(Failure::config("split: the test fraction leaves no test images"));
    }
    let train_images: Vec<&Raster> = splits.train.iter().map(|i| &i.image).collect();
    let stats = stats_of_rasters(&train_images)?;

    let epochs_path = ws.path(EPOCHS_FILE);
    write_bytes_atomic(&epochs_path, b"epoch,train_loss,train_accuracy,val_loss,val_accuracy\n")?;
    let mut csv_err = None;
    let mut probe = LogisticProbe::new();
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let outcome = train_classifier(&cc, &splits, &stats, &mut probe, &mut |r| {
        let line = format!(
            "{},{},{},{},{}\n",
            r.epoch,
            r.train_loss,
            r.train_accuracy,
            opt(r.val_loss),
            opt(r.val_accuracy)
        );
        let res = fs::OpenOptions::new()
            .append(true)
            .open(&epochs_path)
            .and_then(|mut f| std::io::Write::write_all(&mut f, line.as_bytes()));
        if let Err(e) = res {
            csv_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = csv_err {
        return Err(Failure::Stage(anyhow::Error::new(e).context(epochs_path.display().to_string())));
    }
    let eval = build_transforms(&stats, cc.crop_side, false)?;
    let metrics = evaluate_classifier(&probe, &splits.test, &eval, LULC_CLASSES.len())?;
    let metrics_path = ws.path(METRICS_FILE);
    write_json_pretty(
        &metrics_path,
        &json!({
            "metrics": metrics,
            "class_names": LULC_CLASSES,
            "best_epoch": outcome.best_epoch,
            "split_sizes": [splits.train.len(), splits.val.len(), splits.test.len()],
            "config": cc,
        }),
    )?;
    let model_path = ws.path(MODEL_FILE);
    write_json_pretty(&model_path, &json!({ "stats": stats, "backend": LogisticProbe::ID, "state": outcome.model }))?;
    println!(
        "overall accuracy {:.4}, average accuracy {:.4}, macro F1 {:.4}, Jaccard {:.4}, test loss {:.4}",
        metrics.overall_accuracy, metrics.average_accuracy, metrics.macro_f1, metrics.jaccard, metrics.test_loss
    );
    ws.record("train-downstream", &(&cc, d.split), &[data_path], &[metrics_path, epochs_path, model_path])
}
