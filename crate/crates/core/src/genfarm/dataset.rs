//! The labeled synthetic dataset as a Parquet file.

use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use arrow::array::{Array, ArrayRef, AsArray, BinaryBuilder, RecordBatch, StringBuilder, UInt64Builder};
use arrow::compute::cast;
use arrow::datatypes::{DataType, Field, Schema, UInt64Type};
use parquet::arrow::arrow_reader::ParquetRecordBatchReaderBuilder;
use parquet::arrow::ArrowWriter;

use crate::classes;
use crate::error::{Error, IoContext, Result};
use crate::fsutil::write_atomic;
use crate::ingest::columnar::{image_bytes_at, string_at};
use crate::raster::Raster;

const COLUMNS: [&str; 8] = [
    "image",
    "class_name",
    "label_index",
    "prompt",
    "negative_prompt",
    "seed",
    "scheduler",
    "steps",
];

/// One generated image with its label and generation parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthRecord {
    pub image: Raster,
    pub class_name: String,
    /// Alphabetical ordinal of `class_name` among the seven classes.
    pub label_index: usize,
    pub prompt: String,
    pub negative_prompt: String,
    pub seed: u64,
    pub scheduler: String,
    pub steps: usize,
}

impl SynthRecord {
    pub fn validate(&self) -> Result<()> {
        match classes::label_index(&self.class_name) {
            Some(i) if i == self.label_index => {}
            Some(i) => {
                return Err(Error::validation(
                    "label_index",
                    format!("`{}` has index {i}, record says {}", self.class_name, self.label_index),
                ))
            }
            None => {
                return Err(Error::validation(
                    "class_name",
                    format!("`{}` is not a known land-cover class", self.class_name),
                ))
            }
        }
        if self.image.channels() != 3 {
            return Err(Error::validation("image", "must have three channels"));
        }
        Ok(())
    }
}

/// Write records as Parquet (PNG image bytes plus label and generation
/// columns). The file appears atomically or not at all.
pub fn write_synth_dataset(records: &[SynthRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::arg("refusing to write an empty synthetic dataset"));
    }
    let u64_field = |name: &str| Field::new(name, DataType::UInt64, false);
    let str_field = |name: &str| Field::new(name, DataType::Utf8, false);
    let schema = Arc::new(Schema::new(vec![
        Field::new(COLUMNS[0], DataType::Binary, false),
        str_field(COLUMNS[1]),
        u64_field(COLUMNS[2]),
        str_field(COLUMNS[3]),
        str_field(COLUMNS[4]),
        u64_field(COLUMNS[5]),
        str_field(COLUMNS[6]),
        u64_field(COLUMNS[7]),
    ]));

    let mut image = BinaryBuilder::new();
    let (mut class_name, mut prompt, mut negative, mut scheduler) =
        (StringBuilder::new(), StringBuilder::new(), StringBuilder::new(), StringBuilder::new());
    let (mut label, mut seed, mut steps) = (UInt64Builder::new(), UInt64Builder::new(), UInt64Builder::new());
    for r in records {
        r.validate()?;
        image.append_value(r.image.encode_png()?);
        class_name.append_value(&r.class_name);
        label.append_value(r.label_index as u64);
        prompt.append_value(&r.prompt);
        negative.append_value(&r.negative_prompt);
        seed.append_value(r.seed);
        scheduler.append_value(&r.scheduler);
        steps.append_value(r.steps as u64);
    }
    let columns: Vec<ArrayRef> = vec![
        Arc::new(image.finish()),
        Arc::new(class_name.finish()),
        Arc::new(label.finish()),
        Arc::new(prompt.finish()),
        Arc::new(negative.finish()),
        Arc::new(seed.finish()),
        Arc::new(scheduler.finish()),
        Arc::new(steps.finish()),
    ];
    let batch = RecordBatch::try_new(schema.clone(), columns)?;
    write_atomic(path, |file| {
        let mut writer = ArrowWriter::try_new(file, schema, None)?;
        writer.write(&batch)?;
        writer.close()?;
        Ok(())
    })
}

fn u64_at(col: &ArrayRef, i: usize, name: &str) -> Result<u64> {
    if col.is_null(i) {
        return Err(Error::Schema(format!("null in integer column `{name}`")));
    }
    Ok(col.as_primitive::<UInt64Type>().value(i))
}

pub fn read_synth_dataset(path: &Path) -> Result<Vec<SynthRecord>> {
    let file = File::open(path).at(path)?;
    let builder = ParquetRecordBatchReaderBuilder::try_new(file)?;
    for name in COLUMNS {
        if builder.schema().column_with_name(name).is_none() {
            return Err(Error::Schema(format!("{}: missing column `{name}`", path.display())));
        }
    }
    let mut out = Vec::new();
    for batch in builder.build()? {
        let batch = batch?;
        let col = |name: &str| batch.column_by_name(name).expect("checked").clone();
        // Integer columns may have been written as any integer type.
        let int = |name: &str| cast(&col(name), &DataType::UInt64);
        let (label, seed, steps) = (int("label_index")?, int("seed")?, int("steps")?);
        let (image, class_name, prompt, negative, scheduler) =
            (col("image"), col("class_name"), col("prompt"), col("negative_prompt"), col("scheduler"));
        let text = |c: &ArrayRef, i: usize, name: &str| -> Result<String> {
            string_at(c, i)?.ok_or_else(|| Error::Schema(format!("null in text column `{name}`")))
        };
        for i in 0..batch.num_rows() {
            let class = text(&class_name, i, "class_name")?;
            let bytes = image_bytes_at(&image, i)?.ok_or_else(|| Error::Record {
                source_id: format!("row {i} ({class})"),
                reason: "null image".into(),
            })?;
            let record = SynthRecord {
                image: Raster::decode(bytes)?,
                class_name: class,
                label_index: u64_at(&label, i, "label_index")? as usize,
                prompt: text(&prompt, i, "prompt")?,
                negative_prompt: text(&negative, i, "negative_prompt")?,
                seed: u64_at(&seed, i, "seed")?,
                scheduler: text(&scheduler, i, "scheduler")?,
                steps: u64_at(&steps, i, "steps")? as usize,
            };
            record.validate()?;
            out.push(record);
        }
    }
    Ok(out)
}
