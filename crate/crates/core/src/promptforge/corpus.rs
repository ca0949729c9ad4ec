use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use arrow::array::{Array, ArrayRef, AsArray, BooleanArray, RecordBatch, StringArray, UInt64Array};
use arrow::datatypes::{DataType, Field, Schema, UInt64Type};
use parquet::arrow::arrow_reader::ParquetRecordBatchReaderBuilder;
use parquet::arrow::ArrowWriter;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::fsutil::write_atomic;
use crate::seed;

pub const DEFAULT_MIN_CHARS: usize = 500;
pub const DEFAULT_TEST_FRACTION: f64 = 0.05;
/// End-of-sequence marker of the Phi tokenizer family.
pub const DEFAULT_EOS: &str = "<|endoftext|>";

/// A chunk of corpus text. The EOS marker is not part of `text`; it is
/// recorded by `ends_with_eos` and rendered with [`CorpusChunk::render`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusChunk {
    pub text: String,
    /// Length of `text` in characters.
    pub char_len: usize,
    pub ends_with_eos: bool,
    pub ordinal: usize,
}

impl CorpusChunk {
    pub fn render(&self, eos: &str) -> String {
        if self.ends_with_eos {
            format!("{}{eos}", self.text)
        } else {
            self.text.clone()
        }
    }
}

/// Join documents with single newlines after collapsing every whitespace
/// run to one space. Documents that are blank after trimming are dropped.
pub fn build_corpus<S: AsRef<str>>(documents: &[S]) -> Result<String> {
    let cleaned: Vec<String> = documents
        .iter()
        .map(|d| d.as_ref().split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|d| !d.is_empty())
        .collect();
    if cleaned.is_empty() {
        return Err(Error::arg("corpus needs at least one non-empty document"));
    }
    Ok(cleaned.join("\n"))
}

/// Greedy chunking: extend the current chunk until it holds at least
/// `min_chars` characters and has just reached a `.`, then cut. Whatever
/// follows the last cut becomes a final, possibly short, chunk. Every chunk
/// is flagged for an EOS marker.
///
/// Abbreviations and decimals are not special-cased: every `.` is a full
/// stop.
pub fn chunk_corpus(text: &str, min_chars: usize) -> Result<Vec<CorpusChunk>> {
    if min_chars == 0 {
        return Err(Error::arg("min_chars must be at least 1"));
    }
    let mut chunks = Vec::new();
    let mut start = 0;
    let mut count = 0;
    let push = |chunks: &mut Vec<CorpusChunk>, slice: &str, len: usize| {
        let ordinal = chunks.len();
        chunks.push(CorpusChunk {
            text: slice.to_string(),
            char_len: len,
            ends_with_eos: true,
            ordinal,
        });
    };
    for (i, c) in text.char_indices() {
        count += 1;
        if c == '.' && count >= min_chars {
            let end = i + c.len_utf8();
            push(&mut chunks, &text[start..end], count);
            start = end;
            count = 0;
        }
    }
    if start < text.len() {
        push(&mut chunks, &text[start..], count);
    }
    Ok(chunks)
}

/// Hold out `round(test_fraction × N)` chunks uniformly at random. Both
/// parts keep the input order.
pub fn split_corpus(
    chunks: &[CorpusChunk],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<CorpusChunk>, Vec<CorpusChunk>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::arg(format!("test fraction {test_fraction} is outside [0, 1)")));
    }
    let n_test = (test_fraction * chunks.len() as f64).round() as usize;
    let mut rng = seed::derived_rng(seed, &["corpus", "split"]);
    let mut is_test = vec![false; chunks.len()];
    for i in index::sample(&mut rng, chunks.len(), n_test) {
        is_test[i] = true;
    }
    let (test, train): (Vec<_>, Vec<_>) = chunks
        .iter()
        .cloned()
        .zip(is_test)
        .partition(|(_, t)| *t);
    Ok((
        train.into_iter().map(|(c, _)| c).collect(),
        test.into_iter().map(|(c, _)| c).collect(),
    ))
}

/// Columnar corpus file: one row per chunk with `ordinal`, `text`,
/// `char_len` and `ends_with_eos`.
pub fn write_corpus_file(chunks: &[CorpusChunk], path: &Path) -> Result<()> {
    let schema = Arc::new(Schema::new(vec![
        Field::new("ordinal", DataType::UInt64, false),
        Field::new("text", DataType::Utf8, false),
        Field::new("char_len", DataType::UInt64, false),
        Field::new("ends_with_eos", DataType::Boolean, false),
    ]));
    let columns: Vec<ArrayRef> = vec![
        Arc::new(UInt64Array::from_iter_values(chunks.iter().map(|c| c.ordinal as u64))),
        Arc::new(StringArray::from_iter_values(chunks.iter().map(|c| c.text.as_str()))),
        Arc::new(UInt64Array::from_iter_values(chunks.iter().map(|c| c.char_len as u64))),
        Arc::new(BooleanArray::from(chunks.iter().map(|c| c.ends_with_eos).collect::<Vec<_>>())),
    ];
    let batch = RecordBatch::try_new(schema.clone(), columns)?;
    write_atomic(path, |file| {
        let mut w = ArrowWriter::try_new(file, schema, None)?;
        if batch.num_rows() > 0 {
            w.write(&batch)?;
        }
        w.close()?;
        Ok(())
    })
}

/// Read a corpus file written by [`write_corpus_file`], or any Parquet file
/// with a `text_column` of strings (rows become unflagged chunks).
pub fn read_corpus_file(path: &Path, text_column: &str) -> Result<Vec<CorpusChunk>> {
    let file = File::open(path).at(path)?;
    let builder = ParquetRecordBatchReaderBuilder::try_new(file)?;
    let schema = builder.schema().clone();
    if schema.column_with_name(text_column).is_none() {
        return Err(Error::Schema(format!("{}: missing column `{text_column}`", path.display())));
    }
    let native = ["ordinal", "char_len", "ends_with_eos"]
        .iter()
        .all(|c| schema.column_with_name(c).is_some());
    let mut out = Vec::new();
    for batch in builder.build()? {
        let batch = batch?;
        let text = batch.column_by_name(text_column).expect("checked");
        let text = match text.data_type() {
            DataType::Utf8 => text.as_string::<i32>().clone(),
            other => return Err(Error::Schema(format!("text column has type {other}"))),
        };
        for i in 0..batch.num_rows() {
            if text.is_null(i) {
                continue;
            }
            let t = text.value(i).to_string();
            let chunk = if native {
                CorpusChunk {
                    ordinal: batch.column_by_name("ordinal").unwrap().as_primitive::<UInt64Type>().value(i) as usize,
                    char_len: batch.column_by_name("char_len").unwrap().as_primitive::<UInt64Type>().value(i) as usize,
                    ends_with_eos: batch.column_by_name("ends_with_eos").unwrap().as_boolean().value(i),
                    text: t,
                }
            } else {
                CorpusChunk { ordinal: out.len(), char_len: t.chars().count(), ends_with_eos: false, text: t }
            };
            out.push(chunk);
        }
    }
    Ok(out)
}
