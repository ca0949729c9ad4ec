//! Reading and writing image-caption datasets stored as Parquet.
//!
//! The image column may be plain binary or a struct with a `bytes` field
//! (the Hugging Face `datasets` image encoding). Captions may be a list of
//! strings or a single string.

use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use arrow::array::{
    Array, ArrayRef, AsArray, BinaryBuilder, ListBuilder, RecordBatch, StringBuilder,
};
use arrow::datatypes::{DataType, Field, Schema};
use parquet::arrow::arrow_reader::ParquetRecordBatchReaderBuilder;
use parquet::arrow::ArrowWriter;

use super::{ImageCaptionRecord, RecordSet, SplitTag};
use crate::error::{Error, IoContext, Result};
use crate::fsutil::write_atomic;
use crate::raster::Raster;

/// Column names of an image-caption dataset.
#[derive(Clone, Debug)]
pub struct ColumnSpec {
    pub image: String,
    pub captions: String,
    /// Used when present; rows get `row-<index>` ids otherwise.
    pub source_id: String,
    /// Used when present.
    pub class_name: String,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            image: "image".into(),
            captions: "captions".into(),
            source_id: "filename".into(),
            class_name: "class_name".into(),
        }
    }
}

/// Load every row of a Parquet image-caption dataset.
pub fn ingest_columnar(path: &Path, columns: &ColumnSpec) -> Result<RecordSet> {
    let file = File::open(path).at(path)?;
    let builder = ParquetRecordBatchReaderBuilder::try_new(file)?;
    let schema = builder.schema().clone();
    for required in [&columns.image, &columns.captions] {
        if schema.column_with_name(required).is_none() {
            return Err(Error::Schema(format!(
                "{}: missing column `{required}`",
                path.display()
            )));
        }
    }
    let has_id = schema.column_with_name(&columns.source_id).is_some();
    let has_class = schema.column_with_name(&columns.class_name).is_some();

    let mut records = Vec::new();
    let mut row = 0usize;
    for batch in builder.build()? {
        let batch = batch?;
        let images = batch.column_by_name(&columns.image).expect("checked");
        let captions = batch.column_by_name(&columns.captions).expect("checked");
        let ids = has_id.then(|| batch.column_by_name(&columns.source_id).expect("checked"));
        let classes =
            has_class.then(|| batch.column_by_name(&columns.class_name).expect("checked"));

        for i in 0..batch.num_rows() {
            let source_id = match ids {
                Some(col) => string_at(col, i)?.unwrap_or_else(|| format!("row-{row}")),
                None => format!("row-{row}"),
            };
            let bytes = image_bytes_at(images, i)?.ok_or_else(|| Error::Record {
                source_id: source_id.clone(),
                reason: "null image".into(),
            })?;
            let image = Raster::decode(bytes).map_err(|e| Error::Record {
                source_id: source_id.clone(),
                reason: format!("undecodable image: {e}"),
            })?;
            let class_name = match classes {
                Some(col) => string_at(col, i)?,
                None => None,
            };
            records.push(ImageCaptionRecord {
                image,
                captions: captions_at(captions, i)?,
                class_name,
                source_id,
            });
            row += 1;
        }
    }
    RecordSet::new(records, SplitTag::Unsplit)
}

pub(crate) fn string_at(col: &ArrayRef, i: usize) -> Result<Option<String>> {
    if col.is_null(i) {
        return Ok(None);
    }
    let s = match col.data_type() {
        DataType::Utf8 => col.as_string::<i32>().value(i),
        DataType::LargeUtf8 => col.as_string::<i64>().value(i),
        other => return Err(Error::Schema(format!("expected a string column, found {other}"))),
    };
    Ok(Some(s.to_string()))
}

pub(crate) fn image_bytes_at(col: &ArrayRef, i: usize) -> Result<Option<&[u8]>> {
    if col.is_null(i) {
        return Ok(None);
    }
    match col.data_type() {
        DataType::Binary => Ok(Some(col.as_binary::<i32>().value(i))),
        DataType::LargeBinary => Ok(Some(col.as_binary::<i64>().value(i))),
        DataType::Struct(_) => {
            let inner = col
                .as_struct()
                .column_by_name("bytes")
                .ok_or_else(|| Error::Schema("image struct has no `bytes` field".into()))?;
            image_bytes_at(inner, i)
        }
        other => Err(Error::Schema(format!(
            "image column must be binary or a struct with `bytes`, found {other}"
        ))),
    }
}

fn captions_at(col: &ArrayRef, i: usize) -> Result<Vec<String>> {
    if col.is_null(i) {
        return Ok(Vec::new());
    }
    let values = match col.data_type() {
        DataType::Utf8 | DataType::LargeUtf8 => return Ok(string_at(col, i)?.into_iter().collect()),
        DataType::List(_) => col.as_list::<i32>().value(i),
        DataType::LargeList(_) => col.as_list::<i64>().value(i),
        other => {
            return Err(Error::Schema(format!(
                "caption column must be a string or list of strings, found {other}"
            )))
        }
    };
    (0..values.len())
        .filter_map(|j| string_at(&values, j).transpose())
        .collect()
}

/// Write records as Parquet: binary PNG `image`, `captions` list, `filename`
/// and nullable `class_name`, using the names in `columns`.
pub fn write_columnar(records: &[ImageCaptionRecord], path: &Path, columns: &ColumnSpec) -> Result<()> {
    let schema = Arc::new(Schema::new(vec![
        Field::new(&columns.image, DataType::Binary, false),
        Field::new(
            &columns.captions,
            DataType::List(Arc::new(Field::new("item", DataType::Utf8, true))),
            false,
        ),
        Field::new(&columns.source_id, DataType::Utf8, false),
        Field::new(&columns.class_name, DataType::Utf8, true),
    ]));

    let mut images = BinaryBuilder::new();
    let mut captions = ListBuilder::new(StringBuilder::new());
    let mut ids = StringBuilder::new();
    let mut classes = StringBuilder::new();
    for r in records {
        images.append_value(r.image.encode_png()?);
        for c in &r.captions {
            captions.values().append_value(c);
        }
        captions.append(true);
        ids.append_value(&r.source_id);
        classes.append_option(r.class_name.as_deref());
    }
    let columns: Vec<ArrayRef> = vec![
        Arc::new(images.finish()),
        Arc::new(captions.finish()),
        Arc::new(ids.finish()),
        Arc::new(classes.finish()),
    ];
    let batch = RecordBatch::try_new(schema.clone(), columns)?;

    write_atomic(path, |file| {
        let mut writer = ArrowWriter::try_new(file, schema, None)?;
        if batch.num_rows() > 0 {
            writer.write(&batch)?;
        }
        writer.close()?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::fixtures;
    use arrow::array::{StructArray};

    #[test]
    fn three_row_fixture_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rs.parquet");
        let rs = fixtures::record_set(3);
        write_columnar(rs.records(), &path, &ColumnSpec::default()).unwrap();
        let back = ingest_columnar(&path, &ColumnSpec::default()).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back.split_tag(), SplitTag::Unsplit);
        for (a, b) in rs.iter().zip(back.iter()) {
            assert_eq!(b.captions.len(), 5);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn empty_file_gives_empty_set() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.parquet");
        write_columnar(&[], &path, &ColumnSpec::default()).unwrap();
        assert!(ingest_columnar(&path, &ColumnSpec::default()).unwrap().is_empty());
    }

    #[test]
    fn missing_caption_column_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rs.parquet");
        write_columnar(fixtures::record_set(1).records(), &path, &ColumnSpec::default()).unwrap();
        let spec = ColumnSpec { captions: "sentences".into(), ..Default::default() };
        assert!(matches!(ingest_columnar(&path, &spec), Err(Error::Schema(_))));
    }

    fn write_raw(path: &Path, image: ArrayRef, captions: ArrayRef) {
        let schema = Arc::new(Schema::new(vec![
            Field::new("image", image.data_type().clone(), true),
            Field::new("captions", captions.data_type().clone(), true),
        ]));
        let batch = RecordBatch::try_new(schema.clone(), vec![image, captions]).unwrap();
        let file = File::create(path).unwrap();
        let mut w = ArrowWriter::try_new(file, schema, None).unwrap();
        w.write(&batch).unwrap();
        w.close().unwrap();
    }

    #[test]
    fn struct_image_column_and_plain_string_captions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hf.parquet");
        let png = fixtures::record("x", 4, 9).image.encode_png().unwrap();
        let bytes: ArrayRef = Arc::new(arrow::array::BinaryArray::from(vec![png.as_slice()]));
        let paths: ArrayRef = Arc::new(arrow::array::StringArray::from(vec!["x.png"]));
        let image: ArrayRef = Arc::new(StructArray::from(vec![
            (Arc::new(Field::new("bytes", DataType::Binary, true)), bytes),
            (Arc::new(Field::new("path", DataType::Utf8, true)), paths),
        ]));
        let captions: ArrayRef = Arc::new(arrow::array::StringArray::from(vec!["one caption."]));
        write_raw(&path, image, captions);
        let rs = ingest_columnar(&path, &ColumnSpec::default()).unwrap();
        assert_eq!(rs.records()[0].source_id, "row-0");
        assert_eq!(rs.records()[0].captions, vec!["one caption.".to_string()]);
        assert_eq!(rs.records()[0].image, fixtures::record("x", 4, 9).image);
    }

    #[test]
    fn undecodable_image_names_the_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.parquet");
        let image: ArrayRef = Arc::new(arrow::array::BinaryArray::from(vec![&b"not a png"[..]]));
        let captions: ArrayRef = Arc::new(arrow::array::StringArray::from(vec!["c."]));
        write_raw(&path, image, captions);
        match ingest_columnar(&path, &ColumnSpec::default()) {
            Err(Error::Record { source_id, .. }) => assert_eq!(source_id, "row-0"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
