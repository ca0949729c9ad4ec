//! Retrieval index over corpus chunks.
//!
//! Chunks are re-segmented into pieces of at most `index_chunk_size`
//! characters, embedded, unit-normalized and searched by exhaustive cosine
//! similarity. The file format is line-delimited JSON: one header line
//! `{embedder_id, index_chunk_size, dim}` then one line per entry.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CorpusChunk;
use crate::error::{Error, Result};
use crate::fsutil::{read_jsonl, write_atomic};

pub const DEFAULT_INDEX_CHUNK_SIZE: usize = 256;

/// Text embedding adapter.
pub trait Embedder {
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
}

/// Signed feature hashing of lowercase alphanumeric tokens. Needs no model
/// files and is fully deterministic.
#[derive(Clone, Debug)]
pub struct HashedBowEmbedder {
    dim: usize,
}

impl HashedBowEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }
}

impl Default for HashedBowEmbedder {
    fn default() -> Self {
        Self::new(256)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl Embedder for HashedBowEmbedder {
    fn id(&self) -> String {
        format!("hashed-bow-{}", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.dim];
        let lower = text.to_lowercase();
        let mut any = false;
        for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            let h = fnv1a(token.as_bytes());
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[(h % self.dim as u64) as usize] += sign;
            any = true;
        }
        if !any {
            // Punctuation-only or empty text still needs a direction.
            let h = fnv1a(text.trim().as_bytes());
            v[(h % self.dim as u64) as usize] = 1.0;
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub chunk_ordinal: usize,
    /// Position of this segment within its chunk.
    pub segment: usize,
    pub text: String,
    pub embedding: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    embedder_id: String,
    index_chunk_size: usize,
    dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorIndex {
    pub entries: Vec<IndexEntry>,
    pub embedder_id: String,
    pub index_chunk_size: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalHit {
    pub chunk_ordinal: usize,
    pub segment: usize,
    pub score: f64,
}

fn segments(text: &str, size: usize) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    chars.chunks(size).map(|c| c.iter().collect()).collect()
}

fn unit(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

pub fn index_corpus(
    chunks: &[CorpusChunk],
    embedder: &dyn Embedder,
    index_chunk_size: usize,
) -> Result<VectorIndex> {
    if index_chunk_size == 0 {
        return Err(Error::arg("index chunk size must be positive"));
    }
    let dim = embedder.dim();
    let mut entries = Vec::new();
    for chunk in chunks {
        for (segment, text) in segments(&chunk.text, index_chunk_size).into_iter().enumerate() {
            let fail = |why: String| Error::Backend(format!("embedding chunk {}: {why}", chunk.ordinal));
            let raw = embedder.embed(&text).map_err(|e| fail(e.to_string()))?;
            if raw.len() != dim {
                return Err(fail(format!("expected dimension {dim}, got {}", raw.len())));
            }
            let embedding = unit(raw).ok_or_else(|| fail("zero or non-finite embedding".into()))?;
            entries.push(IndexEntry { chunk_ordinal: chunk.ordinal, segment, text, embedding });
        }
    }
    Ok(VectorIndex { entries, embedder_id: embedder.id(), index_chunk_size, dim })
}

/// Top `k` entries by cosine similarity, best first; ties go to the lower
/// (chunk ordinal, segment).
pub fn retrieve(
    index: &VectorIndex,
    embedder: &dyn Embedder,
    query: &str,
    k: usize,
) -> Result<Vec<RetrievalHit>> {
    if k == 0 {
        return Err(Error::arg("k must be at least 1"));
    }
    if index.entries.is_empty() {
        return Err(Error::State("retrieval index is empty".into()));
    }
    if embedder.id() != index.embedder_id {
        return Err(Error::State(format!(
            "index built with `{}`, queried with `{}`",
            index.embedder_id,
            embedder.id()
        )));
    }
    let q = unit(embedder.embed(query)?)
        .ok_or_else(|| Error::Backend("query embedding is zero".into()))?;
    let mut hits: Vec<RetrievalHit> = index
        .entries
        .iter()
        .map(|e| RetrievalHit {
            chunk_ordinal: e.chunk_ordinal,
            segment: e.segment,
            score: e.embedding.iter().zip(&q).map(|(a, b)| a * b).sum(),
        })
        .collect();
    hits.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.chunk_ordinal.cmp(&b.chunk_ordinal))
            .then(a.segment.cmp(&b.segment))
    });
    hits.truncate(k);
    Ok(hits)
}

impl VectorIndex {
    pub fn entry(&self, hit: &RetrievalHit) -> Option<&IndexEntry> {
        self.entries
            .iter()
            .find(|e| e.chunk_ordinal == hit.chunk_ordinal && e.segment == hit.segment)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = Header {
            embedder_id: self.embedder_id.clone(),
            index_chunk_size: self.index_chunk_size,
            dim: self.dim,
        };
        let mut buf = serde_json::to_vec(&header)?;
        buf.push(b'\n');
        for e in &self.entries {
            serde_json::to_writer(&mut buf, e)?;
            buf.push(b'\n');
        }
        write_atomic(path, |f| {
            use std::io::Write;
            f.write_all(&buf).map_err(|e| Error::io(path, e))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let lines: Vec<serde_json::Value> = read_jsonl(path)?;
        let mut it = lines.into_iter();
        let header: Header = serde_json::from_value(
            it.next().ok_or_else(|| Error::State(format!("{}: empty index file", path.display())))?,
        )?;
        let entries = it
            .map(|v| serde_json::from_value::<IndexEntry>(v).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        if entries.iter().any(|e| e.embedding.len() != header.dim) {
            return Err(Error::State(format!("{}: inconsistent embedding dimension", path.display())));
        }
        Ok(Self {
            entries,
            embedder_id: header.embedder_id,
            index_chunk_size: header.index_chunk_size,
            dim: header.dim,
        })
    }
}
