//! The attention interchange bundle.
//!
//! A bundle is a directory holding three files:
//!
//! - `meta.json`: the [`BundleHeader`].
//! - `records.jsonl`: one [`SentenceRecord`] per line, in corpus order.
//! - `attn.bin`: every record's attention tensor, concatenated with no header
//!   or padding. Each tensor is laid out `[layer][head][row][col]` as
//!   little-endian `f32`.
//!
//! Records point into `attn.bin` with `attn_offset`/`attn_bytes`. Offsets are
//! strictly ascending and tile the blob exactly.
//!
//! Special tokens (classifier, separator) carry a `null` word index. The
//! format never inspects token strings to find them.

mod fixture;
mod io;
mod validate;

use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

pub use fixture::{gen_fixture, FixtureDims};
pub use io::{read_bundle, write_bundle, BundleReader};
pub use validate::{validate_bundle, ValidationReport, Violation, ViolationKind};

pub const FORMAT_VERSION: &str = "1";
pub const META_FILE: &str = "meta.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const BLOB_FILE: &str = "attn.bin";

/// Bytes per stored scalar.
pub const SCALAR_BYTES: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarType {
    F32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ByteOrder {
    Little,
}

/// Model-level metadata shared by every record in a bundle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleHeader {
    pub format_version: String,
    pub model_id: String,
    pub n_layers: usize,
    pub n_heads: usize,
    pub scalar_type: ScalarType,
    pub byte_order: ByteOrder,
}

impl BundleHeader {
    pub fn new(model_id: impl Into<String>, n_layers: usize, n_heads: usize) -> Self {
        Self {
            format_version: FORMAT_VERSION.to_string(),
            model_id: model_id.into(),
            n_layers,
            n_heads,
            scalar_type: ScalarType::F32,
            byte_order: ByteOrder::Little,
        }
    }

    /// Byte length of one record's tensor at the given sequence length.
    pub fn tensor_bytes(&self, seq_len: usize) -> u64 {
        (self.n_layers * self.n_heads * seq_len * seq_len) as u64 * SCALAR_BYTES
    }

    pub(crate) fn check(&self) -> Result<(), BundleError> {
        if self.format_version != FORMAT_VERSION {
            return Err(BundleError::UnsupportedVersion(self.format_version.clone()));
        }
        if self.n_layers == 0 || self.n_heads == 0 {
            return Err(BundleError::BadHeader(format!(
                "n_layers and n_heads must be positive (got {} and {})",
                self.n_layers, self.n_heads
            )));
        }
        Ok(())
    }
}

/// One sentence (or sentence pair) and its tokenization.
///
/// `word_index[i]` is the word owning subtoken `i`, or `None` for a special
/// token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub id: String,
    pub text_a: String,
    #[serde(default)]
    pub text_b: Option<String>,
    pub tokens: Vec<String>,
    pub word_index: Vec<Option<usize>>,
    pub words: Vec<String>,
    pub pos_tags: Vec<String>,
    pub seq_len: usize,
    pub attn_offset: u64,
    pub attn_bytes: u64,
}

impl SentenceRecord {
    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    /// Checks the structural invariants of the record on its own: lengths,
    /// word-index range, monotonicity and coverage. Tensor offsets are checked
    /// by the reader.
    pub fn structural_problems(&self) -> Vec<(ViolationKind, String)> {
        let mut problems = Vec::new();
        if self.seq_len == 0 {
            problems.push((ViolationKind::Shape, "seq_len must be positive".to_string()));
        }
        if self.tokens.len() != self.seq_len {
            problems.push((
                ViolationKind::Shape,
                format!("tokens has {} entries, seq_len is {}", self.tokens.len(), self.seq_len),
            ));
        }
        if self.word_index.len() != self.seq_len {
            problems.push((
                ViolationKind::Shape,
                format!(
                    "word_index has {} entries, seq_len is {}",
                    self.word_index.len(),
                    self.seq_len
                ),
            ));
        }
        if self.pos_tags.len() != self.words.len() {
            problems.push((
                ViolationKind::Shape,
                format!(
                    "pos_tags has {} entries, words has {}",
                    self.pos_tags.len(),
                    self.words.len()
                ),
            ));
        }

        let n_words = self.n_words();
        let mut expected_next = 0usize;
        let mut previous: Option<usize> = None;
        for (pos, w) in self.word_index.iter().enumerate() {
            let Some(w) = *w else { continue };
            if w >= n_words {
                problems.push((
                    ViolationKind::WordIndex,
                    format!("word_index[{pos}] = {w} is out of range for {n_words} words"),
                ));
                return problems;
            }
            match previous {
                Some(p) if w < p => {
                    problems.push((
                        ViolationKind::WordIndex,
                        format!("word_index decreases at position {pos} ({p} -> {w})"),
                    ));
                    return problems;
                }
                Some(p) if w == p => {}
                _ => {
                    if w != expected_next {
                        problems.push((
                            ViolationKind::Surjectivity,
                            format!("word {expected_next} owns no subtoken"),
                        ));
                        return problems;
                    }
                    expected_next += 1;
                }
            }
            previous = Some(w);
        }
        if expected_next != n_words {
            problems.push((
                ViolationKind::Surjectivity,
                format!("word {expected_next} owns no subtoken"),
            ));
        }
        problems
    }
}

/// Attention probabilities for one record, shape
/// `(n_layers, n_heads, seq_len, seq_len)`, held in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTensor {
    n_layers: usize,
    n_heads: usize,
    seq_len: usize,
    data: Vec<f64>,
}

impl AttentionTensor {
    pub fn new(
        n_layers: usize,
        n_heads: usize,
        seq_len: usize,
        data: Vec<f64>,
    ) -> Result<Self, BundleError> {
        let expected = n_layers * n_heads * seq_len * seq_len;
        if data.len() != expected {
            return Err(BundleError::BadTensor(format!(
                "expected {expected} scalars for shape ({n_layers}, {n_heads}, {seq_len}, {seq_len}), got {}",
                data.len()
            )));
        }
        Ok(Self { n_layers, n_heads, seq_len, data })
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn n_heads(&self) -> usize {
        self.n_heads
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    /// Flat scalars in `[layer][head][row][col]` order.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, layer: usize, head: usize, row: usize, col: usize) -> f64 {
        let s = self.seq_len;
        self.data[((layer * self.n_heads + head) * s + row) * s + col]
    }

    /// One attention row.
    pub fn row(&self, layer: usize, head: usize, row: usize) -> &[f64] {
        let s = self.seq_len;
        let start = ((layer * self.n_heads + head) * s + row) * s;
        &self.data[start..start + s]
    }

    /// Returns a copy with the head axis reordered: head `h` of the result is
    /// head `order[h]` of `self`.
    pub fn permute_heads(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.n_heads, "head permutation has wrong length");
        let block = self.seq_len * self.seq_len;
        let mut data = Vec::with_capacity(self.data.len());
        for layer in 0..self.n_layers {
            for &src in order {
                let start = (layer * self.n_heads + src) * block;
                data.extend_from_slice(&self.data[start..start + block]);
            }
        }
        Self { data, ..*self }
    }
}

/// A whole bundle held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub header: BundleHeader,
    pub entries: Vec<(SentenceRecord, AttentionTensor)>,
}

impl Bundle {
    /// Builds a bundle, assigning each record's `attn_offset` and `attn_bytes`
    /// so the tensors tile the blob in order.
    pub fn new(
        header: BundleHeader,
        mut entries: Vec<(SentenceRecord, AttentionTensor)>,
    ) -> Result<Self, BundleError> {
        header.check()?;
        let mut offset = 0u64;
        for (record, tensor) in &mut entries {
            check_tensor_dims(&header, record, tensor)?;
            record.attn_offset = offset;
            record.attn_bytes = header.tensor_bytes(record.seq_len);
            offset += record.attn_bytes;
        }
        Ok(Self { header, entries })
    }

    pub fn records(&self) -> impl Iterator<Item = &SentenceRecord> {
        self.entries.iter().map(|(r, _)| r)
    }
}

pub(crate) fn check_tensor_dims(
    header: &BundleHeader,
    record: &SentenceRecord,
    tensor: &AttentionTensor,
) -> Result<(), BundleError> {
    if tensor.n_layers != header.n_layers
        || tensor.n_heads != header.n_heads
        || tensor.seq_len != record.seq_len
    {
        return Err(BundleError::DimensionMismatch {
            record: record.id.clone(),
            detail: format!(
                "tensor shape ({}, {}, {}, {}) but header/record expect ({}, {}, {}, {})",
                tensor.n_layers,
                tensor.n_heads,
                tensor.seq_len,
                tensor.seq_len,
                header.n_layers,
                header.n_heads,
                record.seq_len,
                record.seq_len
            ),
        });
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("missing bundle file {0}")]
    MissingFile(PathBuf),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {file}{}: {source}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Json {
        file: &'static str,
        line: Option<usize>,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported format_version {0:?} (expected \"1\")")]
    UnsupportedVersion(String),
    #[error("invalid header: {0}")]
    BadHeader(String),
    #[error("invalid tensor: {0}")]
    BadTensor(String),
    #[error("record {record}: dimension mismatch: {detail}")]
    DimensionMismatch { record: String, detail: String },
    #[error("record {record}: invalid record: {detail}")]
    InvalidRecord { record: String, detail: String },
    #[error("record {record}: truncated blob (needs bytes {start}..{end}, attn.bin has {available})")]
    TruncatedBlob {
        record: String,
        start: u64,
        end: u64,
        available: u64,
    },
    #[error("record {record}: offset {offset} overlaps the previous record (expected {expected})")]
    OffsetOverlap {
        record: String,
        offset: u64,
        expected: u64,
    },
    #[error("record {record}: offset {offset} leaves a gap after the previous record (expected {expected})")]
    OffsetGap {
        record: String,
        offset: u64,
        expected: u64,
    },
    #[error("attn.bin has {extra} trailing bytes not owned by any record")]
    TrailingBytes { extra: u64 },
    #[error("bundle has no records")]
    Empty,
    #[error("invalid fixture request: {0}")]
    FixtureRequest(String),
}

impl BundleError {
    /// True for errors caused by the filesystem rather than bundle content.
    pub fn is_io(&self) -> bool {
        matches!(self, BundleError::MissingFile(_) | BundleError::Io { .. })
    }
}
