use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom};
use std::path::Path;

use serde::Serialize;

use super::io::read_header;
use super::{BundleError, BundleHeader, SentenceRecord, BLOB_FILE, RECORDS_FILE, SCALAR_BYTES};

/// Scalars may stray this far outside `[0, 1]`.
pub const RANGE_TOLERANCE: f64 = 1e-4;
/// Row-sum tolerance in the default mode.
pub const ROW_SUM_TOLERANCE: f64 = 1e-2;
/// Row-sum tolerance under `--strict`.
pub const STRICT_ROW_SUM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// A bundle file is missing or unreadable.
    Unreadable,
    Header,
    MalformedRecord,
    DuplicateId,
    Shape,
    WordIndex,
    Surjectivity,
    AttnBytes,
    OffsetOverlap,
    OffsetGap,
    TruncatedBlob,
    TrailingBytes,
    ValueRange,
    RowStochastic,
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub record_id: Option<String>,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = serde_json::to_value(self.kind).expect("kind serializes");
        let kind = kind.as_str().unwrap_or("violation");
        match &self.record_id {
            Some(id) => write!(f, "record {id}: {kind}: {}", self.message),
            None => write!(f, "bundle: {kind}: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// True when the bundle could not be opened at all.
    pub fn is_unreadable(&self) -> bool {
        self.violations.iter().any(|v| v.kind == ViolationKind::Unreadable)
    }

    fn push(&mut self, record_id: Option<&str>, kind: ViolationKind, message: impl Into<String>) {
        self.violations.push(Violation {
            record_id: record_id.map(str::to_string),
            kind,
            message: message.into(),
        });
    }
}

/// Checks every invariant of the bundle format and reports all violations.
///
/// Never fails: unreadable files show up as [`ViolationKind::Unreadable`].
/// Rows must sum to one within 1e-2, or 1e-3 when `strict` is set.
pub fn validate_bundle(source: &Path, strict: bool) -> ValidationReport {
    let mut report = ValidationReport::default();

    if !source.is_dir() {
        report.push(None, ViolationKind::Unreadable, format!("{} is not a directory", source.display()));
        return report;
    }
    let header = match read_header(source) {
        Ok(h) => h,
        Err(e) => {
            let kind = if e.is_io() { ViolationKind::Unreadable } else { ViolationKind::Header };
            report.push(None, kind, e.to_string());
            return report;
        }
    };
    let records_path = source.join(RECORDS_FILE);
    let records = match File::open(&records_path) {
        Ok(f) => BufReader::new(f),
        Err(e) => {
            report.push(None, ViolationKind::Unreadable, format!("{}: {e}", records_path.display()));
            return report;
        }
    };
    let blob_path = source.join(BLOB_FILE);
    let mut blob = match File::open(&blob_path).and_then(|f| Ok((f.metadata()?.len(), f))) {
        Ok((len, f)) => (f, len),
        Err(e) => {
            report.push(None, ViolationKind::Unreadable, format!("{}: {e}", blob_path.display()));
            return report;
        }
    };

    let tolerance = if strict { STRICT_ROW_SUM_TOLERANCE } else { ROW_SUM_TOLERANCE };
    let mut seen = HashSet::new();
    let mut expected_offset = 0u64;
    let mut n_records = 0usize;

    for (line_no, line) in records.lines().enumerate() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                report.push(None, ViolationKind::Unreadable, format!("{RECORDS_FILE}: {e}"));
                return report;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        n_records += 1;
        let record: SentenceRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                report.push(
                    None,
                    ViolationKind::MalformedRecord,
                    format!("{RECORDS_FILE} line {}: {e}", line_no + 1),
                );
                continue;
            }
        };
        let id = record.id.as_str();
        if !seen.insert(record.id.clone()) {
            report.push(Some(id), ViolationKind::DuplicateId, "id appears more than once");
        }
        for (kind, message) in record.structural_problems() {
            report.push(Some(id), kind, message);
        }

        let expected_bytes = header.tensor_bytes(record.seq_len);
        if record.attn_bytes != expected_bytes {
            report.push(
                Some(id),
                ViolationKind::AttnBytes,
                format!("attn_bytes is {}, expected {expected_bytes}", record.attn_bytes),
            );
        }
        if record.attn_offset < expected_offset {
            report.push(
                Some(id),
                ViolationKind::OffsetOverlap,
                format!("offset {} overlaps previous record (expected {expected_offset})", record.attn_offset),
            );
        } else if record.attn_offset > expected_offset {
            report.push(
                Some(id),
                ViolationKind::OffsetGap,
                format!("offset {} leaves a gap (expected {expected_offset})", record.attn_offset),
            );
        }
        let end = record.attn_offset.saturating_add(record.attn_bytes);
        expected_offset = end;

        if end > blob.1 {
            report.push(
                Some(id),
                ViolationKind::TruncatedBlob,
                format!("needs bytes {}..{end}, {BLOB_FILE} has {}", record.attn_offset, blob.1),
            );
            continue;
        }
        if record.attn_bytes == expected_bytes && record.seq_len > 0 {
            match read_scalars(&mut blob.0, record.attn_offset, record.attn_bytes) {
                Ok(values) => check_values(&header, &record, &values, tolerance, &mut report),
                Err(e) => report.push(Some(id), ViolationKind::Unreadable, e.to_string()),
            }
        }
    }

    if n_records == 0 {
        report.push(None, ViolationKind::Empty, "bundle has no records");
    }
    if blob.1 > expected_offset {
        report.push(
            None,
            ViolationKind::TrailingBytes,
            format!("{} bytes after the last record", blob.1 - expected_offset),
        );
    }
    report
}

fn read_scalars(blob: &mut File, offset: u64, bytes: u64) -> Result<Vec<f64>, BundleError> {
    let mut raw = vec![0u8; bytes as usize];
    blob.seek(SeekFrom::Start(offset))
        .and_then(|_| blob.read_exact(&mut raw))
        .map_err(|source| BundleError::Io { path: BLOB_FILE.into(), source })?;
    Ok(raw
        .chunks_exact(SCALAR_BYTES as usize)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect())
}

fn check_values(
    header: &BundleHeader,
    record: &SentenceRecord,
    values: &[f64],
    tolerance: f64,
    report: &mut ValidationReport,
) {
    let id = Some(record.id.as_str());
    let out_of_range = values
        .iter()
        .filter(|x| !(-RANGE_TOLERANCE..=1.0 + RANGE_TOLERANCE).contains(*x))
        .count();
    if out_of_range > 0 {
        report.push(
            id,
            ViolationKind::ValueRange,
            format!("{out_of_range} scalars outside [0, 1]"),
        );
    }

    let s = record.seq_len;
    for (row_idx, row) in values.chunks_exact(s).enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > tolerance {
            let layer = row_idx / (header.n_heads * s);
            let head = (row_idx / s) % header.n_heads;
            let r = row_idx % s;
            report.push(
                id,
                ViolationKind::RowStochastic,
                format!("layer {} head {head} row {r} sums to {sum}", layer + 1),
            );
        }
    }
}
