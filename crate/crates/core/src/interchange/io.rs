use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Lines, Read, Write};
use std::path::{Path, PathBuf};

use super::{
    check_tensor_dims, AttentionTensor, Bundle, BundleError, BundleHeader, SentenceRecord,
    BLOB_FILE, META_FILE, RECORDS_FILE, SCALAR_BYTES,
};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::Io { path: path.to_path_buf(), source }
}

fn open(path: &Path) -> Result<File, BundleError> {
    File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            BundleError::MissingFile(path.to_path_buf())
        } else {
            BundleError::Io { path: path.to_path_buf(), source: e }
        }
    })
}

/// Writes `records` as a bundle under `destination`, creating the directory
/// if needed.
///
/// Offsets are assigned here: each record's `attn_offset`/`attn_bytes` in the
/// output reflect where its tensor landed, whatever the input records held.
/// Scalars are narrowed to `f32`.
pub fn write_bundle(
    header: &BundleHeader,
    records: &[(SentenceRecord, AttentionTensor)],
    destination: &Path,
) -> Result<(), BundleError> {
    header.check()?;
    if records.is_empty() {
        return Err(BundleError::Empty);
    }
    for (record, tensor) in records {
        check_tensor_dims(header, record, tensor)?;
    }

    std::fs::create_dir_all(destination).map_err(io_err(destination))?;

    let meta_path = destination.join(META_FILE);
    let meta = serde_json::to_string_pretty(header).expect("header serializes");
    std::fs::write(&meta_path, meta + "\n").map_err(io_err(&meta_path))?;

    let records_path = destination.join(RECORDS_FILE);
    let blob_path = destination.join(BLOB_FILE);
    let mut lines =
        BufWriter::new(File::create(&records_path).map_err(io_err(&records_path))?);
    let mut blob = BufWriter::new(File::create(&blob_path).map_err(io_err(&blob_path))?);

    let mut offset = 0u64;
    for (record, tensor) in records {
        let mut record = record.clone();
        record.attn_offset = offset;
        record.attn_bytes = header.tensor_bytes(record.seq_len);
        offset += record.attn_bytes;

        let line = serde_json::to_string(&record).expect("record serializes");
        writeln!(lines, "{line}").map_err(io_err(&records_path))?;
        for &x in tensor.as_slice() {
            blob.write_all(&(x as f32).to_le_bytes()).map_err(io_err(&blob_path))?;
        }
    }
    lines.flush().map_err(io_err(&records_path))?;
    blob.flush().map_err(io_err(&blob_path))?;
    Ok(())
}

impl Bundle {
    pub fn write_to(&self, destination: &Path) -> Result<(), BundleError> {
        write_bundle(&self.header, &self.entries, destination)
    }

    /// Reads a whole bundle into memory.
    pub fn read_from(source: &Path) -> Result<Self, BundleError> {
        let reader = read_bundle(source)?;
        let header = reader.header().clone();
        let entries = reader.collect::<Result<Vec<_>, _>>()?;
        Ok(Self { header, entries })
    }
}

pub(crate) fn read_header(source: &Path) -> Result<BundleHeader, BundleError> {
    let meta_path = source.join(META_FILE);
    let mut text = String::new();
    open(&meta_path)?
        .read_to_string(&mut text)
        .map_err(io_err(&meta_path))?;
    let header: BundleHeader = serde_json::from_str(&text)
        .map_err(|source| BundleError::Json { file: META_FILE, line: None, source })?;
    header.check()?;
    Ok(header)
}

/// Opens a bundle for forward-only reading.
///
/// The header is parsed eagerly. Records and their tensors are decoded one at
/// a time as the returned iterator advances, so memory use is bounded by the
/// largest single record.
pub fn read_bundle(source: &Path) -> Result<BundleReader, BundleError> {
    if !source.is_dir() {
        return Err(BundleError::MissingFile(source.to_path_buf()));
    }
    let header = read_header(source)?;
    let records_path = source.join(RECORDS_FILE);
    let blob_path = source.join(BLOB_FILE);
    let lines = BufReader::new(open(&records_path)?).lines();
    let blob_file = open(&blob_path)?;
    let blob_len = blob_file.metadata().map_err(io_err(&blob_path))?.len();

    Ok(BundleReader {
        header,
        records_path,
        blob_path,
        lines,
        line_no: 0,
        blob: BufReader::new(blob_file),
        blob_len,
        next_offset: 0,
        seen_ids: HashSet::new(),
        yielded: 0,
        finished: false,
    })
}

/// Lazy, order-preserving record stream over a bundle on disk.
///
/// Stops after the first error.
pub struct BundleReader {
    header: BundleHeader,
    records_path: PathBuf,
    blob_path: PathBuf,
    lines: Lines<BufReader<File>>,
    line_no: usize,
    blob: BufReader<File>,
    blob_len: u64,
    next_offset: u64,
    seen_ids: HashSet<String>,
    yielded: usize,
    finished: bool,
}

impl BundleReader {
    pub fn header(&self) -> &BundleHeader {
        &self.header
    }

    fn next_line(&mut self) -> Option<Result<String, BundleError>> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(io_err(&self.records_path)(e))),
            };
            self.line_no += 1;
            if !line.trim().is_empty() {
                return Some(Ok(line));
            }
        }
    }

    fn finish(&mut self) -> Option<Result<(SentenceRecord, AttentionTensor), BundleError>> {
        self.finished = true;
        if self.yielded == 0 {
            return Some(Err(BundleError::Empty));
        }
        if self.blob_len > self.next_offset {
            return Some(Err(BundleError::TrailingBytes { extra: self.blob_len - self.next_offset }));
        }
        None
    }

    fn decode(&mut self, line: &str) -> Result<(SentenceRecord, AttentionTensor), BundleError> {
        let record: SentenceRecord = serde_json::from_str(line).map_err(|source| {
            BundleError::Json { file: RECORDS_FILE, line: Some(self.line_no), source }
        })?;

        if !self.seen_ids.insert(record.id.clone()) {
            return Err(BundleError::InvalidRecord {
                record: record.id,
                detail: "duplicate id".to_string(),
            });
        }
        if let Some((_, detail)) = record.structural_problems().into_iter().next() {
            return Err(BundleError::InvalidRecord { record: record.id, detail });
        }
        let expected_bytes = self.header.tensor_bytes(record.seq_len);
        if record.attn_bytes != expected_bytes {
            return Err(BundleError::DimensionMismatch {
                record: record.id,
                detail: format!(
                    "attn_bytes is {} but n_layers x n_heads x seq_len^2 x 4 = {expected_bytes}",
                    record.attn_bytes
                ),
            });
        }
        if record.attn_offset < self.next_offset {
            return Err(BundleError::OffsetOverlap {
                record: record.id,
                offset: record.attn_offset,
                expected: self.next_offset,
            });
        }
        if record.attn_offset > self.next_offset {
            return Err(BundleError::OffsetGap {
                record: record.id,
                offset: record.attn_offset,
                expected: self.next_offset,
            });
        }
        let end = record.attn_offset + record.attn_bytes;
        if end > self.blob_len {
            return Err(BundleError::TruncatedBlob {
                record: record.id,
                start: record.attn_offset,
                end,
                available: self.blob_len,
            });
        }

        let mut raw = vec![0u8; record.attn_bytes as usize];
        self.blob.read_exact(&mut raw).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                BundleError::TruncatedBlob {
                    record: record.id.clone(),
                    start: record.attn_offset,
                    end,
                    available: self.blob_len,
                }
            } else {
                io_err(&self.blob_path)(e)
            }
        })?;
        self.next_offset = end;

        let data = raw
            .chunks_exact(SCALAR_BYTES as usize)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        let tensor = AttentionTensor::new(
            self.header.n_layers,
            self.header.n_heads,
            record.seq_len,
            data,
        )?;
        Ok((record, tensor))
    }
}

impl Iterator for BundleReader {
    type Item = Result<(SentenceRecord, AttentionTensor), BundleError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        let line = match self.next_line() {
            None => return self.finish(),
            Some(Err(e)) => {
                self.finished = true;
                return Some(Err(e));
            }
            Some(Ok(line)) => line,
        };
        let item = self.decode(&line);
        match item {
            Ok(_) => self.yielded += 1,
            Err(_) => self.finished = true,
        }
        Some(item)
    }
}
