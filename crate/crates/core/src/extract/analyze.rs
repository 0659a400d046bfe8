use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    compute_ratios, exclude_special_tokens, mean_over_heads, merge_subtokens, tally_record,
    CategoryCounts, CategoryPair, ExtractError, LayerCategoryCounts, LayerRatios, Measure,
};
use crate::interchange::{
    check_tensor_dims, read_bundle, AttentionTensor, Bundle, BundleError, BundleHeader,
    SentenceRecord,
};
use crate::lexcat::{CategoryMap, LexicalCategory};

pub const REASON_NO_CONTENT_TOKENS: &str = "no content tokens";
pub const REASON_SINGLE_WORD: &str = "single word";

/// Records decoded per parallel batch. Bounds memory while streaming.
const BATCH: usize = 256;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SkippedRecord {
    pub record_id: String,
    pub reason: String,
}

/// One layer's tallies and both measures. `layer` counts from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub layer: usize,
    pub counts: CategoryCounts,
    pub proportion: Option<CategoryPair>,
    pub lift: Option<CategoryPair>,
}

impl LayerReport {
    pub fn ratios(&self) -> LayerRatios {
        LayerRatios { proportion: self.proportion, lift: self.lift }
    }
}

/// Output of a corpus analysis; serializes to the analysis JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub model_id: String,
    pub n_layers: usize,
    pub n_heads: usize,
    /// The measure that was required to be defined on every layer.
    pub measure: Measure,
    pub n_records: usize,
    pub occurrences: CategoryCounts,
    pub layers: Vec<LayerReport>,
    /// Source words that had no other word to select, summed over layers.
    pub skipped_words: u64,
    pub skipped: Vec<SkippedRecord>,
}

impl AnalysisResult {
    /// Value of `measure` for `category` at a 1-based layer.
    pub fn value(&self, layer: usize, measure: Measure, category: LexicalCategory) -> Option<f64> {
        let report = self.layers.get(layer.checked_sub(1)?)?;
        report.ratios().get(measure)?.get(category)
    }

    pub fn counts(&self) -> LayerCategoryCounts {
        LayerCategoryCounts {
            layers: self.layers.iter().map(|l| l.counts).collect(),
            occurrences: self.occurrences,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("analysis serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

enum Outcome {
    Counted { counts: LayerCategoryCounts, skipped_words: u64, note: Option<SkippedRecord> },
    Skipped(SkippedRecord),
}

fn process(record: &SentenceRecord, tensor: &AttentionTensor, map: &CategoryMap) -> Outcome {
    let heads = mean_over_heads(tensor);
    let tokens = match exclude_special_tokens(&heads, record) {
        Ok(m) => m,
        Err(_) => {
            return Outcome::Skipped(SkippedRecord {
                record_id: record.id.clone(),
                reason: REASON_NO_CONTENT_TOKENS.to_string(),
            })
        }
    };
    let words = merge_subtokens(&tokens, record);
    let tally = tally_record(&words, record, map);
    let note = (record.n_words() == 1).then(|| SkippedRecord {
        record_id: record.id.clone(),
        reason: REASON_SINGLE_WORD.to_string(),
    });
    Outcome::Counted { counts: tally.counts, skipped_words: tally.skipped_words, note }
}

#[derive(Default)]
struct Accumulator {
    counts: LayerCategoryCounts,
    skipped_words: u64,
    skipped: Vec<SkippedRecord>,
    n_records: usize,
}

impl Accumulator {
    fn absorb(&mut self, outcome: Outcome) {
        self.n_records += 1;
        match outcome {
            Outcome::Counted { counts, skipped_words, note } => {
                self.counts.add(&counts);
                self.skipped_words += skipped_words;
                self.skipped.extend(note);
            }
            Outcome::Skipped(s) => self.skipped.push(s),
        }
    }

    fn finish(mut self, header: &BundleHeader, measure: Measure) -> Result<AnalysisResult, AnalysisError> {
        let ratios = compute_ratios(&self.counts, measure)?;
        self.skipped.sort();
        let layers = self
            .counts
            .layers
            .iter()
            .zip(ratios.layers)
            .enumerate()
            .map(|(idx, (counts, r))| LayerReport {
                layer: idx + 1,
                counts: *counts,
                proportion: r.proportion,
                lift: r.lift,
            })
            .collect();
        Ok(AnalysisResult {
            model_id: header.model_id.clone(),
            n_layers: header.n_layers,
            n_heads: header.n_heads,
            measure,
            n_records: self.n_records,
            occurrences: self.counts.occurrences,
            layers,
            skipped_words: self.skipped_words,
            skipped: self.skipped,
        })
    }
}

/// Runs the pipeline over a stream of records.
///
/// With `jobs > 1` records are processed in parallel batches; per-record
/// tallies are integers combined by addition, so the result is identical
/// for any `jobs` and any record order.
pub fn analyze_records<I>(
    header: &BundleHeader,
    records: I,
    map: &CategoryMap,
    measure: Measure,
    jobs: usize,
) -> Result<AnalysisResult, AnalysisError>
where
    I: IntoIterator<Item = Result<(SentenceRecord, AttentionTensor), BundleError>>,
{
    let mut acc = Accumulator { counts: LayerCategoryCounts::zeroed(header.n_layers), ..Default::default() };
    let mut records = records.into_iter();

    if jobs <= 1 {
        for item in records {
            let (record, tensor) = item?;
            check_tensor_dims(header, &record, &tensor)?;
            acc.absorb(process(&record, &tensor, map));
        }
        return acc.finish(header, measure);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| AnalysisError::Pool(e.to_string()))?;
    loop {
        let batch = records.by_ref().take(BATCH).collect::<Result<Vec<_>, _>>()?;
        if batch.is_empty() {
            break;
        }
        for (record, tensor) in &batch {
            check_tensor_dims(header, record, tensor)?;
        }
        let outcomes: Vec<Outcome> =
            pool.install(|| batch.par_iter().map(|(r, t)| process(r, t, map)).collect());
        outcomes.into_iter().for_each(|o| acc.absorb(o));
    }
    acc.finish(header, measure)
}

/// Analyzes a bundle on disk, streaming its records.
pub fn analyze_bundle(
    source: &Path,
    map: &CategoryMap,
    measure: Measure,
    jobs: usize,
) -> Result<AnalysisResult, AnalysisError> {
    let reader = read_bundle(source)?;
    let header = reader.header().clone();
    analyze_records(&header, reader, map, measure, jobs)
}

/// Analyzes an in-memory bundle on the current thread.
pub fn analyze(bundle: &Bundle, map: &CategoryMap, measure: Measure) -> Result<AnalysisResult, AnalysisError> {
    analyze_records(
        &bundle.header,
        bundle.entries.iter().cloned().map(Ok),
        map,
        measure,
        1,
    )
}
