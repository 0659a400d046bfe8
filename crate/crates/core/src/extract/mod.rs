//! Which lexical category does each word attend to, layer by layer?
//!
//! For every record the pipeline is:
//!
//! 1. average attention over heads ([`mean_over_heads`]),
//! 2. drop special-token rows and columns ([`exclude_special_tokens`]),
//! 3. average subtokens into words ([`merge_subtokens`]),
//! 4. for each word, pick the most-attended *other* word
//!    ([`select_attended_word`]) and tally that word's category
//!    ([`tally_record`]).
//!
//! Tallies are summed over the corpus and normalized per layer by
//! [`compute_ratios`]. Everything runs in `f64`.

mod analyze;
mod reduce;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interchange::SentenceRecord;
use crate::lexcat::{CategoryMap, LexicalCategory};

pub use analyze::{
    analyze, analyze_bundle, analyze_records, AnalysisError, AnalysisResult, LayerReport,
    SkippedRecord, REASON_NO_CONTENT_TOKENS, REASON_SINGLE_WORD,
};
pub use reduce::{exclude_special_tokens, mean_over_heads, merge_subtokens, select_attended_word};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("record {record}: no content tokens")]
    NoContentTokens { record: String },
    #[error("empty corpus for measure {measure} at layer {layer}")]
    EmptyCorpus { layer: usize, measure: Measure },
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn from_vec(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "matrix data does not match size {n}");
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n..(row + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Submatrix on the given row/column indices.
    pub fn select(&self, keep: &[usize]) -> Self {
        let data = keep
            .iter()
            .flat_map(|&i| keep.iter().map(move |&j| self.get(i, j)))
            .collect();
        Self { n: keep.len(), data }
    }
}

/// One `n_words x n_words` matrix per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct WordLevelAttention {
    n_words: usize,
    layers: Vec<SquareMatrix>,
}

impl WordLevelAttention {
    pub fn new(n_words: usize, layers: Vec<SquareMatrix>) -> Self {
        assert!(layers.iter().all(|m| m.n() == n_words), "layer size differs from n_words");
        Self { n_words, layers }
    }

    pub fn n_words(&self) -> usize {
        self.n_words
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, layer: usize) -> &SquareMatrix {
        &self.layers[layer]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub content: u64,
    pub function: u64,
    pub other: u64,
}

impl CategoryCounts {
    pub fn get(&self, category: LexicalCategory) -> u64 {
        match category {
            LexicalCategory::Content => self.content,
            LexicalCategory::Function => self.function,
            LexicalCategory::Other => self.other,
        }
    }

    pub fn increment(&mut self, category: LexicalCategory) {
        match category {
            LexicalCategory::Content => self.content += 1,
            LexicalCategory::Function => self.function += 1,
            LexicalCategory::Other => self.other += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.content + self.function + self.other
    }

    /// Content plus function; `Other` never enters a ratio.
    pub fn lexical_total(&self) -> u64 {
        self.content + self.function
    }

    pub fn add(&mut self, other: &CategoryCounts) {
        self.content += other.content;
        self.function += other.function;
        self.other += other.other;
    }
}

/// Per-layer selection tallies plus corpus-wide word occurrences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LayerCategoryCounts {
    /// `layers[l]` holds the selections made at layer `l + 1`.
    pub layers: Vec<CategoryCounts>,
    /// Every non-special word, counted once regardless of layer.
    pub occurrences: CategoryCounts,
}

impl LayerCategoryCounts {
    pub fn zeroed(n_layers: usize) -> Self {
        Self { layers: vec![CategoryCounts::default(); n_layers], occurrences: CategoryCounts::default() }
    }

    pub fn n_selections(&self, layer: usize) -> u64 {
        self.layers[layer].total()
    }

    pub fn add(&mut self, other: &LayerCategoryCounts) {
        assert_eq!(self.layers.len(), other.layers.len(), "layer counts differ");
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.add(b);
        }
        self.occurrences.add(&other.occurrences);
    }
}

/// What one record contributes to the corpus tallies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordTally {
    pub counts: LayerCategoryCounts,
    /// Source words with no possible target, summed over layers.
    pub skipped_words: u64,
}

/// For every layer and source word, selects the most-attended other word
/// and counts its category. Also counts each word's own category once.
pub fn tally_record(
    word_attn: &WordLevelAttention,
    record: &SentenceRecord,
    map: &CategoryMap,
) -> RecordTally {
    let categories: Vec<LexicalCategory> = record.pos_tags.iter().map(|t| map.category(t)).collect();
    let mut counts = LayerCategoryCounts::zeroed(word_attn.n_layers());
    for &c in &categories {
        counts.occurrences.increment(c);
    }
    let mut skipped_words = 0;
    for (layer, tally) in counts.layers.iter_mut().enumerate() {
        let matrix = word_attn.layer(layer);
        for source in 0..word_attn.n_words() {
            match select_attended_word(matrix.row(source), source) {
                Some(target) => tally.increment(categories[target]),
                None => skipped_words += 1,
            }
        }
    }
    RecordTally { counts, skipped_words }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// Share of a layer's selections landing on the category.
    Proportion,
    /// Proportion divided by the category's share of word occurrences.
    #[default]
    Lift,
}

impl Measure {
    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Proportion => "proportion",
            Measure::Lift => "lift",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proportion" => Ok(Measure::Proportion),
            "lift" => Ok(Measure::Lift),
            other => Err(format!("unknown measure {other:?} (expected lift or proportion)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryPair {
    pub content: f64,
    pub function: f64,
}

impl CategoryPair {
    /// Only content and function are ever ratioed.
    pub fn get(&self, category: LexicalCategory) -> Option<f64> {
        match category {
            LexicalCategory::Content => Some(self.content),
            LexicalCategory::Function => Some(self.function),
            LexicalCategory::Other => None,
        }
    }
}

/// Both measures for one layer; `None` where a measure is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerRatios {
    pub proportion: Option<CategoryPair>,
    pub lift: Option<CategoryPair>,
}

impl LayerRatios {
    pub fn get(&self, measure: Measure) -> Option<CategoryPair> {
        match measure {
            Measure::Proportion => self.proportion,
            Measure::Lift => self.lift,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryRatios {
    pub layers: Vec<LayerRatios>,
}

/// Normalizes per-layer tallies.
///
/// With `F = f[content] + f[function]` and
/// `N = occ[content] + occ[function]`:
///
/// - `proportion[c] = f[c] / F`
/// - `lift[c] = proportion[c] / (occ[c] / N)`
///
/// `Other` appears in neither numerator nor denominator. A category that
/// never occurs gets lift 0 (it cannot be selected either). Both measures are
/// filled wherever defined; only `measure` must be defined on every layer.
pub fn compute_ratios(
    counts: &LayerCategoryCounts,
    measure: Measure,
) -> Result<CategoryRatios, ExtractError> {
    let occ = &counts.occurrences;
    let n = occ.lexical_total() as f64;
    let mut layers = Vec::with_capacity(counts.layers.len());
    for (idx, f) in counts.layers.iter().enumerate() {
        let total = f.lexical_total() as f64;
        let proportion = (total > 0.0).then(|| CategoryPair {
            content: f.content as f64 / total,
            function: f.function as f64 / total,
        });
        let lift = proportion.filter(|_| n > 0.0).map(|p| {
            let lift_of = |share: f64, occurrences: u64| {
                if occurrences == 0 {
                    0.0
                } else {
                    share / (occurrences as f64 / n)
                }
            };
            CategoryPair {
                content: lift_of(p.content, occ.content),
                function: lift_of(p.function, occ.function),
            }
        });
        let ratios = LayerRatios { proportion, lift };
        if ratios.get(measure).is_none() {
            return Err(ExtractError::EmptyCorpus { layer: idx + 1, measure });
        }
        layers.push(ratios);
    }
    Ok(CategoryRatios { layers })
}

/// Content prevalence implied by a pair of lift values, assuming the
/// prevalence-weighted lifts sum to one:
/// `p * lift_c + (1 - p) * lift_f = 1`.
pub fn implied_prevalence(lift_content: f64, lift_function: f64) -> Option<f64> {
    let gap = lift_content - lift_function;
    (gap != 0.0).then(|| (1.0 - lift_function) / gap)
}
