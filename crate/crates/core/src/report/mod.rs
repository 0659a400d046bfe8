//! Comparison tables, layer rankings and bar charts built from
//! [`AnalysisResult`]s.
//!
//! All emitters are deterministic: the same inputs give the same bytes.

mod svg;

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{AnalysisResult, Measure};
use crate::lexcat::LexicalCategory;

pub use svg::{render_bar_chart, ChartPanel, Y_MAX};

/// The two categories every report covers, in output order.
pub const REPORTED: [LexicalCategory; 2] = [LexicalCategory::Content, LexicalCategory::Function];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("structural mismatch: baseline has {baseline} layers, comparison has {other}")]
    LayerMismatch { baseline: usize, other: usize },
    #[error("layer {layer} out of range 1..={n_layers}")]
    LayerOutOfRange { layer: usize, n_layers: usize },
    #[error("measure {measure} is undefined at layer {layer} of {model_id}")]
    MeasureUnavailable { model_id: String, layer: usize, measure: Measure },
    #[error("expected one or two results, got {0}")]
    PanelCount(usize),
}

/// Which layers a report looks at. Layers count from 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LayerSelector {
    #[default]
    Last,
    All,
    Index(usize),
}

impl LayerSelector {
    pub fn resolve(self, n_layers: usize) -> Result<Vec<usize>, ReportError> {
        match self {
            LayerSelector::Last => Ok(vec![n_layers]),
            LayerSelector::All => Ok((1..=n_layers).collect()),
            LayerSelector::Index(l) if (1..=n_layers).contains(&l) => Ok(vec![l]),
            LayerSelector::Index(layer) => Err(ReportError::LayerOutOfRange { layer, n_layers }),
        }
    }
}

impl fmt::Display for LayerSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSelector::Last => f.write_str("last"),
            LayerSelector::All => f.write_str("all"),
            LayerSelector::Index(l) => write!(f, "{l}"),
        }
    }
}

impl FromStr for LayerSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "last" => Ok(LayerSelector::Last),
            "all" => Ok(LayerSelector::All),
            n => match n.parse::<usize>() {
                Ok(l) if l >= 1 => Ok(LayerSelector::Index(l)),
                _ => Err(format!("invalid layer {s:?} (expected last, all, or a layer number from 1)")),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increase,
    Decrease,
    Unchanged,
}

impl Direction {
    fn of(delta: f64) -> Self {
        if delta > 0.0 {
            Direction::Increase
        } else if delta < 0.0 {
            Direction::Decrease
        } else {
            Direction::Unchanged
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub layer: usize,
    pub category: LexicalCategory,
    pub baseline: f64,
    pub comparison: f64,
    pub delta: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub baseline_model: String,
    pub comparison_model: String,
    pub measure: Measure,
    pub layer: String,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn row(&self, layer: usize, category: LexicalCategory) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.layer == layer && r.category == category)
    }

    fn single_layer(&self) -> bool {
        let first = self.rows.first().map(|r| r.layer);
        self.rows.iter().all(|r| Some(r.layer) == first)
    }
}

fn value_at(result: &AnalysisResult, layer: usize, measure: Measure, category: LexicalCategory) -> Result<f64, ReportError> {
    result.value(layer, measure, category).ok_or_else(|| ReportError::MeasureUnavailable {
        model_id: result.model_id.clone(),
        layer,
        measure,
    })
}

/// Per-category shift from `baseline` to `other` at the selected layers.
pub fn compare(
    baseline: &AnalysisResult,
    other: &AnalysisResult,
    layer: LayerSelector,
    measure: Measure,
) -> Result<ComparisonReport, ReportError> {
    if baseline.n_layers != other.n_layers {
        return Err(ReportError::LayerMismatch { baseline: baseline.n_layers, other: other.n_layers });
    }
    let mut rows = Vec::new();
    for l in layer.resolve(baseline.n_layers)? {
        for category in REPORTED {
            let b = value_at(baseline, l, measure, category)?;
            let c = value_at(other, l, measure, category)?;
            let delta = c - b;
            rows.push(ComparisonRow {
                layer: l,
                category,
                baseline: b,
                comparison: c,
                delta,
                direction: Direction::of(delta),
            });
        }
    }
    Ok(ComparisonReport {
        baseline_model: baseline.model_id.clone(),
        comparison_model: other.model_id.clone(),
        measure,
        layer: layer.to_string(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedLayer {
    pub layer: usize,
    pub value: f64,
}

/// The `k` layers with the highest value per category, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRanking {
    pub model_id: String,
    pub measure: Measure,
    pub k: usize,
    pub content: Vec<RankedLayer>,
    pub function: Vec<RankedLayer>,
}

impl LayerRanking {
    pub fn for_category(&self, category: LexicalCategory) -> &[RankedLayer] {
        match category {
            LexicalCategory::Function => &self.function,
            _ => &self.content,
        }
    }
}

/// Ranks layers by `measure`, descending, ties to the lower layer. `k`
/// larger than the layer count is clipped. Layers where the measure is
/// undefined are left out.
pub fn rank_layers(result: &AnalysisResult, k: usize, measure: Measure) -> LayerRanking {
    let rank = |category: LexicalCategory| {
        let mut layers: Vec<RankedLayer> = (1..=result.n_layers)
            .filter_map(|l| result.value(l, measure, category).map(|value| RankedLayer { layer: l, value }))
            .collect();
        layers.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.layer.cmp(&b.layer)));
        layers.truncate(k);
        layers
    };
    LayerRanking {
        model_id: result.model_id.clone(),
        measure,
        k,
        content: rank(LexicalCategory::Content),
        function: rank(LexicalCategory::Function),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TableFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

/// Anything [`emit_table`] can serialize.
pub trait Table: Serialize {
    fn write_csv(&self, out: &mut String);
}

impl Table for ComparisonReport {
    fn write_csv(&self, out: &mut String) {
        let with_layer = !self.single_layer();
        if with_layer {
            out.push_str("layer,");
        }
        out.push_str("category,baseline,comparison,delta\n");
        for r in &self.rows {
            if with_layer {
                let _ = write!(out, "{},", r.layer);
            }
            let _ = writeln!(out, "{},{},{},{}", r.category, r.baseline, r.comparison, r.delta);
        }
    }
}

impl Table for LayerRanking {
    fn write_csv(&self, out: &mut String) {
        out.push_str("category,rank,layer,value\n");
        for category in REPORTED {
            for (rank, r) in self.for_category(category).iter().enumerate() {
                let _ = writeln!(out, "{category},{},{},{}", rank + 1, r.layer, r.value);
            }
        }
    }
}

pub fn emit_table<T: Table>(table: &T, format: TableFormat) -> Vec<u8> {
    match format {
        TableFormat::Csv => {
            let mut out = String::new();
            table.write_csv(&mut out);
            out.into_bytes()
        }
        TableFormat::Json => {
            let mut out = serde_json::to_vec_pretty(table).expect("table serializes");
            out.push(b'\n');
            out
        }
    }
}
