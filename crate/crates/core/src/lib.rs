//! Lexical-category analysis of transformer attention.
//!
//! Given per-layer, per-head attention for a tagged corpus, `lexattn` finds
//! the word each word attends to most (ignoring itself and special tokens),
//! classifies that word as a content or function word, and reports how the
//! selections split at every layer.
//!
//! - [`interchange`]: the on-disk bundle (header, records, raw tensor blob).
//! - [`lexcat`]: Penn Treebank tag → content / function / other.
//! - [`extract`]: the reduction pipeline, tallies and ratios.
//! - [`report`]: comparison tables, layer rankings, SVG bar charts.
//!
//! ```
//! use lexattn::extract::{analyze, Measure};
//! use lexattn::interchange::{gen_fixture, FixtureDims};
//! use lexattn::lexcat::default_category_map;
//!
//! let bundle = gen_fixture(7, 50, FixtureDims { layers: 4, heads: 2, max_seq: 10 })?;
//! let result = analyze(&bundle, &default_category_map(), Measure::Lift)?;
//! assert_eq!(result.layers.len(), 4);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod extract;
pub mod interchange;
pub mod lexcat;
pub mod report;

pub use extract::{analyze, analyze_bundle, AnalysisResult, Measure};
pub use interchange::{read_bundle, validate_bundle, write_bundle, Bundle, BundleHeader};
pub use lexcat::{default_category_map, CategoryMap, LexicalCategory};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/bundles.md")]
    mod bundles {}
    #[doc = include_str!("../../../book/src/categories.md")]
    mod categories {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/measures.md")]
    mod measures {}
    #[doc = include_str!("../../../book/src/reports.md")]
    mod reports {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
