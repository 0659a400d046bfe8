//! Penn Treebank tags to lexical categories.
//!
//! Function words carry grammatical structure; content words carry meaning.
//! Tags in neither set (punctuation, `SYM`, `LS`, `$`, quotation marks...)
//! fall back to [`LexicalCategory::Other`].

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_FUNCTION_TAGS: &[&str] = &[
    "CC", "MD", "DT", "EX", "IN", "PDT", "POS", "TO", "WDT", "WP", "WP$", "WRB", "RP",
];

pub const DEFAULT_CONTENT_TAGS: &[&str] = &[
    "NN", "NNS", "NNP", "NNPS", "CD", "FW", "JJ", "JJR", "JJS", "PRP", "PRP$", "RB", "RBR", "RBS",
    "VB", "VBD", "VBG", "VBP", "VBZ", "VBN", "UH",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexicalCategory {
    Content,
    Function,
    Other,
}

impl LexicalCategory {
    pub const ALL: [LexicalCategory; 3] =
        [LexicalCategory::Content, LexicalCategory::Function, LexicalCategory::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            LexicalCategory::Content => "content",
            LexicalCategory::Function => "function",
            LexicalCategory::Other => "other",
        }
    }
}

impl fmt::Display for LexicalCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum CategoryMapError {
    #[error("cannot read category map {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed category map: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("tags listed as both function and content: {}", .0.join(", "))]
    Overlap(Vec<String>),
}

/// Serialized form: `{"function": [...], "content": [...]}`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CategoryMapFile {
    function: Vec<String>,
    content: Vec<String>,
}

/// An immutable tag → category lookup with disjoint function and content
/// sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryMap {
    function_tags: BTreeSet<String>,
    content_tags: BTreeSet<String>,
}

impl Default for CategoryMap {
    fn default() -> Self {
        default_category_map()
    }
}

/// The standard split: 13 function tags and 21 content tags.
pub fn default_category_map() -> CategoryMap {
    CategoryMap {
        function_tags: DEFAULT_FUNCTION_TAGS.iter().map(|t| t.to_string()).collect(),
        content_tags: DEFAULT_CONTENT_TAGS.iter().map(|t| t.to_string()).collect(),
    }
}

/// Reads a user override file.
pub fn load_category_map(path: &Path) -> Result<CategoryMap, CategoryMapError> {
    let text = std::fs::read_to_string(path).map_err(|source| CategoryMapError::Io {
        path: path.display().to_string(),
        source,
    })?;
    CategoryMap::from_json(&text)
}

impl CategoryMap {
    pub fn new<F, C>(function: F, content: C) -> Result<Self, CategoryMapError>
    where
        F: IntoIterator,
        F::Item: Into<String>,
        C: IntoIterator,
        C::Item: Into<String>,
    {
        let function_tags: BTreeSet<String> = function.into_iter().map(Into::into).collect();
        let content_tags: BTreeSet<String> = content.into_iter().map(Into::into).collect();
        let overlap: Vec<String> = function_tags.intersection(&content_tags).cloned().collect();
        if !overlap.is_empty() {
            return Err(CategoryMapError::Overlap(overlap));
        }
        Ok(Self { function_tags, content_tags })
    }

    pub fn from_json(text: &str) -> Result<Self, CategoryMapError> {
        let file: CategoryMapFile = serde_json::from_str(text)?;
        Self::new(file.function, file.content)
    }

    /// Serializes in the override-file format, tags sorted.
    pub fn to_json(&self) -> String {
        let file = CategoryMapFile {
            function: self.function_tags.iter().cloned().collect(),
            content: self.content_tags.iter().cloned().collect(),
        };
        serde_json::to_string_pretty(&file).expect("map serializes")
    }

    pub fn function_tags(&self) -> &BTreeSet<String> {
        &self.function_tags
    }

    pub fn content_tags(&self) -> &BTreeSet<String> {
        &self.content_tags
    }

    /// Case-sensitive exact lookup; anything unlisted is `Other`.
    pub fn category(&self, tag: &str) -> LexicalCategory {
        if self.function_tags.contains(tag) {
            LexicalCategory::Function
        } else if self.content_tags.contains(tag) {
            LexicalCategory::Content
        } else {
            LexicalCategory::Other
        }
    }
}

pub fn map_category(map: &CategoryMap, tag: &str) -> LexicalCategory {
    map.category(tag)
}
