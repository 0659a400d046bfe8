//! Straight-line reference for the analysis pipeline.
//!
//! Works directly on the raw 4-d tensor with nested loops and its own copy
//! of the tag tables; shares nothing with the library's reduction code.
//! Arithmetic order follows the definitions literally (heads summed in
//! order then divided; subtoken pairs summed source-major then divided) so
//! results are comparable bit for bit.

#![allow(dead_code, clippy::needless_range_loop)]

use lexattn::interchange::Bundle;

const FUNCTION: &[&str] = &[
    "CC", "MD", "DT", "EX", "IN", "PDT", "POS", "TO", "WDT", "WP", "WP$", "WRB", "RP",
];
const CONTENT: &[&str] = &[
    "NN", "NNS", "NNP", "NNPS", "CD", "FW", "JJ", "JJR", "JJS", "PRP", "PRP$", "RB", "RBR", "RBS",
    "VB", "VBD", "VBG", "VBP", "VBZ", "VBN", "UH",
];

/// 0 = content, 1 = function, 2 = other.
pub fn category_index(tag: &str) -> usize {
    if FUNCTION.contains(&tag) {
        1
    } else if CONTENT.contains(&tag) {
        0
    } else {
        2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveLayer {
    pub counts: [u64; 3],
    pub proportion: Option<[f64; 2]>,
    pub lift: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveResult {
    pub occurrences: [u64; 3],
    pub layers: Vec<NaiveLayer>,
    pub skipped_words: u64,
    pub skipped_records: usize,
}

/// The two-step rule as it is usually stated: plain argmax (first maximum), and if that
/// lands on the word itself, argmax again with it removed.
pub fn two_step_select(row: &[f64], self_index: usize) -> Option<usize> {
    if row.len() < 2 {
        return None;
    }
    let argmax = |skip: Option<usize>| {
        let mut best: Option<usize> = None;
        for i in 0..row.len() {
            if Some(i) == skip {
                continue;
            }
            if best.is_none() || row[i] > row[best.unwrap()] {
                best = Some(i);
            }
        }
        best.unwrap()
    };
    let first = argmax(None);
    if first == self_index {
        Some(argmax(Some(self_index)))
    } else {
        Some(first)
    }
}

pub fn naive_analyze(bundle: &Bundle) -> NaiveResult {
    let n_layers = bundle.header.n_layers;
    let n_heads = bundle.header.n_heads;
    let mut counts = vec![[0u64; 3]; n_layers];
    let mut occurrences = [0u64; 3];
    let mut skipped_words = 0;
    let mut skipped_records = 0;

    for (record, tensor) in &bundle.entries {
        let s = record.seq_len;
        let wi = &record.word_index;
        if wi.iter().all(|w| w.is_none()) {
            skipped_records += 1;
            continue;
        }
        let n_words = record.words.len();
        let cats: Vec<usize> = record.pos_tags.iter().map(|t| category_index(t)).collect();
        for &c in &cats {
            occurrences[c] += 1;
        }
        if n_words == 1 {
            skipped_records += 1;
        }
        let raw = tensor.as_slice();

        for l in 0..n_layers {
            for u in 0..n_words {
                let mut scores = vec![0.0f64; n_words];
                for v in 0..n_words {
                    let mut sum = 0.0;
                    let mut nu = 0usize;
                    let mut nv = 0usize;
                    for i in 0..s {
                        if wi[i] == Some(u) {
                            nu += 1;
                        }
                        if wi[i] == Some(v) {
                            nv += 1;
                        }
                    }
                    for i in 0..s {
                        if wi[i] != Some(u) {
                            continue;
                        }
                        for j in 0..s {
                            if wi[j] != Some(v) {
                                continue;
                            }
                            let mut head_sum = 0.0;
                            for h in 0..n_heads {
                                head_sum += raw[((l * n_heads + h) * s + i) * s + j];
                            }
                            sum += head_sum / n_heads as f64;
                        }
                    }
                    scores[v] = sum / (nu * nv) as f64;
                }
                let mut best: Option<usize> = None;
                for v in 0..n_words {
                    if v == u {
                        continue;
                    }
                    match best {
                        None => best = Some(v),
                        Some(b) if scores[v] > scores[b] => best = Some(v),
                        _ => {}
                    }
                }
                match best {
                    Some(v) => counts[l][cats[v]] += 1,
                    None => skipped_words += 1,
                }
            }
        }
    }

    let n = (occurrences[0] + occurrences[1]) as f64;
    let layers = counts
        .into_iter()
        .map(|c| {
            let total = (c[0] + c[1]) as f64;
            let proportion = (total > 0.0).then(|| [c[0] as f64 / total, c[1] as f64 / total]);
            let lift = proportion.filter(|_| n > 0.0).map(|p| {
                let one = |k: usize| {
                    if occurrences[k] == 0 {
                        0.0
                    } else {
                        p[k] / (occurrences[k] as f64 / n)
                    }
                };
                [one(0), one(1)]
            });
            NaiveLayer { counts: c, proportion, lift }
        })
        .collect();
    NaiveResult { occurrences, layers, skipped_words, skipped_records }
}

/// Compares a library result against the oracle: counts exactly, ratios
/// within `tol`. Returns a description of the first difference.
pub fn diff(result: &lexattn::AnalysisResult, naive: &NaiveResult, tol: f64) -> Option<String> {
    let occ = [result.occurrences.content, result.occurrences.function, result.occurrences.other];
    if occ != naive.occurrences {
        return Some(format!("occurrences {occ:?} vs {:?}", naive.occurrences));
    }
    if result.skipped_words != naive.skipped_words {
        return Some(format!("skipped_words {} vs {}", result.skipped_words, naive.skipped_words));
    }
    if result.skipped.len() != naive.skipped_records {
        return Some(format!("skipped records {} vs {}", result.skipped.len(), naive.skipped_records));
    }
    if result.layers.len() != naive.layers.len() {
        return Some("layer count differs".into());
    }
    let close = |a: Option<lexattn::extract::CategoryPair>, b: Option<[f64; 2]>| match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => (a.content - b[0]).abs() <= tol && (a.function - b[1]).abs() <= tol,
        _ => false,
    };
    for (l, (got, want)) in result.layers.iter().zip(&naive.layers).enumerate() {
        let c = [got.counts.content, got.counts.function, got.counts.other];
        if c != want.counts {
            return Some(format!("layer {}: counts {c:?} vs {:?}", l + 1, want.counts));
        }
        if !close(got.proportion, want.proportion) {
            return Some(format!("layer {}: proportion {:?} vs {:?}", l + 1, got.proportion, want.proportion));
        }
        if !close(got.lift, want.lift) {
            return Some(format!("layer {}: lift {:?} vs {:?}", l + 1, got.lift, want.lift));
        }
    }
    None
}
