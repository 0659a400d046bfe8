//! Token-level attention down to word-level attention.

use std::ops::Range;

use super::{ExtractError, SquareMatrix, WordLevelAttention};
use crate::interchange::{AttentionTensor, SentenceRecord};

/// Averages the head axis: one `seq_len x seq_len` matrix per layer.
///
/// Heads are summed in index order, then divided by the head count.
pub fn mean_over_heads(tensor: &AttentionTensor) -> Vec<SquareMatrix> {
    let s = tensor.seq_len();
    let heads = tensor.n_heads() as f64;
    (0..tensor.n_layers())
        .map(|layer| {
            let mut sum = vec![0.0; s * s];
            for head in 0..tensor.n_heads() {
                for row in 0..s {
                    for (acc, &x) in sum[row * s..(row + 1) * s].iter_mut().zip(tensor.row(layer, head, row)) {
                        *acc += x;
                    }
                }
            }
            sum.iter_mut().for_each(|x| *x /= heads);
            SquareMatrix::from_vec(s, sum)
        })
        .collect()
}

/// Drops every row and column belonging to a special token.
///
/// Surviving entries are copied as-is; rows are not renormalized.
pub fn exclude_special_tokens(
    matrices: &[SquareMatrix],
    record: &SentenceRecord,
) -> Result<Vec<SquareMatrix>, ExtractError> {
    let keep: Vec<usize> = record
        .word_index
        .iter()
        .enumerate()
        .filter_map(|(pos, w)| w.map(|_| pos))
        .collect();
    if keep.is_empty() {
        return Err(ExtractError::NoContentTokens { record: record.id.clone() });
    }
    Ok(matrices.iter().map(|m| m.select(&keep)).collect())
}

/// Subtoken span of every word, in positions of the special-free sequence.
pub(crate) fn word_spans(record: &SentenceRecord) -> Vec<Range<usize>> {
    let mut spans: Vec<Range<usize>> = Vec::with_capacity(record.n_words());
    for (pos, &w) in record.word_index.iter().flatten().enumerate() {
        match spans.get_mut(w) {
            Some(span) => span.end = pos + 1,
            None => spans.push(pos..pos + 1),
        }
    }
    spans
}

/// Collapses subtokens into words by averaging over both the source and
/// the target subtokens:
///
/// `word[u][v] = sum(tok[i][j] for i in S_u, j in S_v) / (|S_u| * |S_v|)`
///
/// `matrices` must already be free of special tokens.
pub fn merge_subtokens(matrices: &[SquareMatrix], record: &SentenceRecord) -> WordLevelAttention {
    let spans = word_spans(record);
    let n = spans.len();
    let layers = matrices
        .iter()
        .map(|m| {
            let mut out = vec![0.0; n * n];
            for (u, su) in spans.iter().enumerate() {
                for (v, sv) in spans.iter().enumerate() {
                    let mut sum = 0.0;
                    for i in su.clone() {
                        for j in sv.clone() {
                            sum += m.get(i, j);
                        }
                    }
                    out[u * n + v] = sum / (su.len() * sv.len()) as f64;
                }
            }
            SquareMatrix::from_vec(n, out)
        })
        .collect();
    WordLevelAttention::new(n, layers)
}

/// The word a source word attends to most, other than itself.
///
/// Ties go to the lowest index. Returns `None` when the row has no other
/// word.
pub fn select_attended_word(row: &[f64], self_index: usize) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, &score) in row.iter().enumerate() {
        if idx == self_index {
            continue;
        }
        match best {
            Some((_, top)) if score <= top => {}
            _ => best = Some((idx, score)),
        }
    }
    best.map(|(idx, _)| idx)
}
