//! Seeded synthetic bundles for tests and demos.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AttentionTensor, Bundle, BundleError, BundleHeader, SentenceRecord};
use crate::lexcat::{DEFAULT_CONTENT_TAGS, DEFAULT_FUNCTION_TAGS};

/// Tags outside both default lists, so fixtures exercise the `Other` path.
const UNLISTED_TAGS: &[&str] = &[".", ",", "SYM", "$"];

/// Every fixture row is a vector of integers summing to this, scaled down.
/// Powers of two keep each scalar exact in `f32` and each row sum exactly 1.
const ROW_MASS: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixtureDims {
    pub layers: usize,
    pub heads: usize,
    pub max_seq: usize,
}

/// Generates a deterministic pseudo-random bundle.
///
/// Each record is `[CLS] words [SEP]`, or a pair `[CLS] a [SEP] b [SEP]`.
/// Words span 1 to 3 subtokens. Tags are drawn from the default function
/// and content lists plus a few unlisted tags. Every attention row is a
/// normalized vector of positive random weights. The same seed always gives
/// the same bundle, byte for byte once written.
pub fn gen_fixture(seed: u64, n_records: usize, dims: FixtureDims) -> Result<Bundle, BundleError> {
    if n_records == 0 {
        return Err(BundleError::FixtureRequest("n_records must be positive".into()));
    }
    if dims.layers == 0 || dims.heads == 0 {
        return Err(BundleError::FixtureRequest("layers and heads must be positive".into()));
    }
    if dims.max_seq < 4 {
        return Err(BundleError::FixtureRequest(format!(
            "max_seq must be at least 4 (got {})",
            dims.max_seq
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tag_pool: Vec<&str> = DEFAULT_FUNCTION_TAGS
        .iter()
        .chain(DEFAULT_CONTENT_TAGS)
        .chain(UNLISTED_TAGS)
        .copied()
        .collect();

    let header = BundleHeader::new(format!("fixture-seed{seed}"), dims.layers, dims.heads);
    let mut entries = Vec::with_capacity(n_records);
    for idx in 0..n_records {
        let record = gen_record(&mut rng, idx, dims.max_seq, &tag_pool);
        let tensor = gen_tensor(&mut rng, dims.layers, dims.heads, record.seq_len);
        entries.push((record, tensor));
    }
    Bundle::new(header, entries)
}

fn gen_record(rng: &mut ChaCha8Rng, idx: usize, max_seq: usize, tag_pool: &[&str]) -> SentenceRecord {
    let seq_len = rng.gen_range(3..=max_seq);
    let pair = seq_len >= 5 && rng.gen_bool(0.3);

    let mut tokens = vec!["[CLS]".to_string()];
    let mut word_index = vec![None];
    let mut words = Vec::new();
    let mut segments: Vec<Vec<String>> = Vec::new();

    let budget = seq_len - if pair { 3 } else { 2 };
    let budgets = if pair {
        let a = rng.gen_range(1..budget);
        vec![a, budget - a]
    } else {
        vec![budget]
    };

    for seg_budget in budgets {
        let mut remaining = seg_budget;
        let mut segment = Vec::new();
        while remaining > 0 {
            let pieces = rng.gen_range(1..=3).min(remaining);
            let w = words.len();
            let word = format!("word{w}");
            for piece in 0..pieces {
                tokens.push(if piece == 0 { format!("w{w}") } else { format!("##p{piece}") });
                word_index.push(Some(w));
            }
            segment.push(word.clone());
            words.push(word);
            remaining -= pieces;
        }
        tokens.push("[SEP]".to_string());
        word_index.push(None);
        segments.push(segment);
    }

    let pos_tags = words
        .iter()
        .map(|_| tag_pool.choose(rng).expect("non-empty pool").to_string())
        .collect();

    SentenceRecord {
        id: format!("fx-{idx:05}"),
        text_a: segments[0].join(" "),
        text_b: segments.get(1).map(|s| s.join(" ")),
        tokens,
        word_index,
        words,
        pos_tags,
        seq_len,
        attn_offset: 0,
        attn_bytes: 0,
    }
}

fn gen_tensor(rng: &mut ChaCha8Rng, layers: usize, heads: usize, seq_len: usize) -> AttentionTensor {
    let mut data = Vec::with_capacity(layers * heads * seq_len * seq_len);
    let mut weights = vec![0u64; seq_len];
    for _ in 0..layers * heads * seq_len {
        for w in weights.iter_mut() {
            *w = rng.gen_range(1..=1000);
        }
        // Peaked rows are typical of real attention.
        if rng.gen_bool(0.5) {
            let peak = rng.gen_range(0..seq_len);
            weights[peak] *= 20;
        }
        data.extend(quantize_row(&weights).into_iter().map(|q| q as f64 / ROW_MASS as f64));
    }
    AttentionTensor::new(layers, heads, seq_len, data).expect("shape is consistent")
}

/// Scales positive integer weights to integers summing to exactly
/// [`ROW_MASS`], distributing the rounding remainder by largest fractional
/// part (lowest index first on ties).
fn quantize_row(weights: &[u64]) -> Vec<u64> {
    let total: u64 = weights.iter().sum();
    let mut out: Vec<u64> = weights.iter().map(|w| w * ROW_MASS / total).collect();
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(weights[i] * ROW_MASS % total));
    for &i in order.iter().take((ROW_MASS - assigned) as usize) {
        out[i] += 1;
    }
    out
}
