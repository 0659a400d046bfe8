//! Acceptance checks, one line per criterion. Run with
//! `cargo test -p lexattn-cli --test acceptance` (add `--release` for
//! representative timings). Exits nonzero if any check fails.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use lexattn::extract::{analyze, analyze_bundle, select_attended_word, Measure};
use lexattn::interchange::{
    gen_fixture, read_bundle, validate_bundle, AttentionTensor, Bundle, BundleError, FixtureDims, ViolationKind,
};
use lexattn::lexcat::{default_category_map, LexicalCategory};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORACLE_BUNDLES: u64 = 1000;
const ORACLE_BUDGET: Duration = Duration::from_secs(30);
const RATIO_TOLERANCE: f64 = 1e-12;
const IDENTITY_TOLERANCE: f64 = 1e-9;
const INVARIANCE_TRIALS: u64 = 500;
const DETERMINISM_RECORDS: usize = 1000;
const REAL_DATA_FIXTURE: &str = "core/tests/fixtures/bert-base-cased-glue";
const REAL_DATA_MIN_RECORDS: usize = 200;
const REAL_DATA_BUDGET: Duration = Duration::from_secs(10);

type Check = Result<String, String>;

fn small_dims(rng: &mut ChaCha8Rng) -> FixtureDims {
    FixtureDims { layers: rng.gen_range(1..=4), heads: rng.gen_range(1..=4), max_seq: rng.gen_range(4..=8) }
}

/// The i-th fixture of the small-bundle corpus shared by the first checks.
fn corpus_bundle(i: u64) -> Bundle {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + i);
    let dims = small_dims(&mut rng);
    let n = rng.gen_range(1..=16);
    gen_fixture(i, n, dims).expect("valid fixture request")
}

fn oracle_equivalence(scratch: &Path) -> Check {
    let started = Instant::now();
    let map = default_category_map();
    let mut undefined = 0;
    for i in 0..ORACLE_BUNDLES {
        let bundle = corpus_bundle(i);
        let dir = scratch.join(format!("oracle-{i}"));
        bundle.write_to(&dir).map_err(|e| format!("bundle {i}: {e}"))?;
        let naive = oracle::naive_analyze(&bundle);
        match analyze_bundle(&dir, &map, Measure::Proportion, 1) {
            Ok(result) => {
                if let Some(d) = oracle::diff(&result, &naive, RATIO_TOLERANCE) {
                    return Err(format!("bundle {i}: {d}"));
                }
            }
            // Only acceptable when the oracle also has nothing to divide by.
            Err(_) if naive.layers.iter().any(|l| l.proportion.is_none()) => undefined += 1,
            Err(e) => return Err(format!("bundle {i}: library failed where oracle did not: {e}")),
        }
        let _ = std::fs::remove_dir_all(&dir);
    }
    let elapsed = started.elapsed();
    if elapsed > ORACLE_BUDGET {
        return Err(format!("{ORACLE_BUNDLES} bundles agree but took {elapsed:.2?} (budget {ORACLE_BUDGET:?})"));
    }
    Ok(format!("{ORACLE_BUNDLES} bundles, {undefined} with an undefined layer on both sides, {elapsed:.2?}"))
}

fn lift_identity() -> Check {
    let map = default_category_map();
    let mut layers = 0;
    let mut worst: f64 = 0.0;
    for i in 0..ORACLE_BUNDLES {
        let Ok(result) = analyze(&corpus_bundle(i), &map, Measure::Lift) else { continue };
        let n = result.occurrences.content + result.occurrences.function;
        for layer in &result.layers {
            let Some(lift) = layer.lift else { continue };
            let sum: f64 = [LexicalCategory::Content, LexicalCategory::Function]
                .into_iter()
                .map(|c| result.occurrences.get(c) as f64 / n as f64 * lift.get(c).unwrap())
                .sum();
            worst = worst.max((sum - 1.0).abs());
            if (sum - 1.0).abs() > IDENTITY_TOLERANCE {
                return Err(format!("bundle {i} layer {}: weighted sum {sum}", layer.layer));
            }
            layers += 1;
        }
    }
    Ok(format!("{layers} layers, max deviation {worst:.1e}"))
}

fn same_outcome(a: &Bundle, b: &Bundle) -> bool {
    let map = default_category_map();
    analyze(a, &map, Measure::Lift).ok() == analyze(b, &map, Measure::Lift).ok()
}

fn head_permutation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for t in 0..INVARIANCE_TRIALS {
        let bundle = corpus_bundle(t);
        let heads = bundle.header.n_heads;
        let entries = bundle
            .entries
            .iter()
            .map(|(r, tensor)| {
                let mut order: Vec<usize> = (0..heads).collect();
                order.shuffle(&mut rng);
                (r.clone(), tensor.permute_heads(&order))
            })
            .collect();
        let permuted = Bundle::new(bundle.header.clone(), entries).map_err(|e| e.to_string())?;
        if !same_outcome(&bundle, &permuted) {
            return Err(format!("trial {t}: result changed under head permutation"));
        }
    }
    Ok(format!("{INVARIANCE_TRIALS} trials"))
}

fn record_order() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for t in 0..INVARIANCE_TRIALS {
        let bundle = corpus_bundle(t);
        let mut entries = bundle.entries.clone();
        entries.shuffle(&mut rng);
        let shuffled = Bundle::new(bundle.header.clone(), entries).map_err(|e| e.to_string())?;
        if !same_outcome(&bundle, &shuffled) {
            return Err(format!("trial {t}: result changed under record shuffle"));
        }
    }
    Ok(format!("{INVARIANCE_TRIALS} trials"))
}

/// Scaling a word-level row by a positive constant keeps the selection.
/// Checked on raw rows with arbitrary factors, and end to end by scaling
/// every subtoken row of one word (all heads of one layer) by a power of
/// two, which keeps the arithmetic exact.
fn row_scaling() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for t in 0..INVARIANCE_TRIALS {
        let len = rng.gen_range(1..=12);
        let row: Vec<f64> = (0..len).map(|_| rng.gen::<f64>()).collect();
        let me = rng.gen_range(0..len);
        let k = 10f64.powf(rng.gen_range(-3.0..3.0));
        let scaled: Vec<f64> = row.iter().map(|x| x * k).collect();
        if select_attended_word(&row, me) != select_attended_word(&scaled, me) {
            return Err(format!("trial {t}: row selection changed under scaling by {k}"));
        }

        let bundle = corpus_bundle(t);
        let (l_count, h_count) = (bundle.header.n_layers, bundle.header.n_heads);
        let entries = bundle
            .entries
            .iter()
            .map(|(record, tensor)| {
                let s = record.seq_len;
                let layer = rng.gen_range(0..l_count);
                let word = rng.gen_range(0..record.words.len());
                let factor = 2f64.powi(rng.gen_range(-8..=8));
                let mut data = tensor.as_slice().to_vec();
                for h in 0..h_count {
                    for i in (0..s).filter(|&i| record.word_index[i] == Some(word)) {
                        let base = ((layer * h_count + h) * s + i) * s;
                        data[base..base + s].iter_mut().for_each(|x| *x *= factor);
                    }
                }
                (record.clone(), AttentionTensor::new(l_count, h_count, s, data).expect("same shape"))
            })
            .collect();
        let scaled = Bundle::new(bundle.header.clone(), entries).map_err(|e| e.to_string())?;
        if !same_outcome(&bundle, &scaled) {
            return Err(format!("trial {t}: result changed under word-row scaling"));
        }
    }
    Ok(format!("{INVARIANCE_TRIALS} trials"))
}

fn never_selects_self() -> Check {
    const GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut checked = 0u64;
    for len in 1..=4u32 {
        for code in 0..5usize.pow(len) {
            let row: Vec<f64> = (0..len).map(|p| GRID[code / 5usize.pow(p) % 5]).collect();
            for me in 0..row.len() {
                let got = select_attended_word(&row, me);
                if got != oracle::two_step_select(&row, me) || got == Some(me) || (row.len() > 1) != got.is_some() {
                    return Err(format!("row {row:?}, self {me}: selected {got:?}"));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (row, self) pairs"))
}

fn determinism(scratch: &Path) -> Check {
    let dir = scratch.join("determinism");
    gen_fixture(2024, DETERMINISM_RECORDS, FixtureDims { layers: 4, heads: 4, max_seq: 16 })
        .and_then(|b| b.write_to(&dir))
        .map_err(|e| e.to_string())?;
    let run = |jobs: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_lexattn"))
            .args(["analyze", dir.to_str().unwrap(), "--jobs", jobs])
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("--jobs {jobs} failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
        Ok(out.stdout)
    };
    let one = run("1")?;
    let eight = run("8")?;
    if one != eight {
        return Err("--jobs 1 and --jobs 8 outputs differ".into());
    }
    Ok(format!("{DETERMINISM_RECORDS} records, {} identical bytes", one.len()))
}

fn rewrite_records(dir: &Path, edit: impl Fn(usize, &mut serde_json::Value)) {
    let path = dir.join("records.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
        edit(i, &mut v);
        out.push_str(&v.to_string());
        out.push('\n');
    }
    std::fs::write(path, out).unwrap();
}

fn round_trip(scratch: &Path) -> Check {
    for seed in 0..50 {
        let bundle = corpus_bundle(seed);
        let dir = scratch.join(format!("rt-{seed}"));
        bundle.write_to(&dir).map_err(|e| e.to_string())?;
        let back = Bundle::read_from(&dir).map_err(|e| format!("seed {seed}: {e}"))?;
        if back != bundle {
            return Err(format!("seed {seed}: bundle changed across write/read"));
        }
    }

    let original = gen_fixture(77, 6, FixtureDims { layers: 2, heads: 2, max_seq: 6 }).unwrap();

    // Cut the blob short inside the last record.
    let cut = scratch.join("corrupt-blob");
    original.write_to(&cut).unwrap();
    let blob = cut.join("attn.bin");
    let bytes = std::fs::read(&blob).unwrap();
    std::fs::write(&blob, &bytes[..bytes.len() - 5]).unwrap();
    let report = validate_bundle(&cut, false);
    if !report.violations.iter().any(|v| v.kind == ViolationKind::TruncatedBlob) {
        return Err(format!("truncated blob not reported: {:?}", report.violations));
    }
    let last = original.entries.last().unwrap().0.id.clone();
    let read_err = read_bundle(&cut).and_then(|r| r.collect::<Result<Vec<_>, _>>()).err();
    if !matches!(&read_err, Some(BundleError::TruncatedBlob { record, .. }) if *record == last) {
        return Err(format!("reader did not flag truncation at {last}: {read_err:?}"));
    }

    // Point the third record back into the second one's bytes.
    let overlap = scratch.join("overlap");
    original.write_to(&overlap).unwrap();
    let second_offset = original.records().nth(1).unwrap().attn_offset;
    rewrite_records(&overlap, |i, v| {
        if i == 2 {
            v["attn_offset"] = (second_offset + 4).into();
        }
    });
    let report = validate_bundle(&overlap, false);
    if !report.violations.iter().any(|v| v.kind == ViolationKind::OffsetOverlap) {
        return Err(format!("overlap not reported: {:?}", report.violations));
    }
    let read_err = read_bundle(&overlap).and_then(|r| r.collect::<Result<Vec<_>, _>>()).err();
    if !matches!(read_err, Some(BundleError::OffsetOverlap { .. })) {
        return Err(format!("reader did not flag overlap: {read_err:?}"));
    }
    Ok("50 bundles round-trip; truncation and overlap detected".into())
}

fn real_data_fixture() -> Check {
    let dir: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("..").join(REAL_DATA_FIXTURE);
    if !dir.join("meta.json").is_file() {
        return Err(format!("fixture bundle not present at crates/{REAL_DATA_FIXTURE}"));
    }
    let started = Instant::now();
    let result = analyze_bundle(&dir, &default_category_map(), Measure::Lift, 1).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    if result.n_records < REAL_DATA_MIN_RECORDS {
        return Err(format!("only {} records (need {REAL_DATA_MIN_RECORDS})", result.n_records));
    }
    let last = result.n_layers;
    let con = result.value(last, Measure::Lift, LexicalCategory::Content);
    let fun = result.value(last, Measure::Lift, LexicalCategory::Function);
    let (Some(con), Some(fun)) = (con, fun) else {
        return Err(format!("last layer lift undefined ({con:?}, {fun:?})"));
    };
    if !(con > 1.0 && 1.0 > fun) {
        return Err(format!("layer {last}: content lift {con:.3}, function lift {fun:.3}"));
    }
    if elapsed > REAL_DATA_BUDGET {
        return Err(format!("ordering holds but took {elapsed:.2?}"));
    }
    Ok(format!("{} records, layer {last}: content {con:.3} > 1 > function {fun:.3}, {elapsed:.2?}", result.n_records))
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("scratch directory");
    let checks: [(&str, &dyn Fn() -> Check); 9] = [
        ("oracle equivalence", &|| oracle_equivalence(scratch.path())),
        ("lift identity", &lift_identity),
        ("invariance: head permutation", &head_permutation),
        ("invariance: record order", &record_order),
        ("invariance: row scaling", &row_scaling),
        ("invariance: never selects self", &never_selects_self),
        ("determinism across --jobs", &|| determinism(scratch.path())),
        ("round-trip and corruption detection", &|| round_trip(scratch.path())),
        ("real-data fixture", &real_data_fixture),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
