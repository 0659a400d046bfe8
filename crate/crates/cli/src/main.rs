//! `lexattn`: validate attention bundles, run the lexical-category analysis,
//! and render comparison tables, layer rankings and bar charts.
//!
//! Exit codes: 0 success, 1 domain or validation failure, 2 usage or I/O
//! failure.

use std::io::Write;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use lexattn::extract::{analyze_bundle, AnalysisError, AnalysisResult, Measure};
use lexattn::interchange::{gen_fixture, validate_bundle, FixtureDims};
use lexattn::lexcat::{default_category_map, load_category_map, CategoryMapError};
use lexattn::report::{
    compare, emit_table, rank_layers, render_bar_chart, ChartPanel, LayerSelector, TableFormat,
};

#[derive(Debug, Parser)]
#[command(name = "lexattn", version, about = "Lexical-category analysis of transformer attention")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a bundle against the format invariants; prints one violation per line.
    Validate {
        bundle: PathBuf,
        /// Require rows to sum to one within 1e-3 instead of 1e-2.
        #[arg(long)]
        strict: bool,
    },
    /// Run the extraction over a bundle and write the analysis JSON.
    Analyze {
        bundle: PathBuf,
        #[arg(long, default_value = "lift")]
        measure: Measure,
        /// JSON file with "function" and "content" tag lists.
        #[arg(long, value_name = "PATH")]
        category_map: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
        /// Worker threads (default: available cores).
        #[arg(long, value_parser = clap::value_parser!(NonZeroUsize))]
        jobs: Option<NonZeroUsize>,
    },
    /// Per-category shift from a baseline analysis to another.
    Compare {
        baseline: PathBuf,
        other: PathBuf,
        #[command(flatten)]
        view: ViewArgs,
        #[arg(long, default_value = "csv")]
        format: TableFormat,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// The k layers attending most to content and to function words.
    TopLayers {
        analysis: PathBuf,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        k: u64,
        #[arg(long, default_value = "lift")]
        measure: Measure,
        #[arg(long, default_value = "csv")]
        format: TableFormat,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Grouped bar chart (SVG); a second analysis adds a second panel.
    Plot {
        analysis: PathBuf,
        second: Option<PathBuf>,
        #[command(flatten)]
        view: ViewArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write a deterministic synthetic bundle.
    GenFixture {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        records: usize,
        #[arg(long, default_value_t = 12)]
        layers: usize,
        #[arg(long, default_value_t = 12)]
        heads: usize,
        #[arg(long, default_value_t = 16)]
        max_seq: usize,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ViewArgs {
    /// `last`, `all`, or a layer number counted from 1.
    #[arg(long, default_value = "last")]
    layer: LayerSelector,
    #[arg(long, default_value = "lift")]
    measure: Measure,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file (default: standard output).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

/// An error tagged with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn domain(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 1, error: error.into() }
    }

    fn io(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, error: error.into() }
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn write_output(out: &OutputArgs, bytes: &[u8]) -> Result<(), Failure> {
    match &out.out {
        Some(path) => std::fs::write(path, bytes)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(Failure::io),
        None => std::io::stdout()
            .lock()
            .write_all(bytes)
            .context("cannot write to standard output")
            .map_err(Failure::io),
    }
}

fn load_analysis(path: &Path) -> Result<AnalysisResult, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::io)?;
    AnalysisResult::from_json(&text)
        .with_context(|| format!("{} is not an analysis result", path.display()))
        .map_err(Failure::domain)
}

fn cmd_validate(bundle: &Path, strict: bool) -> CmdResult {
    let report = validate_bundle(bundle, strict);
    if report.is_unreadable() {
        let msg = report.violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        return Err(Failure::io(anyhow!("unreadable bundle {}: {msg}", bundle.display())));
    }
    let mut stdout = std::io::stdout().lock();
    for v in &report.violations {
        let _ = writeln!(stdout, "{v}");
    }
    Ok(if report.is_valid() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_analyze(
    bundle: &Path,
    measure: Measure,
    category_map: Option<&Path>,
    output: &OutputArgs,
    jobs: Option<NonZeroUsize>,
) -> CmdResult {
    let map = match category_map {
        None => default_category_map(),
        Some(path) => load_category_map(path).map_err(|e| match e {
            CategoryMapError::Io { .. } => Failure::io(e),
            _ => Failure::domain(e),
        })?,
    };
    let jobs = jobs
        .or_else(|| std::thread::available_parallelism().ok())
        .map_or(1, NonZeroUsize::get);
    let result = analyze_bundle(bundle, &map, measure, jobs).map_err(|e| match &e {
        AnalysisError::Bundle(b) if b.is_io() => Failure::io(e),
        _ => Failure::domain(e),
    })?;
    for s in &result.skipped {
        eprintln!("skipped record {}: {}", s.record_id, s.reason);
    }
    write_output(output, result.to_json().as_bytes())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(baseline: &Path, other: &Path, view: &ViewArgs, format: TableFormat, output: &OutputArgs) -> CmdResult {
    let baseline = load_analysis(baseline)?;
    let other = load_analysis(other)?;
    let report = compare(&baseline, &other, view.layer, view.measure).map_err(Failure::domain)?;
    write_output(output, &emit_table(&report, format))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_top_layers(analysis: &Path, k: u64, measure: Measure, format: TableFormat, output: &OutputArgs) -> CmdResult {
    let result = load_analysis(analysis)?;
    let ranking = rank_layers(&result, k as usize, measure);
    write_output(output, &emit_table(&ranking, format))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_plot(analysis: &Path, second: Option<&Path>, view: &ViewArgs, output: &OutputArgs) -> CmdResult {
    let first = load_analysis(analysis)?;
    let second = second.map(load_analysis).transpose()?;
    let panels = match &second {
        None => vec![ChartPanel { title: &first.model_id, result: &first }],
        Some(s) => vec![
            ChartPanel { title: "Pretrained", result: &first },
            ChartPanel { title: "Finetuned", result: s },
        ],
    };
    let svg = render_bar_chart(&panels, view.layer, view.measure).map_err(Failure::domain)?;
    write_output(output, &svg)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen_fixture(seed: u64, records: usize, dims: FixtureDims, out: &Path) -> CmdResult {
    let bundle = gen_fixture(seed, records, dims).map_err(Failure::domain)?;
    bundle.write_to(out).map_err(Failure::io)?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Validate { bundle, strict } => cmd_validate(&bundle, strict),
        Command::Analyze { bundle, measure, category_map, output, jobs } => {
            cmd_analyze(&bundle, measure, category_map.as_deref(), &output, jobs)
        }
        Command::Compare { baseline, other, view, format, output } => {
            cmd_compare(&baseline, &other, &view, format, &output)
        }
        Command::TopLayers { analysis, k, measure, format, output } => {
            cmd_top_layers(&analysis, k, measure, format, &output)
        }
        Command::Plot { analysis, second, view, output } => {
            cmd_plot(&analysis, second.as_deref(), &view, &output)
        }
        Command::GenFixture { seed, records, layers, heads, max_seq, out } => {
            cmd_gen_fixture(seed, records, FixtureDims { layers, heads, max_seq }, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
