//! The `scindex` command line. [`run`] parses arguments, executes one
//! subcommand and returns the exit status: 0 on success, 1 on validation or
//! runtime errors (a JSON report goes to stderr), 2 on usage errors.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use scindex::aggregate::GainMetric;
use scindex::corpus::UnitKind;
use scindex::credit::CreditScheme;
use scindex::llmscore::NormalizationOrder;
use scindex::normalize::MultiFieldMode;
use scindex::validate::CorrelationMethod;

pub use config::Config;

#[derive(Debug, Parser)]
#[command(name = "scindex", version, about = "Citation indicators for research evaluation")]
pub struct Cli {
    /// JSON config file. Flags override its values.
    #[arg(long, global = true, env = "SCINDEX_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate an article file (and optional edges) and report problems.
    Ingest(IngestArgs),
    /// Article-level or journal-level indicators.
    Compute(ComputeArgs),
    /// Unit-level rollups and score-replacement gains.
    #[command(subcommand)]
    Aggregate(AggregateCommand),
    /// Correlate two article variables, optionally per group.
    Correlate(CorrelateArgs),
    /// Article feature vectors for score prediction.
    Features(FeaturesArgs),
    /// Probability model and synthetic corpora.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Post-process repeated LLM quality scores.
    #[command(subcommand)]
    Llm(LlmCommand),
    /// Reference statistics and tidy plot data.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeModeArg {
    Journal,
    Article,
}

#[derive(Debug, Clone, Args)]
struct CorpusArgs {
    /// Articles file, .jsonl or .csv.
    #[arg(long)]
    articles: PathBuf,
    /// Citation edges CSV: citing_id,citing_year,cited_id.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Classification scheme CSV: entity_id,field_code.
    #[arg(long)]
    scheme: Option<PathBuf>,
    /// Whether scheme entities are journals or articles.
    #[arg(long, value_enum, default_value = "journal")]
    scheme_mode: SchemeModeArg,
    /// Rename an input column, SOURCE=CANONICAL. Repeatable.
    #[arg(long = "rename", value_parser = parse_rename)]
    rename: Vec<(String, String)>,
    /// Accepted publication years, FIRST:LAST.
    #[arg(long, value_parser = parse_range)]
    year_range: Option<(i32, i32)>,
}

/// Options for building field-year reference statistics.
#[derive(Debug, Clone, Args)]
struct StatsArgs {
    /// Citation window in years (citing year minus publication year, inclusive).
    #[arg(long)]
    window: Option<u32>,
    /// Drop citations from documents sharing an author with the cited article.
    #[arg(long)]
    exclude_self_citations: bool,
    /// Denominator for articles in several fields.
    #[arg(long, value_enum)]
    multi_field: Option<MultiFieldArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MultiFieldArg {
    Arithmetic,
    Harmonic,
}

impl From<MultiFieldArg> for MultiFieldMode {
    fn from(m: MultiFieldArg) -> Self {
        match m {
            MultiFieldArg::Arithmetic => MultiFieldMode::Arithmetic,
            MultiFieldArg::Harmonic => MultiFieldMode::Harmonic,
        }
    }
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Indicator {
    Ncs,
    Nlcs,
    Percentile,
    All,
    Jif,
    Jmnlcs,
    JournalMncs,
    Pagerank,
}

#[derive(Debug, Args)]
struct ComputeArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    stats: StatsArgs,
    #[arg(long, value_enum)]
    indicator: Indicator,
    /// Census year for journal indicators.
    #[arg(long)]
    year: Option<i32>,
    /// Top-X% thresholds, comma separated.
    #[arg(long, value_delimiter = ',')]
    percentiles: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum AggregateCommand {
    /// MNCS, MNLCS, percentile shares, GPA and funding power per unit.
    Units(UnitsArgs),
    /// Per-unit gain when indicator-derived scores replace some human scores.
    Gain(GainArgs),
}

#[derive(Debug, Clone, Args)]
struct UnitSource {
    /// Units CSV: unit_kind,unit_id,article_id[,author_id].
    #[arg(long, required_unless_present = "unit_kind")]
    units: Option<PathBuf>,
    /// Derive units from article metadata instead.
    #[arg(long, value_parser = parse_unit_kind, conflicts_with = "units")]
    unit_kind: Option<UnitKind>,
}

#[derive(Debug, Args)]
struct UnitsArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    stats: StatsArgs,
    #[command(flatten)]
    source: UnitSource,
    #[arg(long, value_parser = parse_scheme)]
    credit: Option<CreditScheme>,
    #[arg(long, value_delimiter = ',')]
    percentiles: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    FundingPower,
    Gpa,
}

#[derive(Debug, Args)]
struct GainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    stats: StatsArgs,
    #[command(flatten)]
    source: UnitSource,
    #[arg(long)]
    seed: u64,
    /// Share of articles whose human score is replaced, in (0, 1].
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    /// Article variable used to rank articles for the quota.
    #[arg(long, default_value = "nlcs")]
    predictor: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write correlations of unit GPA and size with the mean gain.
    #[arg(long)]
    bias_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GroupBy {
    None,
    Field,
    Year,
    Journal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Spearman,
    Pearson,
}

impl From<MethodArg> for CorrelationMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Spearman => CorrelationMethod::Spearman,
            MethodArg::Pearson => CorrelationMethod::Pearson,
        }
    }
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    stats: StatsArgs,
    /// Variable name: ncs, nlcs, citations, log_citations, quality_score,
    /// pages, a feature name or a numeric column.
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    #[arg(long, value_enum, default_value = "spearman")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "none")]
    group_by: GroupBy,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    stats: StatsArgs,
    /// Year against which article age is measured.
    #[arg(long)]
    census_year: Option<i32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum SimulateCommand {
    /// Distribution of the mean of n noisy indicator values.
    Probmodel {
        #[arg(long, default_value_t = 1.5)]
        q: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic corpus directory.
    Corpus {
        /// JSON corpus spec; defaults apply to missing keys.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// The ten-value worked example.
    Worked {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OrderArg {
    YearThenField,
    FieldThenYear,
}

impl From<OrderArg> for NormalizationOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::YearThenField => NormalizationOrder::YearThenField,
            OrderArg::FieldThenYear => NormalizationOrder::FieldThenYear,
        }
    }
}

#[derive(Debug, Subcommand)]
enum LlmCommand {
    /// Average repetitions, normalize, and convert with a lookup table.
    Convert {
        /// Scores CSV: article_id,repetition,score,year,field.
        #[arg(long)]
        scores: PathBuf,
        /// Scale JSON; the shipped reference table by default.
        #[arg(long)]
        scale: Option<PathBuf>,
        #[arg(long, value_enum)]
        order: Option<OrderArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a lookup table to (llm_score, expert_score) pairs.
    Calibrate {
        /// CSV with columns llm_score,expert_score.
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value_t = 4)]
        bands: usize,
        #[arg(long, value_parser = parse_domain, default_value = "1:4")]
        domain: (f64, f64),
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    stats: StatsArgs,
    /// Field-year reference statistics CSV.
    #[arg(long = "stats", required_unless_present = "plot_data")]
    stats_out: Option<PathBuf>,
    /// Long-format CSV: article_id,variable,value.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

fn parse_rename(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.to_string(), b.to_string())),
        _ => Err(format!("expected SOURCE=CANONICAL, got {s:?}")),
    }
}

fn parse_range(s: &str) -> Result<(i32, i32), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected FIRST:LAST, got {s:?}"))?;
    let a: i32 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: i32 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a > b {
        return Err(format!("empty range {a}:{b}"));
    }
    Ok((a, b))
}

fn parse_domain(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected MIN:MAX, got {s:?}"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, b))
}

fn parse_unit_kind(s: &str) -> Result<UnitKind, String> {
    s.parse()
}

fn parse_scheme(s: &str) -> Result<CreditScheme, String> {
    s.parse().map_err(|e: scindex::credit::CreditError| e.to_string())
}

impl From<MetricArg> for GainMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::FundingPower => GainMetric::FundingPower,
            MetricArg::Gpa => GainMetric::Gpa,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::execute(cli) {
        Ok(()) => 0,
        Err(commands::Failure::Invalid(report)) => {
            let mut report = report;
            report["status"] = "invalid".into();
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_default());
            1
        }
        Err(commands::Failure::Error(e)) => {
            let report = serde_json::json!({ "status": "error", "message": format!("{e:#}") });
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_default());
            1
        }
    }
}
