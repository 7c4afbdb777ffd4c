use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};
use serde::Deserialize;
use serde_json::{json, Value};

use scindex::aggregate::{
    bias_correlation, quota_assign, score_gain, unit_aggregate, unit_mean_scores, write_gain_csv, write_units_csv,
    ArticleValues, GainConfig, QuotaAllocation,
};
use scindex::corpus::{
    ingest_articles, ingest_edges, ingest_units, units_from_corpus, Classification, ClassificationScheme, Corpus,
    IngestOptions, SchemeMode, UnitMembership, ValidationReport,
};
use scindex::credit::CreditScheme;
use scindex::export::fmt_num;
use scindex::features::{write_features_csv, FeatureBuilder, FeatureConfig, FeatureVector};
use scindex::indicators::{
    jif, journal_graph, journal_mean, pagerank, percentile_memberships, write_journal_csv, IndicatorError,
    JournalImpactResult, JournalIndicator,
};
use scindex::llmscore::{calibrate_scale, process_scores, read_scores_csv, write_processed_csv, ScoreScale};
use scindex::normalize::{build_stats, ReferenceStats};
use scindex::simulate::{
    sample_mean_distribution, synth_corpus, worked_example, SimulationConfig, SynthSpec, RNG_ALGORITHM,
};
use scindex::validate::{correlate, CorrelationResult, ValidateError};

use crate::config::{header, Config};
use crate::{
    AggregateCommand, Cli, Command, ComputeArgs, CorpusArgs, CorrelateArgs, ExportArgs, FeaturesArgs, GainArgs,
    GroupBy, Indicator, IngestArgs, LlmCommand, SchemeModeArg, SimulateCommand, StatsArgs, UnitSource, UnitsArgs,
};

pub enum Failure {
    /// Input failed validation; the value is the machine-readable report.
    Invalid(Value),
    Error(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Error(e.into())
    }
}

type Res<T = ()> = Result<T, Failure>;

pub fn execute(cli: Cli) -> Res {
    let cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest(a) => ingest(a, cfg),
        Command::Compute(a) => compute(a, cfg),
        Command::Aggregate(AggregateCommand::Units(a)) => aggregate_units(a, cfg),
        Command::Aggregate(AggregateCommand::Gain(a)) => aggregate_gain(a, cfg),
        Command::Correlate(a) => correlate_cmd(a, cfg),
        Command::Features(a) => features(a, cfg),
        Command::Simulate(c) => simulate(c, cfg),
        Command::Llm(c) => llm(c, cfg),
        Command::Export(a) => export(a, cfg),
    }
}

// ---------------------------------------------------------------------------
// Output

fn open_out(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Writes the header comment followed by `body`.
fn emit(path: Option<&Path>, header: &str, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> anyhow::Result<()> {
    let mut w = open_out(path)?;
    writeln!(w, "{header}")?;
    body(&mut *w)?;
    w.flush()?;
    Ok(())
}

/// JSON has no comments, so the header travels as a `header` key.
fn emit_json(path: Option<&Path>, header: &str, mut value: Value) -> anyhow::Result<()> {
    value["header"] = header.trim_start_matches("# ").into();
    let mut w = open_out(path)?;
    writeln!(w, "{}", serde_json::to_string_pretty(&value)?)?;
    w.flush()?;
    Ok(())
}

/// A number at the fixed output precision.
fn num(x: f64) -> Value {
    fmt_num(x)
        .parse::<f64>()
        .ok()
        .and_then(serde_json::Number::from_f64)
        .map_or(Value::Null, Value::Number)
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// Loading

fn read_corpus(args: &CorpusArgs) -> anyhow::Result<(Corpus, ValidationReport, Classification)> {
    let opts = IngestOptions {
        rename: args.rename.iter().cloned().collect(),
        year_range: args.year_range,
        fields_from_scheme: args.scheme.is_some(),
        format: None,
    };
    let (mut corpus, mut report) = ingest_articles(&args.articles, &opts)?;
    if let Some(edges) = &args.edges {
        report.warnings.retain(|w| !w.ends_with("needs edges"));
        report.merge(ingest_edges(&mut corpus, edges)?);
    }
    let classification = match &args.scheme {
        Some(p) => {
            let mode = match args.scheme_mode {
                SchemeModeArg::Journal => SchemeMode::JournalLevel,
                SchemeModeArg::Article => SchemeMode::ArticleLevel,
            };
            Classification::with_scheme(ClassificationScheme::from_csv(p, mode)?)
        }
        None => Classification::inline(),
    };
    Ok((corpus, report, classification))
}

fn load(args: &CorpusArgs) -> Res<(Corpus, Classification)> {
    let (corpus, report, classification) = read_corpus(args)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if !report.is_clean() {
        return Err(Failure::Invalid(report.to_json()));
    }
    Ok((corpus, classification))
}

fn apply_stats(cfg: &mut Config, s: &StatsArgs) {
    if let Some(w) = s.window {
        cfg.window = Some(w);
    }
    if s.exclude_self_citations {
        cfg.exclude_self_citations = true;
    }
    if let Some(m) = s.multi_field {
        cfg.multi_field = Some(m.into());
    }
}

/// Reference statistics and per-article normalized scores. Scores are
/// `None` where normalization is undefined.
struct Derived {
    stats: ReferenceStats,
    ncs: Vec<Option<f64>>,
    nlcs: Vec<Option<f64>>,
}

fn derive(corpus: &Corpus, classification: &Classification, cfg: &Config) -> anyhow::Result<Derived> {
    let stats = build_stats(corpus, classification, &cfg.stats()?)?;
    let mode = cfg.multi_field();
    let ncs = (0..corpus.len()).map(|i| stats.ncs(i, mode).ok()).collect();
    let nlcs = (0..corpus.len()).map(|i| stats.nlcs(i, mode).ok()).collect();
    Ok(Derived { stats, ncs, nlcs })
}

/// Values of a named article variable, in corpus order.
fn variable(name: &str, corpus: &Corpus, d: &Derived, census_year: Option<i32>) -> anyhow::Result<Vec<Option<f64>>> {
    let arts = corpus.articles();
    Ok(match name {
        "ncs" => d.ncs.clone(),
        "nlcs" => d.nlcs.clone(),
        "citations" => d.stats.counts().iter().map(|&c| Some(c as f64)).collect(),
        "log_citations" => d.stats.counts().iter().map(|&c| Some((c as f64).ln_1p())).collect(),
        "quality_score" => arts.iter().map(|a| a.quality_score.map(f64::from)).collect(),
        "pages" => arts.iter().map(|a| a.pages).collect(),
        _ => {
            if let Some(k) = FeatureVector::NAMES.iter().position(|n| *n == name) {
                let fb = FeatureBuilder::new(corpus, &d.stats, &FeatureConfig { census_year });
                (0..corpus.len())
                    .map(|i| fb.feature_vector(i).ok().map(|v| v.to_array()[k]))
                    .collect()
            } else if arts.iter().any(|a| a.columns.contains_key(name)) {
                arts.iter().map(|a| a.columns.get(name).copied()).collect()
            } else {
                bail!("unknown variable {name:?}");
            }
        }
    })
}

// ---------------------------------------------------------------------------
// Commands

fn ingest(a: IngestArgs, cfg: Config) -> Res {
    let (corpus, report, _) = read_corpus(&a.corpus)?;
    let mut out = report.to_json();
    out["status"] = if report.is_clean() { "ok" } else { "invalid" }.into();
    out["articles"] = corpus.len().into();
    out["edges"] = corpus.has_edges().into();
    emit_json(a.out.as_deref(), &header(&cfg, None), out)?;
    if !report.is_clean() {
        return Err(Failure::Invalid(report.to_json()));
    }
    Ok(())
}

fn compute(a: ComputeArgs, mut cfg: Config) -> Res {
    apply_stats(&mut cfg, &a.stats);
    if let Some(p) = &a.percentiles {
        cfg.percentiles = Some(p.clone());
    }
    let (corpus, classification) = load(&a.corpus)?;
    let head = header(&cfg, None);
    let out = a.out.as_deref();
    match a.indicator {
        Indicator::Ncs | Indicator::Nlcs | Indicator::Percentile | Indicator::All => {
            let d = derive(&corpus, &classification, &cfg)?;
            let spec = cfg.percentiles()?;
            let with_ncs = matches!(a.indicator, Indicator::Ncs | Indicator::All);
            let with_nlcs = matches!(a.indicator, Indicator::Nlcs | Indicator::All);
            let with_pct = matches!(a.indicator, Indicator::Percentile | Indicator::All);
            let pct = if with_pct {
                percentile_memberships(&d.stats, &corpus, &spec)
            } else {
                Vec::new()
            };
            let doc_types = &d.stats.config().doc_types;
            emit(out, &head, |w| {
                let mut cols = String::from("article_id,year,citations");
                if with_ncs {
                    cols.push_str(",ncs");
                }
                if with_nlcs {
                    cols.push_str(",nlcs");
                }
                if with_pct {
                    for x in spec.thresholds() {
                        cols.push_str(&format!(",top_{x}"));
                    }
                }
                writeln!(w, "{cols}")?;
                for (i, art) in corpus.articles().iter().enumerate() {
                    let mut row = format!("{},{},{}", art.id, art.year, d.stats.count(i));
                    if with_ncs {
                        row.push_str(&format!(",{}", opt_num(d.ncs[i])));
                    }
                    if with_nlcs {
                        row.push_str(&format!(",{}", opt_num(d.nlcs[i])));
                    }
                    if with_pct {
                        let ranked = doc_types.contains(&art.doc_type);
                        for m in &pct[i] {
                            row.push_str(&format!(",{}", if ranked { fmt_num(*m) } else { String::new() }));
                        }
                    }
                    writeln!(w, "{row}")?;
                }
                Ok(())
            })?;
        }
        Indicator::Jif | Indicator::Jmnlcs | Indicator::JournalMncs | Indicator::Pagerank => {
            let rows = journal_rows(&a, &cfg, &corpus, &classification)?;
            emit(out, &head, |w| write_journal_csv(&rows, w))?;
        }
    }
    Ok(())
}

fn journal_rows(
    a: &ComputeArgs,
    cfg: &Config,
    corpus: &Corpus,
    classification: &Classification,
) -> anyhow::Result<Vec<JournalImpactResult>> {
    let Some((first, last)) = corpus.year_span() else {
        return Ok(Vec::new());
    };
    let journals: BTreeSet<&str> = corpus.articles().iter().map(|x| x.journal_id.as_str()).collect();
    let include_self = !cfg.exclude_self_citations;
    let mut rows = Vec::new();
    match a.indicator {
        Indicator::Jif => {
            let window = cfg.window.unwrap_or(2);
            let years: Vec<i32> = match a.year {
                Some(y) => vec![y],
                None => (first + 1..=last + 1).collect(),
            };
            for j in &journals {
                for &y in &years {
                    match jif(corpus, j, y, window, include_self) {
                        Ok(value) => rows.push(JournalImpactResult {
                            journal_id: j.to_string(),
                            indicator: JournalIndicator::JifWindow,
                            value,
                            window_years: window,
                            year: y,
                        }),
                        Err(IndicatorError::NoCitableItems { .. }) => {}
                        Err(e) => return Err(e.into()),
                    }
                }
            }
        }
        Indicator::Jmnlcs | Indicator::JournalMncs => {
            let d = derive(corpus, classification, cfg)?;
            let (source, indicator) = if a.indicator == Indicator::Jmnlcs {
                (&d.nlcs, JournalIndicator::Jmnlcs)
            } else {
                (&d.ncs, JournalIndicator::JournalMncs)
            };
            let values: Vec<f64> = source.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
            for j in &journals {
                let years: BTreeSet<i32> = match a.year {
                    Some(y) => [y].into(),
                    None => corpus
                        .articles()
                        .iter()
                        .filter(|x| x.journal_id == *j)
                        .map(|x| x.year)
                        .collect(),
                };
                for y in years {
                    match journal_mean(corpus, &d.stats, &values, j, &[y].into()) {
                        Ok(value) => rows.push(JournalImpactResult {
                            journal_id: j.to_string(),
                            indicator,
                            value,
                            window_years: cfg.window.unwrap_or(0),
                            year: y,
                        }),
                        Err(IndicatorError::EmptyJournalYear(_)) => {}
                        Err(e) => return Err(e.into()),
                    }
                }
            }
        }
        _ => {
            if !corpus.has_edges() {
                bail!("pagerank needs citation edges (--edges)");
            }
            let graph = journal_graph(corpus, include_self);
            let pr = pagerank(&graph, &cfg.pagerank())?;
            for (label, value) in graph.labels.iter().zip(pr.scores) {
                rows.push(JournalImpactResult {
                    journal_id: label.clone(),
                    indicator: JournalIndicator::Pagerank,
                    value,
                    window_years: 0,
                    year: a.year.unwrap_or(last),
                });
            }
        }
    }
    Ok(rows)
}

fn units_for(source: &UnitSource, corpus: &Corpus) -> anyhow::Result<Vec<UnitMembership>> {
    Ok(match (&source.units, source.unit_kind) {
        (Some(p), _) => ingest_units(p, corpus)?,
        (None, Some(k)) => units_from_corpus(corpus, k)?,
        (None, None) => bail!("either --units or --unit-kind is required"),
    })
}

fn aggregate_units(a: UnitsArgs, mut cfg: Config) -> Res {
    apply_stats(&mut cfg, &a.stats);
    if let Some(s) = a.credit {
        cfg.credit_scheme = Some(s);
    }
    if let Some(p) = &a.percentiles {
        cfg.percentiles = Some(p.clone());
    }
    let (corpus, classification) = load(&a.corpus)?;
    let units = units_for(&a.source, &corpus)?;
    let d = derive(&corpus, &classification, &cfg)?;
    let spec = cfg.percentiles()?;
    let values = ArticleValues {
        ncs: d.ncs.clone(),
        nlcs: d.nlcs.clone(),
        citations: d.stats.counts().to_vec(),
        thresholds: spec.thresholds().to_vec(),
        percentiles: percentile_memberships(&d.stats, &corpus, &spec),
        scores: corpus.articles().iter().map(|x| x.quality_score).collect(),
    };
    let scheme = cfg.credit_scheme.unwrap_or(CreditScheme::Full);
    let funding = cfg.funding();
    let rows = units
        .iter()
        .map(|u| unit_aggregate(&corpus, u, &values, scheme, &funding))
        .collect::<Result<Vec<_>, _>>()?;
    emit(a.out.as_deref(), &header(&cfg, None), |w| write_units_csv(&rows, w))?;
    Ok(())
}

fn correlation_row(label: &str, n: usize, r: Result<CorrelationResult, ValidateError>) -> String {
    match r {
        Ok(r) => format!(
            "{label},{},{},{},{},{},{},",
            r.method.as_str(),
            r.n,
            fmt_num(r.rho),
            fmt_num(r.ci_low),
            fmt_num(r.ci_high),
            r.band.as_str()
        ),
        Err(e) => {
            let note = match e {
                ValidateError::TooFewPairs(_) => "too_few_pairs",
                ValidateError::DegenerateInput => "degenerate_input",
                ValidateError::NonFinite => "non_finite",
                _ => "undefined",
            };
            format!("{label},,{n},,,,,{note}")
        }
    }
}

const CORRELATION_COLUMNS: &str = "group,method,n,rho,ci_low,ci_high,band,note";

fn aggregate_gain(a: GainArgs, mut cfg: Config) -> Res {
    apply_stats(&mut cfg, &a.stats);
    if let Some(f) = a.fraction {
        cfg.gain_fraction = Some(f);
    }
    if let Some(k) = a.iterations {
        cfg.gain_iterations = Some(k);
    }
    if let Some(m) = a.metric {
        cfg.gain_metric = Some(m.into());
    }
    let (corpus, classification) = load(&a.corpus)?;
    let units = units_for(&a.source, &corpus)?;
    let unscored: Vec<&str> = corpus
        .articles()
        .iter()
        .filter(|x| x.quality_score.is_none())
        .map(|x| x.id.as_str())
        .collect();
    if !unscored.is_empty() {
        return Err(Failure::Invalid(json!({
            "errors": [{ "kind": "missing_quality_score", "articles": unscored }],
            "warnings": [],
        })));
    }
    let human: Vec<u8> = corpus.articles().iter().filter_map(|x| x.quality_score).collect();
    let d = derive(&corpus, &classification, &cfg)?;
    let pred_values = variable(&a.predictor, &corpus, &d, cfg.census_year)?;
    let undefined: Vec<&str> = pred_values
        .iter()
        .zip(corpus.articles())
        .filter(|(v, _)| v.is_none())
        .map(|(_, x)| x.id.as_str())
        .collect();
    if !undefined.is_empty() {
        return Err(anyhow::anyhow!("predictor {} is undefined for: {}", a.predictor, undefined.join(", ")).into());
    }
    let pred_values: Vec<f64> = pred_values.into_iter().flatten().collect();
    let predicted = quota_assign(&pred_values, &QuotaAllocation::matching(&human, a.seed))?;
    let gc = GainConfig {
        fraction: cfg.gain_fraction.unwrap_or(0.5),
        iterations: cfg.gain_iterations.unwrap_or(10),
        seed: a.seed,
        metric: cfg.gain_metric.unwrap_or_default(),
        funding: cfg.funding(),
    };
    let gains = score_gain(&corpus, &units, &human, &predicted, &gc)?;
    let head = header(&cfg, Some(a.seed));
    emit(a.out.as_deref(), &head, |w| write_gain_csv(&gains, w))?;
    if let Some(path) = &a.bias_out {
        let gpa = unit_mean_scores(&corpus, &units, &human);
        let size: Vec<f64> = gains.iter().map(|g| g.n as f64).collect();
        emit(Some(path), &head, |w| {
            writeln!(w, "{}", CORRELATION_COLUMNS.replacen("group", "attribute", 1))?;
            for (label, attr) in [("gpa", &gpa), ("size", &size)] {
                let r = bias_correlation(&gains, attr).map_err(|e| match e {
                    scindex::aggregate::AggregateError::Validate(v) => v,
                    _ => ValidateError::DegenerateInput,
                });
                writeln!(w, "{}", correlation_row(label, gains.len(), r))?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn correlate_cmd(a: CorrelateArgs, mut cfg: Config) -> Res {
    apply_stats(&mut cfg, &a.stats);
    let (corpus, classification) = load(&a.corpus)?;
    let d = derive(&corpus, &classification, &cfg)?;
    let xs = variable(&a.x, &corpus, &d, cfg.census_year)?;
    let ys = variable(&a.y, &corpus, &d, cfg.census_year)?;
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, art) in corpus.articles().iter().enumerate() {
        match a.group_by {
            GroupBy::None => groups.entry("all".into()).or_default().push(i),
            GroupBy::Year => groups.entry(art.year.to_string()).or_default().push(i),
            GroupBy::Journal => groups.entry(art.journal_id.clone()).or_default().push(i),
            GroupBy::Field => {
                for f in d.stats.fields(i) {
                    groups.entry(f.clone()).or_default().push(i);
                }
            }
        }
    }
    emit(a.out.as_deref(), &header(&cfg, None), |w| {
        writeln!(w, "{CORRELATION_COLUMNS}")?;
        for (label, idx) in &groups {
            let (x, y): (Vec<f64>, Vec<f64>) = idx.iter().filter_map(|&i| Some((xs[i]?, ys[i]?))).unzip();
            let r = correlate(a.method.into(), &x, &y);
            writeln!(w, "{}", correlation_row(label, x.len(), r))?;
        }
        Ok(())
    })?;
    Ok(())
}

fn features(a: FeaturesArgs, mut cfg: Config) -> Res {
    apply_stats(&mut cfg, &a.stats);
    if let Some(y) = a.census_year {
        cfg.census_year = Some(y);
    }
    let (corpus, classification) = load(&a.corpus)?;
    let stats = build_stats(&corpus, &classification, &cfg.stats()?)?;
    let vectors = FeatureBuilder::new(
        &corpus,
        &stats,
        &FeatureConfig {
            census_year: cfg.census_year,
        },
    )
    .all()?;
    emit(a.out.as_deref(), &header(&cfg, None), |w| {
        write_features_csv(&corpus, &vectors, w)
    })?;
    Ok(())
}

fn simulate(c: SimulateCommand, cfg: Config) -> Res {
    match c {
        SimulateCommand::Probmodel {
            q,
            sigma,
            n,
            trials,
            seed,
            out,
        } => {
            let sc = SimulationConfig {
                q,
                sigma,
                n,
                trials,
                seed,
            };
            let s = sample_mean_distribution(&sc)?;
            let value = json!({
                "rng": RNG_ALGORITHM,
                "q": q,
                "sigma": sigma,
                "n": n,
                "trials": trials,
                "seed": seed,
                "mean": num(s.mean),
                "sd": num(s.sd),
                "expected_sd": num(s.expected_sd),
            });
            emit_json(out.as_deref(), &header(&cfg, Some(seed)), value)?;
        }
        SimulateCommand::Corpus { spec, seed, out } => {
            let spec: SynthSpec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => SynthSpec::default(),
            };
            let synth = synth_corpus(&spec, seed)?;
            synth.write_dir(&out, Some(&header(&cfg, Some(seed))))?;
        }
        SimulateCommand::Worked { out } => {
            let w = worked_example();
            let value = json!({
                "mean": w.mean,
                "p_exact": w.p_exact,
                "p_below_one": w.p_below_one,
                "p_over": w.p_over,
                "p_under": w.p_under,
            });
            emit_json(out.as_deref(), &header(&cfg, None), value)?;
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct CalibrationSample {
    llm_score: f64,
    expert_score: u8,
}

fn llm(c: LlmCommand, mut cfg: Config) -> Res {
    match c {
        LlmCommand::Convert {
            scores,
            scale,
            order,
            out,
        } => {
            if let Some(o) = order {
                cfg.normalization_order = Some(o.into());
            }
            let file = File::open(&scores).with_context(|| format!("opening {}", scores.display()))?;
            let rows = read_scores_csv(BufReader::new(file))?;
            let scale = match scale {
                Some(p) => ScoreScale::from_json(
                    &std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?,
                )?,
                None => ScoreScale::reference(),
            };
            let processed = process_scores(&rows, Some(&scale), cfg.normalization_order.unwrap_or_default())?;
            emit(out.as_deref(), &header(&cfg, None), |w| {
                write_processed_csv(&processed, w)
            })?;
        }
        LlmCommand::Calibrate {
            samples,
            bands,
            domain,
            out,
        } => {
            let mut rdr = csv::ReaderBuilder::new()
                .comment(Some(b'#'))
                .trim(csv::Trim::All)
                .from_path(&samples)
                .with_context(|| format!("opening {}", samples.display()))?;
            let pairs = rdr
                .deserialize::<CalibrationSample>()
                .map(|r| r.map(|s| (s.llm_score, s.expert_score)))
                .collect::<Result<Vec<_>, _>>()?;
            let scale = calibrate_scale(&pairs, bands, domain)?;
            emit_json(out.as_deref(), &header(&cfg, None), serde_json::to_value(&scale)?)?;
        }
    }
    Ok(())
}

fn export(a: ExportArgs, mut cfg: Config) -> Res {
    apply_stats(&mut cfg, &a.stats);
    let (corpus, classification) = load(&a.corpus)?;
    let d = derive(&corpus, &classification, &cfg)?;
    let head = header(&cfg, None);
    if let Some(p) = &a.stats_out {
        emit(Some(p), &head, |w| d.stats.write_csv(w))?;
    }
    if let Some(p) = &a.plot_data {
        emit(Some(p), &head, |w| {
            writeln!(w, "article_id,variable,value")?;
            for (i, art) in corpus.articles().iter().enumerate() {
                let vars = [
                    ("citations", Some(d.stats.count(i) as f64)),
                    ("ncs", d.ncs[i]),
                    ("nlcs", d.nlcs[i]),
                    ("quality_score", art.quality_score.map(f64::from)),
                ];
                for (name, v) in vars {
                    if let Some(v) = v {
                        writeln!(w, "{},{name},{}", art.id, fmt_num(v))?;
                    }
                }
            }
            Ok(())
        })?;
    }
    Ok(())
}
