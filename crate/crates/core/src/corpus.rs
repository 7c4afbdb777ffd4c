//! Articles, citation edges, classification schemes and unit membership.
//!
//! A [`Corpus`] is built once (from files or in memory) and is read-only
//! afterwards. Row-level problems do not abort ingestion: offending rows are
//! skipped and recorded in a [`ValidationReport`], so callers can decide
//! whether a partially valid corpus is acceptable.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("row {row}: duplicate id {id:?} (first occurrence kept)")]
    DuplicateId { row: usize, id: String },
    #[error("missing required column {0:?}")]
    MissingRequiredColumn(String),
    #[error("edge row {row}: cited id {cited_id:?} is not in the corpus")]
    UnknownCitedId { row: usize, cited_id: String },
    #[error("edge row {row}: {id:?} cannot cite itself")]
    SelfCitationEdgeRejected { row: usize, id: String },
    #[error("article {0:?} is not covered by the classification")]
    UnclassifiedArticle(String),
    #[error("field code {0:?} is not declared by the scheme")]
    UndeclaredField(String),
    #[error("unit kind {0:?} cannot be derived from article metadata")]
    UnitNotDerivable(UnitKind),
    #[error("unit {unit:?} references unknown article {article:?}")]
    UnknownUnitArticle { unit: String, article: String },
}

impl CorpusError {
    /// Stable machine-readable tag, used in error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            CorpusError::Io { .. } => "io",
            CorpusError::Csv(_) => "csv",
            CorpusError::MalformedRow { .. } => "malformed_row",
            CorpusError::DuplicateId { .. } => "duplicate_id",
            CorpusError::MissingRequiredColumn(_) => "missing_required_column",
            CorpusError::UnknownCitedId { .. } => "unknown_cited_id",
            CorpusError::SelfCitationEdgeRejected { .. } => "self_citation_edge_rejected",
            CorpusError::UnclassifiedArticle(_) => "unclassified_article",
            CorpusError::UndeclaredField(_) => "undeclared_field",
            CorpusError::UnitNotDerivable(_) => "unit_not_derivable",
            CorpusError::UnknownUnitArticle { .. } => "unknown_unit_article",
        }
    }

    pub fn row(&self) -> Option<usize> {
        match self {
            CorpusError::MalformedRow { row, .. }
            | CorpusError::DuplicateId { row, .. }
            | CorpusError::UnknownCitedId { row, .. }
            | CorpusError::SelfCitationEdgeRejected { row, .. } => Some(*row),
            _ => None,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocType {
    Article,
    Review,
    Editorial,
    Letter,
    Other,
}

impl DocType {
    /// Parses a document type name; unknown names map to `Other` and return
    /// `false` as the second element.
    pub fn parse_lenient(s: &str) -> (DocType, bool) {
        match s.trim().to_ascii_lowercase().as_str() {
            "article" | "journal-article" | "ar" => (DocType::Article, true),
            "review" | "re" => (DocType::Review, true),
            "editorial" | "ed" => (DocType::Editorial, true),
            "letter" | "le" => (DocType::Letter, true),
            "other" => (DocType::Other, true),
            _ => (DocType::Other, false),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DocType::Article => "article",
            DocType::Review => "review",
            DocType::Editorial => "editorial",
            DocType::Letter => "letter",
            DocType::Other => "other",
        }
    }

    /// Whether items of this type count in a journal impact denominator.
    pub fn is_citable(self) -> bool {
        matches!(self, DocType::Article | DocType::Review)
    }
}

/// One scholarly output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub year: i32,
    pub journal_id: String,
    pub doc_type: DocType,
    /// Citation count. Replaced by the edge-derived count once edges are attached.
    pub citations: Option<u64>,
    /// Inline field codes. May be empty when a classification scheme supplies them.
    #[serde(default)]
    pub fields: Vec<String>,
    pub authors: Vec<String>,
    #[serde(default)]
    pub institutions: Vec<String>,
    #[serde(default)]
    pub countries: Vec<String>,
    #[serde(default)]
    pub quality_score: Option<u8>,
    /// Named nonnegative indicator columns, e.g. altmetric counts.
    #[serde(default)]
    pub columns: BTreeMap<String, f64>,
    #[serde(default)]
    pub title_abstract_text: Option<String>,
    #[serde(default)]
    pub pages: Option<f64>,
    /// Explicit per-author contribution shares, in author order. Replaces
    /// position-based credit weights when present.
    #[serde(default)]
    pub author_shares: Option<Vec<f64>>,
}

impl Article {
    /// A minimal article for programmatic corpus construction.
    pub fn new(id: impl Into<String>, year: i32, journal_id: impl Into<String>) -> Self {
        Article {
            id: id.into(),
            year,
            journal_id: journal_id.into(),
            doc_type: DocType::Article,
            citations: Some(0),
            fields: Vec::new(),
            authors: Vec::new(),
            institutions: Vec::new(),
            countries: Vec::new(),
            quality_score: None,
            columns: BTreeMap::new(),
            title_abstract_text: None,
            pages: None,
            author_shares: None,
        }
    }

    fn check(&self, opts: &IngestOptions) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if let Some((lo, hi)) = opts.year_range {
            if self.year < lo || self.year > hi {
                return Err(format!("year {} outside corpus range {lo}..={hi}", self.year));
            }
        }
        if self.authors.is_empty() {
            return Err("author list is empty".into());
        }
        if self.fields.is_empty() && !opts.fields_from_scheme {
            return Err("field list is empty and no scheme is declared".into());
        }
        if let Some(q) = self.quality_score {
            if !(1..=4).contains(&q) {
                return Err(format!("quality_score {q} not in 1..=4"));
            }
        }
        for (name, v) in &self.columns {
            if !v.is_finite() || *v < 0.0 {
                return Err(format!("column {name:?} must be a nonnegative number"));
            }
        }
        if let Some(p) = self.pages {
            if !p.is_finite() || p < 0.0 {
                return Err("pages must be a nonnegative number".into());
            }
        }
        if let Some(shares) = &self.author_shares {
            if shares.len() != self.authors.len() {
                return Err("author_shares length differs from author count".into());
            }
            if shares.iter().any(|s| !s.is_finite() || *s < 0.0) || shares.iter().sum::<f64>() <= 0.0 {
                return Err("author_shares must be nonnegative with a positive sum".into());
            }
        }
        Ok(())
    }
}

/// A directed citation from `citing_id` (published in `citing_year`) to `cited_id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationEdge {
    pub citing_id: String,
    pub citing_year: i32,
    pub cited_id: String,
}

/// A distinct citing document of one article.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Citer {
    pub citing_id: String,
    pub citing_year: i32,
    /// The citing document is in the corpus and shares an author with the cited one.
    pub self_citation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl InputFormat {
    pub fn from_path(path: &Path) -> InputFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => InputFormat::Csv,
            _ => InputFormat::Jsonl,
        }
    }
}

/// Column mapping and validation settings for article ingestion.
#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Source column name → canonical name (e.g. `"pub_year" → "year"`).
    pub rename: BTreeMap<String, String>,
    /// Inclusive publication-year range; rows outside are malformed.
    pub year_range: Option<(i32, i32)>,
    /// Field codes come from a classification scheme, so the `fields` column
    /// may be absent or empty.
    pub fields_from_scheme: bool,
    /// Overrides format detection by file extension.
    pub format: Option<InputFormat>,
}

impl IngestOptions {
    fn canonical<'a>(&'a self, name: &'a str) -> &'a str {
        self.rename.get(name).map(String::as_str).unwrap_or(name)
    }
}

const KNOWN: &[&str] = &[
    "id",
    "year",
    "journal_id",
    "doc_type",
    "citations",
    "fields",
    "authors",
    "institutions",
    "countries",
    "quality_score",
    "title_abstract_text",
    "pages",
    "author_shares",
    "columns",
];

/// Problems found while ingesting. Rows listed in `errors` were not loaded.
#[derive(Debug, Default)]
pub struct ValidationReport {
    pub errors: Vec<CorpusError>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.errors.extend(other.errors);
        self.warnings.extend(other.warnings);
    }

    pub fn to_json(&self) -> Value {
        let errors: Vec<Value> = self
            .errors
            .iter()
            .map(|e| {
                serde_json::json!({
                    "kind": e.kind(),
                    "row": e.row(),
                    "message": e.to_string(),
                })
            })
            .collect();
        serde_json::json!({ "errors": errors, "warnings": self.warnings })
    }
}

/// An immutable collection of articles plus (optionally) their citing documents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    articles: Vec<Article>,
    index: HashMap<String, usize>,
    citers: Option<Vec<Vec<Citer>>>,
}

impl Corpus {
    /// Builds a corpus from in-memory articles, applying the same row checks
    /// as file ingestion. Row numbers are 1-based positions in `articles`.
    pub fn from_articles(articles: Vec<Article>, opts: &IngestOptions) -> (Corpus, ValidationReport) {
        let mut corpus = Corpus::default();
        let mut report = ValidationReport::default();
        for (i, a) in articles.into_iter().enumerate() {
            corpus.push_checked(a, i + 1, opts, &mut report);
        }
        (corpus, report)
    }

    fn push_checked(&mut self, a: Article, row: usize, opts: &IngestOptions, report: &mut ValidationReport) {
        if let Err(reason) = a.check(opts) {
            report.errors.push(CorpusError::MalformedRow { row, reason });
            return;
        }
        if self.index.contains_key(&a.id) {
            report.errors.push(CorpusError::DuplicateId { row, id: a.id });
            return;
        }
        if a.citations.is_none() {
            report
                .warnings
                .push(format!("row {row}: no citation count for {:?}; needs edges", a.id));
        }
        self.index.insert(a.id.clone(), self.articles.len());
        self.articles.push(a);
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Article> {
        self.index.get(id).map(|&i| &self.articles[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn has_edges(&self) -> bool {
        self.citers.is_some()
    }

    /// Distinct citing documents of the article at `idx`, sorted by citing id.
    pub fn citers(&self, idx: usize) -> Option<&[Citer]> {
        self.citers.as_ref().map(|c| c[idx].as_slice())
    }

    /// Citation count of the article at `idx`. Uses edges when attached,
    /// otherwise the ingested count (missing counts read as 0).
    pub fn citations(&self, idx: usize, include_self: bool) -> u64 {
        match &self.citers {
            Some(c) => c[idx].iter().filter(|ci| include_self || !ci.self_citation).count() as u64,
            None => self.articles[idx].citations.unwrap_or(0),
        }
    }

    /// Earliest and latest publication year, if the corpus is nonempty.
    pub fn year_span(&self) -> Option<(i32, i32)> {
        let min = self.articles.iter().map(|a| a.year).min()?;
        let max = self.articles.iter().map(|a| a.year).max()?;
        Some((min, max))
    }

    /// Attaches citation edges, recomputing every article's citation count as
    /// the number of distinct citing documents. Invalid edges are skipped and
    /// reported; `rows` are the 1-based source positions of the edges.
    pub fn attach_edges(&mut self, edges: impl IntoIterator<Item = (usize, CitationEdge)>) -> ValidationReport {
        let mut report = ValidationReport::default();
        let earliest = self.year_span().map(|(lo, _)| lo).unwrap_or(i32::MIN);
        let mut per_article: Vec<BTreeMap<String, i32>> = vec![BTreeMap::new(); self.articles.len()];
        for (row, e) in edges {
            let Some(&cited) = self.index.get(&e.cited_id) else {
                report.errors.push(CorpusError::UnknownCitedId {
                    row,
                    cited_id: e.cited_id,
                });
                continue;
            };
            if e.citing_id == e.cited_id {
                report
                    .errors
                    .push(CorpusError::SelfCitationEdgeRejected { row, id: e.citing_id });
                continue;
            }
            if e.citing_year < earliest {
                report.errors.push(CorpusError::MalformedRow {
                    row,
                    reason: format!("citing year {} precedes the corpus ({earliest})", e.citing_year),
                });
                continue;
            }
            // Repeated (citing, cited) pairs collapse; keep the earliest year.
            per_article[cited]
                .entry(e.citing_id)
                .and_modify(|y| *y = (*y).min(e.citing_year))
                .or_insert(e.citing_year);
        }

        let mut citers = Vec::with_capacity(self.articles.len());
        let mut mismatched = Vec::new();
        for (idx, map) in per_article.into_iter().enumerate() {
            let list: Vec<Citer> = map
                .into_iter()
                .map(|(citing_id, citing_year)| {
                    let self_citation = self.shares_author(&citing_id, idx);
                    Citer {
                        citing_id,
                        citing_year,
                        self_citation,
                    }
                })
                .collect();
            let derived = list.len() as u64;
            let a = &mut self.articles[idx];
            if let Some(given) = a.citations {
                if given != derived {
                    mismatched.push(a.id.clone());
                }
            }
            a.citations = Some(derived);
            citers.push(list);
        }
        if !mismatched.is_empty() {
            report.warnings.push(format!(
                "edge-derived citation counts replace ingested counts for: {}",
                mismatched.join(", ")
            ));
        }
        let n_self: usize = citers.iter().flatten().filter(|c| c.self_citation).count();
        if n_self > 0 {
            report
                .warnings
                .push(format!("{n_self} citation edges flagged as author self-citations"));
        }
        self.citers = Some(citers);
        report
    }

    fn shares_author(&self, citing_id: &str, cited: usize) -> bool {
        let Some(&citing) = self.index.get(citing_id) else {
            return false;
        };
        let cited_authors = &self.articles[cited].authors;
        self.articles[citing].authors.iter().any(|a| cited_authors.contains(a))
    }

    /// Indices of articles by `author_id`, in corpus order.
    pub fn articles_by_author(&self, author_id: &str) -> Vec<usize> {
        self.articles
            .iter()
            .enumerate()
            .filter(|(_, a)| a.authors.iter().any(|x| x == author_id))
            .map(|(i, _)| i)
            .collect()
    }
}

// ---------------------------------------------------------------------------
// File ingestion

/// Reads articles from JSONL or CSV. Fatal problems (unreadable file, missing
/// required CSV column) are errors; bad rows are skipped and reported.
pub fn ingest_articles(path: &Path, opts: &IngestOptions) -> Result<(Corpus, ValidationReport), CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    let format = opts.format.unwrap_or_else(|| InputFormat::from_path(path));
    match format {
        InputFormat::Jsonl => read_articles_jsonl(BufReader::new(file), opts),
        InputFormat::Csv => read_articles_csv(file, opts),
    }
}

pub fn read_articles_jsonl(
    reader: impl BufRead,
    opts: &IngestOptions,
) -> Result<(Corpus, ValidationReport), CorpusError> {
    let mut corpus = Corpus::default();
    let mut report = ValidationReport::default();
    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: PathBuf::from("<jsonl>"),
            source,
        })?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed = serde_json::from_str::<Value>(&line)
            .map_err(|e| e.to_string())
            .and_then(|v| match v {
                Value::Object(m) => Ok(m
                    .into_iter()
                    .map(|(k, v)| (opts.canonical(&k).to_string(), v))
                    .collect::<BTreeMap<_, _>>()),
                _ => Err("row is not a JSON object".to_string()),
            })
            .and_then(|m| article_from_row(m, &mut report.warnings, row));
        match parsed {
            Ok(a) => corpus.push_checked(a, row, opts, &mut report),
            Err(reason) => report.errors.push(CorpusError::MalformedRow { row, reason }),
        }
    }
    Ok((corpus, report))
}

pub fn read_articles_csv(reader: impl Read, opts: &IngestOptions) -> Result<(Corpus, ValidationReport), CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(false)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| opts.canonical(h.trim()).to_string())
        .collect();
    let mut required = vec!["id", "year", "journal_id", "doc_type", "authors"];
    if !opts.fields_from_scheme {
        required.push("fields");
    }
    for col in required {
        if !headers.iter().any(|h| h == col) {
            return Err(CorpusError::MissingRequiredColumn(col.to_string()));
        }
    }
    let mut corpus = Corpus::default();
    let mut report = ValidationReport::default();
    for (i, rec) in rdr.records().enumerate() {
        // Data rows are numbered from 1; the header is not counted.
        let row = i + 1;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                report.errors.push(CorpusError::MalformedRow {
                    row,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let mut map = BTreeMap::new();
        let mut columns = serde_json::Map::new();
        for (h, v) in headers.iter().zip(rec.iter()) {
            let v = v.trim();
            if KNOWN.contains(&h.as_str()) {
                if !v.is_empty() {
                    map.insert(h.clone(), Value::String(v.to_string()));
                }
            } else if !v.is_empty() {
                columns.insert(h.clone(), Value::String(v.to_string()));
            }
        }
        if !columns.is_empty() {
            map.insert("columns".to_string(), Value::Object(columns));
        }
        match article_from_row(map, &mut report.warnings, row) {
            Ok(a) => corpus.push_checked(a, row, opts, &mut report),
            Err(reason) => report.errors.push(CorpusError::MalformedRow { row, reason }),
        }
    }
    Ok((corpus, report))
}

fn article_from_row(mut m: BTreeMap<String, Value>, warnings: &mut Vec<String>, row: usize) -> Result<Article, String> {
    let id = take_string(&mut m, "id")?.ok_or("missing id")?;
    let year = take_number(&mut m, "year")?.ok_or("missing year")?;
    if year.fract() != 0.0 {
        return Err("year must be an integer".into());
    }
    let journal_id = take_string(&mut m, "journal_id")?.ok_or("missing journal_id")?;
    let doc_type_raw = take_string(&mut m, "doc_type")?.ok_or("missing doc_type")?;
    let (doc_type, known) = DocType::parse_lenient(&doc_type_raw);
    if !known {
        warnings.push(format!("row {row}: unknown doc_type {doc_type_raw:?} mapped to other"));
    }
    let citations = match take_number(&mut m, "citations")? {
        None => None,
        Some(c) if c < 0.0 || c.fract() != 0.0 => {
            return Err(format!("citations must be a nonnegative integer, got {c}"));
        }
        Some(c) => Some(c as u64),
    };
    let quality_score = match take_number(&mut m, "quality_score")? {
        None => None,
        Some(q) if q.fract() != 0.0 || !(0.0..=255.0).contains(&q) => {
            return Err(format!("quality_score must be an integer, got {q}"));
        }
        Some(q) => Some(q as u8),
    };
    let author_shares = match take_list(&mut m, "author_shares")? {
        None => None,
        Some(v) => Some(
            v.iter()
                .map(|s| s.parse::<f64>().map_err(|_| format!("bad author share {s:?}")))
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };
    let mut columns = BTreeMap::new();
    if let Some(Value::Object(obj)) = m.remove("columns") {
        for (k, v) in obj {
            columns.insert(
                k.clone(),
                value_as_f64(&v).ok_or(format!("column {k:?} is not numeric"))?,
            );
        }
    }
    let mut article = Article {
        id,
        year: year as i32,
        journal_id,
        doc_type,
        citations,
        fields: take_list(&mut m, "fields")?.unwrap_or_default(),
        authors: take_list(&mut m, "authors")?.unwrap_or_default(),
        institutions: take_list(&mut m, "institutions")?.unwrap_or_default(),
        countries: take_list(&mut m, "countries")?.unwrap_or_default(),
        quality_score,
        columns: BTreeMap::new(),
        title_abstract_text: take_string(&mut m, "title_abstract_text")?,
        pages: take_number(&mut m, "pages")?,
        author_shares,
    };
    // Unrecognised numeric keys in JSONL rows are treated as indicator columns.
    for (k, v) in m {
        if let Some(x) = value_as_f64(&v) {
            columns.insert(k, x);
        }
    }
    article.columns = columns;
    Ok(article)
}

fn value_as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn take_string(m: &mut BTreeMap<String, Value>, key: &str) -> Result<Option<String>, String> {
    match m.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(Value::Number(n)) => Ok(Some(n.to_string())),
        Some(_) => Err(format!("{key} must be a string")),
    }
}

fn take_number(m: &mut BTreeMap<String, Value>, key: &str) -> Result<Option<f64>, String> {
    match m.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => value_as_f64(&v).map(Some).ok_or(format!("{key} must be numeric")),
    }
}

fn take_list(m: &mut BTreeMap<String, Value>, key: &str) -> Result<Option<Vec<String>>, String> {
    match m.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(
            s.split('|')
                .map(str::trim)
                .filter(|x| !x.is_empty())
                .map(String::from)
                .collect(),
        )),
        Some(Value::Array(items)) => items
            .into_iter()
            .map(|v| match v {
                Value::String(s) => Ok(s),
                Value::Number(n) => Ok(n.to_string()),
                _ => Err(format!("{key} entries must be strings")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some),
        Some(_) => Err(format!("{key} must be a list")),
    }
}

#[derive(Debug, Deserialize)]
struct EdgeRow {
    citing_id: String,
    citing_year: i32,
    cited_id: String,
}

/// Reads a `citing_id,citing_year,cited_id` CSV and attaches it to `corpus`.
pub fn ingest_edges(corpus: &mut Corpus, path: &Path) -> Result<ValidationReport, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    read_edges_csv(corpus, file)
}

pub fn read_edges_csv(corpus: &mut Corpus, reader: impl Read) -> Result<ValidationReport, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    for col in ["citing_id", "citing_year", "cited_id"] {
        if !rdr.headers()?.iter().any(|h| h == col) {
            return Err(CorpusError::MissingRequiredColumn(col.to_string()));
        }
    }
    let mut edges = Vec::new();
    let mut bad = Vec::new();
    for (i, rec) in rdr.deserialize::<EdgeRow>().enumerate() {
        match rec {
            Ok(r) => edges.push((
                i + 1,
                CitationEdge {
                    citing_id: r.citing_id,
                    citing_year: r.citing_year,
                    cited_id: r.cited_id,
                },
            )),
            Err(e) => bad.push(CorpusError::MalformedRow {
                row: i + 1,
                reason: e.to_string(),
            }),
        }
    }
    let mut report = corpus.attach_edges(edges);
    bad.extend(report.errors);
    report.errors = bad;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Classification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeMode {
    JournalLevel,
    ArticleLevel,
}

/// Field assignments for journals or articles. Field codes are opaque; a
/// broad/narrow hierarchy is modelled as two separate schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationScheme {
    pub mode: SchemeMode,
    declared: BTreeSet<String>,
    assignments: BTreeMap<String, Vec<String>>,
}

impl ClassificationScheme {
    pub fn new<I, S>(mode: SchemeMode, declared_fields: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ClassificationScheme {
            mode,
            declared: declared_fields.into_iter().map(Into::into).collect(),
            assignments: BTreeMap::new(),
        }
    }

    pub fn assign(&mut self, entity_id: &str, field: &str) -> Result<(), CorpusError> {
        if !self.declared.contains(field) {
            return Err(CorpusError::UndeclaredField(field.to_string()));
        }
        let codes = self.assignments.entry(entity_id.to_string()).or_default();
        if !codes.iter().any(|c| c == field) {
            codes.push(field.to_string());
        }
        Ok(())
    }

    pub fn fields_of(&self, entity_id: &str) -> Option<&[String]> {
        self.assignments.get(entity_id).map(Vec::as_slice)
    }

    pub fn declared_fields(&self) -> &BTreeSet<String> {
        &self.declared
    }

    /// Reads an `entity_id,field_code` CSV. The declared field list is the
    /// set of codes appearing in the file.
    pub fn from_csv(path: &Path, mode: SchemeMode) -> Result<Self, CorpusError> {
        let file = File::open(path).map_err(io_err(path))?;
        Self::from_csv_reader(file, mode)
    }

    pub fn from_csv_reader(reader: impl Read, mode: SchemeMode) -> Result<Self, CorpusError> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let pos = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| CorpusError::MissingRequiredColumn(name.to_string()))
        };
        let (ei, fi) = (pos("entity_id")?, pos("field_code")?);
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let (e, f) = (rec.get(ei).unwrap_or(""), rec.get(fi).unwrap_or(""));
            if e.is_empty() || f.is_empty() {
                return Err(CorpusError::MalformedRow {
                    row: i + 1,
                    reason: "empty entity_id or field_code".into(),
                });
            }
            rows.push((e.to_string(), f.to_string()));
        }
        let mut scheme = ClassificationScheme::new(mode, rows.iter().map(|(_, f)| f.clone()));
        for (e, f) in &rows {
            scheme.assign(e, f)?;
        }
        Ok(scheme)
    }
}

/// How articles obtain their field codes. Lookup order: article-level
/// scheme, journal-level scheme, then the article's inline `fields`.
#[derive(Debug, Clone, Default)]
pub struct Classification {
    pub article_level: Option<ClassificationScheme>,
    pub journal_level: Option<ClassificationScheme>,
}

impl Classification {
    /// Use only the inline `fields` of each article.
    pub fn inline() -> Self {
        Classification::default()
    }

    pub fn with_scheme(scheme: ClassificationScheme) -> Self {
        let mut c = Classification::default();
        match scheme.mode {
            SchemeMode::ArticleLevel => c.article_level = Some(scheme),
            SchemeMode::JournalLevel => c.journal_level = Some(scheme),
        }
        c
    }
}

pub fn resolve_fields<'a>(
    article: &'a Article,
    classification: &'a Classification,
) -> Result<&'a [String], CorpusError> {
    if let Some(codes) = classification
        .article_level
        .as_ref()
        .and_then(|s| s.fields_of(&article.id))
    {
        return Ok(codes);
    }
    if let Some(codes) = classification
        .journal_level
        .as_ref()
        .and_then(|s| s.fields_of(&article.journal_id))
    {
        return Ok(codes);
    }
    if !article.fields.is_empty() {
        return Ok(&article.fields);
    }
    Err(CorpusError::UnclassifiedArticle(article.id.clone()))
}

// ---------------------------------------------------------------------------
// Units

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Author,
    Department,
    Institution,
    Country,
    Journal,
    Funder,
}

impl std::str::FromStr for UnitKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "author" => UnitKind::Author,
            "department" => UnitKind::Department,
            "institution" => UnitKind::Institution,
            "country" => UnitKind::Country,
            "journal" => UnitKind::Journal,
            "funder" => UnitKind::Funder,
            other => return Err(format!("unknown unit kind {other:?}")),
        })
    }
}

/// A set of articles attributed to one author, department, institution, etc.
///
/// `author_ids` lists the unit's own authors, which position-based credit
/// schemes need. When it is empty the unit is credited by membership alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitMembership {
    pub kind: UnitKind,
    pub unit_id: String,
    pub article_ids: BTreeSet<String>,
    pub author_ids: BTreeSet<String>,
}

impl UnitMembership {
    pub fn new(kind: UnitKind, unit_id: impl Into<String>) -> Self {
        UnitMembership {
            kind,
            unit_id: unit_id.into(),
            article_ids: BTreeSet::new(),
            author_ids: BTreeSet::new(),
        }
    }
}

/// Derives author, institution, country or journal units from article metadata.
pub fn units_from_corpus(corpus: &Corpus, kind: UnitKind) -> Result<Vec<UnitMembership>, CorpusError> {
    let mut units: BTreeMap<String, UnitMembership> = BTreeMap::new();
    for a in corpus.articles() {
        let keys: Vec<&String> = match kind {
            UnitKind::Author => a.authors.iter().collect(),
            UnitKind::Institution => a.institutions.iter().collect(),
            UnitKind::Country => a.countries.iter().collect(),
            UnitKind::Journal => vec![&a.journal_id],
            UnitKind::Department | UnitKind::Funder => return Err(CorpusError::UnitNotDerivable(kind)),
        };
        for k in keys {
            let u = units
                .entry(k.clone())
                .or_insert_with(|| UnitMembership::new(kind, k.clone()));
            u.article_ids.insert(a.id.clone());
            if kind == UnitKind::Author {
                u.author_ids.insert(k.clone());
            }
        }
    }
    Ok(units.into_values().collect())
}

/// Reads a `unit_kind,unit_id,article_id[,author_id]` CSV.
pub fn read_units_csv(reader: impl Read, corpus: &Corpus) -> Result<Vec<UnitMembership>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let pos = |name: &str| headers.iter().position(|h| h == name);
    let ki = pos("unit_kind").ok_or(CorpusError::MissingRequiredColumn("unit_kind".into()))?;
    let ui = pos("unit_id").ok_or(CorpusError::MissingRequiredColumn("unit_id".into()))?;
    let ai = pos("article_id").ok_or(CorpusError::MissingRequiredColumn("article_id".into()))?;
    let author_i = pos("author_id");
    let mut units: BTreeMap<(UnitKind, String), UnitMembership> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let kind: UnitKind = rec
            .get(ki)
            .unwrap_or("")
            .parse()
            .map_err(|reason| CorpusError::MalformedRow { row, reason })?;
        let unit_id = rec.get(ui).unwrap_or("").to_string();
        let article_id = rec.get(ai).unwrap_or("").to_string();
        if corpus.get(&article_id).is_none() {
            return Err(CorpusError::UnknownUnitArticle {
                unit: unit_id,
                article: article_id,
            });
        }
        let u = units
            .entry((kind, unit_id.clone()))
            .or_insert_with(|| UnitMembership::new(kind, unit_id));
        u.article_ids.insert(article_id);
        if let Some(author) = author_i.and_then(|j| rec.get(j)).filter(|s| !s.is_empty()) {
            u.author_ids.insert(author.to_string());
        }
    }
    Ok(units.into_values().collect())
}

pub fn ingest_units(path: &Path, corpus: &Corpus) -> Result<Vec<UnitMembership>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    read_units_csv(file, corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jsonl(rows: &[&str]) -> (Corpus, ValidationReport) {
        read_articles_jsonl(rows.join("\n").as_bytes(), &IngestOptions::default()).unwrap()
    }

    const A1: &str = r#"{"id":"A1","year":2015,"journal_id":"J1","doc_type":"article","citations":3,"fields":["PHYS"],"authors":["x","y"]}"#;
    const A2: &str = r#"{"id":"A2","year":2016,"journal_id":"J1","doc_type":"review","citations":0,"fields":["PHYS"],"authors":["y"]}"#;
    const A3: &str = r#"{"id":"A3","year":2016,"journal_id":"J2","doc_type":"editorial","citations":1,"fields":["CHEM"],"authors":["z"]}"#;

    #[test]
    fn three_valid_rows() {
        let (c, r) = jsonl(&[A1, A2, A3]);
        assert_eq!(c.len(), 3);
        assert!(r.is_clean());
        assert_eq!(c.get("A3").unwrap().doc_type, DocType::Editorial);
    }

    #[test]
    fn negative_citations_rejected_others_kept() {
        let bad = r#"{"id":"B","year":2015,"journal_id":"J1","doc_type":"article","citations":-1,"fields":["PHYS"],"authors":["x"]}"#;
        let (c, r) = jsonl(&[A1, bad, A2]);
        assert_eq!(c.len(), 2);
        assert_eq!(r.errors.len(), 1);
        assert!(matches!(r.errors[0], CorpusError::MalformedRow { row: 2, .. }));
    }

    #[test]
    fn duplicate_id_keeps_first() {
        let dup = A2.replace("\"A2\"", "\"A1\"");
        let (c, r) = jsonl(&[A1, &dup]);
        assert_eq!(c.len(), 1);
        assert_eq!(c.get("A1").unwrap().year, 2015);
        assert!(matches!(&r.errors[0], CorpusError::DuplicateId { row: 2, id } if id == "A1"));
    }

    #[test]
    fn unknown_doc_type_warns() {
        let odd = A1.replace("\"article\"", "\"proceedings\"");
        let (c, r) = jsonl(&[&odd]);
        assert_eq!(c.articles()[0].doc_type, DocType::Other);
        assert!(r.warnings.iter().any(|w| w.contains("proceedings")));
    }

    #[test]
    fn quality_score_out_of_range() {
        let q = A1.replace("\"citations\":3", "\"citations\":3,\"quality_score\":5");
        let (c, r) = jsonl(&[&q]);
        assert!(c.is_empty());
        assert_eq!(r.errors[0].kind(), "malformed_row");
    }

    #[test]
    fn csv_lists_and_columns() {
        let data = "id,year,journal_id,doc_type,citations,fields,authors,mendeley\n\
                    A,2015,J,article,4,PHYS|CHEM,a|b|c,12\n";
        let (c, r) = read_articles_csv(data.as_bytes(), &IngestOptions::default()).unwrap();
        assert!(r.is_clean(), "{:?}", r.errors);
        let a = &c.articles()[0];
        assert_eq!(a.fields, ["PHYS", "CHEM"]);
        assert_eq!(a.authors.len(), 3);
        assert_eq!(a.columns["mendeley"], 12.0);
    }

    #[test]
    fn csv_missing_column_is_fatal() {
        let data = "id,year,doc_type,fields,authors\nA,2015,article,P,a\n";
        let err = read_articles_csv(data.as_bytes(), &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, CorpusError::MissingRequiredColumn(c) if c == "journal_id"));
    }

    #[test]
    fn column_rename() {
        let data = "id,pub_year,journal_id,doc_type,fields,authors\nA,2015,J,article,P,a\n";
        let mut opts = IngestOptions::default();
        opts.rename.insert("pub_year".into(), "year".into());
        let (c, _) = read_articles_csv(data.as_bytes(), &opts).unwrap();
        assert_eq!(c.articles()[0].year, 2015);
    }

    #[test]
    fn year_range_enforced() {
        let opts = IngestOptions {
            year_range: Some((2016, 2020)),
            ..Default::default()
        };
        let (c, r) = read_articles_jsonl([A1, A2].join("\n").as_bytes(), &opts).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(r.errors.len(), 1);
    }

    fn edges(c: &mut Corpus, list: &[(&str, i32, &str)]) -> ValidationReport {
        c.attach_edges(list.iter().enumerate().map(|(i, (a, y, b))| {
            (
                i + 1,
                CitationEdge {
                    citing_id: a.to_string(),
                    citing_year: *y,
                    cited_id: b.to_string(),
                },
            )
        }))
    }

    #[test]
    fn edges_count_distinct_citers() {
        let (mut c, _) = jsonl(&[A1, A2]);
        let r = edges(
            &mut c,
            &[
                ("B", 2017, "A1"),
                ("C", 2018, "A1"),
                ("B", 2019, "A2"),
                ("B", 2019, "A2"),
            ],
        );
        assert_eq!(c.citations(0, true), 2);
        assert_eq!(c.citations(1, true), 1);
        // A1 was ingested with 3 citations, A2 with 0: both mismatched.
        assert!(r.warnings[0].contains("A1") && r.warnings[0].contains("A2"));
        assert_eq!(c.get("A1").unwrap().citations, Some(2));
    }

    #[test]
    fn unknown_cited_and_self_loop() {
        let (mut c, _) = jsonl(&[A1]);
        let r = edges(&mut c, &[("B", 2017, "Z"), ("A1", 2017, "A1")]);
        assert!(matches!(&r.errors[0], CorpusError::UnknownCitedId { cited_id, .. } if cited_id == "Z"));
        assert!(matches!(&r.errors[1], CorpusError::SelfCitationEdgeRejected { .. }));
        assert_eq!(c.citations(0, true), 0);
    }

    #[test]
    fn author_self_citation_flagged() {
        let (mut c, _) = jsonl(&[A1, A2]);
        // A2 (author y) cites A1 (authors x, y).
        edges(&mut c, &[("A2", 2016, "A1"), ("Q", 2017, "A1")]);
        assert_eq!(c.citations(0, true), 2);
        assert_eq!(c.citations(0, false), 1);
    }

    #[test]
    fn edges_csv() {
        let (mut c, _) = jsonl(&[A1, A2]);
        let data = "citing_id,citing_year,cited_id\nB,2017,A1\nC,nope,A1\n";
        let r = read_edges_csv(&mut c, data.as_bytes()).unwrap();
        assert_eq!(c.citations(0, true), 1);
        assert!(matches!(r.errors[0], CorpusError::MalformedRow { row: 2, .. }));
    }

    #[test]
    fn resolve_journal_scheme() {
        let (c, _) = jsonl(&[A1]);
        let mut s = ClassificationScheme::new(SchemeMode::JournalLevel, ["PHYS", "ACOUSTICS"]);
        s.assign("J1", "PHYS").unwrap();
        s.assign("J1", "ACOUSTICS").unwrap();
        let cl = Classification::with_scheme(s);
        assert_eq!(resolve_fields(&c.articles()[0], &cl).unwrap(), ["PHYS", "ACOUSTICS"]);
    }

    #[test]
    fn article_level_overrides_journal_level() {
        let (c, _) = jsonl(&[A1]);
        let mut j = ClassificationScheme::new(SchemeMode::JournalLevel, ["PHYS"]);
        j.assign("J1", "PHYS").unwrap();
        let mut a = ClassificationScheme::new(SchemeMode::ArticleLevel, ["BIO"]);
        a.assign("A1", "BIO").unwrap();
        let cl = Classification {
            article_level: Some(a),
            journal_level: Some(j),
        };
        assert_eq!(resolve_fields(&c.articles()[0], &cl).unwrap(), ["BIO"]);
    }

    #[test]
    fn unclassified_article() {
        let mut art = Article::new("X", 2015, "J9");
        art.authors.push("a".into());
        let cl = Classification::with_scheme(ClassificationScheme::new(SchemeMode::ArticleLevel, ["P"]));
        assert!(matches!(
            resolve_fields(&art, &cl),
            Err(CorpusError::UnclassifiedArticle(_))
        ));
    }

    #[test]
    fn undeclared_field_rejected() {
        let mut s = ClassificationScheme::new(SchemeMode::JournalLevel, ["P"]);
        assert!(s.assign("J", "Q").is_err());
    }

    #[test]
    fn units_by_author_and_csv() {
        let (c, _) = jsonl(&[A1, A2, A3]);
        let units = units_from_corpus(&c, UnitKind::Author).unwrap();
        let y = units.iter().find(|u| u.unit_id == "y").unwrap();
        assert_eq!(y.article_ids.len(), 2);
        assert!(units_from_corpus(&c, UnitKind::Department).is_err());

        let data = "unit_kind,unit_id,article_id,author_id\ndepartment,D1,A1,x\ndepartment,D1,A2,\n";
        let units = read_units_csv(data.as_bytes(), &c).unwrap();
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].article_ids.len(), 2);
        assert_eq!(units[0].author_ids.len(), 1);
        let bad = "unit_kind,unit_id,article_id\ndepartment,D1,NOPE\n";
        assert!(read_units_csv(bad.as_bytes(), &c).is_err());
    }
}
