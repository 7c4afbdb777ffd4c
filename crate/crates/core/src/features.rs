//! Per-article bibliometric feature vectors for external score-prediction
//! models.
//!
//! The ten features, in column order:
//!
//! 1. `nlcs`: the article's own NLCS
//! 2. `log_n_authors`, 3. `log_n_institutions`, 4. `log_n_countries`: ln(1 + count)
//! 5. `first_author_log_output`: ln(1 + corpus articles of the first author)
//! 6. `first_author_mnlcs`: mean NLCS of the first author's articles
//! 7. `max_author_mnlcs`: highest author MNLCS in the team
//! 8. `n_pages`: page count, or the median of the article's (first) field when missing
//! 9. `abstract_readability`: Flesch-Kincaid grade of the cleaned abstract
//! 10. `journal_mnlcs`: journal MNLCS for the publication year, pooled over three
//!     years when the article is less than three years old

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::export::fmt_num;
use crate::indicators::IndicatorError;
use crate::normalize::{ordered_mean, MultiFieldMode, NormalizeError, ReferenceStats};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("text has no words after cleaning")]
    EmptyText,
    #[error("author {0:?} has no corpus articles")]
    UnknownAuthor(String),
    #[error("article index {0} is out of range")]
    UnknownArticle(usize),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub nlcs: f64,
    pub log_n_authors: f64,
    pub log_n_institutions: f64,
    pub log_n_countries: f64,
    pub first_author_log_output: f64,
    pub first_author_mnlcs: f64,
    pub max_author_mnlcs: f64,
    pub n_pages: f64,
    pub abstract_readability: f64,
    pub journal_mnlcs: f64,
}

impl FeatureVector {
    pub const NAMES: [&'static str; 10] = [
        "nlcs",
        "log_n_authors",
        "log_n_institutions",
        "log_n_countries",
        "first_author_log_output",
        "first_author_mnlcs",
        "max_author_mnlcs",
        "n_pages",
        "abstract_readability",
        "journal_mnlcs",
    ];

    pub fn to_array(&self) -> [f64; 10] {
        [
            self.nlcs,
            self.log_n_authors,
            self.log_n_institutions,
            self.log_n_countries,
            self.first_author_log_output,
            self.first_author_mnlcs,
            self.max_author_mnlcs,
            self.n_pages,
            self.abstract_readability,
            self.journal_mnlcs,
        ]
    }
}

// ---------------------------------------------------------------------------
// Readability

static HEADINGS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?im)^\s*(background|introduction|aims?|objectives?|purpose|methods?|methodology|design|results?|findings|conclusions?|discussion|design/methodology/approach|originality/value|research limitations/implications|practical implications|social implications)\s*:\s*",
    )
    .unwrap()
});
static COPYRIGHT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(©|\(c\)|copyright\b)[^\n]*|all rights reserved\.?").unwrap());

/// Strips structured-abstract headings and copyright lines.
pub fn clean_abstract(text: &str) -> String {
    let without_rights = COPYRIGHT.replace_all(text, "");
    HEADINGS.replace_all(&without_rights, "").trim().to_string()
}

/// Vowel-group syllable estimate: contiguous runs of a, e, i, o, u, y, less
/// one for a trailing silent `e`, never below one.
pub fn count_syllables(word: &str) -> usize {
    let w: Vec<char> = word.to_lowercase().chars().filter(|c| c.is_alphabetic()).collect();
    let is_vowel = |c: char| "aeiouy".contains(c);
    let mut groups = 0;
    let mut prev = false;
    for &c in &w {
        let v = is_vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    if groups > 1 && w.last() == Some(&'e') && !w.ends_with(&['l', 'e']) {
        groups -= 1;
    }
    groups.max(1)
}

/// Flesch-Kincaid grade level:
/// 0.39·(words/sentences) + 11.8·(syllables/words) − 15.59.
pub fn readability(text: &str) -> Result<f64, FeatureError> {
    let words: Vec<&str> = text
        .split_whitespace()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .collect();
    if words.is_empty() {
        return Err(FeatureError::EmptyText);
    }
    let mut sentences = 0usize;
    let mut in_terminator = false;
    for c in text.chars() {
        let t = matches!(c, '.' | '!' | '?');
        if t && !in_terminator {
            sentences += 1;
        }
        in_terminator = t;
    }
    let sentences = sentences.max(1) as f64;
    let n_words = words.len() as f64;
    let syllables: usize = words.iter().map(|w| count_syllables(w)).sum();
    Ok(0.39 * (n_words / sentences) + 11.8 * (syllables as f64 / n_words) - 15.59)
}

// ---------------------------------------------------------------------------
// Author and journal aggregates

/// Mean NLCS over every corpus article by `author_id`.
pub fn author_mnlcs(author_id: &str, corpus: &Corpus, stats: &ReferenceStats) -> Result<f64, FeatureError> {
    let mut values = corpus
        .articles_by_author(author_id)
        .into_iter()
        .map(|i| stats.nlcs(i, MultiFieldMode::Arithmetic))
        .collect::<Result<Vec<_>, _>>()?;
    ordered_mean(&mut values).ok_or_else(|| FeatureError::UnknownAuthor(author_id.to_string()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Year against which article age is measured. Defaults to the latest
    /// publication year in the corpus.
    pub census_year: Option<i32>,
}

/// Precomputed corpus-wide inputs for building feature vectors.
pub struct FeatureBuilder<'a> {
    corpus: &'a Corpus,
    stats: &'a ReferenceStats,
    nlcs: Vec<Option<f64>>,
    author_articles: HashMap<&'a str, Vec<usize>>,
    census_year: i32,
    page_medians: BTreeMap<&'a str, f64>,
    page_median_all: f64,
    readability: Vec<Option<f64>>,
    readability_medians: BTreeMap<&'a str, f64>,
    readability_median_all: f64,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        (values[m - 1] + values[m]) / 2.0
    })
}

fn medians_by_field<'a>(stats: &'a ReferenceStats, values: &[Option<f64>]) -> (BTreeMap<&'a str, f64>, f64) {
    let mut by_field: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut all = Vec::new();
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = v {
            if let Some(f) = stats.fields(i).first() {
                by_field.entry(f.as_str()).or_default().push(*v);
            }
            all.push(*v);
        }
    }
    let medians = by_field
        .into_iter()
        .filter_map(|(f, mut vs)| median(&mut vs).map(|m| (f, m)))
        .collect();
    (medians, median(&mut all).unwrap_or(0.0))
}

impl<'a> FeatureBuilder<'a> {
    pub fn new(corpus: &'a Corpus, stats: &'a ReferenceStats, config: &FeatureConfig) -> Self {
        let nlcs = (0..corpus.len())
            .map(|i| stats.nlcs(i, MultiFieldMode::Arithmetic).ok())
            .collect();
        let mut author_articles: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, a) in corpus.articles().iter().enumerate() {
            let distinct: BTreeSet<&str> = a.authors.iter().map(String::as_str).collect();
            for au in distinct {
                author_articles.entry(au).or_default().push(i);
            }
        }
        let census_year = config
            .census_year
            .or_else(|| corpus.year_span().map(|(_, hi)| hi))
            .unwrap_or(0);
        let pages: Vec<Option<f64>> = corpus.articles().iter().map(|a| a.pages).collect();
        let (page_medians, page_median_all) = medians_by_field(stats, &pages);
        let readability: Vec<Option<f64>> = corpus
            .articles()
            .iter()
            .map(|a| {
                a.title_abstract_text
                    .as_deref()
                    .and_then(|t| readability(&clean_abstract(t)).ok())
            })
            .collect();
        let (readability_medians, readability_median_all) = medians_by_field(stats, &readability);
        FeatureBuilder {
            corpus,
            stats,
            nlcs,
            author_articles,
            census_year,
            page_medians,
            page_median_all,
            readability,
            readability_medians,
            readability_median_all,
        }
    }

    /// Number of corpus articles by `author_id`.
    pub fn author_output(&self, author_id: &str) -> usize {
        self.author_articles.get(author_id).map_or(0, Vec::len)
    }

    /// Mean NLCS of the author's articles whose NLCS is defined.
    pub fn author_mnlcs(&self, author_id: &str) -> Result<f64, FeatureError> {
        let mut values: Vec<f64> = self
            .author_articles
            .get(author_id)
            .into_iter()
            .flatten()
            .filter_map(|&i| self.nlcs[i])
            .collect();
        ordered_mean(&mut values).ok_or_else(|| FeatureError::UnknownAuthor(author_id.to_string()))
    }

    /// Journal MNLCS used for the article at `idx`.
    pub fn journal_mnlcs(&self, idx: usize) -> Result<f64, FeatureError> {
        let a = &self.corpus.articles()[idx];
        let age = self.census_year - a.year;
        let years: BTreeSet<i32> = if age >= 3 {
            [a.year].into()
        } else {
            (a.year - 2..=a.year).collect()
        };
        let doc_types = &self.stats.config().doc_types;
        let mut values: Vec<f64> = self
            .corpus
            .articles()
            .iter()
            .enumerate()
            .filter(|(_, b)| b.journal_id == a.journal_id && years.contains(&b.year) && doc_types.contains(&b.doc_type))
            .filter_map(|(i, _)| self.nlcs[i])
            .collect();
        ordered_mean(&mut values).ok_or_else(|| IndicatorError::EmptyJournalYear(a.journal_id.clone()).into())
    }

    pub fn feature_vector(&self, idx: usize) -> Result<FeatureVector, FeatureError> {
        let a = self
            .corpus
            .articles()
            .get(idx)
            .ok_or(FeatureError::UnknownArticle(idx))?;
        let nlcs = self.stats.nlcs(idx, MultiFieldMode::Arithmetic)?;
        let first = a.authors.first().map(String::as_str).unwrap_or("");
        let first_author_mnlcs = self.author_mnlcs(first)?;
        let mut max_author_mnlcs = f64::NEG_INFINITY;
        for au in &a.authors {
            max_author_mnlcs = max_author_mnlcs.max(self.author_mnlcs(au)?);
        }
        let field = self.stats.fields(idx).first().map(String::as_str).unwrap_or("");
        let n_pages = a
            .pages
            .or_else(|| self.page_medians.get(field).copied())
            .unwrap_or(self.page_median_all);
        let abstract_readability = self.readability[idx]
            .or_else(|| self.readability_medians.get(field).copied())
            .unwrap_or(self.readability_median_all);
        let log_count = |n: usize| (n as f64).ln_1p();
        Ok(FeatureVector {
            nlcs,
            log_n_authors: log_count(a.authors.len()),
            log_n_institutions: log_count(a.institutions.len()),
            log_n_countries: log_count(a.countries.len()),
            first_author_log_output: log_count(self.author_output(first)),
            first_author_mnlcs,
            max_author_mnlcs,
            n_pages,
            abstract_readability,
            journal_mnlcs: self.journal_mnlcs(idx)?,
        })
    }

    pub fn all(&self) -> Result<Vec<FeatureVector>, FeatureError> {
        (0..self.corpus.len()).map(|i| self.feature_vector(i)).collect()
    }
}

/// Writes one row per article: `article_id` followed by the ten feature columns.
pub fn write_features_csv(corpus: &Corpus, vectors: &[FeatureVector], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "article_id,{}", FeatureVector::NAMES.join(","))?;
    for (a, v) in corpus.articles().iter().zip(vectors) {
        let cols: Vec<String> = v.to_array().iter().map(|x| fmt_num(*x)).collect();
        writeln!(out, "{},{}", a.id, cols.join(","))?;
    }
    Ok(())
}
