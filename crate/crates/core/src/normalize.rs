//! Field-and-year reference statistics and per-article normalized scores.
//!
//! Every article is compared against the set of corpus articles sharing its
//! field and publication year (its reference group, which includes the
//! article itself):
//!
//! * NCS  = c / c̄, where c̄ is the group's mean citation count;
//! * NLCS = ln(1 + c) / mean(ln(1 + c)) over the group.
//!
//! Both average exactly 1 over any complete single-field group. Articles with
//! several field codes are normalized against the arithmetic (default) or
//! harmonic mean of their per-field denominators.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{resolve_fields, Classification, Corpus, CorpusError, DocType};
use crate::export::fmt_num;

#[derive(Debug, Error)]
pub enum NormalizeError {
    #[error("citation edges are required for a bounded citation window")]
    EdgesUnavailable,
    #[error("article {0:?}: cited but its reference group has no citations")]
    NormalizationUndefined(String),
    #[error("no reference statistics for field {field:?} in {year}")]
    MissingReference { field: String, year: i32 },
    #[error("window must be at least one year")]
    InvalidWindow,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Maximum citing-minus-cited year gap for a citation to count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowSpec {
    Bounded(u32),
    Unlimited,
}

impl WindowSpec {
    pub fn years(n: u32) -> Result<Self, NormalizeError> {
        if n == 0 {
            Err(NormalizeError::InvalidWindow)
        } else {
            Ok(WindowSpec::Bounded(n))
        }
    }

    /// Whether a citation from `citing_year` to an article from `cited_year`
    /// falls inside the window. The boundary year is included.
    pub fn admits(self, cited_year: i32, citing_year: i32) -> bool {
        match self {
            WindowSpec::Unlimited => true,
            WindowSpec::Bounded(w) => i64::from(citing_year) - i64::from(cited_year) <= i64::from(w),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiFieldMode {
    #[default]
    Arithmetic,
    Harmonic,
}

/// Reference statistics of one (field, year) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldYearStats {
    pub field: String,
    pub year: i32,
    pub n_articles: usize,
    pub mean_citations: f64,
    pub mean_log_citations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsConfig {
    pub window: WindowSpec,
    /// Document types admitted to reference groups.
    pub doc_types: BTreeSet<DocType>,
    pub include_self_citations: bool,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            window: WindowSpec::Unlimited,
            doc_types: [DocType::Article, DocType::Review].into_iter().collect(),
            include_self_citations: true,
        }
    }
}

/// Citations to the article at `idx` that fall inside `window`.
///
/// An unlimited window on a corpus without edges falls back to the ingested
/// citation count.
pub fn windowed_count(
    corpus: &Corpus,
    idx: usize,
    window: WindowSpec,
    include_self: bool,
) -> Result<u64, NormalizeError> {
    let Some(citers) = corpus.citers(idx) else {
        return match window {
            WindowSpec::Unlimited => Ok(corpus.citations(idx, include_self)),
            WindowSpec::Bounded(_) => Err(NormalizeError::EdgesUnavailable),
        };
    };
    let year = corpus.articles()[idx].year;
    Ok(citers
        .iter()
        .filter(|c| include_self || !c.self_citation)
        .filter(|c| window.admits(year, c.citing_year))
        .count() as u64)
}

/// Reference statistics for a corpus, together with the per-article
/// citation counts and field codes they were computed from.
#[derive(Debug, Clone)]
pub struct ReferenceStats {
    config: StatsConfig,
    groups: BTreeMap<(String, i32), FieldYearStats>,
    counts: Vec<u64>,
    fields: Vec<Vec<String>>,
    years: Vec<i32>,
    ids: Vec<String>,
}

/// Builds (field, year) reference statistics. An article with k field codes
/// contributes to all k groups.
pub fn build_stats(
    corpus: &Corpus,
    classification: &Classification,
    config: &StatsConfig,
) -> Result<ReferenceStats, NormalizeError> {
    let counts = (0..corpus.len())
        .into_par_iter()
        .map(|i| windowed_count(corpus, i, config.window, config.include_self_citations))
        .collect::<Result<Vec<_>, _>>()?;
    let fields = corpus
        .articles()
        .iter()
        .map(|a| resolve_fields(a, classification).map(<[String]>::to_vec))
        .collect::<Result<Vec<_>, _>>()?;

    let mut members: BTreeMap<(String, i32), Vec<u64>> = BTreeMap::new();
    for (i, a) in corpus.articles().iter().enumerate() {
        if !config.doc_types.contains(&a.doc_type) {
            continue;
        }
        for f in &fields[i] {
            members.entry((f.clone(), a.year)).or_default().push(counts[i]);
        }
    }
    let groups = members
        .into_iter()
        .map(|((field, year), mut cs)| {
            // Summing in sorted order makes the statistics independent of row order.
            cs.sort_unstable();
            let n = cs.len() as f64;
            let stats = FieldYearStats {
                field: field.clone(),
                year,
                n_articles: cs.len(),
                mean_citations: cs.iter().map(|&c| c as f64).sum::<f64>() / n,
                mean_log_citations: cs.iter().map(|&c| (c as f64).ln_1p()).sum::<f64>() / n,
            };
            ((field, year), stats)
        })
        .collect();
    Ok(ReferenceStats {
        config: config.clone(),
        groups,
        counts,
        fields,
        years: corpus.articles().iter().map(|a| a.year).collect(),
        ids: corpus.articles().iter().map(|a| a.id.clone()).collect(),
    })
}

impl ReferenceStats {
    pub fn config(&self) -> &StatsConfig {
        &self.config
    }

    pub fn groups(&self) -> impl Iterator<Item = &FieldYearStats> {
        self.groups.values()
    }

    pub fn group(&self, field: &str, year: i32) -> Option<&FieldYearStats> {
        self.groups.get(&(field.to_string(), year))
    }

    /// Windowed citation count of the article at `idx`.
    pub fn count(&self, idx: usize) -> u64 {
        self.counts[idx]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Resolved field codes of the article at `idx`.
    pub fn fields(&self, idx: usize) -> &[String] {
        &self.fields[idx]
    }

    pub fn year(&self, idx: usize) -> i32 {
        self.years[idx]
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    fn reference_groups(&self, idx: usize) -> Result<Vec<&FieldYearStats>, NormalizeError> {
        let year = self.years[idx];
        self.fields[idx]
            .iter()
            .map(|f| {
                self.group(f, year)
                    .ok_or_else(|| NormalizeError::MissingReference { field: f.clone(), year })
            })
            .collect()
    }

    pub fn ncs(&self, idx: usize, mode: MultiFieldMode) -> Result<f64, NormalizeError> {
        let means: Vec<f64> = self.reference_groups(idx)?.iter().map(|g| g.mean_citations).collect();
        ncs_value(self.counts[idx], &means, mode)
            .ok_or_else(|| NormalizeError::NormalizationUndefined(self.ids[idx].clone()))
    }

    pub fn nlcs(&self, idx: usize, mode: MultiFieldMode) -> Result<f64, NormalizeError> {
        let means: Vec<f64> = self
            .reference_groups(idx)?
            .iter()
            .map(|g| g.mean_log_citations)
            .collect();
        nlcs_value(self.counts[idx], &means, mode)
            .ok_or_else(|| NormalizeError::NormalizationUndefined(self.ids[idx].clone()))
    }

    /// NCS for every article, in corpus order.
    pub fn all_ncs(&self, mode: MultiFieldMode) -> Result<Vec<f64>, NormalizeError> {
        (0..self.len()).map(|i| self.ncs(i, mode)).collect()
    }

    /// NLCS for every article, in corpus order.
    pub fn all_nlcs(&self, mode: MultiFieldMode) -> Result<Vec<f64>, NormalizeError> {
        (0..self.len()).map(|i| self.nlcs(i, mode)).collect()
    }

    /// Writes `field,year,n,mean_citations,mean_log_citations`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "field,year,n,mean_citations,mean_log_citations")?;
        for g in self.groups.values() {
            writeln!(
                out,
                "{},{},{},{},{}",
                g.field,
                g.year,
                g.n_articles,
                fmt_num(g.mean_citations),
                fmt_num(g.mean_log_citations)
            )?;
        }
        Ok(())
    }
}

/// Mean of `values` summed in ascending order, so the result does not depend
/// on input order. Empty input gives `None`.
pub fn ordered_mean(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Combines per-field denominators. A harmonic mean with a zero term is zero.
pub fn combine_denominators(values: &[f64], mode: MultiFieldMode) -> f64 {
    match (values, mode) {
        ([], _) => 0.0,
        ([v], _) => *v,
        (_, MultiFieldMode::Arithmetic) => values.iter().sum::<f64>() / values.len() as f64,
        (_, MultiFieldMode::Harmonic) => {
            if values.contains(&0.0) {
                0.0
            } else {
                values.len() as f64 / values.iter().map(|v| 1.0 / v).sum::<f64>()
            }
        }
    }
}

fn ratio(numerator: f64, denominator: f64) -> Option<f64> {
    match (numerator == 0.0, denominator == 0.0) {
        // The article matches its own degenerate reference group.
        (true, true) => Some(1.0),
        (false, true) => None,
        _ => Some(numerator / denominator),
    }
}

/// c divided by the (combined) mean citation count of the reference groups.
/// `None` when the article is cited but the denominator is zero.
pub fn ncs_value(citations: u64, group_means: &[f64], mode: MultiFieldMode) -> Option<f64> {
    ratio(citations as f64, combine_denominators(group_means, mode))
}

/// ln(1+c) divided by the (combined) mean of ln(1+c) over the reference groups.
pub fn nlcs_value(citations: u64, group_log_means: &[f64], mode: MultiFieldMode) -> Option<f64> {
    ratio((citations as f64).ln_1p(), combine_denominators(group_log_means, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Article, CitationEdge, IngestOptions};

    fn corpus_with(counts: &[(u64, &[&str], DocType)]) -> Corpus {
        let articles = counts
            .iter()
            .enumerate()
            .map(|(i, (c, fields, dt))| {
                let mut a = Article::new(format!("A{i}"), 2015, "J");
                a.citations = Some(*c);
                a.fields = fields.iter().map(|s| s.to_string()).collect();
                a.authors = vec![format!("au{i}")];
                a.doc_type = *dt;
                a
            })
            .collect();
        let (c, r) = Corpus::from_articles(articles, &IngestOptions::default());
        assert!(r.is_clean());
        c
    }

    fn stats(c: &Corpus) -> ReferenceStats {
        build_stats(c, &Classification::inline(), &StatsConfig::default()).unwrap()
    }

    #[test]
    fn group_means_from_counts() {
        let c = corpus_with(&[0, 1, 2, 3, 4].map(|n| (n, &["F"][..], DocType::Article)));
        let s = stats(&c);
        let g = s.group("F", 2015).unwrap();
        assert_eq!(g.n_articles, 5);
        assert_eq!(g.mean_citations, 2.0);
        let oracle = (1..=5).map(|k| (k as f64).ln()).sum::<f64>() / 5.0;
        assert!((g.mean_log_citations - oracle).abs() < 1e-15);
        let nlcs = s.nlcs(4, MultiFieldMode::Arithmetic).unwrap();
        assert!((nlcs - 5f64.ln() / oracle).abs() < 1e-12);
    }

    #[test]
    fn uncited_group() {
        let c = corpus_with(&[(0, &["F"][..], DocType::Article), (0, &["F"][..], DocType::Review)]);
        let s = stats(&c);
        let g = s.group("F", 2015).unwrap();
        assert_eq!((g.mean_citations, g.mean_log_citations), (0.0, 0.0));
        assert_eq!(s.ncs(0, MultiFieldMode::Arithmetic).unwrap(), 1.0);
        assert_eq!(s.nlcs(0, MultiFieldMode::Arithmetic).unwrap(), 1.0);
    }

    #[test]
    fn multi_field_article_in_both_groups() {
        let c = corpus_with(&[
            (3, &["A", "B"][..], DocType::Article),
            (1, &["A"][..], DocType::Article),
        ]);
        let s = stats(&c);
        assert_eq!(s.group("A", 2015).unwrap().n_articles, 2);
        assert_eq!(s.group("B", 2015).unwrap().n_articles, 1);
    }

    #[test]
    fn editorials_excluded_from_reference() {
        let c = corpus_with(&[(4, &["F"][..], DocType::Article), (10, &["F"][..], DocType::Editorial)]);
        let s = stats(&c);
        assert_eq!(s.group("F", 2015).unwrap().n_articles, 1);
        assert_eq!(s.ncs(1, MultiFieldMode::Arithmetic).unwrap(), 2.5);
    }

    #[test]
    fn excluded_article_with_zero_reference_is_undefined() {
        let c = corpus_with(&[(0, &["F"][..], DocType::Article), (2, &["F"][..], DocType::Letter)]);
        let s = stats(&c);
        assert!(matches!(
            s.ncs(1, MultiFieldMode::Arithmetic),
            Err(NormalizeError::NormalizationUndefined(_))
        ));
    }

    #[test]
    fn ncs_examples() {
        assert_eq!(ncs_value(10, &[5.0], MultiFieldMode::Arithmetic), Some(2.0));
        assert_eq!(ncs_value(5, &[5.0], MultiFieldMode::Arithmetic), Some(1.0));
        assert_eq!(ncs_value(10, &[4.0, 6.0], MultiFieldMode::Arithmetic), Some(2.0));
        // harmonic mean of 4 and 6 is 4.8
        assert!((ncs_value(10, &[4.0, 6.0], MultiFieldMode::Harmonic).unwrap() - 10.0 / 4.8).abs() < 1e-15);
        assert_eq!(ncs_value(0, &[3.0], MultiFieldMode::Arithmetic), Some(0.0));
        assert_eq!(ncs_value(1, &[0.0], MultiFieldMode::Arithmetic), None);
    }

    #[test]
    fn nlcs_examples() {
        assert_eq!(nlcs_value(0, &[1.3], MultiFieldMode::Arithmetic), Some(0.0));
        // An article alone in its group normalizes to 1 whatever its count.
        for c in [0u64, 1, 7, 1000] {
            let v = nlcs_value(c, &[(c as f64).ln_1p()], MultiFieldMode::Arithmetic).unwrap();
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn harmonic_with_zero_term() {
        assert_eq!(combine_denominators(&[0.0, 2.0], MultiFieldMode::Harmonic), 0.0);
        assert_eq!(combine_denominators(&[2.0, 2.0], MultiFieldMode::Harmonic), 2.0);
    }

    fn with_edges(years: &[i32]) -> Corpus {
        let mut a = Article::new("A", 2011, "J");
        a.fields = vec!["F".into()];
        a.authors = vec!["x".into()];
        let (mut c, _) = Corpus::from_articles(vec![a], &IngestOptions::default());
        c.attach_edges(years.iter().enumerate().map(|(i, y)| {
            (
                i + 1,
                CitationEdge {
                    citing_id: format!("C{i}"),
                    citing_year: *y,
                    cited_id: "A".into(),
                },
            )
        }));
        c
    }

    #[test]
    fn window_boundaries() {
        let c = with_edges(&[2012, 2014]);
        assert_eq!(windowed_count(&c, 0, WindowSpec::Bounded(3), true).unwrap(), 2);
        let c = with_edges(&[2015]);
        assert_eq!(windowed_count(&c, 0, WindowSpec::Bounded(3), true).unwrap(), 0);
        let c = with_edges(&[2012, 2015, 2030]);
        assert_eq!(windowed_count(&c, 0, WindowSpec::Unlimited, true).unwrap(), 3);
        assert_eq!(
            windowed_count(&c, 0, WindowSpec::Unlimited, true).unwrap(),
            c.citations(0, true)
        );
    }

    #[test]
    fn bounded_window_needs_edges() {
        let c = corpus_with(&[(1, &["F"][..], DocType::Article)]);
        assert!(matches!(
            windowed_count(&c, 0, WindowSpec::Bounded(2), true),
            Err(NormalizeError::EdgesUnavailable)
        ));
        assert_eq!(windowed_count(&c, 0, WindowSpec::Unlimited, true).unwrap(), 1);
        assert!(WindowSpec::years(0).is_err());
    }

    #[test]
    fn stats_csv() {
        let c = corpus_with(&[(1, &["F"][..], DocType::Article), (2, &["F"][..], DocType::Article)]);
        let mut buf = Vec::new();
        stats(&c).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "field,year,n,mean_citations,mean_log_citations"
        );
        assert!(text.contains("F,2015,2,1.50000,"));
    }
}
