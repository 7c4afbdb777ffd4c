//! Percentile membership, journal indicators, PageRank and the h-index.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::export::fmt_num;
use crate::normalize::{ordered_mean, ReferenceStats};

#[derive(Debug, Error)]
pub enum IndicatorError {
    #[error("percentile threshold {0} is outside (0, 100]")]
    ThresholdOutOfRange(f64),
    #[error("percentile thresholds must be strictly ascending")]
    ThresholdsNotAscending,
    #[error("unit has no articles")]
    EmptyUnit,
    #[error("journal {journal:?} has no citable items in {first}..={last}")]
    NoCitableItems { journal: String, first: i32, last: i32 },
    #[error("journal {0:?} has no qualifying articles in the requested years")]
    EmptyJournalYear(String),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("edge endpoint {0} is out of range")]
    BadNode(usize),
    #[error("PageRank did not converge within {} iterations", partial.iterations)]
    NotConverged { partial: PageRankResult },
    #[error("window must be at least one year")]
    InvalidWindow,
    #[error("citation edges are required")]
    EdgesUnavailable,
}

// ---------------------------------------------------------------------------
// Percentiles

/// Top-X% thresholds, strictly ascending, each in (0, 100].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileSpec {
    thresholds: Vec<f64>,
}

impl PercentileSpec {
    pub fn new(thresholds: Vec<f64>) -> Result<Self, IndicatorError> {
        for &x in &thresholds {
            if !(x > 0.0 && x <= 100.0) {
                return Err(IndicatorError::ThresholdOutOfRange(x));
            }
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(IndicatorError::ThresholdsNotAscending);
        }
        Ok(PercentileSpec { thresholds })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }
}

impl Default for PercentileSpec {
    fn default() -> Self {
        PercentileSpec {
            thresholds: vec![1.0, 5.0, 10.0, 50.0],
        }
    }
}

/// Number of entries of `sorted_desc` strictly greater than `c`.
fn strictly_greater(sorted_desc: &[u64], c: u64) -> usize {
    sorted_desc.partition_point(|&v| v > c)
}

/// Whether an article with `greater` strictly more-cited peers in a group of
/// `size` is in the top `x` percent. Ties share membership.
fn in_top(greater: usize, size: usize, x: f64) -> bool {
    (greater as f64) * 100.0 < x * size as f64
}

/// Top-X% membership for each member of one field-year group.
/// Result is indexed `[article][threshold]`.
pub fn percentile_flags(group_counts: &[u64], spec: &PercentileSpec) -> Vec<Vec<bool>> {
    let mut sorted = group_counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    group_counts
        .iter()
        .map(|&c| {
            let g = strictly_greater(&sorted, c);
            spec.thresholds.iter().map(|&x| in_top(g, sorted.len(), x)).collect()
        })
        .collect()
}

/// Percentage of a unit's articles in the top X%. Memberships are in [0, 1]
/// so that fractional (multi-field) membership is supported.
pub fn percentile_share(memberships: &[f64]) -> Result<f64, IndicatorError> {
    if memberships.is_empty() {
        return Err(IndicatorError::EmptyUnit);
    }
    Ok(100.0 * memberships.iter().sum::<f64>() / memberships.len() as f64)
}

/// Corpus-wide top-X% membership, indexed `[article][threshold]`.
///
/// Each article is ranked within every field-year group of its fields (the
/// groups hold only reference document types). Membership is the fraction of
/// those groups in which it is in the top X%, so single-field articles score
/// 0 or 1.
pub fn percentile_memberships(stats: &ReferenceStats, corpus: &Corpus, spec: &PercentileSpec) -> Vec<Vec<f64>> {
    let doc_types = &stats.config().doc_types;
    let mut groups: BTreeMap<(&str, i32), Vec<u64>> = BTreeMap::new();
    for (i, a) in corpus.articles().iter().enumerate() {
        if !doc_types.contains(&a.doc_type) {
            continue;
        }
        for f in stats.fields(i) {
            groups.entry((f.as_str(), a.year)).or_default().push(stats.count(i));
        }
    }
    for counts in groups.values_mut() {
        counts.sort_unstable_by(|a, b| b.cmp(a));
    }
    corpus
        .articles()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let c = stats.count(i);
            let ranked: Vec<(usize, usize)> = stats
                .fields(i)
                .iter()
                .filter_map(|f| groups.get(&(f.as_str(), a.year)))
                .map(|g| (strictly_greater(g, c), g.len()))
                .collect();
            spec.thresholds
                .iter()
                .map(|&x| {
                    if ranked.is_empty() {
                        return 0.0;
                    }
                    let hits = ranked.iter().filter(|(g, n)| in_top(*g, *n, x)).count();
                    hits as f64 / ranked.len() as f64
                })
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Journal indicators

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JournalIndicator {
    JifWindow,
    Jmnlcs,
    JournalMncs,
    Pagerank,
}

impl JournalIndicator {
    pub fn as_str(self) -> &'static str {
        match self {
            JournalIndicator::JifWindow => "jif_window",
            JournalIndicator::Jmnlcs => "jmnlcs",
            JournalIndicator::JournalMncs => "journal_mncs",
            JournalIndicator::Pagerank => "pagerank",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalImpactResult {
    pub journal_id: String,
    pub indicator: JournalIndicator,
    pub value: f64,
    pub window_years: u32,
    pub year: i32,
}

/// Writes `journal_id,indicator,year,window,value`.
pub fn write_journal_csv(results: &[JournalImpactResult], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "journal_id,indicator,year,window,value")?;
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.journal_id,
            r.indicator.as_str(),
            r.year,
            r.window_years,
            fmt_num(r.value)
        )?;
    }
    Ok(())
}

/// Windowed journal impact factor for census year `year`.
///
/// The numerator counts citations made in `year` to *every* item the journal
/// published in `year-window ..= year-1`; the denominator counts only the
/// citable items (articles and reviews) from those years.
pub fn jif(
    corpus: &Corpus,
    journal_id: &str,
    year: i32,
    window: u32,
    include_self: bool,
) -> Result<f64, IndicatorError> {
    if window == 0 {
        return Err(IndicatorError::InvalidWindow);
    }
    if !corpus.has_edges() {
        return Err(IndicatorError::EdgesUnavailable);
    }
    let (first, last) = (year - window as i32, year - 1);
    let mut citable = 0usize;
    let mut cites = 0usize;
    for (i, a) in corpus.articles().iter().enumerate() {
        if a.journal_id != journal_id || a.year < first || a.year > last {
            continue;
        }
        if a.doc_type.is_citable() {
            citable += 1;
        }
        cites += corpus
            .citers(i)
            .unwrap_or(&[])
            .iter()
            .filter(|c| c.citing_year == year && (include_self || !c.self_citation))
            .count();
    }
    if citable == 0 {
        return Err(IndicatorError::NoCitableItems {
            journal: journal_id.to_string(),
            first,
            last,
        });
    }
    Ok(cites as f64 / citable as f64)
}

/// Mean of per-article `values` over the journal's reference-type articles
/// published in `years`. With NLCS values this is the JMNLCS; with NCS values
/// it is the journal-level MNCS.
pub fn journal_mean(
    corpus: &Corpus,
    stats: &ReferenceStats,
    values: &[f64],
    journal_id: &str,
    years: &BTreeSet<i32>,
) -> Result<f64, IndicatorError> {
    let doc_types = &stats.config().doc_types;
    let mut selected: Vec<f64> = corpus
        .articles()
        .iter()
        .zip(values)
        .filter(|(a, _)| a.journal_id == journal_id && years.contains(&a.year) && doc_types.contains(&a.doc_type))
        .map(|(_, v)| *v)
        .collect();
    ordered_mean(&mut selected).ok_or_else(|| IndicatorError::EmptyJournalYear(journal_id.to_string()))
}

// ---------------------------------------------------------------------------
// PageRank

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageRankConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        PageRankConfig {
            damping: 0.85,
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageRankResult {
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// A weighted directed graph over `n` nodes; `(from, to, weight)` means
/// `from` cites `to`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CitationGraph {
    pub labels: Vec<String>,
    pub edges: Vec<(usize, usize, f64)>,
}

impl CitationGraph {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Article citation graph restricted to citing documents inside the corpus.
pub fn article_graph(corpus: &Corpus, include_self: bool) -> CitationGraph {
    let labels: Vec<String> = corpus.articles().iter().map(|a| a.id.clone()).collect();
    let mut edges = Vec::new();
    for cited in 0..corpus.len() {
        for c in corpus.citers(cited).unwrap_or(&[]) {
            if !include_self && c.self_citation {
                continue;
            }
            if let Some(citing) = corpus.position(&c.citing_id) {
                edges.push((citing, cited, 1.0));
            }
        }
    }
    edges.sort_by_key(|e| (e.0, e.1));
    CitationGraph { labels, edges }
}

/// Journal citation graph: article edges collapsed by journal, with parallel
/// edges summed into weights.
pub fn journal_graph(corpus: &Corpus, include_self: bool) -> CitationGraph {
    let journals: BTreeSet<&str> = corpus.articles().iter().map(|a| a.journal_id.as_str()).collect();
    let labels: Vec<String> = journals.iter().map(|s| s.to_string()).collect();
    let pos: HashMap<&str, usize> = journals.iter().enumerate().map(|(i, j)| (*j, i)).collect();
    let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let articles = corpus.articles();
    for (from, to, w) in article_graph(corpus, include_self).edges {
        let key = (
            pos[articles[from].journal_id.as_str()],
            pos[articles[to].journal_id.as_str()],
        );
        *weights.entry(key).or_insert(0.0) += w;
    }
    CitationGraph {
        labels,
        edges: weights.into_iter().map(|((a, b), w)| (a, b, w)).collect(),
    }
}

/// Power-iteration PageRank with uniform teleportation and uniform
/// redistribution of dangling mass. Stops when the L1 change falls below
/// `tol`. On hitting `max_iter` the partial result is returned inside
/// [`IndicatorError::NotConverged`].
pub fn pagerank(graph: &CitationGraph, config: &PageRankConfig) -> Result<PageRankResult, IndicatorError> {
    let n = graph.len();
    if n == 0 {
        return Err(IndicatorError::EmptyGraph);
    }
    let mut out_weight = vec![0.0; n];
    for &(a, b, w) in &graph.edges {
        if a >= n || b >= n {
            return Err(IndicatorError::BadNode(a.max(b)));
        }
        out_weight[a] += w;
    }
    // Transition list grouped by target, in a fixed order.
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(a, b, w) in &graph.edges {
        incoming[b].push((a, w / out_weight[a]));
    }
    let d = config.damping;
    let nf = n as f64;
    let mut x = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    for iter in 1..=config.max_iter {
        let dangling: f64 = (0..n).filter(|&i| out_weight[i] == 0.0).map(|i| x[i]).sum();
        let base = (1.0 - d) / nf + d * dangling / nf;
        for (i, slot) in next.iter_mut().enumerate() {
            *slot = base + d * incoming[i].iter().map(|&(j, p)| p * x[j]).sum::<f64>();
        }
        let delta: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if delta < config.tol {
            return Ok(PageRankResult {
                scores: x,
                iterations: iter,
                converged: true,
            });
        }
    }
    Err(IndicatorError::NotConverged {
        partial: PageRankResult {
            scores: x,
            iterations: config.max_iter,
            converged: false,
        },
    })
}

// ---------------------------------------------------------------------------
// h-index

/// Largest h such that at least h items have at least h citations.
///
/// Not suitable for comparing people: it grows with career length and field
/// citation norms.
pub fn h_index(counts: &[u64]) -> usize {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    sorted.iter().enumerate().take_while(|(i, &c)| c > *i as u64).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Article, CitationEdge, DocType, IngestOptions};

    #[test]
    fn hundred_article_fixture() {
        let counts: Vec<u64> = (0..100).collect();
        let spec = PercentileSpec::new(vec![1.0, 5.0, 10.0, 50.0, 98.0, 99.0, 100.0]).unwrap();
        let flags = percentile_flags(&counts, &spec);
        assert!(flags[99].iter().all(|&f| f));
        assert_eq!(flags[1], [false, false, false, false, false, true, true]);
        assert_eq!(flags[0], [false, false, false, false, false, false, true]);
    }

    #[test]
    fn ties_share_membership() {
        let spec = PercentileSpec::new(vec![40.0]).unwrap();
        let flags = percentile_flags(&[5, 5, 5, 1, 0], &spec);
        let hits: Vec<bool> = flags.iter().map(|f| f[0]).collect();
        assert_eq!(hits, [true, true, true, false, false]);
    }

    #[test]
    fn single_article_group() {
        let spec = PercentileSpec::new(vec![0.1, 1.0, 100.0]).unwrap();
        assert!(percentile_flags(&[3], &spec)[0].iter().all(|&f| f));
    }

    #[test]
    fn spec_validation() {
        assert!(PercentileSpec::new(vec![0.0]).is_err());
        assert!(PercentileSpec::new(vec![101.0]).is_err());
        assert!(PercentileSpec::new(vec![5.0, 1.0]).is_err());
        assert!(PercentileSpec::new(vec![5.0, 5.0]).is_err());
    }

    #[test]
    fn shares() {
        let mut m = vec![0.0; 100];
        m[..3].fill(1.0);
        assert_eq!(percentile_share(&m).unwrap(), 3.0);
        assert_eq!(percentile_share(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(percentile_share(&[]), Err(IndicatorError::EmptyUnit)));
    }

    fn journal_corpus(editorial_cites: usize) -> Corpus {
        let mut articles = Vec::new();
        for i in 0..10 {
            let mut a = Article::new(format!("A{i}"), if i < 5 { 2019 } else { 2018 }, "J");
            a.fields = vec!["F".into()];
            a.authors = vec!["x".into()];
            articles.push(a);
        }
        let mut ed = Article::new("E", 2019, "J");
        ed.doc_type = DocType::Editorial;
        ed.fields = vec!["F".into()];
        ed.authors = vec!["x".into()];
        articles.push(ed);
        let (mut c, _) = Corpus::from_articles(articles, &IngestOptions::default());
        let mut edges = Vec::new();
        for k in 0..25 {
            edges.push(CitationEdge {
                citing_id: format!("C{k}"),
                citing_year: 2020,
                cited_id: format!("A{}", k % 10),
            });
        }
        for k in 0..editorial_cites {
            edges.push(CitationEdge {
                citing_id: format!("D{k}"),
                citing_year: 2020,
                cited_id: "E".into(),
            });
        }
        // Citations from other years never count.
        edges.push(CitationEdge {
            citing_id: "late".into(),
            citing_year: 2021,
            cited_id: "A0".into(),
        });
        c.attach_edges(edges.into_iter().enumerate().map(|(i, e)| (i + 1, e)));
        c
    }

    #[test]
    fn jif_counts() {
        assert_eq!(jif(&journal_corpus(0), "J", 2020, 2, true).unwrap(), 2.5);
        assert_eq!(jif(&journal_corpus(5), "J", 2020, 2, true).unwrap(), 3.0);
        assert!(matches!(
            jif(&journal_corpus(0), "J", 2022, 2, true),
            Err(IndicatorError::NoCitableItems { .. })
        ));
        // 2021 census: five citable 2019 items, one 2021 citation.
        assert_eq!(jif(&journal_corpus(0), "J", 2021, 2, true).unwrap(), 0.2);
    }

    #[test]
    fn jif_no_current_citations() {
        assert_eq!(jif(&journal_corpus(0), "J", 2020, 1, true).unwrap(), 3.0);
        let mut c = journal_corpus(0);
        c.attach_edges(Vec::new());
        assert_eq!(jif(&c, "J", 2020, 2, true).unwrap(), 0.0);
    }

    #[test]
    fn two_cycle_and_edgeless() {
        let g = CitationGraph {
            labels: vec!["a".into(), "b".into()],
            edges: vec![(0, 1, 1.0), (1, 0, 1.0)],
        };
        let r = pagerank(&g, &PageRankConfig::default()).unwrap();
        assert!((r.scores[0] - 0.5).abs() < 1e-12 && (r.scores[1] - 0.5).abs() < 1e-12);

        let g = CitationGraph {
            labels: (0..4).map(|i| i.to_string()).collect(),
            edges: vec![],
        };
        let r = pagerank(&g, &PageRankConfig::default()).unwrap();
        assert!(r.scores.iter().all(|s| (s - 0.25).abs() < 1e-15));
    }

    #[test]
    fn not_converged_returns_partial() {
        let g = CitationGraph {
            labels: vec!["a".into(), "b".into(), "c".into()],
            edges: vec![(0, 1, 1.0), (1, 2, 1.0)],
        };
        let cfg = PageRankConfig {
            max_iter: 1,
            ..Default::default()
        };
        match pagerank(&g, &cfg) {
            Err(IndicatorError::NotConverged { partial }) => {
                assert!(!partial.converged);
                assert!((partial.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
        assert!(matches!(
            pagerank(&CitationGraph::default(), &cfg),
            Err(IndicatorError::EmptyGraph)
        ));
    }

    #[test]
    fn journal_graph_collapses_edges() {
        let mut arts = Vec::new();
        for (id, j) in [("a1", "J1"), ("a2", "J1"), ("b1", "J2")] {
            let mut a = Article::new(id, 2015, j);
            a.fields = vec!["F".into()];
            a.authors = vec![id.to_string()];
            arts.push(a);
        }
        let (mut c, _) = Corpus::from_articles(arts, &IngestOptions::default());
        let e = |a: &str, b: &str| CitationEdge {
            citing_id: a.into(),
            citing_year: 2016,
            cited_id: b.into(),
        };
        c.attach_edges(vec![
            (1, e("a1", "b1")),
            (2, e("a2", "b1")),
            (3, e("b1", "a1")),
            (4, e("ext", "a1")),
        ]);
        let g = journal_graph(&c, true);
        assert_eq!(g.labels, ["J1", "J2"]);
        assert_eq!(g.edges, vec![(0, 1, 2.0), (1, 0, 1.0)]);
    }

    #[test]
    fn h_index_examples() {
        assert_eq!(h_index(&[10, 8, 5, 4, 3]), 4);
        assert_eq!(h_index(&[]), 0);
        assert_eq!(h_index(&[0, 0, 0]), 0);
        assert_eq!(h_index(&[1]), 1);
        assert_eq!(h_index(&[100, 100]), 2);
    }
}
