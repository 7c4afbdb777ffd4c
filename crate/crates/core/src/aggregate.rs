//! Unit-level rollups, quota-based score prediction and the gain analysis
//! that measures who wins and loses when indicator-derived scores replace
//! some human scores.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, UnitMembership};
use crate::credit::{unit_credit, CreditError, CreditScheme};
use crate::export::fmt_num;
use crate::indicators::h_index;
use crate::validate::{pearson, CorrelationResult, ValidateError};

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("unit {0:?} has no articles")]
    EmptyUnit(String),
    #[error("missing values for articles: {}", .0.join(", "))]
    MissingValue(Vec<String>),
    #[error("unit {0:?} receives zero credit for all of its articles")]
    ZeroCredit(String),
    #[error("quota covers {quota} articles but {values} were given")]
    QuotaMismatch { quota: usize, values: usize },
    #[error("replacement fraction {0} is outside (0, 1]")]
    FractionOutOfRange(f64),
    #[error("score vectors have {0} and {1} entries for {2} articles")]
    ScoreLengthMismatch(usize, usize, usize),
    #[error("need at least one iteration")]
    NoIterations,
    #[error(transparent)]
    Credit(#[from] CreditError),
    #[error(transparent)]
    Validate(#[from] ValidateError),
}

/// Funding weight per star score. Scores without an entry weigh 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundingWeights {
    pub weights: BTreeMap<u8, f64>,
}

impl Default for FundingWeights {
    fn default() -> Self {
        FundingWeights {
            weights: [(4, 1.0), (3, 0.25)].into_iter().collect(),
        }
    }
}

impl FundingWeights {
    pub fn weight(&self, score: u8) -> f64 {
        self.weights.get(&score).copied().unwrap_or(0.0)
    }
}

/// Per-article inputs to unit aggregation, aligned with corpus order.
#[derive(Debug, Clone, Default)]
pub struct ArticleValues {
    pub ncs: Vec<Option<f64>>,
    pub nlcs: Vec<Option<f64>>,
    pub citations: Vec<u64>,
    /// Percentile thresholds and, per article, the membership at each.
    pub thresholds: Vec<f64>,
    pub percentiles: Vec<Vec<f64>>,
    pub scores: Vec<Option<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitAggregate {
    pub unit_id: String,
    pub n_articles: usize,
    /// Total credit the unit holds over its articles (equals n under full counting).
    pub credit_total: f64,
    pub mncs: f64,
    pub mnlcs: f64,
    /// (X, percentage of credit-weighted articles in the top X%).
    pub percentile_shares: Vec<(f64, f64)>,
    /// Present only when every article has a quality score.
    pub gpa: Option<f64>,
    pub funding_power_total: Option<f64>,
    pub funding_power_mean: Option<f64>,
    /// Reported for completeness; unsuitable for cross-person comparison.
    pub h_index: usize,
}

/// Credit-weighted means of the unit's article values. With full counting
/// these are plain arithmetic means.
pub fn unit_aggregate(
    corpus: &Corpus,
    unit: &UnitMembership,
    values: &ArticleValues,
    scheme: CreditScheme,
    funding: &FundingWeights,
) -> Result<UnitAggregate, AggregateError> {
    if unit.article_ids.is_empty() {
        return Err(AggregateError::EmptyUnit(unit.unit_id.clone()));
    }
    let mut idxs = Vec::with_capacity(unit.article_ids.len());
    let mut missing = Vec::new();
    for id in &unit.article_ids {
        match corpus.position(id) {
            Some(i) if values.ncs[i].is_some() && values.nlcs[i].is_some() => idxs.push(i),
            _ => missing.push(id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(AggregateError::MissingValue(missing));
    }

    let articles = corpus.articles();
    let mut w = Vec::with_capacity(idxs.len());
    for &i in &idxs {
        w.push(unit_credit(unit, &articles[i], scheme)?);
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(AggregateError::ZeroCredit(unit.unit_id.clone()));
    }
    let weighted = |f: &dyn Fn(usize) -> f64| idxs.iter().zip(&w).map(|(&i, wi)| wi * f(i)).sum::<f64>() / total;

    let percentile_shares = values
        .thresholds
        .iter()
        .enumerate()
        .map(|(t, &x)| (x, 100.0 * weighted(&|i| values.percentiles[i][t])))
        .collect();

    let all_scored = idxs.iter().all(|&i| values.scores[i].is_some());
    let (gpa, funding_power_total, funding_power_mean) = if all_scored {
        let score = |i: usize| values.scores[i].unwrap_or(0);
        let fp_total: f64 = idxs.iter().zip(&w).map(|(&i, wi)| wi * funding.weight(score(i))).sum();
        (
            Some(weighted(&|i| f64::from(score(i)))),
            Some(fp_total),
            Some(fp_total / total),
        )
    } else {
        (None, None, None)
    };

    let cites: Vec<u64> = idxs.iter().map(|&i| values.citations[i]).collect();
    Ok(UnitAggregate {
        unit_id: unit.unit_id.clone(),
        n_articles: idxs.len(),
        credit_total: total,
        mncs: weighted(&|i| values.ncs[i].unwrap_or(0.0)),
        mnlcs: weighted(&|i| values.nlcs[i].unwrap_or(0.0)),
        percentile_shares,
        gpa,
        funding_power_total,
        funding_power_mean,
        h_index: h_index(&cites),
    })
}

/// Writes unit aggregates as CSV; optional values are left empty.
pub fn write_units_csv(rows: &[UnitAggregate], mut out: impl Write) -> std::io::Result<()> {
    let thresholds: Vec<f64> = rows
        .first()
        .map(|r| r.percentile_shares.iter().map(|(x, _)| *x).collect())
        .unwrap_or_default();
    let pct_cols: Vec<String> = thresholds.iter().map(|x| format!(",top_{x}")).collect();
    writeln!(
        out,
        "unit_id,n,credit,mncs,mnlcs{},gpa,funding_power_total,funding_power_mean,h_index",
        pct_cols.concat()
    )?;
    let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
    for r in rows {
        let pcts: String = r
            .percentile_shares
            .iter()
            .map(|(_, p)| format!(",{}", fmt_num(*p)))
            .collect();
        writeln!(
            out,
            "{},{},{},{},{}{},{},{},{},{}",
            r.unit_id,
            r.n_articles,
            fmt_num(r.credit_total),
            fmt_num(r.mncs),
            fmt_num(r.mnlcs),
            pcts,
            opt(r.gpa),
            opt(r.funding_power_total),
            opt(r.funding_power_mean),
            r.h_index
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Quota allocation

/// Predetermined number of articles per score class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotaAllocation {
    pub class_sizes: BTreeMap<u8, usize>,
    pub seed: u64,
}

impl QuotaAllocation {
    /// A quota reproducing the class histogram of `scores`.
    pub fn matching(scores: &[u8], seed: u64) -> Self {
        let mut class_sizes = BTreeMap::new();
        for &s in scores {
            *class_sizes.entry(s).or_insert(0) += 1;
        }
        QuotaAllocation { class_sizes, seed }
    }

    pub fn total(&self) -> usize {
        self.class_sizes.values().sum()
    }
}

/// Assigns score classes by indicator rank: the highest values fill the
/// highest class first. Equal values straddling a class boundary are ordered
/// by a seeded shuffle, so the result is reproducible for a given seed.
pub fn quota_assign(values: &[f64], quota: &QuotaAllocation) -> Result<Vec<u8>, AggregateError> {
    if quota.total() != values.len() {
        return Err(AggregateError::QuotaMismatch {
            quota: quota.total(),
            values: values.len(),
        });
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let slots: Vec<u8> = quota
        .class_sizes
        .iter()
        .rev()
        .flat_map(|(&label, &n)| std::iter::repeat_n(label, n))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(quota.seed);
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        if slots[start] != slots[end - 1] {
            order[start..end].shuffle(&mut rng);
        }
        start = end;
    }

    let mut out = vec![0u8; values.len()];
    for (pos, &i) in order.iter().enumerate() {
        out[i] = slots[pos];
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Gains from partial replacement

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMetric {
    /// Mean funding weight per article.
    #[default]
    FundingPower,
    /// Mean star score per article.
    Gpa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainConfig {
    /// Share of corpus articles whose human score is replaced.
    pub fraction: f64,
    pub iterations: usize,
    pub seed: u64,
    pub metric: GainMetric,
    pub funding: FundingWeights,
}

impl Default for GainConfig {
    fn default() -> Self {
        GainConfig {
            fraction: 0.5,
            iterations: 10,
            seed: 0,
            metric: GainMetric::FundingPower,
            funding: FundingWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitGain {
    pub unit_id: String,
    pub n: usize,
    pub gain_min: f64,
    pub gain_mean: f64,
    pub gain_max: f64,
}

/// Random generator for iteration `iteration` of a run seeded with `seed`.
/// Each iteration reads its own ChaCha8 stream, so results do not depend on
/// scheduling.
pub fn iteration_rng(seed: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration);
    rng
}

/// Per-unit change in mean score metric when a random `fraction` of all
/// corpus articles take their predicted score instead of the human one.
/// Selection is corpus-wide; results are summarised over the iterations.
pub fn score_gain(
    corpus: &Corpus,
    units: &[UnitMembership],
    human: &[u8],
    predicted: &[u8],
    config: &GainConfig,
) -> Result<Vec<UnitGain>, AggregateError> {
    let n = corpus.len();
    if human.len() != n || predicted.len() != n {
        return Err(AggregateError::ScoreLengthMismatch(human.len(), predicted.len(), n));
    }
    if !(config.fraction > 0.0 && config.fraction <= 1.0) {
        return Err(AggregateError::FractionOutOfRange(config.fraction));
    }
    if config.iterations == 0 {
        return Err(AggregateError::NoIterations);
    }
    let members: Vec<Vec<usize>> = units
        .iter()
        .map(|u| {
            let idx: Vec<usize> = u.article_ids.iter().filter_map(|id| corpus.position(id)).collect();
            if idx.is_empty() {
                Err(AggregateError::EmptyUnit(u.unit_id.clone()))
            } else {
                Ok(idx)
            }
        })
        .collect::<Result<_, _>>()?;

    let metric = |s: u8| match config.metric {
        GainMetric::FundingPower => config.funding.weight(s),
        GainMetric::Gpa => f64::from(s),
    };
    let unit_mean =
        |scores: &[u8], idx: &[usize]| idx.iter().map(|&i| metric(scores[i])).sum::<f64>() / idx.len() as f64;
    let baseline: Vec<f64> = members.iter().map(|idx| unit_mean(human, idx)).collect();
    let n_replace = (config.fraction * n as f64).round() as usize;

    let per_iteration: Vec<Vec<f64>> = (0..config.iterations)
        .into_par_iter()
        .map(|it| {
            let mut rng = iteration_rng(config.seed, it as u64);
            let mut mixed = human.to_vec();
            for i in rand::seq::index::sample(&mut rng, n, n_replace) {
                mixed[i] = predicted[i];
            }
            members
                .iter()
                .zip(&baseline)
                .map(|(idx, base)| unit_mean(&mixed, idx) - base)
                .collect()
        })
        .collect();

    Ok(units
        .iter()
        .zip(&members)
        .enumerate()
        .map(|(u, (unit, idx))| {
            let gains: Vec<f64> = per_iteration.iter().map(|g| g[u]).collect();
            UnitGain {
                unit_id: unit.unit_id.clone(),
                n: idx.len(),
                gain_min: gains.iter().copied().fold(f64::INFINITY, f64::min),
                gain_mean: gains.iter().sum::<f64>() / gains.len() as f64,
                gain_max: gains.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect())
}

/// Writes `unit_id,n,gain_min,gain_mean,gain_max`.
pub fn write_gain_csv(rows: &[UnitGain], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "unit_id,n,gain_min,gain_mean,gain_max")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.unit_id,
            r.n,
            fmt_num(r.gain_min),
            fmt_num(r.gain_mean),
            fmt_num(r.gain_max)
        )?;
    }
    Ok(())
}

/// Pearson correlation between a unit attribute (e.g. human GPA or size)
/// and the unit's mean gain.
pub fn bias_correlation(gains: &[UnitGain], attribute: &[f64]) -> Result<CorrelationResult, AggregateError> {
    let g: Vec<f64> = gains.iter().map(|u| u.gain_mean).collect();
    Ok(pearson(attribute, &g)?)
}

/// Mean human score of each unit, aligned with `units`.
pub fn unit_mean_scores(corpus: &Corpus, units: &[UnitMembership], scores: &[u8]) -> Vec<f64> {
    units
        .iter()
        .map(|u| {
            let idx: Vec<usize> = u.article_ids.iter().filter_map(|id| corpus.position(id)).collect();
            idx.iter().map(|&i| f64::from(scores[i])).sum::<f64>() / idx.len().max(1) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Article, IngestOptions, UnitKind};

    fn corpus(n: usize) -> Corpus {
        let arts = (0..n)
            .map(|i| {
                let mut a = Article::new(format!("A{i}"), 2020, "J");
                a.fields = vec!["F".into()];
                a.authors = vec![format!("au{i}"), "shared".into()];
                a
            })
            .collect();
        Corpus::from_articles(arts, &IngestOptions::default()).0
    }

    fn unit(ids: &[usize]) -> UnitMembership {
        let mut u = UnitMembership::new(UnitKind::Department, format!("U{}", ids[0]));
        u.article_ids = ids.iter().map(|i| format!("A{i}")).collect();
        u
    }

    fn values(scores: &[u8]) -> ArticleValues {
        let n = scores.len();
        ArticleValues {
            ncs: (0..n).map(|i| Some(i as f64)).collect(),
            nlcs: (0..n).map(|i| Some(0.5 * i as f64)).collect(),
            citations: (0..n as u64).collect(),
            thresholds: vec![10.0],
            percentiles: (0..n).map(|i| vec![if i == 0 { 1.0 } else { 0.0 }]).collect(),
            scores: scores.iter().map(|&s| Some(s)).collect(),
        }
    }

    #[test]
    fn gpa_and_funding() {
        let c = corpus(3);
        let agg = unit_aggregate(
            &c,
            &unit(&[0, 1, 2]),
            &values(&[4, 3, 2]),
            CreditScheme::Full,
            &FundingWeights::default(),
        )
        .unwrap();
        assert_eq!(agg.gpa, Some(3.0));
        assert_eq!(agg.funding_power_total, Some(1.25));
        assert_eq!(agg.mncs, 1.0);
        assert_eq!(agg.percentile_shares[0].0, 10.0);
        assert!((agg.percentile_shares[0].1 - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(agg.h_index, 1);
    }

    #[test]
    fn single_article_unit() {
        let c = corpus(3);
        let agg = unit_aggregate(
            &c,
            &unit(&[2]),
            &values(&[4, 3, 2]),
            CreditScheme::Full,
            &FundingWeights::default(),
        )
        .unwrap();
        assert_eq!((agg.mncs, agg.mnlcs, agg.gpa), (2.0, 1.0, Some(2.0)));
    }

    #[test]
    fn missing_values_listed() {
        let c = corpus(3);
        let mut v = values(&[4, 3, 2]);
        v.nlcs[1] = None;
        match unit_aggregate(&c, &unit(&[0, 1]), &v, CreditScheme::Full, &FundingWeights::default()) {
            Err(AggregateError::MissingValue(ids)) => assert_eq!(ids, ["A1"]),
            other => panic!("{other:?}"),
        }
        let mut empty = unit(&[0]);
        empty.article_ids.clear();
        assert!(matches!(
            unit_aggregate(&c, &empty, &v, CreditScheme::Full, &FundingWeights::default()),
            Err(AggregateError::EmptyUnit(_))
        ));
    }

    #[test]
    fn missing_scores_leave_gpa_empty() {
        let c = corpus(2);
        let mut v = values(&[4, 3]);
        v.scores[0] = None;
        let agg = unit_aggregate(&c, &unit(&[0, 1]), &v, CreditScheme::Full, &FundingWeights::default()).unwrap();
        assert_eq!(agg.gpa, None);
    }

    #[test]
    fn fractional_split_reconciles() {
        // One article by two authors in different units.
        let c = corpus(1);
        let v = values(&[4]);
        let mut totals = 0.0;
        for author in ["au0", "shared"] {
            let mut u = unit(&[0]);
            u.author_ids.insert(author.into());
            let agg = unit_aggregate(&c, &u, &v, CreditScheme::Fractional, &FundingWeights::default()).unwrap();
            assert_eq!(agg.credit_total, 0.5);
            totals += agg.funding_power_total.unwrap();
        }
        assert_eq!(totals, 1.0);
    }

    #[test]
    fn quota_rule() {
        let q = QuotaAllocation {
            class_sizes: [(4, 1), (3, 2), (1, 1)].into_iter().collect(),
            seed: 9,
        };
        assert_eq!(quota_assign(&[3.0, 2.0, 2.0, 1.0], &q).unwrap(), [4, 3, 3, 1]);
        let bad = QuotaAllocation {
            class_sizes: [(4, 1)].into_iter().collect(),
            seed: 0,
        };
        assert!(matches!(
            quota_assign(&[1.0, 2.0], &bad),
            Err(AggregateError::QuotaMismatch { .. })
        ));
    }

    #[test]
    fn quota_tie_break_is_seeded() {
        let q = |seed| QuotaAllocation {
            class_sizes: [(4, 1), (3, 1)].into_iter().collect(),
            seed,
        };
        let a = quota_assign(&[2.0, 2.0], &q(1)).unwrap();
        assert_eq!(a, quota_assign(&[2.0, 2.0], &q(1)).unwrap());
        let outcomes: std::collections::BTreeSet<Vec<u8>> =
            (0..32).map(|s| quota_assign(&[2.0, 2.0], &q(s)).unwrap()).collect();
        assert_eq!(outcomes.len(), 2);
    }

    #[test]
    fn distinct_values_ignore_seed() {
        let v = [0.3, 2.0, 1.1, 0.9, 5.0];
        let q = |seed| QuotaAllocation {
            class_sizes: [(4, 2), (2, 3)].into_iter().collect(),
            seed,
        };
        assert_eq!(quota_assign(&v, &q(1)).unwrap(), quota_assign(&v, &q(77)).unwrap());
    }

    #[test]
    fn gain_zero_when_predictions_match() {
        let c = corpus(6);
        let units = vec![unit(&[0, 1, 2]), unit(&[3, 4, 5])];
        let h = [4, 3, 2, 1, 4, 4];
        let g = score_gain(&c, &units, &h, &h, &GainConfig::default()).unwrap();
        assert!(g.iter().all(|u| u.gain_min == 0.0 && u.gain_max == 0.0));
    }

    #[test]
    fn top_unit_can_only_lose() {
        let c = corpus(4);
        let units = vec![unit(&[0, 1]), unit(&[2, 3])];
        let h = [4, 4, 1, 2];
        let p = [3, 4, 4, 1];
        let g = score_gain(&c, &units, &h, &p, &GainConfig::default()).unwrap();
        assert!(g[0].gain_max <= 0.0);
    }

    #[test]
    fn gain_argument_checks() {
        let c = corpus(2);
        let units = vec![unit(&[0, 1])];
        let cfg = GainConfig {
            fraction: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            score_gain(&c, &units, &[1, 1], &[1, 1], &cfg),
            Err(AggregateError::FractionOutOfRange(_))
        ));
        assert!(matches!(
            score_gain(&c, &units, &[1], &[1, 1], &GainConfig::default()),
            Err(AggregateError::ScoreLengthMismatch(..))
        ));
    }

    #[test]
    fn bias_correlation_cases() {
        let mk = |g: f64| UnitGain {
            unit_id: "u".into(),
            n: 1,
            gain_min: g,
            gain_mean: g,
            gain_max: g,
        };
        let gains: Vec<UnitGain> = [0.1, -0.2, 0.3, 0.0].into_iter().map(mk).collect();
        let attr = [0.1, -0.2, 0.3, 0.0];
        assert!((bias_correlation(&gains, &attr).unwrap().rho - 1.0).abs() < 1e-12);
        let zeros: Vec<UnitGain> = [0.0; 4].into_iter().map(mk).collect();
        assert!(matches!(
            bias_correlation(&zeros, &attr),
            Err(AggregateError::Validate(ValidateError::DegenerateInput))
        ));
    }
}
