//! Post-processing of repeated LLM quality scores: averaging, year and field
//! normalization, and conversion onto an expert star scale through a lookup
//! table.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::export::fmt_num;

const REFERENCE_LOOKUP: &str = include_str!("../data/reference_lookup.json");

/// Fewer repetitions than this are flagged as low confidence.
pub const MIN_CONFIDENT_REPETITIONS: usize = 5;

#[derive(Debug, Error)]
pub enum LlmScoreError {
    #[error("no scores")]
    EmptyScores,
    #[error("scores and labels have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("field {0:?} has mean score zero")]
    ZeroFieldMean(String),
    #[error("value {value} is outside the scale domain [{lo}, {hi}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },
    #[error("invalid score scale: {0}")]
    InvalidScale(String),
    #[error("insufficient calibration data: {0}")]
    InsufficientData(String),
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    /// Inclusive upper bound.
    pub upper: f64,
    pub label: u8,
}

/// Monotone banding of a score domain. Band k covers upper bounds up to
/// `upper[k]` inclusive; the first band starts at the domain minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScale")]
pub struct ScoreScale {
    domain: (f64, f64),
    bands: Vec<Band>,
}

#[derive(Deserialize)]
struct RawScale {
    domain: (f64, f64),
    bands: Vec<Band>,
}

impl TryFrom<RawScale> for ScoreScale {
    type Error = LlmScoreError;

    fn try_from(raw: RawScale) -> Result<Self, Self::Error> {
        ScoreScale::new(raw.domain, raw.bands)
    }
}

impl ScoreScale {
    pub fn new(domain: (f64, f64), bands: Vec<Band>) -> Result<Self, LlmScoreError> {
        let bad = |m: &str| Err(LlmScoreError::InvalidScale(m.to_string()));
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad("domain must be a finite interval with min < max");
        }
        let (Some(first), Some(last)) = (bands.first(), bands.last()) else {
            return bad("no bands");
        };
        if first.upper < lo {
            return bad("first band ends below the domain");
        }
        if last.upper != hi {
            return bad("last band must end at the domain maximum");
        }
        if bands.iter().any(|b| !b.upper.is_finite()) {
            return bad("band bounds must be finite");
        }
        for w in bands.windows(2) {
            if w[0].upper >= w[1].upper {
                return bad("band upper bounds must increase strictly");
            }
            if !(w[0].label < w[1].label) {
                return bad("band labels must increase strictly");
            }
        }
        Ok(ScoreScale { domain, bands })
    }

    /// The shipped example table: 1-2.5 → 1*, 2.51-2.80 → 2*, 2.81-3.03 → 3*,
    /// 3.04-4 → 4*.
    pub fn reference() -> Self {
        serde_json::from_str(REFERENCE_LOOKUP).expect("shipped lookup table is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, LlmScoreError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let bands: Vec<String> = self
            .bands
            .iter()
            .map(|b| format!("    {{ \"upper\": {:.2}, \"label\": {} }}", b.upper, b.label))
            .collect();
        format!(
            "{{\n  \"domain\": [{:.2}, {:.2}],\n  \"bands\": [\n{}\n  ]\n}}\n",
            self.domain.0,
            self.domain.1,
            bands.join(",\n")
        )
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    /// Label of the band containing `value`. Bounds are read at two-decimal
    /// precision, as printed: a band runs up to, but not including, the next
    /// band's first printed value. So 2.505 sits in the gap after 2.50 and
    /// stays in the lower band.
    pub fn lookup(&self, value: f64) -> Result<u8, LlmScoreError> {
        let (lo, hi) = self.domain;
        if !(value >= lo && value <= hi) {
            return Err(LlmScoreError::OutOfDomain { value, lo, hi });
        }
        let last = self.bands.len() - 1;
        Ok(self.bands[..last]
            .iter()
            .find(|b| value < next_cent(b.upper))
            .map_or(self.bands[last].label, |b| b.label))
    }
}

/// The first two-decimal value above `upper`.
fn next_cent(upper: f64) -> f64 {
    ((upper * 100.0 + 1e-9).floor() + 1.0) / 100.0
}

pub fn lookup_convert(value: f64, scale: &ScoreScale) -> Result<u8, LlmScoreError> {
    scale.lookup(value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedScores {
    pub article_id: String,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanScore {
    pub mean: f64,
    pub k: usize,
    pub low_confidence: bool,
}

pub fn mean_score(rs: &RepeatedScores) -> Result<MeanScore, LlmScoreError> {
    let k = rs.scores.len();
    if k == 0 {
        return Err(LlmScoreError::EmptyScores);
    }
    Ok(MeanScore {
        mean: rs.scores.iter().sum::<f64>() / k as f64,
        k,
        low_confidence: k < MIN_CONFIDENT_REPETITIONS,
    })
}

fn group_means<K: Ord + Clone>(scores: &[f64], keys: &[K]) -> BTreeMap<K, f64> {
    let mut acc: BTreeMap<K, (f64, usize)> = BTreeMap::new();
    for (s, k) in scores.iter().zip(keys) {
        let e = acc.entry(k.clone()).or_default();
        e.0 += s;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

/// Shifts every score by (grand mean − its year's mean), so all year means
/// equal the grand mean.
pub fn year_normalize(scores: &[f64], years: &[i32]) -> Result<Vec<f64>, LlmScoreError> {
    if scores.len() != years.len() {
        return Err(LlmScoreError::LengthMismatch(scores.len(), years.len()));
    }
    if scores.is_empty() {
        return Err(LlmScoreError::EmptyScores);
    }
    let grand = scores.iter().sum::<f64>() / scores.len() as f64;
    let means = group_means(scores, years);
    Ok(scores.iter().zip(years).map(|(s, y)| s + (grand - means[y])).collect())
}

pub fn field_normalize(score: f64, field_mean: f64, field: &str) -> Result<f64, LlmScoreError> {
    if field_mean == 0.0 {
        return Err(LlmScoreError::ZeroFieldMean(field.to_string()));
    }
    Ok(score / field_mean)
}

/// Divides each score by its field's mean score, giving 1 for a field-average score.
pub fn field_normalize_all(scores: &[f64], fields: &[String]) -> Result<Vec<f64>, LlmScoreError> {
    if scores.len() != fields.len() {
        return Err(LlmScoreError::LengthMismatch(scores.len(), fields.len()));
    }
    let means = group_means(scores, fields);
    scores
        .iter()
        .zip(fields)
        .map(|(s, f)| field_normalize(*s, means[f], f))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationOrder {
    #[default]
    YearThenField,
    FieldThenYear,
}

pub fn normalize_scores(
    scores: &[f64],
    years: &[i32],
    fields: &[String],
    order: NormalizationOrder,
) -> Result<Vec<f64>, LlmScoreError> {
    match order {
        NormalizationOrder::YearThenField => field_normalize_all(&year_normalize(scores, years)?, fields),
        NormalizationOrder::FieldThenYear => year_normalize(&field_normalize_all(scores, fields)?, years),
    }
}

/// Chooses band boundaries on a 0.01 grid that maximize the number of
/// samples whose expert label equals the label of the band they fall in.
/// Band labels are the `band_count` most frequent expert labels. Among
/// equally good boundaries the lower one wins.
pub fn calibrate_scale(
    samples: &[(f64, u8)],
    band_count: usize,
    domain: (f64, f64),
) -> Result<ScoreScale, LlmScoreError> {
    if band_count == 0 {
        return Err(LlmScoreError::InsufficientData("band count must be positive".into()));
    }
    let to_cent = |v: f64| (v * 100.0).round() as i64;
    let (lo_c, hi_c) = (to_cent(domain.0), to_cent(domain.1));
    if hi_c - lo_c + 1 < band_count as i64 {
        return Err(LlmScoreError::InvalidScale(
            "domain too narrow for the band count".into(),
        ));
    }
    if let Some(&(v, _)) = samples.iter().find(|(v, _)| !(*v >= domain.0 && *v <= domain.1)) {
        return Err(LlmScoreError::OutOfDomain {
            value: v,
            lo: domain.0,
            hi: domain.1,
        });
    }
    let mut freq: BTreeMap<u8, usize> = BTreeMap::new();
    for &(_, l) in samples {
        *freq.entry(l).or_default() += 1;
    }
    if freq.len() < band_count {
        return Err(LlmScoreError::InsufficientData(format!(
            "{} distinct expert labels for {band_count} bands",
            freq.len()
        )));
    }
    let mut by_freq: Vec<(u8, usize)> = freq.into_iter().collect();
    by_freq.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut labels: Vec<u8> = by_freq[..band_count].iter().map(|(l, _)| *l).collect();
    labels.sort_unstable();

    // cum[k][g]: samples labelled labels[k] that a band ending at grid point g
    // would cover, i.e. with value below (lo_c + g + 1) / 100
    let g_len = (hi_c - lo_c + 1) as usize;
    let mut cum = vec![vec![0i64; g_len]; band_count];
    for &(v, l) in samples {
        if let Some(k) = labels.iter().position(|&x| x == l) {
            let g = ((v * 100.0 + 1e-9).floor() as i64 - lo_c).clamp(0, g_len as i64 - 1) as usize;
            cum[k][g] += 1;
        }
    }
    for row in &mut cum {
        for g in 1..g_len {
            row[g] += row[g - 1];
        }
    }

    // best[k][g]: agreement of bands 0..=k when band k ends at grid point g
    let mut best = vec![vec![i64::MIN; g_len]; band_count];
    let mut from = vec![vec![0usize; g_len]; band_count];
    best[0] = cum[0].clone();
    for k in 1..band_count {
        let mut run_max = i64::MIN;
        let mut run_arg = 0;
        for g in k..g_len {
            let a = g - 1;
            if best[k - 1][a] != i64::MIN {
                let cand = best[k - 1][a] - cum[k][a];
                if cand > run_max {
                    run_max = cand;
                    run_arg = a;
                }
            }
            if run_max != i64::MIN {
                best[k][g] = run_max + cum[k][g];
                from[k][g] = run_arg;
            }
        }
    }
    let mut cuts = vec![g_len - 1; band_count];
    for k in (1..band_count).rev() {
        cuts[k - 1] = from[k][cuts[k]];
    }
    let bands = cuts
        .iter()
        .zip(&labels)
        .enumerate()
        .map(|(k, (&g, &label))| Band {
            upper: if k + 1 == band_count {
                domain.1
            } else {
                (lo_c + g as i64) as f64 / 100.0
            },
            label,
        })
        .collect();
    ScoreScale::new(domain, bands)
}

/// One line of the scores CSV `article_id,repetition,score,year,field`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub article_id: String,
    pub repetition: u32,
    pub score: f64,
    pub year: i32,
    pub field: String,
}

pub fn read_scores_csv(reader: impl Read) -> Result<Vec<ScoreRow>, LlmScoreError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<ScoreRow>().enumerate() {
        let row = rec.map_err(|e| LlmScoreError::MalformedRow {
            row: i + 1,
            reason: e.to_string(),
        })?;
        if !row.score.is_finite() {
            return Err(LlmScoreError::MalformedRow {
                row: i + 1,
                reason: "score is not finite".into(),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Per-article result of the full post-processing pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessedScore {
    pub article_id: String,
    pub year: i32,
    pub field: String,
    pub mean: MeanScore,
    pub normalized: f64,
    /// Lookup conversion of the raw mean, when a scale is given.
    pub star: Option<u8>,
}

/// Averages repetitions per article, normalizes the means in the given
/// order, and converts raw means with `scale`. Articles keep the order of
/// their first row.
pub fn process_scores(
    rows: &[ScoreRow],
    scale: Option<&ScoreScale>,
    order: NormalizationOrder,
) -> Result<Vec<ProcessedScore>, LlmScoreError> {
    let mut order_seen: Vec<&str> = Vec::new();
    let mut grouped: BTreeMap<&str, (Vec<f64>, i32, &str)> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        match grouped.get_mut(r.article_id.as_str()) {
            Some(g) => {
                if g.1 != r.year || g.2 != r.field {
                    return Err(LlmScoreError::MalformedRow {
                        row: i + 1,
                        reason: format!("article {} changes year or field between repetitions", r.article_id),
                    });
                }
                g.0.push(r.score);
            }
            None => {
                order_seen.push(&r.article_id);
                grouped.insert(&r.article_id, (vec![r.score], r.year, &r.field));
            }
        }
    }
    if order_seen.is_empty() {
        return Err(LlmScoreError::EmptyScores);
    }
    let mut means = Vec::with_capacity(order_seen.len());
    for id in &order_seen {
        let (scores, _, _) = &grouped[id];
        means.push(mean_score(&RepeatedScores {
            article_id: id.to_string(),
            scores: scores.clone(),
        })?);
    }
    let raw: Vec<f64> = means.iter().map(|m| m.mean).collect();
    let years: Vec<i32> = order_seen.iter().map(|id| grouped[id].1).collect();
    let fields: Vec<String> = order_seen.iter().map(|id| grouped[id].2.to_string()).collect();
    let normalized = normalize_scores(&raw, &years, &fields, order)?;
    order_seen
        .iter()
        .enumerate()
        .map(|(i, id)| {
            Ok(ProcessedScore {
                article_id: id.to_string(),
                year: years[i],
                field: fields[i].clone(),
                mean: means[i],
                normalized: normalized[i],
                star: scale.map(|s| s.lookup(raw[i])).transpose()?,
            })
        })
        .collect()
}

pub fn write_processed_csv(rows: &[ProcessedScore], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "article_id,year,field,k,mean,low_confidence,normalized,star")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.article_id,
            r.year,
            r.field,
            r.mean.k,
            fmt_num(r.mean.mean),
            r.mean.low_confidence,
            fmt_num(r.normalized),
            r.star.map(|s| s.to_string()).unwrap_or_default()
        )?;
    }
    Ok(())
}
