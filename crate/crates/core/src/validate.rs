//! Correlation of indicators with quality scores, and classification
//! accuracy relative to a modal-class baseline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ValidateError {
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 4 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("input is constant, correlation is undefined")]
    DegenerateInput,
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("every actual class is identical, baseline accuracy is 1")]
    BaselineSaturated,
    #[error("no observations")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMethod {
    Spearman,
    Pearson,
}

impl CorrelationMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CorrelationMethod::Spearman => "spearman",
            CorrelationMethod::Pearson => "pearson",
        }
    }
}

/// Verbal strength of a correlation, from |ρ|:
/// below 0.2 negligible, [0.2, 0.3) weak, [0.3, 0.4) moderate,
/// [0.4, 0.5) moderate-strong, 0.5 and above strong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Negligible,
    Weak,
    Moderate,
    ModerateStrong,
    Strong,
}

impl Band {
    pub fn from_rho(rho: f64) -> Band {
        match rho.abs() {
            r if r >= 0.5 => Band::Strong,
            r if r >= 0.4 => Band::ModerateStrong,
            r if r >= 0.3 => Band::Moderate,
            r if r >= 0.2 => Band::Weak,
            _ => Band::Negligible,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Band::Negligible => "negligible",
            Band::Weak => "weak",
            Band::Moderate => "moderate",
            Band::ModerateStrong => "moderate-strong",
            Band::Strong => "strong",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub method: CorrelationMethod,
    pub rho: f64,
    pub n: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    pub band: Band,
}

impl CorrelationResult {
    /// The 95% interval lies entirely on one side of zero.
    pub fn ci_excludes_zero(&self) -> bool {
        self.ci_low > 0.0 || self.ci_high < 0.0
    }
}

/// 95% interval for a correlation via the Fisher z transform.
pub fn fisher_ci(rho: f64, n: usize) -> (f64, f64) {
    let z = rho.atanh();
    let half = 1.96 / ((n as f64) - 3.0).sqrt();
    ((z - half).tanh(), (z + half).tanh())
}

fn check(x: &[f64], y: &[f64]) -> Result<(), ValidateError> {
    if x.len() != y.len() {
        return Err(ValidateError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 4 {
        return Err(ValidateError::TooFewPairs(x.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(ValidateError::NonFinite);
    }
    Ok(())
}

fn pearson_rho(x: &[f64], y: &[f64]) -> Result<f64, ValidateError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(ValidateError::DegenerateInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn result(method: CorrelationMethod, rho: f64, n: usize) -> CorrelationResult {
    let (lo, hi) = fisher_ci(rho, n);
    CorrelationResult {
        method,
        rho,
        n,
        ci_low: lo.min(rho),
        ci_high: hi.max(rho),
        band: Band::from_rho(rho),
    }
}

/// 1-based ranks with tied values sharing the mean of their positions.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their mean
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman's rank correlation with midranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult, ValidateError> {
    check(x, y)?;
    let rho = pearson_rho(&midranks(x), &midranks(y))?;
    Ok(result(CorrelationMethod::Spearman, rho, x.len()))
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult, ValidateError> {
    check(x, y)?;
    let rho = pearson_rho(x, y)?;
    Ok(result(CorrelationMethod::Pearson, rho, x.len()))
}

pub fn correlate(method: CorrelationMethod, x: &[f64], y: &[f64]) -> Result<CorrelationResult, ValidateError> {
    match method {
        CorrelationMethod::Spearman => spearman(x, y),
        CorrelationMethod::Pearson => pearson(x, y),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyResult {
    pub raw: f64,
    pub baseline: f64,
    pub above: f64,
}

/// Accuracy of `predicted` against `actual`, the modal-class baseline, and
/// the improvement over it: (raw − baseline) / (1 − baseline).
///
/// Computed from integer counts, so e.g. 6 correct of 10 with a modal class
/// of 5 gives exactly 0.2.
pub fn accuracy_above_baseline<T: Ord>(predicted: &[T], actual: &[T]) -> Result<AccuracyResult, ValidateError> {
    if predicted.len() != actual.len() {
        return Err(ValidateError::LengthMismatch(predicted.len(), actual.len()));
    }
    let n = actual.len();
    if n == 0 {
        return Err(ValidateError::Empty);
    }
    let correct = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    let mut freq: BTreeMap<&T, usize> = BTreeMap::new();
    for a in actual {
        *freq.entry(a).or_default() += 1;
    }
    let modal = freq.values().copied().max().unwrap_or(0);
    if modal == n {
        return Err(ValidateError::BaselineSaturated);
    }
    Ok(AccuracyResult {
        raw: correct as f64 / n as f64,
        baseline: modal as f64 / n as f64,
        above: (correct as f64 - modal as f64) / (n - modal) as f64,
    })
}

/// The same ratio from already-computed proportions.
pub fn above_baseline(raw: f64, baseline: f64) -> Result<f64, ValidateError> {
    if baseline >= 1.0 {
        return Err(ValidateError::BaselineSaturated);
    }
    Ok((raw - baseline) / (1.0 - baseline))
}
