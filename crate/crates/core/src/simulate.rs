//! The probability model of indicator noise, and a synthetic corpus
//! generator for experiments that need known latent quality.
//!
//! All randomness comes from ChaCha8 (`rand_chacha` 0.9) seeded with
//! `seed_from_u64`. Parallel trials read stream `t` of the same seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::iteration_rng;
use crate::corpus::{Article, CitationEdge, Corpus, IngestOptions, UnitKind, UnitMembership};
use crate::export::fmt_num;

pub const RNG_ALGORITHM: &str = "chacha8 (rand_chacha 0.9)";

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("invalid synthetic corpus spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// Ten equally likely indicator values for an article of true quality 1.5.
pub const WORKED_VALUES: [f64; 10] = [0.5, 0.5, 1.0, 1.0, 1.5, 1.5, 2.0, 2.0, 2.5, 2.5];
pub const WORKED_TRUTH: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkedExample {
    pub mean: f64,
    pub p_exact: f64,
    pub p_below_one: f64,
    pub p_over: f64,
    pub p_under: f64,
}

/// Summary of a single draw from [`WORKED_VALUES`].
pub fn worked_example() -> WorkedExample {
    let n = WORKED_VALUES.len() as f64;
    let share = |pred: fn(f64) -> bool| WORKED_VALUES.iter().filter(|&&v| pred(v)).count() as f64 / n;
    WorkedExample {
        mean: WORKED_VALUES.iter().sum::<f64>() / n,
        p_exact: share(|v| v == WORKED_TRUTH),
        p_below_one: share(|v| v < 1.0),
        p_over: share(|v| v > WORKED_TRUTH),
        p_under: share(|v| v < WORKED_TRUTH),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// True quality, the mean of each indicator draw.
    pub q: f64,
    pub sigma: f64,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), SimulateError> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(SimulateError::InvalidConfig(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !self.q.is_finite() {
            return Err(SimulateError::InvalidConfig("q must be finite".into()));
        }
        if self.n == 0 || self.trials == 0 {
            return Err(SimulateError::InvalidConfig("n and trials must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMeanSummary {
    pub mean: f64,
    /// Sample standard deviation of the trial means.
    pub sd: f64,
    /// sigma / sqrt(n).
    pub expected_sd: f64,
    pub trials: usize,
}

/// Means of `trials` samples of `n` draws from Normal(q, sigma).
pub fn sample_means(config: &SimulationConfig) -> Result<Vec<f64>, SimulateError> {
    config.validate()?;
    Ok((0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = iteration_rng(config.seed, t as u64);
            let total: f64 = (0..config.n)
                .map(|_| config.q + config.sigma * rng.sample::<f64, _>(StandardNormal))
                .sum();
            total / config.n as f64
        })
        .collect())
}

pub fn sample_mean_distribution(config: &SimulationConfig) -> Result<SampleMeanSummary, SimulateError> {
    let means = sample_means(config)?;
    let t = means.len() as f64;
    let mean = means.iter().sum::<f64>() / t;
    let var = if means.len() > 1 {
        means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (t - 1.0)
    } else {
        0.0
    };
    Ok(SampleMeanSummary {
        mean,
        sd: var.sqrt(),
        expected_sd: config.sigma / (config.n as f64).sqrt(),
        trials: config.trials,
    })
}

// ---------------------------------------------------------------------------
// Synthetic corpora

/// Parameters of a synthetic corpus. Every field has a default, so `{}` is a
/// valid JSON spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_articles: usize,
    pub n_units: usize,
    pub n_fields: usize,
    pub journals_per_field: usize,
    pub first_year: i32,
    pub n_years: usize,
    /// SD of the unit-level quality effect.
    pub unit_quality_sd: f64,
    /// SD of article quality around its unit's effect.
    pub within_unit_sd: f64,
    /// Slope of log citations on latent quality. 0 makes citations quality-independent.
    pub quality_link: f64,
    /// SD of the log-normal citation noise.
    pub citation_noise: f64,
    /// Probability that an article is never cited, regardless of quality.
    pub zero_inflation: f64,
    pub base_log_citations: f64,
    /// SD of per-field shifts in log citations.
    pub field_effect_sd: f64,
    /// Extra log citations per year of age.
    pub year_effect: f64,
    /// SD of per-unit systematic shifts in log citations (a citation-bias multiplier).
    pub unit_bias_sd: f64,
    /// SD of assessor noise added to latent quality before star scores are assigned.
    pub human_noise: f64,
    /// Shares of 1*, 2*, 3*, 4* among human scores.
    pub score_shares: [f64; 4],
    pub max_authors: usize,
    pub authors_per_unit: usize,
    /// Citing years are drawn uniformly from publication year ..= year + citation_lag.
    pub citation_lag: u32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_articles: 2000,
            n_units: 20,
            n_fields: 4,
            journals_per_field: 5,
            first_year: 2015,
            n_years: 5,
            unit_quality_sd: 0.5,
            within_unit_sd: 1.0,
            quality_link: 1.0,
            citation_noise: 1.0,
            zero_inflation: 0.1,
            base_log_citations: 1.0,
            field_effect_sd: 0.3,
            year_effect: 0.2,
            unit_bias_sd: 0.0,
            human_noise: 0.5,
            score_shares: [0.05, 0.25, 0.45, 0.25],
            max_authors: 4,
            authors_per_unit: 10,
            citation_lag: 3,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SimulateError> {
        let bad = |m: &str| Err(SimulateError::InvalidSpec(m.to_string()));
        if [
            self.n_articles,
            self.n_units,
            self.n_fields,
            self.journals_per_field,
            self.n_years,
            self.max_authors,
            self.authors_per_unit,
        ]
        .contains(&0)
        {
            return bad("counts must be positive");
        }
        if self.n_units > self.n_articles {
            return bad("more units than articles");
        }
        let sds = [
            self.unit_quality_sd,
            self.within_unit_sd,
            self.citation_noise,
            self.field_effect_sd,
            self.unit_bias_sd,
            self.human_noise,
        ];
        if sds.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return bad("standard deviations must be finite and nonnegative");
        }
        if ![self.quality_link, self.base_log_citations, self.year_effect]
            .iter()
            .all(|v| v.is_finite())
        {
            return bad("non-finite parameter");
        }
        if !(0.0..=1.0).contains(&self.zero_inflation) {
            return bad("zero_inflation must lie in [0, 1]");
        }
        if self.score_shares.iter().any(|s| !s.is_finite() || *s < 0.0) || self.score_shares.iter().sum::<f64>() <= 0.0
        {
            return bad("score_shares must be nonnegative with a positive sum");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    /// Articles with edges attached and human scores in `quality_score`.
    pub corpus: Corpus,
    pub edges: Vec<CitationEdge>,
    pub latent: Vec<f64>,
    pub scores: Vec<u8>,
    pub units: Vec<UnitMembership>,
    /// Index into `units` for each article.
    pub unit_of: Vec<usize>,
}

fn normal(rng: &mut impl Rng, sd: f64) -> f64 {
    sd * rng.sample::<f64, _>(StandardNormal)
}

/// Star scores from noisy quality, with class sizes set by `shares`
/// (largest-remainder rounding so the sizes sum to n).
fn assign_stars(assessed: &[f64], shares: &[f64; 4]) -> Vec<u8> {
    let n = assessed.len();
    let total: f64 = shares.iter().sum();
    let exact: Vec<f64> = shares.iter().map(|s| s / total * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut rem: Vec<usize> = (0..4).collect();
    rem.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let short = n - sizes.iter().sum::<usize>();
    for &k in rem.iter().take(short) {
        sizes[k] += 1;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| assessed[a].total_cmp(&assessed[b]).then(a.cmp(&b)));
    let mut out = vec![0u8; n];
    let mut pos = 0;
    for (k, &size) in sizes.iter().enumerate() {
        for &i in &order[pos..pos + size] {
            out[i] = k as u8 + 1;
        }
        pos += size;
    }
    out
}

/// Generates a reproducible corpus whose citation counts are log-normal
/// around a quality-linked mean. Articles are dealt round-robin to units.
pub fn synth_corpus(spec: &SynthSpec, seed: u64) -> Result<SynthCorpus, SimulateError> {
    spec.validate()?;
    let mut rng = iteration_rng(seed, 0);
    let unit_effect: Vec<f64> = (0..spec.n_units)
        .map(|_| normal(&mut rng, spec.unit_quality_sd))
        .collect();
    let unit_bias: Vec<f64> = (0..spec.n_units).map(|_| normal(&mut rng, spec.unit_bias_sd)).collect();
    let field_effect: Vec<f64> = (0..spec.n_fields)
        .map(|_| normal(&mut rng, spec.field_effect_sd))
        .collect();
    let last_year = spec.first_year + spec.n_years as i32 - 1;

    let mut articles = Vec::with_capacity(spec.n_articles);
    let mut latent = Vec::with_capacity(spec.n_articles);
    let mut unit_of = Vec::with_capacity(spec.n_articles);
    let mut edges = Vec::new();
    for i in 0..spec.n_articles {
        let u = i % spec.n_units;
        let f = rng.random_range(0..spec.n_fields);
        let year = spec.first_year + rng.random_range(0..spec.n_years) as i32;
        let journal = rng.random_range(0..spec.journals_per_field);
        let q = unit_effect[u] + normal(&mut rng, spec.within_unit_sd);

        let n_authors = rng.random_range(1..=spec.max_authors);
        let mut authors = vec![format!("U{u:02}-a{}", rng.random_range(0..spec.authors_per_unit))];
        while authors.len() < n_authors {
            let cu = rng.random_range(0..spec.n_units);
            let name = format!("U{cu:02}-a{}", rng.random_range(0..spec.authors_per_unit));
            if !authors.contains(&name) {
                authors.push(name);
            }
        }

        let zero = rng.random::<f64>() < spec.zero_inflation;
        let log_mean = spec.base_log_citations
            + spec.quality_link * q
            + field_effect[f]
            + spec.year_effect * f64::from(last_year - year)
            + unit_bias[u]
            + normal(&mut rng, spec.citation_noise);
        let citations = if zero {
            0
        } else {
            log_mean.exp().floor().min(1e6) as u64
        };

        let id = format!("S{i:05}");
        for j in 0..citations {
            edges.push(CitationEdge {
                citing_id: format!("C{i:05}-{j}"),
                citing_year: year + rng.random_range(0..=spec.citation_lag) as i32,
                cited_id: id.clone(),
            });
        }
        let mut a = Article::new(id, year, format!("J{f}-{journal}"));
        a.fields = vec![format!("F{f}")];
        a.authors = authors;
        a.citations = Some(citations);
        articles.push(a);
        latent.push(q);
        unit_of.push(u);
    }

    let assessed: Vec<f64> = latent.iter().map(|q| q + normal(&mut rng, spec.human_noise)).collect();
    let scores = assign_stars(&assessed, &spec.score_shares);
    for (a, s) in articles.iter_mut().zip(&scores) {
        a.quality_score = Some(*s);
    }

    let mut units: Vec<UnitMembership> = (0..spec.n_units)
        .map(|u| UnitMembership::new(UnitKind::Department, format!("U{u:02}")))
        .collect();
    for (a, &u) in articles.iter().zip(&unit_of) {
        units[u].article_ids.insert(a.id.clone());
    }

    let (mut corpus, _) = Corpus::from_articles(articles, &IngestOptions::default());
    corpus.attach_edges(edges.iter().cloned().enumerate().map(|(r, e)| (r + 1, e)));
    Ok(SynthCorpus {
        corpus,
        edges,
        latent,
        scores,
        units,
        unit_of,
    })
}

impl SynthCorpus {
    /// Mean latent quality per unit, aligned with `units`.
    pub fn unit_latent_means(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.units.len()];
        let mut n = vec![0usize; self.units.len()];
        for (q, &u) in self.latent.iter().zip(&self.unit_of) {
            sum[u] += q;
            n[u] += 1;
        }
        sum.iter().zip(&n).map(|(s, &k)| s / k as f64).collect()
    }

    /// Writes `articles.jsonl`, `edges.csv`, `units.csv` and `latent.csv`
    /// into `dir`, each starting with `header` (a `#` comment line) if given.
    pub fn write_dir(&self, dir: &Path, header: Option<&str>) -> Result<(), SimulateError> {
        std::fs::create_dir_all(dir).map_err(|source| SimulateError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let write = |name: &str, body: &dyn Fn(&mut dyn Write) -> std::io::Result<()>| {
            let path = dir.join(name);
            let res = File::create(&path).and_then(|f| {
                let mut w = BufWriter::new(f);
                body(&mut w)?;
                w.flush()
            });
            res.map_err(|source| SimulateError::Io { path, source })
        };
        let head = |w: &mut dyn Write| match header {
            Some(h) => writeln!(w, "{h}"),
            None => Ok(()),
        };
        write("articles.jsonl", &|w| {
            head(w)?;
            for a in self.corpus.articles() {
                writeln!(w, "{}", serde_json::to_string(a).map_err(std::io::Error::other)?)?;
            }
            Ok(())
        })?;
        write("edges.csv", &|w| {
            head(w)?;
            writeln!(w, "citing_id,citing_year,cited_id")?;
            for e in &self.edges {
                writeln!(w, "{},{},{}", e.citing_id, e.citing_year, e.cited_id)?;
            }
            Ok(())
        })?;
        write("units.csv", &|w| {
            head(w)?;
            writeln!(w, "unit_kind,unit_id,article_id")?;
            for u in &self.units {
                for a in &u.article_ids {
                    writeln!(w, "department,{},{a}", u.unit_id)?;
                }
            }
            Ok(())
        })?;
        write("latent.csv", &|w| {
            head(w)?;
            writeln!(w, "article_id,unit_id,latent_quality,quality_score")?;
            for (i, a) in self.corpus.articles().iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{}",
                    a.id,
                    self.units[self.unit_of[i]].unit_id,
                    fmt_num(self.latent[i]),
                    self.scores[i]
                )?;
            }
            Ok(())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::spearman;

    #[test]
    fn worked_values() {
        let w = worked_example();
        assert_eq!(w.mean, 1.5);
        assert_eq!((w.p_exact, w.p_below_one), (0.2, 0.2));
        assert_eq!((w.p_over, w.p_under), (0.4, 0.4));
    }

    fn cfg(n: usize, trials: usize, q: f64) -> SimulationConfig {
        SimulationConfig {
            q,
            sigma: 1.0,
            n,
            trials,
            seed: 11,
        }
    }

    #[test]
    fn no_aggregation_keeps_sigma() {
        let s = sample_mean_distribution(&cfg(1, 20_000, 0.0)).unwrap();
        assert!((s.sd - 1.0).abs() < 0.03, "{}", s.sd);
        assert!(s.mean.abs() < 0.03);
    }

    #[test]
    fn seeded_and_scheduling_free() {
        let a = sample_means(&cfg(10, 500, 1.5)).unwrap();
        let b = sample_means(&cfg(10, 500, 1.5)).unwrap();
        assert_eq!(a, b);
        let mut c = cfg(10, 500, 1.5);
        c.seed = 12;
        assert_ne!(a, sample_means(&c).unwrap());
    }

    #[test]
    fn invalid_config() {
        let mut c = cfg(10, 10, 0.0);
        c.sigma = 0.0;
        assert!(sample_mean_distribution(&c).is_err());
        assert!(sample_mean_distribution(&cfg(0, 10, 0.0)).is_err());
    }

    #[test]
    fn star_shares_are_exact() {
        let assessed: Vec<f64> = (0..10).map(f64::from).collect();
        let s = assign_stars(&assessed, &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(s, [1, 2, 2, 3, 3, 3, 4, 4, 4, 4]);
    }

    fn small() -> SynthSpec {
        SynthSpec {
            n_articles: 300,
            n_units: 6,
            ..Default::default()
        }
    }

    #[test]
    fn synth_is_reproducible() {
        let a = synth_corpus(&small(), 5).unwrap();
        let b = synth_corpus(&small(), 5).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.latent, b.latent);
        assert_ne!(synth_corpus(&small(), 6).unwrap().latent, a.latent);
    }

    #[test]
    fn noiseless_link_is_monotone() {
        let spec = SynthSpec {
            citation_noise: 0.0,
            zero_inflation: 0.0,
            field_effect_sd: 0.0,
            year_effect: 0.0,
            ..small()
        };
        let s = synth_corpus(&spec, 3).unwrap();
        let c: Vec<f64> = (0..s.corpus.len())
            .map(|i| s.corpus.citations(i, true) as f64)
            .collect();
        // floor() creates ties, so compare order instead of rho
        let mut idx: Vec<usize> = (0..c.len()).collect();
        idx.sort_by(|&a, &b| s.latent[a].total_cmp(&s.latent[b]));
        assert!(idx.windows(2).all(|w| c[w[0]] <= c[w[1]]));
        assert!(spearman(&s.latent, &c).unwrap().rho > 0.99);
    }

    #[test]
    fn null_link_has_no_correlation() {
        let spec = SynthSpec {
            quality_link: 0.0,
            n_articles: 1000,
            ..Default::default()
        };
        let s = synth_corpus(&spec, 4).unwrap();
        let c: Vec<f64> = (0..s.corpus.len())
            .map(|i| s.corpus.citations(i, true) as f64)
            .collect();
        let r = spearman(&s.latent, &c).unwrap();
        assert!(!r.ci_excludes_zero(), "{r:?}");
    }

    #[test]
    fn edges_match_counts() {
        let s = synth_corpus(&small(), 8).unwrap();
        let total: u64 = (0..s.corpus.len()).map(|i| s.corpus.citations(i, true)).sum();
        assert_eq!(total as usize, s.edges.len());
        assert_eq!(s.units.iter().map(|u| u.article_ids.len()).sum::<usize>(), 300);
    }

    #[test]
    fn written_articles_read_back() {
        let s = synth_corpus(&small(), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        s.write_dir(dir.path(), Some("# test")).unwrap();
        let (back, report) =
            crate::corpus::ingest_articles(&dir.path().join("articles.jsonl"), &IngestOptions::default()).unwrap();
        assert!(report.is_clean(), "{:?}", report.errors);
        assert_eq!(back.articles()[..5], s.corpus.articles()[..5]);
    }

    #[test]
    fn spec_checks() {
        let bad = SynthSpec {
            n_units: 0,
            ..Default::default()
        };
        assert!(matches!(synth_corpus(&bad, 1), Err(SimulateError::InvalidSpec(_))));
        let spec: SynthSpec = serde_json::from_str(r#"{"n_articles": 50}"#).unwrap();
        assert_eq!(spec.n_units, 20);
    }
}
