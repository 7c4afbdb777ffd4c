use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use scindex::aggregate::{FundingWeights, GainMetric};
use scindex::corpus::DocType;
use scindex::credit::CreditScheme;
use scindex::indicators::{PageRankConfig, PercentileSpec};
use scindex::llmscore::NormalizationOrder;
use scindex::normalize::{MultiFieldMode, StatsConfig, WindowSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Settings shared by all subcommands. Every field is optional in the JSON
/// file; command-line flags override file values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Citation window in years (citation indicators) or JIF window.
    pub window: Option<u32>,
    pub doc_types: Option<Vec<String>>,
    pub exclude_self_citations: bool,
    pub multi_field: Option<MultiFieldMode>,
    pub percentiles: Option<Vec<f64>>,
    pub credit_scheme: Option<CreditScheme>,
    pub funding_weights: Option<BTreeMap<u8, f64>>,
    pub pagerank_damping: Option<f64>,
    pub pagerank_tol: Option<f64>,
    pub pagerank_max_iter: Option<usize>,
    pub gain_iterations: Option<usize>,
    pub gain_fraction: Option<f64>,
    pub gain_metric: Option<GainMetric>,
    pub normalization_order: Option<NormalizationOrder>,
    pub census_year: Option<i32>,
    /// Pinned random generator; only "chacha8" is supported.
    pub rng: Option<String>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Config = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(r) = &cfg.rng {
            if r != "chacha8" {
                bail!("unsupported rng {r:?}; only \"chacha8\" is available");
            }
        }
        Ok(cfg)
    }

    /// First 12 hex digits of the SHA-256 of the effective config as JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))[..12].to_string()
    }

    pub fn stats(&self) -> anyhow::Result<StatsConfig> {
        let mut sc = StatsConfig {
            window: match self.window {
                Some(w) => WindowSpec::years(w)?,
                None => WindowSpec::Unlimited,
            },
            include_self_citations: !self.exclude_self_citations,
            ..StatsConfig::default()
        };
        if let Some(types) = &self.doc_types {
            sc.doc_types.clear();
            for t in types {
                match DocType::parse_lenient(t) {
                    (d, true) => {
                        sc.doc_types.insert(d);
                    }
                    _ => bail!("unknown document type {t:?} in doc_types"),
                }
            }
        }
        Ok(sc)
    }

    pub fn multi_field(&self) -> MultiFieldMode {
        self.multi_field.unwrap_or_default()
    }

    pub fn percentiles(&self) -> anyhow::Result<PercentileSpec> {
        Ok(match &self.percentiles {
            Some(p) => PercentileSpec::new(p.clone())?,
            None => PercentileSpec::default(),
        })
    }

    pub fn pagerank(&self) -> PageRankConfig {
        let d = PageRankConfig::default();
        PageRankConfig {
            damping: self.pagerank_damping.unwrap_or(d.damping),
            tol: self.pagerank_tol.unwrap_or(d.tol),
            max_iter: self.pagerank_max_iter.unwrap_or(d.max_iter),
        }
    }

    pub fn funding(&self) -> FundingWeights {
        match &self.funding_weights {
            Some(w) => FundingWeights { weights: w.clone() },
            None => FundingWeights::default(),
        }
    }
}

/// The comment line that starts every output file.
pub fn header(cfg: &Config, seed: Option<u64>) -> String {
    let seed = seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    format!("# scindex {} config={} seed={seed}", scindex::VERSION, cfg.hash())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_content() {
        let a = Config::default();
        let b = Config {
            window: Some(3),
            ..Config::default()
        };
        assert_eq!(a.hash(), Config::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 12);
    }

    #[test]
    fn header_format() {
        let h = header(&Config::default(), Some(7));
        assert!(h.starts_with("# scindex 0.1.0 config="));
        assert!(h.ends_with(" seed=7"));
        assert!(header(&Config::default(), None).ends_with("seed=none"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<Config>(r#"{"windw": 3}"#).is_err());
        let c: Config = serde_json::from_str(r#"{"window": 3, "credit_scheme": "harmonic"}"#).unwrap();
        assert_eq!(c.credit_scheme, Some(CreditScheme::Harmonic));
    }
}
