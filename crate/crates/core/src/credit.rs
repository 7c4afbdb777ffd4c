//! Authorship credit allocation.
//!
//! Every scheme except `Full` distributes one unit of credit per article over
//! its author positions (1-based position `i` of `n` authors):
//!
//! | scheme     | raw weight of position i                          |
//! |------------|---------------------------------------------------|
//! | fractional | 1/n                                               |
//! | arithmetic | (n + 1 − i) / (n(n + 1)/2)                        |
//! | geometric  | 2^(n−i) / (2^n − 1)                               |
//! | harmonic   | (1/i) / H(n)                                      |
//! | u_shaped   | 1 for i = 1, 1/2 for i = n ≥ 3, 1/(i+1) otherwise |
//!
//! U-shaped raw weights are normalized to sum to one, which ranks the first
//! author highest and the last author second.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Article, UnitMembership};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CreditError {
    #[error("an article needs at least one author")]
    InvalidAuthorCount,
    #[error("unknown credit scheme {0:?}")]
    UnknownScheme(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CreditScheme {
    #[default]
    Full,
    Fractional,
    Arithmetic,
    Geometric,
    Harmonic,
    UShaped,
}

impl CreditScheme {
    pub const ALL: [CreditScheme; 6] = [
        CreditScheme::Full,
        CreditScheme::Fractional,
        CreditScheme::Arithmetic,
        CreditScheme::Geometric,
        CreditScheme::Harmonic,
        CreditScheme::UShaped,
    ];

    /// Whether the weights of an article sum to one.
    pub fn is_normalized(self) -> bool {
        self != CreditScheme::Full
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CreditScheme::Full => "full",
            CreditScheme::Fractional => "fractional",
            CreditScheme::Arithmetic => "arithmetic",
            CreditScheme::Geometric => "geometric",
            CreditScheme::Harmonic => "harmonic",
            CreditScheme::UShaped => "u-shaped",
        }
    }
}

impl FromStr for CreditScheme {
    type Err = CreditError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "full" => CreditScheme::Full,
            "fractional" => CreditScheme::Fractional,
            "arithmetic" => CreditScheme::Arithmetic,
            "geometric" => CreditScheme::Geometric,
            "harmonic" => CreditScheme::Harmonic,
            "u-shaped" | "ushaped" => CreditScheme::UShaped,
            _ => return Err(CreditError::UnknownScheme(s.to_string())),
        })
    }
}

fn normalized(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Credit weight of each author position.
pub fn weights(n_authors: usize, scheme: CreditScheme) -> Result<Vec<f64>, CreditError> {
    let n = n_authors;
    if n == 0 {
        return Err(CreditError::InvalidAuthorCount);
    }
    let nf = n as f64;
    Ok(match scheme {
        CreditScheme::Full => vec![1.0; n],
        CreditScheme::Fractional => vec![1.0 / nf; n],
        CreditScheme::Arithmetic => {
            let total = nf * (nf + 1.0) / 2.0;
            (1..=n).map(|i| (n + 1 - i) as f64 / total).collect()
        }
        CreditScheme::Geometric => {
            let total = 2f64.powi(n as i32) - 1.0;
            (1..=n).map(|i| 2f64.powi((n - i) as i32) / total).collect()
        }
        CreditScheme::Harmonic => normalized((1..=n).map(|i| 1.0 / i as f64).collect()),
        CreditScheme::UShaped => normalized(
            (1..=n)
                .map(|i| match i {
                    1 => 1.0,
                    _ if i == n => 0.5,
                    _ => 1.0 / (i + 1) as f64,
                })
                .collect(),
        ),
    })
}

/// Per-author weights for a particular article. Explicit contribution shares
/// on the article replace the scheme's position weights (except under full
/// counting, which always gives every author 1).
pub fn article_weights(article: &Article, scheme: CreditScheme) -> Result<Vec<f64>, CreditError> {
    match (&article.author_shares, scheme) {
        (Some(shares), s) if s.is_normalized() && shares.len() == article.authors.len() => {
            Ok(normalized(shares.clone()))
        }
        _ => weights(article.authors.len(), scheme),
    }
}

/// Credit a unit receives for one article.
///
/// Units that list their own authors receive the summed weight of those
/// authors' positions (or 1 under full counting if any author matches). Units
/// without an author list are credited by membership: 1 if the article is
/// theirs, else 0.
pub fn unit_credit(unit: &UnitMembership, article: &Article, scheme: CreditScheme) -> Result<f64, CreditError> {
    if unit.author_ids.is_empty() {
        return Ok(if unit.article_ids.contains(&article.id) {
            1.0
        } else {
            0.0
        });
    }
    let w = article_weights(article, scheme)?;
    let owned = article
        .authors
        .iter()
        .zip(&w)
        .filter(|(a, _)| unit.author_ids.contains(*a));
    Ok(match scheme {
        CreditScheme::Full => {
            if owned.count() > 0 {
                1.0
            } else {
                0.0
            }
        }
        _ => owned.map(|(_, w)| w).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::UnitKind;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15)
    }

    #[test]
    fn single_author_gets_everything() {
        for s in CreditScheme::ALL {
            assert_eq!(weights(1, s).unwrap(), [1.0]);
        }
    }

    #[test]
    fn fractional_four() {
        assert_eq!(weights(4, CreditScheme::Fractional).unwrap(), [0.25; 4]);
    }

    #[test]
    fn harmonic_three() {
        assert!(close(
            &weights(3, CreditScheme::Harmonic).unwrap(),
            &[6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0]
        ));
    }

    #[test]
    fn arithmetic_and_geometric_three() {
        assert!(close(
            &weights(3, CreditScheme::Arithmetic).unwrap(),
            &[0.5, 1.0 / 3.0, 1.0 / 6.0]
        ));
        assert!(close(
            &weights(3, CreditScheme::Geometric).unwrap(),
            &[4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]
        ));
    }

    #[test]
    fn u_shaped_order() {
        let w = weights(4, CreditScheme::UShaped).unwrap();
        // raw [1, 1/3, 1/4, 1/2], total 25/12
        assert!(close(&w, &[12.0 / 25.0, 4.0 / 25.0, 3.0 / 25.0, 6.0 / 25.0]));
        let w = weights(2, CreditScheme::UShaped).unwrap();
        assert!(close(&w, &[2.0 / 3.0, 1.0 / 3.0]));
    }

    #[test]
    fn zero_authors() {
        assert_eq!(weights(0, CreditScheme::Full), Err(CreditError::InvalidAuthorCount));
    }

    #[test]
    fn parse_names() {
        assert_eq!("u-shaped".parse::<CreditScheme>().unwrap(), CreditScheme::UShaped);
        assert_eq!("Harmonic".parse::<CreditScheme>().unwrap(), CreditScheme::Harmonic);
        assert!("shapely".parse::<CreditScheme>().is_err());
    }

    fn article(authors: &[&str]) -> Article {
        let mut a = Article::new("P", 2020, "J");
        a.authors = authors.iter().map(|s| s.to_string()).collect();
        a
    }

    fn unit(authors: &[&str]) -> UnitMembership {
        let mut u = UnitMembership::new(UnitKind::Department, "D");
        u.author_ids = authors.iter().map(|s| s.to_string()).collect();
        u.article_ids.insert("P".into());
        u
    }

    #[test]
    fn unit_credit_examples() {
        let a = article(&["x", "y"]);
        let c = unit_credit(&unit(&["x"]), &a, CreditScheme::Harmonic).unwrap();
        assert!((c - 2.0 / 3.0).abs() < 1e-15);
        let c = unit_credit(&unit(&["x", "y"]), &a, CreditScheme::Geometric).unwrap();
        assert!((c - 1.0).abs() < 1e-15);
        assert_eq!(unit_credit(&unit(&["q"]), &a, CreditScheme::Fractional).unwrap(), 0.0);
        assert_eq!(unit_credit(&unit(&["y"]), &a, CreditScheme::Full).unwrap(), 1.0);
        assert_eq!(unit_credit(&unit(&["q"]), &a, CreditScheme::Full).unwrap(), 0.0);
    }

    #[test]
    fn membership_only_units() {
        let a = article(&["x", "y"]);
        let mut u = UnitMembership::new(UnitKind::Country, "GB");
        u.article_ids.insert("P".into());
        assert_eq!(unit_credit(&u, &a, CreditScheme::Harmonic).unwrap(), 1.0);
        u.article_ids.clear();
        assert_eq!(unit_credit(&u, &a, CreditScheme::Harmonic).unwrap(), 0.0);
    }

    #[test]
    fn explicit_shares_override() {
        let mut a = article(&["x", "y"]);
        a.author_shares = Some(vec![30.0, 70.0]);
        let c = unit_credit(&unit(&["y"]), &a, CreditScheme::Harmonic).unwrap();
        assert!((c - 0.7).abs() < 1e-15);
        assert_eq!(unit_credit(&unit(&["y"]), &a, CreditScheme::Full).unwrap(), 1.0);
    }

    #[test]
    fn position_schemes_depend_on_order() {
        let u = unit(&["x"]);
        for s in CreditScheme::ALL {
            let first = unit_credit(&u, &article(&["x", "y", "z"]), s).unwrap();
            let second = unit_credit(&u, &article(&["y", "x", "z"]), s).unwrap();
            match s {
                CreditScheme::Full | CreditScheme::Fractional => assert_eq!(first, second),
                _ => assert!(first > second, "{s:?}"),
            }
        }
    }
}
