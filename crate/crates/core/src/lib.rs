//! Citation-based research quality indicators: ingestion, field
//! normalization, journal and article indicators, authorship credit,
//! validation against quality scores, unit aggregation, simulation and
//! LLM score post-processing.

/// Engine version, written into output headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod aggregate;
pub mod corpus;
pub mod credit;
pub mod export;
pub mod features;
pub mod indicators;
pub mod llmscore;
pub mod normalize;
pub mod simulate;
pub mod validate;

pub use corpus::{Article, CitationEdge, Corpus, IngestOptions};
pub use normalize::{build_stats, MultiFieldMode, ReferenceStats, StatsConfig, WindowSpec};
