//! The guide's chapters as doc modules, so `cargo test --doc` runs every
//! listing against the current library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/corpus.md")]
pub mod corpus {}
#[doc = include_str!("../../../book/src/normalization.md")]
pub mod normalization {}
#[doc = include_str!("../../../book/src/percentiles.md")]
pub mod percentiles {}
#[doc = include_str!("../../../book/src/journals.md")]
pub mod journals {}
#[doc = include_str!("../../../book/src/credit.md")]
pub mod credit {}
#[doc = include_str!("../../../book/src/validation.md")]
pub mod validation {}
#[doc = include_str!("../../../book/src/aggregation.md")]
pub mod aggregation {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/llm-scores.md")]
pub mod llm_scores {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
