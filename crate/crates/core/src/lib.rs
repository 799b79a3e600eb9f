//! snipforge: a toolkit for building and evaluating comparative snippets —
//! single sentences that fuse one positive and one negative opinion about
//! the same product.
//!
//! The pipeline has two halves:
//!
//! - **Dataset generation.** Opinion segments are cleaned by five
//!   post-processing rules ([`filter`]), reduced to popular summary
//!   segments by a sampling threshold, and fused pairwise with a fixed
//!   seven-template inventory ([`template`]) into snippet instances, each
//!   carrying all seven reference realizations.
//! - **Evaluation.** Any model's outputs are scored along three aspects —
//!   input preservation, output quality, and connective quality — with
//!   recall-only ROUGE metrics ([`metrics`]), and their connecting strings
//!   are classified into exact matches, new fusions, and a four-way error
//!   taxonomy ([`analysis`]).
//!
//! All data lives in line-delimited JSON record files ([`records`]), and
//! the `snipforge` binary ([`cli`]) wires the stages together.

pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod filter;
pub mod metrics;
pub mod records;
pub mod template;

pub use corpus::{
    tokenize, OpinionPair, Polarity, PosTag, PredictionRecord, Segment, SnippetInstance, Split,
    TemplateId, Token,
};
