//! Predicts a social-media user's industry from posted text and profile
//! metadata.
//!
//! The pipeline: ingest a JSONL corpus ([`corpus`]), build per-field
//! vocabularies and rank features by IGR or AFR ([`features`]), train
//! multinomial/categorical Naive Bayes classifiers ([`nb`]), combine them by
//! early fusion or stacked generalization with agreement diagnostics
//! ([`ensemble`]), and evaluate with micro/macro accuracy ([`eval`]).
//! Qualitative analyses live in [`embeddings`] (per-industry contextualized
//! skip-gram vectors) and [`lexicon`] (emotion-category frequencies, gender
//! dominance, Spearman correlation). [`synth`] generates planted synthetic
//! corpora for end-to-end verification.

pub mod corpus;
pub mod embeddings;
pub mod ensemble;
pub mod eval;
pub mod features;
pub mod lexicon;
pub mod nb;
pub mod synth;

mod error;

pub use error::{Error, Result};
