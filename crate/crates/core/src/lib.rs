//! Toolkit for evaluating named-entity predictions over clinical notes.
//!
//! The pipeline: parse notes and annotations ([`corpus`]), convert spans
//! to and from BIO tags and BME feature rows ([`bio`]), classify
//! predictions against gold annotations into the five matching scenarios
//! ([`matcher`]), run the error-association statistics ([`analysis`],
//! backed by [`stats`]), and train/evaluate a small linear reference
//! tagger ([`tagger`]). The `histent` binary wires these together behind
//! `convert`, `evaluate`, `analyze`, and `train` subcommands ([`cli`]).

pub mod analysis;
pub mod bio;
pub mod cli;
pub mod corpus;
pub mod matcher;
pub mod report;
pub mod stats;
pub mod tagger;
