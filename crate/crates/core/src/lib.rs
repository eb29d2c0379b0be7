//! Mistrust-metric pipeline for end-of-life ICU care.
//!
//! The crate turns MIMIC-shaped CSV extracts (or the bundled synthetic
//! generator's output) into a disparity report:
//!
//! 1. [`data_model`] loads and validates the tables.
//! 2. [`cohort`] selects the end-of-life cohort and the notes population.
//! 3. [`treatments`] merges ventilation and vasopressor spans into durations.
//! 4. [`chart_features`] and [`noncompliance`] build the binary interpersonal
//!    features and the noncompliance proxy label.
//! 5. [`sparse_logreg`] fits the L1-regularized logistic model whose predicted
//!    probability is the mistrust score.
//! 6. [`sentiment`] and [`analysis`] stratify by race, trust and severity and
//!    compare treatment durations and note sentiment with [`stats`].

pub mod analysis;
pub mod chart_features;
pub mod cli;
pub mod cohort;
pub mod data_model;
pub mod error;
pub mod noncompliance;
pub mod sentiment;
pub mod sparse_logreg;
pub mod stats;
pub mod synth;
pub mod treatments;

pub use error::{Error, Result};
