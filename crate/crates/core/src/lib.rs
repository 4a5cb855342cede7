//! Uncertainty quantification and selective prediction for retrieval-based
//! molecular identification.
//!
//! A model predicts a molecular fingerprint as bitwise probabilities, often
//! as several posterior samples. Candidates are ranked by cosine similarity
//! to the prediction. This crate turns the predictions into confidence
//! scores, evaluates them with risk-coverage curves, and picks abstention
//! thresholds with a distribution-free guarantee on the selective risk.

pub mod error;
pub mod io;
pub mod model;
pub mod riskctl;
pub mod rng;
pub mod scoring;
pub mod seleval;
pub mod synth;

pub use error::{Error, Result};
