//! Latent-feeling recurrent modeling and behavior-based churn prediction
//! over game event logs.
//!
//! The pipeline: raw JSON logs are parsed and repaired ([`ingest`]),
//! turned into per-user play sequences and 29-dimensional step encodings
//! ([`domain`]), fed through the coupled satisfaction/aspiration cell
//! ([`lafee`]) or a standard LSTM baseline ([`lstm`]), trained by
//! truncated BPTT with finite-difference verification ([`train`]),
//! reduced back to churn labels by interval thresholding ([`churn`]),
//! and inspected via latent-feeling statistics ([`analysis`]). A seeded
//! simulator with ground-truth latents ([`synth`]) makes the whole chain
//! verifiable without proprietary data.

pub mod analysis;
pub mod checkpoint;
pub mod churn;
pub mod domain;
pub mod error;
pub mod ingest;
pub mod lafee;
pub mod lstm;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
