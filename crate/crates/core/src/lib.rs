//! Complexity-based stress measures for daily financial price series.
//!
//! The crate computes moving-average-detrended multiscale sample entropy
//! (univariate and multivariate), recurrence-plot determinism and the
//! instantaneous-amplitude latent stress index, and composes entropy series
//! into arousal/performance paths.

pub mod alis;
pub mod catastrophe;
pub mod config;
pub mod embedding;
pub mod entropy;
pub mod error;
pub mod filter;
pub mod manifest;
pub mod rqa;
pub mod run;
pub mod series;
pub mod stress;

pub use error::{Result, StressError};
