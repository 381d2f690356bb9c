//! Calibration of black-box stochastic simulators through eligibility sets.
//!
//! A parameter value is *eligible* when the output it produces cannot be told
//! apart from the observed data by a distribution-free test at level `alpha`.
//! The collection of eligible candidates is a confidence region for the true
//! parameter even when the model is not identifiable from its output.
//!
//! The crate is organised bottom-up:
//!
//! * [`stats`]: empirical CDFs, Kolmogorov-Smirnov distances, Brownian-bridge
//!   quantiles and the Monte Carlo generalized chi-square.
//! * [`features`]: summary functions mapping a raw output vector to `K` features.
//! * [`aggregation`]: the SKS / SSMD / ESMD decision rules over feature matrices.
//! * [`eligibility`]: candidate generation, set construction, confidence bounds
//!   and Type I / Type II harnesses.
//! * [`simulators`]: M/M/1, G/G/1 and a small agent-based limit order book market.
//! * [`realism`]: stylized-fact metrics for return series.

pub mod aggregation;
pub mod eligibility;
mod error;
pub mod features;
mod matrix;
pub mod realism;
pub mod simulators;
pub mod stats;

pub use error::{Error, Result};
pub use matrix::FeatureMatrix;
