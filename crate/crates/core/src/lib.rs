//! Deep belief network wind-power forecasting toolkit.
//!
//! The crate covers the full pipeline: dense numerics and a seedable RNG
//! ([`numerics`]), restricted Boltzmann machines trained by contrastive
//! divergence ([`rbm`]), greedy layer-wise pretraining plus supervised
//! fine-tuning of the stacked network ([`dbn`]), the hourly wind-farm
//! feature pipeline ([`dataset`]), error metrics with k-fold / hold-out /
//! multi-seed harnesses ([`evaluation`]), and reference predictors for
//! comparisons ([`baselines`]).

pub mod baselines;
pub mod dataset;
pub mod dbn;
pub mod error;
pub mod evaluation;
pub mod numerics;
pub mod rbm;

pub use error::{Error, Result};
