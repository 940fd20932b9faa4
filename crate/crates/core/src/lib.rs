//! Inference for generalized spiked covariance models.
//!
//! The crate estimates how many eigenvalues of a sample covariance matrix
//! are spikes, tests hypothesized spike counts through a central limit
//! theorem for partial linear spectral statistics, estimates the bulk noise
//! variance with a bias correction, and tests whether the smallest roots of
//! the bulk are equal.
//!
//! Module map:
//!
//! - [`spectrum`]: CSV ingestion, sample covariance, sorted eigenvalues.
//! - [`mp`]: the Marchenko–Pastur engine (spike map, companion Stieltjes
//!   transform, support, centering and CLT mean/variance).
//! - [`spike_test`]: the spike-count test and the scan estimator.
//! - [`noise`]: bias-corrected noise variance with a confidence interval.
//! - [`roots`]: equality tests for the smallest roots.
//! - [`sim`]: Monte Carlo drivers for the benchmark models.
//! - [`syntax`] and [`report`]: flag notations and versioned JSON output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod error;
pub mod mp;
pub mod noise;
pub mod report;
pub mod roots;
pub mod sim;
pub mod spectrum;
pub mod stats;
pub mod syntax;

pub use error::{Error, Result};
pub use mp::{
    CltMethod, CltTerms, DiscreteLsd, ModelMoments, Side, Spike, SpikeSpec, SpectralFn,
};
pub use spectrum::{DataMatrix, EigenSpectrum, SpikeRankSet};
