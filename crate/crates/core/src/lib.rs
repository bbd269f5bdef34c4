//! Generative bootstrap for univariate time series.
//!
//! A Wasserstein GAN with gradient penalty, built from causal dilated
//! convolutions, is trained on overlapping blocks of one observed path. The
//! trained generator then produces fresh paths of any length, and statistics
//! computed on them give bootstrap variances and percentile intervals. The
//! circular block bootstrap and an AR(1) toolkit are included as baselines
//! and ground truth.
//!
//! - [`nn`]: layers, parameter storage, initialisation, Adam, checkpoints
//! - [`gan`]: generator and critic, losses, training loop
//! - [`bootstrap`]: training blocks, sampling, percentile summaries, CBB
//! - [`timeseries`]: AR(1) simulation, ACF/PACF, least squares
//! - [`rng`]: seeding conventions

pub mod bootstrap;
pub mod error;
pub mod gan;
pub mod nn;
pub mod path;
pub mod rng;
pub mod timeseries;

pub use error::{Error, Result};
pub use path::SamplePath;
