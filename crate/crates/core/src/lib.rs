//! Dynamical mode recognition for coupled oscillator time series.
//!
//! The library reduces high-dimensional multichannel sensor data to a 2-D
//! latent phase trajectory with a from-scratch variational autoencoder, then
//! recognizes oscillation modes of that trajectory either supervised (by
//! Wasserstein distance against labeled benchmark cycles) or unsupervised
//! (Gaussian mixture clustering over pairwise DTW distances), with a linear
//! PCA baseline for reconstruction comparisons and k-Shape / plain-GMM
//! baselines for clustering comparisons.
//!
//! Modules follow the processing pipeline:
//!
//! * [`dataset`] — CSV ingestion, min-max normalization, period estimation,
//!   cycle segmentation.
//! * [`synthgen`] — seeded generator of labeled synthetic coupled-oscillator
//!   datasets (in-phase, anti-phase, rotation, death, partially in-phase).
//! * [`vae`] — MLP variational autoencoder with manual backpropagation,
//!   Adam, minibatch training, and early stopping.
//! * [`pca`] — deterministic PCA baseline (cyclic Jacobi eigensolver).
//! * [`wd`] — supervised 1-D Wasserstein-distance classifier.
//! * [`clustering`] — DTW, GMM-EM, GMM-DTW composition, k-Shape, and label
//!   alignment.
//! * [`metrics`] — confusion matrices and the seven-indicator evaluation
//!   suite (accuracy, precision, recall, F1, false alarm rate, AUC,
//!   geometric mean score).
//!
//! Everything is deterministic for a fixed seed: random streams come from
//! the crate's own [`rng::Rng`], and all reductions run in a fixed order.

// dense numeric kernels are written with explicit indices throughout
#![allow(clippy::needless_range_loop)]

pub mod clustering;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod pca;
pub mod rng;
pub mod synthgen;
pub mod vae;
pub mod wd;

pub use error::{Error, Result};
pub use linalg::Mat;
