//! Blood-test COVID-19 classification workbench.
//!
//! Provides an ANFIS (Takagi–Sugeno) classifier, a stacked autoencoder,
//! classical baselines (KNN, random forest, MLP, kernel SVM), a hard-voting
//! ensemble, metric computation, a k-fold experiment harness and histogram
//! equalization for grayscale images. Everything is implemented on plain
//! `f64` slices and is deterministic for a given seed.

pub mod anfis;
pub mod classic;
pub mod dataio;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod imageprep;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod sae;
pub mod stats;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::Classifier;
