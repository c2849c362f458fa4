//! Semi-supervised UTI risk analysis from in-home activity and physiological data.
//!
//! The pipeline normalizes hourly sensor matrices, learns a latent representation
//! on a large unlabelled corpus (auto-encoders or an RBM) and classifies the small
//! labelled set with a probabilistic neural network, Gaussian naive Bayes,
//! logistic regression or KNN.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifiers;
pub mod data;
pub mod error;
pub mod eval;
pub mod extractors;
pub mod featsel;
pub mod nn;
pub mod preprocess;

pub use error::{Error, Result};
