//! Cascaded selective classifiers for class-imbalanced binary classification.
//!
//! The crate is split into four layers:
//!
//! - [`nn`]: a small convolutional network with hand-written backpropagation
//!   and plain SGD training.
//! - [`dataset`]: candidate patches, the on-disk patchset format, stratified
//!   k-fold splitting, resampling with rotation/scale augmentation and a
//!   synthetic imbalanced dataset generator.
//! - [`cascade`]: selective stages trained on inverse-imbalanced data, the
//!   standard-deviation threshold rule, candidate filtering, the balanced
//!   final classifier and fold-routed inference.
//! - [`eval`]: FROC curves, histograms, stage tables and run reports.

mod binio;
pub mod cascade;
pub mod dataset;
mod error;
pub mod eval;
pub mod nn;
pub mod seed;

pub use error::{Error, Result};
