//! Label-noise laboratory for binary classification.
//!
//! Inject prior label corruption into a training set, attack the stored
//! labels independently in every epoch, train a sigmoid-output classifier
//! with Adam and early stopping, and measure AUC on clean test labels.

pub mod binom;
pub mod data;
pub mod error;
pub mod example;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod optim;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use example::{DatasetSplit, Label, LabeledExample, SplitFractions};
pub use rng::{Purpose, RngStream};
