//! Learning the causal direction between two scalar variables.
//!
//! Sample sets `{(x_j, y_j)}` are mapped to fixed-length vectors by averaging
//! random Fourier features of the squared-exponential kernel (a randomized
//! kernel mean embedding of the marginals and the joint). Tree ensembles
//! trained on synthetic cause-effect pairs then classify new pairs.
//!
//! Module map:
//!
//! * [`data`]: pair types, text ingestion, standardization, swap augmentation
//! * [`rff`]: random Fourier bases and the three-block featurization
//! * [`synth`]: synthetic causal, independent and confounded pairs
//! * [`learn`]: CART trees, random forests, gradient boosting, cross-validation
//! * [`infer`]: direction prediction, the two-classifier causation score, IGCI
//! * [`eval`]: ROC AUC, bidirectional AUC, decision-rate curves
//! * [`model`] and [`features`]: on-disk model and feature matrix formats

pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod infer;
pub mod learn;
pub mod model;
pub mod rff;
pub mod rng;
pub mod synth;

pub use data::{CausalLabel, CausalPair, PairCollection};
pub use error::{Error, Result};
pub use rff::{FeatureVector, RffBasis};

/// Kernel bandwidth used unless overridden.
pub const DEFAULT_GAMMA: f64 = 10.0;
/// Total number of random features (three blocks of 100).
pub const DEFAULT_FEATURES: usize = 300;
