//! Annotation-quality experiments for concept mention extraction.
//!
//! The crate covers the corpus model and its codecs, feature extraction,
//! sequence learners (CRF and averaged perceptron), t-unit evaluation and
//! Cohen's kappa, the corruption protocol, approximate randomization tests
//! and a synthetic corpus generator with simulated coders.

pub mod corpus;
pub mod cli;
pub mod error;
pub mod eval;
pub mod features;
pub mod learners;
pub mod protocol;
pub mod scalar;
pub mod seed;
pub mod significance;
pub mod simcorpus;

pub use error::{Error, Result};
pub use scalar::{MetricValue, Scalar};

pub type Crf = learners::CrfModel<f64>;
pub type Crf32 = learners::CrfModel<f32>;
pub type Perceptron = learners::PerceptronModel<f64>;
pub type Weights = learners::Weights<f64>;
pub type Report = eval::EvalReport<f64>;
pub type Kappa = eval::KappaResult<f64>;
