//! Per-concept sequence labellers over IOB tags.
//!
//! Both learners share one linear parameterisation ([`Weights`]): an
//! emission weight per (feature, tag) and a tag-to-tag transition matrix.
//! Decoding is always the constrained Viterbi search in [`viterbi_decode`].

mod bundle;
mod crf;
mod optim;
mod perceptron;
mod viterbi;

pub use bundle::{ModelBundle, MODEL_FORMAT_VERSION};
pub use crf::{
    forward_backward, nll_gradient, sequence_score, train_crf, CrfModel, Marginals, TrainConfig,
};
pub use optim::{minimize, OptimReport, Optimizer};
pub use perceptron::{train_perceptron, PerceptronConfig, PerceptronModel, PerceptronTrainer};
pub use viterbi::viterbi_decode;

use serde::{Deserialize, Serialize};

use crate::corpus::Iob;
use crate::error::Result;
use crate::features::TokenFeatureVector;
use crate::scalar::Scalar;

pub const N_LABELS: usize = 3;

/// Emission and transition weights, stored as one flat parameter vector:
/// `emission[f * 3 + y]` for every feature, then `transition[a * 3 + b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Weights<F> {
    n_features: usize,
    params: Vec<F>,
}

impl<F: Scalar> Weights<F> {
    pub fn zeros(n_features: usize) -> Self {
        Self {
            n_features,
            params: vec![F::zero(); n_features * N_LABELS + N_LABELS * N_LABELS],
        }
    }

    pub fn from_params(n_features: usize, params: Vec<F>) -> Self {
        assert_eq!(params.len(), n_features * N_LABELS + N_LABELS * N_LABELS);
        Self { n_features, params }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<F> {
        self.params
    }

    #[inline]
    pub fn emission(&self, feature: u32, label: usize) -> F {
        self.params[feature as usize * N_LABELS + label]
    }

    #[inline]
    pub fn emission_mut(&mut self, feature: u32, label: usize) -> &mut F {
        &mut self.params[feature as usize * N_LABELS + label]
    }

    #[inline]
    pub fn transition(&self, from: usize, to: usize) -> F {
        self.params[self.n_features * N_LABELS + from * N_LABELS + to]
    }

    #[inline]
    pub fn transition_mut(&mut self, from: usize, to: usize) -> &mut F {
        let base = self.n_features * N_LABELS;
        &mut self.params[base + from * N_LABELS + to]
    }

    /// Per-token emission scores for every label. Feature ids beyond the
    /// weight table (unseen at training time) contribute nothing.
    pub fn emission_scores(&self, features: &[TokenFeatureVector]) -> Vec<[F; N_LABELS]> {
        features.iter().map(|fv| self.token_scores(fv)).collect()
    }

    /// Emission scores of a single token.
    pub fn token_scores(&self, fv: &TokenFeatureVector) -> [F; N_LABELS] {
        let mut s = [F::zero(); N_LABELS];
        for &f in fv.ids() {
            let base = f as usize * N_LABELS;
            if let Some(w) = self.params[..self.n_features * N_LABELS].get(base..base + N_LABELS) {
                s[0] += w[0];
                s[1] += w[1];
                s[2] += w[2];
            }
        }
        s
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|w| w.is_finite())
    }

    pub fn cast<G: Scalar>(&self) -> Weights<G> {
        Weights {
            n_features: self.n_features,
            params: self
                .params
                .iter()
                .map(|w| G::from_f64_lossy(w.to_f64().unwrap_or(0.0)))
                .collect(),
        }
    }
}

/// One training sequence: token features plus gold tags.
#[derive(Debug, Clone, Copy)]
pub struct Instance<'a> {
    pub features: &'a [TokenFeatureVector],
    pub tags: &'a [Iob],
}

/// The learner plug-in point: anything that turns instances into weights.
pub trait SequenceLearner<F: Scalar> {
    fn name(&self) -> &'static str;
    fn train(&self, instances: &[Instance<'_>], n_features: usize, seed: u64) -> Result<Weights<F>>;
}

impl<F: Scalar> SequenceLearner<F> for TrainConfig {
    fn name(&self) -> &'static str {
        "crf"
    }

    fn train(&self, instances: &[Instance<'_>], n_features: usize, _seed: u64) -> Result<Weights<F>> {
        train_crf(instances, n_features, self).map(|m| m.weights)
    }
}

impl<F: Scalar> SequenceLearner<F> for PerceptronConfig {
    fn name(&self) -> &'static str {
        "perceptron"
    }

    fn train(&self, instances: &[Instance<'_>], n_features: usize, seed: u64) -> Result<Weights<F>> {
        let cfg = PerceptronConfig { seed, ..self.clone() };
        train_perceptron(instances, n_features, &cfg).map(|m| m.weights)
    }
}

/// Learner selection as recorded in configs and output metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Learner {
    Crf(TrainConfig),
    Perceptron(PerceptronConfig),
}

impl Default for Learner {
    fn default() -> Self {
        Learner::Crf(TrainConfig::default())
    }
}

impl<F: Scalar> SequenceLearner<F> for Learner {
    fn name(&self) -> &'static str {
        match self {
            Learner::Crf(c) => SequenceLearner::<F>::name(c),
            Learner::Perceptron(p) => SequenceLearner::<F>::name(p),
        }
    }

    fn train(&self, instances: &[Instance<'_>], n_features: usize, seed: u64) -> Result<Weights<F>> {
        match self {
            Learner::Crf(c) => c.train(instances, n_features, seed),
            Learner::Perceptron(p) => p.train(instances, n_features, seed),
        }
    }
}
