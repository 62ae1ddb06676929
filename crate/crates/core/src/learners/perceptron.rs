//! Averaged structured perceptron over the CRF's feature layout.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{viterbi_decode, Instance, Weights, N_LABELS};
use crate::corpus::validate_tags;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerceptronConfig {
    pub epochs: usize,
    pub seed: u64,
}

impl Default for PerceptronConfig {
    fn default() -> Self {
        Self { epochs: 10, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct PerceptronModel<F> {
    /// Averaged weights; these are what decoding uses.
    pub weights: Weights<F>,
    pub epochs: usize,
    pub updates: usize,
    pub steps: usize,
}

/// Running state of averaged training. The average over all processed
/// instances is kept lazily: `sum_t w_t = steps * w - accumulator`.
#[derive(Debug, Clone)]
pub struct PerceptronTrainer<F> {
    current: Weights<F>,
    accumulator: Vec<F>,
    steps: usize,
    updates: usize,
}

impl<F: Scalar> PerceptronTrainer<F> {
    pub fn new(init: Weights<F>) -> Self {
        let n = init.params().len();
        Self {
            current: init,
            accumulator: vec![F::zero(); n],
            steps: 0,
            updates: 0,
        }
    }

    fn bump(&mut self, idx: usize, delta: F) {
        self.current.params_mut()[idx] += delta;
        self.accumulator[idx] += F::from_count(self.steps) * delta;
    }

    /// Processes one instance; returns whether it triggered an update.
    pub fn step(&mut self, inst: &Instance<'_>) -> bool {
        let pred = viterbi_decode(&self.current, inst.features);
        let mistake = pred.0.as_slice() != inst.tags;
        if mistake {
            let n_features = self.current.n_features();
            let trans_base = n_features * N_LABELS;
            let one = F::one();
            for (t, fv) in inst.features.iter().enumerate() {
                let (g, p) = (inst.tags[t].index(), pred.0[t].index());
                if g == p {
                    continue;
                }
                for &f in fv.ids() {
                    if (f as usize) < n_features {
                        self.bump(f as usize * N_LABELS + g, one);
                        self.bump(f as usize * N_LABELS + p, -one);
                    }
                }
            }
            for t in 1..inst.tags.len() {
                let g = (inst.tags[t - 1].index(), inst.tags[t].index());
                let p = (pred.0[t - 1].index(), pred.0[t].index());
                if g != p {
                    self.bump(trans_base + g.0 * N_LABELS + g.1, one);
                    self.bump(trans_base + p.0 * N_LABELS + p.1, -one);
                }
            }
            self.updates += 1;
        }
        self.steps += 1;
        mistake
    }

    /// Weights averaged over every step taken so far.
    pub fn averaged(&self) -> Weights<F> {
        if self.steps == 0 {
            return self.current.clone();
        }
        let n = F::from_count(self.steps);
        let params = self
            .current
            .params()
            .iter()
            .zip(&self.accumulator)
            .map(|(&w, &acc)| w - acc / n)
            .collect();
        Weights::from_params(self.current.n_features(), params)
    }

    pub fn current(&self) -> &Weights<F> {
        &self.current
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Trains from zero weights, shuffling instance order each epoch with a
/// seeded RNG.
pub fn train_perceptron<F: Scalar>(
    instances: &[Instance<'_>],
    n_features: usize,
    config: &PerceptronConfig,
) -> Result<PerceptronModel<F>> {
    if config.epochs == 0 {
        return Err(Error::Config("perceptron epochs must be >= 1".into()));
    }
    if instances.is_empty() {
        return Err(Error::Training("no training instances".into()));
    }
    for inst in instances {
        if inst.features.len() != inst.tags.len() {
            return Err(Error::LengthMismatch {
                left: inst.features.len(),
                right: inst.tags.len(),
            });
        }
        validate_tags(inst.tags)?;
    }
    let mut trainer = PerceptronTrainer::new(Weights::zeros(n_features));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..instances.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            trainer.step(&instances[i]);
        }
    }
    Ok(PerceptronModel {
        weights: trainer.averaged(),
        epochs: config.epochs,
        updates: trainer.updates(),
        steps: trainer.steps(),
    })
}
