//! Linear-chain CRF: scaled forward-backward, regularised negative
//! log-likelihood with its gradient, and batch training.

use serde::{Deserialize, Serialize};

use super::optim::{minimize, Optimizer};
use super::{Instance, Weights, N_LABELS};
use crate::corpus::validate_tags;
use crate::error::{Error, Result};
use crate::features::TokenFeatureVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Standard deviation of the Gaussian prior on every weight.
    pub l2_sigma: f64,
    pub max_iterations: usize,
    /// Stop when the relative NLL decrease of an accepted step falls below this.
    pub tolerance: f64,
    pub optimizer: Optimizer,
    /// L-BFGS history length.
    pub memory: usize,
    /// Sufficient-decrease constant of the backtracking line search.
    pub armijo: f64,
    /// Step shrink factor of the backtracking line search.
    pub backtrack: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2_sigma: 10.0,
            max_iterations: 200,
            tolerance: 1e-5,
            optimizer: Optimizer::Lbfgs,
            memory: 10,
            armijo: 1e-4,
            backtrack: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2_sigma > 0.0) {
            return Err(Error::Config("l2_sigma must be > 0".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::Config("backtrack must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct CrfModel<F> {
    pub weights: Weights<F>,
    pub iterations: usize,
    pub final_nll: F,
}

/// Posterior marginals of one sequence.
#[derive(Debug, Clone)]
pub struct Marginals<F> {
    pub log_z: F,
    /// `node[t][y]` = P(y_t = y | x).
    pub node: Vec<[F; N_LABELS]>,
    /// `edge[t][a][b]` = P(y_t = a, y_{t+1} = b | x).
    pub edge: Vec<[[F; N_LABELS]; N_LABELS]>,
}

/// Unnormalised log score of a tag sequence.
pub fn sequence_score<F: Scalar>(weights: &Weights<F>, emissions: &[[F; N_LABELS]], tags: &[usize]) -> F {
    let mut s = F::zero();
    for (t, &y) in tags.iter().enumerate() {
        s += emissions[t][y];
        if t > 0 {
            s += weights.transition(tags[t - 1], y);
        }
    }
    s
}

/// Forward-backward with per-position scaling. Potentials are exponentiated
/// after subtracting their maximum, so large weights cannot overflow.
pub fn forward_backward<F: Scalar>(weights: &Weights<F>, features: &[TokenFeatureVector]) -> Marginals<F> {
    assert!(!features.is_empty(), "forward_backward needs at least one token");
    let mut ws = Workspace::default();
    let emissions = weights.emission_scores(features);
    let log_z = ws.run(weights, &emissions);
    let len = emissions.len();
    let node = (0..len).map(|t| ws.node(t)).collect();
    let edge = (0..len - 1).map(|t| ws.edge(t)).collect();
    Marginals { log_z, node, edge }
}

/// Scratch buffers for scaled forward-backward, reused across sequences.
struct Workspace<F> {
    phi: [[F; N_LABELS]; N_LABELS],
    psi: Vec<[F; N_LABELS]>,
    alpha: Vec<[F; N_LABELS]>,
    beta: Vec<[F; N_LABELS]>,
    scale: Vec<F>,
    /// Set when the scaled pass underflowed; alpha and beta then hold log values.
    log_mode: bool,
    log_z: F,
    trans: [[F; N_LABELS]; N_LABELS],
    emissions: Vec<[F; N_LABELS]>,
}

impl<F: Scalar> Default for Workspace<F> {
    fn default() -> Self {
        Self {
            phi: [[F::zero(); N_LABELS]; N_LABELS],
            psi: Vec::new(),
            alpha: Vec::new(),
            beta: Vec::new(),
            scale: Vec::new(),
            log_mode: false,
            log_z: F::zero(),
            trans: [[F::zero(); N_LABELS]; N_LABELS],
            emissions: Vec::new(),
        }
    }
}

impl<F: Scalar> Workspace<F> {
    /// Fills alpha, beta and the scale factors; returns log Z.
    fn run(&mut self, weights: &Weights<F>, emissions: &[[F; N_LABELS]]) -> F {
        self.log_mode = false;
        match self.run_scaled(weights, emissions) {
            Some(log_z) => log_z,
            None => self.run_log(weights, emissions),
        }
    }

    /// Log-domain forward-backward, used when scaling loses too much range.
    fn run_log(&mut self, weights: &Weights<F>, emissions: &[[F; N_LABELS]]) -> F {
        let len = emissions.len();
        self.log_mode = true;
        for a in 0..N_LABELS {
            for b in 0..N_LABELS {
                self.trans[a][b] = weights.transition(a, b);
            }
        }
        self.emissions.clear();
        self.emissions.extend_from_slice(emissions);
        self.alpha[0] = emissions[0];
        for t in 1..len {
            for b in 0..N_LABELS {
                let terms: [F; N_LABELS] = std::array::from_fn(|a| self.alpha[t - 1][a] + self.trans[a][b]);
                self.alpha[t][b] = log_sum_exp(&terms) + emissions[t][b];
            }
        }
        self.beta[len - 1] = [F::zero(); N_LABELS];
        for t in (0..len - 1).rev() {
            for a in 0..N_LABELS {
                let terms: [F; N_LABELS] =
                    std::array::from_fn(|b| self.trans[a][b] + emissions[t + 1][b] + self.beta[t + 1][b]);
                self.beta[t][a] = log_sum_exp(&terms);
            }
        }
        self.log_z = log_sum_exp(&self.alpha[len - 1]);
        self.log_z
    }

    fn run_scaled(&mut self, weights: &Weights<F>, emissions: &[[F; N_LABELS]]) -> Option<F> {
        let len = emissions.len();
        let mut t_max = F::neg_infinity();
        for a in 0..N_LABELS {
            for b in 0..N_LABELS {
                t_max = t_max.max(weights.transition(a, b));
            }
        }
        for a in 0..N_LABELS {
            for b in 0..N_LABELS {
                self.phi[a][b] = (weights.transition(a, b) - t_max).exp();
            }
        }
        let zero = [F::zero(); N_LABELS];
        self.psi.clear();
        self.psi.resize(len, zero);
        self.alpha.clear();
        self.alpha.resize(len, zero);
        self.beta.clear();
        self.beta.resize(len, [F::one(); N_LABELS]);
        self.scale.clear();
        self.scale.resize(len, F::one());

        // Scale factors are multiplied together and logged in batches;
        // `lo` keeps the running product far from underflow.
        let lo = F::min_positive_value().sqrt().sqrt();
        let hi = F::one() / lo;
        let mut log_z = F::from_count(len - 1) * t_max;
        let mut prod = F::one();
        for (t, e) in emissions.iter().enumerate() {
            let m = e[0].max(e[1]).max(e[2]);
            log_z += m;
            for y in 0..N_LABELS {
                self.psi[t][y] = if e[y] == m { F::one() } else { (e[y] - m).exp() };
            }
            if t == 0 {
                self.alpha[0] = self.psi[0];
            } else {
                let prev = self.alpha[t - 1];
                for b in 0..N_LABELS {
                    let acc = prev[0] * self.phi[0][b] + prev[1] * self.phi[1][b] + prev[2] * self.phi[2][b];
                    self.alpha[t][b] = acc * self.psi[t][b];
                }
            }
            let c = self.alpha[t][0] + self.alpha[t][1] + self.alpha[t][2];
            // Below this, mass dropped to underflow is no longer negligible.
            if !(c >= F::min_positive_value().sqrt()) {
                return None;
            }
            self.scale[t] = c;
            let inv = F::one() / c;
            for v in self.alpha[t].iter_mut() {
                *v *= inv;
            }
            if c < lo || c > hi {
                log_z += c.ln();
            } else {
                prod *= c;
                if prod < lo || prod > hi {
                    log_z += prod.ln();
                    prod = F::one();
                }
            }
        }
        log_z += prod.ln();

        for t in (0..len - 1).rev() {
            let mut next = [F::zero(); N_LABELS];
            for b in 0..N_LABELS {
                next[b] = self.psi[t + 1][b] * self.beta[t + 1][b];
            }
            let inv = F::one() / self.scale[t + 1];
            for a in 0..N_LABELS {
                let acc = self.phi[a][0] * next[0] + self.phi[a][1] * next[1] + self.phi[a][2] * next[2];
                self.beta[t][a] = acc * inv;
            }
        }
        Some(log_z)
    }

    fn node(&self, t: usize) -> [F; N_LABELS] {
        if self.log_mode {
            return std::array::from_fn(|y| (self.alpha[t][y] + self.beta[t][y] - self.log_z).exp());
        }
        let mut n = [F::zero(); N_LABELS];
        for y in 0..N_LABELS {
            n[y] = self.alpha[t][y] * self.beta[t][y];
        }
        n
    }

    fn edge(&self, t: usize) -> [[F; N_LABELS]; N_LABELS] {
        if self.log_mode {
            return std::array::from_fn(|a| {
                std::array::from_fn(|b| {
                    (self.alpha[t][a] + self.trans[a][b] + self.emissions[t + 1][b] + self.beta[t + 1][b] - self.log_z)
                        .exp()
                })
            });
        }
        let mut e = [[F::zero(); N_LABELS]; N_LABELS];
        let inv = F::one() / self.scale[t + 1];
        for a in 0..N_LABELS {
            for b in 0..N_LABELS {
                e[a][b] = self.alpha[t][a] * self.phi[a][b] * self.psi[t + 1][b] * self.beta[t + 1][b] * inv;
            }
        }
        e
    }
}

fn log_sum_exp<F: Scalar>(xs: &[F; N_LABELS]) -> F {
    let m = xs[0].max(xs[1]).max(xs[2]);
    if m == F::neg_infinity() {
        return m;
    }
    m + ((xs[0] - m).exp() + (xs[1] - m).exp() + (xs[2] - m).exp()).ln()
}

/// Regularised negative log-likelihood and its gradient:
/// `NLL = -sum log p(y|x) + |w|^2 / (2 sigma^2)`,
/// `grad = E[counts] - gold counts + w / sigma^2`.
pub fn nll_gradient<F: Scalar>(
    weights: &Weights<F>,
    instances: &[Instance<'_>],
    l2_sigma: F,
) -> Result<(F, Vec<F>)> {
    let mut grad = vec![F::zero(); weights.params().len()];
    let mut nll = F::zero();
    let n_features = weights.n_features();
    let trans_base = n_features * N_LABELS;
    let mut ws = Workspace::default();
    let mut emissions = Vec::new();
    let mut trans = [[F::zero(); N_LABELS]; N_LABELS];

    for inst in instances {
        if inst.features.len() != inst.tags.len() {
            return Err(Error::LengthMismatch {
                left: inst.features.len(),
                right: inst.tags.len(),
            });
        }
        if inst.tags.is_empty() {
            continue;
        }
        validate_tags(inst.tags)?;
        emissions.clear();
        emissions.extend(inst.features.iter().map(|fv| weights.token_scores(fv)));
        let log_z = ws.run(weights, &emissions);
        let mut score = F::zero();

        for (t, fv) in inst.features.iter().enumerate() {
            let gold = inst.tags[t].index();
            score += emissions[t][gold];
            if t > 0 {
                let prev = inst.tags[t - 1].index();
                score += weights.transition(prev, gold);
                let e = ws.edge(t - 1);
                for a in 0..N_LABELS {
                    for b in 0..N_LABELS {
                        trans[a][b] += e[a][b];
                    }
                }
                trans[prev][gold] -= F::one();
            }
            let mut node = ws.node(t);
            node[gold] -= F::one();
            for &f in fv.ids() {
                let base = f as usize * N_LABELS;
                if let Some(g) = grad[..trans_base].get_mut(base..base + N_LABELS) {
                    g[0] += node[0];
                    g[1] += node[1];
                    g[2] += node[2];
                }
            }
        }
        nll += log_z - score;
    }
    for a in 0..N_LABELS {
        for b in 0..N_LABELS {
            grad[trans_base + a * N_LABELS + b] += trans[a][b];
        }
    }

    let inv_var = F::one() / (l2_sigma * l2_sigma);
    let half = F::from_f64_lossy(0.5);
    for (g, &w) in grad.iter_mut().zip(weights.params()) {
        nll += half * w * w * inv_var;
        *g += w * inv_var;
    }
    Ok((nll, grad))
}

/// Trains one concept's CRF by minimising the regularised NLL.
pub fn train_crf<F: Scalar>(
    instances: &[Instance<'_>],
    n_features: usize,
    config: &TrainConfig,
) -> Result<CrfModel<F>> {
    config.validate()?;
    if instances.is_empty() {
        return Err(Error::Training("no training instances".into()));
    }
    for inst in instances {
        validate_tags(inst.tags)?;
    }
    let sigma = F::from_f64_lossy(config.l2_sigma);
    let x0 = Weights::<F>::zeros(n_features).into_params();
    let report = minimize(x0, config, |x| {
        let w = Weights::from_params(n_features, x.to_vec());
        nll_gradient(&w, instances, sigma)
    })?;
    let weights = Weights::from_params(n_features, report.x);
    if !weights.is_finite() {
        return Err(Error::Training("non-finite weights".into()));
    }
    Ok(CrfModel {
        weights,
        iterations: report.iterations,
        final_nll: report.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Iob;

    fn fv(ids: &[u32]) -> TokenFeatureVector {
        TokenFeatureVector(ids.to_vec())
    }

    #[test]
    fn single_token_zero_weights_is_uniform() {
        let w = Weights::<f64>::zeros(2);
        let m = forward_backward(&w, &[fv(&[1])]);
        assert!((m.log_z - 3f64.ln()).abs() < 1e-12);
        for p in m.node[0] {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(m.edge.is_empty());
    }

    #[test]
    fn zero_weight_nll_is_ln3() {
        let w = Weights::<f64>::zeros(2);
        let feats = [fv(&[1])];
        let tags = [Iob::B];
        let inst = Instance { features: &feats, tags: &tags };
        let (nll, _) = nll_gradient(&w, &[inst], 10.0).unwrap();
        assert!((nll - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn prior_term_scales_with_sigma() {
        let mut w = Weights::<f64>::zeros(1);
        for (i, p) in w.params_mut().iter_mut().enumerate() {
            *p = 0.1 * i as f64 - 0.3;
        }
        let feats = [fv(&[0])];
        let tags = [Iob::O];
        let inst = [Instance { features: &feats, tags: &tags }];
        let data_term = {
            let m = forward_backward(&w, &feats);
            m.log_z - sequence_score(&w, &w.emission_scores(&feats), &[2])
        };
        let (a, _) = nll_gradient(&w, &inst, 1.5).unwrap();
        let (b, _) = nll_gradient(&w, &inst, 3.0).unwrap();
        assert!(((a - data_term) / (b - data_term) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_gold_is_rejected() {
        let w = Weights::<f64>::zeros(1);
        let feats = [fv(&[0]), fv(&[0])];
        let tags = [Iob::O, Iob::I];
        let inst = Instance { features: &feats, tags: &tags };
        assert!(nll_gradient(&w, &[inst], 1.0).is_err());
        assert!(train_crf::<f64>(&[inst], 1, &TrainConfig::default()).is_err());
    }

    #[test]
    fn marginals_are_normalised_in_f32() {
        let mut w = Weights::<f32>::zeros(3);
        for (i, p) in w.params_mut().iter_mut().enumerate() {
            *p = ((i * 7 % 11) as f32 - 5.0) * 3.0;
        }
        let feats = vec![fv(&[0, 1]), fv(&[2]), fv(&[1, 2]), fv(&[0])];
        let m = forward_backward(&w, &feats);
        assert!(m.log_z.is_finite());
        for n in &m.node {
            assert!((n.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        }
    }
}
