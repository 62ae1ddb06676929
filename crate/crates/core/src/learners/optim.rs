//! Deterministic batch optimisers with a backtracking (Armijo) line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    GradientDescent,
    Lbfgs,
}

#[derive(Debug, Clone)]
pub struct OptimReport<F> {
    pub x: Vec<F>,
    pub value: F,
    pub iterations: usize,
    /// Objective after every accepted step, starting with the initial point.
    pub trace: Vec<F>,
}

fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Minimises `objective` from `x0`. Every accepted step satisfies the Armijo
/// condition, so the objective trace is non-increasing.
pub fn minimize<F, O>(x0: Vec<F>, config: &TrainConfig, mut objective: O) -> Result<OptimReport<F>>
where
    F: Scalar,
    O: FnMut(&[F]) -> Result<(F, Vec<F>)>,
{
    let armijo = F::from_f64_lossy(config.armijo);
    let shrink = F::from_f64_lossy(config.backtrack);
    let tol = F::from_f64_lossy(config.tolerance);
    let eps = F::epsilon();

    let mut x = x0;
    let (mut fx, mut g) = objective(&x)?;
    if !fx.is_finite() {
        return Err(Error::Training(format!("non-finite objective {fx} at start")));
    }
    let mut trace = vec![fx];
    let mut history: VecDeque<(Vec<F>, Vec<F>, F)> = VecDeque::new();
    let mut iterations = 0;

    while iterations < config.max_iterations {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm <= eps {
            break;
        }

        let mut dir: Vec<F> = match config.optimizer {
            Optimizer::GradientDescent => g.iter().map(|&v| -v).collect(),
            Optimizer::Lbfgs => two_loop(&g, &history),
        };
        let mut slope = dot(&g, &dir);
        if !(slope < F::zero()) {
            history.clear();
            dir = g.iter().map(|&v| -v).collect();
            slope = -gnorm * gnorm;
        }

        let mut step = if history.is_empty() {
            F::one() / gnorm
        } else {
            F::one()
        };
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<F> = x.iter().zip(&dir).map(|(&xi, &di)| xi + step * di).collect();
            let (fc, gc) = objective(&cand)?;
            if fc.is_finite() && fc <= fx + armijo * step * slope {
                accepted = Some((cand, fc, gc));
                break;
            }
            step *= shrink;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            break;
        };
        iterations += 1;

        let s: Vec<F> = x_new.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<F> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if config.optimizer == Optimizer::Lbfgs && sy > eps * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == config.memory.max(1) {
                history.pop_front();
            }
            history.push_back((s, y, F::one() / sy));
        }

        let rel = (fx - f_new) / fx.abs().max(F::one());
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push(fx);
        if rel < tol {
            break;
        }
    }

    Ok(OptimReport {
        x,
        value: fx,
        iterations,
        trace,
    })
}

fn two_loop<F: Scalar>(g: &[F], history: &VecDeque<(Vec<F>, Vec<F>, F)>) -> Vec<F> {
    let mut q: Vec<F> = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = *rho * dot(s, &q);
        for (qi, &yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        for (qi, &si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.into_iter().map(|v| -v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((f, g))
    }

    #[test]
    fn lbfgs_solves_rosenbrock() {
        let cfg = TrainConfig {
            max_iterations: 500,
            tolerance: 1e-14,
            ..TrainConfig::default()
        };
        let r = minimize(vec![-1.2, 1.0], &cfg, rosenbrock).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn gradient_descent_decreases_quadratic() {
        let cfg = TrainConfig {
            optimizer: Optimizer::GradientDescent,
            max_iterations: 200,
            tolerance: 1e-12,
            ..TrainConfig::default()
        };
        let r = minimize(vec![3.0f64, -2.0], &cfg, |x| {
            Ok((x[0] * x[0] + 4.0 * x[1] * x[1], vec![2.0 * x[0], 8.0 * x[1]]))
        })
        .unwrap();
        assert!(r.value < 1e-8);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn non_finite_start_aborts() {
        let cfg = TrainConfig::default();
        assert!(minimize(vec![0.0f64], &cfg, |_| Ok((f64::NAN, vec![0.0]))).is_err());
    }
}
