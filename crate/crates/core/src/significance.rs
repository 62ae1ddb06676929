//! Paired approximate randomization test on aggregate F1.
//!
//! Each shuffle swaps the two systems' outputs on every document
//! independently with probability 1/2, then recomputes micro or macro F1
//! from the summed tables. The p-value is `(count + 1) / (R + 1)` where
//! `count` is the number of shuffles with `|Δ| ≥ |Δ_observed|`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{f1, ContingencyTable};
use crate::seed::rng_for;

pub const DEFAULT_SHUFFLES: usize = 9999;
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtMetric {
    Micro,
    Macro,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtInput {
    /// `[doc][concept]` tables of system A.
    pub a: Vec<Vec<ContingencyTable>>,
    /// Same documents and concepts, system B.
    pub b: Vec<Vec<ContingencyTable>>,
    pub shuffles: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtResult {
    pub metric: ArtMetric,
    pub f1_a: f64,
    pub f1_b: f64,
    pub observed_micro: f64,
    pub observed_macro: f64,
    pub p_value: f64,
    pub significant: bool,
    pub shuffles: usize,
    pub seed: u64,
}

fn aggregate(tables: &[ContingencyTable], metric: ArtMetric) -> f64 {
    match metric {
        ArtMetric::Micro => f1::<f64>(&tables.iter().sum()),
        ArtMetric::Macro => tables.iter().map(f1::<f64>).sum::<f64>() / tables.len() as f64,
    }
}

impl ArtInput {
    fn validate(&self) -> Result<usize> {
        if self.a.is_empty() {
            return Err(Error::Config("randomization test needs at least one document".into()));
        }
        if self.shuffles == 0 {
            return Err(Error::Config("randomization test needs at least one shuffle".into()));
        }
        if self.a.len() != self.b.len() {
            return Err(Error::LengthMismatch {
                left: self.a.len(),
                right: self.b.len(),
            });
        }
        let m = self.a[0].len();
        if m == 0 || self.a.iter().chain(&self.b).any(|row| row.len() != m) {
            return Err(Error::Config("both systems need one table per concept on every document".into()));
        }
        Ok(m)
    }
}

/// Concept totals of both sides under one assignment of documents.
fn totals(input: &ArtInput, swap: impl Fn(usize) -> bool, m: usize) -> (Vec<ContingencyTable>, Vec<ContingencyTable>) {
    let mut ta = vec![ContingencyTable::default(); m];
    let mut tb = vec![ContingencyTable::default(); m];
    for (d, (ra, rb)) in input.a.iter().zip(&input.b).enumerate() {
        let (x, y) = if swap(d) { (rb, ra) } else { (ra, rb) };
        for c in 0..m {
            ta[c] += x[c];
            tb[c] += y[c];
        }
    }
    (ta, tb)
}

pub fn art_test(input: &ArtInput, metric: ArtMetric) -> Result<ArtResult> {
    let m = input.validate()?;
    let (ta, tb) = totals(input, |_| false, m);
    let delta = |ta: &[ContingencyTable], tb: &[ContingencyTable], metric| (aggregate(ta, metric) - aggregate(tb, metric)).abs();
    let observed = delta(&ta, &tb, metric);
    let count: usize = (0..input.shuffles)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(input.seed, &[i as u64]);
            let flips: Vec<bool> = (0..input.a.len()).map(|_| rng.random::<bool>()).collect();
            let (sa, sb) = totals(input, |d| flips[d], m);
            usize::from(delta(&sa, &sb, metric) + TIE_EPS >= observed)
        })
        .sum();
    let p_value = (count + 1) as f64 / (input.shuffles + 1) as f64;
    Ok(ArtResult {
        metric,
        f1_a: aggregate(&ta, metric),
        f1_b: aggregate(&tb, metric),
        observed_micro: delta(&ta, &tb, ArtMetric::Micro),
        observed_macro: delta(&ta, &tb, ArtMetric::Macro),
        p_value,
        significant: p_value < SIGNIFICANCE_LEVEL,
        shuffles: input.shuffles,
        seed: input.seed,
    })
}
