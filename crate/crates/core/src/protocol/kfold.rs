use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{concept_tags, score_concept, train_concept, FeatureSet};
use crate::corpus::AnnotatedCorpus;
use crate::error::{Error, Result};
use crate::eval::{concept_totals, micro_macro, ContingencyTable, EvalReport};
use crate::learners::Learner;
use crate::seed::{derive_seed, rng_for};

const FOLD_TAG: u64 = 0x464f_4c44;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFoldConfig {
    pub k: usize,
    pub coder: String,
    pub learner: Learner,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFoldResult {
    pub folds: Vec<Vec<usize>>,
    /// Tables pooled over every fold's predictions.
    pub report: EvalReport<f64>,
    /// Micro F1 of each fold on its own.
    pub fold_f1_micro: Vec<f64>,
}

/// Seeded partition of `docs` into `k` folds whose sizes differ by at most 1.
pub fn partition_folds(docs: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > docs.len() {
        return Err(Error::Config(format!("k = {k} exceeds the {} documents", docs.len())));
    }
    let mut perm = docs.to_vec();
    perm.shuffle(&mut rng_for(seed, &[FOLD_TAG]));
    let mut folds = vec![Vec::new(); k];
    for (i, d) in perm.into_iter().enumerate() {
        folds[i % k].push(d);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// k-fold cross-validation of one coder's annotations against themselves.
pub fn kfold_cv(corpus: &AnnotatedCorpus, config: &KFoldConfig) -> Result<KFoldResult> {
    let ann = corpus.coder(&config.coder)?;
    let docs = corpus.documents();
    let annotated: Vec<usize> = (0..docs.len()).filter(|&d| ann.has_doc(d)).collect();
    let folds = partition_folds(&annotated, config.k, config.seed)?;
    let n_concepts = corpus.concepts().len();

    let sets: Vec<(Vec<usize>, FeatureSet)> = folds
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, d)| d.iter().copied())
                .collect();
            let fs = FeatureSet::build(docs, &train, test);
            (train, fs)
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..folds.len())
        .flat_map(|f| (0..n_concepts).map(move |c| (f, c)))
        .collect();
    let cells: Vec<Vec<ContingencyTable>> = jobs
        .par_iter()
        .map(|&(f, c)| {
            let (train, fs) = &sets[f];
            let tags = concept_tags(docs, ann, train, c)?;
            let seed = derive_seed(config.seed, &[f as u64, c as u64]);
            let w = train_concept(&config.learner, &fs.train, &tags, fs.index.len(), seed)?;
            score_concept(&w, docs, &folds[f], &fs.test, ann, c)
        })
        .collect::<Result<_>>()?;

    let mut all_docs: Vec<Vec<ContingencyTable>> = Vec::new();
    let mut fold_f1_micro = Vec::with_capacity(folds.len());
    for (f, fold) in folds.iter().enumerate() {
        let cols = &cells[f * n_concepts..(f + 1) * n_concepts];
        let rows: Vec<Vec<ContingencyTable>> = (0..fold.len())
            .map(|d| cols.iter().map(|col| col[d]).collect())
            .collect();
        let fold_report = micro_macro::<f64>(corpus.concepts().ids(), &concept_totals(&rows, n_concepts))?;
        fold_f1_micro.push(fold_report.micro.f1);
        all_docs.extend(rows);
    }
    let report = micro_macro(corpus.concepts().ids(), &concept_totals(&all_docs, n_concepts))?;
    Ok(KFoldResult {
        folds,
        report,
        fold_f1_micro,
    })
}
