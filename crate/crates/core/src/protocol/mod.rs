//! Corruption-ratio experiments: nested replacement of authoritative
//! training annotations by a second coder's, repeated seeded runs,
//! aggregation over repeats, and k-fold cross-validation.

mod kfold;
mod model;
mod sweep;

pub use kfold::{kfold_cv, partition_folds, KFoldConfig, KFoldResult};
pub use model::{tag_corpus, train_model};
pub use sweep::{
    run_sweep, LambdaSummary, MeanStd, RunResult, RunStatus, SweepConfig, SweepResult, SWEEP_FORMAT_VERSION,
};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{spans_to_iob, from_iob, Annotations, Document, IobSequence};
use crate::error::{Error, Result};
use crate::eval::{tunit_table, ContingencyTable};
use crate::features::{extract_features, extract_frozen, FeatureIndex, TokenFeatureVector};
use crate::learners::{viterbi_decode, Instance, Learner, SequenceLearner, Weights};
use crate::seed::rng_for;
use crate::corpus::mentions_to_labels;

const PERMUTATION_TAG: u64 = 0x5045_524d;

/// Number of training documents replaced at corruption ratio `lambda` (percent).
pub fn corrupted_count(n_docs: usize, lambda: u32) -> usize {
    (lambda as usize * n_docs).div_ceil(100)
}

/// One seeded permutation of the training documents per repeat; the
/// corrupted set at ratio λ is the permutation's first ⌈λ/100·N⌉ entries,
/// so sets grow monotonically with λ inside a repeat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionPlan {
    pub train_docs: Vec<usize>,
    pub permutations: Vec<Vec<usize>>,
}

impl CorruptionPlan {
    pub fn new(train_docs: &[usize], repeats: usize, master_seed: u64) -> Self {
        let permutations = (0..repeats)
            .map(|r| {
                let mut p = train_docs.to_vec();
                p.shuffle(&mut rng_for(master_seed, &[PERMUTATION_TAG, r as u64]));
                p
            })
            .collect();
        Self {
            train_docs: train_docs.to_vec(),
            permutations,
        }
    }

    pub fn repeats(&self) -> usize {
        self.permutations.len()
    }

    /// Documents whose annotations come from the non-authoritative coder.
    pub fn corrupted(&self, repeat: usize, lambda: u32) -> Result<&[usize]> {
        if lambda > 100 {
            return Err(Error::Config(format!("corruption ratio {lambda} exceeds 100")));
        }
        let perm = self
            .permutations
            .get(repeat)
            .ok_or_else(|| Error::Config(format!("repeat {repeat} is not in the plan")))?;
        Ok(&perm[..corrupted_count(perm.len(), lambda)])
    }
}

/// Training annotations at ratio `lambda`: corrupted documents carry the
/// non-authoritative coder's spans, the rest the authoritative coder's.
/// Documents outside the plan are left unannotated.
pub fn corrupt_training_set(
    auth: &Annotations,
    nonauth: &Annotations,
    plan: &CorruptionPlan,
    repeat: usize,
    lambda: u32,
) -> Result<Annotations> {
    let corrupted = plan.corrupted(repeat, lambda)?;
    let mut out = Annotations::new(auth.n_docs());
    for &d in &plan.train_docs {
        let src = if corrupted.contains(&d) { nonauth } else { auth };
        let spans = src
            .doc(d)
            .ok_or_else(|| Error::Corpus(format!("training document {d} lacks annotations from one coder")))?;
        out.set_doc(d, spans.to_vec());
    }
    Ok(out)
}

/// `100 · (value − baseline) / baseline`.
pub fn relative_loss(baseline: f64, value: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::Config(format!("relative loss needs a positive baseline, got {baseline}")));
    }
    Ok(100.0 * (value - baseline) / baseline)
}

/// Training and test documents, as indices into the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// The first `n_train` documents train, the rest test.
    pub fn leading(n_docs: usize, n_train: usize) -> Result<Self> {
        if n_train == 0 || n_train >= n_docs {
            return Err(Error::Config(format!(
                "cannot split {n_docs} documents with {n_train} for training"
            )));
        }
        Ok(Self {
            train: (0..n_train).collect(),
            test: (n_train..n_docs).collect(),
        })
    }
}

/// Features of a train/test pair, indexed on the training documents only.
pub(crate) struct FeatureSet {
    pub index: FeatureIndex,
    pub train: Vec<Vec<TokenFeatureVector>>,
    pub test: Vec<Vec<TokenFeatureVector>>,
}

impl FeatureSet {
    pub fn build(documents: &[Document], train: &[usize], test: &[usize]) -> Self {
        let mut index = FeatureIndex::new();
        let train_feats = train.iter().map(|&d| extract_features(&documents[d], &mut index)).collect();
        index.freeze();
        let test_feats = test.iter().map(|&d| extract_frozen(&documents[d], &index)).collect();
        Self {
            index,
            train: train_feats,
            test: test_feats,
        }
    }
}

/// IOB tags of one concept on the given documents.
pub(crate) fn concept_tags(
    documents: &[Document],
    ann: &Annotations,
    docs: &[usize],
    concept: usize,
) -> Result<Vec<IobSequence>> {
    docs.iter()
        .map(|&d| {
            let spans = ann
                .spans(d, concept)
                .ok_or_else(|| Error::Corpus(format!("document {} is not annotated", documents[d].id())))?;
            spans_to_iob(&documents[d], spans)
        })
        .collect()
}

pub(crate) fn train_concept(
    learner: &Learner,
    feats: &[Vec<TokenFeatureVector>],
    tags: &[IobSequence],
    n_features: usize,
    seed: u64,
) -> Result<Weights<f64>> {
    let instances: Vec<Instance<'_>> = feats
        .iter()
        .zip(tags)
        .map(|(f, t)| Instance {
            features: f,
            tags: &t.0,
        })
        .collect();
    learner.train(&instances, n_features, seed)
}

/// Decodes the test documents with one concept model and scores them
/// against `gold`, one table per document.
pub(crate) fn score_concept(
    weights: &Weights<f64>,
    documents: &[Document],
    test: &[usize],
    test_feats: &[Vec<TokenFeatureVector>],
    gold: &Annotations,
    concept: usize,
) -> Result<Vec<ContingencyTable>> {
    test.iter()
        .zip(test_feats)
        .map(|(&d, f)| {
            let doc = &documents[d];
            let pred = from_iob(&viterbi_decode(weights, f), doc)?;
            let spans = gold
                .spans(d, concept)
                .ok_or_else(|| Error::Corpus(format!("test document {} lacks gold annotations", doc.id())))?;
            tunit_table(&pred, &mentions_to_labels(doc, spans)?)
        })
        .collect()
}
