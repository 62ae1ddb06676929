use rayon::prelude::*;

use super::{concept_tags, train_concept, FeatureSet};
use crate::corpus::{labels_to_mentions, from_iob, AnnotatedCorpus, Annotations};
use crate::error::{Error, Result};
use crate::learners::{Learner, ModelBundle, SequenceLearner};
use crate::seed::derive_seed;

/// Trains one model per concept on `docs`, using `coder`'s annotations.
pub fn train_model(
    corpus: &AnnotatedCorpus,
    coder: &str,
    docs: &[usize],
    learner: &Learner,
    seed: u64,
    metadata: serde_json::Value,
) -> Result<ModelBundle> {
    if docs.is_empty() {
        return Err(Error::Config("no training documents".into()));
    }
    let ann = corpus.coder(coder)?;
    let documents = corpus.documents();
    let feats = FeatureSet::build(documents, docs, &[]);
    let n_features = feats.index.len();
    let weights = (0..corpus.concepts().len())
        .into_par_iter()
        .map(|c| {
            let tags = concept_tags(documents, ann, docs, c)?;
            train_concept(learner, &feats.train, &tags, n_features, derive_seed(seed, &[c as u64]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelBundle::new(
        SequenceLearner::<f64>::name(learner),
        corpus.concepts().ids().to_vec(),
        &feats.index,
        weights,
        metadata,
    ))
}

/// Tags `docs` with `model`; other documents stay unannotated.
pub fn tag_corpus(model: &ModelBundle, corpus: &AnnotatedCorpus, docs: &[usize]) -> Result<Annotations> {
    if model.concepts != corpus.concepts().ids() {
        return Err(Error::Model(format!(
            "model concepts {:?} differ from corpus concepts {:?}",
            model.concepts,
            corpus.concepts().ids()
        )));
    }
    let index = model.index()?;
    let documents = corpus.documents();
    let tagged = docs
        .par_iter()
        .map(|&d| {
            let doc = &documents[d];
            model
                .tag(&index, doc)
                .iter()
                .map(|tags| labels_to_mentions(&from_iob(tags, doc)?, doc))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Annotations::new(documents.len());
    for (&d, layers) in docs.iter().zip(tagged) {
        out.set_doc(d, layers);
    }
    Ok(out)
}
