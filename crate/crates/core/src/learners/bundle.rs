//! On-disk model: the frozen feature index plus one weight set per concept.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{viterbi_decode, Weights};
use crate::corpus::{Document, IobSequence};
use crate::error::{Error, Result};
use crate::features::{extract_frozen, FeatureIndex};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub learner: String,
    pub concepts: Vec<String>,
    /// Feature names in id order; id 0 is the unknown-feature slot.
    pub features: Vec<String>,
    pub weights: Vec<Weights<f64>>,
    /// Free-form provenance (training config, seed, coder).
    #[serde(default)]
    pub metadata: serde_json::Value,
}

impl ModelBundle {
    pub fn new(
        learner: impl Into<String>,
        concepts: Vec<String>,
        index: &FeatureIndex,
        weights: Vec<Weights<f64>>,
        metadata: serde_json::Value,
    ) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            learner: learner.into(),
            concepts,
            features: index.names().to_vec(),
            weights,
            metadata,
        }
    }

    pub fn index(&self) -> Result<FeatureIndex> {
        FeatureIndex::from_names(self.features.clone())
            .ok_or_else(|| Error::Model("feature table is malformed".into()))
    }

    fn check(&self) -> Result<()> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported model format {} (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.concepts.len() != self.weights.len() {
            return Err(Error::Model("concept/weight count mismatch".into()));
        }
        if let Some(w) = self.weights.iter().find(|w| w.n_features() != self.features.len()) {
            return Err(Error::Model(format!(
                "weights cover {} features, index has {}",
                w.n_features(),
                self.features.len()
            )));
        }
        Ok(())
    }

    /// Decodes every concept layer of one document.
    pub fn tag(&self, index: &FeatureIndex, doc: &Document) -> Vec<IobSequence> {
        let feats = extract_frozen(doc, index);
        self.weights.iter().map(|w| viterbi_decode(w, &feats)).collect()
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let m: Self = serde_json::from_slice(bytes)?;
        m.check()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&bytes)
    }
}
