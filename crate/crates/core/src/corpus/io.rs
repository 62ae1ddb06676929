//! JSON-lines corpus format.
//!
//! One document per line:
//! `{"id": str, "tunits": [{"k": "T"|"S", "x": str, "stem"?: str, "pos"?: str}, ...],
//!   "ann": {coder: {concept: [[start, end], ...]}}}`
//!
//! Span indices are 0-based inclusive t-unit indices. The concept order of a
//! corpus is the order in which concept ids first appear in the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{AnnotatedCorpus, Annotations, ConceptSet, Document, MentionSpan, TUnit, TUnitKind};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
enum KindTag {
    T,
    S,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TUnitRecord {
    k: KindTag,
    x: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stem: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pos: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocRecord {
    id: String,
    tunits: Vec<TUnitRecord>,
    #[serde(default)]
    ann: IndexMap<String, IndexMap<String, Vec<[usize; 2]>>>,
}

pub fn parse_corpus(bytes: &[u8]) -> Result<AnnotatedCorpus> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        line: 0,
        reason: format!("not UTF-8: {e}"),
    })?;

    let mut documents = Vec::new();
    let mut raw_ann: Vec<(usize, IndexMap<String, IndexMap<String, Vec<[usize; 2]>>>)> = Vec::new();
    let mut concept_order: IndexMap<String, ()> = IndexMap::new();

    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: lineno,
            reason: e.to_string(),
        })?;
        let tunits = rec
            .tunits
            .into_iter()
            .map(|u| TUnit {
                kind: match u.k {
                    KindTag::T => TUnitKind::Token,
                    KindTag::S => TUnitKind::Separator,
                },
                text: u.x,
                stem: u.stem,
                pos: u.pos,
            })
            .collect();
        let doc = Document::new(rec.id, tunits).map_err(|e| Error::Parse {
            line: lineno,
            reason: e.to_string(),
        })?;
        for per_coder in rec.ann.values() {
            for concept in per_coder.keys() {
                concept_order.entry(concept.clone()).or_default();
            }
        }
        documents.push(doc);
        raw_ann.push((lineno, rec.ann));
    }

    let concepts = ConceptSet::new(concept_order.into_keys())?;
    let n_docs = documents.len();
    let mut annotations: BTreeMap<String, Annotations> = BTreeMap::new();
    for (d, (_lineno, ann)) in raw_ann.into_iter().enumerate() {
        let doc = &documents[d];
        for (coder, per_concept) in ann {
            let mut layers = vec![Vec::new(); concepts.len()];
            let mut present = vec![false; concepts.len()];
            for (concept, spans) in per_concept {
                let c = concepts.index_of(&concept).expect("collected above");
                present[c] = true;
                layers[c] = spans
                    .into_iter()
                    .map(|[start, end]| MentionSpan { start, end })
                    .collect();
            }
            if let Some(missing) = present.iter().position(|p| !p) {
                return Err(Error::Span {
                    doc: doc.id().into(),
                    coder,
                    concept: concepts.get(missing).into(),
                    reason: "concept layer missing".into(),
                });
            }
            annotations
                .entry(coder)
                .or_insert_with(|| Annotations::new(n_docs))
                .set_doc(d, layers);
        }
    }
    AnnotatedCorpus::new(concepts, documents, annotations)
}

pub fn serialize_corpus(corpus: &AnnotatedCorpus) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let concepts = corpus.concepts();
    for (d, doc) in corpus.documents().iter().enumerate() {
        let tunits = doc
            .tunits()
            .iter()
            .map(|u| TUnitRecord {
                k: match u.kind {
                    TUnitKind::Token => KindTag::T,
                    TUnitKind::Separator => KindTag::S,
                },
                x: u.text.clone(),
                stem: u.stem.clone(),
                pos: u.pos.clone(),
            })
            .collect();
        let mut ann = IndexMap::new();
        for coder in corpus.coders() {
            let Some(layers) = corpus.coder(coder)?.doc(d) else {
                continue;
            };
            let per_concept = layers
                .iter()
                .enumerate()
                .map(|(c, spans)| {
                    (
                        concepts.get(c).to_string(),
                        spans.iter().map(|s| [s.start, s.end]).collect(),
                    )
                })
                .collect();
            ann.insert(coder.to_string(), per_concept);
        }
        let rec = DocRecord {
            id: doc.id().to_string(),
            tunits,
            ann,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<AnnotatedCorpus> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&bytes)
}

pub fn write_corpus(path: impl AsRef<Path>, corpus: &AnnotatedCorpus) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, serialize_corpus(corpus)?).map_err(|e| Error::io(path, e))
}
