//! Doubly-annotated corpora: documents as alternating token/separator
//! t-units, per-coder mention spans, and the label/IOB encodings used by
//! the learners and the metrics.
//!
//! All t-unit indices are 0-based. Tokens sit at even indices, separators at
//! odd ones, and every document starts and ends on a token.

mod codec;
mod io;
mod stats;

pub use codec::{from_iob, labels_to_mentions, mentions_to_labels, spans_to_iob, to_iob};
pub use io::{parse_corpus, read_corpus, serialize_corpus, write_corpus};
pub use stats::{compute_stats, CoderStats, ConceptStats, CorpusStats};

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered set of concept identifiers (the tagset).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptSet {
    concepts: Vec<String>,
}

impl ConceptSet {
    pub fn new<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let concepts: Vec<String> = ids.into_iter().map(Into::into).collect();
        if concepts.is_empty() {
            return Err(Error::Corpus("concept set is empty".into()));
        }
        let mut seen = HashSet::new();
        for c in &concepts {
            if c.is_empty() {
                return Err(Error::Corpus("empty concept identifier".into()));
            }
            if !seen.insert(c.as_str()) {
                return Err(Error::Corpus(format!("duplicate concept {c:?}")));
            }
        }
        Ok(Self { concepts })
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.concepts
    }

    pub fn get(&self, idx: usize) -> &str {
        &self.concepts[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.concepts.iter().position(|c| c == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TUnitKind {
    Token,
    Separator,
}

/// A token or a separator. Optional stem/POS annotations feed the
/// feature extractor when present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TUnit {
    pub kind: TUnitKind,
    pub text: String,
    pub stem: Option<String>,
    pub pos: Option<String>,
}

impl TUnit {
    pub fn token(text: impl Into<String>) -> Self {
        Self {
            kind: TUnitKind::Token,
            text: text.into(),
            stem: None,
            pos: None,
        }
    }

    pub fn separator(text: impl Into<String>) -> Self {
        Self {
            kind: TUnitKind::Separator,
            text: text.into(),
            stem: None,
            pos: None,
        }
    }

    pub fn is_token(&self) -> bool {
        self.kind == TUnitKind::Token
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    id: String,
    tunits: Vec<TUnit>,
}

impl Document {
    pub fn new(id: impl Into<String>, tunits: Vec<TUnit>) -> Result<Self> {
        let id = id.into();
        let err = |reason: String| Error::Document {
            doc: id.clone(),
            reason,
        };
        if id.is_empty() {
            return Err(err("empty document id".into()));
        }
        if tunits.is_empty() {
            return Err(err("no t-units".into()));
        }
        if tunits.len() % 2 == 0 {
            return Err(err("last t-unit must be a token".into()));
        }
        for (t, u) in tunits.iter().enumerate() {
            let want = if t % 2 == 0 {
                TUnitKind::Token
            } else {
                TUnitKind::Separator
            };
            if u.kind != want {
                return Err(err(format!("t-unit {t} should be a {want:?}")));
            }
            match u.kind {
                TUnitKind::Token => {
                    if u.text.is_empty() || u.text.chars().any(char::is_whitespace) {
                        return Err(err(format!(
                            "token {t} ({:?}) is empty or has whitespace",
                            u.text
                        )));
                    }
                }
                TUnitKind::Separator => {
                    if u.text.is_empty()
                        || !u
                            .text
                            .chars()
                            .all(|c| c.is_whitespace() || !c.is_alphanumeric())
                    {
                        return Err(err(format!(
                            "separator {t} ({:?}) must be whitespace/punctuation",
                            u.text
                        )));
                    }
                }
            }
        }
        Ok(Self { id, tunits })
    }

    /// Builds a document from tokens joined by single spaces.
    pub fn from_tokens<S: AsRef<str>>(id: impl Into<String>, tokens: &[S]) -> Result<Self> {
        let mut tunits = Vec::with_capacity(tokens.len() * 2);
        for (i, tok) in tokens.iter().enumerate() {
            if i > 0 {
                tunits.push(TUnit::separator(" "));
            }
            tunits.push(TUnit::token(tok.as_ref()));
        }
        Self::new(id, tunits)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn tunits(&self) -> &[TUnit] {
        &self.tunits
    }

    /// Number of t-units, `|x|`.
    pub fn len(&self) -> usize {
        self.tunits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tunits.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.tunits.len().div_ceil(2)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &TUnit> {
        self.tunits.iter().step_by(2)
    }

    pub fn text(&self) -> String {
        self.tunits.iter().map(|u| u.text.as_str()).collect()
    }
}

/// A mention: inclusive t-unit range from a start token to an end token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MentionSpan {
    pub start: usize,
    pub end: usize,
}

impl MentionSpan {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    /// Mention length in tokens.
    pub fn token_len(&self) -> usize {
        (self.end - self.start) / 2 + 1
    }

    /// Checks one span against a document: ordered, in bounds, token endpoints.
    pub fn check(&self, doc: &Document) -> std::result::Result<(), String> {
        if self.start > self.end {
            return Err(format!("span end {} < start {}", self.end, self.start));
        }
        if self.end >= doc.len() {
            return Err(format!(
                "span ({}, {}) exceeds document length {}",
                self.start,
                self.end,
                doc.len()
            ));
        }
        if self.start % 2 != 0 || self.end % 2 != 0 {
            return Err(format!(
                "span ({}, {}) starts or ends on a separator",
                self.start, self.end
            ));
        }
        Ok(())
    }
}

/// Validates the spans of one (document, coder, concept) triple: each span
/// valid, sorted, non-overlapping.
pub fn check_spans(doc: &Document, spans: &[MentionSpan]) -> std::result::Result<(), String> {
    for s in spans {
        s.check(doc)?;
    }
    for w in spans.windows(2) {
        if w[1].start <= w[0].end {
            return Err(format!(
                "spans ({}, {}) and ({}, {}) overlap or are out of order",
                w[0].start, w[0].end, w[1].start, w[1].end
            ));
        }
    }
    Ok(())
}

/// Per-t-unit membership in a concept (`true` = labelled `c`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelSequence(pub Vec<bool>);

impl LabelSequence {
    pub fn empty(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Iob {
    B,
    I,
    O,
}

impl Iob {
    pub const ALL: [Iob; 3] = [Iob::B, Iob::I, Iob::O];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }
}

/// One IOB tag per token.
/// Rejects an initial `I` and any `I` that follows `O`.
pub fn validate_tags(tags: &[Iob]) -> Result<()> {
    let mut prev = Iob::O;
    for (i, &tag) in tags.iter().enumerate() {
        if tag == Iob::I && prev == Iob::O {
            return Err(Error::Iob(if i == 0 {
                "sequence starts with I".into()
            } else {
                format!("I follows O at token {i}")
            }));
        }
        prev = tag;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IobSequence(pub Vec<Iob>);

impl IobSequence {
    pub fn validate(&self) -> Result<()> {
        validate_tags(&self.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Spans of one coder, indexed `[doc][concept]`. A `None` entry means the
/// coder did not annotate that document.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Annotations {
    docs: Vec<Option<Vec<Vec<MentionSpan>>>>,
}

impl Annotations {
    pub fn new(n_docs: usize) -> Self {
        Self {
            docs: vec![None; n_docs],
        }
    }

    pub fn from_docs(docs: Vec<Option<Vec<Vec<MentionSpan>>>>) -> Self {
        Self { docs }
    }

    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn doc(&self, doc: usize) -> Option<&[Vec<MentionSpan>]> {
        self.docs[doc].as_deref()
    }

    pub fn has_doc(&self, doc: usize) -> bool {
        self.docs[doc].is_some()
    }

    pub fn spans(&self, doc: usize, concept: usize) -> Option<&[MentionSpan]> {
        self.docs[doc].as_ref().map(|c| c[concept].as_slice())
    }

    pub fn set_doc(&mut self, doc: usize, per_concept: Vec<Vec<MentionSpan>>) {
        self.docs[doc] = Some(per_concept);
    }

    pub fn set_spans(&mut self, doc: usize, concept: usize, spans: Vec<MentionSpan>) {
        let entry = self.docs[doc].as_mut().expect("document annotated");
        entry[concept] = spans;
    }
}

/// Documents plus every coder's annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedCorpus {
    concepts: ConceptSet,
    documents: Vec<Document>,
    annotations: BTreeMap<String, Annotations>,
}

impl AnnotatedCorpus {
    pub fn new(
        concepts: ConceptSet,
        documents: Vec<Document>,
        annotations: BTreeMap<String, Annotations>,
    ) -> Result<Self> {
        let corpus = Self {
            concepts,
            documents,
            annotations,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for d in &self.documents {
            if !ids.insert(d.id()) {
                return Err(Error::Corpus(format!("duplicate document id {:?}", d.id())));
            }
        }
        for (coder, ann) in &self.annotations {
            if ann.n_docs() != self.documents.len() {
                return Err(Error::Corpus(format!(
                    "coder {coder} covers {} documents, corpus has {}",
                    ann.n_docs(),
                    self.documents.len()
                )));
            }
            for (d, doc) in self.documents.iter().enumerate() {
                let Some(per_concept) = ann.doc(d) else {
                    continue;
                };
                if per_concept.len() != self.concepts.len() {
                    return Err(Error::Span {
                        doc: doc.id().into(),
                        coder: coder.clone(),
                        concept: "*".into(),
                        reason: format!(
                            "{} concept layers, expected {}",
                            per_concept.len(),
                            self.concepts.len()
                        ),
                    });
                }
                for (c, spans) in per_concept.iter().enumerate() {
                    check_spans(doc, spans).map_err(|reason| Error::Span {
                        doc: doc.id().into(),
                        coder: coder.clone(),
                        concept: self.concepts.get(c).into(),
                        reason,
                    })?;
                }
            }
        }
        Ok(())
    }

    pub fn concepts(&self) -> &ConceptSet {
        &self.concepts
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn coders(&self) -> impl Iterator<Item = &str> {
        self.annotations.keys().map(String::as_str)
    }

    pub fn annotations(&self, coder: &str) -> Option<&Annotations> {
        self.annotations.get(coder)
    }

    pub fn coder(&self, coder: &str) -> Result<&Annotations> {
        self.annotations
            .get(coder)
            .ok_or_else(|| Error::Corpus(format!("no annotations by coder {coder:?}")))
    }

    pub fn doc_index(&self, id: &str) -> Option<usize> {
        self.documents.iter().position(|d| d.id() == id)
    }

    /// Adds (or replaces) one coder's annotations after validating them.
    pub fn with_coder(mut self, coder: impl Into<String>, ann: Annotations) -> Result<Self> {
        self.annotations.insert(coder.into(), ann);
        self.validate()?;
        Ok(self)
    }

    pub fn into_parts(self) -> (ConceptSet, Vec<Document>, BTreeMap<String, Annotations>) {
        (self.concepts, self.documents, self.annotations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_alternation_is_enforced() {
        let bad = vec![TUnit::token("a"), TUnit::token("b"), TUnit::token("c")];
        assert!(Document::new("d", bad).is_err());
        let ends_on_sep = vec![TUnit::token("a"), TUnit::separator(" ")];
        assert!(Document::new("d", ends_on_sep).is_err());
        assert!(Document::new("d", vec![]).is_err());
        let ok = Document::from_tokens("d", &["a", "b"]).unwrap();
        assert_eq!(ok.len(), 3);
        assert_eq!(ok.token_count(), 2);
    }

    #[test]
    fn token_text_rules() {
        assert!(Document::new("d", vec![TUnit::token("a b")]).is_err());
        assert!(Document::new("d", vec![TUnit::token("")]).is_err());
        let sep_word = vec![TUnit::token("a"), TUnit::separator("x"), TUnit::token("b")];
        assert!(Document::new("d", sep_word).is_err());
        let punct = vec![TUnit::token("a"), TUnit::separator(", "), TUnit::token("b")];
        assert!(Document::new("d", punct).is_ok());
    }

    #[test]
    fn concept_set_rejects_duplicates() {
        assert!(ConceptSet::new(["A", "A"]).is_err());
        assert!(ConceptSet::new(Vec::<String>::new()).is_err());
        assert!(ConceptSet::new([""]).is_err());
        assert_eq!(ConceptSet::new(["A", "B"]).unwrap().index_of("B"), Some(1));
    }

    #[test]
    fn span_checks() {
        let doc = Document::from_tokens("d", &["a", "b", "c", "d"]).unwrap();
        assert!(check_spans(&doc, &[MentionSpan::new(0, 2), MentionSpan::new(4, 6)]).is_ok());
        assert!(check_spans(&doc, &[MentionSpan::new(2, 0)]).is_err());
        assert!(check_spans(&doc, &[MentionSpan::new(1, 2)]).is_err());
        assert!(check_spans(&doc, &[MentionSpan::new(0, 8)]).is_err());
        assert!(check_spans(&doc, &[MentionSpan::new(0, 4), MentionSpan::new(4, 6)]).is_err());
        assert!(check_spans(&doc, &[MentionSpan::new(4, 6), MentionSpan::new(0, 2)]).is_err());
    }

    #[test]
    fn iob_validation() {
        assert!(IobSequence(vec![Iob::I]).validate().is_err());
        assert!(IobSequence(vec![Iob::O, Iob::I]).validate().is_err());
        assert!(IobSequence(vec![Iob::B, Iob::I, Iob::B, Iob::O]).validate().is_ok());
    }
}
