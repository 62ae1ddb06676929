//! Per-coder, per-concept annotation counts in the style of a dataset table.

use std::fmt;

use serde::Serialize;

use super::AnnotatedCorpus;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConceptStats {
    pub concept: String,
    /// Annotated tokens; separators are not counted.
    pub tokens: usize,
    pub mentions: usize,
}

impl ConceptStats {
    pub fn mean_mention_length(&self) -> f64 {
        if self.mentions == 0 {
            0.0
        } else {
            self.tokens as f64 / self.mentions as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoderStats {
    pub coder: String,
    pub documents: usize,
    pub per_concept: Vec<ConceptStats>,
    pub total_tokens: usize,
    pub total_mentions: usize,
}

impl CoderStats {
    pub fn mean_mention_length(&self) -> f64 {
        if self.total_mentions == 0 {
            0.0
        } else {
            self.total_tokens as f64 / self.total_mentions as f64
        }
    }

    /// Mean number of mentions per concept per annotated document.
    pub fn mentions_per_concept_per_doc(&self) -> f64 {
        let cells = self.documents * self.per_concept.len();
        if cells == 0 {
            0.0
        } else {
            self.total_mentions as f64 / cells as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub coders: Vec<CoderStats>,
}

impl CorpusStats {
    pub fn coder(&self, id: &str) -> Option<&CoderStats> {
        self.coders.iter().find(|c| c.coder == id)
    }
}

pub fn compute_stats(corpus: &AnnotatedCorpus) -> CorpusStats {
    let concepts = corpus.concepts();
    let coders = corpus
        .coders()
        .map(|coder| {
            let ann = corpus.coder(coder).expect("listed coder");
            let mut per_concept: Vec<ConceptStats> = concepts
                .ids()
                .iter()
                .map(|c| ConceptStats {
                    concept: c.clone(),
                    tokens: 0,
                    mentions: 0,
                })
                .collect();
            let mut documents = 0;
            for d in 0..corpus.documents().len() {
                let Some(layers) = ann.doc(d) else { continue };
                documents += 1;
                for (c, spans) in layers.iter().enumerate() {
                    per_concept[c].mentions += spans.len();
                    per_concept[c].tokens += spans.iter().map(|s| s.token_len()).sum::<usize>();
                }
            }
            CoderStats {
                coder: coder.to_string(),
                documents,
                total_tokens: per_concept.iter().map(|c| c.tokens).sum(),
                total_mentions: per_concept.iter().map(|c| c.mentions).sum(),
                per_concept,
            }
        })
        .collect();
    CorpusStats {
        documents: corpus.documents().len(),
        coders,
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some(first) = self.coders.first() else {
            return writeln!(f, "{} documents, no annotations", self.documents);
        };
        write!(f, "{:<28}", "")?;
        for c in &first.per_concept {
            write!(f, "{:>8}", c.concept)?;
        }
        writeln!(f, "{:>9}", "Total")?;
        for coder in &self.coders {
            write!(f, "{:<28}", format!("Tokens annotated by {}", coder.coder))?;
            for c in &coder.per_concept {
                write!(f, "{:>8}", c.tokens)?;
            }
            writeln!(f, "{:>9}", coder.total_tokens)?;
        }
        for coder in &self.coders {
            write!(f, "{:<28}", format!("Mentions annotated by {}", coder.coder))?;
            for c in &coder.per_concept {
                write!(f, "{:>8}", c.mentions)?;
            }
            writeln!(f, "{:>9}", coder.total_mentions)?;
        }
        writeln!(f)?;
        for coder in &self.coders {
            writeln!(
                f,
                "{}: {} documents, {:.3} mentions/concept/document, mean mention length {:.2} tokens",
                coder.coder,
                coder.documents,
                coder.mentions_per_concept_per_doc(),
                coder.mean_mention_length()
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::corpus::{Annotations, ConceptSet, Document, MentionSpan};

    #[test]
    fn one_three_token_mention() {
        let doc = Document::from_tokens("d", &["a", "b", "c", "d"]).unwrap();
        let mut ann = Annotations::new(1);
        ann.set_doc(0, vec![vec![MentionSpan::new(2, 6)]]);
        let corpus = AnnotatedCorpus::new(
            ConceptSet::new(["X"]).unwrap(),
            vec![doc],
            BTreeMap::from([("a".to_string(), ann)]),
        )
        .unwrap();
        let stats = compute_stats(&corpus);
        let a = stats.coder("a").unwrap();
        assert_eq!(a.per_concept[0].mentions, 1);
        assert_eq!(a.per_concept[0].tokens, 3);
        assert_eq!(a.total_tokens, 3);
        assert!(stats.to_string().contains("Tokens annotated by a"));
    }

    #[test]
    fn mention_ratio_between_coders() {
        // 100 vs 115.7 mentions is not integral; use 1000 vs 1157 over 1000 docs.
        let n = 1000;
        let docs: Vec<Document> = (0..n)
            .map(|i| Document::from_tokens(format!("d{i}"), &["a", "b", "c"]).unwrap())
            .collect();
        let mut a = Annotations::new(n);
        let mut b = Annotations::new(n);
        for i in 0..n {
            a.set_doc(i, vec![vec![MentionSpan::new(0, 0)]]);
            let extra = if i < 157 { vec![MentionSpan::new(0, 0), MentionSpan::new(4, 4)] } else { vec![MentionSpan::new(0, 0)] };
            b.set_doc(i, vec![extra]);
        }
        let corpus = AnnotatedCorpus::new(
            ConceptSet::new(["X"]).unwrap(),
            docs,
            BTreeMap::from([("A".to_string(), a), ("B".to_string(), b)]),
        )
        .unwrap();
        let s = compute_stats(&corpus);
        let ratio = s.coder("B").unwrap().total_mentions as f64 / s.coder("A").unwrap().total_mentions as f64;
        assert!((ratio - 1.157).abs() < 1e-12);
    }
}
