//! Synthetic doubly-annotated corpora.
//!
//! Text is pseudo-word soup. Every concept owns a set of subtypes; a
//! subtype has a head word that opens each of its mentions and a few body
//! words, so concepts are learnable from per-token features. Mention
//! bodies mix subtype words with shared function words. A mention may be
//! preceded by qualifier words that the gold coder leaves out. Every
//! mention is followed by a closing word and a punctuated separator, then
//! background words fill the gap up to the next mention.

mod coder;

pub use coder::{apply_coder, apply_coder_to, Placement, calibrate_to_kappa, Calibration, CalibrationConfig, CoderProfile, EdgeShift};

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedCorpus, Annotations, ConceptSet, Document, MentionSpan, TUnit};
use crate::error::{Error, Result};
use crate::seed::rng_for;

pub const GOLD_CODER: &str = "gold";
pub const NOISY_CODER: &str = "noisy";

const VOCAB_TAG: u64 = 0x564f_4341;
const DOC_TAG: u64 = 0x444f_43;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub docs: usize,
    pub concepts: usize,
    /// Mean mentions per concept per document (Poisson).
    pub mention_rate: f64,
    /// Mean mention length in tokens; lengths are `1 + Poisson(mean - 1)`.
    pub mention_length: f64,
    /// Mean background gap between segments; gaps are `1 + Poisson(mean - 1)`.
    pub gap_length: f64,
    /// Documents may not exceed this many tokens.
    pub max_doc_tokens: usize,
    pub subtypes: usize,
    pub body_words: usize,
    pub background_words: usize,
    pub function_words: usize,
    pub qualifier_words: usize,
    pub closing_words: usize,
    /// Mean qualifiers before a mention (Poisson).
    pub qualifier_rate: f64,
    /// Share of mention-interior tokens drawn from the function words.
    pub function_word_rate: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            docs: 300,
            concepts: 9,
            mention_rate: 0.87,
            mention_length: 17.33,
            gap_length: 3.0,
            max_doc_tokens: 600,
            subtypes: 12,
            body_words: 5,
            background_words: 300,
            function_words: 12,
            qualifier_words: 20,
            closing_words: 10,
            qualifier_rate: 3.0,
            function_word_rate: 0.25,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.docs == 0 || self.concepts == 0 {
            return bad("docs and concepts must be >= 1");
        }
        if !(self.mention_rate >= 0.0 && self.mention_rate.is_finite()) {
            return bad("mention_rate must be a finite value >= 0");
        }
        if !(self.mention_length >= 1.0 && self.mention_length.is_finite()) {
            return bad("mention_length must be >= 1");
        }
        if !(self.gap_length >= 1.0 && self.gap_length.is_finite()) {
            return bad("gap_length must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.function_word_rate) {
            return bad("function_word_rate must lie in [0, 1]");
        }
        if !(self.qualifier_rate >= 0.0 && self.qualifier_rate.is_finite()) {
            return bad("qualifier_rate must be a finite value >= 0");
        }
        if self.subtypes == 0 || self.background_words == 0 || self.function_words == 0 || self.qualifier_words == 0
            || self.closing_words == 0
        {
            return bad("vocabulary sizes must be >= 1");
        }
        let expected = self.concepts as f64 * self.mention_rate * (self.mention_length + self.qualifier_rate + self.gap_length + 1.0)
            + self.gap_length;
        if expected > self.max_doc_tokens as f64 {
            return Err(Error::Config(format!(
                "infeasible config: documents need about {expected:.0} tokens but max_doc_tokens is {}",
                self.max_doc_tokens
            )));
        }
        Ok(())
    }

    pub fn concept_names(&self) -> Vec<String> {
        (1..=self.concepts).map(|c| format!("C{c:02}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subtype {
    pub head: String,
    pub body: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    /// `[concept][subtype]`
    pub subtypes: Vec<Vec<Subtype>>,
    pub background: Vec<String>,
    pub function: Vec<String>,
    pub qualifiers: Vec<String>,
    pub closers: Vec<String>,
}

const ONSETS: [&str; 16] = ["b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "gr"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const CODAS: [&str; 5] = ["n", "r", "l", "t", "m"];

fn pseudo_word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).expect("non-empty"));
        w.push_str(VOWELS.choose(rng).expect("non-empty"));
    }
    w.push_str(CODAS.choose(rng).expect("non-empty"));
    w
}

impl Vocabulary {
    pub fn generate(config: &GenConfig) -> Self {
        let mut rng = rng_for(config.seed, &[VOCAB_TAG]);
        let mut seen = HashSet::new();
        let mut fresh = |rng: &mut ChaCha8Rng, syl: usize| loop {
            let w = pseudo_word(rng, syl);
            if seen.insert(w.clone()) {
                return w;
            }
        };
        let function = (0..config.function_words).map(|_| fresh(&mut rng, 1)).collect();
        let subtypes = (0..config.concepts)
            .map(|_| {
                (0..config.subtypes)
                    .map(|_| Subtype {
                        head: fresh(&mut rng, 3),
                        body: (0..config.body_words).map(|_| fresh(&mut rng, 3)).collect(),
                    })
                    .collect()
            })
            .collect();
        let background = (0..config.background_words).map(|_| fresh(&mut rng, 2)).collect();
        let qualifiers = (0..config.qualifier_words).map(|_| fresh(&mut rng, 2)).collect();
        let closers = (0..config.closing_words).map(|_| fresh(&mut rng, 1)).collect();
        Self {
            subtypes,
            background,
            function,
            qualifiers,
            closers,
        }
    }
}

enum Segment {
    Gap(usize),
    Close,
    Mention { concept: usize, len: usize, qualifiers: usize },
}

fn gap_separator(rng: &mut ChaCha8Rng) -> &'static str {
    if rng.random_range(0..10) == 0 {
        ", "
    } else {
        " "
    }
}

fn clause_separator(rng: &mut ChaCha8Rng) -> &'static str {
    if rng.random_range(0..3) == 0 {
        ". "
    } else {
        ", "
    }
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

fn generate_doc(
    config: &GenConfig,
    vocab: &Vocabulary,
    index: usize,
) -> Result<(Document, Vec<Vec<MentionSpan>>)> {
    let mut rng = rng_for(config.seed, &[DOC_TAG, index as u64]);
    let mut mentions: Vec<(usize, usize, usize)> = Vec::new();
    for c in 0..config.concepts {
        for _ in 0..poisson(&mut rng, config.mention_rate) {
            let len = 1 + poisson(&mut rng, config.mention_length - 1.0);
            mentions.push((c, len, poisson(&mut rng, config.qualifier_rate)));
        }
    }
    mentions.shuffle(&mut rng);
    let gap = |rng: &mut ChaCha8Rng| 1 + poisson(rng, config.gap_length - 1.0);
    let mut segments = vec![Segment::Gap(gap(&mut rng))];
    let mut total = match segments[0] {
        Segment::Gap(g) => g,
        _ => unreachable!(),
    };
    for (concept, len, qualifiers) in mentions {
        let g = gap(&mut rng);
        if total + qualifiers + len + 1 + g > config.max_doc_tokens {
            continue;
        }
        total += qualifiers + len + 1 + g;
        segments.push(Segment::Mention { concept, len, qualifiers });
        segments.push(Segment::Close);
        segments.push(Segment::Gap(g));
    }

    // `breaks[i]` is the separator placed before word i.
    let mut words: Vec<String> = Vec::with_capacity(total);
    let mut breaks: Vec<&'static str> = Vec::with_capacity(total);
    let mut spans = vec![Vec::new(); config.concepts];
    for seg in segments {
        match seg {
            Segment::Gap(g) => {
                for k in 0..g {
                    let after_close = k == 0 && !words.is_empty();
                    breaks.push(if after_close { clause_separator(&mut rng) } else { gap_separator(&mut rng) });
                    words.push(vocab.background.choose(&mut rng).expect("non-empty").clone());
                }
            }
            Segment::Close => {
                breaks.push(" ");
                words.push(vocab.closers.choose(&mut rng).expect("non-empty").clone());
            }
            Segment::Mention { concept, len, qualifiers } => {
                let sub = vocab.subtypes[concept].choose(&mut rng).expect("non-empty");
                breaks.push(gap_separator(&mut rng));
                for _ in 0..qualifiers {
                    words.push(vocab.qualifiers.choose(&mut rng).expect("non-empty").clone());
                    breaks.push(" ");
                }
                let start = words.len();
                words.push(sub.head.clone());
                for k in 1..len {
                    let last = k + 1 == len;
                    let w = if !last && rng.random::<f64>() < config.function_word_rate {
                        vocab.function.choose(&mut rng).expect("non-empty")
                    } else if sub.body.is_empty() {
                        &sub.head
                    } else {
                        sub.body.choose(&mut rng).expect("non-empty")
                    };
                    breaks.push(" ");
                    words.push(w.clone());
                }
                spans[concept].push(MentionSpan::new(2 * start, 2 * (words.len() - 1)));
            }
        }
    }
    let mut tunits = Vec::with_capacity(2 * words.len() - 1);
    for (i, (w, sep)) in words.into_iter().zip(breaks).enumerate() {
        if i > 0 {
            tunits.push(TUnit::separator(sep));
        }
        tunits.push(TUnit::token(w));
    }
    let doc = Document::new(format!("doc{:04}", index + 1), tunits)?;
    Ok((doc, spans))
}

/// A corpus annotated by the single coder [`GOLD_CODER`].
pub fn generate_corpus(config: &GenConfig) -> Result<AnnotatedCorpus> {
    config.validate()?;
    let vocab = Vocabulary::generate(config);
    let mut documents = Vec::with_capacity(config.docs);
    let mut gold = Annotations::new(config.docs);
    for i in 0..config.docs {
        let (doc, spans) = generate_doc(config, &vocab, i)?;
        documents.push(doc);
        gold.set_doc(i, spans);
    }
    let concepts = ConceptSet::new(config.concept_names())?;
    AnnotatedCorpus::new(concepts, documents, [(GOLD_CODER.to_string(), gold)].into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::compute_stats;

    fn small() -> GenConfig {
        GenConfig {
            docs: 40,
            seed: 5,
            ..GenConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate_corpus(&small()).unwrap(), generate_corpus(&small()).unwrap());
        let other = GenConfig { seed: 6, ..small() };
        assert_ne!(generate_corpus(&small()).unwrap(), generate_corpus(&other).unwrap());
    }

    #[test]
    fn zero_rate_gives_empty_annotations() {
        let c = generate_corpus(&GenConfig { mention_rate: 0.0, ..small() }).unwrap();
        let gold = c.coder(GOLD_CODER).unwrap();
        assert!((0..c.documents().len()).all(|d| gold.doc(d).unwrap().iter().all(Vec::is_empty)));
    }

    #[test]
    fn infeasible_config() {
        let cfg = GenConfig { max_doc_tokens: 50, ..small() };
        let err = generate_corpus(&cfg).unwrap_err().to_string();
        assert!(err.contains("infeasible"), "{err}");
    }

    #[test]
    fn realized_statistics() {
        let c = generate_corpus(&GenConfig { docs: 200, ..GenConfig::default() }).unwrap();
        let s = compute_stats(&c);
        let g = s.coder(GOLD_CODER).unwrap();
        let rate = g.mentions_per_concept_per_doc();
        assert!((rate - 0.87).abs() / 0.87 < 0.1, "{rate}");
        let len = g.mean_mention_length();
        assert!((len - 17.33).abs() / 17.33 < 0.1, "{len}");
    }
}
