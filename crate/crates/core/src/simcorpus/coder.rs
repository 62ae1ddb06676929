use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::GOLD_CODER;
use crate::corpus::{AnnotatedCorpus, Annotations, MentionSpan};
use crate::error::{Error, Result};
use crate::eval::pooled_kappa;
use crate::seed::{derive_seed, rng_for, unit_interval};

const DROP_TAG: u64 = 0x4452_4f50;
const EDGE_TAG: u64 = 0x4544_4745;
const SPAWN_TAG: u64 = 0x5350_574e;
const CONFUSION_TAG: u64 = 0x434f_4e46;
const SPAWN_TRIES: usize = 8;

/// Per-mention boundary movement in tokens. With probability `prob` a
/// mention moves by `floor(mean + spread·z + u)` tokens, `z` standard
/// normal and `u` uniform on [0, 1). A positive amount moves the start
/// leftwards, stopping at punctuation; a negative amount pulls the end in,
/// always keeping the first word.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeShift {
    pub prob: f64,
    pub mean: f64,
    pub spread: f64,
}

impl Default for EdgeShift {
    fn default() -> Self {
        Self { prob: 1.0, mean: 0.0, spread: 0.0 }
    }
}

/// Where added mentions go.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Random token positions.
    #[default]
    Random,
    /// Whole mentions of other concepts, chosen per (concept, head word), so
    /// the same confusions recur across the corpus.
    Confusion,
}

/// How a simulated coder departs from the source annotations.
///
/// Drops are systematic: whether a mention is dropped depends only on the
/// concept and the mention's first word, so a coder consistently skips the
/// same kinds of mention. Boundary shifts and randomly placed mentions are
/// drawn independently per mention and per document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoderProfile {
    pub mention_drop_prob: f64,
    /// Extra random mentions per concept per document.
    pub spurious_mention_rate: f64,
    pub boundary_shift: EdgeShift,
    /// Values above 1 add `(multiplier − 1)·n` random mentions to a layer
    /// holding `n` source mentions; values at or below 1 add none.
    pub mention_rate_multiplier: f64,
    pub placement: Placement,
    /// Mean length of randomly placed mentions; 0 copies the source mean.
    pub spawn_length: f64,
}

impl Default for CoderProfile {
    fn default() -> Self {
        Self::identity()
    }
}

impl CoderProfile {
    pub fn identity() -> Self {
        Self {
            mention_drop_prob: 0.0,
            spurious_mention_rate: 0.0,
            boundary_shift: EdgeShift::default(),
            mention_rate_multiplier: 1.0,
            placement: Placement::Random,
            spawn_length: 0.0,
        }
    }

    /// About 15.7% more mentions, each about 15.6% longer. Extra mentions
    /// are as long as the source ones.
    pub fn overannotator() -> Self {
        Self {
            mention_drop_prob: 0.0,
            spurious_mention_rate: 0.0,
            boundary_shift: EdgeShift { prob: 0.5, mean: 7.0, spread: 2.0 },
            mention_rate_multiplier: 1.157,
            placement: Placement::Random,
            spawn_length: 0.0,
        }
    }

    /// [`overannotator`](Self::overannotator) with short extra mentions
    /// (two tokens on average) scattered through the text.
    pub fn scattered_overannotator() -> Self {
        Self {
            spawn_length: 2.0,
            ..Self::overannotator()
        }
    }

    /// The mirror image of [`overannotator`](Self::overannotator): fewer and shorter mentions.
    pub fn underannotator() -> Self {
        Self {
            mention_drop_prob: 0.136,
            spurious_mention_rate: 0.0,
            boundary_shift: EdgeShift { prob: 0.5, mean: -7.0, spread: 2.0 },
            mention_rate_multiplier: 1.0,
            placement: Placement::Random,
            spawn_length: 0.0,
        }
    }

    /// Unbiased boundary noise only.
    pub fn jitter(spread: f64) -> Self {
        Self {
            boundary_shift: EdgeShift { prob: 1.0, mean: 0.0, spread },
            ..Self::identity()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "identity" => Some(Self::identity()),
            "over" | "overannotator" => Some(Self::overannotator()),
            "scattered" => Some(Self::scattered_overannotator()),
            "under" | "underannotator" => Some(Self::underannotator()),
            "jitter" => Some(Self::jitter(2.0)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mention_drop_prob) || !(0.0..=1.0).contains(&self.boundary_shift.prob) {
            return Err(Error::Config("probabilities must lie in [0, 1]".into()));
        }
        let finite = [
            self.spurious_mention_rate,
            self.boundary_shift.mean,
            self.boundary_shift.spread,
            self.mention_rate_multiplier,
            self.spawn_length,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("coder profile values must be finite".into()));
        }
        if self.spurious_mention_rate < 0.0 || self.boundary_shift.spread < 0.0 || self.mention_rate_multiplier < 0.0
            || self.spawn_length < 0.0
        {
            return Err(Error::Config("rates, spread, multiplier and spawn length must be >= 0".into()));
        }
        Ok(())
    }

    /// Scales every departure from the identity by `s` (drop probability capped at 1).
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            mention_drop_prob: (self.mention_drop_prob * s).min(1.0),
            spurious_mention_rate: self.spurious_mention_rate * s,
            boundary_shift: EdgeShift {
                prob: self.boundary_shift.prob,
                mean: self.boundary_shift.mean * s,
                spread: self.boundary_shift.spread * s,
            },
            mention_rate_multiplier: 1.0 + s * (self.mention_rate_multiplier - 1.0),
            placement: self.placement,
            spawn_length: self.spawn_length,
        }
    }
}

/// Whether the separator before token `tok` is plain whitespace.
fn open_break(doc: &crate::corpus::Document, tok: usize) -> bool {
    tok > 0 && doc.tunits()[2 * tok - 1].text.chars().all(char::is_whitespace)
}

fn word_key(word: &str) -> u64 {
    word.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn shift_amount(rng: &mut impl Rng, shift: EdgeShift) -> i64 {
    let gate: f64 = rng.random();
    let z: f64 = StandardNormal.sample(rng);
    let u: f64 = rng.random();
    if gate >= shift.prob {
        return 0;
    }
    (shift.mean + shift.spread * z + u).floor() as i64
}

/// Derived annotations from the [`GOLD_CODER`] layer.
pub fn apply_coder(corpus: &AnnotatedCorpus, profile: &CoderProfile, seed: u64) -> Result<Annotations> {
    apply_coder_to(corpus, GOLD_CODER, profile, seed)
}

/// Derived annotations from any coder's layer. Documents the source did
/// not annotate stay unannotated.
pub fn apply_coder_to(corpus: &AnnotatedCorpus, source: &str, profile: &CoderProfile, seed: u64) -> Result<Annotations> {
    profile.validate()?;
    let src = corpus.coder(source)?;
    let docs = corpus.documents();
    let (mut len_sum, mut count) = (0usize, 0usize);
    for d in 0..docs.len() {
        for spans in src.doc(d).into_iter().flatten() {
            len_sum += spans.iter().map(MentionSpan::token_len).sum::<usize>();
            count += spans.len();
        }
    }
    let spawn_len_mean = if profile.spawn_length > 0.0 {
        profile.spawn_length
    } else if count == 0 {
        1.0
    } else {
        len_sum as f64 / count as f64
    };
    let extra_per_mention = (profile.mention_rate_multiplier - 1.0).max(0.0);
    let n_concepts = corpus.concepts().len();
    let mut per_concept = vec![0usize; n_concepts];
    for d in 0..docs.len() {
        for (c, spans) in src.doc(d).into_iter().flatten().enumerate() {
            per_concept[c] += spans.len();
        }
    }
    // Chance that a mention of another concept is also claimed for concept c.
    let confusion: Vec<f64> = per_concept
        .iter()
        .map(|&own| {
            let others = count - own;
            if others == 0 { 0.0 } else { extra_per_mention * own as f64 / others as f64 }
        })
        .collect();

    let mut out = Annotations::new(docs.len());
    for (d, doc) in docs.iter().enumerate() {
        let Some(layers) = src.doc(d) else { continue };
        let n_tok = doc.token_count();
        let tokens: Vec<&str> = doc.tokens().map(|t| t.text.as_str()).collect();
        let mut derived = Vec::with_capacity(layers.len());
        for (c, spans) in layers.iter().enumerate() {
            let mut tok_spans: Vec<(usize, usize)> = spans
                .iter()
                .filter(|s| {
                    let head = word_key(tokens[s.start / 2]);
                    unit_interval(derive_seed(seed, &[DROP_TAG, c as u64, head])) >= profile.mention_drop_prob
                })
                .map(|s| (s.start / 2, s.end / 2))
                .collect();

            let mut random_extra = profile.spurious_mention_rate;
            match profile.placement {
                Placement::Random => random_extra += extra_per_mention * spans.len() as f64,
                Placement::Confusion => {
                    let claimed = layers
                        .iter()
                        .enumerate()
                        .filter(|&(o, _)| o != c)
                        .flat_map(|(_, sp)| sp.iter().map(|s| (s.start / 2, s.end / 2)))
                        .filter(|&(start, _)| {
                            let head = word_key(tokens[start]);
                            unit_interval(derive_seed(seed, &[CONFUSION_TAG, c as u64, head])) < confusion[c]
                        });
                    for (start, end) in claimed {
                        if tok_spans.iter().all(|&(a, b)| end < a || start > b) {
                            let at = tok_spans.partition_point(|&(a, _)| a < start);
                            tok_spans.insert(at, (start, end));
                        }
                    }
                }
            }
            let mut rng = rng_for(seed, &[SPAWN_TAG, d as u64, c as u64]);
            let extra = (random_extra + rng.random::<f64>()).floor() as usize;
            for k in 0..extra {
                let mut rng = rng_for(seed, &[SPAWN_TAG, d as u64, c as u64, k as u64 + 1]);
                let len = (1 + Poisson::new(spawn_len_mean.max(1.0 + 1e-9) - 1.0)
                    .map(|p| p.sample(&mut rng) as usize)
                    .unwrap_or(0))
                .min(n_tok);
                for _ in 0..SPAWN_TRIES {
                    let start = rng.random_range(0..=n_tok - len);
                    let end = start + len - 1;
                    if tok_spans.iter().all(|&(a, b)| end < a || start > b) {
                        let at = tok_spans.partition_point(|&(a, _)| a < start);
                        tok_spans.insert(at, (start, end));
                        break;
                    }
                }
            }

            let mut shifted: Vec<MentionSpan> = Vec::with_capacity(tok_spans.len());
            let mut prev_end: Option<usize> = None;
            for &(start, end) in &tok_spans {
                let mut rng = rng_for(seed, &[EDGE_TAG, d as u64, c as u64, start as u64]);
                let amount = shift_amount(&mut rng, profile.boundary_shift);
                let (mut s, mut e) = (start, end);
                if amount > 0 {
                    let floor = prev_end.map_or(0, |p| p + 1);
                    for _ in 0..amount {
                        if s == floor || !open_break(doc, s) {
                            break;
                        }
                        s -= 1;
                    }
                } else {
                    e = end.saturating_sub(amount.unsigned_abs() as usize).max(start);
                }
                shifted.push(MentionSpan::new(2 * s, 2 * e));
                prev_end = Some(e);
            }
            derived.push(shifted);
        }
        out.set_doc(d, derived);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub target: f64,
    pub tolerance: f64,
    pub max_steps: usize,
    /// Upper end of the searched noise scale.
    pub max_scale: f64,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            target: 0.742,
            tolerance: 0.005,
            max_steps: 20,
            max_scale: 32.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub profile: CoderProfile,
    pub scale: f64,
    pub kappa: f64,
    /// Bisection midpoints evaluated.
    pub steps: usize,
    /// Every evaluated (scale, kappa) pair in order.
    pub history: Vec<(f64, f64)>,
}

/// Bisection on the noise scale of `family` until the pooled kappa between
/// the gold coder and the derived coder is within `tolerance` of the
/// target. Returns the best point seen.
pub fn calibrate_to_kappa(corpus: &AnnotatedCorpus, family: &CoderProfile, config: &CalibrationConfig) -> Result<Calibration> {
    if !(config.target > 0.0 && config.target <= 1.0) {
        return Err(Error::Calibration(format!("target kappa {} is outside (0, 1]", config.target)));
    }
    if !(config.tolerance > 0.0) || !(config.max_scale > 0.0) {
        return Err(Error::Calibration("tolerance and max_scale must be > 0".into()));
    }
    family.validate()?;
    let gold = corpus.coder(GOLD_CODER)?;
    let docs: Vec<usize> = (0..corpus.documents().len()).filter(|&d| gold.has_doc(d)).collect();
    let n_concepts = corpus.concepts().len();
    let kappa_at = |s: f64| -> Result<f64> {
        let derived = apply_coder(corpus, &family.scaled(s), config.seed)?;
        Ok(pooled_kappa(gold, &derived, corpus.documents(), &docs, n_concepts)?.pooled.kappa)
    };

    let mut history = vec![(0.0, kappa_at(0.0)?)];
    let finish = |history: Vec<(f64, f64)>, steps: usize| {
        let &(scale, kappa) = history
            .iter()
            .min_by(|a, b| (a.1 - config.target).abs().total_cmp(&(b.1 - config.target).abs()))
            .expect("non-empty");
        Calibration {
            profile: family.scaled(scale),
            scale,
            kappa,
            steps,
            history,
        }
    };
    if (history[0].1 - config.target).abs() <= config.tolerance {
        return Ok(finish(history, 0));
    }
    let k_hi = kappa_at(config.max_scale)?;
    history.push((config.max_scale, k_hi));
    if (k_hi - config.target).abs() <= config.tolerance {
        return Ok(finish(history, 0));
    }
    if k_hi > config.target {
        return Err(Error::Calibration(format!(
            "target {} unreachable: kappa spans [{k_hi:.4}, {:.4}] over scales [0, {}]",
            config.target, history[0].1, config.max_scale
        )));
    }
    let (mut lo, mut hi) = (0.0, config.max_scale);
    for step in 1..=config.max_steps {
        let mid = 0.5 * (lo + hi);
        let k = kappa_at(mid)?;
        history.push((mid, k));
        if (k - config.target).abs() <= config.tolerance {
            return Ok(finish(history, step));
        }
        if k > config.target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let best = finish(history, config.max_steps);
    Err(Error::Calibration(format!(
        "no scale within tolerance after {} steps; best kappa {:.4} at scale {:.4}",
        config.max_steps, best.kappa, best.scale
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcorpus::{generate_corpus, GenConfig};

    fn corpus() -> AnnotatedCorpus {
        generate_corpus(&GenConfig { docs: 30, seed: 2, ..GenConfig::default() }).unwrap()
    }

    #[test]
    fn identity_reproduces_source() {
        let c = corpus();
        assert_eq!(&apply_coder(&c, &CoderProfile::identity(), 9).unwrap(), c.coder(GOLD_CODER).unwrap());
        for p in [CoderProfile::overannotator(), CoderProfile::underannotator()] {
            assert_eq!(&apply_coder(&c, &p.scaled(0.0), 9).unwrap(), c.coder(GOLD_CODER).unwrap());
        }
    }

    #[test]
    fn derived_annotations_are_valid() {
        let c = corpus();
        for p in [CoderProfile::overannotator().scaled(3.0), CoderProfile::underannotator().scaled(3.0), CoderProfile::jitter(4.0)] {
            let ann = apply_coder(&c, &p, 1).unwrap();
            c.clone().with_coder("x", ann).unwrap();
        }
    }

    #[test]
    fn full_drop_empties_layers() {
        let c = corpus();
        let p = CoderProfile { mention_drop_prob: 1.0, ..CoderProfile::identity() };
        let ann = apply_coder(&c, &p, 0).unwrap();
        assert!((0..30).all(|d| ann.doc(d).unwrap().iter().all(Vec::is_empty)));
    }

    #[test]
    fn drops_follow_head_words() {
        let c = corpus();
        let p = CoderProfile { mention_drop_prob: 0.5, ..CoderProfile::identity() };
        let ann = apply_coder(&c, &p, 4).unwrap();
        let gold = c.coder(GOLD_CODER).unwrap();
        let mut fate = std::collections::HashMap::new();
        for (d, doc) in c.documents().iter().enumerate() {
            let tokens: Vec<&str> = doc.tokens().map(|t| t.text.as_str()).collect();
            for (k, spans) in gold.doc(d).unwrap().iter().enumerate() {
                for s in spans {
                    let kept = ann.spans(d, k).unwrap().contains(s);
                    let prev = fate.insert((k, tokens[s.start / 2]), kept);
                    assert!(prev.is_none_or(|p| p == kept));
                }
            }
        }
    }

    fn mention_totals(c: &AnnotatedCorpus, ann: &Annotations) -> (f64, f64) {
        let (mut n, mut t) = (0usize, 0usize);
        for d in 0..c.documents().len() {
            for spans in ann.doc(d).unwrap() {
                n += spans.len();
                t += spans.iter().map(MentionSpan::token_len).sum::<usize>();
            }
        }
        (n as f64, t as f64 / n as f64)
    }

    #[test]
    fn overannotator_rates() {
        let c = generate_corpus(&GenConfig { docs: 300, seed: 5, ..GenConfig::default() }).unwrap();
        let (gn, gl) = mention_totals(&c, c.coder(GOLD_CODER).unwrap());
        let (n, l) = mention_totals(&c, &apply_coder(&c, &CoderProfile::overannotator(), 5).unwrap());
        assert!((n / gn / 1.157 - 1.0).abs() < 0.03, "mentions x{}", n / gn);
        assert!((l / gl / 1.156 - 1.0).abs() < 0.03, "length x{}", l / gl);
    }

    #[test]
    fn confusions_copy_other_concepts() {
        let c = corpus();
        let p = CoderProfile { mention_rate_multiplier: 1.5, placement: Placement::Confusion, ..CoderProfile::identity() };
        let ann = apply_coder(&c, &p, 3).unwrap();
        let gold = c.coder(GOLD_CODER).unwrap();
        let mut extra = 0;
        for d in 0..30 {
            for k in 0..c.concepts().len() {
                for s in ann.spans(d, k).unwrap() {
                    if !gold.spans(d, k).unwrap().contains(s) {
                        extra += 1;
                        assert!((0..c.concepts().len()).any(|o| o != k && gold.spans(d, o).unwrap().contains(s)));
                    }
                }
            }
        }
        assert!(extra > 0);
    }

    #[test]
    fn extensions_stop_at_punctuation() {
        let c = corpus();
        let p = CoderProfile { boundary_shift: EdgeShift { prob: 1.0, mean: 50.0, spread: 0.0 }, ..CoderProfile::identity() };
        let ann = apply_coder(&c, &p, 0).unwrap();
        for (d, doc) in c.documents().iter().enumerate() {
            for k in 0..c.concepts().len() {
                for s in ann.spans(d, k).unwrap() {
                    assert!(doc.tunits()[s.start..=s.end].iter().all(|u| u.text.trim().is_empty() || !u.text.contains([',', '.'])));
                }
            }
        }
    }

    #[test]
    fn calibration_targets() {
        let c = corpus();
        let one = calibrate_to_kappa(&c, &CoderProfile::overannotator(), &CalibrationConfig { target: 1.0, ..Default::default() }).unwrap();
        assert_eq!(one.scale, 0.0);
        let cal = calibrate_to_kappa(&c, &CoderProfile::underannotator(), &CalibrationConfig::default()).unwrap();
        assert!((cal.kappa - 0.742).abs() <= 0.005);
        assert!(cal.steps <= 20);
        assert!(calibrate_to_kappa(&c, &CoderProfile::identity(), &CalibrationConfig::default()).is_err());
    }
}
