//! Brute-force oracles and random instance builders shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use annoqual::corpus::{
    from_iob, labels_to_mentions, mentions_to_labels, spans_to_iob, to_iob, AnnotatedCorpus, Annotations, ConceptSet,
    Document, Iob, IobSequence, LabelSequence, MentionSpan, TUnit,
};
use annoqual::features::TokenFeatureVector;
use annoqual::learners::{forward_backward, nll_gradient, sequence_score, viterbi_decode, Instance, Weights, N_LABELS};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random sparse model over `n_features` features with weights in `[-scale, scale]`.
pub fn random_weights(rng: &mut impl Rng, n_features: usize, scale: f64) -> Weights<f64> {
    let n = n_features * N_LABELS + N_LABELS * N_LABELS;
    Weights::from_params(n_features, (0..n).map(|_| rng.random_range(-scale..=scale)).collect())
}

pub fn random_features(rng: &mut impl Rng, len: usize, n_features: usize) -> Vec<TokenFeatureVector> {
    (0..len)
        .map(|_| {
            let k = rng.random_range(1..=n_features.min(4));
            let mut ids: Vec<u32> = (0..n_features as u32).collect();
            ids.shuffle(rng);
            ids.truncate(k);
            ids.sort_unstable();
            TokenFeatureVector(ids)
        })
        .collect()
}

pub fn random_tags(rng: &mut impl Rng, len: usize) -> Vec<Iob> {
    let mut tags = Vec::with_capacity(len);
    for i in 0..len {
        let prev = if i == 0 { Iob::O } else { tags[i - 1] };
        let tag = loop {
            let t = Iob::from_index(rng.random_range(0..3));
            if !(t == Iob::I && prev == Iob::O) {
                break t;
            }
        };
        tags.push(tag);
    }
    tags
}

/// Every label-index sequence of length `len` (3^len of them).
pub fn all_sequences(len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..N_LABELS).map(move |y| {
                    let mut s = s.clone();
                    s.push(y);
                    s
                })
            })
            .collect();
    }
    out
}

pub fn is_valid(seq: &[usize]) -> bool {
    let (i, o) = (Iob::I.index(), Iob::O.index());
    seq.iter()
        .enumerate()
        .all(|(t, &y)| !(y == i && (t == 0 || seq[t - 1] == o)))
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn brute_log_z(w: &Weights<f64>, feats: &[TokenFeatureVector]) -> f64 {
    let em = w.emission_scores(feats);
    let scores: Vec<f64> = all_sequences(feats.len()).iter().map(|s| sequence_score(w, &em, s)).collect();
    log_sum_exp(&scores)
}

/// Node and edge posteriors by summing over every sequence.
pub fn brute_marginals(w: &Weights<f64>, feats: &[TokenFeatureVector]) -> (Vec<[f64; 3]>, Vec<[[f64; 3]; 3]>) {
    let em = w.emission_scores(feats);
    let log_z = brute_log_z(w, feats);
    let len = feats.len();
    let mut node = vec![[0.0; 3]; len];
    let mut edge = vec![[[0.0; 3]; 3]; len.saturating_sub(1)];
    for s in all_sequences(len) {
        let p = (sequence_score(w, &em, &s) - log_z).exp();
        for t in 0..len {
            node[t][s[t]] += p;
            if t + 1 < len {
                edge[t][s[t]][s[t + 1]] += p;
            }
        }
    }
    (node, edge)
}

/// Highest-scoring valid sequence; `None` on an exact tie for the top.
pub fn brute_viterbi(w: &Weights<f64>, feats: &[TokenFeatureVector]) -> Option<Vec<Iob>> {
    let em = w.emission_scores(feats);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut tied = false;
    for s in all_sequences(feats.len()).into_iter().filter(|s| is_valid(s)) {
        let sc = sequence_score(w, &em, &s);
        match &best {
            Some((b, _)) if sc < *b => {}
            Some((b, _)) if sc == *b => tied = true,
            _ => {
                tied = false;
                best = Some((sc, s));
            }
        }
    }
    if tied {
        return None;
    }
    best.map(|(_, s)| s.into_iter().map(Iob::from_index).collect())
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Largest relative disagreement between forward-backward and enumeration
/// (log Z and every node and edge marginal).
pub fn inference_error(w: &Weights<f64>, feats: &[TokenFeatureVector]) -> (f64, f64) {
    let m = forward_backward(w, feats);
    let z_err = rel_err(m.log_z, brute_log_z(w, feats));
    let (node, edge) = brute_marginals(w, feats);
    let mut marg_err: f64 = 0.0;
    for t in 0..feats.len() {
        for a in 0..3 {
            marg_err = marg_err.max((m.node[t][a] - node[t][a]).abs());
            if t + 1 < feats.len() {
                for b in 0..3 {
                    marg_err = marg_err.max((m.edge[t][a][b] - edge[t][a][b]).abs());
                }
            }
        }
    }
    (z_err, marg_err)
}

/// Viterbi against enumeration; ties count as agreement when both score equal.
pub fn viterbi_matches(w: &Weights<f64>, feats: &[TokenFeatureVector]) -> bool {
    let got = viterbi_decode(w, feats);
    match brute_viterbi(w, feats) {
        Some(want) => got.0 == want,
        None => {
            let em = w.emission_scores(feats);
            let idx = |s: &[Iob]| s.iter().map(|t| t.index()).collect::<Vec<_>>();
            let best = all_sequences(feats.len())
                .into_iter()
                .filter(|s| is_valid(s))
                .map(|s| sequence_score(w, &em, &s))
                .fold(f64::NEG_INFINITY, f64::max);
            got.validate().is_ok() && sequence_score(w, &em, &idx(&got.0)) == best
        }
    }
}

/// Relative error (in the 2-norm) between the analytic NLL gradient and
/// central differences with step `h`.
pub fn gradient_error(w: &Weights<f64>, feats: &[TokenFeatureVector], tags: &[Iob], sigma: f64, h: f64) -> f64 {
    let inst = [Instance { features: feats, tags }];
    let (_, grad) = nll_gradient(w, &inst, sigma).unwrap();
    let mut diff = 0.0;
    let mut norm: f64 = 0.0;
    let mut fd_norm: f64 = 0.0;
    for k in 0..grad.len() {
        let mut p = w.params().to_vec();
        p[k] += h;
        let up = nll_gradient(&Weights::from_params(w.n_features(), p.clone()), &inst, sigma).unwrap().0;
        p[k] -= 2.0 * h;
        let down = nll_gradient(&Weights::from_params(w.n_features(), p), &inst, sigma).unwrap().0;
        let fd = (up - down) / (2.0 * h);
        diff += (grad[k] - fd).powi(2);
        norm += grad[k].powi(2);
        fd_norm += fd.powi(2);
    }
    diff.sqrt() / norm.sqrt().max(fd_norm.sqrt()).max(f64::MIN_POSITIVE)
}

/// A document of `n_tokens` tokens with a random mix of separators.
pub fn random_document(rng: &mut impl Rng, id: &str, n_tokens: usize) -> Document {
    const WORDS: [&str; 6] = ["alpha", "Beta", "gamma1", "d", "ε", "x-y"];
    const SEPS: [&str; 4] = [" ", ", ", "/", "\n"];
    let mut units = Vec::with_capacity(2 * n_tokens - 1);
    for i in 0..n_tokens {
        if i > 0 {
            units.push(TUnit::separator(SEPS[rng.random_range(0..SEPS.len())]));
        }
        units.push(TUnit::token(WORDS[rng.random_range(0..WORDS.len())]));
    }
    Document::new(id, units).unwrap()
}

/// Random valid IOB tags decoded to spans.
pub fn random_spans(rng: &mut impl Rng, doc: &Document) -> Vec<MentionSpan> {
    let tags = IobSequence(random_tags(rng, doc.token_count()));
    labels_to_mentions(&from_iob(&tags, doc).unwrap(), doc).unwrap()
}

pub fn random_corpus(rng: &mut impl Rng, n_docs: usize, n_concepts: usize, coders: &[&str]) -> AnnotatedCorpus {
    let concepts = ConceptSet::new((0..n_concepts).map(|c| format!("K{c}"))).unwrap();
    let docs: Vec<Document> = (0..n_docs)
        .map(|d| {
            let len = rng.random_range(1..=12);
            random_document(rng, &format!("d{d}"), len)
        })
        .collect();
    let mut anns = BTreeMap::new();
    for coder in coders {
        let mut a = Annotations::new(n_docs);
        for (d, doc) in docs.iter().enumerate() {
            // The file format names coders per document, so each coder needs one.
            if d == 0 || rng.random_bool(0.8) {
                a.set_doc(d, (0..n_concepts).map(|_| random_spans(rng, doc)).collect());
            }
        }
        anns.insert(coder.to_string(), a);
    }
    AnnotatedCorpus::new(concepts, docs, anns).unwrap()
}

/// Mentions read directly off the tags: `B` opens a span, `I` extends it.
pub fn brute_runs(tags: &[Iob]) -> Vec<MentionSpan> {
    let mut out: Vec<MentionSpan> = Vec::new();
    for (k, &t) in tags.iter().enumerate() {
        match t {
            Iob::B => out.push(MentionSpan::new(2 * k, 2 * k)),
            Iob::I => out.last_mut().unwrap().end = 2 * k,
            Iob::O => {}
        }
    }
    out
}

/// Checks every codec path on one document and tag sequence.
pub fn codec_round_trip(doc: &Document, tags: &IobSequence) -> Result<(), String> {
    let labels = from_iob(tags, doc).map_err(|e| e.to_string())?;
    let back = to_iob(&labels).map_err(|e| e.to_string())?;
    if &back != tags {
        return Err(format!("IOB -> labels -> IOB changed {:?} into {:?}", tags.0, back.0));
    }
    let spans = labels_to_mentions(&labels, doc).map_err(|e| e.to_string())?;
    if spans != brute_runs(&tags.0) {
        return Err(format!("mentions {:?} differ from runs of {:?}", spans, tags.0));
    }
    if mentions_to_labels(doc, &spans).map_err(|e| e.to_string())? != labels {
        return Err("mentions -> labels is not the inverse".into());
    }
    if &spans_to_iob(doc, &spans).map_err(|e| e.to_string())? != tags {
        return Err("spans -> IOB is not the inverse".into());
    }
    Ok(())
}

/// Every valid IOB sequence and every consistent label sequence for
/// documents of 1..=`max_tokens` tokens; returns the number of cases.
pub fn exhaustive_codec(max_tokens: usize) -> Result<usize, String> {
    let mut cases = 0;
    for n in 1..=max_tokens {
        let doc = Document::from_tokens("d", &vec!["w"; n]).unwrap();
        let valid: Vec<IobSequence> = all_sequences(n)
            .into_iter()
            .filter(|s| is_valid(s))
            .map(|s| IobSequence(s.into_iter().map(Iob::from_index).collect()))
            .collect();
        for tags in &valid {
            codec_round_trip(&doc, tags)?;
            cases += 1;
        }
        // Label sequences whose labelled separators sit between labelled
        // tokens are in bijection with valid IOB sequences.
        let units = 2 * n - 1;
        let mut consistent = 0;
        for bits in 0u32..(1 << units) {
            let labels = LabelSequence((0..units).map(|t| bits >> t & 1 == 1).collect());
            let ok = (1..units).step_by(2).all(|t| !labels.0[t] || (labels.0[t - 1] && labels.0[t + 1]));
            match (ok, to_iob(&labels)) {
                (true, Ok(tags)) => {
                    consistent += 1;
                    if from_iob(&tags, &doc).map_err(|e| e.to_string())? != labels {
                        return Err(format!("labels {:?} do not survive IOB", labels.0));
                    }
                }
                (false, Err(_)) => {}
                (true, Err(e)) => return Err(format!("valid labels rejected: {e}")),
                (false, Ok(_)) => return Err(format!("invalid labels {:?} accepted", labels.0)),
            }
            cases += 1;
        }
        if consistent != valid.len() {
            return Err(format!("{consistent} label sequences vs {} IOB sequences for n = {n}", valid.len()));
        }
    }
    Ok(cases)
}

type Q = num_rational::Ratio<i128>;

fn q(n: i128, d: i128) -> Q {
    Q::new(n, d)
}

/// Exact hand-computed F1, micro/macro and kappa values; returns the number
/// of checks made.
pub fn metric_suite() -> Result<usize, String> {
    use annoqual::eval::{cohen_kappa, f1, micro_macro, precision, recall, ContingencyTable as T};
    let mut n = 0;
    let mut check = |what: &str, got: Q, want: Q| {
        n += 1;
        if got == want {
            Ok(())
        } else {
            Err(format!("{what}: got {got}, want {want}"))
        }
    };
    let f1_cases = [
        (T::new(0, 0, 0, 9), q(1, 1)),
        (T::new(0, 0, 0, 0), q(1, 1)),
        (T::new(0, 3, 0, 1), q(0, 1)),
        (T::new(0, 0, 4, 1), q(0, 1)),
        (T::new(1, 0, 1, 2), q(2, 3)),
        (T::new(3, 1, 2, 0), q(6, 9)),
        (T::new(40, 10, 10, 40), q(4, 5)),
    ];
    for (t, want) in f1_cases {
        check(&format!("f1 {t:?}"), f1::<Q>(&t), want)?;
    }
    check("precision 3/4", precision::<Q>(&T::new(3, 1, 2, 0)), q(3, 4))?;
    check("recall 3/5", recall::<Q>(&T::new(3, 1, 2, 0)), q(3, 5))?;

    let names = vec!["A".to_string(), "B".to_string()];
    let r = micro_macro::<Q>(&names, &[T::new(100, 0, 0, 0), T::new(0, 50, 50, 0)]).map_err(|e| e.to_string())?;
    check("macro f1", r.macro_.f1, q(1, 2))?;
    check("micro f1", r.micro.f1, q(2, 3))?;
    let one = micro_macro::<Q>(&names[..1], &[T::new(3, 1, 2, 5)]).map_err(|e| e.to_string())?;
    check("single concept micro = macro", one.micro.f1, one.macro_.f1)?;

    let k = cohen_kappa::<Q>(&T::new(40, 10, 10, 40)).map_err(|e| e.to_string())?;
    check("kappa P_A", k.p_a, q(4, 5))?;
    check("kappa P_E", k.p_e, q(1, 2))?;
    check("kappa", k.kappa, q(3, 5))?;
    let k = cohen_kappa::<Q>(&T::new(20, 5, 10, 15)).map_err(|e| e.to_string())?;
    // P_A = 35/50, P_E = (25*30 + 25*20) / 2500 = 1/2
    check("kappa second table", k.kappa, q(2, 5))?;
    check("kappa all agree", cohen_kappa::<Q>(&T::new(0, 0, 0, 7)).map_err(|e| e.to_string())?.kappa, q(1, 1))?;
    // One rater always positive, the other always negative: no agreement beyond chance.
    check("kappa constant raters", cohen_kappa::<Q>(&T::new(0, 3, 0, 0)).map_err(|e| e.to_string())?.kappa, q(0, 1))?;
    Ok(n)
}

/// Kappa of two independent Bernoulli(`p`) raters over `n` items.
pub fn independent_kappa(n: usize, p: f64, seed: u64) -> f64 {
    use annoqual::eval::{cohen_kappa, ContingencyTable};
    let mut r = rng(seed);
    let mut t = ContingencyTable::default();
    for _ in 0..n {
        match (r.random_bool(p), r.random_bool(p)) {
            (true, true) => t.tp += 1,
            (true, false) => t.fp += 1,
            (false, true) => t.fn_ += 1,
            (false, false) => t.tn += 1,
        }
    }
    cohen_kappa::<f64>(&t).unwrap().kappa
}

/// Codec round trips and a serialize/parse round trip on `count` random corpora.
pub fn random_corpus_round_trips(count: usize, seed: u64) -> Result<usize, String> {
    use annoqual::corpus::{parse_corpus, serialize_corpus};
    let mut r = rng(seed);
    let mut checks = 0;
    for i in 0..count {
        let n_docs = r.random_range(1..=4);
        let n_concepts = r.random_range(1..=3);
        let corpus = random_corpus(&mut r, n_docs, n_concepts, &["a", "b"]);
        for coder in ["a", "b"] {
            let ann = corpus.coder(coder).unwrap();
            for (d, doc) in corpus.documents().iter().enumerate() {
                for c in 0..n_concepts {
                    let Some(spans) = ann.spans(d, c) else { continue };
                    let tags = spans_to_iob(doc, spans).map_err(|e| format!("corpus {i}: {e}"))?;
                    codec_round_trip(doc, &tags).map_err(|e| format!("corpus {i}: {e}"))?;
                    checks += 1;
                }
            }
        }
        let bytes = serialize_corpus(&corpus).map_err(|e| e.to_string())?;
        let back = parse_corpus(&bytes).map_err(|e| format!("corpus {i}: {e}"))?;
        if back != corpus {
            return Err(format!("corpus {i} changed through serialization:\n{corpus:?}\n{back:?}"));
        }
        checks += 1;
    }
    Ok(checks)
}
