use super::{Weights, N_LABELS};
use crate::corpus::{Iob, IobSequence};
use crate::features::TokenFeatureVector;
use crate::scalar::Scalar;

const I: usize = 1;
const O: usize = 2;

fn allowed(prev: Option<usize>, next: usize) -> bool {
    match prev {
        None => next != I,
        Some(p) => !(p == O && next == I),
    }
}

/// Highest-scoring IOB sequence that never starts with `I` and never has
/// `I` right after `O`.
///
/// Ties are resolved toward the later label in the order B < I < O (so an
/// all-zero model yields all-O), both for backpointers and for the final tag.
pub fn viterbi_decode<F: Scalar>(weights: &Weights<F>, features: &[TokenFeatureVector]) -> IobSequence {
    let len = features.len();
    if len == 0 {
        return IobSequence(Vec::new());
    }
    let emissions = weights.emission_scores(features);

    let mut delta = vec![[F::neg_infinity(); N_LABELS]; len];
    let mut reachable = vec![[false; N_LABELS]; len];
    let mut back = vec![[0usize; N_LABELS]; len];
    for y in 0..N_LABELS {
        if allowed(None, y) {
            delta[0][y] = emissions[0][y];
            reachable[0][y] = true;
        }
    }
    for t in 1..len {
        for b in 0..N_LABELS {
            let mut best: Option<(F, usize)> = None;
            for a in 0..N_LABELS {
                if !reachable[t - 1][a] || !allowed(Some(a), b) {
                    continue;
                }
                let s = delta[t - 1][a] + weights.transition(a, b);
                if best.is_none_or(|(v, _)| s >= v) {
                    best = Some((s, a));
                }
            }
            if let Some((s, a)) = best {
                delta[t][b] = s + emissions[t][b];
                reachable[t][b] = true;
                back[t][b] = a;
            }
        }
    }

    let mut last = O;
    let mut best = None;
    for y in 0..N_LABELS {
        if reachable[len - 1][y] && best.is_none_or(|v| delta[len - 1][y] >= v) {
            best = Some(delta[len - 1][y]);
            last = y;
        }
    }
    let mut tags = vec![Iob::O; len];
    let mut y = last;
    for t in (0..len).rev() {
        tags[t] = Iob::from_index(y);
        if t > 0 {
            y = back[t][y];
        }
    }
    IobSequence(tags)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(n: usize) -> Vec<TokenFeatureVector> {
        (0..n).map(|i| TokenFeatureVector(vec![i as u32])).collect()
    }

    #[test]
    fn zero_model_decodes_all_outside() {
        let w = Weights::<f64>::zeros(5);
        assert_eq!(viterbi_decode(&w, &feats(5)).0, vec![Iob::O; 5]);
    }

    #[test]
    fn infinitely_strong_begin_yields_one_single_token_mention() {
        let mut w = Weights::<f64>::zeros(6);
        *w.emission_mut(3, Iob::B.index()) = f64::INFINITY;
        let tags = viterbi_decode(&w, &feats(6)).0;
        let mut want = vec![Iob::O; 6];
        want[3] = Iob::B;
        assert_eq!(tags, want);
    }

    #[test]
    fn inside_is_never_decoded_after_outside() {
        let mut w = Weights::<f64>::zeros(3);
        for f in 0..3 {
            *w.emission_mut(f, Iob::I.index()) = 5.0;
        }
        let tags = viterbi_decode(&w, &feats(3));
        tags.validate().unwrap();
        assert_eq!(tags.0, vec![Iob::B, Iob::I, Iob::I]);
    }

    #[test]
    fn empty_input() {
        let w = Weights::<f32>::zeros(1);
        assert!(viterbi_decode(&w, &[]).is_empty());
    }
}
