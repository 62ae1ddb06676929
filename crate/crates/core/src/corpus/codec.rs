//! Conversions between mention spans, per-t-unit labels and IOB tags.

use super::{check_spans, Document, Iob, IobSequence, LabelSequence, MentionSpan};
use crate::error::{Error, Result};

/// Labels every t-unit covered by a span, interior separators included.
pub fn mentions_to_labels(doc: &Document, spans: &[MentionSpan]) -> Result<LabelSequence> {
    check_spans(doc, spans).map_err(Error::Labels)?;
    let mut labels = vec![false; doc.len()];
    for s in spans {
        labels[s.start..=s.end].fill(true);
    }
    Ok(LabelSequence(labels))
}

/// Maximal labelled runs become spans. Runs must start and end on tokens.
pub fn labels_to_mentions(seq: &LabelSequence, doc: &Document) -> Result<Vec<MentionSpan>> {
    if seq.len() != doc.len() {
        return Err(Error::LengthMismatch {
            left: seq.len(),
            right: doc.len(),
        });
    }
    let labels = &seq.0;
    let mut spans = Vec::new();
    let mut t = 0;
    while t < labels.len() {
        if !labels[t] {
            t += 1;
            continue;
        }
        let start = t;
        while t + 1 < labels.len() && labels[t + 1] {
            t += 1;
        }
        let end = t;
        if start % 2 != 0 || end % 2 != 0 {
            return Err(Error::Labels(format!(
                "labelled run {start}..={end} starts or ends on a separator"
            )));
        }
        spans.push(MentionSpan { start, end });
        t += 1;
    }
    Ok(spans)
}

/// Token-level IOB tags: a labelled token is `I` when the separator before it
/// is labelled, `B` otherwise.
pub fn to_iob(seq: &LabelSequence) -> Result<IobSequence> {
    let labels = &seq.0;
    if labels.len() % 2 == 0 {
        return Err(Error::Labels(format!(
            "length {} is not a valid t-unit count",
            labels.len()
        )));
    }
    for t in (1..labels.len()).step_by(2) {
        if labels[t] && !(labels[t - 1] && labels[t + 1]) {
            return Err(Error::Labels(format!(
                "separator {t} is labelled but a neighbour is not"
            )));
        }
    }
    let tags = (0..labels.len())
        .step_by(2)
        .map(|t| match (labels[t], t > 0 && labels[t - 1]) {
            (false, _) => Iob::O,
            (true, true) => Iob::I,
            (true, false) => Iob::B,
        })
        .collect();
    Ok(IobSequence(tags))
}

/// Inverse of [`to_iob`]: a separator is labelled iff the token after it is `I`.
pub fn from_iob(tags: &IobSequence, doc: &Document) -> Result<LabelSequence> {
    tags.validate()?;
    if tags.len() != doc.token_count() {
        return Err(Error::LengthMismatch {
            left: tags.len(),
            right: doc.token_count(),
        });
    }
    let mut labels = vec![false; doc.len()];
    for (k, &tag) in tags.0.iter().enumerate() {
        let t = 2 * k;
        labels[t] = tag != Iob::O;
        if tag == Iob::I {
            labels[t - 1] = true;
        }
    }
    Ok(LabelSequence(labels))
}

/// IOB tags straight from spans.
pub fn spans_to_iob(doc: &Document, spans: &[MentionSpan]) -> Result<IobSequence> {
    to_iob(&mentions_to_labels(doc, spans)?)
}
