//! Binary per-token features and the string-to-id index.
//!
//! Each token fires: its word, its stem, its POS tag (when supplied in the
//! corpus), prefixes and suffixes of 1..=4 characters, a capitalization
//! shape and four positional buckets (halves, thirds, quarters, fifths of
//! the document by token position).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;

/// Id every unseen feature maps to once the index is frozen.
pub const UNK: u32 = 0;
const UNK_NAME: &str = "<UNK>";

/// Sorted, de-duplicated feature ids of one token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TokenFeatureVector(pub Vec<u32>);

impl TokenFeatureVector {
    pub fn ids(&self) -> &[u32] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureIndex {
    ids: HashMap<String, u32>,
    names: Vec<String>,
    frozen: bool,
}

impl Default for FeatureIndex {
    fn default() -> Self {
        Self::new()
    }
}

impl FeatureIndex {
    pub fn new() -> Self {
        Self {
            ids: HashMap::from([(UNK_NAME.to_string(), UNK)]),
            names: vec![UNK_NAME.to_string()],
            frozen: false,
        }
    }

    /// Rebuilds an index from names in id order (as stored in a model file).
    pub fn from_names(names: Vec<String>) -> Option<Self> {
        if names.first().map(String::as_str) != Some(UNK_NAME) {
            return None;
        }
        let ids: HashMap<String, u32> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        if ids.len() != names.len() {
            return None;
        }
        Some(Self {
            ids,
            names,
            frozen: true,
        })
    }

    /// Id for `name`, growing the index unless it is frozen.
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        if self.frozen {
            return UNK;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn lookup(&self, name: &str) -> u32 {
        self.ids.get(name).copied().unwrap_or(UNK)
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    AllUpper,
    AllLower,
    InitCap,
    Mixed,
    NonAlpha,
}

impl Shape {
    pub fn of(token: &str) -> Self {
        let letters: Vec<char> = token.chars().filter(|c| c.is_alphabetic()).collect();
        if letters.is_empty() {
            return Shape::NonAlpha;
        }
        if letters.iter().all(|c| c.is_uppercase()) {
            return Shape::AllUpper;
        }
        if letters.iter().all(|c| c.is_lowercase()) {
            return Shape::AllLower;
        }
        let first_upper = token.chars().next().is_some_and(char::is_uppercase);
        if first_upper && letters[1..].iter().all(|c| c.is_lowercase()) {
            Shape::InitCap
        } else {
            Shape::Mixed
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Shape::AllUpper => "ALLUPPER",
            Shape::AllLower => "ALLLOWER",
            Shape::InitCap => "INITCAP",
            Shape::Mixed => "MIXED",
            Shape::NonAlpha => "NONALPHA",
        }
    }
}

/// 1-based bucket of token `ordinal` when `count` tokens are cut into `k`
/// equal parts: `min(floor(p*k) + 1, k)` with `p = ordinal / max(count-1, 1)`.
pub fn position_bucket(ordinal: usize, count: usize, k: usize) -> usize {
    let p = ordinal as f64 / count.saturating_sub(1).max(1) as f64;
    ((p * k as f64).floor() as usize + 1).min(k)
}

const STEM_SUFFIXES: &[&str] = &[
    "zioni", "zione", "mente", "ness", "ità", "ing", "ed", "es", "s", "i", "e", "a", "o",
];
const MIN_STEM_CHARS: usize = 3;

/// Naive language-agnostic stemmer: lowercase, then strip listed suffixes
/// (first match wins) until none applies without leaving fewer than three
/// characters. Running to a fixed point makes it idempotent.
pub fn default_stem(token: &str) -> String {
    let mut stem = token.to_lowercase();
    'outer: loop {
        let chars = stem.chars().count();
        for suf in STEM_SUFFIXES {
            if stem.ends_with(suf) && chars - suf.chars().count() >= MIN_STEM_CHARS {
                stem.truncate(stem.len() - suf.len());
                continue 'outer;
            }
        }
        return stem;
    }
}

/// Feature strings for every token of `doc`, in token order.
pub fn feature_strings(doc: &Document) -> Vec<Vec<String>> {
    let count = doc.token_count();
    doc.tokens()
        .enumerate()
        .map(|(i, tok)| {
            let w = tok.text.as_str();
            let mut f = Vec::with_capacity(20);
            f.push(format!("w={w}"));
            let stem = tok.stem.clone().unwrap_or_else(|| default_stem(w));
            f.push(format!("stem={stem}"));
            if let Some(pos) = &tok.pos {
                f.push(format!("pos={pos}"));
            }
            let chars: Vec<char> = w.chars().collect();
            for n in 1..=4.min(chars.len()) {
                let pre: String = chars[..n].iter().collect();
                let suf: String = chars[chars.len() - n..].iter().collect();
                f.push(format!("pre{n}={pre}"));
                f.push(format!("suf{n}={suf}"));
            }
            f.push(format!("shape={}", Shape::of(w).as_str()));
            for k in 2..=5 {
                f.push(format!("pos{k}={}", position_bucket(i, count, k)));
            }
            f
        })
        .collect()
}

fn to_vector(ids: impl Iterator<Item = u32>) -> TokenFeatureVector {
    let mut v: Vec<u32> = ids.collect();
    v.sort_unstable();
    v.dedup();
    TokenFeatureVector(v)
}

/// Extracts features, interning new strings unless `index` is frozen.
pub fn extract_features(doc: &Document, index: &mut FeatureIndex) -> Vec<TokenFeatureVector> {
    feature_strings(doc)
        .into_iter()
        .map(|fs| to_vector(fs.iter().map(|s| index.intern(s))))
        .collect()
}

/// Extracts features against a read-only index; unknown strings map to [`UNK`].
pub fn extract_frozen(doc: &Document, index: &FeatureIndex) -> Vec<TokenFeatureVector> {
    feature_strings(doc)
        .into_iter()
        .map(|fs| to_vector(fs.iter().map(|s| index.lookup(s))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn barack_features() {
        let doc = Document::from_tokens("d", &["Barack"]).unwrap();
        let f = &feature_strings(&doc)[0];
        for want in [
            "w=Barack", "shape=INITCAP", "pre1=B", "pre2=Ba", "pre3=Bar", "pre4=Bara", "suf1=k",
            "suf2=ck", "suf3=ack", "suf4=rack",
        ] {
            assert!(f.contains(&want.to_string()), "missing {want}: {f:?}");
        }
        assert!(!f.iter().any(|s| s.starts_with("pos=")));
    }

    #[test]
    fn short_token_has_only_available_affixes() {
        let doc = Document::from_tokens("d", &["ab"]).unwrap();
        let f = &feature_strings(&doc)[0];
        assert!(f.contains(&"pre2=ab".to_string()) && f.contains(&"suf2=ab".to_string()));
        assert!(f.contains(&"pre1=a".to_string()) && f.contains(&"suf1=b".to_string()));
        assert!(!f.iter().any(|s| s.starts_with("pre3") || s.starts_with("suf4")));
    }

    #[test]
    fn positional_buckets() {
        // p = 11/20 = 0.55
        assert_eq!(position_bucket(11, 21, 2), 2);
        assert_eq!(position_bucket(11, 21, 3), 2);
        assert_eq!(position_bucket(11, 21, 4), 3);
        assert_eq!(position_bucket(11, 21, 5), 3);
        for k in 2..=5 {
            assert_eq!(position_bucket(0, 7, k), 1);
            assert_eq!(position_bucket(6, 7, k), k);
            assert_eq!(position_bucket(0, 1, k), 1);
        }
    }

    #[test]
    fn shapes() {
        assert_eq!(Shape::of("Barack"), Shape::InitCap);
        assert_eq!(Shape::of("NASA"), Shape::AllUpper);
        assert_eq!(Shape::of("mri"), Shape::AllLower);
        assert_eq!(Shape::of("iPhone"), Shape::Mixed);
        assert_eq!(Shape::of("3.5"), Shape::NonAlpha);
    }

    #[test]
    fn stems() {
        assert_eq!(default_stem("Enhancements"), "enhancement");
        assert_eq!(default_stem("ab"), "ab");
        assert_eq!(default_stem("mammografia"), "mammograf");
    }

    #[test]
    fn pos_and_external_stem_are_used() {
        let mut doc = Document::from_tokens("d", &["Roma"]).unwrap();
        let mut units = doc.tunits().to_vec();
        units[0].stem = Some("rom".into());
        units[0].pos = Some("NP".into());
        doc = Document::new("d", units).unwrap();
        let f = &feature_strings(&doc)[0];
        assert!(f.contains(&"stem=rom".to_string()) && f.contains(&"pos=NP".to_string()));
    }

    #[test]
    fn frozen_index_does_not_grow() {
        let mut index = FeatureIndex::new();
        let a = Document::from_tokens("a", &["alpha", "beta"]).unwrap();
        let first = extract_features(&a, &mut index);
        let mut again = FeatureIndex::new();
        assert_eq!(extract_features(&a, &mut again), first);
        index.freeze();
        let n = index.len();
        let b = Document::from_tokens("b", &["gamma", "delta", "Epsilon"]).unwrap();
        let feats = extract_features(&b, &mut index);
        assert_eq!(index.len(), n);
        assert!(feats.iter().all(|v| v.ids().contains(&UNK)));
        assert_eq!(feats, extract_frozen(&b, &index));
    }

    proptest! {
        #[test]
        fn stem_is_idempotent(w in "[A-Za-zàèéìòù]{1,14}") {
            let once = default_stem(&w);
            prop_assert_eq!(default_stem(&once), once);
        }
    }
}
