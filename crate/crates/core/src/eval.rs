//! Token-and-separator evaluation.
//!
//! Every t-unit counts once per concept as a TP, FP, FN or TN. F1 is
//! `2TP / (2TP + FP + FN)` (taken as 1 when `TP = FP = FN = 0`); the micro
//! average applies it to the summed table, the macro average means the
//! per-concept values. Cohen's kappa uses the same tables with the
//! marginal-product chance model.

use std::fmt::Display;
use std::io::{Read, Write};
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::corpus::{mentions_to_labels, Annotations, Document, LabelSequence};
use crate::error::{Error, Result};
use crate::scalar::MetricValue;

pub const TABLES_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ContingencyTable {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn n(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Swaps the roles of prediction and truth.
    pub fn transpose(&self) -> Self {
        Self {
            tp: self.tp,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tn,
        }
    }
}

impl Add for ContingencyTable {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl AddAssign for ContingencyTable {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sum for ContingencyTable {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

impl<'a> Sum<&'a ContingencyTable> for ContingencyTable {
    fn sum<I: Iterator<Item = &'a Self>>(iter: I) -> Self {
        iter.copied().sum()
    }
}

/// Cell counts of `pred` against `gold` over all t-units.
pub fn tunit_table(pred: &LabelSequence, gold: &LabelSequence) -> Result<ContingencyTable> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: gold.len(),
        });
    }
    let mut t = ContingencyTable::default();
    for (&p, &g) in pred.0.iter().zip(&gold.0) {
        match (p, g) {
            (true, true) => t.tp += 1,
            (true, false) => t.fp += 1,
            (false, true) => t.fn_ += 1,
            (false, false) => t.tn += 1,
        }
    }
    Ok(t)
}

fn count<V: MetricValue>(n: u64) -> V {
    V::from_count(n)
}

pub fn f1<V: MetricValue>(t: &ContingencyTable) -> V {
    let denom = 2 * t.tp + t.fp + t.fn_;
    if denom == 0 {
        return V::one();
    }
    count::<V>(2 * t.tp) / count::<V>(denom)
}

/// `TP / (TP + FP)`; with no predicted positives it is 1 if there was
/// nothing to find and 0 otherwise.
pub fn precision<V: MetricValue>(t: &ContingencyTable) -> V {
    match t.tp + t.fp {
        0 if t.fn_ == 0 => V::one(),
        0 => V::zero(),
        d => count::<V>(t.tp) / count::<V>(d),
    }
}

/// `TP / (TP + FN)`; with no true positives it is 1 if nothing was
/// predicted and 0 otherwise.
pub fn recall<V: MetricValue>(t: &ContingencyTable) -> V {
    match t.tp + t.fn_ {
        0 if t.fp == 0 => V::one(),
        0 => V::zero(),
        d => count::<V>(t.tp) / count::<V>(d),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores<V> {
    pub precision: V,
    pub recall: V,
    pub f1: V,
}

impl<V: MetricValue> Scores<V> {
    pub fn of(t: &ContingencyTable) -> Self {
        Self {
            precision: precision(t),
            recall: recall(t),
            f1: f1(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptReport<V> {
    pub concept: String,
    pub table: ContingencyTable,
    pub scores: Scores<V>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<V> {
    pub concepts: Vec<ConceptReport<V>>,
    pub micro_table: ContingencyTable,
    pub micro: Scores<V>,
    #[serde(rename = "macro")]
    pub macro_: Scores<V>,
}

/// Micro scores come from the summed table; macro scores average the
/// per-concept values (each already using the all-negative rule).
pub fn micro_macro<V: MetricValue>(concepts: &[String], tables: &[ContingencyTable]) -> Result<EvalReport<V>> {
    if tables.is_empty() || concepts.len() != tables.len() {
        return Err(Error::Config(format!(
            "need one table per concept, got {} tables for {} concepts",
            tables.len(),
            concepts.len()
        )));
    }
    let per: Vec<ConceptReport<V>> = concepts
        .iter()
        .zip(tables)
        .map(|(c, t)| ConceptReport {
            concept: c.clone(),
            table: *t,
            scores: Scores::of(t),
        })
        .collect();
    let m = count::<V>(per.len() as u64);
    let mean = |get: fn(&Scores<V>) -> V| per.iter().fold(V::zero(), |acc, r| acc + get(&r.scores)) / m;
    let micro_table: ContingencyTable = tables.iter().sum();
    Ok(EvalReport {
        micro: Scores::of(&micro_table),
        macro_: Scores {
            precision: mean(|s| s.precision),
            recall: mean(|s| s.recall),
            f1: mean(|s| s.f1),
        },
        micro_table,
        concepts: per,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaResult<V> {
    pub p_a: V,
    pub p_e: V,
    pub kappa: V,
}

/// Cohen's kappa of a 2x2 agreement table.
///
/// When chance agreement is 1 (both raters constant on the same class)
/// kappa is reported as 1 if they agree everywhere and is an error otherwise.
pub fn cohen_kappa<V: MetricValue>(t: &ContingencyTable) -> Result<KappaResult<V>> {
    let n = t.n();
    if n == 0 {
        return Err(Error::Config("kappa of an empty table".into()));
    }
    let nv = count::<V>(n);
    let p_a = count::<V>(t.tp + t.tn) / nv;
    let pos = count::<V>(t.tp + t.fp) * count::<V>(t.tp + t.fn_);
    let neg = count::<V>(t.fn_ + t.tn) * count::<V>(t.fp + t.tn);
    let p_e = (pos + neg) / (nv * nv);
    if p_e == V::one() {
        if p_a == V::one() {
            return Ok(KappaResult {
                p_a,
                p_e,
                kappa: V::one(),
            });
        }
        return Err(Error::KappaUndefined {
            observed: (t.tp + t.tn) as f64 / n as f64,
        });
    }
    Ok(KappaResult {
        p_a,
        p_e,
        kappa: (p_a - p_e) / (V::one() - p_e),
    })
}

/// Per-document, per-concept tables of `pred` against `gold` on the
/// documents listed in `docs` (indices into `documents`).
pub fn annotation_tables(
    pred: &Annotations,
    gold: &Annotations,
    documents: &[Document],
    docs: &[usize],
    n_concepts: usize,
) -> Result<Vec<Vec<ContingencyTable>>> {
    docs.iter()
        .map(|&d| {
            let doc = &documents[d];
            let (Some(p), Some(g)) = (pred.doc(d), gold.doc(d)) else {
                return Err(Error::Corpus(format!(
                    "document {} is not annotated on both sides",
                    doc.id()
                )));
            };
            (0..n_concepts)
                .map(|c| {
                    let pl = mentions_to_labels(doc, &p[c])?;
                    let gl = mentions_to_labels(doc, &g[c])?;
                    tunit_table(&pl, &gl)
                })
                .collect()
        })
        .collect()
}

/// Sums per-document tables into per-concept tables.
pub fn concept_totals(per_doc: &[Vec<ContingencyTable>], n_concepts: usize) -> Vec<ContingencyTable> {
    let mut totals = vec![ContingencyTable::default(); n_concepts];
    for row in per_doc {
        for (t, cell) in totals.iter_mut().zip(row) {
            *t += *cell;
        }
    }
    totals
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledKappa {
    /// One table over every (t-unit, concept) decision.
    pub table: ContingencyTable,
    pub pooled: KappaResult<f64>,
    /// Per-concept kappa; `None` where it is undefined.
    pub per_concept: Vec<Option<KappaResult<f64>>>,
}

/// Agreement between two coders over the same documents, pooling every
/// (t-unit, concept) binary decision into a single table.
pub fn pooled_kappa(
    a: &Annotations,
    b: &Annotations,
    documents: &[Document],
    docs: &[usize],
    n_concepts: usize,
) -> Result<PooledKappa> {
    let per_doc = annotation_tables(b, a, documents, docs, n_concepts)?;
    let per_concept_tables = concept_totals(&per_doc, n_concepts);
    let table: ContingencyTable = per_concept_tables.iter().sum();
    Ok(PooledKappa {
        pooled: cohen_kappa(&table)?,
        per_concept: per_concept_tables.iter().map(|t| cohen_kappa(t).ok()).collect(),
        table,
    })
}

impl<V: MetricValue + Display> EvalReport<V> {
    /// CSV with one row per concept, then `micro` and `macro` rows.
    /// Columns: `concept,tp,fp,fn,tn,precision,recall,f1` (macro has no counts).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["concept", "tp", "fp", "fn", "tn", "precision", "recall", "f1"])?;
        let row = |name: &str, t: Option<&ContingencyTable>, s: &Scores<V>| -> Vec<String> {
            let counts = match t {
                Some(t) => vec![t.tp.to_string(), t.fp.to_string(), t.fn_.to_string(), t.tn.to_string()],
                None => vec![String::new(); 4],
            };
            let mut r = vec![name.to_string()];
            r.extend(counts);
            r.extend([s.precision.to_string(), s.recall.to_string(), s.f1.to_string()]);
            r
        };
        for c in &self.concepts {
            w.write_record(row(&c.concept, Some(&c.table), &c.scores))?;
        }
        w.write_record(row("micro", Some(&self.micro_table), &self.micro))?;
        w.write_record(row("macro", None, &self.macro_))?;
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// One row of a per-document table file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocTableRow {
    pub doc: String,
    pub concept: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

/// Writes per-document tables as CSV: `doc,concept,tp,fp,fn,tn`.
pub fn write_doc_tables<W: Write>(
    out: W,
    doc_ids: &[&str],
    concepts: &[String],
    tables: &[Vec<ContingencyTable>],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (doc, row) in doc_ids.iter().zip(tables) {
        for (concept, t) in concepts.iter().zip(row) {
            w.serialize(DocTableRow {
                doc: doc.to_string(),
                concept: concept.clone(),
                tp: t.tp,
                fp: t.fp,
                fn_: t.fn_,
                tn: t.tn,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Per-document tables read back from CSV (`#` lines are comments).
#[derive(Debug, Clone, PartialEq)]
pub struct DocTables {
    pub docs: Vec<String>,
    pub concepts: Vec<String>,
    /// `[doc][concept]`
    pub tables: Vec<Vec<ContingencyTable>>,
}

pub fn read_doc_tables<R: Read>(input: R) -> Result<DocTables> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let mut docs: Vec<String> = Vec::new();
    let mut concepts: Vec<String> = Vec::new();
    let mut cells: Vec<Vec<Option<ContingencyTable>>> = Vec::new();
    for (i, rec) in rdr.deserialize::<DocTableRow>().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: i + 2,
            reason: e.to_string(),
        })?;
        let d = match docs.iter().position(|x| *x == rec.doc) {
            Some(d) => d,
            None => {
                docs.push(rec.doc.clone());
                cells.push(Vec::new());
                docs.len() - 1
            }
        };
        let c = match concepts.iter().position(|x| *x == rec.concept) {
            Some(c) => c,
            None => {
                concepts.push(rec.concept.clone());
                concepts.len() - 1
            }
        };
        if cells[d].len() <= c {
            cells[d].resize(c + 1, None);
        }
        if cells[d][c].is_some() {
            return Err(Error::Parse {
                line: i + 2,
                reason: format!("duplicate row for doc {} concept {}", rec.doc, rec.concept),
            });
        }
        cells[d][c] = Some(ContingencyTable::new(rec.tp, rec.fp, rec.fn_, rec.tn));
    }
    let tables = cells
        .into_iter()
        .enumerate()
        .map(|(d, mut row)| {
            row.resize(concepts.len(), None);
            row.into_iter()
                .enumerate()
                .map(|(c, t)| {
                    t.ok_or_else(|| {
                        Error::Corpus(format!("no table for doc {} concept {}", docs[d], concepts[c]))
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DocTables {
        docs,
        concepts,
        tables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, MentionSpan};

    #[test]
    fn identical_labels() {
        let l = LabelSequence(vec![true, true, true, false, false, false, false, false, false]);
        assert_eq!(tunit_table(&l, &l).unwrap(), ContingencyTable::new(3, 0, 0, 6));
    }

    #[test]
    fn all_negative_prediction() {
        let gold = LabelSequence(vec![false, false, true, true, true, false, false]);
        let pred = LabelSequence::empty(7);
        assert_eq!(tunit_table(&pred, &gold).unwrap(), ContingencyTable::new(0, 0, 3, 4));
    }

    #[test]
    fn partial_overlap_earns_partial_credit() {
        // gold covers t-units 2..=6, pred covers 4..=8
        let doc = Document::from_tokens("d", &["a", "b", "c", "d", "e", "f"]).unwrap();
        let gold = mentions_to_labels(&doc, &[MentionSpan::new(2, 6)]).unwrap();
        let pred = mentions_to_labels(&doc, &[MentionSpan::new(4, 8)]).unwrap();
        let t = tunit_table(&pred, &gold).unwrap();
        assert_eq!((t.tp, t.fn_, t.fp), (3, 2, 2));
        let pred = mentions_to_labels(&doc, &[MentionSpan::new(4, 6), MentionSpan::new(10, 10)]).unwrap();
        let t = tunit_table(&pred, &gold).unwrap();
        assert_eq!((t.tp, t.fn_, t.fp), (3, 2, 1));
    }

    #[test]
    fn length_mismatch() {
        assert!(tunit_table(&LabelSequence::empty(3), &LabelSequence::empty(5)).is_err());
    }

    #[test]
    fn f1_cases() {
        assert_eq!(f1::<f64>(&ContingencyTable::new(0, 0, 0, 10)), 1.0);
        assert!((f1::<f64>(&ContingencyTable::new(2, 1, 1, 0)) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1::<f64>(&ContingencyTable::new(0, 4, 0, 1)), 0.0);
    }

    #[test]
    fn precision_recall_conventions() {
        let t = ContingencyTable::new(3, 1, 2, 4);
        assert_eq!(precision::<f64>(&t), 0.75);
        assert_eq!(recall::<f64>(&t), 0.6);
        let empty = ContingencyTable::new(0, 0, 0, 9);
        assert_eq!((precision::<f64>(&empty), recall::<f64>(&empty)), (1.0, 1.0));
        let missed = ContingencyTable::new(0, 0, 5, 9);
        assert_eq!((precision::<f64>(&missed), recall::<f64>(&missed)), (0.0, 0.0));
    }

    #[test]
    fn micro_and_macro() {
        let names = vec!["A".to_string(), "B".to_string()];
        let tables = [ContingencyTable::new(100, 0, 0, 10), ContingencyTable::new(0, 50, 50, 10)];
        let r = micro_macro::<f64>(&names, &tables).unwrap();
        assert!((r.macro_.f1 - 0.5).abs() < 1e-15);
        assert!((r.micro.f1 - 200.0 / 300.0).abs() < 1e-15);
        let swapped = micro_macro::<f64>(&[names[1].clone(), names[0].clone()], &[tables[1], tables[0]]).unwrap();
        assert_eq!(swapped.macro_.f1, r.macro_.f1);
        let one = micro_macro::<f64>(&names[..1], &tables[..1]).unwrap();
        assert_eq!(one.micro.f1, one.macro_.f1);
        assert!(micro_macro::<f64>(&[], &[]).is_err());
    }

    #[test]
    fn kappa_textbook_table() {
        let k = cohen_kappa::<f64>(&ContingencyTable::new(40, 10, 10, 40)).unwrap();
        assert!((k.p_a - 0.8).abs() < 1e-15);
        assert!((k.p_e - 0.5).abs() < 1e-15);
        assert!((k.kappa - 0.6).abs() < 1e-12);
    }

    #[test]
    fn kappa_degenerate_tables() {
        assert_eq!(cohen_kappa::<f64>(&ContingencyTable::new(5, 0, 0, 7)).unwrap().kappa, 1.0);
        assert_eq!(cohen_kappa::<f64>(&ContingencyTable::new(0, 0, 0, 7)).unwrap().kappa, 1.0);
        assert!(cohen_kappa::<f64>(&ContingencyTable::default()).is_err());
    }

    #[test]
    fn csv_outputs() {
        let names = vec!["A".to_string()];
        let r = micro_macro::<f64>(&names, &[ContingencyTable::new(1, 0, 1, 2)]).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("concept,tp,fp,fn,tn,precision,recall,f1\nA,1,0,1,2,"));
        assert!(s.contains("\nmacro,,,,,"));

        let tables = vec![vec![ContingencyTable::new(1, 2, 3, 4)], vec![ContingencyTable::new(0, 0, 0, 5)]];
        let mut buf = b"# comment\n".to_vec();
        write_doc_tables(&mut buf, &["d1", "d2"], &names, &tables).unwrap();
        let back = read_doc_tables(buf.as_slice()).unwrap();
        assert_eq!(back.tables, tables);
        assert_eq!(back.docs, ["d1", "d2"]);
    }
}
