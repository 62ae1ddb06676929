use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{concept_tags, corrupt_training_set, relative_loss, score_concept, train_concept, CorruptionPlan, FeatureSet, Split};
use crate::corpus::AnnotatedCorpus;
use crate::error::{Error, Result};
use crate::eval::{concept_totals, micro_macro, pooled_kappa, ContingencyTable, EvalReport};
use crate::learners::Learner;
use crate::seed::derive_seed;

pub const SWEEP_FORMAT_VERSION: u32 = 1;

const RUN_TAG: u64 = 0x5255_4e;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Corruption ratios in percent.
    pub lambda_grid: Vec<u32>,
    /// Repeats per interior ratio; 0 and 100 run once.
    pub repeats: usize,
    pub master_seed: u64,
    pub learner: Learner,
    pub split: Split,
    /// Authoritative coder: test gold and uncorrupted training annotations.
    pub authoritative: String,
    pub non_authoritative: String,
    pub batch: String,
}

impl SweepConfig {
    pub fn default_grid() -> Vec<u32> {
        (0..=100).step_by(10).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.lambda_grid;
        if g.first() != Some(&0) || g.last() != Some(&100) {
            return Err(Error::Config("lambda grid must start at 0 and end at 100".into()));
        }
        if g.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("lambda grid must be strictly increasing".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        if self.split.train.is_empty() || self.split.test.is_empty() {
            return Err(Error::Config("train and test sets must be non-empty".into()));
        }
        Ok(())
    }

    /// (λ, repeat) pairs in output order.
    pub fn runs(&self) -> Vec<(u32, usize)> {
        self.lambda_grid
            .iter()
            .flat_map(|&l| {
                let n = if l == 0 || l == 100 { 1 } else { self.repeats };
                (0..n).map(move |r| (l, r))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub batch: String,
    pub lambda: u32,
    pub repeat: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub error: Option<String>,
    /// Pooled agreement between authoritative and corrupted training annotations.
    pub kappa: Option<f64>,
    pub per_concept_kappa: Vec<Option<f64>>,
    pub report: Option<EvalReport<f64>>,
    /// `[test doc][concept]` tables, kept for significance testing.
    #[serde(skip)]
    pub doc_tables: Vec<Vec<ContingencyTable>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std, n })
    }
}

/// Aggregates of one (batch, λ) cell over its successful runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSummary {
    pub batch: String,
    pub lambda: u32,
    pub runs: usize,
    pub failed: usize,
    pub kappa: Option<MeanStd>,
    pub f1_micro: Option<MeanStd>,
    pub f1_macro: Option<MeanStd>,
    pub precision_micro: Option<MeanStd>,
    pub recall_micro: Option<MeanStd>,
    pub precision_macro: Option<MeanStd>,
    pub recall_macro: Option<MeanStd>,
    /// Percent change of mean micro F1 against λ = 0.
    pub f1_micro_loss: Option<f64>,
    pub f1_macro_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub format_version: u32,
    pub concepts: Vec<String>,
    pub runs: Vec<RunResult>,
    pub summaries: Vec<LambdaSummary>,
}

type Extract = fn(&EvalReport<f64>) -> f64;

const METRICS: [(&str, Extract); 6] = [
    ("f1_micro", |r| r.micro.f1),
    ("f1_macro", |r| r.macro_.f1),
    ("precision_micro", |r| r.micro.precision),
    ("recall_micro", |r| r.micro.recall),
    ("precision_macro", |r| r.macro_.precision),
    ("recall_macro", |r| r.macro_.recall),
];

impl SweepResult {
    pub fn summary(&self, batch: &str, lambda: u32) -> Option<&LambdaSummary> {
        self.summaries.iter().find(|s| s.batch == batch && s.lambda == lambda)
    }

    pub fn run(&self, batch: &str, lambda: u32, repeat: usize) -> Option<&RunResult> {
        self.runs
            .iter()
            .find(|r| r.batch == batch && r.lambda == lambda && r.repeat == repeat)
    }

    pub fn batches(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.runs {
            if !out.contains(&r.batch) {
                out.push(r.batch.clone());
            }
        }
        out
    }

    /// Concatenates sweeps over the same concepts (e.g. two role assignments).
    pub fn merge(parts: Vec<SweepResult>) -> Result<SweepResult> {
        let mut it = parts.into_iter();
        let mut out = it.next().ok_or_else(|| Error::Config("nothing to merge".into()))?;
        for p in it {
            if p.concepts != out.concepts {
                return Err(Error::Config("sweeps cover different concepts".into()));
            }
            out.runs.extend(p.runs);
            out.summaries.extend(p.summaries);
        }
        Ok(out)
    }

    /// Per-λ rows averaging the batch means, as `batch = "average"`.
    pub fn batch_average(&self) -> Vec<LambdaSummary> {
        let batches = self.batches();
        let mut lambdas: Vec<u32> = self.summaries.iter().map(|s| s.lambda).collect();
        lambdas.sort_unstable();
        lambdas.dedup();
        let avg = |rows: &[&LambdaSummary], get: fn(&LambdaSummary) -> Option<MeanStd>| {
            let means: Option<Vec<f64>> = rows.iter().map(|s| get(s).map(|m| m.mean)).collect();
            means.and_then(|m| MeanStd::of(&m))
        };
        let mut out: Vec<LambdaSummary> = lambdas
            .into_iter()
            .filter_map(|l| {
                let rows: Vec<&LambdaSummary> = batches.iter().filter_map(|b| self.summary(b, l)).collect();
                if rows.len() != batches.len() {
                    return None;
                }
                Some(LambdaSummary {
                    batch: "average".into(),
                    lambda: l,
                    runs: rows.iter().map(|s| s.runs).sum(),
                    failed: rows.iter().map(|s| s.failed).sum(),
                    kappa: avg(&rows, |s| s.kappa),
                    f1_micro: avg(&rows, |s| s.f1_micro),
                    f1_macro: avg(&rows, |s| s.f1_macro),
                    precision_micro: avg(&rows, |s| s.precision_micro),
                    recall_micro: avg(&rows, |s| s.recall_micro),
                    precision_macro: avg(&rows, |s| s.precision_macro),
                    recall_macro: avg(&rows, |s| s.recall_macro),
                    f1_micro_loss: None,
                    f1_macro_loss: None,
                })
            })
            .collect();
        add_losses(&mut out);
        out
    }

    /// One row per run. Columns: batch, lambda, repeat, seed, kappa, the six
    /// aggregate metrics, `f1_<concept>` per concept, status.
    pub fn write_runs_csv<W: Write>(&self, mut out: W, header: &[(String, String)]) -> Result<()> {
        for (k, v) in header {
            writeln!(out, "# {k}={v}").map_err(|e| Error::io("<csv>", e))?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut cols: Vec<String> = ["batch", "lambda", "repeat", "seed", "kappa"].map(String::from).to_vec();
        cols.extend(METRICS.iter().map(|(n, _)| n.to_string()));
        cols.extend(self.concepts.iter().map(|c| format!("f1_{c}")));
        cols.push("status".into());
        w.write_record(&cols)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.runs {
            let mut row = vec![
                r.batch.clone(),
                r.lambda.to_string(),
                r.repeat.to_string(),
                r.seed.to_string(),
                opt(r.kappa),
            ];
            match &r.report {
                Some(rep) => {
                    row.extend(METRICS.iter().map(|(_, f)| f(rep).to_string()));
                    row.extend(rep.concepts.iter().map(|c| c.scores.f1.to_string()));
                }
                None => row.extend(std::iter::repeat_n(String::new(), METRICS.len() + self.concepts.len())),
            }
            row.push(match r.status {
                RunStatus::Ok => "ok".into(),
                RunStatus::Failed => format!("failed: {}", r.error.as_deref().unwrap_or("")),
            });
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn summarize(batch: &str, lambda: u32, runs: &[&RunResult]) -> LambdaSummary {
    let ok: Vec<&RunResult> = runs.iter().copied().filter(|r| r.status == RunStatus::Ok).collect();
    let kappas: Vec<f64> = ok.iter().filter_map(|r| r.kappa).collect();
    let reports: Vec<&EvalReport<f64>> = ok.iter().filter_map(|r| r.report.as_ref()).collect();
    let stat = |f: Extract| MeanStd::of(&reports.iter().map(|r| f(r)).collect::<Vec<_>>());
    LambdaSummary {
        batch: batch.to_string(),
        lambda,
        runs: runs.len(),
        failed: runs.len() - ok.len(),
        kappa: MeanStd::of(&kappas),
        f1_micro: stat(METRICS[0].1),
        f1_macro: stat(METRICS[1].1),
        precision_micro: stat(METRICS[2].1),
        recall_micro: stat(METRICS[3].1),
        precision_macro: stat(METRICS[4].1),
        recall_macro: stat(METRICS[5].1),
        f1_micro_loss: None,
        f1_macro_loss: None,
    }
}

fn add_losses(rows: &mut [LambdaSummary]) {
    let Some(base) = rows.iter().find(|s| s.lambda == 0).cloned() else {
        return;
    };
    for s in rows.iter_mut() {
        s.f1_micro_loss = base
            .f1_micro
            .zip(s.f1_micro)
            .and_then(|(b, v)| relative_loss(b.mean, v.mean).ok());
        s.f1_macro_loss = base
            .f1_macro
            .zip(s.f1_macro)
            .and_then(|(b, v)| relative_loss(b.mean, v.mean).ok());
    }
}

/// Runs every (λ, repeat) of one role assignment. Training of different
/// runs and concepts is spread over the current rayon pool; results do not
/// depend on the pool size.
pub fn run_sweep(corpus: &AnnotatedCorpus, config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let auth = corpus.coder(&config.authoritative)?;
    let nonauth = corpus.coder(&config.non_authoritative)?;
    let docs = corpus.documents();
    let n_concepts = corpus.concepts().len();
    let split = &config.split;
    if let Some(&d) = split.train.iter().chain(&split.test).find(|&&d| d >= docs.len()) {
        return Err(Error::Config(format!("split refers to document {d} of {}", docs.len())));
    }
    for &d in &split.train {
        if !auth.has_doc(d) || !nonauth.has_doc(d) {
            return Err(Error::Corpus(format!(
                "training document {} is not annotated by both coders",
                docs[d].id()
            )));
        }
    }
    if let Some(&d) = split.test.iter().find(|&&d| !auth.has_doc(d)) {
        return Err(Error::Corpus(format!(
            "test document {} is not annotated by {}",
            docs[d].id(),
            config.authoritative
        )));
    }

    let features = FeatureSet::build(docs, &split.train, &split.test);
    let n_features = features.index.len();
    let plan = CorruptionPlan::new(&split.train, config.repeats, config.master_seed);
    let runs = config.runs();

    struct Prepared {
        seed: u64,
        annotations: crate::corpus::Annotations,
        kappa: Result<crate::eval::PooledKappa>,
    }
    let prepared: Vec<Result<Prepared>> = runs
        .par_iter()
        .map(|&(lambda, repeat)| {
            let annotations = corrupt_training_set(auth, nonauth, &plan, repeat, lambda)?;
            let kappa = pooled_kappa(auth, &annotations, docs, &split.train, n_concepts);
            Ok(Prepared {
                seed: derive_seed(config.master_seed, &[RUN_TAG, lambda as u64, repeat as u64]),
                annotations,
                kappa,
            })
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..runs.len())
        .filter(|&i| prepared[i].is_ok())
        .flat_map(|i| (0..n_concepts).map(move |c| (i, c)))
        .collect();
    let cells: Vec<Result<Vec<ContingencyTable>>> = jobs
        .par_iter()
        .map(|&(i, c)| {
            let p = prepared[i].as_ref().map_err(|e| Error::Training(e.to_string()))?;
            let tags = concept_tags(docs, &p.annotations, &split.train, c)?;
            let weights = train_concept(
                &config.learner,
                &features.train,
                &tags,
                n_features,
                derive_seed(p.seed, &[c as u64]),
            )?;
            score_concept(&weights, docs, &split.test, &features.test, auth, c)
        })
        .collect();

    let mut cells = cells.into_iter();
    let mut results = Vec::with_capacity(runs.len());
    for (i, &(lambda, repeat)) in runs.iter().enumerate() {
        let mut row = RunResult {
            batch: config.batch.clone(),
            lambda,
            repeat,
            seed: 0,
            status: RunStatus::Ok,
            error: None,
            kappa: None,
            per_concept_kappa: Vec::new(),
            report: None,
            doc_tables: Vec::new(),
        };
        let p = match &prepared[i] {
            Ok(p) => p,
            Err(e) => {
                row.status = RunStatus::Failed;
                row.error = Some(e.to_string());
                results.push(row);
                continue;
            }
        };
        row.seed = p.seed;
        match &p.kappa {
            Ok(k) => {
                row.kappa = Some(k.pooled.kappa);
                row.per_concept_kappa = k.per_concept.iter().map(|x| x.map(|k| k.kappa)).collect();
            }
            Err(e) => row.error = Some(format!("kappa: {e}")),
        }
        let per_concept: Vec<Result<Vec<ContingencyTable>>> = cells.by_ref().take(n_concepts).collect();
        let mut by_concept = Vec::with_capacity(n_concepts);
        for r in per_concept {
            match r {
                Ok(t) => by_concept.push(t),
                Err(e) => {
                    row.status = RunStatus::Failed;
                    row.error.get_or_insert_with(|| e.to_string());
                }
            }
        }
        if row.status == RunStatus::Ok {
            let doc_tables: Vec<Vec<ContingencyTable>> = (0..split.test.len())
                .map(|d| by_concept.iter().map(|col| col[d]).collect())
                .collect();
            let totals = concept_totals(&doc_tables, n_concepts);
            row.report = Some(micro_macro(corpus.concepts().ids(), &totals)?);
            row.doc_tables = doc_tables;
        }
        results.push(row);
    }

    let mut summaries: Vec<LambdaSummary> = config
        .lambda_grid
        .iter()
        .map(|&l| {
            let rows: Vec<&RunResult> = results.iter().filter(|r| r.lambda == l).collect();
            summarize(&config.batch, l, &rows)
        })
        .collect();
    add_losses(&mut summaries);
    Ok(SweepResult {
        format_version: SWEEP_FORMAT_VERSION,
        concepts: corpus.concepts().ids().to_vec(),
        runs: results,
        summaries,
    })
}
