//! The `annoqual` command line.
//!
//! Every subcommand accepts `--config FILE`, a flat `key = value` file whose
//! keys are the subcommand's long flag names (`-` or `_` both work). File
//! values are applied first, so flags given on the command line win.

mod config;
mod output;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::corpus::{compute_stats, read_corpus, write_corpus, AnnotatedCorpus};
use crate::eval::{annotation_tables, concept_totals, micro_macro, read_doc_tables, write_doc_tables, ContingencyTable, TABLES_FORMAT_VERSION};
use crate::learners::{Learner, ModelBundle, PerceptronConfig, TrainConfig, MODEL_FORMAT_VERSION};
use crate::protocol::{kfold_cv, run_sweep, tag_corpus, train_model, KFoldConfig, Split, SweepConfig, SweepResult, SWEEP_FORMAT_VERSION};
use crate::significance::{art_test, ArtInput, ArtMetric, DEFAULT_SHUFFLES};
use crate::simcorpus::{apply_coder, calibrate_to_kappa, generate_corpus, CalibrationConfig, CoderProfile, GenConfig, GOLD_CODER, NOISY_CODER};

use output::{write_json, write_meta, Meta};

#[derive(Debug, Parser)]
#[command(name = "annoqual", about = "Annotation-quality experiments for sequence-labelling extractors")]
pub struct Cli {
    /// Worker threads (default: all available cores). Results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with a gold and a noisy coder.
    #[command(args_override_self = true)]
    Gen(GenArgs),
    /// Print annotation counts per coder and concept.
    #[command(args_override_self = true)]
    Stats(StatsArgs),
    /// Train one model per concept.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Tag documents with a trained model.
    #[command(args_override_self = true)]
    Tag(TagArgs),
    /// Score predicted annotations against gold ones.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Corruption-ratio sweep.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// k-fold cross-validation of one coder.
    #[command(args_override_self = true)]
    Kfold(KfoldArgs),
    /// Approximate randomization test between two per-document table files.
    #[command(args_override_self = true)]
    Art(ArtArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Crf,
    Perceptron,
}

#[derive(Debug, Args, Serialize)]
pub struct LearnerArgs {
    #[arg(long, value_enum, default_value = "crf")]
    pub learner: LearnerKind,
    /// CRF prior standard deviation.
    #[arg(long, default_value_t = 10.0)]
    pub sigma: f64,
    /// CRF optimiser iteration cap.
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    /// CRF relative NLL tolerance.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    /// Perceptron epochs.
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
}

impl LearnerArgs {
    fn learner(&self) -> anyhow::Result<Learner> {
        Ok(match self.learner {
            LearnerKind::Crf => {
                ensure!(self.sigma > 0.0, "--sigma must be > 0");
                ensure!(self.max_iter >= 1, "--max-iter must be >= 1");
                Learner::Crf(TrainConfig {
                    l2_sigma: self.sigma,
                    max_iterations: self.max_iter,
                    tolerance: self.tolerance,
                    ..TrainConfig::default()
                })
            }
            LearnerKind::Perceptron => {
                ensure!(self.epochs >= 1, "--epochs must be >= 1");
                Learner::Perceptron(PerceptronConfig {
                    epochs: self.epochs,
                    ..PerceptronConfig::default()
                })
            }
        })
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    /// Key-value defaults for this subcommand.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output corpus (JSON lines); metadata goes to `<out>.meta.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub docs: usize,
    #[arg(long, default_value_t = 9)]
    pub concepts: usize,
    /// Mentions per concept per document.
    #[arg(long, default_value_t = 0.87)]
    pub mention_rate: f64,
    /// Mean mention length in tokens.
    #[arg(long, default_value_t = 17.33)]
    pub mention_length: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Noisy coder profile: identity, over, scattered, under or jitter.
    #[arg(long, default_value = "over")]
    pub profile: String,
    /// Noise scale applied to the profile (ignored with --kappa).
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Calibrate the noise scale to this gold/noisy kappa.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, default_value_t = 0.005)]
    pub kappa_tolerance: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = GOLD_CODER)]
    pub coder: String,
    /// Train on the first N documents annotated by the coder (default: all).
    #[arg(long)]
    pub first: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub learner: LearnerArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model file (JSON, metadata embedded).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TagArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Skip the first N documents.
    #[arg(long, default_value_t = 0)]
    pub skip: usize,
    /// Coder name of the predictions.
    #[arg(long, default_value = "pred")]
    pub coder: String,
    /// Output corpus holding only the predictions; metadata goes to `<out>.meta.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, default_value = GOLD_CODER)]
    pub gold_coder: String,
    /// Prediction corpus (default: the gold file).
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long, default_value = "pred")]
    pub pred_coder: String,
    /// Report CSV (per concept, then micro and macro rows).
    #[arg(long)]
    pub out: PathBuf,
    /// Per-document contingency tables, for `art`.
    #[arg(long)]
    pub doc_tables: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct LambdaGrid(pub Vec<u32>);

fn parse_grid(s: &str) -> Result<LambdaGrid, String> {
    let grid = s
        .split(',')
        .map(|v| v.trim().parse::<u32>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if grid.iter().any(|&l| l > 100) {
        return Err("ratios are percentages in 0..=100".into());
    }
    Ok(LambdaGrid(grid))
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Authoritative coder (batch 1).
    #[arg(long, default_value = GOLD_CODER)]
    pub auth: String,
    #[arg(long, default_value = NOISY_CODER)]
    pub nonauth: String,
    /// Also run with the roles swapped and add averaged rows.
    #[arg(long)]
    pub both_batches: bool,
    /// Corruption ratios in percent, comma separated.
    #[arg(long, default_value = "0,10,20,30,40,50,60,70,80,90,100", value_parser = parse_grid)]
    pub lambda_grid: LambdaGrid,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Leading training documents (default: half the corpus).
    #[arg(long)]
    pub train: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub learner: LearnerArgs,
    /// Per-run CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-λ summary CSV.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Full result as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Directory for per-run, per-document tables.
    #[arg(long)]
    pub tables_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct KfoldArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = GOLD_CODER)]
    pub coder: String,
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub learner: LearnerArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Result JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Pooled report CSV.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Micro,
    Macro,
}

#[derive(Debug, Args, Serialize)]
pub struct ArtArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Per-document tables of system A.
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SHUFFLES)]
    pub shuffles: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "micro")]
    pub metric: MetricArg,
    /// Write the JSON here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses the process arguments and runs; the exit code is 2 for usage
/// errors and 1 for failures while running.
pub fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let args = match config::splice_config_files(raw) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match command()
        .try_get_matches_from(args)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", error_text(&e));
            ExitCode::from(1)
        }
    }
}

/// The error chain joined by `: `, skipping causes the previous message
/// already ends with.
fn error_text(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if out.ends_with(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

/// Toolkit version followed by the file format versions.
pub fn version_text() -> String {
    let mut s = env!("CARGO_PKG_VERSION").to_string();
    for (name, v) in format_versions() {
        s.push_str(&format!("\n{name} format {v}"));
    }
    s
}

/// The clap command with the version text attached.
pub fn command() -> clap::Command {
    Cli::command().version(version_text())
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Stats(a) => cmd_stats(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Tag(a) => cmd_tag(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Kfold(a) => cmd_kfold(&a),
        Command::Art(a) => cmd_art(&a),
    }
}

fn load(path: &Path) -> anyhow::Result<AnnotatedCorpus> {
    read_corpus(path).with_context(|| format!("reading corpus {}", path.display()))
}

fn annotated_docs(corpus: &AnnotatedCorpus, coder: &str) -> anyhow::Result<Vec<usize>> {
    let ann = corpus.coder(coder)?;
    Ok((0..corpus.documents().len()).filter(|&d| ann.has_doc(d)).collect())
}

fn cmd_gen(a: &GenArgs) -> anyhow::Result<()> {
    let config = GenConfig {
        docs: a.docs,
        concepts: a.concepts,
        mention_rate: a.mention_rate,
        mention_length: a.mention_length,
        seed: a.seed,
        ..GenConfig::default()
    };
    let family = CoderProfile::preset(&a.profile)
        .with_context(|| format!("unknown profile {:?} (identity, over, scattered, under, jitter)", a.profile))?;
    let corpus = generate_corpus(&config)?;
    let coder_seed = crate::seed::derive_seed(a.seed, &[0x434f_4445]);
    let (profile, calibration) = match a.kappa {
        Some(target) => {
            let cal = calibrate_to_kappa(
                &corpus,
                &family,
                &CalibrationConfig {
                    target,
                    tolerance: a.kappa_tolerance,
                    seed: coder_seed,
                    ..CalibrationConfig::default()
                },
            )?;
            (cal.profile.clone(), Some(cal))
        }
        None => {
            ensure!(a.scale >= 0.0 && a.scale.is_finite(), "--scale must be a finite value >= 0");
            (family.scaled(a.scale), None)
        }
    };
    let noisy = apply_coder(&corpus, &profile, coder_seed)?;
    let corpus = corpus.with_coder(NOISY_CODER, noisy)?;
    write_corpus(&a.out, &corpus)?;
    #[derive(Serialize)]
    struct GenMeta<'a> {
        generator: &'a GenConfig,
        noisy_profile: &'a CoderProfile,
        coder_seed: u64,
        calibration: Option<&'a crate::simcorpus::Calibration>,
    }
    let extra = GenMeta {
        generator: &config,
        noisy_profile: &profile,
        coder_seed,
        calibration: calibration.as_ref(),
    };
    write_meta(&a.out, &Meta::new("gen", a)?.with("details", &extra)?)
}

fn cmd_stats(a: &StatsArgs) -> anyhow::Result<()> {
    let stats = compute_stats(&load(&a.corpus)?);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&stats)?);
    } else {
        print!("{stats}");
    }
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> anyhow::Result<()> {
    let corpus = load(&a.corpus)?;
    let mut docs = annotated_docs(&corpus, &a.coder)?;
    if let Some(n) = a.first {
        ensure!(n >= 1 && n <= docs.len(), "--first {n} is outside 1..={}", docs.len());
        docs.truncate(n);
    }
    let meta = Meta::new("train", a)?;
    let model = train_model(&corpus, &a.coder, &docs, &a.learner.learner()?, a.seed, meta.to_value()?)?;
    model.save(&a.out)?;
    Ok(())
}

fn cmd_tag(a: &TagArgs) -> anyhow::Result<()> {
    let model = ModelBundle::load(&a.model)?;
    let corpus = load(&a.corpus)?;
    let n = corpus.documents().len();
    ensure!(a.skip < n, "--skip {} leaves no documents out of {n}", a.skip);
    let docs: Vec<usize> = (a.skip..n).collect();
    let pred = tag_corpus(&model, &corpus, &docs)?;
    let (concepts, documents, _) = corpus.into_parts();
    let out = AnnotatedCorpus::new(concepts, documents, [(a.coder.clone(), pred)].into_iter().collect())?;
    write_corpus(&a.out, &out)?;
    write_meta(&a.out, &Meta::new("tag", a)?)
}

fn cmd_eval(a: &EvalArgs) -> anyhow::Result<()> {
    let gold_corpus = load(&a.gold)?;
    let pred_corpus = match &a.pred {
        Some(p) => load(p)?,
        None => gold_corpus.clone(),
    };
    ensure!(
        gold_corpus.concepts() == pred_corpus.concepts(),
        "concept sets differ: {:?} vs {:?}",
        gold_corpus.concepts().ids(),
        pred_corpus.concepts().ids()
    );
    let gold = gold_corpus.coder(&a.gold_coder)?;
    let pred_src = pred_corpus.coder(&a.pred_coder)?;
    // Re-index the predictions onto the gold corpus by document id.
    let mut pred = crate::corpus::Annotations::new(gold_corpus.documents().len());
    for (pd, doc) in pred_corpus.documents().iter().enumerate() {
        let Some(layers) = pred_src.doc(pd) else { continue };
        let gd = gold_corpus
            .doc_index(doc.id())
            .with_context(|| format!("predicted document {} is not in the gold corpus", doc.id()))?;
        ensure!(
            gold_corpus.documents()[gd].tunits() == doc.tunits(),
            "document {} differs between the gold and prediction files",
            doc.id()
        );
        pred.set_doc(gd, layers.to_vec());
    }
    let docs: Vec<usize> = (0..gold_corpus.documents().len())
        .filter(|&d| gold.has_doc(d) && pred.has_doc(d))
        .collect();
    ensure!(!docs.is_empty(), "no document is annotated by both coders");
    let n_concepts = gold_corpus.concepts().len();
    let per_doc = annotation_tables(&pred, gold, gold_corpus.documents(), &docs, n_concepts)?;
    let report = micro_macro::<f64>(gold_corpus.concepts().ids(), &concept_totals(&per_doc, n_concepts))?;
    let meta = Meta::new("eval", a)?;
    output::write_csv_file(&a.out, &meta, |w| Ok(report.write_csv(w)?))?;
    if let Some(path) = &a.doc_tables {
        let ids: Vec<&str> = docs.iter().map(|&d| gold_corpus.documents()[d].id()).collect();
        output::write_csv_file(path, &meta, |w| {
            Ok(write_doc_tables(w, &ids, gold_corpus.concepts().ids(), &per_doc)?)
        })?;
    }
    println!(
        "micro P {:.4} R {:.4} F1 {:.4}; macro F1 {:.4} over {} documents",
        report.micro.precision,
        report.micro.recall,
        report.micro.f1,
        report.macro_.f1,
        docs.len()
    );
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> anyhow::Result<()> {
    let corpus = load(&a.corpus)?;
    let n = corpus.documents().len();
    let n_train = a.train.unwrap_or(n / 2);
    let split = Split::leading(n, n_train)?;
    let learner = a.learner.learner()?;
    let mut roles = vec![("1", a.auth.clone(), a.nonauth.clone())];
    if a.both_batches {
        roles.push(("2", a.nonauth.clone(), a.auth.clone()));
    }
    let parts = roles
        .into_iter()
        .map(|(batch, auth, nonauth)| {
            let cfg = SweepConfig {
                lambda_grid: a.lambda_grid.0.clone(),
                repeats: a.repeats,
                master_seed: a.seed,
                learner: learner.clone(),
                split: split.clone(),
                authoritative: auth,
                non_authoritative: nonauth,
                batch: batch.into(),
            };
            cfg.validate()?;
            Ok(run_sweep(&corpus, &cfg)?)
        })
        .collect::<anyhow::Result<Vec<SweepResult>>>()?;
    let mut result = SweepResult::merge(parts)?;
    if a.both_batches {
        let avg = result.batch_average();
        result.summaries.extend(avg);
    }

    let meta = Meta::new("sweep", a)?;
    let mut buf = Vec::new();
    result.write_runs_csv(&mut buf, &meta.header())?;
    output::write_file(&a.out, &buf)?;
    if let Some(path) = &a.summary {
        output::write_csv_file(path, &meta, |w| output::write_summary_csv(w, &result))?;
    }
    if let Some(path) = &a.json {
        write_json(path, &meta, &result)?;
    }
    if let Some(dir) = &a.tables_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let ids: Vec<&str> = split.test.iter().map(|&d| corpus.documents()[d].id()).collect();
        for run in result.runs.iter().filter(|r| !r.doc_tables.is_empty()) {
            let path = dir.join(format!("b{}-l{:03}-r{:02}.csv", run.batch, run.lambda, run.repeat));
            let run_meta = meta.clone().with("run", &serde_json::json!({
                "batch": run.batch, "lambda": run.lambda, "repeat": run.repeat, "seed": run.seed,
            }))?;
            output::write_csv_file(&path, &run_meta, |w| {
                Ok(write_doc_tables(w, &ids, &result.concepts, &run.doc_tables)?)
            })?;
        }
    }
    let failed = result.runs.iter().filter(|r| r.report.is_none()).count();
    eprintln!("{} runs, {failed} failed", result.runs.len());
    Ok(())
}

fn cmd_kfold(a: &KfoldArgs) -> anyhow::Result<()> {
    let corpus = load(&a.corpus)?;
    let cfg = KFoldConfig {
        k: a.k,
        coder: a.coder.clone(),
        learner: a.learner.learner()?,
        seed: a.seed,
    };
    let result = kfold_cv(&corpus, &cfg)?;
    let meta = Meta::new("kfold", a)?;
    #[derive(Serialize)]
    struct KfoldOut<'a> {
        mean_fold_f1_micro: f64,
        pooled_f1_micro: f64,
        pooled_f1_macro: f64,
        #[serde(flatten)]
        result: &'a crate::protocol::KFoldResult,
    }
    let folds = &result.fold_f1_micro;
    let out = KfoldOut {
        mean_fold_f1_micro: folds.iter().sum::<f64>() / folds.len() as f64,
        pooled_f1_micro: result.report.micro.f1,
        pooled_f1_macro: result.report.macro_.f1,
        result: &result,
    };
    write_json(&a.out, &meta, &out)?;
    if let Some(path) = &a.report {
        output::write_csv_file(path, &meta, |w| Ok(result.report.write_csv(w)?))?;
    }
    println!("mean fold micro F1 {:.4}, pooled micro F1 {:.4}", out.mean_fold_f1_micro, out.pooled_f1_micro);
    Ok(())
}

fn read_tables(path: &Path) -> anyhow::Result<crate::eval::DocTables> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_doc_tables(f).with_context(|| format!("reading {}", path.display()))
}

fn cmd_art(a: &ArtArgs) -> anyhow::Result<()> {
    let ta = read_tables(&a.a)?;
    let tb = read_tables(&a.b)?;
    ensure!(ta.concepts == tb.concepts, "the table files cover different concepts");
    let docs_a: BTreeSet<&String> = ta.docs.iter().collect();
    let docs_b: BTreeSet<&String> = tb.docs.iter().collect();
    if docs_a != docs_b {
        bail!("the table files cover different documents");
    }
    // Align B's rows to A's document order.
    let pos: std::collections::HashMap<&String, usize> = tb.docs.iter().enumerate().map(|(i, d)| (d, i)).collect();
    let b: Vec<Vec<ContingencyTable>> = ta.docs.iter().map(|d| tb.tables[pos[d]].clone()).collect();
    let input = ArtInput {
        a: ta.tables.clone(),
        b,
        shuffles: a.shuffles,
        seed: a.seed,
    };
    let metric = match a.metric {
        MetricArg::Micro => ArtMetric::Micro,
        MetricArg::Macro => ArtMetric::Macro,
    };
    let result = art_test(&input, metric)?;
    let meta = Meta::new("art", a)?;
    let text = output::json_text(&meta, &result)?;
    if let Some(path) = &a.out {
        output::write_file(path, text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

/// Format versions, in the order `--version` lists them.
pub fn format_versions() -> [(&'static str, u32); 3] {
    [
        ("model", MODEL_FORMAT_VERSION),
        ("sweep", SWEEP_FORMAT_VERSION),
        ("tables", TABLES_FORMAT_VERSION),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        command().debug_assert();
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0, 50,100").unwrap(), LambdaGrid(vec![0, 50, 100]));
        assert!(parse_grid("0,101").is_err());
        assert!(parse_grid("0,,5").is_err());
    }
}
