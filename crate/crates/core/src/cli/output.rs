//! Output files and their metadata.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::protocol::{MeanStd, SweepResult};

/// The command, its effective arguments and any extra details, embedded in
/// every output. It holds no timestamps or host details, so repeated runs
/// write identical bytes.
#[derive(Debug, Clone)]
pub struct Meta(Map<String, Value>);

impl Meta {
    pub fn new(command: &str, args: &impl Serialize) -> anyhow::Result<Self> {
        let mut m = Map::new();
        m.insert("tool".into(), Value::from(env!("CARGO_PKG_NAME")));
        m.insert("version".into(), Value::from(env!("CARGO_PKG_VERSION")));
        m.insert("command".into(), Value::from(command));
        m.insert("args".into(), serde_json::to_value(args)?);
        Ok(Self(m))
    }

    pub fn with(mut self, key: &str, value: &impl Serialize) -> anyhow::Result<Self> {
        self.0.insert(key.into(), serde_json::to_value(value)?);
        Ok(self)
    }

    pub fn to_value(&self) -> anyhow::Result<Value> {
        Ok(Value::Object(self.0.clone()))
    }

    /// `key=value` pairs for CSV comment headers; `args` is flattened.
    pub fn header(&self) -> Vec<(String, String)> {
        let text = |v: &Value| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let mut out = Vec::new();
        for (k, v) in &self.0 {
            match (k.as_str(), v) {
                ("args", Value::Object(args)) => {
                    out.extend(args.iter().map(|(ak, av)| (ak.clone(), text(av))));
                }
                _ => out.push((k.clone(), text(v))),
            }
        }
        out
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes `<path>.meta.json` next to a data file that has no room for it.
pub fn write_meta(path: &Path, meta: &Meta) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(&meta.0)?;
    text.push('\n');
    write_file(&meta_path(path), text.as_bytes())
}

pub fn json_text(meta: &Meta, result: &impl Serialize) -> anyhow::Result<String> {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        meta: &'a Map<String, Value>,
        result: &'a T,
    }
    let mut text = serde_json::to_string_pretty(&Doc { meta: &meta.0, result })?;
    text.push('\n');
    Ok(text)
}

pub fn write_json(path: &Path, meta: &Meta, result: &impl Serialize) -> anyhow::Result<()> {
    write_file(path, json_text(meta, result)?.as_bytes())
}

/// Writes `# key=value` header lines, then whatever `body` produces.
pub fn write_csv_file(
    path: &Path,
    meta: &Meta,
    body: impl FnOnce(&mut Vec<u8>) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    for (k, v) in meta.header() {
        writeln!(buf, "# {k}={v}")?;
    }
    body(&mut buf)?;
    write_file(path, &buf)
}

/// One row per (batch, λ) summary with mean and standard deviation columns.
pub fn write_summary_csv(out: &mut Vec<u8>, result: &SweepResult) -> anyhow::Result<()> {
    const STATS: [&str; 7] = [
        "kappa",
        "f1_micro",
        "f1_macro",
        "precision_micro",
        "recall_micro",
        "precision_macro",
        "recall_macro",
    ];
    let mut w = csv::Writer::from_writer(out);
    let mut cols = vec!["batch".to_string(), "lambda".into(), "runs".into(), "failed".into()];
    for s in STATS {
        cols.push(format!("{s}_mean"));
        cols.push(format!("{s}_std"));
    }
    cols.extend(["f1_micro_loss".into(), "f1_macro_loss".into()]);
    w.write_record(&cols)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in &result.summaries {
        let mut row = vec![s.batch.clone(), s.lambda.to_string(), s.runs.to_string(), s.failed.to_string()];
        let stats: [Option<MeanStd>; 7] = [
            s.kappa,
            s.f1_micro,
            s.f1_macro,
            s.precision_micro,
            s.recall_micro,
            s.precision_macro,
            s.recall_macro,
        ];
        for m in stats {
            row.push(opt(m.map(|m| m.mean)));
            row.push(opt(m.map(|m| m.std)));
        }
        row.push(opt(s.f1_micro_loss));
        row.push(opt(s.f1_macro_loss));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
