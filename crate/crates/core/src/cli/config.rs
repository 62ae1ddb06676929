//! `--config FILE` expansion.

use std::fs;

use anyhow::{anyhow, bail, Context};
use clap::ArgAction;

/// Replaces nothing and removes nothing: the file's entries become
/// `--key value` arguments inserted right after the subcommand name, so any
/// flag repeated later on the command line overrides them.
pub fn splice_config_files(args: Vec<String>) -> anyhow::Result<Vec<String>> {
    let root = super::command();
    let Some(sub_pos) = args
        .iter()
        .position(|a| root.get_subcommands().any(|s| s.get_name() == a))
    else {
        return Ok(args);
    };
    let sub = root
        .find_subcommand(&args[sub_pos])
        .expect("position found above");
    let mut path = None;
    let mut i = sub_pos + 1;
    while i < args.len() {
        if args[i] == "--" {
            break;
        }
        if args[i] == "--config" {
            path = args.get(i + 1).cloned();
            i += 1;
        } else if let Some(p) = args[i].strip_prefix("--config=") {
            path = Some(p.to_string());
        }
        i += 1;
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config file {path}"))?;
    let extra = expand(&text, sub).with_context(|| format!("in config file {path}"))?;
    let mut out = args;
    out.splice(sub_pos + 1..sub_pos + 1, extra);
    Ok(out)
}

fn expand(text: &str, sub: &clap::Command) -> anyhow::Result<Vec<String>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value", n + 1))?;
        let key = key.trim().replace('_', "-");
        let value = unquote(value.trim());
        if key == "config" {
            bail!("line {}: config files cannot include other config files", n + 1);
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| anyhow!("line {}: unknown key {key:?} for `{}`", n + 1, sub.get_name()))?;
        if !seen.insert(key.clone()) {
            bail!("line {}: duplicate key {key:?}", n + 1);
        }
        let flag = format!("--{key}");
        match arg.get_action() {
            ArgAction::SetTrue => match value {
                "true" => out.push(flag),
                "false" => {}
                _ => bail!("line {}: {key} takes true or false", n + 1),
            },
            _ => {
                out.push(flag);
                out.push(value.to_string());
            }
        }
    }
    Ok(out)
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
}
