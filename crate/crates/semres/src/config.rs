//! `key = value` config files, expanded into command-line flags.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Flags that belong before the subcommand.
const GLOBAL_KEYS: [&str; 3] = ["out", "seed", "workers"];

/// `(key, value)` pairs of a config file. `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected `key = value`", lineno + 1))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            bail!("line {}: empty key", lineno + 1);
        }
        if key == "config" {
            bail!("line {}: config files cannot include other config files", lineno + 1);
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

fn to_flags(pairs: &[(String, String)]) -> Vec<String> {
    let mut flags = Vec::new();
    for (key, value) in pairs {
        match value.as_str() {
            "true" => flags.push(format!("--{key}")),
            "false" => {}
            _ => {
                flags.push(format!("--{key}"));
                flags.push(value.clone());
            }
        }
    }
    flags
}

/// Position of the subcommand in `args` (after the program name), skipping
/// global options and their values.
fn subcommand_index(args: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let a = &args[i];
        if let Some(flag) = a.strip_prefix("--") {
            let takes_value = !flag.contains('=')
                && (GLOBAL_KEYS.contains(&flag) || flag == "config");
            i += if takes_value { 2 } else { 1 };
        } else if a.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter().skip(1);
    let mut found = None;
    while let Some(a) = it.next() {
        if a == "--config" {
            found = it.next().cloned();
        } else if let Some(v) = a.strip_prefix("--config=") {
            found = Some(v.to_string());
        }
    }
    found
}

/// Splices the flags of `--config FILE` into `args`. Global keys go before
/// every user argument and the rest right after the subcommand, so that the
/// user's own flags come later and win.
pub fn expand_args(args: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(Path::new(&path))
        .with_context(|| format!("reading config file {path}"))?;
    let pairs = parse_config(&text).with_context(|| format!("in config file {path}"))?;
    let (globals, locals): (Vec<_>, Vec<_>) = pairs
        .into_iter()
        .partition(|(k, _)| GLOBAL_KEYS.contains(&k.as_str()));
    let Some(sub) = subcommand_index(&args) else {
        // No subcommand: let clap report it.
        return Ok(args);
    };
    let mut out = Vec::with_capacity(args.len() + 2 * (globals.len() + locals.len()));
    out.push(args[0].clone());
    out.extend(to_flags(&globals));
    out.extend(args[1..=sub].iter().cloned());
    out.extend(to_flags(&locals));
    out.extend(args[sub + 1..].iter().cloned());
    Ok(out)
}
