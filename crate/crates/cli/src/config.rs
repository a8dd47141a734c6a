//! `--config file.json`: a flat JSON object whose keys are flag names.
//!
//! The object is turned into `--key=value` arguments placed right after the
//! subcommand. Keys whose flag is also given on the command line are dropped,
//! so explicit flags win. A `"command"` key names the subcommand when argv
//! does not.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::Value;

pub const SUBCOMMANDS: [&str; 7] = ["simulate-chain", "moments", "diagnose", "newton", "example1", "example2", "example3"];

// top-level flags that take a value, so their values are not mistaken for a subcommand
const VALUE_FLAGS: [&str; 4] = ["--seed", "--out", "--threads", "--config"];

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

fn subcommand_index(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if SUBCOMMANDS.contains(&s.as_ref()) {
            return Some(i);
        }
        i += if VALUE_FLAGS.contains(&s.as_ref()) { 2 } else { 1 };
    }
    None
}

/// Long flags present in `argv`, without values.
fn explicit_flags(argv: &[OsString]) -> Vec<String> {
    argv.iter()
        .skip(1)
        .filter_map(|a| {
            let s = a.to_string_lossy();
            s.strip_prefix("--").map(|f| f.split('=').next().unwrap_or("").to_string())
        })
        .collect()
}

fn scalar(key: &str, v: &Value) -> Result<String> {
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        _ => bail!("config key `{key}`: unsupported nested value {v}"),
    })
}

/// Flag arguments encoded by one config entry.
fn flag_args(key: &str, v: &Value) -> Result<Vec<String>> {
    let flag = format!("--{}", key.replace('_', "-"));
    let value = match v {
        Value::Null => return Ok(vec![]),
        Value::Bool(true) => return Ok(vec![flag]),
        Value::Bool(false) => return Ok(vec![]),
        // arrays of arrays (several order vectors) join with ';', flat arrays with ','
        Value::Array(items) => {
            let parts: Result<Vec<String>> = items
                .iter()
                .map(|item| match item {
                    Value::Array(inner) => inner.iter().map(|x| scalar(key, x)).collect::<Result<Vec<_>>>().map(|p| p.join(",")),
                    other => scalar(key, other),
                })
                .collect();
            let sep = if items.iter().any(Value::is_array) { ";" } else { "," };
            parts?.join(sep)
        }
        other => scalar(key, other)?,
    };
    Ok(vec![format!("{flag}={value}")])
}

/// `argv` with the config file (if any) spliced in.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let json: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let Value::Object(map) = json else {
        bail!("config {} must hold a JSON object", path.display());
    };
    let explicit = explicit_flags(&argv);
    let mut argv = argv;
    let mut extra: Vec<OsString> = Vec::new();
    let mut command = None;
    for (key, v) in &map {
        match key.as_str() {
            "command" => command = Some(scalar(key, v)?),
            "config" => bail!("config files cannot reference another config"),
            _ if explicit.contains(&key.replace('_', "-")) => {}
            _ => extra.extend(flag_args(key, v)?.into_iter().map(OsString::from)),
        }
    }
    let at = match (subcommand_index(&argv), command) {
        (Some(i), _) => i + 1,
        (None, Some(c)) => {
            argv.insert(1, c.into());
            2
        }
        (None, None) => bail!("no subcommand given on the command line or in the config"),
    };
    argv.splice(at..at, extra);
    Ok(argv)
}
