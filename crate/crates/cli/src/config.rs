//! Merges a TOML config file into the argument list: the file names the
//! command and supplies `--key value` defaults that explicit flags override.

use std::ffi::OsString;
use std::path::Path;

use toml::{Table, Value};

use crate::error::{CliError, CliResult};

fn find_config(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

/// Leading positional words (the command path) and everything else.
/// `--config` and `--out` pairs may appear before the command.
fn split_command(args: &[OsString]) -> (Vec<OsString>, Vec<OsString>) {
    let mut words = Vec::new();
    let mut rest = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if s == "--config" || s == "--out" {
            rest.extend_from_slice(&args[i..(i + 2).min(args.len())]);
            i += 2;
        } else if s.starts_with("--config=") || s.starts_with("--out=") {
            rest.push(args[i].clone());
            i += 1;
        } else if s.starts_with('-') {
            rest.extend_from_slice(&args[i..]);
            break;
        } else {
            words.push(args[i].clone());
            i += 1;
        }
    }
    (words, rest)
}

fn value_args(key: &str, v: &Value) -> CliResult<Vec<String>> {
    let flag = format!("--{}", key.replace('_', "-"));
    let scalar = |v: &Value| -> CliResult<String> {
        match v {
            Value::String(s) => Ok(s.clone()),
            Value::Integer(i) => Ok(i.to_string()),
            Value::Float(f) => Ok(f.to_string()),
            _ => Err(CliError::Config(format!("parameter '{key}' has an unsupported type"))),
        }
    };
    Ok(match v {
        Value::Boolean(true) => vec![flag],
        Value::Boolean(false) => Vec::new(),
        Value::Array(items) => {
            let parts = items.iter().map(scalar).collect::<CliResult<Vec<_>>>()?;
            vec![flag, parts.join(",")]
        }
        other => vec![flag, scalar(other)?],
    })
}

fn mentions(args: &[OsString], flag: &str) -> bool {
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&format!("{flag}="))
    })
}

/// Expands `args` (without the program name) using the config file named by
/// `--config`, if any.
pub fn merge(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = find_config(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.to_string_lossy())))?;
    let table: Table = text
        .parse()
        .map_err(|e| CliError::Config(format!("config {} is not valid TOML: {e}", path.to_string_lossy())))?;
    for key in table.keys() {
        if !matches!(key.as_str(), "command" | "out" | "params") {
            return Err(CliError::Config(format!("unknown config key '{key}'")));
        }
    }
    let (mut words, rest) = split_command(&args);
    let file_command: Option<Vec<OsString>> = match table.get("command") {
        Some(Value::String(c)) => Some(c.split_whitespace().map(OsString::from).collect()),
        Some(_) => return Err(CliError::Config("'command' must be a string".into())),
        None => None,
    };
    let apply_params = match &file_command {
        Some(fc) if words.is_empty() => {
            words = fc.clone();
            true
        }
        Some(fc) => *fc == words,
        None => true,
    };
    let mut out = words;
    if let Some(Value::String(dir)) = table.get("out") {
        if !mentions(&rest, "--out") {
            out.push("--out".into());
            out.push(dir.into());
        }
    }
    if apply_params {
        match table.get("params") {
            Some(Value::Table(params)) => {
                for (k, v) in params {
                    let flag = format!("--{}", k.replace('_', "-"));
                    if !mentions(&rest, &flag) {
                        out.extend(value_args(k, v)?.into_iter().map(OsString::from));
                    }
                }
            }
            Some(_) => return Err(CliError::Config("'params' must be a table".into())),
            None => {}
        }
    }
    out.extend(rest);
    Ok(out)
}
