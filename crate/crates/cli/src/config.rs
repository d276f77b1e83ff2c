//! Optional config files. A file holds `flag = value` pairs, either as a
//! JSON object or as `key=value` lines, and is merged into the argument
//! list before parsing. Flags given on the command line win.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::Command;
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub fn parse_config(text: &str) -> CliResult<Vec<(String, String)>> {
    if text.trim_start().starts_with('{') {
        let obj: serde_json::Map<String, Value> = serde_json::from_str(text)?;
        return obj
            .into_iter()
            .map(|(k, v)| Ok((normalize_key(&k), json_scalar(&k, &v)?)))
            .collect();
    }
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('[') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "config line {}: expected key=value",
                idx + 1
            )));
        };
        let value = value.trim();
        let value = value
            .strip_prefix('"')
            .and_then(|v| v.strip_suffix('"'))
            .unwrap_or(value);
        let value = value
            .strip_prefix('[')
            .and_then(|v| v.strip_suffix(']'))
            .map(|v| v.split(',').map(str::trim).collect::<Vec<_>>().join(","))
            .unwrap_or_else(|| value.to_string());
        pairs.push((normalize_key(key), value));
    }
    Ok(pairs)
}

fn normalize_key(key: &str) -> String {
    key.trim().replace('_', "-")
}

fn json_scalar(key: &str, v: &Value) -> CliResult<String> {
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Array(items) => items
            .iter()
            .map(|x| json_scalar(key, x))
            .collect::<CliResult<Vec<_>>>()?
            .join(","),
        _ => {
            return Err(CliError::Usage(format!(
                "config key {key:?}: unsupported value {v}"
            )))
        }
    })
}

/// Finds `--config`, reads the file and appends every setting that is not
/// already present on the command line.
pub fn merge_config(args: Vec<OsString>, cmd: &Command) -> CliResult<Vec<OsString>> {
    let strings: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut path = None;
    for (i, a) in strings.iter().enumerate() {
        if a == "--config" {
            path = strings.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let Some(sub) = strings
        .iter()
        .skip(1)
        .find_map(|a| cmd.find_subcommand(a))
    else {
        return Ok(args);
    };
    let text = fs::read_to_string(Path::new(&path)).map_err(|source| CliError::Io {
        path: path.clone().into(),
        source,
    })?;

    let mut merged = args;
    for (key, value) in parse_config(&text)? {
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            return Err(CliError::Usage(format!(
                "config key {key:?} is not an option of `{}`",
                sub.get_name()
            )));
        };
        let flag = format!("--{key}");
        let given = strings
            .iter()
            .any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if given {
            continue;
        }
        if arg.get_action().takes_values() {
            merged.push(flag.into());
            merged.push(value.into());
        } else {
            match value.as_str() {
                "true" | "1" | "yes" => merged.push(flag.into()),
                "false" | "0" | "no" => {}
                other => {
                    return Err(CliError::Usage(format!(
                        "config key {key:?} expects a boolean, got {other:?}"
                    )))
                }
            }
        }
    }
    Ok(merged)
}
