//! `--config <json>`: turns a JSON object into flags placed right after the
//! subcommand, so anything given explicitly on the command line overrides it.

use std::ffi::OsString;
use std::path::PathBuf;

use serde_json::Value;

use crate::error::{CliError, CliResult};

const COMMANDS: [&str; 5] = ["analyze", "clusters", "model", "synth", "ftest"];

pub fn expand(mut args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some((pos, path, width)) = find_config(&args) else {
        return Ok(args);
    };
    args.drain(pos..pos + width);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.display().to_string(), source })?;
    let Value::Object(map) = value else {
        return Err(CliError::Usage(format!("{}: config must be a JSON object", path.display())));
    };
    let mut flags = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            Value::Bool(true) => flags.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Number(n) => flags.extend([flag, n.to_string()]),
            Value::String(s) => flags.extend([flag, s]),
            Value::Array(items) => {
                let joined: Vec<String> = items.iter().map(scalar).collect::<CliResult<_>>()?;
                flags.extend([flag, joined.join(",")]);
            }
            Value::Object(_) => return Err(CliError::Usage(format!("config key {key:?}: nested objects are not flags"))),
        }
    }
    let insert_at = subcommand_end(&args)
        .ok_or_else(|| CliError::Usage("--config needs a subcommand to apply to".into()))?;
    args.splice(insert_at..insert_at, flags.into_iter().map(OsString::from));
    Ok(args)
}

fn scalar(v: &Value) -> CliResult<String> {
    match v {
        Value::Number(n) => Ok(n.to_string()),
        Value::String(s) => Ok(s.clone()),
        other => Err(CliError::Usage(format!("config arrays hold numbers or strings, found {other}"))),
    }
}

/// Position, path and token width of the `--config` argument.
fn find_config(args: &[OsString]) -> Option<(usize, PathBuf, usize)> {
    args.iter().enumerate().skip(1).find_map(|(i, a)| {
        let s = a.to_str()?;
        if s == "--config" {
            Some((i, PathBuf::from(args.get(i + 1)?), 2))
        } else {
            s.strip_prefix("--config=").map(|p| (i, PathBuf::from(p), 1))
        }
    })
}

/// Index just past the subcommand name (and the action for `model`).
fn subcommand_end(args: &[OsString]) -> Option<usize> {
    let i = args.iter().skip(1).position(|a| a.to_str().is_some_and(|s| COMMANDS.contains(&s)))? + 1;
    if args[i] == "model" {
        (i + 2 <= args.len()).then_some(i + 2)
    } else {
        Some(i + 1)
    }
}
