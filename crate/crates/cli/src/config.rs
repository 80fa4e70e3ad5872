//! Flat `key=value` config files, expanded into command-line flags.
//!
//! Keys are long flag names (`M`, `Lh`, `snr`, ...). The expansion is placed
//! before the user's own flags, and the parser lets later flags win, so
//! anything on the command line overrides the file.

use std::path::Path;

use crate::CliError;

/// Parses `key=value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value", n + 1)))?;
        let k = k.trim().trim_start_matches("--");
        if k.is_empty() {
            return Err(CliError::Config(format!("config line {}: empty key", n + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn to_flags(pairs: &[(String, String)]) -> Vec<String> {
    let mut flags = Vec::new();
    for (k, v) in pairs {
        match v.as_str() {
            "true" => flags.push(format!("--{k}")),
            "false" => {}
            _ => flags.push(format!("--{k}={v}")),
        }
    }
    flags
}

/// Removes `--config FILE` from `args` and splices the file's flags in right after the subcommand.
pub fn expand_args(mut args: Vec<String>) -> Result<Vec<String>, CliError> {
    let pos = args.iter().position(|a| a == "--config" || a.starts_with("--config="));
    let Some(pos) = pos else { return Ok(args) };
    let path = if let Some(p) = args[pos].strip_prefix("--config=") {
        let p = p.to_string();
        args.remove(pos);
        p
    } else {
        if pos + 1 >= args.len() {
            return Err(CliError::Config("--config needs a file path".into()));
        }
        let p = args.remove(pos + 1);
        args.remove(pos);
        p
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Config(format!("cannot read config '{path}': {e}")))?;
    let flags = to_flags(&parse(&text)?);
    let sub = args.iter().skip(1).position(|a| !a.starts_with('-')).map(|i| i + 2).unwrap_or(args.len());
    let tail = args.split_off(sub.min(args.len()));
    args.extend(flags);
    args.extend(tail);
    Ok(args)
}
