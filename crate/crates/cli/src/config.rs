//! Flat `key = value` config files. Each key is a long flag name without the dashes;
//! the file's flags are spliced in ahead of the command line so explicit flags win.

use std::path::Path;

use crate::error::{CliError, Result};

pub const THREADS_ENV: &str = "POLICYBOUND_THREADS";

/// Parse config text into `--key=value` tokens, in file order.
pub fn parse_config(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
        let key = key.trim();
        if key.is_empty() || key.starts_with('-') || key.contains(char::is_whitespace) {
            return Err(CliError::Usage(format!("config line {}: bad key {key:?}", i + 1)));
        }
        if key == "config" {
            return Err(CliError::Usage(format!("config line {}: config files do not nest", i + 1)));
        }
        out.push(format!("--{key}={}", value.trim()));
    }
    Ok(out)
}

/// Expand any `--config PATH` in `argv` (program name excluded). The subcommand stays
/// first, then the file's flags, then the remaining command-line tokens.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(tok) = it.next() {
        if tok == "--config" {
            let p = it.next().ok_or_else(|| CliError::Usage("--config needs a path".into()))?;
            path = Some(p);
        } else if let Some(p) = tok.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(tok);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Usage(format!("cannot read config {path}: {e}")))?;
    let file_flags = parse_config(&text)?;
    // flags go after the subcommand token if there is one
    let split = usize::from(rest.first().is_some_and(|t| !t.starts_with('-')));
    let mut merged: Vec<String> = rest[..split].to_vec();
    merged.extend(file_flags);
    merged.extend_from_slice(&rest[split..]);
    Ok(merged)
}

/// Worker count: the requested value (or all cores), capped by `POLICYBOUND_THREADS` when set.
pub fn resolve_threads(requested: Option<usize>, env_value: Option<&str>) -> Result<usize> {
    let cap = match env_value.map(str::trim).filter(|v| !v.is_empty()) {
        Some(v) => Some(
            v.parse::<usize>()
                .ok()
                .filter(|&k| k > 0)
                .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?,
        ),
        None => None,
    };
    if requested == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let base = requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    Ok(cap.map_or(base, |c| base.min(c)))
}
