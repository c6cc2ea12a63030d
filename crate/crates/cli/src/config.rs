//! `key = value` configuration files.
//!
//! A config file is expanded into command-line flags placed before the user's
//! own flags. Every flag is declared with last-occurrence-wins semantics, so
//! explicit flags override file values.

use std::fs;
use std::path::Path;

/// Keys accepted in a config file (flag names without the leading `--`).
const KEYS: &[&str] = &[
    "k",
    "eps",
    "d",
    "n",
    "trials",
    "seed",
    "threads",
    "out",
    "format",
    "mechanism-file",
    "p",
    "kind",
    "estimator",
    "radius",
    "resolution",
    "mc",
];

/// Reads `path` and returns the equivalent flag list.
pub fn config_to_flags(path: &Path) -> Result<Vec<String>, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut flags = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key = value", path.display(), lineno + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if !KEYS.contains(&key.as_str()) {
            return Err(format!(
                "{}:{}: unknown key {key:?}",
                path.display(),
                lineno + 1
            ));
        }
        if key == "mc" {
            match value {
                "true" | "1" | "yes" => flags.push("--mc".into()),
                "false" | "0" | "no" => {}
                other => {
                    return Err(format!(
                        "{}:{}: mc must be true or false, got {other:?}",
                        path.display(),
                        lineno + 1
                    ))
                }
            }
            continue;
        }
        flags.push(format!("--{key}"));
        flags.push(value.to_string());
    }
    Ok(flags)
}

/// Finds `--config <path>` or `--config=<path>` among the arguments.
pub fn find_config(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Inserts the config-file flags right after the subcommand name.
pub fn expand_args(args: Vec<String>) -> Result<Vec<String>, String> {
    let Some(path) = find_config(&args) else {
        return Ok(args);
    };
    if args.len() < 2 {
        return Ok(args);
    }
    let flags = config_to_flags(Path::new(&path))?;
    let mut out = Vec::with_capacity(args.len() + flags.len());
    out.extend_from_slice(&args[..2]);
    out.extend(flags);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}
