//! `key = value` config files.
//!
//! A config file supplies defaults for the flags of one subcommand. Its
//! entries are spliced in as `--key value` right after the subcommand name,
//! so flags given on the command line (which come later) win.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const SUBCOMMANDS: [&str; 6] = ["synth", "featurize", "train", "score", "eval", "igci"];

/// Parses config text into `(key, value)` entries. Keys may use `_` or `-`.
pub fn parse(text: &str, origin: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("{origin}:{}: expected key = value", i + 1)));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(CliError::Usage(format!("{origin}:{}: empty key or value", i + 1)));
        }
        out.push((k.replace('_', "-"), v.to_string()));
    }
    Ok(out)
}

/// Removes `--config FILE` from `args` and splices the file's entries in
/// after the subcommand.
pub fn splice(mut args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy().into_owned();
        if a == "--config" {
            if i + 1 >= args.len() {
                return Err(CliError::Usage("--config needs a file".into()));
            }
            path = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(OsString::from(p));
            args.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let entries = parse(&text, &path.display().to_string())?;
    let at = args
        .iter()
        .position(|a| SUBCOMMANDS.iter().any(|s| a == s))
        .map_or(args.len(), |p| p + 1);
    let flags = entries
        .into_iter()
        .flat_map(|(k, v)| [OsString::from(format!("--{k}")), OsString::from(v)]);
    args.splice(at..at, flags);
    Ok(args)
}

/// Renders a command's arguments as a config file that reproduces the run.
pub fn render<T: Serialize>(command: &str, args: &T) -> CliResult<String> {
    let value = serde_json::to_value(args).map_err(|e| CliError::Data(e.to_string()))?;
    let mut out = format!("# cepairs {command}\n");
    if let serde_json::Value::Object(map) = value {
        for (k, v) in map {
            let text = match v {
                serde_json::Value::Null => continue,
                serde_json::Value::String(s) => s,
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|x| match x {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join(","),
                other => other.to_string(),
            };
            let _ = writeln!(out, "{k} = {text}");
        }
    }
    Ok(out)
}

pub fn write_resolved<T: Serialize>(path: &Path, command: &str, args: &T) -> CliResult {
    fs::write(path, render(command, args)?).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_comments_and_underscores() {
        let e = parse("# top\nn_pairs = 10  # trailing\n\nseed=3\n", "c").unwrap();
        assert_eq!(e, vec![("n-pairs".into(), "10".into()), ("seed".into(), "3".into())]);
        assert!(parse("novalue\n", "c").is_err());
        assert!(parse("k =\n", "c").is_err());
    }

    #[test]
    fn splices_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.conf");
        fs::write(&p, "seed = 4\n").unwrap();
        let args = os(&["cepairs", "--jobs", "2", "synth", "--config", p.to_str().unwrap(), "--seed", "9"]);
        let got = splice(args).unwrap();
        assert_eq!(got, os(&["cepairs", "--jobs", "2", "synth", "--seed", "4", "--seed", "9"]));
    }
}
