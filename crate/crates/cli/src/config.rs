//! `key=value` config files. Keys are long flag names of the invoked
//! subcommand; the file is merged into the argument list before parsing,
//! and flags given on the command line win.

use std::path::Path;

use clap::Command;

use crate::error::{CliError, CliResult};

pub fn parse_config(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Core(approxbundle::Error::Parse { line: n + 1, msg: "expected key=value".into() }))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[String]) -> Option<String> {
    args.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            args.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    })
}

/// The deepest subcommand named in `args`.
fn invoked(root: &Command, args: &[String]) -> Command {
    let mut cmd = root.clone();
    for a in args.iter().skip(1) {
        if let Some(sub) = cmd.find_subcommand(a) {
            cmd = sub.clone();
        }
    }
    cmd
}

fn given(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
}

/// `args` with every config entry not already present appended as a flag.
pub fn expand_args(root: &Command, args: Vec<String>) -> CliResult<Vec<String>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(Path::new(&path), e))?;
    let entries = parse_config(&text)?;
    let cmd = invoked(root, &args);
    let mut out = args.clone();
    for (key, value) in entries {
        if key == "config" {
            continue;
        }
        let arg = cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| CliError::Usage(format!("{path}: unknown key {key:?} for `{}`", cmd.get_name())))?;
        if given(&args, &key) {
            continue;
        }
        if arg.get_action().takes_values() {
            out.push(format!("--{key}={value}"));
        } else if value == "true" {
            out.push(format!("--{key}"));
        } else if value != "false" {
            return Err(CliError::Usage(format!("{path}: {key} takes true or false, got {value:?}")));
        }
    }
    Ok(out)
}
