//! Command-line entry point.

pub mod args;
mod commands;
pub mod plot;

use std::ffi::OsString;
use std::path::Path;

use clap::{CommandFactory, FromArgMatches};

use crate::error::{Error, Result};
use crate::fsutil::read_to_string;

pub use args::{Cli, Command};

/// Parses `argv` (program name first) and runs the command. Returns 0 on
/// success, 2 for usage errors and 1 for any other failure.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match parse(&argv) {
        Ok(cli) => cli,
        Err(ParseFailure::Usage(e)) => {
            let _ = e.print();
            return e.exit_code();
        }
        Err(ParseFailure::Config(e)) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match commands::execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

enum ParseFailure {
    Usage(clap::Error),
    Config(Error),
}

/// Flags win over the config file, which wins over `IRREGTS_*` variables.
/// File entries go in ahead of the user's flags so a repeated flag overrides
/// them.
fn parse(argv: &[OsString]) -> std::result::Result<Cli, ParseFailure> {
    let command = Cli::command();
    let mut merged = argv.to_vec();
    if let (Some(sub), Some(path)) = (argv.get(1).and_then(|s| s.to_str()), config_path(argv)) {
        if let Some(sub_cmd) = command.find_subcommand(sub) {
            let injected = config_flags(Path::new(&path), sub_cmd).map_err(ParseFailure::Config)?;
            merged = argv[..2].to_vec();
            merged.extend(injected.into_iter().map(OsString::from));
            merged.extend(argv[2..].iter().cloned());
        }
    }
    let matches = command.try_get_matches_from(merged).map_err(ParseFailure::Usage)?;
    Cli::from_arg_matches(&matches).map_err(ParseFailure::Usage)
}

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(2);
    let mut found = None;
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            found = it.next().cloned();
        } else if let Some(v) = s.strip_prefix("--config=") {
            found = Some(OsString::from(v));
        }
    }
    found
}

/// Reads a flat TOML or JSON table whose keys are flag names (`-` or `_`)
/// and turns it into `--flag value` pairs. Unknown keys are rejected.
fn config_flags(path: &Path, cmd: &clap::Command) -> Result<Vec<String>> {
    let text = read_to_string(path)?;
    let table: serde_json::Map<String, serde_json::Value> = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        let value: toml::Value = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        match serde_json::to_value(value)? {
            serde_json::Value::Object(m) => m,
            _ => return Err(Error::Config(format!("{} is not a table", path.display()))),
        }
    };
    let mut out = Vec::new();
    for (key, value) in table {
        let long = key.replace('_', "-");
        let known = cmd
            .get_arguments()
            .any(|a| a.get_long() == Some(long.as_str()) && long != "config");
        if !known {
            return Err(Error::Config(format!(
                "unknown key {key:?} in {} for {}",
                path.display(),
                cmd.get_name()
            )));
        }
        out.push(format!("--{long}"));
        out.push(config_value(&key, &value)?);
    }
    Ok(out)
}

fn config_value(key: &str, value: &serde_json::Value) -> Result<String> {
    use serde_json::Value;
    match value {
        Value::String(s) => Ok(s.clone()),
        Value::Bool(b) => Ok(if *b { "on" } else { "off" }.into()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Array(items) => items
            .iter()
            .map(|v| match v {
                Value::Array(_) | Value::Object(_) | Value::Null => {
                    Err(Error::Config(format!("key {key:?} holds a nested value")))
                }
                other => config_value(key, other),
            })
            .collect::<Result<Vec<_>>>()
            .map(|v| v.join(",")),
        _ => Err(Error::Config(format!("key {key:?} must be a scalar or a list"))),
    }
}
