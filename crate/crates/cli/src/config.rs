//! `--config` files: flat TOML whose keys are long flag names of the
//! chosen subcommand. Values from the file fill flags not given on the
//! command line.

use std::ffi::OsString;
use std::path::Path;

use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Command};

use crate::error::{CliError, Result};

fn value_to_string(key: &str, v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Array(items) => items
            .iter()
            .map(|x| value_to_string(key, x))
            .collect::<Result<Vec<_>>>()?
            .join(","),
        other => {
            return Err(CliError::Usage(format!(
                "config key {key:?}: unsupported value {other}"
            )))
        }
    })
}

/// Extra arguments contributed by the config file at `path` for
/// subcommand `sub`, skipping flags already set on the command line.
pub fn config_args(path: &Path, sub: &Command, matches: &ArgMatches) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (raw_key, value) in &table {
        let key = raw_key.replace('_', "-");
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && key != "config")
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "{}: unknown key {raw_key:?} for subcommand {}",
                    path.display(),
                    sub.get_name()
                ))
            })?;
        let from_cli = matches!(
            matches.value_source(arg.get_id().as_str()),
            Some(ValueSource::CommandLine) | Some(ValueSource::EnvVariable)
        );
        if from_cli {
            continue;
        }
        let flag = OsString::from(format!("--{key}"));
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value {
                toml::Value::Boolean(true) => out.push(flag),
                toml::Value::Boolean(false) => {}
                _ => {
                    return Err(CliError::Usage(format!(
                        "config key {raw_key:?} expects true or false"
                    )))
                }
            }
        } else {
            out.push(flag);
            out.push(OsString::from(value_to_string(raw_key, value)?));
        }
    }
    Ok(out)
}
