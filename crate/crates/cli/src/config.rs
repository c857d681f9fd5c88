//! Configuration file loading.
//!
//! A config is one TOML file. Top-level keys:
//!
//! ```toml
//! seed = 7                 # required
//! output = "result.json"   # required
//! format = "json"          # json (default) or csv
//! command = "bounds"       # optional; must match the subcommand when present
//!
//! [bounds]                 # parameter block named after the command
//! ...
//! ```
//!
//! Block names use underscores (`estimate_rho`, `rate_scan`). Any leaf may be
//! overridden with `--set dotted.key=value`, where `value` is TOML syntax and
//! falls back to a bare string.

use std::path::{Path, PathBuf};

use hdclt_core::{Error, OutputFormat};
use serde::de::DeserializeOwned;
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

pub const BLOCKS: [&str; 7] = [
    "simulate",
    "bounds",
    "estimate_rho",
    "bootstrap",
    "rate_scan",
    "nazarov",
    "smoothmax",
];

const TOP_LEVEL: [&str; 4] = ["command", "seed", "output", "format"];

#[derive(Debug)]
pub struct Config {
    pub seed: u64,
    pub output: PathBuf,
    pub format: OutputFormat,
    /// Name of the command block, e.g. `estimate_rho`.
    pub block_name: &'static str,
    pub block: Table,
    /// The whole resolved file, echoed into every report.
    pub echo: serde_json::Value,
}

impl Config {
    pub fn load(path: &Path, command: &str, overrides: &[String]) -> CliResult<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut root: Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::config("<file>", format!("{}: {}", path.display(), e.message())))?;
        for spec in overrides {
            apply_override(&mut root, spec)?;
        }
        Config::resolve(root, command)
    }

    pub fn resolve(mut root: Table, command: &str) -> CliResult<Config> {
        let block_name = BLOCKS
            .iter()
            .copied()
            .find(|b| *b == command.replace('-', "_"))
            .ok_or_else(|| CliError::config("command", format!("unknown command `{command}`")))?;
        if let Some(declared) = root.get("command") {
            if declared.as_str() != Some(command) {
                return Err(CliError::config("command", format!("file declares {declared} but `{command}` was invoked")));
            }
        }
        root.insert("command".into(), Value::String(command.into()));
        Config::from_table(&root, block_name)
    }

    fn from_table(root: &Table, block_name: &'static str) -> CliResult<Config> {
        for key in root.keys() {
            if !TOP_LEVEL.contains(&key.as_str()) && !BLOCKS.contains(&key.as_str()) {
                return Err(CliError::config(key.as_str(), "unknown top-level key"));
            }
        }
        let seed = match root.get("seed") {
            None => return Err(CliError::config("seed", "required; there is no default seed")),
            Some(Value::Integer(s)) if *s >= 0 => *s as u64,
            Some(other) => return Err(CliError::config("seed", format!("must be a nonnegative integer, got {other}"))),
        };
        let output = match root.get("output") {
            Some(Value::String(s)) if !s.is_empty() => PathBuf::from(s),
            Some(_) => return Err(CliError::config("output", "must be a nonempty path string")),
            None => return Err(CliError::config("output", "required")),
        };
        let format = match root.get("format") {
            None => OutputFormat::Json,
            Some(Value::String(s)) => s.parse().map_err(|_| CliError::config("format", format!("expected json or csv, got `{s}`")))?,
            Some(other) => return Err(CliError::config("format", format!("expected a string, got {other}"))),
        };
        let block = match root.get(block_name) {
            Some(Value::Table(t)) => t.clone(),
            Some(_) => return Err(CliError::config(block_name, "must be a table")),
            None => return Err(CliError::config(block_name, "required parameter block is missing")),
        };
        let echo = serde_json::to_value(root).map_err(|e| CliError::config("<file>", e.to_string()))?;
        Ok(Config {
            seed,
            output,
            format,
            block_name,
            block,
            echo,
        })
    }

    /// Deserializes the command block.
    pub fn parse_block<T: DeserializeOwned>(&self) -> CliResult<T> {
        Value::Table(self.block.clone())
            .try_into()
            .map_err(|e: toml::de::Error| CliError::config(self.block_name, e.message().to_string()))
    }
}

/// Sets `dotted.key` to `value`, creating intermediate tables.
pub fn apply_override(root: &mut Table, spec: &str) -> CliResult<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::config(spec, "override must have the form key=value"))?;
    let key = key.trim();
    let path: Vec<&str> = key.split('.').map(str::trim).collect();
    if path.iter().any(|s| s.is_empty()) {
        return Err(CliError::config(key, "empty path segment"));
    }
    let (last, parents) = path.split_last().expect("split yields at least one segment");
    let mut table = root;
    for (depth, seg) in parents.iter().enumerate() {
        let entry = table
            .entry(seg.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(path[..=depth].join("."), "is not a table"))?;
    }
    table.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}
