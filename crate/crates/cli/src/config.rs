//! TOML run configuration. Top-level keys `seed`, `format` and `output`
//! preset the global flags; a table per command (`[typicality]`,
//! `[sqmn.posterior]`, …) presets that command's flags under their long
//! names. Flags given on the command line win.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{usage, CliError};
use crate::output::Format;

/// Environment variable read for the default seed.
pub const SEED_ENV: &str = "SQM_SEED";

pub const COMMAND_TABLES: [&str; 6] = ["reproduce", "typicality", "sqmn", "epr", "flag", "twostep"];

#[derive(Debug, Default)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    tables: toml::Table,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Globals {
    seed: Option<u64>,
    format: Option<Format>,
    output: Option<PathBuf>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut table: toml::Table = text.parse().map_err(|e| usage(format!("config: {e}")))?;
        let mut tables = toml::Table::new();
        for name in COMMAND_TABLES {
            if let Some(v) = table.remove(name) {
                if !v.is_table() {
                    return Err(usage(format!("config: `{name}` must be a table")));
                }
                tables.insert(name.to_string(), v);
            }
        }
        let g: Globals = toml::Value::Table(table).try_into().map_err(|e| usage(format!("config: {e}")))?;
        Ok(Self { seed: g.seed, format: g.format, output: g.output, tables })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The table at a dotted path such as `sqmn.posterior`.
    fn table(&self, path: &str) -> Option<&toml::Table> {
        let mut parts = path.split('.');
        let mut t = self.tables.get(parts.next()?)?.as_table()?;
        for p in parts {
            t = t.get(p)?.as_table()?;
        }
        Some(t)
    }

    /// Fills the unset fields of `cli` from the table at `path`. Nested
    /// tables are skipped, so `[sqmn]` may hold per-subcommand tables.
    pub fn merge<T: Serialize + DeserializeOwned>(&self, path: &str, cli: &T) -> Result<T, CliError> {
        let mut v = serde_json::to_value(cli)?;
        if let (Some(t), Value::Object(obj)) = (self.table(path), &mut v) {
            for (k, val) in t {
                if val.is_table() {
                    continue;
                }
                let slot = obj.entry(k.clone()).or_insert(Value::Null);
                if slot.is_null() {
                    *slot = serde_json::to_value(val)?;
                }
            }
        }
        serde_json::from_value(v).map_err(|e| usage(format!("config [{path}]: {e}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum SeedSource {
    Cli,
    Config,
    Env,
    Default,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SeedChoice {
    pub seed: u64,
    pub seed_source: SeedSource,
    /// Raw value of the environment variable, when set.
    pub env_seed: Option<String>,
}

pub fn resolve_seed(cli: Option<u64>, file: Option<u64>, env: Option<String>, default: u64) -> Result<SeedChoice, CliError> {
    let parsed = match &env {
        Some(s) => Some(s.trim().parse::<u64>().map_err(|_| usage(format!("{SEED_ENV}={s} is not a seed")))?),
        None => None,
    };
    let (seed, seed_source) = match (cli, file, parsed) {
        (Some(s), _, _) => (s, SeedSource::Cli),
        (None, Some(s), _) => (s, SeedSource::Config),
        (None, None, Some(s)) => (s, SeedSource::Env),
        _ => (default, SeedSource::Default),
    };
    Ok(SeedChoice { seed, seed_source, env_seed: env })
}
