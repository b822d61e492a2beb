//! Run configuration files.
//!
//! A config is TOML with two sections:
//!
//! ```toml
//! [run]
//! env = "cartpole"        # cartpole | mountaincar | gridmaze
//! variant = "base"        # base | bdist | cross | surr | mut | bdist+cross
//! seed = 1
//! maze_file = "maze.txt"  # optional custom maze
//!
//! [bnet]
//! max_training_steps = 50000
//! behavior_search.iterations = 1000
//! ```
//!
//! `[bnet]` keys override the defaults for the chosen environment and
//! variant; `bnet default-config` prints every key.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use bnet::env::{EnvKind, MazeLayout};
use bnet::{BnetConfig, Variant};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::{CliError, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    maze_file: Option<PathBuf>,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub env: Option<String>,
    pub variant: Option<String>,
    pub seed: Option<u64>,
    /// `key=value` assignments into the `[bnet]` section, e.g.
    /// `critic.steps=200`.
    pub set: Vec<String>,
}

/// Fully resolved run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub variant: Variant,
    pub maze_file: Option<PathBuf>,
    pub bnet: BnetConfig,
}

impl RunConfig {
    pub fn env(&self) -> EnvKind {
        self.bnet.env
    }

    pub fn seed(&self) -> u64 {
        self.bnet.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.bnet.seed = seed;
        c
    }

    /// Canonical TOML text of the whole configuration.
    pub fn to_toml(&self) -> Result<String> {
        let mut root = Table::new();
        let run = RunSection {
            env: Some(self.env().name().to_string()),
            variant: Some(self.variant.name().to_string()),
            seed: Some(self.seed()),
            maze_file: self.maze_file.clone(),
        };
        root.insert("run".into(), Value::try_from(run)?);
        root.insert("bnet".into(), Value::try_from(&self.bnet)?);
        Ok(toml::to_string(&root)?)
    }

    /// Hex SHA-256 of [`RunConfig::to_toml`].
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(self.to_toml()?.as_bytes()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Loads a config file (optional) and applies command-line overrides.
pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<RunConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    let base_dir = path.and_then(Path::parent).map(Path::to_path_buf);
    parse(&text, ov, base_dir.as_deref())
}

/// Parses config text. Relative `maze_file` paths resolve against `base_dir`.
pub fn parse(text: &str, ov: &Overrides, base_dir: Option<&Path>) -> Result<RunConfig> {
    let mut root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
    let run: RunSection = match root.remove("run") {
        Some(v) => v
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("[run]: {}", e.message())))?,
        None => RunSection::default(),
    };
    let user = match root.remove("bnet") {
        Some(Value::Table(t)) => t,
        Some(_) => return Err(CliError::Config("`bnet` must be a section".into())),
        None => Table::new(),
    };
    if let Some(key) = root.keys().next() {
        return Err(CliError::Config(format!(
            "unknown key `{key}` (expected sections [run] and [bnet])"
        )));
    }

    let env = ov.env.as_deref().or(run.env.as_deref()).unwrap_or("cartpole");
    let env = EnvKind::from_str(env).map_err(|e| CliError::Config(e.to_string()))?;
    let variant = ov.variant.as_deref().or(run.variant.as_deref()).unwrap_or("base");
    let variant = Variant::from_str(variant).map_err(|e| CliError::Config(e.to_string()))?;

    let defaults = BnetConfig::new(env, variant);
    let mut table = Table::try_from(&defaults)?;
    merge(&mut table, user, "bnet")?;
    for assignment in &ov.set {
        apply_assignment(&mut table, assignment)?;
    }
    if let Some(seed) = ov.seed.or(run.seed) {
        table.insert("seed".into(), seed_value(seed)?);
    }
    let mut bnet: BnetConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("[bnet]: {}", e.message())))?;
    if bnet.env != env {
        return Err(CliError::Config(format!(
            "[bnet] env `{}` contradicts [run] env `{env}`",
            bnet.env
        )));
    }

    let maze_file = run.maze_file.map(|p| match base_dir {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    });
    if let Some(p) = &maze_file {
        if env != EnvKind::GridMaze {
            return Err(CliError::Config("`run.maze_file` only applies to gridmaze".into()));
        }
        bnet.maze_layout = Some(MazeLayout::load(p)?);
    }
    bnet.validate()?;
    Ok(RunConfig {
        variant,
        maze_file,
        bnet,
    })
}

fn seed_value(seed: u64) -> Result<Value> {
    i64::try_from(seed)
        .map(Value::Integer)
        .map_err(|_| CliError::Config(format!("seed {seed} exceeds {}", i64::MAX)))
}

/// Recursively overlays `user` onto `base`. Unknown keys are rejected later
/// by deserialization, which names them.
fn merge(base: &mut Table, user: Table, prefix: &str) -> Result<()> {
    for (key, value) in user {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(u)) => merge(b, u, &format!("{prefix}.{key}"))?,
            (Some(Value::Table(_)), _) => {
                return Err(CliError::Config(format!("`{prefix}.{key}` must be a section")));
            }
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
    Ok(())
}

/// Applies `a.b.c=value`. The value is read as a TOML value, falling back to
/// a plain string.
fn apply_assignment(table: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key `{key}`")));
    }
    let mut cursor = table;
    for part in &parts[..parts.len() - 1] {
        cursor = match cursor.get_mut(*part) {
            Some(Value::Table(t)) => t,
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        };
    }
    cursor.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Default configuration text for an environment and variant.
pub fn default_toml(env: EnvKind, variant: Variant) -> Result<String> {
    RunConfig {
        variant,
        maze_file: None,
        bnet: BnetConfig::new(env, variant),
    }
    .to_toml()
}
