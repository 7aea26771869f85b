//! Run configuration: a sectioned TOML file plus `section.key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::learner::LearnerConfig;
use crate::safety::SafetyIndexParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Deterministic evaluation every this many iterations; 0 disables it.
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Checkpoint every this many iterations; 0 keeps only the final one.
    pub checkpoint_interval: usize,
    /// States sampled by the pre-training feasibility check.
    pub feasibility_states: usize,
    /// Per-axis resolution of the feasibility action grid.
    pub feasibility_grid: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            eval_interval: 0,
            eval_episodes: 10,
            checkpoint_interval: 50,
            feasibility_states: 10_000,
            feasibility_grid: 21,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub safety_index: SafetyIndexParams,
    pub learner: LearnerConfig,
    pub run: RunSection,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.safety_index.validate()?;
        self.learner.validate()?;
        if self.run.feasibility_states == 0 {
            return Err(Error::Config("run.feasibility_states must be positive".into()));
        }
        if self.run.feasibility_grid < 3 {
            return Err(Error::Config("run.feasibility_grid must be at least 3".into()));
        }
        Ok(())
    }

    /// Parses and validates `text`. `origin` names the source in messages.
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, origin, &[])
    }

    pub fn from_toml_with_overrides(text: &str, origin: &str, overrides: &[String]) -> Result<Self> {
        let parsed: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        let cfg = if overrides.is_empty() {
            parsed
        } else {
            // overrides land on the fully defaulted config so nested keys can be set singly
            let mut table = toml::Table::try_from(&parsed).expect("run config is always representable");
            for o in overrides {
                apply_override(&mut table, o)?;
            }
            toml::Value::Table(table)
                .try_into()
                .map_err(|e| Error::Config(format!("override: {e}")))?
        };
        cfg.validate().map_err(|e| locate(e, text, origin, overrides))?;
        Ok(cfg)
    }

    /// Reads `path`, or starts from defaults when `path` is `None`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Self::from_toml_with_overrides(&text, &p.display().to_string(), overrides)
            }
            None => Self::from_toml_with_overrides("", "defaults", overrides),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always representable")
    }

    /// SHA-256 over everything that shapes the agent and its training data
    /// (environment, safety index, learner); the run section is excluded.
    pub fn hash(&self) -> String {
        #[derive(Serialize)]
        struct Hashed<'a> {
            env: &'a EnvConfig,
            safety_index: &'a SafetyIndexParams,
            learner: &'a LearnerConfig,
        }
        let canonical = serde_json::to_string(&Hashed {
            env: &self.env,
            safety_index: &self.safety_index,
            learner: &self.learner,
        })
        .expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Sets `a.b.c = value` in `table`. The value is read as a TOML literal and
/// falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not of the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let path: Vec<&str> = key.split('.').collect();
    if path.len() < 2 || path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key {key:?} must be section.key")));
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut node = table;
    for part in &path[..path.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {part:?} is not a table")))?;
    }
    node.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

/// Attaches the source line of the offending key to a validation error
/// whose message starts with `section.key`.
fn locate(err: Error, text: &str, origin: &str, overrides: &[String]) -> Error {
    let Error::Config(msg) = err else { return err };
    let Some(key) = msg.split_whitespace().next().filter(|k| k.contains('.')) else {
        return Error::Config(format!("{origin}: {msg}"));
    };
    if overrides
        .iter()
        .any(|o| o.split_once('=').is_some_and(|(k, _)| k.trim() == key))
    {
        return Error::Config(format!("override {key}: {msg}"));
    }
    match key_line(text, key) {
        Some(line) => Error::Config(format!("{origin}:{line}: {msg}")),
        None => Error::Config(format!("{origin}: {msg} (default value)")),
    }
}

/// 1-based line on which `section.key` is assigned, if it is.
fn key_line(text: &str, dotted: &str) -> Option<usize> {
    let (section, key) = dotted.split_once('.')?;
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if let Some(h) = l.strip_prefix('[').and_then(|h| h.strip_suffix(']')) {
            current = h.trim().to_string();
        } else if current == section {
            if let Some((k, _)) = l.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}
