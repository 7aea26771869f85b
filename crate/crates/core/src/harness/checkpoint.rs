//! Versioned JSON checkpoints.
//!
//! Layout (top-level object):
//! `format` (always `"ssac-checkpoint"`), `version` (currently 1),
//! `config_hash` (see [`RunConfig::hash`]), `config` (the full run config),
//! `counters`, `agent` (every network as `layer_sizes` plus flat row-major
//! `params`, weights before bias per layer), `optimizers` (Adam moments and
//! step counts) and `rng` (the trainer's generator state).

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::learner::{Agent, Counters, Optimizers, Trainer};

pub const FORMAT: &str = "ssac-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub config: RunConfig,
    pub counters: Counters,
    pub agent: Agent,
    pub optimizers: Optimizers,
    pub rng: ChaCha8Rng,
}

impl Checkpoint {
    pub fn capture(trainer: &Trainer, config: &RunConfig) -> Self {
        Checkpoint {
            format: FORMAT.to_string(),
            version: VERSION,
            config_hash: config.hash(),
            config: config.clone(),
            counters: trainer.counters(),
            agent: trainer.agent.clone(),
            optimizers: trainer.optim.clone(),
            rng: trainer.rng().clone(),
        }
    }

    /// Writes through a temporary sibling so a crash never leaves a torn file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let header: Header = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if header.format != FORMAT {
            return Err(Error::Checkpoint(format!("not a checkpoint (format {:?})", header.format)));
        }
        if header.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {VERSION})",
                header.version
            )));
        }
        let ckpt: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        ckpt.check_consistency()?;
        Ok(ckpt)
    }

    fn check_consistency(&self) -> Result<()> {
        if self.config.hash() != self.config_hash {
            return Err(Error::Checkpoint("stored config does not match its hash".into()));
        }
        if self.agent.obs_dim() != self.config.env.obs_dim()
            || self.agent.hazard_count() != self.config.env.hazards.len()
        {
            return Err(Error::Checkpoint(format!(
                "agent expects {} observations and {} hazards, config has {} and {}",
                self.agent.obs_dim(),
                self.agent.hazard_count(),
                self.config.env.obs_dim(),
                self.config.env.hazards.len()
            )));
        }
        Ok(())
    }

    /// Errors unless `config` describes the same environment, safety index and learner.
    pub fn ensure_matches(&self, config: &RunConfig) -> Result<()> {
        if config.hash() != self.config_hash {
            return Err(Error::Checkpoint(format!(
                "checkpoint was trained with config {} but the given config hashes to {}",
                self.config_hash,
                config.hash()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Nav2d;
    use crate::learner::LearnerConfig;

    fn tiny() -> RunConfig {
        RunConfig {
            learner: LearnerConfig {
                hidden_sizes: vec![4],
                batch_size: 8,
                buffer_capacity: 100,
                env_steps_per_iteration: 20,
                gradient_steps_per_iteration: 12,
                warmup_steps: 10,
                iterations: 1,
                ..LearnerConfig::default()
            },
            ..RunConfig::default()
        }
    }

    fn trained(cfg: &RunConfig) -> Trainer {
        let env = Nav2d::new(cfg.env.clone()).unwrap();
        let mut t = Trainer::new(env, cfg.safety_index, cfg.learner.clone(), 4).unwrap();
        t.run_iteration().unwrap();
        t
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let cfg = tiny();
        let ckpt = Checkpoint::capture(&trained(&cfg), &cfg);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(ckpt, back);
        back.ensure_matches(&cfg).unwrap();
    }

    #[test]
    fn mismatched_config_rejected() {
        let cfg = tiny();
        let ckpt = Checkpoint::capture(&trained(&cfg), &cfg);
        let mut other = cfg.clone();
        other.safety_index.k = 2.0;
        assert!(ckpt.ensure_matches(&other).is_err());
    }

    #[test]
    fn wrong_format_or_version_rejected() {
        let cfg = tiny();
        let ckpt = Checkpoint::capture(&trained(&cfg), &cfg);
        let mut v: serde_json::Value = serde_json::to_value(&ckpt).unwrap();
        v["version"] = 2.into();
        assert!(Checkpoint::from_json(&v.to_string()).is_err());
        v["version"] = 1.into();
        v["format"] = "other".into();
        assert!(Checkpoint::from_json(&v.to_string()).is_err());
        v["format"] = FORMAT.into();
        v["config"]["safety_index"]["k"] = 3.0.into();
        assert!(Checkpoint::from_json(&v.to_string()).is_err());
        assert!(Checkpoint::from_json("{").is_err());
    }
}
