//! What the `train`, `eval` and `check` subcommands do, minus argument parsing.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::check::{gradient_suites, SuiteResult};
use super::checkpoint::Checkpoint;
use super::config::RunConfig;
use super::eval::{check_invariance, evaluate, Actor, EpisodeOutcome, EvalReport, InvarianceReport};
use super::metrics::{MetricsRow, MetricsWriter};
use crate::env::Nav2d;
use crate::error::{Error, Result};
use crate::learner::Trainer;
use crate::safety::{check_feasibility, FeasibilityReport};

/// Seeds for auxiliary streams are derived from the run seed so they never
/// coincide with the trainer's own stream.
const FEASIBILITY_STREAM: u64 = 0x6665_6173;
const EVAL_STREAM: u64 = 0x6576_616c;

pub const EVAL_HEADER: &str = "iteration,env_steps,episodes,mean_return,violation_steps,goal_rate,max_phi";

#[derive(Clone, Debug, Serialize)]
pub struct TrainSummary {
    pub out_dir: PathBuf,
    pub feasibility: FeasibilityReport,
    pub iterations: u64,
    pub env_steps: u64,
    pub cumulative_violations: u64,
    pub final_checkpoint: PathBuf,
}

pub fn feasibility(config: &RunConfig) -> Result<FeasibilityReport> {
    let env = Nav2d::new(config.env.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.run.seed ^ FEASIBILITY_STREAM);
    check_feasibility(
        &env,
        &config.safety_index,
        config.run.feasibility_states,
        config.run.feasibility_grid,
        &mut rng,
    )
}

/// Full training run into `config.run.out_dir`.
///
/// Writes `config.toml`, `feasibility.json`, `metrics.csv`, optional
/// `eval.csv`, periodic `checkpoints/iter_NNNNNN.json` and `checkpoint.json`.
pub fn train(config: &RunConfig, allow_infeasible: bool) -> Result<TrainSummary> {
    let out = config.run.out_dir.clone();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write(&out.join("config.toml"), &config.to_toml())?;

    let report = feasibility(config)?;
    write(
        &out.join("feasibility.json"),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    if !report.passed() && !allow_infeasible {
        return Err(Error::Config(format!(
            "safety index is infeasible: {} of {} sampled safe states have no control-safe action \
             (worst state {:?}); pass --allow-infeasible to train anyway",
            report.states_with_empty_control_safe_set, report.states_tested, report.worst_state
        )));
    }

    let env = Nav2d::new(config.env.clone())?;
    let mut trainer = Trainer::new(env.clone(), config.safety_index, config.learner.clone(), config.run.seed)?;
    let mut metrics = MetricsWriter::create(&out.join("metrics.csv"))?;
    let mut eval_log = String::from(EVAL_HEADER);
    eval_log.push('\n');
    let ckpt_dir = out.join("checkpoints");
    while !trainer.is_finished() {
        let row: MetricsRow = trainer.run_iteration()?;
        metrics.append(&row)?;
        let it = row.iteration as usize;
        if config.run.eval_interval > 0 && it % config.run.eval_interval == 0 {
            let (rep, _) = evaluate(
                &env,
                &config.safety_index,
                &Actor::Deterministic(&trainer.agent.policy),
                config.run.eval_episodes,
                config.run.seed ^ EVAL_STREAM,
            )?;
            let _ = writeln!(
                eval_log,
                "{},{},{},{},{},{},{}",
                row.iteration,
                row.env_steps,
                rep.episodes,
                rep.mean_return,
                rep.total_violation_steps,
                rep.goal_rate,
                rep.max_phi
            );
            write(&out.join("eval.csv"), &eval_log)?;
        }
        if config.run.checkpoint_interval > 0 && it % config.run.checkpoint_interval == 0 && !trainer.is_finished() {
            fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
            Checkpoint::capture(&trainer, config).save(&ckpt_dir.join(format!("iter_{it:06}.json")))?;
        }
    }
    let final_checkpoint = out.join("checkpoint.json");
    Checkpoint::capture(&trainer, config).save(&final_checkpoint)?;
    let c = trainer.counters();
    Ok(TrainSummary {
        out_dir: out,
        feasibility: report,
        iterations: c.iteration,
        env_steps: c.env_steps,
        cumulative_violations: c.cumulative_violations,
        final_checkpoint,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalOutput {
    pub checkpoint: PathBuf,
    pub config_hash: String,
    pub seed: u64,
    pub report: EvalReport,
    #[serde(skip)]
    pub outcomes: Vec<EpisodeOutcome>,
}

/// Evaluates a checkpoint. When `config` is given it must match the one the
/// checkpoint was trained with. Probe files go to `probe_dir` when set.
pub fn eval(
    checkpoint: &Path,
    config: Option<&RunConfig>,
    episodes: usize,
    deterministic: bool,
    seed: u64,
    probe_dir: Option<&Path>,
) -> Result<EvalOutput> {
    let ckpt = Checkpoint::load(checkpoint)?;
    if let Some(cfg) = config {
        ckpt.ensure_matches(cfg)?;
    }
    let env = Nav2d::new(ckpt.config.env.clone())?;
    let policy = &ckpt.agent.policy;
    let actor = if deterministic {
        Actor::Deterministic(policy)
    } else {
        Actor::Stochastic(policy)
    };
    let (report, outcomes) = evaluate(&env, &ckpt.config.safety_index, &actor, episodes, seed)?;
    if let Some(dir) = probe_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, o) in outcomes.iter().enumerate() {
            o.probe.write_csv(&dir.join(format!("probe_{i:04}.csv")))?;
        }
    }
    Ok(EvalOutput {
        checkpoint: checkpoint.to_path_buf(),
        config_hash: ckpt.config_hash,
        seed,
        report,
        outcomes,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GradientReport {
    pub seeds: Vec<u64>,
    pub hidden_sizes: Vec<usize>,
    pub suites: Vec<SuiteResult>,
}

impl GradientReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }

    /// Worst error per suite over all seeds.
    pub fn worst(&self) -> Vec<(&'static str, f64)> {
        let mut out: Vec<(&'static str, f64)> = Vec::new();
        for s in &self.suites {
            match out.iter_mut().find(|(n, _)| *n == s.name) {
                Some(entry) => entry.1 = entry.1.max(s.max_relative_error),
                None => out.push((s.name, s.max_relative_error)),
            }
        }
        out
    }
}

/// Gradient suites for `seeds` on `[obs, hidden..., out]` networks.
pub fn check_gradients(config: &RunConfig, seeds: &[u64], hidden: &[usize], rows: usize) -> Result<GradientReport> {
    let env = Nav2d::new(config.env.clone())?;
    let mut suites = Vec::new();
    for &s in seeds {
        suites.extend(gradient_suites(&env, &config.safety_index, hidden, rows, s)?);
    }
    Ok(GradientReport {
        seeds: seeds.to_vec(),
        hidden_sizes: hidden.to_vec(),
        suites,
    })
}

/// Forward-invariance rollouts from `n_states` safe states. Without a
/// checkpoint the actions are uniform random (a negative control). A given
/// config must match the checkpoint's.
pub fn invariance(
    config: Option<&RunConfig>,
    checkpoint: Option<&Path>,
    n_states: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    match checkpoint {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            if let Some(cfg) = config {
                ckpt.ensure_matches(cfg)?;
            }
            let env = Nav2d::new(ckpt.config.env.clone())?;
            let actor = Actor::Deterministic(&ckpt.agent.policy);
            check_invariance(&env, &ckpt.config.safety_index, &actor, n_states, seed)
        }
        None => {
            let default = RunConfig::default();
            let cfg = config.unwrap_or(&default);
            let env = Nav2d::new(cfg.env.clone())?;
            check_invariance(&env, &cfg.safety_index, &Actor::Uniform, n_states, seed)
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
