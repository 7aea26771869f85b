//! Policy rollouts for evaluation, trajectory probes and the invariance check.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::env::{EnvState, Nav2d};
use crate::error::{Error, Result};
use crate::learner::{uniform_action, PolicyNet};
use crate::safety::{self, SafetyIndexParams};

/// Which action a rollout takes at each step.
pub enum Actor<'a> {
    /// `tanh(mean)` of the policy.
    Deterministic(&'a PolicyNet),
    /// Reparameterized policy sample.
    Stochastic(&'a PolicyNet),
    /// Uniform on `[-1, 1]²`.
    Uniform,
}

/// Per-step safety quantities along one episode. Step `t` refers to the
/// transition `s_t -> s_{t+1}`; `phi_max` and the safe-subset flag are
/// evaluated at `s_{t+1}`, the transition cost is the maximum over hazards.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrajectoryProbe {
    pub phi_max: Vec<f64>,
    pub transition_cost: Vec<f64>,
    pub in_safe_subset: Vec<bool>,
}

impl TrajectoryProbe {
    pub fn len(&self) -> usize {
        self.phi_max.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi_max.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,phi_max,transition_cost,in_safe_subset\n");
        for t in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                t,
                self.phi_max[t],
                self.transition_cost[t],
                u8::from(self.in_safe_subset[t])
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeOutcome {
    pub start: EnvState,
    pub episode_return: f64,
    pub length: usize,
    pub reached_goal: bool,
    /// Steps whose successor has `phi0 > 0` for some hazard.
    pub violation_steps: u64,
    pub probe: TrajectoryProbe,
}

/// Runs one episode from `start` until the goal or the step budget.
pub fn rollout(
    env: &Nav2d,
    params: &SafetyIndexParams,
    actor: &Actor<'_>,
    start: EnvState,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeOutcome> {
    let mut state = start;
    let mut obs = env.observe(&state);
    let mut out = EpisodeOutcome {
        start,
        episode_return: 0.0,
        length: 0,
        reached_goal: false,
        violation_steps: 0,
        probe: TrajectoryProbe::default(),
    };
    loop {
        let action = match actor {
            Actor::Deterministic(p) => p.deterministic_action(obs.as_slice())?,
            Actor::Stochastic(p) => p.sample_action(obs.as_slice(), rng)?.0,
            Actor::Uniform => uniform_action(rng).to_vec(),
        };
        let (next, res) = env.step(&state, [action[0], action[1]]);
        let costs = safety::cost_vector(&res.before, &res.after, params);
        let phis = safety::phi_vector(&res.after, params);
        out.probe.phi_max.push(phis.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        out.probe
            .transition_cost
            .push(costs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        out.probe
            .in_safe_subset
            .push(safety::readings_in_safe_subset(res.after.iter().copied(), params));
        if safety::is_violation(&res.after, params) {
            out.violation_steps += 1;
        }
        out.episode_return += res.reward;
        out.length += 1;
        if res.done {
            out.reached_goal = res.reached_goal;
            return Ok(out);
        }
        state = next;
        obs = res.observation;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub deterministic: bool,
    pub mean_return: f64,
    pub total_violation_steps: u64,
    pub episodes_with_violation: usize,
    pub goal_rate: f64,
    pub mean_length: f64,
    pub total_steps: usize,
    /// Largest safety index seen at any step of any episode.
    pub max_phi: f64,
    /// Fraction of steps whose transition cost exceeds `1e-3`.
    pub positive_cost_fraction: f64,
}

impl EvalReport {
    pub fn from_outcomes(outcomes: &[EpisodeOutcome], deterministic: bool) -> Self {
        let n = outcomes.len();
        let total_steps: usize = outcomes.iter().map(|o| o.length).sum();
        let positive = outcomes
            .iter()
            .flat_map(|o| &o.probe.transition_cost)
            .filter(|&&c| c > 1e-3)
            .count();
        let mean = |f: &dyn Fn(&EpisodeOutcome) -> f64| {
            if n == 0 {
                f64::NAN
            } else {
                outcomes.iter().map(f).sum::<f64>() / n as f64
            }
        };
        EvalReport {
            episodes: n,
            deterministic,
            mean_return: mean(&|o| o.episode_return),
            total_violation_steps: outcomes.iter().map(|o| o.violation_steps).sum(),
            episodes_with_violation: outcomes.iter().filter(|o| o.violation_steps > 0).count(),
            goal_rate: mean(&|o| f64::from(u8::from(o.reached_goal))),
            mean_length: mean(&|o| o.length as f64),
            total_steps,
            max_phi: outcomes
                .iter()
                .flat_map(|o| &o.probe.phi_max)
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
            positive_cost_fraction: if total_steps == 0 {
                0.0
            } else {
                positive as f64 / total_steps as f64
            },
        }
    }
}

/// `episodes` rollouts from the environment's own start distribution, seeded
/// by `seed` alone so repeated calls give identical results.
pub fn evaluate(
    env: &Nav2d,
    params: &SafetyIndexParams,
    actor: &Actor<'_>,
    episodes: usize,
    seed: u64,
) -> Result<(EvalReport, Vec<EpisodeOutcome>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcomes = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let (start, _) = env.reset(params.rest_clearance(), &mut rng)?;
        outcomes.push(rollout(env, params, actor, start, &mut rng)?);
    }
    let deterministic = matches!(actor, Actor::Deterministic(_));
    Ok((EvalReport::from_outcomes(&outcomes, deterministic), outcomes))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub states_tested: usize,
    /// Rollouts with at least one step outside the safe set.
    pub escaping_rollouts: usize,
    pub escape_steps: u64,
    pub first_escape_start: Option<EnvState>,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.escaping_rollouts == 0
    }
}

/// Full-episode rollouts from states drawn from the safe subset at rest in
/// the reset region; any step with `phi0 > 0` counts as an escape.
pub fn check_invariance(
    env: &Nav2d,
    params: &SafetyIndexParams,
    actor: &Actor<'_>,
    n_states: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = InvarianceReport {
        states_tested: n_states,
        escaping_rollouts: 0,
        escape_steps: 0,
        first_escape_start: None,
    };
    for _ in 0..n_states {
        let start = safety::sample_safe_state(env, params, safety::StateDomain::InitialSet, &mut rng)?;
        let out = rollout(env, params, actor, start, &mut rng)?;
        if out.violation_steps > 0 {
            report.escaping_rollouts += 1;
            report.escape_steps += out.violation_steps;
            report.first_escape_start.get_or_insert(start);
        }
    }
    Ok(report)
}
