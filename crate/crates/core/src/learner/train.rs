use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::losses::{self, Constraint};
use super::{standard_normal, Agent, LearnerConfig, MultiplierMode, ReplayBuffer, Transition};
use crate::env::{EnvState, Nav2d, Observation, StepResult, ACTION_DIM};
use crate::error::{Error, Result};
use crate::harness::metrics::MetricsRow;
use crate::nn::{Adam, LinearSchedule};
use crate::safety::{self, SafetyIndexParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimizers {
    pub policy: Adam,
    pub critics: [Adam; 2],
    pub safety_critic: Adam,
    pub multiplier: Adam,
    pub alpha: Adam,
}

impl Optimizers {
    /// Each schedule anneals over the number of updates its network receives
    /// within the configured horizon.
    pub fn new(agent: &Agent, config: &LearnerConfig) -> Self {
        let horizon = config.lr_horizon.unwrap_or(config.total_gradient_steps()).max(1);
        let sched = |r: super::Rate, every: u64| LinearSchedule::new(r.start, r.end, (horizon / every).max(1));
        Optimizers {
            policy: Adam::new(agent.policy.net.num_params(), sched(config.actor_lr, config.m_pi)),
            critics: [
                Adam::new(agent.critics[0].num_params(), sched(config.critic_lr, 1)),
                Adam::new(agent.critics[1].num_params(), sched(config.critic_lr, 1)),
            ],
            safety_critic: Adam::new(agent.safety_critic.num_params(), sched(config.critic_lr, 1)),
            multiplier: Adam::new(agent.multiplier.net.num_params(), sched(config.multiplier_lr, config.m_lambda)),
            alpha: Adam::new(1, sched(config.alpha_lr, config.m_pi)),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub iteration: u64,
    pub env_steps: u64,
    pub grad_steps: u64,
    pub policy_updates: u64,
    pub multiplier_updates: u64,
    pub episodes: u64,
    pub cumulative_violations: u64,
}

/// Builds the replay record for one observed step.
///
/// Costs come from the `(d, ḋ)` pairs carried by the two observations, never
/// from a dynamics model.
pub fn make_transition(
    obs: &Observation,
    action: [f64; 2],
    result: &StepResult,
    params: &SafetyIndexParams,
) -> Transition {
    let phis: Vec<f64> = obs.hazards().map(|r| safety::phi_of(&r, params)).collect();
    let costs = phis
        .iter()
        .zip(result.observation.hazards())
        .map(|(&p, r)| safety::transition_cost(p, safety::phi_of(&r, params), params.eta))
        .collect();
    Transition {
        observation: obs.0.clone(),
        action,
        reward: result.reward,
        costs,
        phis,
        next_observation: result.observation.0.clone(),
        done: result.reached_goal,
    }
}

pub fn uniform_action<R: Rng + ?Sized>(rng: &mut R) -> [f64; 2] {
    [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)]
}

/// Single-process driver for the delayed-update actor-critic loop.
pub struct Trainer {
    env: Nav2d,
    safety: SafetyIndexParams,
    config: LearnerConfig,
    pub agent: Agent,
    pub optim: Optimizers,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    state: EnvState,
    obs: Observation,
    episode_return: f64,
    episode_violations: u64,
    counters: Counters,
    last_batch_obs: Option<Array2<f64>>,
}

impl Trainer {
    pub fn new(env: Nav2d, safety: SafetyIndexParams, config: LearnerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        safety.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agent = Agent::new(env.obs_dim(), env.hazard_count(), &config, &mut rng)?;
        let optim = Optimizers::new(&agent, &config);
        let buffer = ReplayBuffer::new(config.buffer_capacity)?;
        let (state, obs) = env.reset(safety.rest_clearance(), &mut rng)?;
        Ok(Trainer {
            env,
            safety,
            config,
            agent,
            optim,
            buffer,
            rng,
            state,
            obs,
            episode_return: 0.0,
            episode_violations: 0,
            counters: Counters::default(),
            last_batch_obs: None,
        })
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn env(&self) -> &Nav2d {
        &self.env
    }

    pub fn safety_params(&self) -> &SafetyIndexParams {
        &self.safety
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn is_finished(&self) -> bool {
        self.counters.iteration >= self.config.iterations as u64
    }

    /// Collects one iteration of environment steps, then runs its gradient steps.
    pub fn run_iteration(&mut self) -> Result<MetricsRow> {
        let mut returns = Vec::new();
        let mut episode_costs = Vec::new();
        let mut violations = 0u64;
        for _ in 0..self.config.env_steps_per_iteration {
            let action = if (self.counters.env_steps as usize) < self.config.warmup_steps {
                uniform_action(&mut self.rng)
            } else {
                let (a, _) = self.agent.policy.sample_action(self.obs.as_slice(), &mut self.rng)?;
                [a[0], a[1]]
            };
            let (next, result) = self.env.step(&self.state, action);
            self.buffer.push(make_transition(&self.obs, action, &result, &self.safety));
            self.counters.env_steps += 1;
            self.episode_return += result.reward;
            if safety::is_violation(&result.after, &self.safety) {
                violations += 1;
                self.episode_violations += 1;
                self.counters.cumulative_violations += 1;
            }
            if result.done {
                returns.push(self.episode_return);
                episode_costs.push(self.episode_violations as f64);
                self.counters.episodes += 1;
                self.episode_return = 0.0;
                self.episode_violations = 0;
                let (s, o) = self.env.reset(self.safety.rest_clearance(), &mut self.rng)?;
                self.state = s;
                self.obs = o;
            } else {
                self.state = next;
                self.obs = result.observation;
            }
        }

        let ready = self.counters.env_steps as usize >= self.config.warmup_steps
            && self.buffer.len() >= self.config.batch_size;
        let mut sums = [0.0; 3];
        let mut counts = [0usize; 3];
        if ready {
            for _ in 0..self.config.gradient_steps_per_iteration {
                let (q, qc, pi) = self.gradient_step()?;
                sums[0] += q;
                sums[1] += qc;
                counts[0] += 1;
                counts[1] += 1;
                if let Some(pi) = pi {
                    sums[2] += pi;
                    counts[2] += 1;
                }
            }
        }
        let mean = |i: usize| if counts[i] > 0 { sums[i] / counts[i] as f64 } else { f64::NAN };
        self.counters.iteration += 1;

        let (mean_multiplier, max_multiplier) = self.multiplier_stats();
        let c = &self.counters;
        Ok(MetricsRow {
            iteration: c.iteration,
            env_steps: c.env_steps,
            mean_return: mean_of(&returns),
            mean_episode_cost: mean_of(&episode_costs),
            violation_steps: violations,
            cost_rate: c.cumulative_violations as f64 / c.env_steps as f64,
            cumulative_cost: c.cumulative_violations as f64,
            mean_multiplier,
            max_multiplier,
            alpha: self.agent.alpha(),
            q_loss: mean(0),
            qc_loss: mean(1),
            policy_loss: mean(2),
        })
    }

    fn multiplier_stats(&self) -> (f64, f64) {
        match (&self.last_batch_obs, self.config.multiplier) {
            (Some(obs), MultiplierMode::Learned) => {
                let lam = self.agent.multiplier.values(obs.view());
                let mean = lam.mean().unwrap_or(0.0);
                let max = lam.iter().copied().fold(0.0, f64::max);
                (mean, max)
            }
            _ => (0.0, 0.0),
        }
    }

    /// One gradient step. Returns `(q_loss, qc_loss, policy_loss if updated)`.
    pub fn gradient_step(&mut self) -> Result<(f64, f64, Option<f64>)> {
        self.counters.grad_steps += 1;
        let step = self.counters.grad_steps;
        let cfg = &self.config;
        let n = cfg.batch_size;
        let batch = self.buffer.sample(n, &mut self.rng)?;
        let agent = &mut self.agent;

        let next_noise = standard_normal(&mut self.rng, n, ACTION_DIM);
        let q = losses::q_loss(
            &agent.critics,
            &agent.target_critics,
            &agent.policy,
            agent.alpha(),
            cfg.gamma,
            &batch,
            next_noise.view(),
        );
        check_finite(q.loss, "q_loss", &self.counters)?;
        for k in 0..2 {
            self.optim.critics[k].step(agent.critics[k].params_mut(), q.grads[k].as_slice())?;
        }

        let qc = losses::qc_loss(&agent.safety_critic, &batch);
        check_finite(qc.loss, "qc_loss", &self.counters)?;
        self.optim
            .safety_critic
            .step(agent.safety_critic.params_mut(), qc.grads.as_slice())?;

        let mut policy_loss = None;
        if step % cfg.m_pi == 0 {
            let noise = standard_normal(&mut self.rng, n, ACTION_DIM);
            let constraint = match cfg.multiplier {
                MultiplierMode::Learned => Some(Constraint {
                    safety_critic: &agent.safety_critic,
                    multiplier: &agent.multiplier,
                }),
                MultiplierMode::Zero => None,
            };
            let pl = losses::policy_loss(
                &agent.policy,
                &agent.critics,
                constraint,
                agent.alpha(),
                batch.observations.view(),
                noise.view(),
            );
            check_finite(pl.loss, "policy_loss", &self.counters)?;
            self.optim.policy.step(agent.policy.net.params_mut(), pl.grads.as_slice())?;
            let (_, grad) = losses::alpha_loss(agent.log_alpha, pl.log_probs.view(), agent.target_entropy);
            self.optim
                .alpha
                .step(std::slice::from_mut(&mut agent.log_alpha), &[grad])?;
            policy_loss = Some(pl.loss);
            self.counters.policy_updates += 1;
        }

        if cfg.multiplier == MultiplierMode::Learned && step % cfg.m_lambda == 0 {
            let noise = standard_normal(&mut self.rng, n, ACTION_DIM);
            let obj = losses::multiplier_objective(
                &agent.multiplier,
                &agent.safety_critic,
                &agent.policy,
                batch.observations.view(),
                noise.view(),
            );
            check_finite(obj.loss, "multiplier objective", &self.counters)?;
            self.optim
                .multiplier
                .ascend(agent.multiplier.net.params_mut(), obj.grads.as_slice())?;
            self.counters.multiplier_updates += 1;
        }

        let bound = cfg.projection_bound;
        agent.policy.net.project(bound);
        agent.critics.iter_mut().for_each(|c| c.project(bound));
        agent.safety_critic.project(bound);
        agent.multiplier.net.project(bound);

        for k in 0..2 {
            agent.target_critics[k].soft_update_from(&agent.critics[k], cfg.tau)?;
        }
        self.last_batch_obs = Some(batch.observations);
        Ok((q.loss, qc.loss, policy_loss))
    }
}

fn check_finite(value: f64, what: &str, c: &Counters) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Training(format!(
            "{what} = {value} at iteration {}, gradient step {}, env step {}",
            c.iteration, c.grad_steps, c.env_steps
        )))
    }
}

fn mean_of(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}
