//! Safe set actor-critic: soft actor-critic plus a safety-index transition
//! critic trained with zero discount and a state-dependent, non-negative
//! Lagrange multiplier network.

mod buffer;
pub mod losses;
mod policy;
mod train;

pub use buffer::{Batch, ReplayBuffer, Transition};
pub use policy::{sigmoid, softplus, standard_normal, PolicyNet, PolicySample, LOG_STD_MAX, LOG_STD_MIN};
pub use train::{make_transition, uniform_action, Counters, Optimizers, Trainer};

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::ACTION_DIM;
use crate::error::{Error, Result};
use crate::nn::{GradBundle, Mlp, Tape};

/// Start and end of a linearly annealed learning rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rate {
    pub start: f64,
    pub end: f64,
}

impl Rate {
    pub const fn new(start: f64, end: f64) -> Self {
        Rate { start, end }
    }
}

/// How the Lagrange multiplier enters the policy objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultiplierMode {
    /// Neural multiplier trained by delayed ascent.
    Learned,
    /// Multiplier fixed at zero: unconstrained soft actor-critic.
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub gamma: f64,
    /// Polyak coefficient for the target critics.
    pub tau: f64,
    /// Policy and temperature update every `m_pi` gradient steps.
    pub m_pi: u64,
    /// Multiplier ascent every `m_lambda` gradient steps.
    pub m_lambda: u64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub actor_lr: Rate,
    pub critic_lr: Rate,
    pub multiplier_lr: Rate,
    pub alpha_lr: Rate,
    /// Annealing horizon in gradient steps; defaults to the whole run.
    pub lr_horizon: Option<u64>,
    pub env_steps_per_iteration: usize,
    pub gradient_steps_per_iteration: usize,
    pub iterations: usize,
    /// Uniform random actions before the policy takes over.
    pub warmup_steps: usize,
    pub hidden_sizes: Vec<usize>,
    /// Box bound for every network parameter.
    pub projection_bound: f64,
    pub init_alpha: f64,
    /// Defaults to `-action_dim`.
    pub target_entropy: Option<f64>,
    pub multiplier: MultiplierMode,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            gamma: 0.99,
            tau: 0.005,
            m_pi: 3,
            m_lambda: 12,
            batch_size: 256,
            buffer_capacity: 500_000,
            actor_lr: Rate::new(3e-5, 1e-6),
            critic_lr: Rate::new(8e-5, 1e-6),
            multiplier_lr: Rate::new(5e-5, 5e-6),
            alpha_lr: Rate::new(5e-5, 1e-6),
            lr_horizon: None,
            env_steps_per_iteration: 1000,
            gradient_steps_per_iteration: 1000,
            iterations: 200,
            warmup_steps: 2000,
            hidden_sizes: vec![64, 64],
            projection_bound: 1e6,
            init_alpha: 1.0,
            target_entropy: None,
            multiplier: MultiplierMode::Learned,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("learner.gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("learner.tau must lie in [0, 1], got {}", self.tau));
        }
        if self.m_pi < 1 {
            return bad("learner.m_pi must be >= 1".into());
        }
        if self.m_lambda < 1 {
            return bad("learner.m_lambda must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("learner.batch_size must be positive".into());
        }
        if self.buffer_capacity == 0 {
            return bad("learner.buffer_capacity must be positive".into());
        }
        for (key, r) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("multiplier_lr", self.multiplier_lr),
            ("alpha_lr", self.alpha_lr),
        ] {
            if !(r.start.is_finite() && r.end.is_finite() && r.start > 0.0 && r.end > 0.0) {
                return bad(format!("learner.{key} rates must be positive, got {} -> {}", r.start, r.end));
            }
        }
        if self.lr_horizon == Some(0) {
            return bad("learner.lr_horizon must be positive".into());
        }
        if self.env_steps_per_iteration == 0 {
            return bad("learner.env_steps_per_iteration must be positive".into());
        }
        if self.iterations == 0 {
            return bad("learner.iterations must be positive".into());
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return bad("learner.hidden_sizes must be a non-empty list of positive widths".into());
        }
        if !(self.projection_bound > 0.0) {
            return bad("learner.projection_bound must be positive".into());
        }
        if !(self.init_alpha.is_finite() && self.init_alpha > 0.0) {
            return bad("learner.init_alpha must be positive".into());
        }
        if let Some(h) = self.target_entropy {
            if !h.is_finite() {
                return bad("learner.target_entropy must be finite".into());
            }
        }
        Ok(())
    }

    pub fn total_gradient_steps(&self) -> u64 {
        (self.iterations * self.gradient_steps_per_iteration) as u64
    }

    pub fn target_entropy(&self) -> f64 {
        self.target_entropy.unwrap_or(-(ACTION_DIM as f64))
    }
}

/// State-dependent multipliers `Λ(s) = softplus(net(s)) >= 0`, one per constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierNet {
    pub net: Mlp,
}

impl MultiplierNet {
    pub fn values(&self, obs: ArrayView2<'_, f64>) -> Array2<f64> {
        self.net.predict(obs).mapv(softplus)
    }

    pub fn value(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.net.forward(obs)?.into_iter().map(softplus).collect())
    }

    /// Forward pass that keeps what the ascent step needs.
    pub(crate) fn forward_tape(&self, obs: ArrayView2<'_, f64>) -> (Tape, Array2<f64>) {
        let tape = self.net.forward_batch(obs);
        let values = tape.output().mapv(softplus);
        (tape, values)
    }

    /// Parameter gradient given the cotangent with respect to `Λ`.
    pub(crate) fn backward(&self, tape: &Tape, grad_values: ArrayView2<'_, f64>) -> GradBundle {
        let raw_grad = &grad_values * &tape.output().mapv(sigmoid);
        self.net.backward_batch(tape, raw_grad.view()).1
    }
}

/// All trainable networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub policy: PolicyNet,
    pub critics: [Mlp; 2],
    pub target_critics: [Mlp; 2],
    /// Predicts the per-hazard safety-index transition from `(s, a)`.
    pub safety_critic: Mlp,
    pub multiplier: MultiplierNet,
    pub log_alpha: f64,
    pub target_entropy: f64,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        hazard_count: usize,
        config: &LearnerConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if hazard_count == 0 {
            return Err(Error::Config(
                "training needs at least one hazard: the safety critic and multiplier have one output per hazard"
                    .into(),
            ));
        }
        let hidden = &config.hidden_sizes;
        let sizes = |inp: usize, out: usize| {
            let mut v = vec![inp];
            v.extend_from_slice(hidden);
            v.push(out);
            v
        };
        let policy = PolicyNet::new(obs_dim, hidden, ACTION_DIM, rng)?;
        let q1 = Mlp::with_rng(&sizes(obs_dim + ACTION_DIM, 1), rng)?;
        let q2 = Mlp::with_rng(&sizes(obs_dim + ACTION_DIM, 1), rng)?;
        let safety_critic = Mlp::with_rng(&sizes(obs_dim + ACTION_DIM, hazard_count), rng)?;
        let multiplier = MultiplierNet {
            net: Mlp::with_rng(&sizes(obs_dim, hazard_count), rng)?,
        };
        Ok(Agent {
            policy,
            target_critics: [q1.clone(), q2.clone()],
            critics: [q1, q2],
            safety_critic,
            multiplier,
            log_alpha: config.init_alpha.ln(),
            target_entropy: config.target_entropy(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn hazard_count(&self) -> usize {
        self.safety_critic.output_dim()
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.obs_dim()
    }

    pub fn is_finite(&self) -> bool {
        self.policy.net.is_finite()
            && self.critics.iter().all(Mlp::is_finite)
            && self.target_critics.iter().all(Mlp::is_finite)
            && self.safety_critic.is_finite()
            && self.multiplier.net.is_finite()
            && self.log_alpha.is_finite()
    }
}
