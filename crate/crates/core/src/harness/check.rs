//! Verification entry points: finite-difference gradient suites over every
//! learner loss, control-safe-set feasibility and forward invariance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::env::{Nav2d, ACTION_DIM};
use crate::error::Result;
use crate::learner::losses::{self, Constraint};
use crate::learner::{make_transition, standard_normal, uniform_action, Agent, Batch, LearnerConfig, MultiplierNet};
use crate::nn::{finite_diff_grad, finite_diff_slice, max_relative_error, Mlp};
use crate::safety::SafetyIndexParams;

pub const FD_STEP: f64 = 3e-5;
pub const GRADIENT_TOLERANCE: f64 = 1e-4;
/// Denominator floor for the relative error.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub params: usize,
    pub max_relative_error: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.max_relative_error < GRADIENT_TOLERANCE
    }
}

/// `rows` transitions from uniform-random rollouts, as a training batch.
pub fn random_batch(env: &Nav2d, params: &SafetyIndexParams, rows: usize, rng: &mut ChaCha8Rng) -> Result<Batch> {
    let mut items = Vec::with_capacity(rows);
    let (mut state, mut obs) = env.reset(params.rest_clearance(), rng)?;
    while items.len() < rows {
        let action = uniform_action(rng);
        let (next, res) = env.step(&state, action);
        items.push(make_transition(&obs, action, &res, params));
        if res.done {
            (state, obs) = env.reset(params.rest_clearance(), rng)?;
        } else {
            state = next;
            obs = res.observation;
        }
    }
    Ok(Batch::from_transitions(&items.iter().collect::<Vec<_>>()))
}

/// Analytic against central-difference gradients for every loss, on a fresh
/// agent with hidden widths `hidden`, using common random numbers.
pub fn gradient_suites(
    env: &Nav2d,
    params: &SafetyIndexParams,
    hidden: &[usize],
    rows: usize,
    seed: u64,
) -> Result<Vec<SuiteResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = LearnerConfig {
        hidden_sizes: hidden.to_vec(),
        init_alpha: 0.5,
        ..LearnerConfig::default()
    };
    let mut agent = Agent::new(env.obs_dim(), env.hazard_count(), &cfg, &mut rng)?;
    // targets distinct from the online critics, as they are mid-training
    for t in &mut agent.target_critics {
        *t = Mlp::with_rng(t.layer_sizes(), &mut rng)?;
    }
    let batch = random_batch(env, params, rows, &mut rng)?;
    let next_noise = standard_normal(&mut rng, rows, ACTION_DIM);
    let noise = standard_normal(&mut rng, rows, ACTION_DIM);
    let alpha = agent.alpha();
    let gamma = cfg.gamma;
    let obs = batch.observations.view();
    let mut out = Vec::new();
    let mut record = |name: &'static str, analytic: &[f64], numeric: &[f64]| {
        out.push(SuiteResult {
            name,
            params: analytic.len(),
            max_relative_error: max_relative_error(analytic, numeric, RELATIVE_FLOOR),
        });
    };

    let y = losses::bellman_targets(&agent.target_critics, &agent.policy, alpha, gamma, &batch, next_noise.view());
    let q = losses::q_loss(&agent.critics, &agent.target_critics, &agent.policy, alpha, gamma, &batch, next_noise.view());
    for (k, name) in [(0, "soft_q_critic_1"), (1, "soft_q_critic_2")] {
        let numeric = finite_diff_grad(
            |net| {
                let mut pair = agent.critics.clone();
                pair[k] = net.clone();
                losses::q_loss_against(&pair, &batch, y.view()).loss
            },
            &agent.critics[k],
            FD_STEP,
        );
        record(name, q.grads[k].as_slice(), numeric.as_slice());
    }

    let qc = losses::qc_loss(&agent.safety_critic, &batch);
    let numeric = finite_diff_grad(|net| losses::qc_loss(net, &batch).loss, &agent.safety_critic, FD_STEP);
    record("safety_critic", qc.grads.as_slice(), numeric.as_slice());

    let constraint = Constraint {
        safety_critic: &agent.safety_critic,
        multiplier: &agent.multiplier,
    };
    for (with, name) in [(true, "policy_constrained"), (false, "policy_unconstrained")] {
        let c = with.then_some(constraint);
        let pl = losses::policy_loss(&agent.policy, &agent.critics, c, alpha, obs, noise.view());
        let mut probe = agent.policy.clone();
        let numeric = finite_diff_slice(
            |p| {
                probe.net.params_mut().copy_from_slice(p);
                losses::policy_loss(&probe, &agent.critics, c, alpha, obs, noise.view()).loss
            },
            agent.policy.net.params(),
            FD_STEP,
        );
        record(name, pl.grads.as_slice(), &numeric);
    }

    let mo = losses::multiplier_objective(&agent.multiplier, &agent.safety_critic, &agent.policy, obs, noise.view());
    let numeric = finite_diff_grad(
        |net| {
            let m = MultiplierNet { net: net.clone() };
            losses::multiplier_objective(&m, &agent.safety_critic, &agent.policy, obs, noise.view()).loss
        },
        &agent.multiplier.net,
        FD_STEP,
    );
    record("multiplier", mo.grads.as_slice(), numeric.as_slice());

    let log_probs = agent.policy.sample_with_noise(obs, noise.view()).log_probs;
    let (_, grad) = losses::alpha_loss(agent.log_alpha, log_probs.view(), agent.target_entropy);
    let numeric = finite_diff_slice(
        |la| losses::alpha_loss(la[0], log_probs.view(), agent.target_entropy).0,
        &[agent.log_alpha],
        FD_STEP,
    );
    record("temperature", &[grad], &numeric);

    Ok(out)
}
