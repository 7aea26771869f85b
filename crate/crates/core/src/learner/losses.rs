//! Losses and their analytic gradients.
//!
//! Every function takes its Gaussian noise explicitly so gradients can be
//! checked against finite differences with common random numbers. Batch
//! reductions are means over rows.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::{Batch, MultiplierNet, PolicyNet};
use crate::nn::{GradBundle, Mlp};

/// Scalar objective and its parameter gradient.
#[derive(Clone, Debug)]
pub struct LossGrad {
    pub loss: f64,
    pub grads: GradBundle,
}

/// Critic input `[observation | action]`.
pub fn critic_input(obs: ArrayView2<'_, f64>, actions: ArrayView2<'_, f64>) -> Array2<f64> {
    concatenate![Axis(1), obs, actions]
}

/// Soft Bellman targets `r + γ (1 - done) (min Q̄(s', a') - α log π(a'|s'))` with `a' = f(noise; s')`.
pub fn bellman_targets(
    targets: &[Mlp; 2],
    policy: &PolicyNet,
    alpha: f64,
    gamma: f64,
    batch: &Batch,
    next_noise: ArrayView2<'_, f64>,
) -> Array1<f64> {
    let next = policy.sample_with_noise(batch.next_observations.view(), next_noise);
    let x = critic_input(batch.next_observations.view(), next.actions.view());
    let q1 = targets[0].predict(x.view());
    let q2 = targets[1].predict(x.view());
    Array1::from_shape_fn(batch.len(), |i| {
        let soft_v = q1[[i, 0]].min(q2[[i, 0]]) - alpha * next.log_probs[i];
        batch.rewards[i] + gamma * (1.0 - batch.dones[i]) * soft_v
    })
}

#[derive(Clone, Debug)]
pub struct CriticLoss {
    /// `J_Q(w1) + J_Q(w2)` with `J_Q(w) = mean ½ (Q_w(s, a) - y)²`.
    pub loss: f64,
    pub grads: [GradBundle; 2],
}

/// Twin soft Q losses against a shared, constant target.
pub fn q_loss(
    critics: &[Mlp; 2],
    targets: &[Mlp; 2],
    policy: &PolicyNet,
    alpha: f64,
    gamma: f64,
    batch: &Batch,
    next_noise: ArrayView2<'_, f64>,
) -> CriticLoss {
    let y = bellman_targets(targets, policy, alpha, gamma, batch, next_noise);
    q_loss_against(critics, batch, y.view())
}

pub fn q_loss_against(critics: &[Mlp; 2], batch: &Batch, y: ArrayView1<'_, f64>) -> CriticLoss {
    let n = batch.len() as f64;
    let x = critic_input(batch.observations.view(), batch.actions.view());
    let mut loss = 0.0;
    let grads = [0, 1].map(|k| {
        let tape = critics[k].forward_batch(x.view());
        let diff = &tape.output().column(0) - &y;
        loss += 0.5 * diff.dot(&diff) / n;
        let ct = (diff / n).insert_axis(Axis(1));
        critics[k].backward_batch(&tape, ct.view()).1
    });
    CriticLoss { loss, grads }
}

/// Zero-discount regression of the safety critic onto observed transition costs:
/// `mean over rows and hazards of ½ (Q_c(s, a) - c)²`.
pub fn qc_loss(safety_critic: &Mlp, batch: &Batch) -> LossGrad {
    let x = critic_input(batch.observations.view(), batch.actions.view());
    let tape = safety_critic.forward_batch(x.view());
    let diff = tape.output() - &batch.costs;
    let count = diff.len() as f64;
    let loss = 0.5 * diff.iter().map(|d| d * d).sum::<f64>() / count;
    let ct = diff / count;
    let grads = safety_critic.backward_batch(&tape, ct.view()).1;
    LossGrad { loss, grads }
}

/// Safety critic and multiplier entering the policy objective.
#[derive(Clone, Copy)]
pub struct Constraint<'a> {
    pub safety_critic: &'a Mlp,
    pub multiplier: &'a MultiplierNet,
}

#[derive(Clone, Debug)]
pub struct PolicyLoss {
    pub loss: f64,
    pub grads: GradBundle,
    /// Log-densities of the reparameterized samples, reused by the temperature update.
    pub log_probs: Array1<f64>,
}

/// `mean[ α log π(a|s) - min(Q1, Q2)(s, a) + Σ_i Λ_i(s) Q_c,i(s, a) ]`, `a = f_θ(noise; s)`.
///
/// Gradients flow through the sampled action into the critics but not into
/// `Λ` or `α`. With `constraint = None` the multiplier is identically zero and
/// the safety critic is not evaluated at all.
pub fn policy_loss(
    policy: &PolicyNet,
    critics: &[Mlp; 2],
    constraint: Option<Constraint<'_>>,
    alpha: f64,
    obs: ArrayView2<'_, f64>,
    noise: ArrayView2<'_, f64>,
) -> PolicyLoss {
    let rows = obs.nrows();
    let n = rows as f64;
    let obs_dim = obs.ncols();
    let sample = policy.sample_with_noise(obs, noise);
    let x = critic_input(obs, sample.actions.view());

    let t1 = critics[0].forward_batch(x.view());
    let t2 = critics[1].forward_batch(x.view());
    let mut ct1 = Array2::zeros((rows, 1));
    let mut ct2 = Array2::zeros((rows, 1));
    let mut total = 0.0;
    for i in 0..rows {
        let (q1, q2) = (t1.output()[[i, 0]], t2.output()[[i, 0]]);
        if q1 <= q2 {
            ct1[[i, 0]] = -1.0 / n;
        } else {
            ct2[[i, 0]] = -1.0 / n;
        }
        total += alpha * sample.log_probs[i] - q1.min(q2);
    }
    let mut dx = critics[0].backward_input(&t1, ct1.view());
    dx += &critics[1].backward_input(&t2, ct2.view());

    if let Some(c) = constraint {
        let lambda = c.multiplier.values(obs);
        let tc = c.safety_critic.forward_batch(x.view());
        total += (&lambda * tc.output()).sum();
        let ct = &lambda / n;
        dx += &c.safety_critic.backward_input(&tc, ct.view());
    }

    let grad_actions = dx.slice(s![.., obs_dim..]);
    let grad_log_probs = Array1::from_elem(rows, alpha / n);
    let grads = policy.backward(&sample, grad_actions, grad_log_probs.view());
    PolicyLoss {
        loss: total / n,
        grads,
        log_probs: sample.log_probs,
    }
}

/// `J_λ = mean Σ_i Λ_i(s) Q_c,i(s, a)` with `a` freshly drawn from the policy,
/// and its gradient with respect to the multiplier parameters (the ascent direction).
pub fn multiplier_objective(
    multiplier: &MultiplierNet,
    safety_critic: &Mlp,
    policy: &PolicyNet,
    obs: ArrayView2<'_, f64>,
    noise: ArrayView2<'_, f64>,
) -> LossGrad {
    let n = obs.nrows() as f64;
    let sample = policy.sample_with_noise(obs, noise);
    let qc = safety_critic.predict(critic_input(obs, sample.actions.view()).view());
    let (tape, lambda) = multiplier.forward_tape(obs);
    let loss = (&lambda * &qc).sum() / n;
    let grads = multiplier.backward(&tape, (qc / n).view());
    LossGrad { loss, grads }
}

/// Temperature objective `mean[-α (log π + H̄)]` with `log π` held constant.
///
/// Returns `(loss, d loss / d log α)`.
pub fn alpha_loss(log_alpha: f64, log_probs: ArrayView1<'_, f64>, target_entropy: f64) -> (f64, f64) {
    let alpha = log_alpha.exp();
    let mean = log_probs.iter().map(|lp| lp + target_entropy).sum::<f64>() / log_probs.len() as f64;
    let loss = -alpha * mean;
    (loss, loss)
}
