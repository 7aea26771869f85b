//! Tanh-squashed diagonal Gaussian policy with reparameterized sampling.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{GradBundle, Mlp, Tape};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const SQUASH_EPS: f64 = 1e-6;
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// `ε ~ N(0, I)` of shape `(rows, cols)`.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    /// Maps an observation to `[mean; log_std]`.
    pub net: Mlp,
    action_dim: usize,
}

/// Everything the reverse pass through a reparameterized sample needs.
#[derive(Clone, Debug)]
pub struct PolicySample {
    tape: Tape,
    noise: Array2<f64>,
    std: Array2<f64>,
    /// 1.0 where the raw log-std lies inside the clamp range, else 0.0.
    log_std_active: Array2<f64>,
    /// `1 - a²` evaluated as `sech²(u)`; `1 - tanh(u)²` cancels to noise once the action saturates.
    one_minus_sq: Array2<f64>,
    pub actions: Array2<f64>,
    pub log_probs: Array1<f64>,
}

impl PolicyNet {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], action_dim: usize, rng: &mut R) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * action_dim);
        Ok(PolicyNet {
            net: Mlp::with_rng(&sizes, rng)?,
            action_dim,
        })
    }

    pub fn from_net(net: Mlp) -> Result<Self> {
        let out = net.output_dim();
        if out % 2 != 0 {
            return Err(Error::Config(format!("policy head width must be even, got {out}")));
        }
        Ok(PolicyNet {
            net,
            action_dim: out / 2,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Reparameterized sample `a = tanh(mu + std * noise)` for every row of `obs`.
    pub fn sample_with_noise(&self, obs: ArrayView2<'_, f64>, noise: ArrayView2<'_, f64>) -> PolicySample {
        let a_dim = self.action_dim;
        assert_eq!(noise.dim(), (obs.nrows(), a_dim), "noise shape mismatch");
        let tape = self.net.forward_batch(obs);
        let out = tape.output();
        let mean = out.slice(s![.., ..a_dim]);
        let raw_log_std = out.slice(s![.., a_dim..]);
        let log_std_active = raw_log_std.mapv(|l| {
            if (LOG_STD_MIN..=LOG_STD_MAX).contains(&l) {
                1.0
            } else {
                0.0
            }
        });
        let log_std = raw_log_std.mapv(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX));
        let std = log_std.mapv(f64::exp);
        let pre = &mean + &(&std * &noise);
        let actions = pre.mapv(f64::tanh);
        let one_minus_sq = pre.mapv(|u| {
            let c = u.cosh();
            1.0 / (c * c)
        });

        let mut log_probs = Array1::zeros(obs.nrows());
        for (i, lp) in log_probs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..a_dim {
                let e = noise[[i, j]];
                acc += -0.5 * e * e - log_std[[i, j]] - HALF_LN_TWO_PI - (one_minus_sq[[i, j]] + SQUASH_EPS).ln();
            }
            *lp = acc;
        }
        PolicySample {
            tape,
            noise: noise.to_owned(),
            std,
            log_std_active,
            one_minus_sq,
            actions,
            log_probs,
        }
    }

    /// Parameter gradient of `sum_i [ g_a[i] · a_i + g_logp[i] · log_pi_i ]`.
    pub fn backward(
        &self,
        sample: &PolicySample,
        grad_actions: ArrayView2<'_, f64>,
        grad_log_probs: ArrayView1<'_, f64>,
    ) -> GradBundle {
        let a_dim = self.action_dim;
        let rows = sample.actions.nrows();
        let mut cot = Array2::zeros((rows, 2 * a_dim));
        for i in 0..rows {
            let glp = grad_log_probs[i];
            for j in 0..a_dim {
                let a = sample.actions[[i, j]];
                let one_minus = sample.one_minus_sq[[i, j]];
                let d_pre = glp * 2.0 * a * one_minus / (one_minus + SQUASH_EPS) + grad_actions[[i, j]] * one_minus;
                cot[[i, j]] = d_pre;
                cot[[i, a_dim + j]] = sample.log_std_active[[i, j]]
                    * (-glp + d_pre * sample.std[[i, j]] * sample.noise[[i, j]]);
            }
        }
        self.net.backward_batch(&sample.tape, cot.view()).1
    }

    /// Deterministic actions `tanh(mu)` for a batch.
    pub fn mean_actions(&self, obs: ArrayView2<'_, f64>) -> Array2<f64> {
        let out = self.net.predict(obs);
        out.slice(s![.., ..self.action_dim]).mapv(f64::tanh)
    }

    /// Draws one action and its log-density for a single observation.
    pub fn sample_action<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64)> {
        self.check_obs(obs)?;
        let x = ArrayView2::from_shape((1, obs.len()), obs).unwrap();
        let noise = standard_normal(rng, 1, self.action_dim);
        let sample = self.sample_with_noise(x, noise.view());
        let action = sample.actions.row(0).to_vec();
        let lp = sample.log_probs[0];
        if !lp.is_finite() || action.iter().any(|a| !a.is_finite()) {
            return Err(Error::Training("policy produced a non-finite action".into()));
        }
        Ok((action, lp))
    }

    pub fn deterministic_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.check_obs(obs)?;
        let x = ArrayView2::from_shape((1, obs.len()), obs).unwrap();
        Ok(self.mean_actions(x).row(0).to_vec())
    }

    fn check_obs(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.obs_dim() {
            return Err(Error::Shape {
                expected: self.obs_dim(),
                got: obs.len(),
            });
        }
        Ok(())
    }
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
