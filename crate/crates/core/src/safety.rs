//! Safety-index energy functions and control-safe-set checks.
//!
//! The parameterized index is `phi = sigma + d_min^n - d^n - k * d_dot` and the
//! per-step constraint is `phi(s') - max(phi(s) - eta, 0) < 0`. The learner only
//! ever sees the latter as data (a cost computed from observed `(d, d_dot)`
//! pairs); the one-step simulations in this module exist for verification.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{EnvState, HazardReading, Nav2d, Observation};
use crate::error::{Error, Result};

/// Margin used for strict inequalities: `x < 0` is evaluated as `x <= -STRICT_EPS`.
pub const STRICT_EPS: f64 = 1e-9;
const MAX_REJECTIONS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyIndexParams {
    pub sigma: f64,
    pub n: u32,
    /// Weight on the distance derivative, seconds.
    pub k: f64,
    /// Safe distance, meters.
    pub d_min: f64,
    /// Slack on the energy decrease.
    pub eta: f64,
}

impl Default for SafetyIndexParams {
    fn default() -> Self {
        SafetyIndexParams {
            sigma: 0.04,
            n: 2,
            k: 1.0,
            d_min: 0.5,
            eta: 0.0,
        }
    }
}

impl SafetyIndexParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.sigma, self.k, self.d_min, self.eta]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("safety_index values must be finite".into()));
        }
        if self.sigma < 0.0 {
            return Err(Error::Config(format!("safety_index.sigma must be >= 0, got {}", self.sigma)));
        }
        if self.n < 1 {
            return Err(Error::Config("safety_index.n must be >= 1".into()));
        }
        if self.k <= 0.0 {
            return Err(Error::Config(format!("safety_index.k must be > 0, got {}", self.k)));
        }
        if self.d_min <= 0.0 {
            return Err(Error::Config(format!("safety_index.d_min must be > 0, got {}", self.d_min)));
        }
        if self.eta < 0.0 {
            return Err(Error::Config(format!("safety_index.eta must be >= 0, got {}", self.eta)));
        }
        Ok(())
    }

    /// Surface distance at which a motionless agent sits exactly on `phi = 0`.
    pub fn rest_clearance(&self) -> f64 {
        (self.sigma + self.d_min.powi(self.n as i32)).powf(1.0 / self.n as f64)
    }
}

/// Original safety index `d_min - d`.
pub fn phi0(d: f64, params: &SafetyIndexParams) -> f64 {
    params.d_min - d
}

/// `d^n` extended to `d < 0` as `-|d|^n`, so the index keeps growing with penetration depth.
fn signed_pow(d: f64, n: u32) -> f64 {
    let mag = d.abs().powi(n as i32);
    if d < 0.0 {
        -mag
    } else {
        mag
    }
}

/// Parameterized safety index `sigma + d_min^n - d^n - k * d_dot`.
pub fn phi(d: f64, d_dot: f64, params: &SafetyIndexParams) -> Result<f64> {
    if !(d.is_finite() && d_dot.is_finite()) {
        return Err(Error::Config(format!("non-finite safety index input (d={d}, d_dot={d_dot})")));
    }
    Ok(phi_unchecked(d, d_dot, params))
}

#[inline]
pub(crate) fn phi_unchecked(d: f64, d_dot: f64, params: &SafetyIndexParams) -> f64 {
    params.sigma + params.d_min.powi(params.n as i32) - signed_pow(d, params.n) - params.k * d_dot
}

pub fn phi_of(reading: &HazardReading, params: &SafetyIndexParams) -> f64 {
    phi_unchecked(reading.d, reading.d_dot, params)
}

/// `phi(s') - max(phi(s) - eta, 0)`; negative certifies the step.
pub fn transition_cost(phi_s: f64, phi_next: f64, eta: f64) -> f64 {
    phi_next - (phi_s - eta).max(0.0)
}

/// Per-hazard transition costs for a pair of readings.
pub fn cost_vector(
    before: &[HazardReading],
    after: &[HazardReading],
    params: &SafetyIndexParams,
) -> Vec<f64> {
    before
        .iter()
        .zip(after)
        .map(|(b, a)| transition_cost(phi_of(b, params), phi_of(a, params), params.eta))
        .collect()
}

pub fn phi_vector(readings: &[HazardReading], params: &SafetyIndexParams) -> Vec<f64> {
    readings.iter().map(|r| phi_of(r, params)).collect()
}

/// True iff `phi <= 0` and `phi0 <= 0` for every hazard.
pub fn in_safe_subset(observation: &Observation, params: &SafetyIndexParams) -> bool {
    readings_in_safe_subset(observation.hazards(), params)
}

pub fn readings_in_safe_subset(
    readings: impl IntoIterator<Item = HazardReading>,
    params: &SafetyIndexParams,
) -> bool {
    readings
        .into_iter()
        .all(|r| phi_of(&r, params) <= 0.0 && phi0(r.d, params) <= 0.0)
}

/// Ground-truth violation: the agent is inside some hazard inflated by `d_min`.
pub fn is_violation(readings: &[HazardReading], params: &SafetyIndexParams) -> bool {
    readings.iter().any(|r| phi0(r.d, params) > 0.0)
}

/// Membership of `action` in the control safe set at `state`, by one-step simulation.
///
/// Verification only; the learner never calls this.
pub fn is_control_safe(env: &Nav2d, state: &EnvState, action: [f64; 2], params: &SafetyIndexParams) -> bool {
    let (_, result) = env.step(state, action);
    cost_vector(&result.before, &result.after, params)
        .iter()
        .all(|&c| c <= -STRICT_EPS)
}

/// Where [`sample_safe_state`] draws candidate states from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateDomain {
    /// Any position in the arena with any velocity up to `v_max`.
    Arena,
    /// Positions in the reset region at rest (the support of the initial distribution).
    InitialSet,
}

/// Rejection-samples a state in `I_s`.
pub fn sample_safe_state<R: Rng + ?Sized>(
    env: &Nav2d,
    params: &SafetyIndexParams,
    domain: StateDomain,
    rng: &mut R,
) -> Result<EnvState> {
    let cfg = env.config();
    let l = cfg.arena_half_width;
    for _ in 0..MAX_REJECTIONS {
        let state = match domain {
            StateDomain::Arena => {
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                let speed = cfg.v_max * rng.random::<f64>().sqrt();
                EnvState {
                    position: [rng.random_range(-l..=l), rng.random_range(-l..=l)],
                    velocity: [speed * angle.cos(), speed * angle.sin()],
                    step_count: 0,
                }
            }
            StateDomain::InitialSet => {
                let r = cfg.reset_region;
                EnvState {
                    position: [rng.random_range(r.x_min..=r.x_max), rng.random_range(r.y_min..=r.y_max)],
                    velocity: [0.0; 2],
                    step_count: 0,
                }
            }
        };
        let in_initial_set = domain == StateDomain::Arena || !env.in_goal(state.position);
        if in_initial_set && readings_in_safe_subset(env.readings(&state), params) {
            return Ok(state);
        }
    }
    Err(Error::Config(format!(
        "no state of the safe subset found in {MAX_REJECTIONS} draws"
    )))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub states_tested: usize,
    pub states_with_empty_control_safe_set: usize,
    /// Sampled state with the smallest fraction of control-safe grid actions.
    pub worst_state: Option<EnvState>,
    pub empirical_min_safe_action_fraction: f64,
}

impl FeasibilityReport {
    pub fn passed(&self) -> bool {
        self.states_with_empty_control_safe_set == 0
    }
}

/// Empirical check that every sampled state of `I_s` admits a control-safe
/// action on a `resolution × resolution` grid over `[-1, 1]²`.
pub fn check_feasibility<R: Rng + ?Sized>(
    env: &Nav2d,
    params: &SafetyIndexParams,
    n_states: usize,
    resolution: usize,
    rng: &mut R,
) -> Result<FeasibilityReport> {
    if n_states == 0 {
        return Err(Error::Config("feasibility check needs at least one state".into()));
    }
    if resolution < 3 {
        return Err(Error::Config("action grid resolution must be at least 3".into()));
    }
    let ticks: Vec<f64> = (0..resolution)
        .map(|i| -1.0 + 2.0 * i as f64 / (resolution - 1) as f64)
        .collect();
    let total = (resolution * resolution) as f64;
    let mut empty = 0;
    let mut worst: Option<(EnvState, f64)> = None;
    for _ in 0..n_states {
        let state = sample_safe_state(env, params, StateDomain::Arena, rng)?;
        let mut safe = 0usize;
        for &ax in &ticks {
            for &ay in &ticks {
                if is_control_safe(env, &state, [ax, ay], params) {
                    safe += 1;
                }
            }
        }
        if safe == 0 {
            empty += 1;
        }
        let frac = safe as f64 / total;
        if worst.is_none_or(|(_, f)| frac < f) {
            worst = Some((state, frac));
        }
    }
    Ok(FeasibilityReport {
        states_tested: n_states,
        states_with_empty_control_safe_set: empty,
        worst_state: worst.map(|(s, _)| s),
        empirical_min_safe_action_fraction: worst.map_or(1.0, |(_, f)| f),
    })
}
