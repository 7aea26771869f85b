//! Deterministic 2D point-mass navigation with circular, non-solid hazards.
//!
//! The agent is a double integrator: the action sets an acceleration, velocity
//! is clipped to `v_max`, and position is clipped to the square arena. Hazards
//! only produce cost; there is no contact dynamics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ACTION_DIM: usize = 2;
const BASE_OBS_DIM: usize = 6;
const MAX_RESET_ATTEMPTS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hazard {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Goal {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

/// Axis-aligned box initial positions are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (self.x_min..=self.x_max).contains(&p[0]) && (self.y_min..=self.y_max).contains(&p[1])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Half width of the square arena in meters.
    pub arena_half_width: f64,
    pub dt: f64,
    /// Acceleration at full throttle, m/s².
    pub a_max: f64,
    pub v_max: f64,
    pub hazards: Vec<Hazard>,
    pub goal: Goal,
    pub max_episode_steps: usize,
    pub reset_region: Region,
    pub progress_weight: f64,
    pub action_weight: f64,
    pub goal_bonus: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            arena_half_width: 3.0,
            dt: 0.1,
            a_max: 4.0,
            v_max: 2.0,
            hazards: vec![Hazard {
                x: 0.0,
                y: 0.0,
                radius: 0.5,
            }],
            goal: Goal {
                x: 2.2,
                y: 2.2,
                radius: 0.3,
            },
            max_episode_steps: 200,
            // corner opposite the goal, so the hazard lies across every start's path
            reset_region: Region {
                x_min: -2.8,
                x_max: -1.8,
                y_min: -2.8,
                y_max: -1.8,
            },
            progress_weight: 1.0,
            action_weight: 0.01,
            goal_bonus: 1.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let l = self.arena_half_width;
        let positive = [
            ("env.arena_half_width", l),
            ("env.dt", self.dt),
            ("env.a_max", self.a_max),
            ("env.v_max", self.v_max),
            ("env.goal.radius", self.goal.radius),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{key} must be positive and finite, got {v}")));
            }
        }
        if self.max_episode_steps == 0 {
            return Err(Error::Config("env.max_episode_steps must be at least 1".into()));
        }
        let inside = |x: f64, y: f64| x.abs() <= l && y.abs() <= l;
        if !inside(self.goal.x, self.goal.y) {
            return Err(Error::Config("env.goal lies outside the arena".into()));
        }
        for (i, h) in self.hazards.iter().enumerate() {
            if !(h.radius.is_finite() && h.radius > 0.0) {
                return Err(Error::Config(format!("env.hazards[{i}].radius must be positive")));
            }
            if !inside(h.x, h.y) {
                return Err(Error::Config(format!("env.hazards[{i}] lies outside the arena")));
            }
        }
        let r = &self.reset_region;
        if !(r.x_min <= r.x_max && r.y_min <= r.y_max) {
            return Err(Error::Config("env.reset_region is empty".into()));
        }
        if !(inside(r.x_min, r.y_min) && inside(r.x_max, r.y_max)) {
            return Err(Error::Config("env.reset_region extends outside the arena".into()));
        }
        for (key, w) in [
            ("env.progress_weight", self.progress_weight),
            ("env.action_weight", self.action_weight),
            ("env.goal_bonus", self.goal_bonus),
        ] {
            if !w.is_finite() {
                return Err(Error::Config(format!("{key} must be finite")));
            }
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        BASE_OBS_DIM + 2 * self.hazards.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub step_count: usize,
}

/// Surface distance `d` to one hazard and its time derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HazardReading {
    pub d: f64,
    pub d_dot: f64,
}

/// `[px, py, vx, vy, gx - px, gy - py, d_1, ḋ_1, ..., d_m, ḋ_m]`
#[derive(Clone, Debug, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn hazard_count(&self) -> usize {
        (self.0.len() - BASE_OBS_DIM) / 2
    }

    pub fn hazard(&self, i: usize) -> HazardReading {
        HazardReading {
            d: self.0[BASE_OBS_DIM + 2 * i],
            d_dot: self.0[BASE_OBS_DIM + 2 * i + 1],
        }
    }

    pub fn hazards(&self) -> impl Iterator<Item = HazardReading> + '_ {
        (0..self.hazard_count()).map(|i| self.hazard(i))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    /// Goal reached or step budget exhausted.
    pub done: bool,
    pub reached_goal: bool,
    /// The action had a component outside `[-1, 1]` and was clamped.
    pub action_clamped: bool,
    pub before: Vec<HazardReading>,
    pub after: Vec<HazardReading>,
}

/// `d = |p - c| - r` and `ḋ = (p - c)·v / |p - c|`.
///
/// At the hazard center the direction is undefined and `ḋ = -|v|` (worst-case inward rate).
pub fn hazard_distance(state: &EnvState, hazard: &Hazard) -> HazardReading {
    let rx = state.position[0] - hazard.x;
    let ry = state.position[1] - hazard.y;
    let dist = rx.hypot(ry);
    let d_dot = if dist < 1e-9 {
        -state.velocity[0].hypot(state.velocity[1])
    } else {
        (rx * state.velocity[0] + ry * state.velocity[1]) / dist
    };
    HazardReading {
        d: dist - hazard.radius,
        d_dot,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Nav2d {
    config: EnvConfig,
}

impl Nav2d {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        Ok(Nav2d { config })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn obs_dim(&self) -> usize {
        self.config.obs_dim()
    }

    pub fn hazard_count(&self) -> usize {
        self.config.hazards.len()
    }

    pub fn readings(&self, state: &EnvState) -> Vec<HazardReading> {
        self.config
            .hazards
            .iter()
            .map(|h| hazard_distance(state, h))
            .collect()
    }

    pub fn observe(&self, state: &EnvState) -> Observation {
        let mut obs = Vec::with_capacity(self.obs_dim());
        obs.extend_from_slice(&state.position);
        obs.extend_from_slice(&state.velocity);
        obs.push(self.config.goal.x - state.position[0]);
        obs.push(self.config.goal.y - state.position[1]);
        for r in self.readings(state) {
            obs.push(r.d);
            obs.push(r.d_dot);
        }
        Observation(obs)
    }

    fn goal_distance(&self, p: [f64; 2]) -> f64 {
        (p[0] - self.config.goal.x).hypot(p[1] - self.config.goal.y)
    }

    /// True when `position` keeps a surface distance strictly greater than
    /// `clearance` from every hazard and lies outside the goal.
    pub fn is_admissible_start(&self, position: [f64; 2], clearance: f64) -> bool {
        let probe = EnvState {
            position,
            velocity: [0.0; 2],
            step_count: 0,
        };
        self.readings(&probe).iter().all(|r| r.d > clearance)
            && !self.in_goal(position)
    }

    pub fn in_goal(&self, position: [f64; 2]) -> bool {
        self.goal_distance(position) <= self.config.goal.radius
    }

    /// Draws a start position uniformly from the reset region, rejecting
    /// positions within `clearance` of any hazard surface. Velocity starts at zero.
    pub fn reset<R: Rng + ?Sized>(&self, clearance: f64, rng: &mut R) -> Result<(EnvState, Observation)> {
        let r = &self.config.reset_region;
        for _ in 0..MAX_RESET_ATTEMPTS {
            let position = [
                sample_interval(rng, r.x_min, r.x_max),
                sample_interval(rng, r.y_min, r.y_max),
            ];
            if self.is_admissible_start(position, clearance) {
                let state = EnvState {
                    position,
                    velocity: [0.0; 2],
                    step_count: 0,
                };
                let obs = self.observe(&state);
                return Ok((state, obs));
            }
        }
        Err(Error::Config(format!(
            "env.reset_region has no admissible start after excluding hazards inflated by {clearance}"
        )))
    }

    /// Advances the dynamics by one step. Out-of-range actions are clamped and flagged.
    pub fn step(&self, state: &EnvState, action: [f64; 2]) -> (EnvState, StepResult) {
        let cfg = &self.config;
        let clamped = [action[0].clamp(-1.0, 1.0), action[1].clamp(-1.0, 1.0)];
        let action_clamped = clamped != action;

        let mut v = [
            state.velocity[0] + clamped[0] * cfg.a_max * cfg.dt,
            state.velocity[1] + clamped[1] * cfg.a_max * cfg.dt,
        ];
        let speed = v[0].hypot(v[1]);
        if speed > cfg.v_max {
            let s = cfg.v_max / speed;
            v = [v[0] * s, v[1] * s];
        }
        let l = cfg.arena_half_width;
        let p = [
            (state.position[0] + v[0] * cfg.dt).clamp(-l, l),
            (state.position[1] + v[1] * cfg.dt).clamp(-l, l),
        ];
        let next = EnvState {
            position: p,
            velocity: v,
            step_count: state.step_count + 1,
        };

        let before_goal = self.goal_distance(state.position);
        let after_goal = self.goal_distance(p);
        let reached_goal = after_goal <= cfg.goal.radius;
        let mut reward = cfg.progress_weight * (before_goal - after_goal)
            - cfg.action_weight * (clamped[0] * clamped[0] + clamped[1] * clamped[1]);
        if reached_goal {
            reward += cfg.goal_bonus;
        }
        let done = reached_goal || next.step_count >= cfg.max_episode_steps;
        let result = StepResult {
            observation: self.observe(&next),
            reward,
            done,
            reached_goal,
            action_clamped,
            before: self.readings(state),
            after: self.readings(&next),
        };
        (next, result)
    }
}

fn sample_interval<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}
