use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning rate interpolated linearly from `start` to `end` over `horizon` updates,
/// then held at `end`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSchedule {
    pub start: f64,
    pub end: f64,
    pub horizon: u64,
}

impl LinearSchedule {
    pub fn new(start: f64, end: f64, horizon: u64) -> Self {
        LinearSchedule {
            start,
            end,
            horizon,
        }
    }

    pub fn constant(rate: f64) -> Self {
        LinearSchedule::new(rate, rate, 1)
    }

    /// Rate applied by the `step`-th update (zero based).
    pub fn rate(&self, step: u64) -> f64 {
        if self.horizon <= 1 {
            return if step == 0 { self.start } else { self.end };
        }
        let frac = (step as f64 / (self.horizon - 1) as f64).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}

/// Adam optimizer state for one flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub schedule: LinearSchedule,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
}

impl Adam {
    pub fn new(num_params: usize, schedule: LinearSchedule) -> Self {
        Adam {
            schedule,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Learning rate the next call to [`Adam::step`] will use.
    pub fn current_rate(&self) -> f64 {
        self.schedule.rate(self.step_count)
    }

    pub fn num_params(&self) -> usize {
        self.first_moment.len()
    }

    /// One descent step `params -= lr * m_hat / (sqrt(v_hat) + eps)`.
    ///
    /// Rejects non-finite gradients without touching any state.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::Shape {
                expected: self.first_moment.len(),
                got: grads.len(),
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Training(format!(
                "non-finite gradient at parameter {i}: {}",
                grads[i]
            )));
        }
        let lr = self.current_rate();
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }

    /// Gradient ascent: a descent step on the negated gradient.
    pub fn ascend(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        let negated: Vec<f64> = grads.iter().map(|g| -g).collect();
        self.step(params, &negated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_identity() {
        let mut adam = Adam::new(3, LinearSchedule::constant(0.1));
        let mut p = vec![1.0, -2.0, 3.5];
        adam.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.5]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_step_matches_hand_evaluation() {
        let lr = 0.01;
        let mut adam = Adam::new(3, LinearSchedule::constant(lr));
        let g = [0.5, -3.0, 1e-3];
        let mut p = vec![0.0; 3];
        adam.step(&mut p, &g).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            let expected = -lr * gi / (gi.abs() + 1e-8);
            assert!((pi - expected).abs() < 1e-15, "{pi} vs {expected}");
        }
    }

    #[test]
    fn schedule_reaches_end_value() {
        let s = LinearSchedule::new(3e-5, 1e-6, 1000);
        assert_eq!(s.rate(0), 3e-5);
        assert!((s.rate(999) - 1e-6).abs() < 1e-20);
        assert!((s.rate(5000) - 1e-6).abs() < 1e-20);
        let mid = s.rate(500);
        assert!(mid < 3e-5 && mid > 1e-6);

        let mut adam = Adam::new(1, s);
        let mut p = vec![0.0];
        for _ in 0..999 {
            adam.step(&mut p, &[1.0]).unwrap();
        }
        assert!((adam.current_rate() - 1e-6).abs() < 1e-20);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut adam = Adam::new(2, LinearSchedule::constant(0.1));
        let mut p = vec![1.0, 1.0];
        let err = adam.step(&mut p, &[0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::Training(_)));
        assert_eq!(p, vec![1.0, 1.0]);
        assert_eq!(adam.step_count(), 0);
    }

    #[test]
    fn ascent_moves_uphill() {
        let mut adam = Adam::new(1, LinearSchedule::constant(0.1));
        let mut p = vec![0.0];
        adam.ascend(&mut p, &[2.0]).unwrap();
        assert!(p[0] > 0.0);
    }
}
