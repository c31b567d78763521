//! Cyclic (triangular) schedules: linear ramp from `base` to `peak`
//! over the warmup, linear decay to `floor`, then constant. The same
//! shape drives the connection-formation rate, the prune ratio, and the
//! network-wide learning-rate multiplier.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("warmup_steps must be positive")]
    ZeroWarmup,
    #[error("decay_steps must be positive")]
    ZeroDecay,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CyclicSchedule {
    pub base: f64,
    pub peak: f64,
    pub floor: f64,
    pub warmup_steps: u64,
    pub decay_steps: u64,
}

impl CyclicSchedule {
    pub fn new(
        base: f64,
        peak: f64,
        floor: f64,
        warmup_steps: u64,
        decay_steps: u64,
    ) -> Result<Self, ScheduleError> {
        if warmup_steps == 0 {
            return Err(ScheduleError::ZeroWarmup);
        }
        if decay_steps == 0 {
            return Err(ScheduleError::ZeroDecay);
        }
        Ok(Self {
            base,
            peak,
            floor,
            warmup_steps,
            decay_steps,
        })
    }

    /// A schedule that returns `value` at every step.
    pub fn constant(value: f64) -> Self {
        Self {
            base: value,
            peak: value,
            floor: value,
            warmup_steps: 1,
            decay_steps: 1,
        }
    }

    pub fn at(&self, step: u64) -> f64 {
        // knots are exact; segments interpolate linearly between them
        if step == 0 {
            self.base
        } else if step == self.warmup_steps {
            self.peak
        } else if step >= self.warmup_steps + self.decay_steps {
            self.floor
        } else if step < self.warmup_steps {
            let frac = step as f64 / self.warmup_steps as f64;
            self.base + (self.peak - self.base) * frac
        } else {
            let frac = (step - self.warmup_steps) as f64 / self.decay_steps as f64;
            self.peak + (self.floor - self.peak) * frac
        }
    }

    /// Rounded non-negative integer value, used for edge-growth counts.
    pub fn count_at(&self, step: u64) -> usize {
        self.at(step).max(0.0).round() as usize
    }
}

/// The triangular rate at `step`. Thin wrapper kept for symmetry with
/// the other per-step operations.
pub fn cyclic_rate(step: u64, schedule: &CyclicSchedule) -> f64 {
    schedule.at(step)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_zero_returns_base() {
        let s = CyclicSchedule::new(1.0, 5.0, 0.5, 10, 20).unwrap();
        assert_eq!(s.at(0), 1.0);
    }

    #[test]
    fn warmup_end_returns_peak() {
        let s = CyclicSchedule::new(1.0, 5.0, 0.5, 10, 20).unwrap();
        assert_eq!(s.at(10), 5.0);
    }

    #[test]
    fn decay_midpoint_is_mean_of_peak_and_floor() {
        let s = CyclicSchedule::new(1.0, 5.0, 0.5, 10, 20).unwrap();
        let mid = s.at(20);
        assert!((mid - (5.0 + 0.5) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn tail_is_constant_floor() {
        let s = CyclicSchedule::new(1.0, 5.0, 0.5, 10, 20).unwrap();
        assert_eq!(s.at(30), 0.5);
        assert_eq!(s.at(31), 0.5);
        assert_eq!(s.at(1_000_000), 0.5);
    }

    #[test]
    fn zero_lengths_are_rejected() {
        assert_eq!(
            CyclicSchedule::new(1.0, 2.0, 0.0, 0, 5).unwrap_err(),
            ScheduleError::ZeroWarmup
        );
        assert_eq!(
            CyclicSchedule::new(1.0, 2.0, 0.0, 5, 0).unwrap_err(),
            ScheduleError::ZeroDecay
        );
    }

    #[test]
    fn constant_schedule_is_flat() {
        let s = CyclicSchedule::constant(3.25);
        for step in [0u64, 1, 2, 100] {
            assert_eq!(s.at(step), 3.25);
        }
    }

    #[test]
    fn interpolation_is_piecewise_linear_everywhere() {
        let s = CyclicSchedule::new(-1.0, 4.0, 2.0, 7, 13).unwrap();
        for step in 0..=7u64 {
            let expected = -1.0 + 5.0 * step as f64 / 7.0;
            assert!((s.at(step) - expected).abs() < 1e-12);
        }
        for step in 8..=20u64 {
            let expected = 4.0 + (2.0 - 4.0) * (step - 7) as f64 / 13.0;
            assert!((s.at(step) - expected).abs() < 1e-12);
        }
    }
}
