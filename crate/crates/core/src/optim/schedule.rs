use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mini-batch training protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSchedule {
    pub base_lr: f64,
    /// Fraction of the total steps spent ramping the learning rate up.
    pub warmup_fraction: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    /// Decoupled weight decay; zero by default.
    pub weight_decay: f64,
    /// Resample each ensemble member's data with replacement every epoch.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            base_lr: 1e-3,
            warmup_fraction: 0.05,
            batch_size: 64,
            epochs: 1,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            weight_decay: 0.0,
            bootstrap: false,
            seed: 0,
        }
    }
}

impl TrainSchedule {
    /// Batch size 16 used for the adapter ensemble, 64 otherwise.
    pub fn for_adapters() -> Self {
        TrainSchedule {
            batch_size: 16,
            ..Self::default()
        }
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return bad(format!("base_lr must be positive, got {}", self.base_lr));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad(format!("warmup_fraction must lie in [0, 1), got {}", self.warmup_fraction));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch_size and epochs must be positive".into());
        }
        let (b1, b2) = self.adam_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) || !(self.adam_eps > 0.0) {
            return bad("adam betas must lie in [0, 1) and eps must be positive".into());
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight_decay must be >= 0".into());
        }
        Ok(())
    }

    pub fn steps_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size)
    }

    pub fn lr_schedule(&self, n: usize) -> LrSchedule {
        let total = self.epochs * self.steps_per_epoch(n);
        LrSchedule::new(self.base_lr, total, self.warmup_fraction)
    }
}

/// Linear warmup from 0 to the base rate, then cosine decay to 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub total_steps: usize,
    pub warmup_steps: usize,
}

impl LrSchedule {
    pub fn new(base_lr: f64, total_steps: usize, warmup_fraction: f64) -> Self {
        let warmup_steps = ((warmup_fraction * total_steps as f64).ceil() as usize).min(total_steps);
        LrSchedule {
            base_lr,
            total_steps,
            warmup_steps,
        }
    }

    pub fn lr(&self, step: usize) -> f64 {
        let w = self.warmup_steps;
        if step < w {
            return self.base_lr * step as f64 / w as f64;
        }
        let span = self.total_steps.saturating_sub(w);
        if span == 0 {
            return self.base_lr;
        }
        let progress = ((step - w) as f64 / span as f64).min(1.0);
        self.base_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_then_cosine() {
        let s = LrSchedule::new(0.1, 200, 0.05);
        assert_eq!(s.warmup_steps, 10);
        assert_eq!(s.lr(0), 0.0);
        assert_eq!(s.lr(5), 0.05);
        assert_eq!(s.lr(10), 0.1);
        assert!(s.lr(199) < 1e-4 * 0.1 * 10.0);
        let mut peak_count = 0;
        for t in 1..200 {
            if s.lr(t) == 0.1 {
                peak_count += 1;
            }
            if t > 10 {
                assert!(s.lr(t) <= s.lr(t - 1));
            } else {
                assert!(s.lr(t) >= s.lr(t - 1));
            }
            assert!((s.lr(t) - s.lr(t - 1)).abs() <= 0.1 / 10.0 + 1e-15);
        }
        assert_eq!(peak_count, 1);
    }

    #[test]
    fn no_warmup_starts_at_peak() {
        let s = LrSchedule::new(1.0, 4, 0.0);
        assert_eq!(s.lr(0), 1.0);
    }

    #[test]
    fn schedule_validation() {
        assert!(TrainSchedule::default().validate().is_ok());
        assert_eq!(TrainSchedule::for_adapters().batch_size, 16);
        let bad = TrainSchedule {
            warmup_fraction: 1.0,
            ..TrainSchedule::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(TrainSchedule::default().steps_per_epoch(130), 3);
    }
}
