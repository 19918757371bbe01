use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the `decay` coefficient is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    /// `lr_t = lr * decay^epoch`.
    #[default]
    LrDecay,
    /// Constant rate, coupled L2 penalty `decay * θ` added to each gradient.
    WeightDecay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub decay: f64,
    pub decay_mode: DecayMode,
    pub batch_size: usize,
    /// Total optimizer steps.
    pub iters: u64,
    pub seed: u64,
    /// Share of the dataset (taken from the end) held out for validation.
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            decay: 0.95,
            decay_mode: DecayMode::LrDecay,
            batch_size: 4,
            iters: 500,
            seed: 0,
            val_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be finite and non-negative, got {}", self.lr)));
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return Err(Error::Config(format!("decay must be finite and non-negative, got {}", self.decay)));
        }
        if self.decay_mode == DecayMode::LrDecay && self.decay > 1.0 {
            return Err(Error::Config(format!("lr decay factor {} exceeds 1", self.decay)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config(format!("val_fraction must lie in [0, 1), got {}", self.val_fraction)));
        }
        Ok(())
    }

    /// Number of held-out samples for a dataset of `n`.
    pub fn val_count(&self, n: usize) -> usize {
        if self.val_fraction <= 0.0 || n < 2 {
            return 0;
        }
        ((self.val_fraction * n as f64).ceil() as usize).clamp(1, n - 1)
    }

    pub fn steps_per_epoch(&self, n_train: usize) -> u64 {
        n_train.div_ceil(self.batch_size).max(1) as u64
    }

    /// Learning rate of the update that follows `completed` steps.
    pub fn lr_at(&self, completed: u64, steps_per_epoch: u64) -> f64 {
        match self.decay_mode {
            DecayMode::LrDecay => self.lr * self.decay.powi((completed / steps_per_epoch) as i32),
            DecayMode::WeightDecay => self.lr,
        }
    }

    pub fn weight_decay(&self) -> f64 {
        match self.decay_mode {
            DecayMode::LrDecay => 0.0,
            DecayMode::WeightDecay => self.decay,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.lr, c.decay, c.batch_size), (1e-3, 0.95, 4));
        c.validate().unwrap();
    }

    #[test]
    fn schedule() {
        let c = TrainConfig::default();
        assert_eq!(c.lr_at(0, 5), 1e-3);
        assert_eq!(c.lr_at(4, 5), 1e-3);
        assert_eq!(c.lr_at(5, 5), 1e-3 * 0.95);
        assert_eq!(c.lr_at(12, 5), 1e-3 * 0.95 * 0.95);
        assert_eq!(c.weight_decay(), 0.0);
        let w = TrainConfig {
            decay_mode: DecayMode::WeightDecay,
            ..c
        };
        assert_eq!(w.lr_at(100, 5), 1e-3);
        assert_eq!(w.weight_decay(), 0.95);
    }

    #[test]
    fn split_sizes() {
        let c = TrainConfig::default();
        assert_eq!(c.val_count(20), 4);
        assert_eq!(c.val_count(3), 1);
        assert_eq!(c.val_count(1), 0);
        assert_eq!(c.steps_per_epoch(16), 4);
        assert_eq!(c.steps_per_epoch(17), 5);
    }

    #[test]
    fn rejects_bad_values() {
        for c in [
            TrainConfig { lr: -1.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { val_fraction: 1.0, ..Default::default() },
            TrainConfig { decay: 1.5, ..Default::default() },
        ] {
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<TrainConfig>(r#"{"lr": 0.1, "momentum": 0.9}"#).is_err());
        let c: TrainConfig = serde_json::from_str(r#"{"decay_mode": "weight_decay"}"#).unwrap();
        assert_eq!(c.decay_mode, DecayMode::WeightDecay);
    }
}
