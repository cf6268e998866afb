//! Training hyper-parameters and the warm-restart cosine schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub sgdr_t0_epochs: usize,
    pub sgdr_tmult: usize,
    /// Epochs at constant `lr_max` before the first cosine cycle.
    pub warm_epochs: usize,
    /// Complete cosine cycles without a new best epoch loss before stopping.
    pub patience_cycles: usize,
    pub max_epochs: usize,
    pub cutmix_enabled: bool,
    pub cutmix_p: f64,
    pub cutmix_alpha: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_dim: 400,
            batch_size: 16,
            lr_max: 0.05,
            lr_min: 0.0005,
            sgdr_t0_epochs: 1,
            sgdr_tmult: 2,
            warm_epochs: 1,
            patience_cycles: 1,
            max_epochs: 256,
            cutmix_enabled: false,
            cutmix_p: 0.5,
            cutmix_alpha: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::TrainConfig(m.to_string()));
        if self.hidden_dim == 0 {
            return fail("hidden_dim must be at least 1");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if !(self.lr_min > 0.0 && self.lr_min <= self.lr_max && self.lr_max.is_finite()) {
            return fail("learning rates must satisfy 0 < lr_min <= lr_max");
        }
        if self.sgdr_t0_epochs == 0 || self.sgdr_tmult == 0 {
            return fail("sgdr_t0_epochs and sgdr_tmult must be at least 1");
        }
        if self.max_epochs == 0 {
            return fail("max_epochs must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.cutmix_p) {
            return fail("cutmix_p must lie in [0, 1]");
        }
        if self.cutmix_alpha.is_nan() || self.cutmix_alpha <= 0.0 {
            return fail("cutmix_alpha must be positive");
        }
        Ok(())
    }
}

/// Learning rate for optimiser step `global_step` (0-based).
///
/// `lr_max` during the warm epochs, then cosine cycles from `lr_max` down
/// towards `lr_min` of `T0, T0·Tmult, T0·Tmult², …` epochs each.
pub fn sgdr_lr(global_step: usize, steps_per_epoch: usize, cfg: &TrainConfig) -> f64 {
    assert!(steps_per_epoch >= 1, "steps_per_epoch must be at least 1");
    let warm = cfg.warm_epochs * steps_per_epoch;
    if global_step < warm {
        return cfg.lr_max;
    }
    let mut t = global_step - warm;
    let mut len = cfg.sgdr_t0_epochs * steps_per_epoch;
    while t >= len {
        t -= len;
        len = len.saturating_mul(cfg.sgdr_tmult.max(1));
    }
    let phase = std::f64::consts::PI * t as f64 / len as f64;
    cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + phase.cos())
}

/// Whether a cosine cycle finishes exactly after `epochs_done` epochs.
pub fn is_cycle_end(epochs_done: usize, cfg: &TrainConfig) -> bool {
    if epochs_done <= cfg.warm_epochs {
        return false;
    }
    let mut end = cfg.warm_epochs;
    let mut len = cfg.sgdr_t0_epochs;
    while end < epochs_done {
        end += len;
        len = len.saturating_mul(cfg.sgdr_tmult.max(1));
    }
    end == epochs_done
}
