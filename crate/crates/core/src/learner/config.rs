use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sizes of every learner component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub phone_dim: usize,
    pub visual_dim: usize,
    /// Audio frame-latent and context width.
    pub hidden: usize,
    pub visual_hidden: usize,
    pub proj_hidden: usize,
    /// Shared audiovisual embedding width.
    pub embed_dim: usize,
    /// Odd window of the local context mixer, in frames.
    pub context_window: usize,
    pub codebook_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            phone_dim: 12,
            visual_dim: 16,
            hidden: 32,
            visual_hidden: 32,
            proj_hidden: 48,
            embed_dim: 32,
            context_window: 5,
            codebook_size: 32,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.phone_dim,
            self.visual_dim,
            self.hidden,
            self.visual_hidden,
            self.proj_hidden,
            self.embed_dim,
            self.codebook_size,
        ];
        if dims.contains(&0) {
            return Err(Error::BadConfig(format!("model dimensions must be positive: {self:?}")));
        }
        if self.context_window.is_multiple_of(2) {
            return Err(Error::BadConfig(format!("context window must be odd, got {}", self.context_window)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    AuditoryOnly,
    Audiovisual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Weight of the audiovisual term in the total loss.
    pub alpha: f64,
    pub temperature: f64,
    pub learning_rate: f64,
    pub warmup_fraction: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub mask_fraction: f64,
    pub mask_span: usize,
    pub n_negatives: usize,
    /// Validate (and keep the best checkpoint) every this many epochs.
    pub validate_every: usize,
    pub freeze_visual: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            temperature: 0.1,
            learning_rate: 1e-4,
            warmup_fraction: 0.1,
            epochs: 100,
            batch_size: 64,
            mask_fraction: 0.3,
            mask_span: 3,
            n_negatives: 10,
            validate_every: 10,
            freeze_visual: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::BadConfig(format!("{name} = {v} outside [0, 1]")))
            }
        };
        unit("alpha", self.alpha)?;
        unit("warmup_fraction", self.warmup_fraction)?;
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::BadConfig(format!("temperature must be positive, got {}", self.temperature)));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::BadConfig("learning_rate must be finite and nonnegative".into()));
        }
        if !(self.mask_fraction > 0.0 && self.mask_fraction < 1.0) {
            return Err(Error::BadConfig(format!("mask_fraction {} outside (0, 1)", self.mask_fraction)));
        }
        if self.mask_span == 0 || self.batch_size == 0 || self.validate_every == 0 {
            return Err(Error::BadConfig("mask_span, batch_size and validate_every must be >= 1".into()));
        }
        Ok(())
    }
}
