use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Range {
    pub min: usize,
    pub max: usize,
}

impl Range {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    pub fn sample(&self, rng: &mut impl rand::Rng) -> usize {
        rng.random_range(self.min..=self.max)
    }

    fn check(&self, what: &str, min_allowed: usize) -> Result<()> {
        if self.min > self.max || self.min < min_allowed {
            return Err(Error::BadConfig(format!(
                "{what}: range [{}, {}] must be nonempty with min >= {min_allowed}",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub n_categories: usize,
    pub n_phones: usize,
    pub phone_dim: usize,
    pub visual_dim: usize,
    pub n_speakers: usize,
    pub frames_per_phone: Range,
    /// Phones per category word form.
    pub word_length: Range,
    pub phone_noise_sd: f64,
    pub visual_noise_sd: f64,
    pub filler_vocab_size: usize,
    /// Distractor objects added to every scene.
    pub objects_per_scene: Range,
    pub filler_words_per_utterance: Range,
    /// Distinct categories named per pooled utterance.
    pub named_per_utterance: Range,
    /// Probability that a named category's referent is in the scene.
    pub referent_present_prob: f64,
    /// Probability that a named word is said twice.
    pub repeat_prob: f64,
    /// When false every speaker is the identity transform.
    pub speaker_transforms: bool,
    pub speaker_offset_sd: f64,
    /// Overwritten from the global seed when run from an experiment config.
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            n_categories: 20,
            n_phones: 24,
            phone_dim: 12,
            visual_dim: 16,
            n_speakers: 10,
            frames_per_phone: Range::new(2, 3),
            word_length: Range::new(2, 5),
            phone_noise_sd: 0.4,
            visual_noise_sd: 0.3,
            filler_vocab_size: 60,
            objects_per_scene: Range::new(0, 1),
            filler_words_per_utterance: Range::new(1, 3),
            named_per_utterance: Range::new(1, 2),
            referent_present_prob: 0.5,
            repeat_prob: 0.1,
            speaker_transforms: true,
            speaker_offset_sd: 0.6,
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_categories", self.n_categories),
            ("n_phones", self.n_phones),
            ("phone_dim", self.phone_dim),
            ("visual_dim", self.visual_dim),
            ("n_speakers", self.n_speakers),
            ("filler_vocab_size", self.filler_vocab_size),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::BadConfig(format!("{name} must be at least 1")));
            }
        }
        if self.n_phones < 2 {
            return Err(Error::BadConfig("n_phones must be at least 2".into()));
        }
        self.frames_per_phone.check("frames_per_phone", 1)?;
        self.word_length.check("word_length", 1)?;
        self.objects_per_scene.check("objects_per_scene", 0)?;
        self.filler_words_per_utterance.check("filler_words_per_utterance", 0)?;
        self.named_per_utterance.check("named_per_utterance", 1)?;
        for (name, sd) in [
            ("phone_noise_sd", self.phone_noise_sd),
            ("visual_noise_sd", self.visual_noise_sd),
            ("speaker_offset_sd", self.speaker_offset_sd),
        ] {
            if !(sd >= 0.0 && sd.is_finite()) {
                return Err(Error::BadConfig(format!("{name} must be finite and >= 0")));
            }
        }
        for (name, p) in [("referent_present_prob", self.referent_present_prob), ("repeat_prob", self.repeat_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::BadConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}
