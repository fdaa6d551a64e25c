use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{ModelConfig, TrainConfig};
use crate::naming_stats::{CategoryInventory, Condition};
use crate::rng;
use crate::world::{TestSetConfig, WorldConfig};

/// Where per-category naming rates come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum StatisticsSource {
    /// Inventory file; the shipped 80-category table when `path` is absent.
    Table {
        #[serde(default)]
        path: Option<PathBuf>,
        #[serde(default)]
        uniform_daily_rate: Option<f64>,
    },
    /// `base_rate / rank^exponent` over `world.n_categories` categories.
    SyntheticZipf {
        exponent: f64,
        base_rate: f64,
        #[serde(default)]
        uniform_daily_rate: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgeBin {
    pub name: String,
    pub duration_days: u32,
    #[serde(default = "natural")]
    pub condition: Condition,
}

fn natural() -> Condition {
    Condition::Natural
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoolConfig {
    /// Candidate pairs generated before subset selection.
    pub size: usize,
    /// Share of named categories drawn uniformly rather than by daily rate,
    /// so rare categories are plentiful enough for uniform bins.
    pub uniform_mix: f64,
    pub validation_fraction: f64,
    /// Cap on validation pairs used for retrieval scoring.
    pub validation_max: usize,
    /// Utterances in the auditory-only corpus.
    pub auditory_utterances: usize,
    pub deficit_tolerance: u64,
    /// Draw smaller bins from within the largest bin's subset.
    pub nested: bool,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            size: 16_000,
            uniform_mix: 0.5,
            validation_fraction: 0.05,
            validation_max: 300,
            auditory_utterances: 1500,
            deficit_tolerance: 0,
            nested: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StageConfigs {
    pub auditory: TrainConfig,
    pub audiovisual: TrainConfig,
    /// Audiovisual bins start from the auditory checkpoint, which must exist.
    pub require_auditory: bool,
}

impl Default for StageConfigs {
    fn default() -> Self {
        let auditory =
            TrainConfig { learning_rate: 2e-3, epochs: 6, batch_size: 32, validate_every: 2, ..TrainConfig::default() };
        let audiovisual = TrainConfig {
            learning_rate: 5e-3,
            epochs: 30,
            batch_size: 32,
            validate_every: 10,
            ..TrainConfig::default()
        };
        Self { auditory, audiovisual, require_auditory: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub tests: TestSetConfig,
    pub recall_k: Vec<usize>,
    pub two_thirds: f64,
    pub four_fifths: f64,
    /// Above-chance margin in percentage points; two binomial standard
    /// errors of a per-category score when absent.
    pub chance_band: Option<f64>,
    pub permutations: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tests: TestSetConfig::default(),
            recall_k: vec![1, 5, 10],
            two_thirds: 200.0 / 3.0,
            four_fifths: 80.0,
            chance_band: None,
            permutations: crate::eval::DEFAULT_PERMUTATIONS,
        }
    }
}

impl EvalConfig {
    pub fn chance_band(&self, n_categories: usize) -> f64 {
        self.chance_band.unwrap_or_else(|| crate::eval::chance_band(self.tests.tokens_per_type, n_categories))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Default output directory; `--out` takes precedence.
    pub out_dir: Option<PathBuf>,
    pub statistics: StatisticsSource,
    pub world: WorldConfig,
    pub pool: PoolConfig,
    pub age_bins: Vec<AgeBin>,
    pub model: ModelConfig,
    pub train: StageConfigs,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: None,
            statistics: StatisticsSource::SyntheticZipf { exponent: 1.0, base_rate: 7.72, uniform_daily_rate: None },
            world: WorldConfig::default(),
            pool: PoolConfig::default(),
            age_bins: vec![
                AgeBin { name: "8mo".into(), duration_days: 60, condition: Condition::Natural },
                AgeBin { name: "10mo".into(), duration_days: 120, condition: Condition::Natural },
                AgeBin { name: "12mo".into(), duration_days: 180, condition: Condition::Natural },
            ],
            model: ModelConfig::default(),
            train: StageConfigs::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Name of the auditory-only stage in checkpoints and reports.
pub const AUDITORY_BIN: &str = "auditory";

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::BadConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config file; a relative table path resolves against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::BadConfig(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let StatisticsSource::Table { path: Some(p), .. } = &mut cfg.statistics {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::BadConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.model.validate()?;
        self.train.auditory.validate()?;
        self.train.audiovisual.validate()?;
        if self.model.phone_dim != self.world.phone_dim || self.model.visual_dim != self.world.visual_dim {
            return Err(Error::BadConfig(format!(
                "model input dims ({}, {}) must match world dims ({}, {})",
                self.model.phone_dim, self.model.visual_dim, self.world.phone_dim, self.world.visual_dim
            )));
        }
        if self.age_bins.is_empty() {
            return Err(Error::BadConfig("age_bins must not be empty".into()));
        }
        let mut names = HashSet::new();
        for b in &self.age_bins {
            if b.duration_days == 0 {
                return Err(Error::BadConfig(format!("bin {} has zero duration", b.name)));
            }
            if b.name.is_empty() || b.name == AUDITORY_BIN || b.name.contains(['/', '\\', '.']) {
                return Err(Error::BadConfig(format!("invalid bin name {:?}", b.name)));
            }
            if !names.insert(&b.name) {
                return Err(Error::BadConfig(format!("duplicate bin name {}", b.name)));
            }
        }
        let p = &self.pool;
        if p.size == 0 || !(0.0..=1.0).contains(&p.uniform_mix) {
            return Err(Error::BadConfig("pool.size must be positive and pool.uniform_mix in [0, 1]".into()));
        }
        if !(p.validation_fraction > 0.0 && p.validation_fraction < 1.0) || p.validation_max < 2 {
            return Err(Error::BadConfig("pool.validation_fraction must be in (0, 1), validation_max >= 2".into()));
        }
        if self.eval.recall_k.contains(&0) {
            return Err(Error::BadConfig("recall_k entries must be positive".into()));
        }
        for t in [self.eval.two_thirds, self.eval.four_fifths] {
            if !(50.0..=100.0).contains(&t) {
                return Err(Error::BadConfig(format!("vocabulary threshold {t} outside [50, 100]")));
            }
        }
        if let Some(b) = self.eval.chance_band {
            if !(0.0..=50.0).contains(&b) {
                return Err(Error::BadConfig(format!("chance_band {b} outside [0, 50]")));
            }
        }
        let uniform = match &self.statistics {
            StatisticsSource::Table { uniform_daily_rate, .. } => uniform_daily_rate,
            StatisticsSource::SyntheticZipf { exponent, base_rate, uniform_daily_rate } => {
                if !(*exponent >= 0.0 && *base_rate > 0.0) {
                    return Err(Error::BadConfig("zipf exponent must be >= 0 and base_rate > 0".into()));
                }
                uniform_daily_rate
            }
        };
        if let Some(r) = uniform {
            if !(*r >= 0.0 && r.is_finite()) {
                return Err(Error::BadConfig(format!("uniform_daily_rate {r} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn bin(&self, name: &str) -> Result<&AgeBin> {
        self.age_bins
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::BadConfig(format!("no age bin named {name}")))
    }

    pub fn stage_seed(&self, stage: &str) -> u64 {
        rng::derive_seed(self.seed, stage)
    }

    /// The category inventory, checked against `world.n_categories`.
    pub fn inventory(&self) -> Result<CategoryInventory> {
        let (inv, uniform) = match &self.statistics {
            StatisticsSource::Table { path, uniform_daily_rate } => {
                let inv = match path {
                    Some(p) => CategoryInventory::load(p).map_err(|e| match e {
                        Error::MissingArtifact(p) => Error::BadConfig(format!("missing inventory {}", p.display())),
                        other => other,
                    })?,
                    None => CategoryInventory::coco80(),
                };
                (inv, *uniform_daily_rate)
            }
            StatisticsSource::SyntheticZipf { exponent, base_rate, uniform_daily_rate } => (
                CategoryInventory::synthetic_zipf(
                    self.world.n_categories,
                    *exponent,
                    *base_rate,
                    self.stage_seed("inventory"),
                )
                .map_err(|e| Error::BadConfig(e.to_string()))?,
                *uniform_daily_rate,
            ),
        };
        let inv = match uniform {
            Some(r) => inv.with_uniform_rate(r)?,
            None => inv,
        };
        if inv.len() != self.world.n_categories {
            return Err(Error::BadConfig(format!(
                "inventory has {} categories but world.n_categories = {}",
                inv.len(),
                self.world.n_categories
            )));
        }
        Ok(inv)
    }

    /// World config with its seed derived from the global seed.
    pub fn world_config(&self) -> WorldConfig {
        WorldConfig { seed: self.stage_seed("world"), ..self.world.clone() }
    }

    pub fn auditory_train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.stage_seed(&format!("train/{AUDITORY_BIN}")), ..self.train.auditory.clone() }
    }

    pub fn audiovisual_train_config(&self, bin: &str) -> TrainConfig {
        TrainConfig { seed: self.stage_seed(&format!("train/{bin}")), ..self.train.audiovisual.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(ExperimentConfig::from_toml("sed = 1"), Err(Error::BadConfig(_))));
        assert!(ExperimentConfig::from_toml("[world]\nn_categores = 3").is_err());
        assert!(ExperimentConfig::from_toml("[statistics]\nsource = \"table\"\npth = \"x\"").is_err());
        assert!(ExperimentConfig::from_toml("[train.auditory]\nlr = 1.0").is_err());
    }

    #[test]
    fn table_source_uses_shipped_inventory() {
        let text = "[statistics]\nsource = \"table\"\n[world]\nn_categories = 80\n";
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.inventory().unwrap().len(), 80);
        let bad = ExperimentConfig::from_toml("[statistics]\nsource = \"table\"\n").unwrap();
        assert!(matches!(bad.inventory(), Err(Error::BadConfig(_))));
    }

    #[test]
    fn bins_are_validated() {
        let mut cfg = ExperimentConfig::default();
        cfg.age_bins.push(cfg.age_bins[0].clone());
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.age_bins.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.age_bins[0].duration_days = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn stage_seeds_depend_on_global_seed() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig::default().with_seed(1);
        assert_ne!(a.world_config().seed, b.world_config().seed);
        assert_ne!(a.audiovisual_train_config("8mo").seed, a.audiovisual_train_config("10mo").seed);
    }
}
