use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::Layer;
use crate::naming_stats::CategoryInventory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub variable: String,
    pub rho: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabPoint {
    pub name: String,
    pub threshold: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerScores {
    pub layer: Layer,
    pub abx_error_pct: f64,
    pub lextest_pct: f64,
}

/// Everything measured on one checkpoint. Field order is the serialized order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub bin: String,
    pub abx_error_pct: f64,
    pub abx_layer: Layer,
    pub lextest_pct: f64,
    pub lextest_layer: Layer,
    pub layers: Vec<LayerScores>,
    pub semtest_mean_pct: f64,
    pub semtest_per_category: Vec<f64>,
    /// Retrieval candidates per query; recall chance at k is k / this.
    pub recall_pairs: usize,
    pub recall_at_k: BTreeMap<usize, f64>,
    pub vocab_sizes: Vec<VocabPoint>,
    pub correlations: Vec<Correlation>,
}

impl MetricsReport {
    pub fn validate(&self) -> Result<()> {
        let pct = |name: &str, v: f64| {
            if (0.0..=100.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::malformed("metrics report", format!("{name} = {v} outside [0, 100]")))
            }
        };
        pct("abx_error_pct", self.abx_error_pct)?;
        pct("lextest_pct", self.lextest_pct)?;
        pct("semtest_mean_pct", self.semtest_mean_pct)?;
        for (i, &s) in self.semtest_per_category.iter().enumerate() {
            pct(&format!("semtest_per_category[{i}]"), s)?;
        }
        if let Some((k, r)) = self.recall_at_k.iter().find(|(_, r)| !(0.0..=1.0).contains(*r)) {
            return Err(Error::malformed("metrics report", format!("recall@{k} = {r} outside [0, 1]")));
        }
        let mut by_threshold: Vec<&VocabPoint> = self.vocab_sizes.iter().collect();
        by_threshold.sort_by(|a, b| a.threshold.total_cmp(&b.threshold));
        if by_threshold.windows(2).any(|w| w[1].count > w[0].count) {
            return Err(Error::malformed("metrics report", "vocab sizes increase with threshold"));
        }
        Ok(())
    }

    pub fn vocab(&self, name: &str) -> Option<usize> {
        self.vocab_sizes.iter().find(|v| v.name == name).map(|v| v.count)
    }

    pub fn correlation(&self, variable: &str) -> Option<&Correlation> {
        self.correlations.iter().find(|c| c.variable == variable)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s)?;
        r.validate()?;
        Ok(r)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_json(&text)
    }

    /// Per-category table: category, daily rate, mean area, Semtest score.
    pub fn category_csv(&self, inventory: &CategoryInventory) -> Result<String> {
        if inventory.len() != self.semtest_per_category.len() {
            return Err(Error::LengthMismatch(inventory.len(), self.semtest_per_category.len()));
        }
        let mut out = String::from("id,category,daily_rate,mean_area,semtest_pct\n");
        for (c, s) in inventory.categories().iter().zip(&self.semtest_per_category) {
            writeln!(out, "{},{},{},{},{:.4}", c.id, c.name, c.daily_rate, c.mean_area, s).expect("string write");
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> MetricsReport {
        MetricsReport {
            bin: "10mo".into(),
            abx_error_pct: 12.5,
            abx_layer: Layer::Context,
            lextest_pct: 40.0,
            lextest_layer: Layer::Pooled,
            layers: vec![LayerScores { layer: Layer::Context, abx_error_pct: 12.5, lextest_pct: 40.0 }],
            semtest_mean_pct: 70.0,
            semtest_per_category: vec![60.0, 80.0],
            recall_pairs: 20,
            recall_at_k: [(1, 0.1), (10, 0.5), (5, 0.3)].into_iter().collect(),
            vocab_sizes: vec![
                VocabPoint { name: "above_chance".into(), threshold: 51.0, count: 2 },
                VocabPoint { name: "two_thirds".into(), threshold: 66.7, count: 1 },
            ],
            correlations: vec![Correlation { variable: "daily_rate".into(), rho: 0.5, p: 0.2 }],
        }
    }

    #[test]
    fn json_round_trip_is_stable() {
        let r = report();
        let text = r.to_json().unwrap();
        let back = MetricsReport::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json().unwrap(), text);
        let k1 = text.find("\"1\"").unwrap();
        let k5 = text.find("\"5\"").unwrap();
        let k10 = text.find("\"10\"").unwrap();
        assert!(k1 < k5 && k5 < k10);
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        let mut r = report();
        r.semtest_per_category[0] = 101.0;
        assert!(r.validate().is_err());
        let mut r = report();
        r.vocab_sizes[1].count = 3;
        assert!(r.validate().is_err());
    }
}
