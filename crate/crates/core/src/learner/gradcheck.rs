use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::config::{ModelConfig, Stage, TrainConfig};
use super::model::LearnerState;
use super::objective::{self, AudioRef, SceneRef, UtterancePlan};
use super::params::Init;
use crate::error::Result;
use crate::rng;

/// `max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-12)`; 0 for empty input.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-12)).fold(0.0, f64::max)
}

/// A fixed batch for gradient checking.
#[derive(Debug, Clone)]
pub struct CheckBatch {
    pub frames: Vec<(Vec<f64>, usize)>,
    pub objects: Vec<(Vec<f64>, usize)>,
    pub plans: Vec<UtterancePlan>,
}

impl CheckBatch {
    pub fn random(model: &ModelConfig, cfg: &TrainConfig, size: usize, seed: u64) -> Result<Self> {
        let mut r = rng::stage_rng(seed, "gradcheck-batch");
        let normal = |r: &mut rng::Rng, n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(r)).collect() };
        let mut frames = Vec::with_capacity(size);
        let mut objects = Vec::with_capacity(size);
        for _ in 0..size {
            let t = r.random_range(cfg.mask_span + 2..cfg.mask_span + 6);
            frames.push((normal(&mut r, t * model.phone_dim), t));
            let n = r.random_range(1..=3);
            objects.push((normal(&mut r, n * model.visual_dim), n));
        }
        let plans = frames.iter().map(|(_, t)| objective::sample_plan(*t, cfg, &mut r)).collect::<Result<_>>()?;
        Ok(Self { frames, objects, plans })
    }

    pub fn refs(&self) -> (Vec<AudioRef<'_>>, Vec<SceneRef<'_>>) {
        (
            self.frames.iter().map(|(f, t)| AudioRef { frames: f, n_frames: *t }).collect(),
            self.objects.iter().map(|(f, n)| SceneRef { features: f, n_objects: *n }).collect(),
        )
    }
}

pub fn analytic_gradient(
    state: &LearnerState,
    batch: &CheckBatch,
    cfg: &TrainConfig,
    stage: Stage,
) -> Result<Vec<f64>> {
    let (audio, scenes) = batch.refs();
    let mut g = vec![0.0; state.n_params()];
    objective::objective(state, &audio, Some(&scenes), &batch.plans, cfg, stage, Some(&mut g))?;
    Ok(g)
}

pub fn numeric_gradient(
    state: &LearnerState,
    batch: &CheckBatch,
    cfg: &TrainConfig,
    stage: Stage,
    epsilon: f64,
) -> Result<Vec<f64>> {
    let (audio, scenes) = batch.refs();
    let mut probe = state.clone();
    let mut out = vec![0.0; state.n_params()];
    for (i, slot) in out.iter_mut().enumerate() {
        let orig = probe.params[i];
        probe.params[i] = orig + epsilon;
        let up = objective::objective(&probe, &audio, Some(&scenes), &batch.plans, cfg, stage, None)?;
        probe.params[i] = orig - epsilon;
        let down = objective::objective(&probe, &audio, Some(&scenes), &batch.plans, cfg, stage, None)?;
        probe.params[i] = orig;
        *slot = (up.breakdown.loss_total - down.breakdown.loss_total) / (2.0 * epsilon);
    }
    Ok(out)
}

/// Max relative error between the hand-written gradient of `loss_total`
/// (scaled by `fault_scale`, 1.0 for a genuine check) and central differences.
pub fn gradient_check(
    state: &LearnerState,
    batch: &CheckBatch,
    cfg: &TrainConfig,
    stage: Stage,
    epsilon: f64,
    fault_scale: f64,
) -> Result<f64> {
    let mut analytic = analytic_gradient(state, batch, cfg, stage)?;
    analytic.iter_mut().for_each(|g| *g *= fault_scale);
    let numeric = numeric_gradient(state, batch, cfg, stage, epsilon)?;
    Ok(max_relative_error(&analytic, &numeric))
}

/// Model with every dimension at most 8.
pub fn tiny_model() -> ModelConfig {
    ModelConfig {
        phone_dim: 4,
        visual_dim: 5,
        hidden: 6,
        visual_hidden: 5,
        proj_hidden: 7,
        embed_dim: 4,
        context_window: 3,
        codebook_size: 5,
    }
}

pub fn tiny_train_config() -> TrainConfig {
    TrainConfig { temperature: 0.5, mask_span: 2, n_negatives: 4, batch_size: 3, ..TrainConfig::default() }
}

/// Gradient check of the full audiovisual objective on the tiny model.
pub fn tiny_gradient_check(seed: u64, epsilon: f64, fault_scale: f64) -> Result<f64> {
    let model = tiny_model();
    let cfg = tiny_train_config();
    let state = LearnerState::with_init(model, Init::Dense, seed)?;
    let batch = CheckBatch::random(&model, &cfg, cfg.batch_size, seed)?;
    gradient_check(&state, &batch, &cfg, Stage::Audiovisual, epsilon, fault_scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_gradient_has_zero_error() {
        assert_eq!(max_relative_error(&[], &[]), 0.0);
    }

    #[test]
    fn tiny_model_gradients_are_exact() {
        for seed in 0..3 {
            let err = tiny_gradient_check(seed, 1e-5, 1.0).unwrap();
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn fault_injection_is_detected() {
        let err = tiny_gradient_check(0, 1e-5, 1.01).unwrap();
        assert!(err > 1e-3, "{err}");
    }

    #[test]
    fn auditory_stage_gradients_are_exact() {
        let model = tiny_model();
        let cfg = tiny_train_config();
        let state = LearnerState::with_init(model, Init::Dense, 9).unwrap();
        let batch = CheckBatch::random(&model, &cfg, 2, 9).unwrap();
        let a = analytic_gradient(&state, &batch, &cfg, Stage::AuditoryOnly).unwrap();
        let n = numeric_gradient(&state, &batch, &cfg, Stage::AuditoryOnly, 1e-5).unwrap();
        let vis = &state.slots.visual1_w;
        assert!(a[vis.clone()].iter().all(|&g| g == 0.0));
        let audio: Vec<usize> = (0..state.slots.visual1_w.start).collect();
        let err = max_relative_error(
            &audio.iter().map(|&i| a[i]).collect::<Vec<_>>(),
            &audio.iter().map(|&i| n[i]).collect::<Vec<_>>(),
        );
        assert!(err < 1e-4, "{err}");
    }
}
