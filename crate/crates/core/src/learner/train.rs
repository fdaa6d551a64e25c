use log::{debug, info, warn};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{Stage, TrainConfig};
use super::loss::LossBreakdown;
use super::model::LearnerState;
use super::objective::{self, AudioRef, SceneRef, UtterancePlan};
use super::optim::{scheduled_lr, Adam};
use crate::error::{Error, Result};
use crate::eval;
use crate::rng;
use crate::world::AudiovisualPair;

/// One training item. Auditory-only items carry no objects.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub frames: Vec<f64>,
    pub n_frames: usize,
    pub features: Vec<f64>,
    pub n_objects: usize,
}

impl Example {
    pub fn from_pair(pair: &AudiovisualPair) -> Self {
        Self {
            frames: pair.utterance.flat_frames(),
            n_frames: pair.utterance.n_frames(),
            features: pair.scene.objects.iter().flat_map(|o| o.features.iter().copied()).collect(),
            n_objects: pair.scene.objects.len(),
        }
    }

    pub fn audio_only(pair: &AudiovisualPair) -> Self {
        Self {
            frames: pair.utterance.flat_frames(),
            n_frames: pair.utterance.n_frames(),
            features: Vec::new(),
            n_objects: 0,
        }
    }

    fn audio(&self) -> AudioRef<'_> {
        AudioRef { frames: &self.frames, n_frames: self.n_frames }
    }

    fn scene(&self) -> SceneRef<'_> {
        SceneRef { features: &self.features, n_objects: self.n_objects }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    /// Mean of both retrieval directions; audiovisual stage only.
    pub recall_at_10: Option<f64>,
    pub loss_aud: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Batch-mean losses over the epoch.
    pub loss: LossBreakdown,
    pub validation: Option<ValidationRecord>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: LearnerState,
    /// Epoch of the retained checkpoint, 0 for the initial state.
    pub best_epoch: usize,
    pub last: LearnerState,
    pub trace: Vec<EpochRecord>,
    pub degenerate_batches: usize,
}

/// One optimizer update with the scheduled learning rate.
pub fn optimizer_step(
    state: &mut LearnerState,
    adam: &mut Adam,
    grads: &[f64],
    step: usize,
    total_steps: usize,
    cfg: &TrainConfig,
) -> Result<f64> {
    let lr = scheduled_lr(cfg.learning_rate, cfg.warmup_fraction, step, total_steps);
    adam.step(&mut state.params, grads, lr)?;
    Ok(lr)
}

fn mean_breakdown(sum: &LossBreakdown, n: usize, has_av: bool) -> LossBreakdown {
    let n = n as f64;
    let av = if has_av { sum.loss_av.map(|v| v / n) } else { None };
    super::loss::total_loss(sum.loss_aud_r / n, sum.loss_aud_d / n, av, sum.alpha)
}

fn accumulate(sum: &mut LossBreakdown, b: &LossBreakdown) {
    sum.loss_aud_r += b.loss_aud_r;
    sum.loss_aud_d += b.loss_aud_d;
    sum.alpha = b.alpha;
    if let Some(av) = b.loss_av {
        sum.loss_av = Some(sum.loss_av.unwrap_or(0.0) + av);
    }
}

fn zero_breakdown() -> LossBreakdown {
    super::loss::total_loss(0.0, 0.0, None, 0.0)
}

/// Utterance and scene embedding rows.
pub type Embeddings = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Utterance and scene embeddings of `examples`, in order.
pub fn embed_examples(state: &LearnerState, examples: &[Example]) -> Result<Embeddings> {
    let mut audio = Vec::with_capacity(examples.len());
    let mut scenes = Vec::with_capacity(examples.len());
    for ex in examples {
        audio.push(state.encode_frames(&ex.frames, ex.n_frames)?.embedding);
        scenes.push(state.encode_objects(&ex.features, ex.n_objects)?);
    }
    Ok((audio, scenes))
}

/// Mean retrieval recall@min(10, N) between utterances and their scenes.
pub fn validation_recall(state: &LearnerState, examples: &[Example]) -> Result<f64> {
    let (audio, scenes) = embed_examples(state, examples)?;
    let s: Vec<Vec<f64>> = audio.iter().map(|a| scenes.iter().map(|v| super::nn::dot(a, v)).collect()).collect();
    Ok(eval::recall_at_k(&s, 10.min(examples.len()))?.mean)
}

struct Validator<'a> {
    examples: &'a [Example],
    plans: Vec<UtterancePlan>,
}

impl<'a> Validator<'a> {
    fn new(examples: &'a [Example], cfg: &TrainConfig) -> Result<Self> {
        let mut r = rng::stage_rng(cfg.seed, "validation-plans");
        let plans = examples.iter().map(|e| objective::sample_plan(e.n_frames, cfg, &mut r)).collect::<Result<_>>()?;
        Ok(Self { examples, plans })
    }

    fn run(&self, state: &LearnerState, cfg: &TrainConfig, stage: Stage) -> Result<ValidationRecord> {
        let mut loss = 0.0;
        let mut n = 0;
        for (ex, plans) in self.examples.chunks(cfg.batch_size).zip(self.plans.chunks(cfg.batch_size)) {
            let audio: Vec<_> = ex.iter().map(Example::audio).collect();
            let out = objective::objective(state, &audio, None, plans, cfg, Stage::AuditoryOnly, None)?;
            loss += out.breakdown.loss_aud;
            n += 1;
        }
        let recall_at_10 = match stage {
            Stage::Audiovisual => Some(validation_recall(state, self.examples)?),
            Stage::AuditoryOnly => None,
        };
        Ok(ValidationRecord { recall_at_10, loss_aud: loss / n as f64 })
    }
}

fn better(stage: Stage, new: &ValidationRecord, best: Option<&ValidationRecord>) -> bool {
    let Some(best) = best else { return true };
    match stage {
        Stage::Audiovisual => new.recall_at_10.unwrap_or(0.0) > best.recall_at_10.unwrap_or(0.0),
        Stage::AuditoryOnly => new.loss_aud < best.loss_aud,
    }
}

/// Train one stage from `init`. Validation runs every `validate_every`
/// epochs and after the final epoch; the best validated state is retained
/// (by recall@10 for the audiovisual stage, by auditory loss otherwise).
/// Without validation data the final state is retained.
pub fn train_stage(
    init: &LearnerState,
    train: &[Example],
    validation: &[Example],
    cfg: &TrainConfig,
    stage: Stage,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if stage == Stage::Audiovisual {
        if let Some(bad) = train.iter().chain(validation).find(|e| e.n_objects == 0) {
            return Err(Error::ConfigMismatch(format!(
                "audiovisual stage needs paired data; an example with {} frames has no objects",
                bad.n_frames
            )));
        }
    }
    let mut state = init.clone();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut best = init.clone();
    let mut best_epoch = 0;
    let mut best_record: Option<ValidationRecord> = None;
    let mut degenerate = 0;
    if cfg.epochs == 0 || train.is_empty() {
        return Ok(TrainOutcome { best, best_epoch, last: state, trace, degenerate_batches: 0 });
    }
    let validator = if validation.is_empty() { None } else { Some(Validator::new(validation, cfg)?) };
    let mut shuffle_rng = rng::stage_rng(cfg.seed, "shuffle");
    let mut mask_rng = rng::stage_rng(cfg.seed, "mask");
    let batches_per_epoch = train.len().div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * batches_per_epoch;
    let mut adam = Adam::new(state.n_params());
    let mut grads = vec![0.0; state.n_params()];
    let frozen = state.slots.visual_encoder();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sum = zero_breakdown();
        for idx in order.chunks(cfg.batch_size) {
            let audio: Vec<_> = idx.iter().map(|&i| train[i].audio()).collect();
            let scenes: Vec<_> = idx.iter().map(|&i| train[i].scene()).collect();
            let plans = objective::sample_plans(&audio, cfg, &mut mask_rng)?;
            grads.iter_mut().for_each(|g| *g = 0.0);
            let out = objective::objective(&state, &audio, Some(&scenes), &plans, cfg, stage, Some(&mut grads))?;
            if out.degenerate_batch {
                degenerate += 1;
            }
            if cfg.freeze_visual {
                for r in &frozen {
                    grads[r.clone()].iter_mut().for_each(|g| *g = 0.0);
                }
            }
            optimizer_step(&mut state, &mut adam, &grads, step, total_steps, cfg)?;
            accumulate(&mut sum, &out.breakdown);
            step += 1;
        }
        let loss = mean_breakdown(&sum, batches_per_epoch, stage == Stage::Audiovisual);
        let validation = match &validator {
            Some(v) if epoch % cfg.validate_every == 0 || epoch == cfg.epochs => {
                let rec = v.run(&state, cfg, stage)?;
                if better(stage, &rec, best_record.as_ref()) {
                    best = state.clone();
                    best_epoch = epoch;
                    best_record = Some(rec);
                }
                info!(
                    "epoch {epoch}: loss_total {:.4} val loss_aud {:.4} recall@10 {}",
                    loss.loss_total,
                    rec.loss_aud,
                    rec.recall_at_10.map_or("-".into(), |r| format!("{r:.3}"))
                );
                Some(rec)
            }
            _ => {
                debug!("epoch {epoch}: loss_total {:.4}", loss.loss_total);
                None
            }
        };
        trace.push(EpochRecord { epoch, loss, validation });
    }
    if validator.is_none() {
        best = state.clone();
        best_epoch = cfg.epochs;
    }
    if degenerate > 0 {
        warn!("{degenerate} single-pair batches contributed no audiovisual loss");
    }
    Ok(TrainOutcome { best, best_epoch, last: state, trace, degenerate_batches: degenerate })
}
