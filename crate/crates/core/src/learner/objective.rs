use rand::seq::index;
use rand::Rng as _;

use super::config::{Stage, TrainConfig};
use super::loss::{self, LossBreakdown, DIVERSITY_WEIGHT};
use super::model::LearnerState;
use super::nn;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Frames of one utterance, `n_frames × phone_dim`, row-major.
#[derive(Debug, Clone, Copy)]
pub struct AudioRef<'a> {
    pub frames: &'a [f64],
    pub n_frames: usize,
}

/// Object features of one scene, `n_objects × visual_dim`, row-major.
#[derive(Debug, Clone, Copy)]
pub struct SceneRef<'a> {
    pub features: &'a [f64],
    pub n_objects: usize,
}

/// Which frames of an utterance are masked and which frames supply the
/// distractor codes for each masked position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtterancePlan {
    pub masked: Vec<bool>,
    pub positions: Vec<usize>,
    /// `n_negatives` frame indices per masked position.
    pub distractors: Vec<Vec<usize>>,
}

pub fn sample_plan(n_frames: usize, cfg: &TrainConfig, rng: &mut Rng) -> Result<UtterancePlan> {
    let span = cfg.mask_span;
    if n_frames <= span {
        return Err(Error::UtteranceTooShort { frames: n_frames, needed: span + 1 });
    }
    let n_starts = n_frames - span + 1;
    let wanted = ((cfg.mask_fraction * n_frames as f64 / span as f64).round() as usize).max(1);
    let mut masked = vec![false; n_frames];
    for s in index::sample(rng, n_starts, wanted.min(n_starts)) {
        masked[s..s + span].iter_mut().for_each(|m| *m = true);
    }
    let positions: Vec<usize> = (0..n_frames).filter(|&t| masked[t]).collect();
    let distractors = positions
        .iter()
        .map(|&t| {
            (0..cfg.n_negatives)
                .map(|_| {
                    let d = rng.random_range(0..n_frames - 1);
                    if d >= t {
                        d + 1
                    } else {
                        d
                    }
                })
                .collect()
        })
        .collect();
    Ok(UtterancePlan { masked, positions, distractors })
}

pub fn sample_plans(audio: &[AudioRef<'_>], cfg: &TrainConfig, rng: &mut Rng) -> Result<Vec<UtterancePlan>> {
    audio.iter().map(|a| sample_plan(a.n_frames, cfg, rng)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveOutput {
    pub breakdown: LossBreakdown,
    /// Single-pair batch: the audiovisual term contributed nothing.
    pub degenerate_batch: bool,
}

fn nearest_code(codebook: &[f64], h: usize, z: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, q) in codebook.chunks(h).enumerate() {
        let d: f64 = q.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

/// Loss of one batch under fixed masking plans; accumulates the gradient of
/// `loss_total` into `grads` when given.
///
/// The auditory-only stage ignores `scenes` and optimizes `loss_aud` alone.
pub fn objective(
    state: &LearnerState,
    audio: &[AudioRef<'_>],
    scenes: Option<&[SceneRef<'_>]>,
    plans: &[UtterancePlan],
    cfg: &TrainConfig,
    stage: Stage,
    mut grads: Option<&mut [f64]>,
) -> Result<ObjectiveOutput> {
    let mc = &state.config;
    let (h, v, d) = (mc.hidden, mc.codebook_size, mc.phone_dim);
    let b = audio.len();
    if b == 0 {
        return Err(Error::EmptyInput("empty batch"));
    }
    if plans.len() != b {
        return Err(Error::LengthMismatch(b, plans.len()));
    }
    let scenes = match stage {
        Stage::AuditoryOnly => None,
        Stage::Audiovisual => {
            let s = scenes.ok_or_else(|| Error::InvalidInput("audiovisual objective needs scenes".into()))?;
            if s.len() != b {
                return Err(Error::LengthMismatch(b, s.len()));
            }
            Some(s)
        }
    };
    for (a, p) in audio.iter().zip(plans) {
        if a.n_frames == 0 {
            return Err(Error::EmptyInput("utterance has no frames"));
        }
        if a.frames.len() != a.n_frames * d {
            return Err(Error::DimMismatch { expected: a.n_frames * d, got: a.frames.len() });
        }
        if p.masked.len() != a.n_frames {
            return Err(Error::LengthMismatch(a.n_frames, p.masked.len()));
        }
    }
    let (w_av, w_aud) = match scenes {
        Some(_) => (cfg.alpha, 1.0 - cfg.alpha),
        None => (0.0, 1.0),
    };
    let tau = cfg.temperature;
    let want_grad = grads.is_some();
    let codebook = state.p(&state.slots.codebook).to_vec();
    let mask_vec = state.p(&state.slots.mask).to_vec();

    // Forward: frame latents and the masked context pass.
    let frame_caches: Vec<_> = audio.iter().map(|a| state.frames_forward(a.frames, a.n_frames)).collect();
    let mut zins = Vec::with_capacity(b);
    let mut masked_ctx = Vec::with_capacity(b);
    for ((fc, p), a) in frame_caches.iter().zip(plans).zip(audio) {
        let mut zin = fc.z.clone();
        for t in p.positions.iter().copied() {
            zin[t * h..(t + 1) * h].copy_from_slice(&mask_vec);
        }
        masked_ctx.push(state.context_forward(&zin, a.n_frames));
        zins.push(zin);
    }

    // Masked prediction.
    let total_masked: usize = plans.iter().map(|p| p.positions.len()).sum();
    let mut loss_r = 0.0;
    let mut dz: Vec<Vec<f64>> = frame_caches.iter().map(|fc| vec![0.0; fc.z.len()]).collect();
    let mut dc_masked: Vec<Vec<f64>> = masked_ctx.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut dcodebook = vec![0.0; codebook.len()];
    if total_masked > 0 {
        let inv_m = 1.0 / total_masked as f64;
        for u in 0..b {
            let z = &frame_caches[u].z;
            let codes: Vec<usize> = z.chunks(h).map(|zt| nearest_code(&codebook, h, zt)).collect();
            for (pi, &t) in plans[u].positions.iter().enumerate() {
                let ct = &masked_ctx[u][t * h..(t + 1) * h];
                let cand: Vec<usize> =
                    std::iter::once(codes[t]).chain(plans[u].distractors[pi].iter().map(|&f| codes[f])).collect();
                let logits: Vec<f64> =
                    cand.iter().map(|&k| nn::cosine(ct, &codebook[k * h..(k + 1) * h]) / tau).collect();
                let (l, g) = loss::first_class_cross_entropy(&logits);
                loss_r += l * inv_m;
                if want_grad {
                    let dct = &mut dc_masked[u][t * h..(t + 1) * h];
                    for (&k, gj) in cand.iter().zip(&g) {
                        let scale = w_aud * inv_m * gj / tau;
                        nn::cosine_backward(
                            ct,
                            &codebook[k * h..(k + 1) * h],
                            scale,
                            dct,
                            &mut dcodebook[k * h..(k + 1) * h],
                        );
                    }
                }
            }
        }
    }

    // Diversity over soft code assignments of every clean frame.
    let n_frames_total: usize = audio.iter().map(|a| a.n_frames).sum();
    let mut assign: Vec<Vec<f64>> = Vec::with_capacity(n_frames_total);
    let mut mean_probs = vec![0.0; v];
    for fc in &frame_caches {
        for zt in fc.z.chunks(h) {
            let logits: Vec<f64> =
                codebook.chunks(h).map(|q| -q.iter().zip(zt).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).collect();
            let p = nn::softmax(&logits);
            nn::add_into(&mut mean_probs, &p);
            assign.push(p);
        }
    }
    let inv_n = 1.0 / n_frames_total as f64;
    mean_probs.iter_mut().for_each(|p| *p *= inv_n);
    let loss_d = loss::diversity_penalty(&mean_probs);
    if want_grad {
        let ppl = loss::perplexity(&mean_probs);
        let scale = w_aud * DIVERSITY_WEIGHT;
        let dmean: Vec<f64> =
            mean_probs.iter().map(|&p| scale * ppl / v as f64 * (p.max(1e-300).ln() + 1.0) * inv_n).collect();
        let mut row = 0;
        for (u, fc) in frame_caches.iter().enumerate() {
            for (t, zt) in fc.z.chunks(h).enumerate() {
                let p = &assign[row];
                row += 1;
                let avg: f64 = p.iter().zip(&dmean).map(|(a, b)| a * b).sum();
                let dzt = &mut dz[u][t * h..(t + 1) * h];
                for k in 0..v {
                    let dl = p[k] * (dmean[k] - avg);
                    if dl == 0.0 {
                        continue;
                    }
                    let q = &codebook[k * h..(k + 1) * h];
                    let dq = &mut dcodebook[k * h..(k + 1) * h];
                    for j in 0..h {
                        let diff = zt[j] - q[j];
                        dzt[j] -= 2.0 * diff * dl;
                        dq[j] += 2.0 * diff * dl;
                    }
                }
            }
        }
    }

    // Audiovisual contrastive term on clean utterance embeddings.
    let mut loss_av = None;
    let mut degenerate = false;
    if let Some(scenes) = scenes {
        let mut clean_ctx = Vec::with_capacity(b);
        let mut pools = Vec::with_capacity(b);
        let mut projs = Vec::with_capacity(b);
        for (fc, a) in frame_caches.iter().zip(audio) {
            let c = state.context_forward(&fc.z, a.n_frames);
            let pc = state.pool_forward(&c, a.n_frames);
            projs.push(state.audio_projection_forward(&pc.pooled));
            pools.push(pc);
            clean_ctx.push(c);
        }
        let mut vis = Vec::with_capacity(b);
        for s in scenes {
            if s.n_objects == 0 {
                return Err(Error::EmptyInput("scene has no objects"));
            }
            if s.features.len() != s.n_objects * mc.visual_dim {
                return Err(Error::DimMismatch { expected: s.n_objects * mc.visual_dim, got: s.features.len() });
            }
            vis.push(state.visual_forward(s.features, s.n_objects));
        }
        if b == 1 {
            degenerate = true;
            loss_av = Some(0.0);
        } else {
            let a_emb: Vec<Vec<f64>> = projs.iter().map(|p| p.out.clone()).collect();
            let v_emb: Vec<Vec<f64>> = vis.iter().map(|p| p.proj.out.clone()).collect();
            let nce = loss::infonce_with_grad(&a_emb, &v_emb, tau)?;
            loss_av = Some(nce.loss);
            if let Some(g) = grads.as_deref_mut() {
                for u in 0..b {
                    let da: Vec<f64> = nce.d_audio[u].iter().map(|x| x * w_av).collect();
                    let mut dpooled = vec![0.0; h];
                    state.audio_projection_backward(&pools[u].pooled, &projs[u], &da, g, &mut dpooled);
                    let mut dc = vec![0.0; clean_ctx[u].len()];
                    state.pool_backward(&clean_ctx[u], &pools[u], &dpooled, g, &mut dc);
                    state.context_backward(&frame_caches[u].z, &clean_ctx[u], &mut dc, g, &mut dz[u]);
                    let dv: Vec<f64> = nce.d_scene[u].iter().map(|x| x * w_av).collect();
                    state.visual_backward(scenes[u].features, &vis[u], &dv, g);
                }
            }
        }
    }

    if let Some(g) = grads {
        for u in 0..b {
            let mut dzin = vec![0.0; zins[u].len()];
            state.context_backward(&zins[u], &masked_ctx[u], &mut dc_masked[u], g, &mut dzin);
            for t in 0..audio[u].n_frames {
                let row = &dzin[t * h..(t + 1) * h];
                if plans[u].masked[t] {
                    nn::add_into(&mut g[state.slots.mask.clone()], row);
                } else {
                    nn::add_into(&mut dz[u][t * h..(t + 1) * h], row);
                }
            }
            state.frames_backward(audio[u].frames, &frame_caches[u], &mut dz[u], g);
        }
        nn::add_into(&mut g[state.slots.codebook.clone()], &dcodebook);
    }

    let alpha = match scenes {
        Some(_) => cfg.alpha,
        None => 0.0,
    };
    Ok(ObjectiveOutput { breakdown: loss::total_loss(loss_r, loss_d, loss_av, alpha), degenerate_batch: degenerate })
}

/// Masked-prediction and diversity terms for a batch, with fresh masking.
pub fn masked_prediction_loss(
    state: &LearnerState,
    audio: &[AudioRef<'_>],
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<(f64, f64)> {
    let plans = sample_plans(audio, cfg, rng)?;
    let out = objective(state, audio, None, &plans, cfg, Stage::AuditoryOnly, None)?;
    Ok((out.breakdown.loss_aud_r, out.breakdown.loss_aud_d))
}
