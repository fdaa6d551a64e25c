use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::nn::{self, acc_matvec, acc_matvec_t, acc_outer, affine, tanh_backward, tanh_inplace};
use super::params::{self, Init, ParamSpec, Slots};
use crate::error::{Error, Result};
use crate::rng;
use crate::world::{Scene, Utterance};

/// All trainable parameters of the learner in one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub config: ModelConfig,
    pub slots: Slots,
    pub params: Vec<f64>,
}

/// Internal stage at which a representation is read out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    /// Frame latents, averaged over frames.
    Frame,
    /// Context-mixer output, averaged over frames.
    Context,
    /// Attention-pooled utterance vector before projection.
    Pooled,
    /// Projected utterance embedding.
    Final,
}

impl Layer {
    pub const ALL: [Layer; 4] = [Layer::Frame, Layer::Context, Layer::Pooled, Layer::Final];

    pub fn as_str(&self) -> &'static str {
        match self {
            Layer::Frame => "frame",
            Layer::Context => "context",
            Layer::Pooled => "pooled",
            Layer::Final => "final",
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Layer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Layer::ALL.into_iter().find(|l| l.as_str() == s).ok_or_else(|| Error::UnknownLayer(s.to_string()))
    }
}

pub(crate) struct FrameCache {
    pub t: usize,
    pub h1: Vec<f64>,
    pub z: Vec<f64>,
}

pub(crate) struct PoolCache {
    pub attn: Vec<f64>,
    pub pooled: Vec<f64>,
}

pub(crate) struct MlpCache {
    pub hidden: Vec<f64>,
    pub out: Vec<f64>,
}

pub(crate) struct VisualCache {
    pub n: usize,
    pub h1: Vec<f64>,
    pub u: Vec<f64>,
    pub mean: Vec<f64>,
    pub proj: MlpCache,
}

/// Every intermediate of a clean (unmasked) utterance encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioEncoding {
    pub n_frames: usize,
    /// `n_frames × hidden`
    pub latents: Vec<f64>,
    /// `n_frames × hidden`
    pub context: Vec<f64>,
    pub pooled: Vec<f64>,
    pub embedding: Vec<f64>,
}

struct Mlp {
    w1: Range<usize>,
    b1: Range<usize>,
    w2: Range<usize>,
    b2: Range<usize>,
}

impl LearnerState {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        Self::with_init(config, Init::Default, seed)
    }

    pub fn with_init(config: ModelConfig, init: Init, seed: u64) -> Result<Self> {
        config.validate()?;
        let (slots, n) = Slots::new(&config);
        let mut rng = rng::stage_rng(seed, "init");
        let params = params::initialize(&config, &slots, n, init, &mut rng);
        Ok(Self { config, slots, params })
    }

    pub fn from_params(config: ModelConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let (slots, n) = Slots::new(&config);
        if params.len() != n {
            return Err(Error::DimMismatch { expected: n, got: params.len() });
        }
        Ok(Self { config, slots, params })
    }

    pub fn layout(&self) -> Vec<ParamSpec> {
        params::layout(&self.config)
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|v| v.is_finite())
    }

    #[inline]
    pub(crate) fn p(&self, r: &Range<usize>) -> &[f64] {
        &self.params[r.clone()]
    }

    fn audio_mlp(&self) -> Mlp {
        let s = &self.slots;
        Mlp { w1: s.aproj1_w.clone(), b1: s.aproj1_b.clone(), w2: s.aproj2_w.clone(), b2: s.aproj2_b.clone() }
    }

    fn visual_mlp(&self) -> Mlp {
        let s = &self.slots;
        Mlp { w1: s.vproj1_w.clone(), b1: s.vproj1_b.clone(), w2: s.vproj2_w.clone(), b2: s.vproj2_b.clone() }
    }

    // ---- audio frame encoder -------------------------------------------

    pub(crate) fn frames_forward(&self, frames: &[f64], t: usize) -> FrameCache {
        let (d, h) = (self.config.phone_dim, self.config.hidden);
        let s = &self.slots;
        let mut h1 = vec![0.0; t * h];
        let mut z = vec![0.0; t * h];
        for i in 0..t {
            let x = &frames[i * d..(i + 1) * d];
            let a1 = &mut h1[i * h..(i + 1) * h];
            affine(self.p(&s.frame1_w), self.p(&s.frame1_b), x, a1);
            tanh_inplace(a1);
            let zi = &mut z[i * h..(i + 1) * h];
            affine(self.p(&s.frame2_w), self.p(&s.frame2_b), &h1[i * h..(i + 1) * h], zi);
            tanh_inplace(zi);
        }
        FrameCache { t, h1, z }
    }

    /// `dz` is consumed (overwritten with pre-activation gradients).
    pub(crate) fn frames_backward(&self, frames: &[f64], cache: &FrameCache, dz: &mut [f64], grads: &mut [f64]) {
        let (d, h) = (self.config.phone_dim, self.config.hidden);
        let s = &self.slots;
        let mut dh1 = vec![0.0; h];
        for i in 0..cache.t {
            let da2 = &mut dz[i * h..(i + 1) * h];
            tanh_backward(&cache.z[i * h..(i + 1) * h], da2);
            let h1 = &cache.h1[i * h..(i + 1) * h];
            acc_outer(&mut grads[s.frame2_w.clone()], da2, h1);
            nn::add_into(&mut grads[s.frame2_b.clone()], da2);
            dh1.iter_mut().for_each(|v| *v = 0.0);
            acc_matvec_t(self.p(&s.frame2_w), da2, &mut dh1);
            tanh_backward(h1, &mut dh1);
            acc_outer(&mut grads[s.frame1_w.clone()], &dh1, &frames[i * d..(i + 1) * d]);
            nn::add_into(&mut grads[s.frame1_b.clone()], &dh1);
        }
    }

    // ---- local context mixer -------------------------------------------

    /// `c_t = tanh(b + Σ_o W_o · zin_{t+o-r})` with zero padding.
    pub(crate) fn context_forward(&self, zin: &[f64], t: usize) -> Vec<f64> {
        let h = self.config.hidden;
        let w = self.config.context_window;
        let r = w / 2;
        let weights = self.p(&self.slots.context_w);
        let bias = self.p(&self.slots.context_b);
        let mut c = vec![0.0; t * h];
        for i in 0..t {
            let ci = &mut c[i * h..(i + 1) * h];
            ci.copy_from_slice(bias);
            for o in 0..w {
                let Some(src) = (i + o).checked_sub(r).filter(|&s| s < t) else { continue };
                acc_matvec(&weights[o * h * h..(o + 1) * h * h], &zin[src * h..(src + 1) * h], ci);
            }
            tanh_inplace(ci);
        }
        c
    }

    /// `dc` is consumed. Gradient w.r.t. the context input goes to `dzin`.
    pub(crate) fn context_backward(&self, zin: &[f64], c: &[f64], dc: &mut [f64], grads: &mut [f64], dzin: &mut [f64]) {
        let h = self.config.hidden;
        let w = self.config.context_window;
        let r = w / 2;
        let t = c.len() / h;
        let weights = self.p(&self.slots.context_w);
        tanh_backward(c, dc);
        for i in 0..t {
            let dpre = &dc[i * h..(i + 1) * h];
            if dpre.iter().all(|&g| g == 0.0) {
                continue;
            }
            nn::add_into(&mut grads[self.slots.context_b.clone()], dpre);
            for o in 0..w {
                let Some(src) = (i + o).checked_sub(r).filter(|&s| s < t) else { continue };
                let base = self.slots.context_w.start + o * h * h;
                acc_outer(&mut grads[base..base + h * h], dpre, &zin[src * h..(src + 1) * h]);
                acc_matvec_t(&weights[o * h * h..(o + 1) * h * h], dpre, &mut dzin[src * h..(src + 1) * h]);
            }
        }
    }

    // ---- learned-query attention pooling -------------------------------

    pub(crate) fn pool_forward(&self, c: &[f64], t: usize) -> PoolCache {
        let h = self.config.hidden;
        let q = self.p(&self.slots.pool_query);
        let scale = 1.0 / (h as f64).sqrt();
        let scores: Vec<f64> = (0..t).map(|i| scale * nn::dot(q, &c[i * h..(i + 1) * h])).collect();
        let attn = nn::softmax(&scores);
        let mut pooled = vec![0.0; h];
        for (i, a) in attn.iter().enumerate() {
            pooled.iter_mut().zip(&c[i * h..(i + 1) * h]).for_each(|(p, v)| *p += a * v);
        }
        PoolCache { attn, pooled }
    }

    pub(crate) fn pool_backward(
        &self,
        c: &[f64],
        cache: &PoolCache,
        dpooled: &[f64],
        grads: &mut [f64],
        dc: &mut [f64],
    ) {
        let h = self.config.hidden;
        let q = self.p(&self.slots.pool_query);
        let scale = 1.0 / (h as f64).sqrt();
        let da: Vec<f64> = (0..cache.attn.len()).map(|i| nn::dot(&c[i * h..(i + 1) * h], dpooled)).collect();
        let mean_da: f64 = cache.attn.iter().zip(&da).map(|(a, d)| a * d).sum();
        for (i, &a) in cache.attn.iter().enumerate() {
            let ds = a * (da[i] - mean_da) * scale;
            let ci = &c[i * h..(i + 1) * h];
            let dci = &mut dc[i * h..(i + 1) * h];
            for k in 0..h {
                dci[k] += a * dpooled[k] + ds * q[k];
            }
            let dq = &mut grads[self.slots.pool_query.clone()];
            dq.iter_mut().zip(ci).for_each(|(g, v)| *g += ds * v);
        }
    }

    // ---- projection heads ----------------------------------------------

    fn mlp_forward(&self, m: &Mlp, x: &[f64]) -> MlpCache {
        let p = m.b1.len();
        let e = m.b2.len();
        let mut hidden = vec![0.0; p];
        affine(self.p(&m.w1), self.p(&m.b1), x, &mut hidden);
        tanh_inplace(&mut hidden);
        let mut out = vec![0.0; e];
        affine(self.p(&m.w2), self.p(&m.b2), &hidden, &mut out);
        MlpCache { hidden, out }
    }

    fn mlp_backward(&self, m: &Mlp, x: &[f64], cache: &MlpCache, dout: &[f64], grads: &mut [f64], dx: &mut [f64]) {
        acc_outer(&mut grads[m.w2.clone()], dout, &cache.hidden);
        nn::add_into(&mut grads[m.b2.clone()], dout);
        let mut dh = vec![0.0; cache.hidden.len()];
        acc_matvec_t(self.p(&m.w2), dout, &mut dh);
        tanh_backward(&cache.hidden, &mut dh);
        acc_outer(&mut grads[m.w1.clone()], &dh, x);
        nn::add_into(&mut grads[m.b1.clone()], &dh);
        acc_matvec_t(self.p(&m.w1), &dh, dx);
    }

    pub(crate) fn audio_projection_forward(&self, pooled: &[f64]) -> MlpCache {
        self.mlp_forward(&self.audio_mlp(), pooled)
    }

    pub(crate) fn audio_projection_backward(
        &self,
        pooled: &[f64],
        cache: &MlpCache,
        dout: &[f64],
        grads: &mut [f64],
        dpooled: &mut [f64],
    ) {
        self.mlp_backward(&self.audio_mlp(), pooled, cache, dout, grads, dpooled)
    }

    // ---- visual encoder --------------------------------------------------

    pub(crate) fn visual_forward(&self, features: &[f64], n: usize) -> VisualCache {
        let (dv, hv) = (self.config.visual_dim, self.config.visual_hidden);
        let s = &self.slots;
        let mut h1 = vec![0.0; n * hv];
        let mut u = vec![0.0; n * hv];
        let mut mean = vec![0.0; hv];
        for i in 0..n {
            let a = &mut h1[i * hv..(i + 1) * hv];
            affine(self.p(&s.visual1_w), self.p(&s.visual1_b), &features[i * dv..(i + 1) * dv], a);
            tanh_inplace(a);
            let ui = &mut u[i * hv..(i + 1) * hv];
            affine(self.p(&s.visual2_w), self.p(&s.visual2_b), &h1[i * hv..(i + 1) * hv], ui);
            tanh_inplace(ui);
            nn::add_into(&mut mean, ui);
        }
        mean.iter_mut().for_each(|v| *v /= n as f64);
        let proj = self.mlp_forward(&self.visual_mlp(), &mean);
        VisualCache { n, h1, u, mean, proj }
    }

    pub(crate) fn visual_backward(&self, features: &[f64], cache: &VisualCache, dout: &[f64], grads: &mut [f64]) {
        let (dv, hv) = (self.config.visual_dim, self.config.visual_hidden);
        let s = &self.slots;
        let mut dmean = vec![0.0; hv];
        self.mlp_backward(&self.visual_mlp(), &cache.mean, &cache.proj, dout, grads, &mut dmean);
        let inv = 1.0 / cache.n as f64;
        let mut dh1 = vec![0.0; hv];
        for i in 0..cache.n {
            let mut du: Vec<f64> = dmean.iter().map(|g| g * inv).collect();
            tanh_backward(&cache.u[i * hv..(i + 1) * hv], &mut du);
            let h1 = &cache.h1[i * hv..(i + 1) * hv];
            acc_outer(&mut grads[s.visual2_w.clone()], &du, h1);
            nn::add_into(&mut grads[s.visual2_b.clone()], &du);
            dh1.iter_mut().for_each(|v| *v = 0.0);
            acc_matvec_t(self.p(&s.visual2_w), &du, &mut dh1);
            tanh_backward(h1, &mut dh1);
            acc_outer(&mut grads[s.visual1_w.clone()], &dh1, &features[i * dv..(i + 1) * dv]);
            nn::add_into(&mut grads[s.visual1_b.clone()], &dh1);
        }
    }

    // ---- public encoders -------------------------------------------------

    /// Clean forward pass over a frame sequence (`n_frames × phone_dim`).
    pub fn encode_frames(&self, frames: &[f64], n_frames: usize) -> Result<AudioEncoding> {
        if n_frames == 0 {
            return Err(Error::EmptyInput("utterance has no frames"));
        }
        if frames.len() != n_frames * self.config.phone_dim {
            return Err(Error::DimMismatch { expected: n_frames * self.config.phone_dim, got: frames.len() });
        }
        let fc = self.frames_forward(frames, n_frames);
        let context = self.context_forward(&fc.z, n_frames);
        let pool = self.pool_forward(&context, n_frames);
        let proj = self.audio_projection_forward(&pool.pooled);
        Ok(AudioEncoding { n_frames, latents: fc.z, context, pooled: pool.pooled, embedding: proj.out })
    }

    /// Frame latents and utterance embedding.
    pub fn encode_utterance(&self, utterance: &Utterance) -> Result<(Vec<f64>, Vec<f64>)> {
        let enc = self.encode_frames(&utterance.flat_frames(), utterance.n_frames())?;
        Ok((enc.latents, enc.embedding))
    }

    /// Scene embedding from `n_objects × visual_dim` features, mean pooled.
    pub fn encode_objects(&self, features: &[f64], n_objects: usize) -> Result<Vec<f64>> {
        if n_objects == 0 {
            return Err(Error::EmptyInput("scene has no objects"));
        }
        if features.len() != n_objects * self.config.visual_dim {
            return Err(Error::DimMismatch { expected: n_objects * self.config.visual_dim, got: features.len() });
        }
        Ok(self.visual_forward(features, n_objects).proj.out)
    }

    pub fn encode_scene(&self, scene: &Scene) -> Result<Vec<f64>> {
        let features: Vec<f64> = scene.objects.iter().flat_map(|o| o.features.iter().copied()).collect();
        self.encode_objects(&features, scene.objects.len())
    }

    /// One vector per item read out at `layer`; sequence stages are averaged
    /// over frames.
    pub fn probe(&self, frames: &[f64], n_frames: usize, layer: Layer) -> Result<Vec<f64>> {
        let enc = self.encode_frames(frames, n_frames)?;
        let h = self.config.hidden;
        let mean = |seq: &[f64]| {
            let mut m = vec![0.0; h];
            for row in seq.chunks(h) {
                nn::add_into(&mut m, row);
            }
            m.iter_mut().for_each(|v| *v /= n_frames as f64);
            m
        };
        Ok(match layer {
            Layer::Frame => mean(&enc.latents),
            Layer::Context => mean(&enc.context),
            Layer::Pooled => enc.pooled,
            Layer::Final => enc.embedding,
        })
    }
}

/// Semantic similarity score: the dot product of the two embeddings.
pub fn similarity(audio_embedding: &[f64], scene_embedding: &[f64]) -> Result<f64> {
    if audio_embedding.len() != scene_embedding.len() {
        return Err(Error::DimMismatch { expected: audio_embedding.len(), got: scene_embedding.len() });
    }
    Ok(nn::dot(audio_embedding, scene_embedding))
}
