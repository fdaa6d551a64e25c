use std::ops::Range;

use rand_distr::{Distribution, StandardNormal};

use super::config::ModelConfig;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub shape: Vec<usize>,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Offsets of every tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slots {
    pub frame1_w: Range<usize>,
    pub frame1_b: Range<usize>,
    pub frame2_w: Range<usize>,
    pub frame2_b: Range<usize>,
    pub mask: Range<usize>,
    pub context_w: Range<usize>,
    pub context_b: Range<usize>,
    pub pool_query: Range<usize>,
    pub codebook: Range<usize>,
    pub visual1_w: Range<usize>,
    pub visual1_b: Range<usize>,
    pub visual2_w: Range<usize>,
    pub visual2_b: Range<usize>,
    pub aproj1_w: Range<usize>,
    pub aproj1_b: Range<usize>,
    pub aproj2_w: Range<usize>,
    pub aproj2_b: Range<usize>,
    pub vproj1_w: Range<usize>,
    pub vproj1_b: Range<usize>,
    pub vproj2_w: Range<usize>,
    pub vproj2_b: Range<usize>,
}

/// Parameter manifest in storage order.
pub fn layout(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let ModelConfig {
        phone_dim: d,
        visual_dim: dv,
        hidden: h,
        visual_hidden: hv,
        proj_hidden: p,
        embed_dim: e,
        context_window: w,
        codebook_size: v,
    } = *cfg;
    let spec = |name, shape: &[usize]| ParamSpec { name, shape: shape.to_vec() };
    vec![
        spec("audio.frame1.weight", &[h, d]),
        spec("audio.frame1.bias", &[h]),
        spec("audio.frame2.weight", &[h, h]),
        spec("audio.frame2.bias", &[h]),
        spec("audio.mask_embedding", &[h]),
        spec("audio.context.weight", &[w, h, h]),
        spec("audio.context.bias", &[h]),
        spec("audio.pool.query", &[h]),
        spec("audio.quantizer.codebook", &[v, h]),
        spec("visual.layer1.weight", &[hv, dv]),
        spec("visual.layer1.bias", &[hv]),
        spec("visual.layer2.weight", &[hv, hv]),
        spec("visual.layer2.bias", &[hv]),
        spec("audio_projection.layer1.weight", &[p, h]),
        spec("audio_projection.layer1.bias", &[p]),
        spec("audio_projection.layer2.weight", &[e, p]),
        spec("audio_projection.layer2.bias", &[e]),
        spec("visual_projection.layer1.weight", &[p, hv]),
        spec("visual_projection.layer1.bias", &[p]),
        spec("visual_projection.layer2.weight", &[e, p]),
        spec("visual_projection.layer2.bias", &[e]),
    ]
}

impl Slots {
    pub fn new(cfg: &ModelConfig) -> (Self, usize) {
        let mut offset = 0;
        let ranges: Vec<Range<usize>> = layout(cfg)
            .iter()
            .map(|s| {
                let r = offset..offset + s.len();
                offset = r.end;
                r
            })
            .collect();
        let mut it = ranges.into_iter();
        let mut next = || it.next().expect("layout length");
        let slots = Slots {
            frame1_w: next(),
            frame1_b: next(),
            frame2_w: next(),
            frame2_b: next(),
            mask: next(),
            context_w: next(),
            context_b: next(),
            pool_query: next(),
            codebook: next(),
            visual1_w: next(),
            visual1_b: next(),
            visual2_w: next(),
            visual2_b: next(),
            aproj1_w: next(),
            aproj1_b: next(),
            aproj2_w: next(),
            aproj2_b: next(),
            vproj1_w: next(),
            vproj1_b: next(),
            vproj2_w: next(),
            vproj2_b: next(),
        };
        (slots, offset)
    }

    /// Ranges owned by the visual encoder.
    pub fn visual_encoder(&self) -> [Range<usize>; 4] {
        [self.visual1_w.clone(), self.visual1_b.clone(), self.visual2_w.clone(), self.visual2_b.clone()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Scaled-normal weights, zero biases, zero final audio projection.
    Default,
    /// Every tensor random; used to exercise all gradient paths.
    Dense,
}

pub fn initialize(cfg: &ModelConfig, slots: &Slots, n: usize, init: Init, rng: &mut Rng) -> Vec<f64> {
    let mut data = vec![0.0; n];
    let mut normal = |r: &std::ops::Range<usize>, sd: f64, data: &mut Vec<f64>| {
        for v in &mut data[r.clone()] {
            let z: f64 = StandardNormal.sample(rng);
            *v = sd * z;
        }
    };
    let fan = |k: usize| 1.0 / (k as f64).sqrt();
    let h = cfg.hidden;
    normal(&slots.frame1_w, fan(cfg.phone_dim), &mut data);
    normal(&slots.frame2_w, fan(h), &mut data);
    normal(&slots.mask, 0.5, &mut data);
    normal(&slots.context_w, fan(h * cfg.context_window), &mut data);
    normal(&slots.codebook, 0.5, &mut data);
    normal(&slots.visual1_w, fan(cfg.visual_dim), &mut data);
    normal(&slots.visual2_w, fan(cfg.visual_hidden), &mut data);
    normal(&slots.aproj1_w, fan(h), &mut data);
    normal(&slots.vproj1_w, fan(cfg.visual_hidden), &mut data);
    normal(&slots.vproj2_w, fan(cfg.proj_hidden), &mut data);
    if init == Init::Dense {
        normal(&slots.aproj2_w, fan(cfg.proj_hidden), &mut data);
        for r in [
            &slots.frame1_b,
            &slots.frame2_b,
            &slots.context_b,
            &slots.pool_query,
            &slots.visual1_b,
            &slots.visual2_b,
            &slots.aproj1_b,
            &slots.aproj2_b,
            &slots.vproj1_b,
            &slots.vproj2_b,
        ] {
            normal(r, 0.3, &mut data);
        }
    }
    data
}
