use std::collections::HashSet;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::config::WorldConfig;
use crate::error::{Error, Result};
use crate::naming_stats::CategoryInventory;
use crate::rng::{self, Rng};

/// Fixed affine speaker transform `x -> gain * x + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerTransform {
    /// Row-major `dim × dim` symmetric gain with eigenvalues in [0.8, 1.2].
    pub gain: Vec<f64>,
    pub offset: Vec<f64>,
}

impl SpeakerTransform {
    pub fn identity(dim: usize) -> Self {
        let mut gain = vec![0.0; dim * dim];
        for i in 0..dim {
            gain[i * dim + i] = 1.0;
        }
        Self { gain, offset: vec![0.0; dim] }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let dim = x.len();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.gain[i * dim..(i + 1) * dim];
            *o = self.offset[i] + row.iter().zip(x).map(|(g, v)| g * v).sum::<f64>();
        }
    }

    fn random(dim: usize, offset_sd: f64, rng: &mut Rng) -> Self {
        let basis = random_orthonormal(dim, rng);
        let eig: Vec<f64> = (0..dim).map(|_| rng.random_range(0.8..=1.2)).collect();
        let mut gain = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                gain[i * dim + j] = (0..dim).map(|k| basis[k][i] * eig[k] * basis[k][j]).sum();
            }
        }
        let offset = (0..dim).map(|_| offset_sd * gaussian(rng)).collect();
        Self { gain, offset }
    }
}

/// Everything the generator fixes once per seed.
#[derive(Debug, Clone)]
pub struct World {
    pub config: WorldConfig,
    pub inventory: CategoryInventory,
    /// Unit-norm visual prototype per category.
    pub visual_prototypes: Vec<Vec<f64>>,
    pub phone_prototypes: Vec<Vec<f64>>,
    pub speakers: Vec<SpeakerTransform>,
    /// `lexicon[c][f]` is the phone sequence of word form `f` of category `c`.
    pub lexicon: Vec<Vec<Vec<u16>>>,
    pub fillers: Vec<(String, Vec<u16>)>,
}

impl World {
    pub fn n_categories(&self) -> usize {
        self.visual_prototypes.len()
    }

    /// Word string of form `form` of `category`.
    pub fn word(&self, category: usize, form: usize) -> &str {
        &self.inventory.categories()[category].word_forms[form]
    }
}

pub(crate) fn gaussian(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_orthonormal(dim: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    basis
}

fn unit_vector(dim: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn random_word(len: usize, n_phones: usize, rng: &mut Rng) -> Vec<u16> {
    let mut w: Vec<u16> = Vec::with_capacity(len);
    while w.len() < len {
        let p = rng.random_range(0..n_phones) as u16;
        if w.last() != Some(&p) {
            w.push(p);
        }
    }
    w
}

const MAX_WORD_ATTEMPTS: usize = 10_000;

/// Draws the category prototypes, phone inventory, speakers and lexicon.
/// Deterministic in `config.seed`.
pub fn generate_world(config: &WorldConfig, inventory: &CategoryInventory) -> Result<World> {
    config.validate()?;
    if config.n_categories != inventory.len() {
        return Err(Error::BadConfig(format!(
            "world has {} categories but the inventory lists {}",
            config.n_categories,
            inventory.len()
        )));
    }
    let mut rng = rng::stage_rng(config.seed, "world");

    let visual_prototypes = (0..config.n_categories).map(|_| unit_vector(config.visual_dim, &mut rng)).collect();
    let phone_prototypes =
        (0..config.n_phones).map(|_| (0..config.phone_dim).map(|_| gaussian(&mut rng)).collect()).collect();
    let speakers = (0..config.n_speakers)
        .map(|_| {
            if config.speaker_transforms {
                SpeakerTransform::random(config.phone_dim, config.speaker_offset_sd, &mut rng)
            } else {
                SpeakerTransform::identity(config.phone_dim)
            }
        })
        .collect();

    let mut used: HashSet<Vec<u16>> = HashSet::new();
    let mut fresh = |len: usize, prefix: Option<&[u16]>, rng: &mut Rng| -> Result<Vec<u16>> {
        for _ in 0..MAX_WORD_ATTEMPTS {
            let w = match prefix {
                Some(p) => {
                    let mut w = p.to_vec();
                    w.extend(random_word(len, config.n_phones, rng));
                    w
                }
                None => random_word(len, config.n_phones, rng),
            };
            if w.windows(2).all(|p| p[0] != p[1]) && used.insert(w.clone()) {
                return Ok(w);
            }
        }
        Err(Error::BadConfig("phone inventory too small for a unique lexicon".into()))
    };

    let mut lexicon = Vec::with_capacity(config.n_categories);
    for cat in inventory.categories() {
        let base = fresh(config.word_length.sample(&mut rng), None, &mut rng)?;
        let mut forms = vec![base.clone()];
        // further forms are the base plus one phone, like a plural
        for _ in 1..cat.word_forms.len() {
            forms.push(fresh(1, Some(&base), &mut rng)?);
        }
        lexicon.push(forms);
    }
    let fillers = (0..config.filler_vocab_size)
        .map(|i| Ok((format!("filler-{i}"), fresh(config.word_length.sample(&mut rng), None, &mut rng)?)))
        .collect::<Result<Vec<_>>>()?;

    Ok(World {
        config: config.clone(),
        inventory: inventory.clone(),
        visual_prototypes,
        phone_prototypes,
        speakers,
        lexicon,
        fillers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inventory(n: usize) -> CategoryInventory {
        CategoryInventory::synthetic_zipf(n, 1.0, 5.0, 0).unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = WorldConfig { seed: 42, ..WorldConfig::default() };
        let a = generate_world(&cfg, &inventory(20)).unwrap();
        let b = generate_world(&cfg, &inventory(20)).unwrap();
        assert_eq!(a.visual_prototypes, b.visual_prototypes);
        assert_eq!(a.phone_prototypes, b.phone_prototypes);
        assert_eq!(a.speakers, b.speakers);
        assert_eq!(a.lexicon, b.lexicon);
        let c = generate_world(&WorldConfig { seed: 43, ..cfg }, &inventory(20)).unwrap();
        assert_ne!(a.visual_prototypes, c.visual_prototypes);
    }

    #[test]
    fn prototypes_are_unit_norm() {
        let cfg = WorldConfig { n_categories: 2, visual_dim: 8, ..WorldConfig::default() };
        let w = generate_world(&cfg, &inventory(2)).unwrap();
        for p in &w.visual_prototypes {
            let n: f64 = p.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        let d: f64 = w.visual_prototypes[0].iter().zip(&w.visual_prototypes[1]).map(|(a, b)| a * b).sum();
        assert!(d.abs() < 1.0);
    }

    #[test]
    fn speaker_gains_have_bounded_spectrum() {
        let w = generate_world(&WorldConfig::default(), &inventory(20)).unwrap();
        let dim = w.config.phone_dim;
        for s in &w.speakers {
            // Rayleigh quotients of a symmetric matrix stay within its spectrum.
            let mut r = rng::rng_from(1);
            for _ in 0..20 {
                let v = unit_vector(dim, &mut r);
                let mut gv = vec![0.0; dim];
                SpeakerTransform { gain: s.gain.clone(), offset: vec![0.0; dim] }.apply(&v, &mut gv);
                let q: f64 = v.iter().zip(&gv).map(|(a, b)| a * b).sum();
                assert!((0.8 - 1e-9..=1.2 + 1e-9).contains(&q), "rayleigh {q}");
            }
        }
    }

    #[test]
    fn lexicon_is_unique_and_well_formed() {
        let w =
            generate_world(&WorldConfig { n_categories: 80, ..WorldConfig::default() }, &CategoryInventory::coco80())
                .unwrap();
        let mut seen = HashSet::new();
        for (c, forms) in w.lexicon.iter().enumerate() {
            assert_eq!(forms.len(), w.inventory.categories()[c].word_forms.len());
            for f in forms {
                assert!(seen.insert(f.clone()));
                assert!((2..=6).contains(&f.len()));
            }
        }
        for (_, f) in &w.fillers {
            assert!(seen.insert(f.clone()));
        }
    }

    #[test]
    fn identity_speakers_when_disabled() {
        let cfg = WorldConfig { n_speakers: 1, speaker_transforms: false, ..WorldConfig::default() };
        let w = generate_world(&cfg, &inventory(20)).unwrap();
        assert_eq!(w.speakers[0], SpeakerTransform::identity(cfg.phone_dim));
    }

    #[test]
    fn rejects_category_count_mismatch() {
        assert!(matches!(generate_world(&WorldConfig::default(), &inventory(5)), Err(Error::BadConfig(_))));
    }
}
