use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::generate::{gaussian, World};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub category: u32,
    pub area: f64,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
}

/// One spoken word: its string, its category (`None` for fillers) and its
/// frames stored row-major, `n_frames × phone_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub word: String,
    pub category: Option<u32>,
    pub n_frames: usize,
    pub frames: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: u32,
    pub tokens: Vec<Token>,
}

impl Utterance {
    pub fn n_frames(&self) -> usize {
        self.tokens.iter().map(|t| t.n_frames).sum()
    }

    /// All frames concatenated, row-major.
    pub fn flat_frames(&self) -> Vec<f64> {
        self.tokens.iter().flat_map(|t| t.frames.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudiovisualPair {
    pub pair_id: u64,
    pub scene: Scene,
    pub utterance: Utterance,
    /// Naming events per category, length C.
    pub incidence: Vec<u32>,
}

/// Fully explicit description of a pair before features are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSpec {
    pub pair_id: u64,
    pub speaker: u32,
    /// Categories with one object each in the scene, in addition to distractors.
    pub present: Vec<u32>,
    pub distractors: Vec<u32>,
    /// `(category, repetitions)` word tokens in the utterance.
    pub named: Vec<(u32, usize)>,
    pub n_fillers: usize,
}

/// Naming events per category: the number of category-`c` word tokens when
/// at least one category-`c` object is in the scene, otherwise zero.
pub fn incidence(scene: &Scene, utterance: &Utterance, n_categories: usize) -> Vec<u32> {
    let mut present = vec![false; n_categories];
    for o in &scene.objects {
        present[o.category as usize] = true;
    }
    let mut counts = vec![0u32; n_categories];
    for t in &utterance.tokens {
        if let Some(c) = t.category {
            if present[c as usize] {
                counts[c as usize] += 1;
            }
        }
    }
    counts
}

impl World {
    /// Frames for a phone sequence spoken by `speaker`.
    pub fn speak(&self, phones: &[u16], speaker: u32, rng: &mut Rng) -> (usize, Vec<f64>) {
        let dim = self.config.phone_dim;
        let transform = &self.speakers[speaker as usize];
        let sd = self.config.phone_noise_sd;
        let mut frames = Vec::new();
        let mut n = 0;
        let mut clean = vec![0.0; dim];
        for &p in phones {
            transform.apply(&self.phone_prototypes[p as usize], &mut clean);
            for _ in 0..self.config.frames_per_phone.sample(rng) {
                frames.extend(clean.iter().map(|v| v + sd * gaussian(rng)));
                n += 1;
            }
        }
        (n, frames)
    }

    /// A spoken token of word form `form` of `category`.
    pub fn category_token(&self, category: u32, form: usize, speaker: u32, rng: &mut Rng) -> Token {
        let (n_frames, frames) = self.speak(&self.lexicon[category as usize][form], speaker, rng);
        Token { word: self.word(category as usize, form).to_string(), category: Some(category), n_frames, frames }
    }

    /// Visual features of one object instance.
    pub fn object_features(&self, category: u32, rng: &mut Rng) -> Vec<f64> {
        let sd = self.config.visual_noise_sd;
        self.visual_prototypes[category as usize].iter().map(|v| v + sd * gaussian(rng)).collect()
    }
}

/// Draws features for an explicit pair description.
pub fn render_pair(world: &World, spec: &PairSpec, rng: &mut Rng) -> AudiovisualPair {
    let mut objects: Vec<SceneObject> = spec
        .present
        .iter()
        .chain(&spec.distractors)
        .map(|&c| {
            let mean = world.inventory.categories()[c as usize].mean_area;
            let area = (mean * rng.random_range(0.6..1.4)).clamp(1e-4, 1.0);
            SceneObject { category: c, area, features: world.object_features(c, rng) }
        })
        .collect();
    let total: f64 = objects.iter().map(|o| o.area).sum();
    if total > 1.0 {
        objects.iter_mut().for_each(|o| o.area /= total);
    }
    objects.shuffle(rng);

    let mut tokens = Vec::new();
    for &(c, reps) in &spec.named {
        let n_forms = world.lexicon[c as usize].len();
        for _ in 0..reps {
            let form = rng.random_range(0..n_forms);
            tokens.push(world.category_token(c, form, spec.speaker, rng));
        }
    }
    for _ in 0..spec.n_fillers {
        let (word, phones) = &world.fillers[rng.random_range(0..world.fillers.len())];
        let (n_frames, frames) = world.speak(phones, spec.speaker, rng);
        tokens.push(Token { word: word.clone(), category: None, n_frames, frames });
    }
    tokens.shuffle(rng);

    let scene = Scene { objects };
    let utterance = Utterance { speaker: spec.speaker, tokens };
    let incidence = incidence(&scene, &utterance, world.n_categories());
    AudiovisualPair { pair_id: spec.pair_id, scene, utterance, incidence }
}

/// Samples a pair naming `named` with `present` referents in view, adding
/// random distractor objects and filler words per the world config.
pub fn sample_pair(
    world: &World,
    pair_id: u64,
    present: &[u32],
    named: &[u32],
    speaker: u32,
    rng: &mut Rng,
) -> AudiovisualPair {
    let cfg = &world.config;
    let named: Vec<(u32, usize)> =
        named.iter().map(|&c| (c, if rng.random_bool(cfg.repeat_prob) { 2 } else { 1 })).collect();
    // distractors never coincide with named categories, so absent referents stay absent
    let candidates: Vec<u32> = (0..world.n_categories() as u32)
        .filter(|c| !named.iter().any(|(n, _)| n == c) && !present.contains(c))
        .collect();
    let mut n_distractors = cfg.objects_per_scene.sample(rng);
    if present.is_empty() {
        n_distractors = n_distractors.max(1);
    }
    let distractors = if candidates.is_empty() {
        Vec::new()
    } else {
        (0..n_distractors).map(|_| candidates[rng.random_range(0..candidates.len())]).collect()
    };
    let spec = PairSpec {
        pair_id,
        speaker,
        present: present.to_vec(),
        distractors,
        named,
        n_fillers: cfg.filler_words_per_utterance.sample(rng),
    };
    render_pair(world, &spec, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::naming_stats::CategoryInventory;
    use crate::rng::rng_from;
    use crate::world::{generate_world, WorldConfig};

    fn world() -> World {
        let inv = CategoryInventory::synthetic_zipf(20, 1.0, 5.0, 0).unwrap();
        generate_world(&WorldConfig::default(), &inv).unwrap()
    }

    fn spec(present: Vec<u32>, named: Vec<(u32, usize)>) -> PairSpec {
        PairSpec { pair_id: 0, speaker: 0, present, distractors: vec![], named, n_fillers: 0 }
    }

    #[test]
    fn single_named_present() {
        let w = world();
        let p = render_pair(&w, &spec(vec![3], vec![(3, 1)]), &mut rng_from(1));
        assert_eq!(p.incidence[3], 1);
        assert_eq!(p.incidence.iter().sum::<u32>(), 1);
    }

    #[test]
    fn named_without_referent() {
        let w = world();
        let p = render_pair(&w, &spec(vec![], vec![(3, 1)]), &mut rng_from(1));
        assert!(p.incidence.iter().all(|&c| c == 0));
    }

    #[test]
    fn repetitions_count_per_token() {
        let w = world();
        let p = render_pair(&w, &spec(vec![3], vec![(3, 2)]), &mut rng_from(1));
        // enumerate (token, object) occurrences: 2 tokens of category 3, one object of it
        let tokens = p.utterance.tokens.iter().filter(|t| t.category == Some(3)).count();
        let objects = p.scene.objects.iter().filter(|o| o.category == 3).count();
        assert_eq!((tokens, objects), (2, 1));
        assert_eq!(p.incidence[3], 2);
    }

    #[test]
    fn frames_and_areas_are_well_formed() {
        let w = world();
        let mut rng = rng_from(9);
        for i in 0..200 {
            let p = sample_pair(&w, i, &[1, 2], &[1, 5], (i % 10) as u32, &mut rng);
            assert!(!p.scene.objects.is_empty());
            assert!(p.scene.objects.iter().map(|o| o.area).sum::<f64>() <= 1.0 + 1e-12);
            assert!(p.utterance.tokens.iter().any(|t| t.category.is_none()));
            for t in &p.utterance.tokens {
                assert_eq!(t.frames.len(), t.n_frames * w.config.phone_dim);
                assert!(t.frames.iter().all(|v| v.is_finite()));
                if let Some(c) = t.category {
                    assert!(w.inventory.categories()[c as usize].word_forms.contains(&t.word));
                }
            }
            assert_eq!(p.incidence, incidence(&p.scene, &p.utterance, 20));
            assert_eq!(p.incidence[5], 0);
        }
    }

    #[test]
    fn identity_speaker_is_prototype_plus_noise() {
        let inv = CategoryInventory::synthetic_zipf(20, 1.0, 5.0, 0).unwrap();
        let cfg =
            WorldConfig { n_speakers: 1, speaker_transforms: false, phone_noise_sd: 0.0, ..WorldConfig::default() };
        let w = generate_world(&cfg, &inv).unwrap();
        let (n, frames) = w.speak(&[4], 0, &mut rng_from(0));
        for f in frames.chunks(cfg.phone_dim).take(n) {
            assert_eq!(f, &w.phone_prototypes[4][..]);
        }
    }
}
