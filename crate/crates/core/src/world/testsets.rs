use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::generate::World;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestSetConfig {
    /// Tokens (and images) per word type / category.
    pub tokens_per_type: usize,
    /// ABX tokens per (phone, speaker) cell.
    pub abx_tokens_per_cell: usize,
}

impl Default for TestSetConfig {
    fn default() -> Self {
        Self { tokens_per_type: 20, abx_tokens_per_cell: 2 }
    }
}

/// One labeled evaluation item: a frame sequence (audio) or a single feature
/// vector (objects, `n_frames == 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct TestItem {
    pub id: u64,
    pub label: u32,
    pub speaker: u32,
    pub n_frames: usize,
    pub frames: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSets {
    pub lextest: Vec<TestItem>,
    pub semtest_words: Vec<TestItem>,
    pub semtest_objects: Vec<TestItem>,
    /// Isolated phones labeled by phone id.
    pub abx: Vec<TestItem>,
}

impl TestSets {
    pub fn all_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.lextest.iter().chain(&self.semtest_words).chain(&self.semtest_objects).chain(&self.abx).map(|t| t.id)
    }
}

struct Ids {
    next: u64,
}

impl Ids {
    /// `n` fresh ids in shuffled order, so id-based tie breaks carry no label
    /// information.
    fn block(&mut self, n: usize, rng: &mut Rng) -> Vec<u64> {
        let mut ids: Vec<u64> = (self.next..self.next + n as u64).collect();
        self.next += n as u64;
        ids.shuffle(rng);
        ids
    }
}

fn spoken_words(world: &World, k: usize, ids: &mut Ids, rng: &mut Rng) -> Vec<TestItem> {
    let c = world.n_categories();
    let block = ids.block(c * k, rng);
    let n_speakers = world.speakers.len() as u32;
    let mut out = Vec::with_capacity(c * k);
    for cat in 0..c as u32 {
        for i in 0..k {
            let speaker = i as u32 % n_speakers;
            let token = world.category_token(cat, 0, speaker, rng);
            out.push(TestItem {
                id: block[out.len()],
                label: cat,
                speaker,
                n_frames: token.n_frames,
                frames: token.frames,
            });
        }
    }
    out
}

/// Builds the four evaluation sets. Item ids start at `first_id` so they are
/// disjoint from every training pair id below it.
pub fn make_test_sets(world: &World, config: &TestSetConfig, first_id: u64, seed: u64) -> Result<TestSets> {
    let k = config.tokens_per_type;
    if k < 2 {
        return Err(Error::InvalidInput(format!("test sets need at least 2 tokens per type, got {k}")));
    }
    if world.speakers.len() < 2 {
        return Err(Error::InvalidInput("across-speaker ABX needs at least 2 speakers".into()));
    }
    if config.abx_tokens_per_cell == 0 {
        return Err(Error::InvalidInput("abx_tokens_per_cell must be positive".into()));
    }
    let mut rng = rng::stage_rng(seed, "test-sets");
    let mut ids = Ids { next: first_id };

    let lextest = spoken_words(world, k, &mut ids, &mut rng);
    let semtest_words = spoken_words(world, k, &mut ids, &mut rng);

    let c = world.n_categories();
    let block = ids.block(c * k, &mut rng);
    let semtest_objects = (0..c as u32)
        .flat_map(|cat| std::iter::repeat_n(cat, k))
        .zip(block)
        .map(|(cat, id)| TestItem {
            id,
            label: cat,
            speaker: 0,
            n_frames: 1,
            frames: world.object_features(cat, &mut rng),
        })
        .collect();

    let n_phones = world.phone_prototypes.len();
    let n_speakers = world.speakers.len();
    let block = ids.block(n_phones * n_speakers * config.abx_tokens_per_cell, &mut rng);
    let mut abx = Vec::with_capacity(block.len());
    for p in 0..n_phones {
        for s in 0..n_speakers as u32 {
            for _ in 0..config.abx_tokens_per_cell {
                let (n_frames, frames) = world.speak(&[p as u16], s, &mut rng);
                abx.push(TestItem { id: block[abx.len()], label: p as u32, speaker: s, n_frames, frames });
            }
        }
    }
    Ok(TestSets { lextest, semtest_words, semtest_objects, abx })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::naming_stats::CategoryInventory;
    use crate::world::{generate_world, WorldConfig};

    fn world(n: usize, speakers: usize) -> World {
        let inv = CategoryInventory::synthetic_zipf(n, 1.0, 5.0, 0).unwrap();
        generate_world(&WorldConfig { n_categories: n, n_speakers: speakers, ..WorldConfig::default() }, &inv).unwrap()
    }

    #[test]
    fn full_sized_semtest() {
        let w = world(80, 10);
        let t = make_test_sets(&w, &TestSetConfig::default(), 1000, 0).unwrap();
        assert_eq!(t.semtest_words.len(), 1600);
        assert_eq!(t.semtest_objects.len(), 1600);
        assert_eq!(t.lextest.len(), 1600);
        let ids: HashSet<u64> = t.all_ids().collect();
        assert_eq!(ids.len(), t.lextest.len() * 3 + t.abx.len());
        assert!(ids.iter().all(|&id| id >= 1000));
        // K tokens per type spread over distinct speakers
        let speakers: HashSet<u32> = t.lextest.iter().filter(|i| i.label == 0).map(|i| i.speaker).collect();
        assert_eq!(speakers.len(), 10);
    }

    #[test]
    fn single_token_per_type_is_rejected() {
        let w = world(5, 3);
        let cfg = TestSetConfig { tokens_per_type: 1, ..TestSetConfig::default() };
        assert!(make_test_sets(&w, &cfg, 0, 0).is_err());
    }

    #[test]
    fn single_speaker_abx_is_rejected() {
        let w = world(5, 1);
        assert!(make_test_sets(&w, &TestSetConfig::default(), 0, 0).is_err());
    }
}
