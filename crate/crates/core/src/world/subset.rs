use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::pair::AudiovisualPair;
use crate::error::{Error, Result};
use crate::naming_stats::{Condition, TargetCounts};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub condition: Condition,
    pub duration_days: u32,
    /// Accepted pool pairs in acceptance order.
    pub pair_ids: Vec<u64>,
    pub targets: Vec<u64>,
    pub achieved: Vec<u64>,
    /// `targets - achieved`, per category.
    pub deficit: Vec<u64>,
}

impl DatasetManifest {
    pub fn is_exact(&self) -> bool {
        self.achieved == self.targets
    }
}

/// Greedy subset construction: walk one seeded permutation of the pool and
/// accept a pair iff adding its incidence keeps every category at or below
/// its target. Pairs without any naming event are skipped. Stops as soon as
/// every target is met; on exhaustion the remaining deficit is reported and
/// is an error when any category is short by more than `deficit_tolerance`.
pub fn build_subset(
    pool: &[AudiovisualPair],
    targets: &TargetCounts,
    seed: u64,
    deficit_tolerance: u64,
) -> Result<DatasetManifest> {
    if pool.is_empty() {
        return Err(Error::InvalidInput("subset pool is empty".into()));
    }
    let n = targets.per_category.len();
    if let Some(bad) = pool.iter().find(|p| p.incidence.len() != n) {
        return Err(Error::DimMismatch { expected: n, got: bad.incidence.len() });
    }
    let goal = &targets.per_category;
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut rng::stage_rng(seed, "subset-order"));

    let mut achieved = vec![0u64; n];
    let mut pair_ids = Vec::new();
    let mut remaining: u64 = goal.iter().sum();
    for idx in order {
        if remaining == 0 {
            break;
        }
        let inc = &pool[idx].incidence;
        if inc.iter().all(|&c| c == 0) {
            continue;
        }
        let fits = inc.iter().zip(&achieved).zip(goal).all(|((&i, &a), &g)| a + u64::from(i) <= g);
        if fits {
            for (a, &i) in achieved.iter_mut().zip(inc) {
                *a += u64::from(i);
            }
            remaining -= inc.iter().map(|&i| u64::from(i)).sum::<u64>();
            pair_ids.push(pool[idx].pair_id);
        }
    }

    let deficit: Vec<u64> = goal.iter().zip(&achieved).map(|(g, a)| g - a).collect();
    let worst = deficit.iter().copied().max().unwrap_or(0);
    if worst > deficit_tolerance {
        return Err(Error::InsufficientPool { deficits: deficit, worst });
    }
    Ok(DatasetManifest {
        condition: targets.condition,
        duration_days: targets.duration_days,
        pair_ids,
        targets: goal.clone(),
        achieved,
        deficit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Scene, Utterance};
    use proptest::prelude::*;

    fn stub(pair_id: u64, incidence: Vec<u32>) -> AudiovisualPair {
        AudiovisualPair {
            pair_id,
            scene: Scene { objects: vec![] },
            utterance: Utterance { speaker: 0, tokens: vec![] },
            incidence,
        }
    }

    fn targets(v: Vec<u64>) -> TargetCounts {
        TargetCounts { per_category: v, duration_days: 1, condition: Condition::Natural }
    }

    #[test]
    fn exact_cover_of_single_incidence_pairs() {
        let want = vec![3u64, 1, 2];
        let mut pool = Vec::new();
        for (c, &k) in want.iter().enumerate() {
            for _ in 0..k {
                let mut inc = vec![0; 3];
                inc[c] = 1;
                pool.push(stub(pool.len() as u64, inc));
            }
        }
        let m = build_subset(&pool, &targets(want.clone()), 5, 0).unwrap();
        assert_eq!(m.achieved, want);
        assert!(m.is_exact());
        assert_eq!(m.pair_ids.len(), 6);
    }

    #[test]
    fn zero_targets_give_empty_manifest() {
        let pool = vec![stub(0, vec![1, 0]), stub(1, vec![0, 2])];
        let m = build_subset(&pool, &targets(vec![0, 0]), 1, 0).unwrap();
        assert!(m.pair_ids.is_empty());
        assert_eq!(m.achieved, vec![0, 0]);
    }

    #[test]
    fn empty_pool_is_rejected() {
        assert!(build_subset(&[], &targets(vec![1]), 0, 0).is_err());
    }

    /// Best achievable total over all subsets that never overshoot.
    fn exhaustive_best(pool: &[AudiovisualPair], goal: &[u64]) -> u64 {
        let mut best = 0;
        for mask in 0u32..(1 << pool.len()) {
            let mut acc = vec![0u64; goal.len()];
            for (i, p) in pool.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    acc.iter_mut().zip(&p.incidence).for_each(|(a, &x)| *a += u64::from(x));
                }
            }
            if acc.iter().zip(goal).all(|(a, g)| a <= g) {
                best = best.max(acc.iter().sum());
            }
        }
        best
    }

    #[test]
    fn overshooting_pair_is_skipped() {
        // category 0 target 1: the 2-incidence pair can never fit
        let pool = vec![stub(0, vec![2, 0]), stub(1, vec![0, 1]), stub(2, vec![0, 1])];
        let goal = vec![1, 1];
        assert_eq!(exhaustive_best(&pool, &goal), 1);
        for seed in 0..10 {
            let m = build_subset(&pool, &targets(goal.clone()), seed, 1).unwrap();
            assert!(!m.pair_ids.contains(&0));
            assert_eq!(m.achieved, vec![0, 1]);
            assert_eq!(m.deficit, vec![1, 0]);
            assert_eq!(m.achieved.iter().sum::<u64>(), exhaustive_best(&pool, &goal));
        }
        let err = build_subset(&pool, &targets(goal), 0, 0).unwrap_err();
        assert!(matches!(err, Error::InsufficientPool { worst: 1, .. }));
    }

    #[test]
    fn manifest_round_trips() {
        let pool = vec![stub(0, vec![1, 0]), stub(1, vec![0, 1])];
        let m = build_subset(&pool, &targets(vec![1, 1]), 3, 0).unwrap();
        let back: DatasetManifest = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back.achieved, m.achieved);
        assert_eq!(back, m);
    }

    fn pool_strategy() -> impl Strategy<Value = (Vec<Vec<u32>>, Vec<u64>)> {
        (1usize..5).prop_flat_map(|c| {
            (prop::collection::vec(prop::collection::vec(0u32..3, c), 1..40), prop::collection::vec(0u64..8, c))
        })
    }

    proptest! {
        #[test]
        fn never_overshoots_and_is_deterministic((incs, goal) in pool_strategy(), seed in 0u64..1000) {
            let pool: Vec<_> = incs.into_iter().enumerate().map(|(i, inc)| stub(i as u64, inc)).collect();
            let t = targets(goal.clone());
            let a = build_subset(&pool, &t, seed, u64::MAX).unwrap();
            prop_assert!(a.achieved.iter().zip(&goal).all(|(x, g)| x <= g));
            let sum: Vec<u64> = (0..goal.len())
                .map(|c| a.pair_ids.iter().map(|&id| u64::from(pool[id as usize].incidence[c])).sum())
                .collect();
            prop_assert_eq!(&sum, &a.achieved);
            let b = build_subset(&pool, &t, seed, u64::MAX).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
