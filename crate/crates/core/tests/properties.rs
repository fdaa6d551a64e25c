use proptest::prelude::*;

use xsl::eval::{
    abx_error, lextest_score, recall_at_k, semtest_from_scores, spearman_with, vocab_size, Distance, EmbeddingItem,
    EmbeddingSet,
};
use xsl::learner::infonce_from_similarities;

/// `types × per_type` items, speakers assigned round robin.
fn embedding_set(types: usize, per_type: usize, speakers: usize, dim: usize) -> impl Strategy<Value = EmbeddingSet> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, dim), types * per_type).prop_map(move |vecs| {
        let items = vecs
            .into_iter()
            .enumerate()
            .map(|(i, vector)| EmbeddingItem {
                vector,
                type_label: (i / per_type) as u32,
                speaker_label: (i % speakers) as u32,
                token_id: i as u64,
            })
            .collect();
        EmbeddingSet::new(items).unwrap()
    })
}

fn square(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, n), n)
}

fn relabel(labels: &[u32], perm: &[u32]) -> Vec<u32> {
    labels.iter().map(|&l| perm[l as usize]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn abx_ignores_label_and_speaker_names(
        set in embedding_set(3, 4, 2, 3),
        types in Just(vec![0u32, 1, 2]).prop_shuffle(),
        speakers in Just(vec![5u32, 9]).prop_shuffle(),
    ) {
        let base = abx_error(&set, Distance::Cosine).unwrap();
        prop_assert!((0.0..=100.0).contains(&base));
        let renamed = set.with_type_labels(&relabel(&set.type_labels(), &types)).unwrap();
        let spk: Vec<u32> = set.items().iter().map(|i| speakers[i.speaker_label as usize]).collect();
        let renamed = renamed.with_speaker_labels(&spk).unwrap();
        prop_assert!((abx_error(&renamed, Distance::Cosine).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn abx_is_scale_free_under_cosine(set in embedding_set(2, 3, 2, 4), scale in 0.1f64..10.0) {
        let scaled: Vec<EmbeddingItem> = set
            .items()
            .iter()
            .map(|i| EmbeddingItem { vector: i.vector.iter().map(|v| v * scale).collect(), ..i.clone() })
            .collect();
        let a = abx_error(&set, Distance::Cosine).unwrap();
        let b = abx_error(&EmbeddingSet::new(scaled).unwrap(), Distance::Cosine).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn lextest_ignores_label_names(set in embedding_set(4, 3, 1, 3), perm in Just(vec![3u32, 0, 2, 1]).prop_shuffle()) {
        let base = lextest_score(&set).unwrap();
        prop_assert!((0.0..=100.0).contains(&base));
        let renamed = set.with_type_labels(&relabel(&set.type_labels(), &perm)).unwrap();
        prop_assert!((lextest_score(&renamed).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn semtest_depends_only_on_score_order(scores in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 6), 6)) {
        let labels = [0u32, 0, 1, 1, 2, 2];
        let base = semtest_from_scores(&labels, &labels, &scores).unwrap();
        let warped: Vec<Vec<f64>> = scores.iter().map(|r| r.iter().map(|s| (2.0 * s).exp() + 1.0).collect()).collect();
        let after = semtest_from_scores(&labels, &labels, &warped).unwrap();
        prop_assert_eq!(&base.per_category, &after.per_category);

        let flipped: Vec<Vec<f64>> = scores.iter().map(|r| r.iter().map(|s| -s).collect()).collect();
        let mirror = semtest_from_scores(&labels, &labels, &flipped).unwrap();
        prop_assert!((base.mean + mirror.mean - 100.0).abs() < 1e-9);
    }

    #[test]
    fn recall_grows_with_k(s in square(7)) {
        let mut prev = 0.0;
        for k in 1..=7 {
            let r = recall_at_k(&s, k).unwrap();
            prop_assert!(r.mean >= prev);
            prop_assert!((r.mean - 0.5 * (r.speech_to_image + r.image_to_speech)).abs() < 1e-12);
            prev = r.mean;
        }
        prop_assert_eq!(prev, 1.0);
    }

    #[test]
    fn infonce_is_shift_invariant_and_nonnegative(s in square(5), shift in -10.0f64..10.0, tau in 0.05f64..2.0) {
        let a = infonce_from_similarities(&s, tau).unwrap();
        let shifted: Vec<Vec<f64>> = s.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect();
        let b = infonce_from_similarities(&shifted, tau).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn spearman_is_invariant_to_increasing_maps(
        x in prop::collection::vec(-5.0f64..5.0, 8),
        y in prop::collection::vec(-5.0f64..5.0, 8),
        a in 0.1f64..4.0,
        b in -3.0f64..3.0,
    ) {
        let base = match spearman_with(&x, &y, 200, 1) {
            Ok(r) => r,
            Err(_) => return Ok(()),
        };
        let mapped: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let after = spearman_with(&mapped, &y, 200, 1).unwrap();
        prop_assert!((base.rho - after.rho).abs() < 1e-12);
        prop_assert!((base.p - after.p).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert!((spearman_with(&neg, &y, 200, 1).unwrap().rho + base.rho).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&base.rho) && base.p > 0.0 && base.p <= 1.0);
    }

    #[test]
    fn vocab_shrinks_as_threshold_rises(scores in prop::collection::vec(0.0f64..100.0, 1..30), t in 0.0f64..100.0, dt in 0.0f64..50.0) {
        prop_assert!(vocab_size(&scores, t + dt) <= vocab_size(&scores, t));
    }
}
