use serde::{Deserialize, Serialize};

use super::embeddings::{EmbeddingItem, EmbeddingSet};
use crate::error::Result;
use crate::learner::{Layer, LearnerState};
use crate::world::TestItem;

/// Representations of audio test items read out at `layer`.
pub fn probe_layers(state: &LearnerState, items: &[TestItem], layer: Layer) -> Result<EmbeddingSet> {
    let items = items
        .iter()
        .map(|it| {
            Ok(EmbeddingItem {
                vector: state.probe(&it.frames, it.n_frames, layer)?,
                type_label: it.label,
                speaker_label: it.speaker,
                token_id: it.id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EmbeddingSet::new(items)
}

/// Scene embeddings of object test items (`n_frames` counts objects).
pub fn probe_objects(state: &LearnerState, items: &[TestItem]) -> Result<EmbeddingSet> {
    let items = items
        .iter()
        .map(|it| {
            Ok(EmbeddingItem {
                vector: state.encode_objects(&it.frames, it.n_frames)?,
                type_label: it.label,
                speaker_label: it.speaker,
                token_id: it.id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EmbeddingSet::new(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerScore {
    pub layer: Layer,
    pub score: f64,
}

/// The best-scoring entry; the earliest layer wins ties.
pub fn best_layer(scores: &[LayerScore], higher_is_better: bool) -> Option<LayerScore> {
    scores.iter().copied().reduce(|best, s| {
        let improves = if higher_is_better { s.score > best.score } else { s.score < best.score };
        if improves {
            s
        } else {
            best
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_and_argmin() {
        let s = [
            LayerScore { layer: Layer::Frame, score: 10.0 },
            LayerScore { layer: Layer::Context, score: 30.0 },
            LayerScore { layer: Layer::Pooled, score: 30.0 },
            LayerScore { layer: Layer::Final, score: 5.0 },
        ];
        assert_eq!(best_layer(&s, true).unwrap().layer, Layer::Context);
        assert_eq!(best_layer(&s, false).unwrap().layer, Layer::Final);
        assert!(best_layer(&[], true).is_none());
    }
}
