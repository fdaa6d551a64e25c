use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::learner::nn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    Cosine,
    Euclidean,
}

impl Distance {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Distance::Cosine => 1.0 - nn::cosine(a, b),
            Distance::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        }
    }
}

/// Across-speaker ABX error in percent.
///
/// A is of type p from speaker s1, B of type q != p from s1, and X of type p
/// from s2 != s1. A triplet scores 1 when X is closer to B, 0.5 on a tie.
/// Scores are averaged within each (p, q, s1, s2) cell, then over cells.
pub fn abx_error(set: &EmbeddingSet, distance: Distance) -> Result<f64> {
    let items = set.items();
    let mut groups: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        groups.entry((it.type_label, it.speaker_label)).or_default().push(i);
    }
    let mut types: Vec<u32> = groups.keys().map(|k| k.0).collect();
    types.dedup();
    let mut speakers: Vec<u32> = groups.keys().map(|k| k.1).collect();
    speakers.sort_unstable();
    speakers.dedup();
    if types.len() < 2 || speakers.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "ABX needs at least 2 types and 2 speakers, got {} and {}",
            types.len(),
            speakers.len()
        )));
    }
    let n = items.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = distance.eval(&items[i].vector, &items[j].vector);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let empty = Vec::new();
    let group = |t: u32, s: u32| groups.get(&(t, s)).unwrap_or(&empty);
    let mut total = 0.0;
    let mut cells = 0usize;
    for &p in &types {
        for &q in types.iter().filter(|&&q| q != p) {
            for &s1 in &speakers {
                let (a_set, b_set) = (group(p, s1), group(q, s1));
                if a_set.is_empty() || b_set.is_empty() {
                    continue;
                }
                for &s2 in speakers.iter().filter(|&&s| s != s1) {
                    let x_set = group(p, s2);
                    if x_set.is_empty() {
                        continue;
                    }
                    let mut err = 0.0;
                    for &x in x_set {
                        for &a in a_set {
                            let dax = dist[a * n + x];
                            for &b in b_set {
                                let dbx = dist[b * n + x];
                                if dax > dbx {
                                    err += 1.0;
                                } else if dax == dbx {
                                    err += 0.5;
                                }
                            }
                        }
                    }
                    total += err / (x_set.len() * a_set.len() * b_set.len()) as f64;
                    cells += 1;
                }
            }
        }
    }
    if cells == 0 {
        return Err(Error::InsufficientData("no valid ABX cells".into()));
    }
    Ok(100.0 * total / cells as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::EmbeddingItem;

    fn set(rows: &[(f64, u32, u32)]) -> EmbeddingSet {
        EmbeddingSet::new(
            rows.iter()
                .enumerate()
                .map(|(i, &(v, t, s))| EmbeddingItem {
                    vector: vec![v],
                    type_label: t,
                    speaker_label: s,
                    token_id: i as u64,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn hand_placed_one_dimensional_example() {
        // A = (p, s1) at 0, X = (p, s2) at 1, B = (q, s1) at 3.
        let s = set(&[(0.0, 0, 0), (1.0, 0, 1), (3.0, 1, 0)]);
        assert_eq!(abx_error(&s, Distance::Euclidean).unwrap(), 0.0);
    }

    #[test]
    fn identical_within_type_is_perfect() {
        let rows: Vec<_> = (0..3u32).flat_map(|t| (0..3u32).map(move |s| (t as f64 * 2.0 - 1.5, t, s))).collect();
        let s = set(&rows);
        assert_eq!(abx_error(&s, Distance::Euclidean).unwrap(), 0.0);
        let one_speaker = set(&[(0.0, 0, 0), (1.0, 1, 0)]);
        assert!(matches!(abx_error(&one_speaker, Distance::Cosine), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn constant_embeddings_are_at_chance() {
        let rows: Vec<_> = (0..3u32).flat_map(|t| (0..2u32).map(move |s| (1.0, t, s))).collect();
        assert_eq!(abx_error(&set(&rows), Distance::Cosine).unwrap(), 50.0);
    }
}
