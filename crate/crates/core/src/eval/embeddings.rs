use std::collections::HashSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingItem {
    pub vector: Vec<f64>,
    /// Word type, phone or category.
    pub type_label: u32,
    pub speaker_label: u32,
    pub token_id: u64,
}

/// Equal-dimension, finite vectors with unique token ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    items: Vec<EmbeddingItem>,
}

impl EmbeddingSet {
    pub fn new(items: Vec<EmbeddingItem>) -> Result<Self> {
        if let Some(first) = items.first() {
            let dim = first.vector.len();
            let mut seen = HashSet::with_capacity(items.len());
            for it in &items {
                if it.vector.len() != dim {
                    return Err(Error::DimMismatch { expected: dim, got: it.vector.len() });
                }
                if it.vector.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput(format!("token {} has a non-finite vector", it.token_id)));
                }
                if !seen.insert(it.token_id) {
                    return Err(Error::InvalidInput(format!("duplicate token id {}", it.token_id)));
                }
            }
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[EmbeddingItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.items.first().map_or(0, |i| i.vector.len())
    }

    pub fn type_labels(&self) -> Vec<u32> {
        self.items.iter().map(|i| i.type_label).collect()
    }

    /// Same vectors with new type labels, in item order.
    pub fn with_type_labels(&self, labels: &[u32]) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::LengthMismatch(self.len(), labels.len()));
        }
        let mut items = self.items.clone();
        items.iter_mut().zip(labels).for_each(|(it, &l)| it.type_label = l);
        Ok(Self { items })
    }

    /// Same vectors with new speaker labels, in item order.
    pub fn with_speaker_labels(&self, labels: &[u32]) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::LengthMismatch(self.len(), labels.len()));
        }
        let mut items = self.items.clone();
        items.iter_mut().zip(labels).for_each(|(it, &l)| it.speaker_label = l);
        Ok(Self { items })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(v: Vec<f64>, id: u64) -> EmbeddingItem {
        EmbeddingItem { vector: v, type_label: 0, speaker_label: 0, token_id: id }
    }

    #[test]
    fn validation() {
        assert!(EmbeddingSet::new(vec![item(vec![1.0], 0), item(vec![2.0], 1)]).is_ok());
        assert!(matches!(
            EmbeddingSet::new(vec![item(vec![1.0], 0), item(vec![2.0, 0.0], 1)]),
            Err(Error::DimMismatch { .. })
        ));
        assert!(EmbeddingSet::new(vec![item(vec![1.0], 0), item(vec![2.0], 0)]).is_err());
        assert!(EmbeddingSet::new(vec![item(vec![f64::NAN], 0)]).is_err());
    }
}
