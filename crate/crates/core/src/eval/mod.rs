//! Evaluation protocols over embedding sets: ABX discrimination, word-type
//! clustering (Lextest), forced-choice word meaning (Semtest), cross-modal
//! retrieval, vocabulary counts and rank correlation.

mod abx;
mod embeddings;
mod lextest;
mod probe;
mod report;
mod retrieval;
mod semtest;
mod spearman;

pub use abx::{abx_error, Distance};
pub use embeddings::{EmbeddingItem, EmbeddingSet};
pub use lextest::{lextest_chance, lextest_score};
pub use probe::{best_layer, probe_layers, probe_objects, LayerScore};
pub use report::{Correlation, LayerScores, MetricsReport, VocabPoint};
pub use retrieval::{chance_band, recall_at_k, vocab_size, Recall};
pub use semtest::{semtest_from_scores, semtest_score, SemtestResult};
pub use spearman::{rank_average, spearman, spearman_with, SpearmanResult, DEFAULT_PERMUTATIONS};
