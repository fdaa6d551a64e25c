//! Cross-situational word learning from statistically realistic audiovisual
//! naming events.
//!
//! The crate is organised bottom-up:
//!
//! * [`naming_stats`] turns daily naming rates into per-category target
//!   co-occurrence counts for each simulated age bin.
//! * [`world`] generates an ambiguous synthetic audiovisual world and builds
//!   training subsets whose naming-event counts match the targets.
//! * [`learner`] is the contrastive dual-encoder learner with hand-written
//!   gradients, the masked-prediction objective and staged training.
//! * [`eval`] holds the evaluation kernels (ABX, Lextest, Semtest, recall@k,
//!   vocabulary curves, Spearman analyses).
//! * [`experiment`] wires everything into the file-based pipeline driven by
//!   the `xsl` binary.

mod binio;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod learner;
pub mod naming_stats;
pub mod rng;
pub mod world;

pub use error::{Error, Result};
