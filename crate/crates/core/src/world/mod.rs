//! The synthetic audiovisual world: categories with visual prototypes and
//! spoken word forms, speakers, scenes, utterances, and the greedy subset
//! sampler that matches naming-event targets.

mod config;
mod generate;
mod pair;
mod subset;
mod testsets;

pub use config::{Range, WorldConfig};
pub use generate::{generate_world, SpeakerTransform, World};
pub use pair::{incidence, render_pair, sample_pair, AudiovisualPair, PairSpec, Scene, SceneObject, Token, Utterance};
pub use subset::{build_subset, DatasetManifest};
pub use testsets::{make_test_sets, TestItem, TestSetConfig, TestSets};
