//! The statistical learner: audio and visual encoders, the masked-prediction
//! and audiovisual contrastive objectives, and staged training.

pub mod checkpoint;
mod config;
pub mod gradcheck;
mod loss;
mod model;
pub mod nn;
mod objective;
mod optim;
mod params;
mod train;

pub use config::{ModelConfig, Stage, TrainConfig};
pub use loss::{
    diversity_penalty, first_class_cross_entropy, infonce_from_similarities, infonce_loss, total_loss, LossBreakdown,
    DIVERSITY_WEIGHT,
};
pub use model::{similarity, AudioEncoding, Layer, LearnerState};
pub use objective::{
    masked_prediction_loss, objective, sample_plan, sample_plans, AudioRef, ObjectiveOutput, SceneRef, UtterancePlan,
};
pub use optim::{scheduled_lr, Adam};
pub use params::{layout, Init, ParamSpec, Slots};
pub use train::{
    embed_examples, optimizer_step, train_stage, validation_recall, EpochRecord, Example, TrainOutcome,
    ValidationRecord,
};
