//! The experiment pipeline: configuration, file formats and the commands
//! behind the `xsl` binary.
//!
//! Output directory layout:
//!
//! ```text
//! stats/<bin>.csv                  target counts per category
//! data/inventory.jsonl             category inventory used
//! data/pool.jsonl                  candidate pairs, one per line
//! data/pool.{audio,visual}.tns     their frames and object features
//! data/splits.json                 validation and auditory-corpus pair ids
//! data/<bin>.manifest.jsonl        header line, then the bin's pairs
//! data/tests/*.tns                 evaluation items
//! checkpoints/<bin>.{best,final}.ckpt
//! traces/<bin>.trace.csv
//! reports/<bin>.json, reports/<bin>.categories.csv
//! curves/{vocab,scores}.csv
//! ```

mod artifacts;
mod config;
mod pipeline;
mod tensor;

pub use artifacts::{
    generate_pool, items_to_tensor, load_examples, load_test_sets, read_manifest, read_pool, tensor_to_items, DirLock,
    ManifestHeader, ObjectRecord, PairRecord, Paths, Splits, TokenRecord, FILLER_CATEGORY, TEST_SET_NAMES,
};
pub use config::{AgeBin, EvalConfig, ExperimentConfig, PoolConfig, StageConfigs, StatisticsSource, AUDITORY_BIN};
pub use pipeline::{
    cmd_curves, cmd_eval, cmd_generate, cmd_gradcheck, cmd_stats, cmd_train, evaluate, run_all, BinSummary,
    GradcheckReport, TrainSummary, GRADCHECK_THRESHOLD,
};
pub use tensor::{RecordMeta, TensorFile, TENSOR_MAGIC, TENSOR_VERSION};

use crate::error::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Process exit status for an error: configuration, data or numeric.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::BadConfig(_) | Error::ConfigMismatch(_) | Error::UnknownLayer(_) => EXIT_CONFIG,
        Error::NonFiniteGradient(_) | Error::GradientCheck(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}
