//! Orchestration for the `audiomt` command line: corpus synthesis, vocabulary
//! preparation, training, evaluation, decoding and the ablation runs.

pub mod ablate;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod lock;
pub mod train;

pub use ablate::{cmd_ablate, AblationPart, AblationReport};
pub use commands::{cmd_decode, cmd_inspect, cmd_prepare, cmd_synth, group_hash};
pub use config::RunConfig;
pub use error::{HarnessError, Result};
pub use eval::cmd_eval;
pub use train::{cmd_train, TrainOutcome};
