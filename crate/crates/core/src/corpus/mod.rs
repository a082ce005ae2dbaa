//! Manifests, multitask example assembly, dataset mixing, and synthetic corpora.

mod assemble;
mod manifest;
mod mix;
mod synth;
mod tasks;

use thiserror::Error;

pub use assemble::{
    assemble, assemble_with_features, body_tokens, header_tokens, load_features, target_tokens, HeaderFormat,
    TrainingExample,
};
pub use manifest::{load_manifest, parse_manifest, write_manifest, ManifestRecord};
pub use mix::{Draw, MixSpec, Mixer};
pub use synth::{
    manifest_path, render_symbols, symbol_frequency, symbol_times, synth_corpus, toy_records, translate_symbol,
    Split, SynthOutput, SynthSpec, ToyTask, ALPHABET_SIZE, SYMBOL_NAMES, TRANSLATION_WORDS,
};
pub use tasks::{CategoryRule, TaskCode, TaskRule};

use crate::frontend::FrontendError;
use crate::grammar::GrammarError;
use crate::srwt::SrwtError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("manifest line {line}: {reason}")]
pub struct ManifestError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Srwt(#[from] SrwtError),
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error("{path}: clip is {seconds:.2} s, longer than 30 s")]
    ClipTooLong { path: String, seconds: f64 },
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("dataset {0:?} has positive weight but no items")]
    EmptyDataset(String),
    #[error("dataset {id:?} has invalid weight {weight}")]
    InvalidWeight { id: String, weight: f64 },
    #[error("mix weights are all zero")]
    ZeroWeights,
    #[error("unknown toy task {0:?}")]
    UnknownTask(String),
    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}
