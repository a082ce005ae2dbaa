//! A small encoder-decoder transformer trained from scratch with hand-written
//! gradients.
//!
//! The encoder takes log-mel frames through a conv stem (kernel 3, strides 1
//! and 2) and stride-2 average pooling, so `T` frames become
//! `ceil(ceil(T/2)/2)` positions, then pre-norm self-attention blocks. The
//! decoder is a causal pre-norm transformer with cross-attention over the
//! encoder output and an untied output projection. Both sides use fixed
//! sinusoidal positions.

mod checkpoint;
mod decode;
pub mod layers;
mod network;
mod optim;
mod params;
mod real;

use thiserror::Error;

pub use checkpoint::{MAGIC as CHECKPOINT_MAGIC, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CheckpointError};
pub use decode::{continuation_logprob, generated_body, greedy_continue, greedy_decode};
pub use network::{
    accumulate_gradient, batch_gradient, encode, encoded_len, loss, next_token_probs, GradNeeds,
};
pub use optim::{apply_update, grad_norm, train_step, AdamWConfig, LrSchedule, OptimizerState, StepReport, TrainStage};
pub use params::{
    DecoderBlock, DecoderParams, EncoderBlock, EncoderParams, Group, ModelConfig, Parameters, TensorMut, TensorRef,
};
pub use real::Real;

use crate::grammar::GrammarError;
use crate::TokenId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("audio has {frames} frames, more than the limit of {max}")]
    AudioTooLong { frames: usize, max: usize },
    #[error("audio has no frames")]
    EmptyAudio,
    #[error("token sequence of length {len} exceeds the limit of {max}")]
    TextTooLong { len: usize, max: usize },
    #[error("token {token} is outside the model vocabulary of {vocab_size}")]
    VocabMismatch { token: TokenId, vocab_size: usize },
    #[error("model vocabulary size {model} differs from tokenizer size {vocab}")]
    VocabSize { model: usize, vocab: usize },
    #[error("loss mask has {mask} entries for {tokens} tokens")]
    MaskLength { tokens: usize, mask: usize },
    #[error("example has no loss positions")]
    NoLossPositions,
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty decode prefix")]
    EmptyPrefix,
    #[error("non-finite loss or gradient at step {step}")]
    DivergenceDetected { step: u64 },
    #[error(transparent)]
    Header(#[from] GrammarError),
    #[error("{0} tokens follow the forced header")]
    TrailingHeaderTokens(usize),
}
