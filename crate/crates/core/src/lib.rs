//! Multitask audio-language training at desk scale.
//!
//! - [`frontend`]: WAV I/O, resampling, 80-channel log-mel features, SpecAugment
//! - [`grammar`]: special-token vocabulary and the hierarchical task header
//! - [`srwt`]: word-level timestamp codec and alignment scoring
//! - [`corpus`]: manifests, example assembly, dataset mixing, synthetic corpora
//! - [`model`]: a small encoder-decoder with hand-written gradients
//! - [`chat`]: ChatML dialogues with numbered audio references
//! - [`metrics`]: WER, BLEU, accuracy

pub mod chat;
pub mod corpus;
pub mod frontend;
pub mod grammar;
pub mod metrics;
pub mod model;
pub mod srwt;
pub mod text;

use std::ops::{Deref, DerefMut};

pub type TokenId = u32;

/// Ordered vocabulary indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence(pub Vec<TokenId>);

impl TokenSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_inner(self) -> Vec<TokenId> {
        self.0
    }
}

impl Deref for TokenSequence {
    type Target = Vec<TokenId>;

    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl DerefMut for TokenSequence {
    fn deref_mut(&mut self) -> &mut Self::Target {
        &mut self.0
    }
}

impl From<Vec<TokenId>> for TokenSequence {
    fn from(v: Vec<TokenId>) -> Self {
        Self(v)
    }
}

impl FromIterator<TokenId> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = TokenId>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}
