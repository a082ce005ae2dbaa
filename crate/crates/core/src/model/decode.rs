use super::network::{check_tokens, encode, last_logits, next_token_probs};
use super::params::Parameters;
use super::real::Real;
use super::ModelError;
use crate::frontend::MelSpectrogram;
use crate::grammar::{parse_header, SpecialTag, Vocabulary};
use crate::{TokenId, TokenSequence};

/// Greedy continuation of an arbitrary prefix. Stops after `max_new` tokens,
/// when `stop` is produced (it is kept), or at the model's text length limit.
pub fn greedy_continue<T: Real>(
    params: &Parameters<T>,
    mel: &MelSpectrogram,
    prefix: &[TokenId],
    max_new: usize,
    stop: TokenId,
) -> Result<TokenSequence, ModelError> {
    let c = &params.config;
    if prefix.is_empty() {
        return Err(ModelError::EmptyPrefix);
    }
    check_tokens(prefix, c.vocab_size, c.max_text_len)?;
    let enc = encode(params, &mel.values)?;
    let mut out = prefix.to_vec();
    for _ in 0..max_new {
        if out.len() >= c.max_text_len {
            break;
        }
        let logits = last_logits(params, &enc, &out);
        let mut best = 0;
        for (i, v) in logits.iter().enumerate() {
            if *v > logits[best] {
                best = i;
            }
        }
        out.push(best as TokenId);
        if best as TokenId == stop {
            break;
        }
    }
    Ok(TokenSequence(out))
}

/// Emits `forced_header` verbatim, then argmax tokens until `<|endoftext|>`
/// (included) or `max_len` new tokens.
pub fn greedy_decode<T: Real>(
    params: &Parameters<T>,
    mel: &MelSpectrogram,
    forced_header: &TokenSequence,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<TokenSequence, ModelError> {
    if vocab.len() != params.config.vocab_size {
        return Err(ModelError::VocabSize {
            model: params.config.vocab_size,
            vocab: vocab.len(),
        });
    }
    let (_, rest) = parse_header(forced_header, vocab)?;
    if !rest.is_empty() {
        return Err(ModelError::TrailingHeaderTokens(rest.len()));
    }
    greedy_continue(params, mel, forced_header, max_len, vocab.special(SpecialTag::EndOfText))
}

/// The generated part of a decode: tokens after `prefix_len`, without `<|endoftext|>`.
pub fn generated_body(tokens: &[TokenId], prefix_len: usize, vocab: &Vocabulary) -> Vec<TokenId> {
    let eot = vocab.special(SpecialTag::EndOfText);
    tokens[prefix_len.min(tokens.len())..]
        .iter()
        .copied()
        .take_while(|&t| t != eot)
        .collect()
}

/// Sum of log-probabilities of `continuation` following `prefix`.
pub fn continuation_logprob<T: Real>(
    params: &Parameters<T>,
    mel: &MelSpectrogram,
    prefix: &[TokenId],
    continuation: &[TokenId],
) -> Result<f64, ModelError> {
    if prefix.is_empty() {
        return Err(ModelError::EmptyPrefix);
    }
    if continuation.is_empty() {
        return Ok(0.0);
    }
    let mut tokens = prefix.to_vec();
    tokens.extend_from_slice(continuation);
    tokens.pop();
    let probs = next_token_probs(params, &mel.values, &tokens)?;
    Ok(continuation
        .iter()
        .enumerate()
        .map(|(i, &t)| probs[[prefix.len() - 1 + i, t as usize]].as_f64().ln())
        .sum())
}
