//! Forward and backward passes of the encoder-decoder.

use ndarray::{s, Array2, ArrayView2, Zip};

use super::layers::{
    avg_pool2, avg_pool2_backward, gelu, gelu_grad, sinusoids, softmax_rows, AttnCache, FfCache, LnCache,
};
use super::params::{DecoderParams, EncoderParams, Parameters};
use super::real::Real;
use super::ModelError;
use crate::corpus::TrainingExample;
use crate::TokenId;

/// Encoder length for `frames` input frames: ceil(ceil(T / 2) / 2).
pub fn encoded_len(frames: usize) -> usize {
    frames.div_ceil(2).div_ceil(2)
}

struct EncBlockTrace<T> {
    ln1: LnCache<T>,
    h1: Array2<T>,
    attn: AttnCache<T>,
    ln2: LnCache<T>,
    h2: Array2<T>,
    ff: FfCache<T>,
}

pub(crate) struct EncoderTrace<T> {
    in_len: usize,
    cols1: Array2<T>,
    pre1: Array2<T>,
    cols2: Array2<T>,
    pre2: Array2<T>,
    blocks: Vec<EncBlockTrace<T>>,
    ln_post: LnCache<T>,
    pub out: Array2<T>,
}

fn check_audio(frames: usize, max_audio_frames: usize) -> Result<(), ModelError> {
    if frames == 0 {
        return Err(ModelError::EmptyAudio);
    }
    let max = max_audio_frames.saturating_mul(4);
    if frames > max {
        return Err(ModelError::AudioTooLong { frames, max });
    }
    Ok(())
}

pub(crate) fn encoder_forward<T: Real>(
    p: &EncoderParams<T>,
    n_heads: usize,
    max_audio_frames: usize,
    mel: &ArrayView2<T>,
) -> Result<EncoderTrace<T>, ModelError> {
    check_audio(mel.nrows(), max_audio_frames)?;
    let (pre1, cols1) = p.conv1.forward(mel);
    let a1 = pre1.mapv(gelu);
    let (pre2, cols2) = p.conv2.forward(&a1.view());
    let a2 = pre2.mapv(gelu);
    let mut x = avg_pool2(&a2.view());
    x += &sinusoids::<T>(x.nrows(), x.ncols());
    let mut blocks = Vec::with_capacity(p.blocks.len());
    for b in &p.blocks {
        let (h1, ln1) = b.ln1.forward(&x.view());
        let (a, attn) = b.attn.forward(&h1.view(), &h1.view(), n_heads, false);
        x += &a;
        let (h2, ln2) = b.ln2.forward(&x.view());
        let (f, ff) = b.ff.forward(&h2.view());
        x += &f;
        blocks.push(EncBlockTrace { ln1, h1, attn, ln2, h2, ff });
    }
    let (out, ln_post) = p.ln_post.forward(&x.view());
    Ok(EncoderTrace {
        in_len: mel.nrows(),
        cols1,
        pre1,
        cols2,
        pre2,
        blocks,
        ln_post,
        out,
    })
}

pub(crate) fn encoder_backward<T: Real>(
    p: &EncoderParams<T>,
    trace: &EncoderTrace<T>,
    d_out: &ArrayView2<T>,
    g: &mut EncoderParams<T>,
) {
    let mut dx = p.ln_post.backward(d_out, &trace.ln_post, &mut g.ln_post);
    for ((b, t), gb) in p.blocks.iter().zip(&trace.blocks).zip(&mut g.blocks).rev() {
        let dh2 = b.ff.backward(&t.h2.view(), &t.ff, &dx.view(), &mut gb.ff);
        dx += &b.ln2.backward(&dh2.view(), &t.ln2, &mut gb.ln2);
        let (dq, dkv) = b.attn.backward(&t.h1.view(), &t.h1.view(), &t.attn, &dx.view(), &mut gb.attn);
        let dh1 = dq + dkv;
        dx += &b.ln1.backward(&dh1.view(), &t.ln1, &mut gb.ln1);
    }
    let len1 = trace.pre1.nrows();
    let mut d2 = avg_pool2_backward(trace.pre2.nrows(), &dx.view());
    Zip::from(&mut d2).and(&trace.pre2).for_each(|d, &x| *d *= gelu_grad(x));
    let mut d1 = p.conv2.backward(len1, &trace.cols2, &d2.view(), &mut g.conv2);
    Zip::from(&mut d1).and(&trace.pre1).for_each(|d, &x| *d *= gelu_grad(x));
    p.conv1.backward(trace.in_len, &trace.cols1, &d1.view(), &mut g.conv1);
}

struct DecBlockTrace<T> {
    ln1: LnCache<T>,
    h1: Array2<T>,
    self_attn: AttnCache<T>,
    ln2: LnCache<T>,
    h2: Array2<T>,
    cross_attn: AttnCache<T>,
    ln3: LnCache<T>,
    h3: Array2<T>,
    ff: FfCache<T>,
}

pub(crate) struct DecoderTrace<T> {
    blocks: Vec<DecBlockTrace<T>>,
    ln_post: LnCache<T>,
    hidden: Array2<T>,
    pub logits: Array2<T>,
}

pub(crate) fn check_tokens(tokens: &[TokenId], vocab_size: usize, max_text_len: usize) -> Result<(), ModelError> {
    if let Some(&t) = tokens.iter().find(|&&t| t as usize >= vocab_size) {
        return Err(ModelError::VocabMismatch { token: t, vocab_size });
    }
    if tokens.len() > max_text_len {
        return Err(ModelError::TextTooLong {
            len: tokens.len(),
            max: max_text_len,
        });
    }
    Ok(())
}

pub(crate) fn decoder_forward<T: Real>(
    p: &DecoderParams<T>,
    n_heads: usize,
    tokens: &[TokenId],
    enc: &ArrayView2<T>,
) -> DecoderTrace<T> {
    let d = p.embed.ncols();
    let mut x = sinusoids::<T>(tokens.len(), d);
    for (i, &t) in tokens.iter().enumerate() {
        let mut row = x.row_mut(i);
        row += &p.embed.row(t as usize);
    }
    let mut blocks = Vec::with_capacity(p.blocks.len());
    for b in &p.blocks {
        let (h1, ln1) = b.ln1.forward(&x.view());
        let (a, self_attn) = b.self_attn.forward(&h1.view(), &h1.view(), n_heads, true);
        x += &a;
        let (h2, ln2) = b.ln2.forward(&x.view());
        let (c, cross_attn) = b.cross_attn.forward(&h2.view(), enc, n_heads, false);
        x += &c;
        let (h3, ln3) = b.ln3.forward(&x.view());
        let (f, ff) = b.ff.forward(&h3.view());
        x += &f;
        blocks.push(DecBlockTrace {
            ln1,
            h1,
            self_attn,
            ln2,
            h2,
            cross_attn,
            ln3,
            h3,
            ff,
        });
    }
    let (hidden, ln_post) = p.ln_post.forward(&x.view());
    let logits = p.out.forward(&hidden.view());
    DecoderTrace {
        blocks,
        ln_post,
        hidden,
        logits,
    }
}

/// Accumulates decoder gradients and returns the gradient for the encoder output.
pub(crate) fn decoder_backward<T: Real>(
    p: &DecoderParams<T>,
    trace: &DecoderTrace<T>,
    tokens: &[TokenId],
    enc: &ArrayView2<T>,
    d_logits: &ArrayView2<T>,
    g: &mut DecoderParams<T>,
) -> Array2<T> {
    let mut d_enc = Array2::zeros(enc.raw_dim());
    let dh = p.out.backward(&trace.hidden.view(), d_logits, &mut g.out);
    let mut dx = p.ln_post.backward(&dh.view(), &trace.ln_post, &mut g.ln_post);
    for ((b, t), gb) in p.blocks.iter().zip(&trace.blocks).zip(&mut g.blocks).rev() {
        let dh3 = b.ff.backward(&t.h3.view(), &t.ff, &dx.view(), &mut gb.ff);
        dx += &b.ln3.backward(&dh3.view(), &t.ln3, &mut gb.ln3);
        let (dh2, de) = b.cross_attn.backward(&t.h2.view(), enc, &t.cross_attn, &dx.view(), &mut gb.cross_attn);
        d_enc += &de;
        dx += &b.ln2.backward(&dh2.view(), &t.ln2, &mut gb.ln2);
        let (dq, dkv) = b.self_attn.backward(&t.h1.view(), &t.h1.view(), &t.self_attn, &dx.view(), &mut gb.self_attn);
        let dh1 = dq + dkv;
        dx += &b.ln1.backward(&dh1.view(), &t.ln1, &mut gb.ln1);
    }
    for (i, &tok) in tokens.iter().enumerate() {
        let mut row = g.embed.row_mut(tok as usize);
        row += &dx.row(i);
    }
    d_enc
}

pub(crate) fn mel_as<T: Real>(mel: &Array2<f64>) -> Array2<T> {
    mel.mapv(T::of)
}

/// Audio representation: `ceil(ceil(T/2)/2) × d_model`.
pub fn encode<T: Real>(params: &Parameters<T>, mel: &Array2<f64>) -> Result<Array2<T>, ModelError> {
    let x = mel_as::<T>(mel);
    Ok(encoder_forward(&params.encoder, params.config.n_heads, params.config.max_audio_frames, &x.view())?.out)
}

/// Next-token distributions for every prefix of `tokens`: row `i` is
/// p(· | tokens[..=i], audio).
pub fn next_token_probs<T: Real>(
    params: &Parameters<T>,
    mel: &Array2<f64>,
    tokens: &[TokenId],
) -> Result<Array2<T>, ModelError> {
    let c = &params.config;
    check_tokens(tokens, c.vocab_size, c.max_text_len)?;
    let enc = encode(params, mel)?;
    let mut logits = decoder_forward(&params.decoder, c.n_heads, tokens, &enc.view()).logits;
    softmax_rows(&mut logits);
    Ok(logits)
}

/// Which gradients a backward pass must produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradNeeds {
    pub encoder: bool,
    pub decoder: bool,
}

impl GradNeeds {
    pub const ALL: GradNeeds = GradNeeds {
        encoder: true,
        decoder: true,
    };
}

fn targets(example: &TrainingExample) -> Result<(usize, Vec<(usize, TokenId)>), ModelError> {
    let tokens = &example.tokens;
    if example.loss_mask.len() != tokens.len() {
        return Err(ModelError::MaskLength {
            tokens: tokens.len(),
            mask: example.loss_mask.len(),
        });
    }
    let picked: Vec<(usize, TokenId)> = (1..tokens.len())
        .filter(|&t| example.loss_mask[t])
        .map(|t| (t - 1, tokens[t]))
        .collect();
    if picked.is_empty() {
        return Err(ModelError::NoLossPositions);
    }
    Ok((tokens.len() - 1, picked))
}

/// Mean negative log-probability over masked-in positions.
pub fn loss<T: Real>(params: &Parameters<T>, example: &TrainingExample) -> Result<f64, ModelError> {
    let c = &params.config;
    check_tokens(&example.tokens, c.vocab_size, c.max_text_len)?;
    let (n_in, picked) = targets(example)?;
    let enc = encode(params, &example.features.values)?;
    let trace = decoder_forward(&params.decoder, c.n_heads, &example.tokens[..n_in], &enc.view());
    let mut total = 0.0;
    for &(row, target) in &picked {
        total += nll(&trace.logits.row(row).to_vec(), target as usize);
    }
    Ok(total / picked.len() as f64)
}

fn nll<T: Real>(logits: &[T], target: usize) -> f64 {
    let max = logits.iter().cloned().fold(T::neg_infinity(), T::max).as_f64();
    let lse = max + logits.iter().map(|&v| (v.as_f64() - max).exp()).sum::<f64>().ln();
    lse - logits[target].as_f64()
}

/// Loss of one example and its gradient, accumulated into `grads` with weight
/// `scale`.
pub fn accumulate_gradient<T: Real>(
    params: &Parameters<T>,
    example: &TrainingExample,
    scale: f64,
    needs: GradNeeds,
    grads: &mut Parameters<T>,
) -> Result<f64, ModelError> {
    let c = &params.config;
    check_tokens(&example.tokens, c.vocab_size, c.max_text_len)?;
    let (n_in, picked) = targets(example)?;
    let mel = mel_as::<T>(&example.features.values);
    let enc_trace = encoder_forward(&params.encoder, c.n_heads, c.max_audio_frames, &mel.view())?;
    let inputs = &example.tokens[..n_in];
    let trace = decoder_forward(&params.decoder, c.n_heads, inputs, &enc_trace.out.view());

    let mut probs = trace.logits.clone();
    softmax_rows(&mut probs);
    let mut d_logits = Array2::<T>::zeros(probs.raw_dim());
    let w = T::of(scale / picked.len() as f64);
    let mut total = 0.0;
    for &(row, target) in &picked {
        total += nll(&trace.logits.row(row).to_vec(), target as usize);
        let mut d = d_logits.row_mut(row);
        d.assign(&probs.row(row));
        d[target as usize] -= T::one();
        d *= w;
    }
    let loss = total / picked.len() as f64;
    if !needs.encoder && !needs.decoder {
        return Ok(loss);
    }
    let d_enc = decoder_backward(
        &params.decoder,
        &trace,
        inputs,
        &enc_trace.out.view(),
        &d_logits.view(),
        &mut grads.decoder,
    );
    if needs.encoder {
        encoder_backward(&params.encoder, &enc_trace, &d_enc.view(), &mut grads.encoder);
    }
    Ok(loss)
}

/// Mean loss over `batch` and the gradient of that mean.
pub fn batch_gradient<T: Real>(
    params: &Parameters<T>,
    batch: &[TrainingExample],
    needs: GradNeeds,
) -> Result<(f64, Parameters<T>), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let mut grads = params.zeros_like();
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for ex in batch {
        total += accumulate_gradient(params, ex, scale, needs, &mut grads)?;
    }
    Ok((total * scale, grads))
}

/// Logits for the last position only; used by decoding.
pub(crate) fn last_logits<T: Real>(params: &Parameters<T>, enc: &Array2<T>, tokens: &[TokenId]) -> Vec<T> {
    let trace = decoder_forward(&params.decoder, params.config.n_heads, tokens, &enc.view());
    trace.logits.slice(s![tokens.len() - 1, ..]).to_vec()
}
