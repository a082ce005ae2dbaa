use ndarray::{Array2, ArrayBase, Dimension, OwnedRepr};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Attention, Conv1d, FeedForward, LayerNorm, Linear};
use super::real::Real;
use super::ModelError;
use crate::frontend::N_MELS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_encoder_layers: usize,
    pub n_decoder_layers: usize,
    pub ff_multiplier: usize,
    pub vocab_size: usize,
    /// Longest encoder output; inputs may have up to four times as many frames.
    pub max_audio_frames: usize,
    pub max_text_len: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// d_model 128, 4 heads, 4 + 4 layers, feed-forward width 4 × d_model.
    pub fn desk(vocab_size: usize) -> Self {
        Self {
            d_model: 128,
            n_heads: 4,
            n_encoder_layers: 4,
            n_decoder_layers: 4,
            ff_multiplier: 4,
            vocab_size,
            max_audio_frames: 750,
            max_text_len: 448,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_encoder_layers", self.n_encoder_layers),
            ("n_decoder_layers", self.n_decoder_layers),
            ("ff_multiplier", self.ff_multiplier),
            ("vocab_size", self.vocab_size),
            ("max_audio_frames", self.max_audio_frames),
            ("max_text_len", self.max_text_len),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::InvalidConfig(format!("{name} must be positive")));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }

    /// Total scalar parameter count, or `None` on overflow.
    pub fn parameter_count(&self) -> Option<usize> {
        let d = self.d_model;
        let ff = d.checked_mul(self.ff_multiplier)?;
        let lin = |i: usize, o: usize| i.checked_mul(o)?.checked_add(o);
        let ln = 2 * d;
        let attn = lin(d, d)?.checked_mul(4)?;
        let ffn = lin(d, ff)?.checked_add(lin(ff, d)?)?;
        let conv1 = lin(3 * N_MELS, d)?;
        let conv2 = lin(d.checked_mul(3)?, d)?;
        let enc_block = (2 * ln).checked_add(attn)?.checked_add(ffn)?;
        let dec_block = (3 * ln).checked_add(attn.checked_mul(2)?)?.checked_add(ffn)?;
        let enc = conv1
            .checked_add(conv2)?
            .checked_add(enc_block.checked_mul(self.n_encoder_layers)?)?
            .checked_add(ln)?;
        let dec = self
            .vocab_size
            .checked_mul(d)?
            .checked_add(dec_block.checked_mul(self.n_decoder_layers)?)?
            .checked_add(ln)?
            .checked_add(lin(d, self.vocab_size)?)?;
        enc.checked_add(dec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderBlock<T> {
    pub ln1: LayerNorm<T>,
    pub attn: Attention<T>,
    pub ln2: LayerNorm<T>,
    pub ff: FeedForward<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderBlock<T> {
    pub ln1: LayerNorm<T>,
    pub self_attn: Attention<T>,
    pub ln2: LayerNorm<T>,
    pub cross_attn: Attention<T>,
    pub ln3: LayerNorm<T>,
    pub ff: FeedForward<T>,
}

/// The audio encoder (φ), conv stem included.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    pub conv1: Conv1d<T>,
    pub conv2: Conv1d<T>,
    pub blocks: Vec<EncoderBlock<T>>,
    pub ln_post: LayerNorm<T>,
}

/// The text decoder (θ): embedding, blocks, output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams<T> {
    /// `[vocab, d_model]`
    pub embed: Array2<T>,
    pub blocks: Vec<DecoderBlock<T>>,
    pub ln_post: LayerNorm<T>,
    pub out: Linear<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<T> {
    pub config: ModelConfig,
    pub encoder: EncoderParams<T>,
    pub decoder: DecoderParams<T>,
}

impl<T: Real> Parameters<T> {
    /// Seeded initialization from `config.seed`.
    pub fn init(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.d_model;
        let ff = d * config.ff_multiplier;
        let encoder = EncoderParams {
            conv1: Conv1d::init(&mut rng, N_MELS, d, 1),
            conv2: Conv1d::init(&mut rng, d, d, 2),
            blocks: (0..config.n_encoder_layers)
                .map(|_| EncoderBlock {
                    ln1: LayerNorm::new(d),
                    attn: Attention::init(&mut rng, d),
                    ln2: LayerNorm::new(d),
                    ff: FeedForward::init(&mut rng, d, ff),
                })
                .collect(),
            ln_post: LayerNorm::new(d),
        };
        let embed = Array2::from_shape_simple_fn((config.vocab_size, d), || T::of(rng.random_range(-1.0..1.0)));
        let decoder = DecoderParams {
            embed,
            blocks: (0..config.n_decoder_layers)
                .map(|_| DecoderBlock {
                    ln1: LayerNorm::new(d),
                    self_attn: Attention::init(&mut rng, d),
                    ln2: LayerNorm::new(d),
                    cross_attn: Attention::init(&mut rng, d),
                    ln3: LayerNorm::new(d),
                    ff: FeedForward::init(&mut rng, d, ff),
                })
                .collect(),
            ln_post: LayerNorm::new(d),
            out: Linear::init(&mut rng, d, config.vocab_size),
        };
        Ok(Self {
            config,
            encoder,
            decoder,
        })
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(T::zero());
        z
    }

    pub fn fill(&mut self, value: T) {
        for t in self.tensors_mut() {
            t.data.fill(value);
        }
    }

    /// Every tensor with a dotted name (`encoder.blocks.0.attn.q.w`, ...).
    pub fn tensors(&self) -> Vec<TensorRef<'_, T>> {
        let mut out = Vec::new();
        self.encoder.visit("encoder.", &mut out);
        self.decoder.visit("decoder.", &mut out);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_, T>> {
        let mut out = Vec::new();
        self.encoder.visit_mut("encoder.", &mut out);
        self.decoder.visit_mut("decoder.", &mut out);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    pub fn cast<U: Real>(&self) -> Parameters<U> {
        let mut out = Parameters::<U>::init(self.config).expect("config already validated");
        for (dst, src) in out.tensors_mut().into_iter().zip(self.tensors()) {
            for (d, s) in dst.data.iter_mut().zip(src.data) {
                *d = U::of(s.as_f64());
            }
        }
        out
    }
}

/// Which of the two parameter groups a tensor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Encoder,
    Decoder,
}

pub struct TensorRef<'a, T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [T],
}

pub struct TensorMut<'a, T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a mut [T],
}

impl<T> TensorRef<'_, T> {
    pub fn group(&self) -> Group {
        group_of(&self.name)
    }
}

impl<T> TensorMut<'_, T> {
    pub fn group(&self) -> Group {
        group_of(&self.name)
    }
}

fn group_of(name: &str) -> Group {
    if name.starts_with("encoder.") {
        Group::Encoder
    } else {
        Group::Decoder
    }
}

fn tensor_ref<'a, T, D: Dimension>(name: String, a: &'a ArrayBase<OwnedRepr<T>, D>) -> TensorRef<'a, T> {
    TensorRef {
        name,
        shape: a.shape().to_vec(),
        data: a.as_slice_memory_order().expect("parameters are contiguous"),
    }
}

fn tensor_mut<'a, T, D: Dimension>(name: String, a: &'a mut ArrayBase<OwnedRepr<T>, D>) -> TensorMut<'a, T> {
    TensorMut {
        name,
        shape: a.shape().to_vec(),
        data: a.as_slice_memory_order_mut().expect("parameters are contiguous"),
    }
}

trait Visit<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a, T>>);
    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a, T>>);
}

impl<T, V: Visit<T>> Visit<T> for Vec<V> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a, T>>) {
        for (i, v) in self.iter().enumerate() {
            v.visit(&format!("{prefix}{i}."), out);
        }
    }
    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a, T>>) {
        for (i, v) in self.iter_mut().enumerate() {
            v.visit_mut(&format!("{prefix}{i}."), out);
        }
    }
}

macro_rules! visit_fields {
    ($ty:ident; arrays: [$($a:ident),*]; nested: [$($n:ident),*]) => {
        impl<T> Visit<T> for $ty<T> {
            fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a, T>>) {
                $( out.push(tensor_ref(format!("{prefix}{}", stringify!($a)), &self.$a)); )*
                $( self.$n.visit(&format!("{prefix}{}.", stringify!($n)), out); )*
            }
            fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a, T>>) {
                $( out.push(tensor_mut(format!("{prefix}{}", stringify!($a)), &mut self.$a)); )*
                $( self.$n.visit_mut(&format!("{prefix}{}.", stringify!($n)), out); )*
            }
        }
    };
}

visit_fields!(Linear; arrays: [w, b]; nested: []);
visit_fields!(Conv1d; arrays: [w, b]; nested: []);
visit_fields!(LayerNorm; arrays: [gamma, beta]; nested: []);
visit_fields!(Attention; arrays: []; nested: [q, k, v, o]);
visit_fields!(FeedForward; arrays: []; nested: [up, down]);
visit_fields!(EncoderBlock; arrays: []; nested: [ln1, attn, ln2, ff]);
visit_fields!(DecoderBlock; arrays: []; nested: [ln1, self_attn, ln2, cross_attn, ln3, ff]);
visit_fields!(EncoderParams; arrays: []; nested: [conv1, conv2, blocks, ln_post]);
visit_fields!(DecoderParams; arrays: [embed]; nested: [blocks, ln_post, out]);

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            d_model: 16,
            n_heads: 2,
            n_encoder_layers: 1,
            n_decoder_layers: 2,
            ff_multiplier: 2,
            vocab_size: 30,
            max_audio_frames: 100,
            max_text_len: 50,
            seed: 1,
        }
    }

    #[test]
    fn parameter_count_matches_tensors() {
        let p = Parameters::<f64>::init(tiny()).unwrap();
        let total: usize = p.tensors().iter().map(|t| t.data.len()).sum();
        assert_eq!(Some(total), tiny().parameter_count());
    }

    #[test]
    fn names_are_unique_and_grouped() {
        let p = Parameters::<f64>::init(tiny()).unwrap();
        let names: Vec<String> = p.tensors().iter().map(|t| t.name.clone()).collect();
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), names.len());
        assert!(names.contains(&"encoder.conv1.w".to_string()));
        assert!(names.contains(&"decoder.blocks.1.cross_attn.o.b".to_string()));
        assert!(p.tensors().iter().any(|t| t.group() == Group::Encoder));
    }

    #[test]
    fn init_is_seeded() {
        let a = Parameters::<f64>::init(tiny()).unwrap();
        let b = Parameters::<f64>::init(tiny()).unwrap();
        assert_eq!(a, b);
        let c = Parameters::<f64>::init(ModelConfig { seed: 2, ..tiny() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_configs() {
        assert!(ModelConfig { n_heads: 3, ..tiny() }.validate().is_err());
        assert!(ModelConfig { vocab_size: 0, ..tiny() }.validate().is_err());
    }
}
