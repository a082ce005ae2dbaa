//! Little-endian binary checkpoints.
//!
//! ```text
//! magic "AMTCKPT\0" | version u32
//! config: 8 × u64 sizes, seed u64
//! adam: beta1 beta2 eps weight_decay clip_norm (f64)
//! step u64 | tensor count u32
//! per tensor: name len u32, name, ndim u32, dims u64…, values f64…
//! ```
//!
//! Tensors are `param.<name>`, `adam.m.<name>` and `adam.v.<name>`.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use super::optim::{AdamWConfig, OptimizerState};
use super::params::{ModelConfig, Parameters};
use super::real::Real;

pub const MAGIC: &[u8; 8] = b"AMTCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("invalid config in checkpoint: {0}")]
    InvalidConfig(String),
    #[error("unexpected tensor {0:?}")]
    UnexpectedTensor(String),
    #[error("tensor {name:?} has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("missing tensor {0:?}")]
    MissingTensor(String),
    #[error("{0} trailing bytes after last tensor")]
    TrailingBytes(usize),
    #[error("checkpoint not found: {0}")]
    NotFound(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub fn encode_checkpoint<T: Real>(params: &Parameters<T>, opt: &OptimizerState<T>) -> Vec<u8> {
    let c = &params.config;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [
        c.d_model,
        c.n_heads,
        c.n_encoder_layers,
        c.n_decoder_layers,
        c.ff_multiplier,
        c.vocab_size,
        c.max_audio_frames,
        c.max_text_len,
    ] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.extend_from_slice(&c.seed.to_le_bytes());
    let h = opt.hyper;
    for v in [h.beta1, h.beta2, h.eps, h.weight_decay, h.clip_norm] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&opt.step.to_le_bytes());
    let groups = [("param.", params), ("adam.m.", &opt.m), ("adam.v.", &opt.v)];
    let count: usize = groups.iter().map(|(_, p)| p.tensors().len()).sum();
    out.extend_from_slice(&(count as u32).to_le_bytes());
    for (prefix, p) in groups {
        for t in p.tensors() {
            let name = format!("{prefix}{}", t.name);
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data {
                out.extend_from_slice(&v.as_f64().to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(CheckpointError::Truncated(self.bytes.len()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn size(&mut self) -> Result<usize, CheckpointError> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| CheckpointError::InvalidConfig(format!("size {v} overflows")))
    }
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

pub fn decode_checkpoint<T: Real>(bytes: &[u8]) -> Result<(Parameters<T>, OptimizerState<T>), CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len()).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let config = ModelConfig {
        d_model: r.size()?,
        n_heads: r.size()?,
        n_encoder_layers: r.size()?,
        n_decoder_layers: r.size()?,
        ff_multiplier: r.size()?,
        vocab_size: r.size()?,
        max_audio_frames: r.size()?,
        max_text_len: r.size()?,
        seed: r.u64()?,
    };
    config.validate().map_err(|e| CheckpointError::InvalidConfig(e.to_string()))?;
    let hyper = AdamWConfig {
        beta1: r.f64()?,
        beta2: r.f64()?,
        eps: r.f64()?,
        weight_decay: r.f64()?,
        clip_norm: r.f64()?,
    };
    let step = r.u64()?;
    let count = r.u32()? as usize;
    // Refuse to allocate more than the payload could possibly describe.
    let needed = config
        .parameter_count()
        .and_then(|n| n.checked_mul(3 * 8))
        .ok_or_else(|| CheckpointError::InvalidConfig("parameter count overflows".into()))?;
    if needed > r.remaining() {
        return Err(CheckpointError::Truncated(bytes.len()));
    }

    let mut params = Parameters::<T>::init(config).map_err(|e| CheckpointError::InvalidConfig(e.to_string()))?;
    let mut m = params.zeros_like();
    let mut v = params.zeros_like();
    {
        let mut slots = HashMap::new();
        for (prefix, p) in [("param.", &mut params), ("adam.m.", &mut m), ("adam.v.", &mut v)] {
            for t in p.tensors_mut() {
                slots.insert(format!("{prefix}{}", t.name), (t, false));
            }
        }
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8_lossy(r.take(len)?).into_owned();
            let ndim = r.u32()? as usize;
            if ndim > 8 {
                return Err(CheckpointError::UnexpectedTensor(name));
            }
            let shape = (0..ndim).map(|_| r.size()).collect::<Result<Vec<_>, _>>()?;
            let (slot, seen) = slots
                .get_mut(&name)
                .filter(|(_, seen)| !*seen)
                .ok_or_else(|| CheckpointError::UnexpectedTensor(name.clone()))?;
            if slot.shape != shape {
                return Err(CheckpointError::ShapeMismatch {
                    name,
                    expected: slot.shape.clone(),
                    found: shape,
                });
            }
            for x in slot.data.iter_mut() {
                *x = T::of(r.f64()?);
            }
            *seen = true;
        }
        let mut missing: Vec<&String> = slots.iter().filter(|(_, (_, seen))| !seen).map(|(k, _)| k).collect();
        missing.sort();
        if let Some(name) = missing.first() {
            return Err(CheckpointError::MissingTensor((*name).clone()));
        }
    }
    if r.remaining() > 0 {
        return Err(CheckpointError::TrailingBytes(r.remaining()));
    }
    Ok((params, OptimizerState { hyper, m, v, step }))
}

pub fn save_checkpoint<T: Real>(
    path: impl AsRef<Path>,
    params: &Parameters<T>,
    opt: &OptimizerState<T>,
) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    let io = |e: std::io::Error| CheckpointError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    std::fs::write(&tmp, encode_checkpoint(params, opt)).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<(Parameters<T>, OptimizerState<T>), CheckpointError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CheckpointError::NotFound(path.display().to_string()),
        _ => CheckpointError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        },
    })?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            d_model: 8,
            n_heads: 2,
            n_encoder_layers: 1,
            n_decoder_layers: 1,
            ff_multiplier: 2,
            vocab_size: 11,
            max_audio_frames: 10,
            max_text_len: 10,
            seed: 4,
        }
    }

    fn state() -> (Parameters<f64>, OptimizerState<f64>) {
        let p = Parameters::<f64>::init(tiny()).unwrap();
        let mut o = OptimizerState::new(&p, AdamWConfig::default());
        o.step = 17;
        o.m = Parameters::init(ModelConfig { seed: 5, ..tiny() }).unwrap();
        o.m.config = p.config;
        o.v.fill(0.25);
        (p, o)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (p, o) = state();
        let bytes = encode_checkpoint(&p, &o);
        let (p2, o2) = decode_checkpoint::<f64>(&bytes).unwrap();
        assert_eq!(p, p2);
        assert_eq!(o, o2);
        assert_eq!(encode_checkpoint(&p2, &o2), bytes);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let (p, o) = state();
        let bytes = encode_checkpoint(&p, &o);
        assert_eq!(decode_checkpoint::<f64>(b"nope").unwrap_err(), CheckpointError::BadMagic);
        assert!(matches!(
            decode_checkpoint::<f64>(&bytes[..bytes.len() - 3]),
            Err(CheckpointError::Truncated(_))
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert_eq!(decode_checkpoint::<f64>(&extra).unwrap_err(), CheckpointError::TrailingBytes(1));
        let mut ver = bytes.clone();
        ver[8] = 9;
        assert_eq!(decode_checkpoint::<f64>(&ver).unwrap_err(), CheckpointError::UnsupportedVersion(9));
        let mut huge = bytes;
        huge[12..20].copy_from_slice(&(1u64 << 40).to_le_bytes());
        assert!(decode_checkpoint::<f64>(&huge).is_err());
    }

    #[test]
    fn file_round_trip_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let (p, o) = state();
        let path = dir.path().join("c.ckpt");
        save_checkpoint(&path, &p, &o).unwrap();
        assert_eq!(load_checkpoint::<f64>(&path).unwrap().0, p);
        assert!(matches!(
            load_checkpoint::<f64>(dir.path().join("none")),
            Err(CheckpointError::NotFound(_))
        ));
    }
}
