//! Audio front end: WAV I/O, resampling, log-mel features, SpecAugment and
//! the frame/time bookkeeping shared with the encoder.
//!
//! Features are computed at their true length. A 16 kHz clip of `N >= 400`
//! samples yields `1 + (N - 400) / 160` frames of 80 log-mel channels.

mod augment;
mod mel;
mod resample;
mod wav;

pub use augment::{spec_augment, SpecAugmentPolicy};
pub use mel::{
    frame_count, hz_to_mel, log_mel, mel_to_hz, MelConfig, MelExtractor, MelSpectrogram,
};
pub use resample::resample;
pub use wav::{decode_wav, encode_wav, read_wav, write_wav};

use thiserror::Error;

/// Sample rate the feature extractor expects.
pub const SAMPLE_RATE: u32 = 16_000;
/// Analysis window, in samples at 16 kHz (25 ms).
pub const WINDOW_SAMPLES: usize = 400;
/// Hop between frames, in samples at 16 kHz (10 ms).
pub const HOP_SAMPLES: usize = 160;
pub const N_MELS: usize = 80;
pub const HOP_SECONDS: f64 = 0.010;
pub const WINDOW_SECONDS: f64 = 0.025;
/// Time-axis reduction between mel frames and encoder outputs
/// (stride-2 convolution followed by stride-2 pooling).
pub const ENCODER_STRIDE: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrontendError {
    #[error("audio clip is empty")]
    EmptyAudio,
    #[error("audio clip has {samples} samples, at least {required} are needed")]
    AudioTooShort { samples: usize, required: usize },
    #[error("expected sample rate {expected} Hz, found {found} Hz")]
    SampleRateMismatch { expected: u32, found: u32 },
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("sample {0} is not finite")]
    NonFiniteSample(usize),
    #[error("frame index {0} is negative")]
    InvalidIndex(i64),
    #[error("only mono audio is supported, found {0} channels")]
    ChannelCountUnsupported(u16),
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedFormat(String),
    #[error("malformed WAV data: {0}")]
    Wav(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

/// Mono waveform with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, FrontendError> {
        if sample_rate == 0 {
            return Err(FrontendError::InvalidSampleRate);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(FrontendError::NonFiniteSample(i));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Start time of an encoder output frame. Each encoder frame spans 40 ms:
/// a 10 ms hop times the overall stride of four.
pub fn encoder_frame_to_time(frame_index: i64) -> Result<f64, FrontendError> {
    if frame_index < 0 {
        return Err(FrontendError::InvalidIndex(frame_index));
    }
    Ok(HOP_SECONDS * ENCODER_STRIDE as f64 * frame_index as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_to_time_examples() {
        assert_eq!(encoder_frame_to_time(0).unwrap(), 0.0);
        assert!((encoder_frame_to_time(25).unwrap() - 1.0).abs() < 1e-12);
        assert!((encoder_frame_to_time(750).unwrap() - 30.0).abs() < 1e-9);
        assert_eq!(
            encoder_frame_to_time(-1),
            Err(FrontendError::InvalidIndex(-1))
        );
    }

    #[test]
    fn frame_to_time_matches_hop_geometry() {
        for i in 0..2000 {
            assert_eq!(
                encoder_frame_to_time(i).unwrap(),
                HOP_SECONDS * 4.0 * i as f64
            );
        }
    }

    #[test]
    fn clip_rejects_bad_input() {
        assert_eq!(
            AudioClip::new(vec![0.0], 0),
            Err(FrontendError::InvalidSampleRate)
        );
        assert_eq!(
            AudioClip::new(vec![0.0, f64::NAN], 16000),
            Err(FrontendError::NonFiniteSample(1))
        );
        let clip = AudioClip::new(vec![0.0; 8000], 16000).unwrap();
        assert_eq!(clip.duration(), 0.5);
    }
}
