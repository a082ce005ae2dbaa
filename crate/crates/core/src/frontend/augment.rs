use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MelSpectrogram;

/// Frequency and time masking. Masked cells take the utterance mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecAugmentPolicy {
    pub freq_mask_width_max: usize,
    pub n_freq_masks: usize,
    pub time_mask_width_max: usize,
    pub n_time_masks: usize,
    pub seed: u64,
}

impl SpecAugmentPolicy {
    /// LibriSpeech Basic: one frequency mask up to 27 channels, one time mask
    /// up to 100 frames, no time warping.
    pub fn librispeech_basic(seed: u64) -> Self {
        Self {
            freq_mask_width_max: 27,
            n_freq_masks: 1,
            time_mask_width_max: 100,
            n_time_masks: 1,
            seed,
        }
    }

    pub fn identity() -> Self {
        Self {
            freq_mask_width_max: 0,
            n_freq_masks: 0,
            time_mask_width_max: 0,
            n_time_masks: 0,
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Applies the masks described by `policy`. Widths larger than the matching
/// dimension are clamped to it.
pub fn spec_augment(mel: &MelSpectrogram, policy: &SpecAugmentPolicy) -> MelSpectrogram {
    let mut out = mel.clone();
    if policy.n_freq_masks == 0 && policy.n_time_masks == 0 {
        return out;
    }
    let (n_frames, n_chan) = out.values.dim();
    if n_frames == 0 {
        return out;
    }
    let fill = mel.mean();
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);

    for _ in 0..policy.n_freq_masks {
        let (start, width) = draw_band(&mut rng, policy.freq_mask_width_max, n_chan);
        out.values
            .slice_mut(ndarray::s![.., start..start + width])
            .fill(fill);
    }
    for _ in 0..policy.n_time_masks {
        let (start, width) = draw_band(&mut rng, policy.time_mask_width_max, n_frames);
        out.values
            .slice_mut(ndarray::s![start..start + width, ..])
            .fill(fill);
    }
    out
}

fn draw_band(rng: &mut ChaCha8Rng, width_max: usize, dim: usize) -> (usize, usize) {
    let width = rng.random_range(0..=width_max.min(dim));
    let start = rng.random_range(0..=dim - width);
    (start, width)
}
