use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{
    AudioClip, FrontendError, HOP_SAMPLES, HOP_SECONDS, N_MELS, SAMPLE_RATE, WINDOW_SAMPLES,
    WINDOW_SECONDS,
};

/// Number of frames produced for `n_samples` at 16 kHz, or 0 when the clip is
/// shorter than one window.
pub fn frame_count(n_samples: usize) -> usize {
    if n_samples < WINDOW_SAMPLES {
        0
    } else {
        1 + (n_samples - WINDOW_SAMPLES) / HOP_SAMPLES
    }
}

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelConfig {
    /// Energies are floored at this value before the log.
    pub epsilon: f64,
    /// Dynamic range kept below the per-utterance maximum, in log10 units.
    pub dynamic_range: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-10,
            dynamic_range: 8.0,
        }
    }
}

/// `T x 80` log-mel matrix with its frame geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub values: Array2<f64>,
    pub hop_seconds: f64,
    pub window_seconds: f64,
}

impl MelSpectrogram {
    /// Wraps precomputed values; the channel count must be 80.
    pub fn from_values(values: Array2<f64>) -> Self {
        assert_eq!(values.ncols(), N_MELS, "mel spectrogram needs 80 channels");
        Self {
            values,
            hop_seconds: HOP_SECONDS,
            window_seconds: WINDOW_SECONDS,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn mean(&self) -> f64 {
        self.values.mean().unwrap_or(0.0)
    }

    /// Concatenates spectrograms on the time axis with `gap` zero frames between
    /// consecutive items.
    pub fn concat_with_gap(items: &[MelSpectrogram], gap: usize) -> MelSpectrogram {
        let total: usize =
            items.iter().map(|m| m.n_frames()).sum::<usize>() + gap * items.len().saturating_sub(1);
        let mut values = Array2::zeros((total, N_MELS));
        let mut row = 0;
        for (i, m) in items.iter().enumerate() {
            if i > 0 {
                row += gap;
            }
            values
                .slice_mut(ndarray::s![row..row + m.n_frames(), ..])
                .assign(&m.values);
            row += m.n_frames();
        }
        MelSpectrogram::from_values(values)
    }
}

/// Log-mel feature extractor: periodic Hann window, 400-point FFT, 80 HTK
/// triangular filters spanning 0-8 kHz.
pub struct MelExtractor {
    config: MelConfig,
    window: Vec<f64>,
    filters: Array2<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MelExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MelExtractor")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Default for MelExtractor {
    fn default() -> Self {
        Self::new(MelConfig::default())
    }
}

impl MelExtractor {
    pub fn new(config: MelConfig) -> Self {
        let window = (0..WINDOW_SAMPLES)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / WINDOW_SAMPLES as f64).cos())
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(WINDOW_SAMPLES);
        Self {
            config,
            window,
            filters: mel_filterbank(),
            fft,
        }
    }

    pub fn config(&self) -> MelConfig {
        self.config
    }

    /// `80 x 201` triangular filter weights over the FFT bins.
    pub fn filters(&self) -> &Array2<f64> {
        &self.filters
    }

    /// Center frequency of each filter in Hz.
    pub fn center_frequencies() -> Vec<f64> {
        mel_points()[1..=N_MELS].iter().map(|&m| mel_to_hz(m)).collect()
    }

    fn check(&self, clip: &AudioClip) -> Result<(), FrontendError> {
        if clip.sample_rate() != SAMPLE_RATE {
            return Err(FrontendError::SampleRateMismatch {
                expected: SAMPLE_RATE,
                found: clip.sample_rate(),
            });
        }
        if clip.len() < WINDOW_SAMPLES {
            return Err(FrontendError::AudioTooShort {
                samples: clip.len(),
                required: WINDOW_SAMPLES,
            });
        }
        Ok(())
    }

    /// log10 mel energies floored at epsilon, without normalization.
    pub fn log_mel_raw(&self, clip: &AudioClip) -> Result<MelSpectrogram, FrontendError> {
        self.check(clip)?;
        let n_frames = frame_count(clip.len());
        let n_bins = WINDOW_SAMPLES / 2 + 1;
        let samples = clip.samples();
        let mut power = Array2::<f64>::zeros((n_frames, n_bins));
        let mut buf = vec![Complex::new(0.0, 0.0); WINDOW_SAMPLES];
        for (t, mut row) in power.axis_iter_mut(Axis(0)).enumerate() {
            let start = t * HOP_SAMPLES;
            for (i, slot) in buf.iter_mut().enumerate() {
                *slot = Complex::new(samples[start + i] * self.window[i], 0.0);
            }
            self.fft.process(&mut buf);
            for (k, p) in row.iter_mut().enumerate() {
                *p = buf[k].norm_sqr();
            }
        }
        let eps = self.config.epsilon;
        let values = power.dot(&self.filters.t()).mapv(|e| e.max(eps).log10());
        Ok(MelSpectrogram::from_values(values))
    }

    /// Normalized log-mel features: values more than `dynamic_range` below the
    /// utterance maximum are clamped, then shifted and scaled so the kept
    /// range maps onto [-1, 1].
    pub fn log_mel(&self, clip: &AudioClip) -> Result<MelSpectrogram, FrontendError> {
        let mut mel = self.log_mel_raw(clip)?;
        normalize(&mut mel.values, self.config.dynamic_range);
        Ok(mel)
    }
}

fn normalize(values: &mut Array2<f64>, dynamic_range: f64) {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let half = dynamic_range / 2.0;
    values.mapv_inplace(|v| (v.max(max - dynamic_range) - max + half) / half);
}

fn mel_points() -> Vec<f64> {
    let lo = hz_to_mel(0.0);
    let hi = hz_to_mel(SAMPLE_RATE as f64 / 2.0);
    (0..N_MELS + 2)
        .map(|i| lo + (hi - lo) * i as f64 / (N_MELS + 1) as f64)
        .collect()
}

fn mel_filterbank() -> Array2<f64> {
    let n_bins = WINDOW_SAMPLES / 2 + 1;
    let hz: Vec<f64> = mel_points().into_iter().map(mel_to_hz).collect();
    let bin_hz = SAMPLE_RATE as f64 / WINDOW_SAMPLES as f64;
    Array2::from_shape_fn((N_MELS, n_bins), |(m, k)| {
        let f = k as f64 * bin_hz;
        let (lo, center, hi) = (hz[m], hz[m + 1], hz[m + 2]);
        let rising = (f - lo) / (center - lo);
        let falling = (hi - f) / (hi - center);
        rising.min(falling).max(0.0)
    })
}

/// Convenience wrapper around a default [`MelExtractor`].
pub fn log_mel(clip: &AudioClip) -> Result<MelSpectrogram, FrontendError> {
    MelExtractor::default().log_mel(clip)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, n: usize) -> AudioClip {
        let s = (0..n)
            .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / 16000.0).sin())
            .collect();
        AudioClip::new(s, 16000).unwrap()
    }

    #[test]
    fn one_second_gives_98_frames() {
        let mel = log_mel(&sine(440.0, 16000)).unwrap();
        assert_eq!(mel.n_frames(), 98);
        assert_eq!(mel.values.ncols(), 80);
        assert!(mel.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn silence_is_log_epsilon_then_constant() {
        let clip = AudioClip::new(vec![0.0; 4000], 16000).unwrap();
        let ex = MelExtractor::default();
        let raw = ex.log_mel_raw(&clip).unwrap();
        assert!(raw.values.iter().all(|&v| v == (1e-10f64).log10()));
        let norm = ex.log_mel(&clip).unwrap();
        let first = norm.values[[0, 0]];
        assert!(norm.values.iter().all(|&v| v == first));
    }

    #[test]
    fn rejects_short_and_wrong_rate() {
        let ex = MelExtractor::default();
        let short = AudioClip::new(vec![0.0; 399], 16000).unwrap();
        assert!(matches!(
            ex.log_mel(&short),
            Err(FrontendError::AudioTooShort { .. })
        ));
        let wrong = AudioClip::new(vec![0.0; 4000], 8000).unwrap();
        assert!(matches!(
            ex.log_mel(&wrong),
            Err(FrontendError::SampleRateMismatch { .. })
        ));
    }

    #[test]
    fn normalized_range() {
        let mel = log_mel(&sine(1000.0, 8000)).unwrap();
        let max = mel.values.iter().cloned().fold(f64::MIN, f64::max);
        let min = mel.values.iter().cloned().fold(f64::MAX, f64::min);
        assert!((max - 1.0).abs() < 1e-12);
        assert!(min >= -1.0 - 1e-12);
    }

    #[test]
    fn trailing_silence_shorter_than_hop() {
        let clip = sine(700.0, 5000);
        let a = log_mel(&clip).unwrap();
        for extra in [1usize, 80, 159] {
            let mut s = clip.samples().to_vec();
            s.extend(std::iter::repeat_n(0.0, extra));
            let b = log_mel(&AudioClip::new(s, 16000).unwrap()).unwrap();
            assert!(b.n_frames() == a.n_frames() || b.n_frames() == a.n_frames() + 1);
            let shared = a.n_frames();
            let diff = (&a.values - &b.values.slice(ndarray::s![..shared, ..]))
                .mapv(f64::abs)
                .fold(0.0f64, |m, &v| m.max(v));
            assert!(diff < 1e-9, "shared frames changed by {diff}");
        }
    }

    #[test]
    fn concat_inserts_gap() {
        let a = MelSpectrogram::from_values(Array2::ones((3, 80)));
        let b = MelSpectrogram::from_values(Array2::ones((2, 80)) * 2.0);
        let c = MelSpectrogram::concat_with_gap(&[a, b], 1);
        assert_eq!(c.n_frames(), 6);
        assert_eq!(c.values[[3, 0]], 0.0);
        assert_eq!(c.values[[5, 0]], 2.0);
    }
}
