//! Windowed-sinc polyphase resampler.
//!
//! The rate ratio is reduced to `up / down`. Output sample `n` sits at input
//! position `n * down / up`; its phase `(n * down) % up` selects one row of a
//! precomputed Blackman-windowed sinc table. The low-pass cutoff is 0.94 of the
//! lower of the two Nyquist frequencies, with 16 zero crossings per side.

use std::f64::consts::PI;

use super::{AudioClip, FrontendError};

const ZERO_CROSSINGS: f64 = 16.0;
const ROLLOFF: f64 = 0.94;
const MAX_TABLE_PHASES: u64 = 4096;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn blackman(x: f64) -> f64 {
    // x in [-1, 1]
    0.42 + 0.5 * (PI * x).cos() + 0.08 * (2.0 * PI * x).cos()
}

struct Kernel {
    cutoff: f64,
    half_width: f64,
}

impl Kernel {
    fn eval(&self, t: f64) -> f64 {
        if t.abs() >= self.half_width {
            return 0.0;
        }
        let x = 2.0 * self.cutoff * t;
        let sinc = if x.abs() < 1e-12 {
            1.0
        } else {
            (PI * x).sin() / (PI * x)
        };
        2.0 * self.cutoff * sinc * blackman(t / self.half_width)
    }
}

pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, FrontendError> {
    if target_rate == 0 {
        return Err(FrontendError::InvalidSampleRate);
    }
    if clip.is_empty() {
        return Err(FrontendError::EmptyAudio);
    }
    let source_rate = clip.sample_rate();
    if source_rate == target_rate {
        return Ok(clip.clone());
    }
    let g = gcd(source_rate as u64, target_rate as u64);
    let up = target_rate as u64 / g;
    let down = source_rate as u64 / g;

    // cutoff in cycles per input sample
    let cutoff = 0.5 * ROLLOFF * (up as f64 / down as f64).min(1.0);
    let kernel = Kernel {
        cutoff,
        half_width: ZERO_CROSSINGS / (2.0 * cutoff),
    };
    let reach = kernel.half_width.ceil() as i64;
    let taps = (2 * reach) as usize;

    let table: Option<Vec<f64>> = (up <= MAX_TABLE_PHASES).then(|| {
        let mut table = Vec::with_capacity(up as usize * taps);
        for phase in 0..up {
            let frac = phase as f64 / up as f64;
            for j in 0..taps {
                table.push(kernel.eval(frac + (reach - 1) as f64 - j as f64));
            }
        }
        table
    });

    let input = clip.samples();
    let n_in = input.len() as u64;
    let n_out = (n_in * up).div_ceil(down);
    let mut out = Vec::with_capacity(n_out as usize);
    for n in 0..n_out {
        let pos = n * down;
        let base = (pos / up) as i64;
        let phase = pos % up;
        let first = base - (reach - 1);
        let mut acc = 0.0;
        for j in 0..taps {
            let k = first + j as i64;
            if k < 0 || k >= n_in as i64 {
                continue;
            }
            let w = match &table {
                Some(t) => t[phase as usize * taps + j],
                None => kernel.eval(phase as f64 / up as f64 + (reach - 1) as f64 - j as f64),
            };
            acc += input[k as usize] * w;
        }
        out.push(acc);
    }
    AudioClip::new(out, target_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: u32, n: usize) -> AudioClip {
        let s = (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / rate as f64).sin() * 0.5)
            .collect();
        AudioClip::new(s, rate).unwrap()
    }

    /// Frequency of the largest-magnitude bin of a direct DFT.
    fn dft_peak_hz(samples: &[f64], rate: u32) -> (f64, f64) {
        let n = samples.len();
        let mut best = (0usize, 0.0f64);
        for k in 1..n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &x) in samples.iter().enumerate() {
                let a = -2.0 * PI * (k * i % n) as f64 / n as f64;
                re += x * a.cos();
                im += x * a.sin();
            }
            let mag = re * re + im * im;
            if mag > best.1 {
                best = (k, mag);
            }
        }
        (best.0 as f64 * rate as f64 / n as f64, rate as f64 / n as f64)
    }

    #[test]
    fn identity_rate() {
        let clip = tone(440.0, 16000, 1000);
        assert_eq!(resample(&clip, 16000).unwrap(), clip);
    }

    #[test]
    fn doubling_rate_doubles_length() {
        for n in [1usize, 7, 800, 8001] {
            let clip = tone(440.0, 8000, n);
            let out = resample(&clip, 16000).unwrap();
            assert!((out.len() as i64 - 2 * n as i64).abs() <= 1);
            assert_eq!(out.sample_rate(), 16000);
        }
    }

    #[test]
    fn duration_preserved_for_odd_ratios() {
        for (from, to) in [(44100u32, 16000u32), (22050, 16000), (48000, 16000), (11025, 16000)] {
            let clip = tone(300.0, from, from as usize / 3);
            let out = resample(&clip, to).unwrap();
            assert!((out.duration() - clip.duration()).abs() <= 1.0 / to as f64);
        }
    }

    #[test]
    fn upsampled_sine_keeps_its_peak() {
        let clip = tone(440.0, 8000, 4000);
        let out = resample(&clip, 16000).unwrap();
        let (peak, bin) = dft_peak_hz(&out.samples()[..4000], 16000);
        assert!((peak - 440.0).abs() <= bin, "peak at {peak} Hz");
    }

    #[test]
    fn downsampling_removes_content_above_nyquist() {
        // 7 kHz is above the 4 kHz Nyquist of the target
        let clip = tone(7000.0, 16000, 16000);
        let out = resample(&clip, 8000).unwrap();
        let body = &out.samples()[200..out.len() - 200];
        let rms = (body.iter().map(|x| x * x).sum::<f64>() / body.len() as f64).sqrt();
        assert!(rms < 1e-3, "rms {rms}");
    }

    #[test]
    fn rejects_empty_and_zero_rate() {
        let empty = AudioClip::new(vec![], 8000).unwrap();
        assert_eq!(resample(&empty, 16000), Err(FrontendError::EmptyAudio));
        let clip = tone(1.0, 8000, 10);
        assert_eq!(resample(&clip, 0), Err(FrontendError::InvalidSampleRate));
    }
}
