use std::io::Cursor;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioClip, FrontendError};

/// Decodes a mono PCM16 little-endian WAV image.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, FrontendError> {
    let reader = WavReader::new(Cursor::new(bytes)).map_err(|e| FrontendError::Wav(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(FrontendError::ChannelCountUnsupported(spec.channels));
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(FrontendError::UnsupportedFormat(format!(
            "{:?} {} bits",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| FrontendError::Wav(e.to_string()))?;
    AudioClip::new(samples, spec.sample_rate)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, FrontendError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| FrontendError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    decode_wav(&bytes)
}

/// Encodes a clip as mono PCM16. Samples are clamped to [-1, 1].
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut writer = WavWriter::new(&mut cursor, spec).expect("in-memory WAV writer");
        for &s in clip.samples() {
            let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            writer.write_sample(v).expect("in-memory write");
        }
        writer.finalize().expect("in-memory finalize");
    }
    cursor.into_inner()
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<(), FrontendError> {
    let path = path.as_ref();
    std::fs::write(path, encode_wav(clip)).map_err(|e| FrontendError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pcm16_round_trip_within_one_lsb() {
        let samples: Vec<f64> = (0..500).map(|i| ((i as f64) * 0.01).sin() * 0.9).collect();
        let clip = AudioClip::new(samples.clone(), 22050).unwrap();
        let back = decode_wav(&encode_wav(&clip)).unwrap();
        assert_eq!(back.sample_rate(), 22050);
        for (a, b) in samples.iter().zip(back.samples()) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn rejects_stereo() {
        let spec = WavSpec {
            channels: 2,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut cursor = Cursor::new(Vec::new());
        {
            let mut w = WavWriter::new(&mut cursor, spec).unwrap();
            for _ in 0..8 {
                w.write_sample(0i16).unwrap();
            }
            w.finalize().unwrap();
        }
        assert_eq!(
            decode_wav(&cursor.into_inner()),
            Err(FrontendError::ChannelCountUnsupported(2))
        );
    }

    #[test]
    fn garbage_is_an_error() {
        assert!(matches!(decode_wav(b"RIFFxxxx"), Err(FrontendError::Wav(_))));
        assert!(decode_wav(&[]).is_err());
    }
}
