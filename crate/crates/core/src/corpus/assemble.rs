use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::ManifestRecord;
use super::tasks::TaskCode;
use super::CorpusError;
use crate::frontend::{read_wav, resample, MelExtractor, MelSpectrogram, SAMPLE_RATE};
use crate::grammar::{build_header, SpecialTag, Vocabulary};
use crate::srwt::{encode_timed, MAX_TIME};
use crate::TokenSequence;

/// One supervised sequence: features, target tokens, and which positions count
/// toward the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub features: MelSpectrogram,
    pub tokens: TokenSequence,
    pub loss_mask: Vec<bool>,
}

/// Header layout used when assembling targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderFormat {
    /// The full hierarchical header derived from the task code.
    #[default]
    Full,
    /// A single `<|shared|>` tag in place of every header, which removes all
    /// task conditioning.
    Shared,
}

/// Header tokens for `record` in the given format.
pub fn header_tokens(record: &ManifestRecord, vocab: &Vocabulary, format: HeaderFormat) -> Result<TokenSequence, CorpusError> {
    match format {
        HeaderFormat::Full => {
            let header = record
                .task_type
                .header(&record.audio_language, &record.text_language, record.question.as_deref());
            Ok(build_header(&header, vocab)?)
        }
        HeaderFormat::Shared => Ok(TokenSequence(vec![vocab.special(SpecialTag::Shared)])),
    }
}

/// Body tokens (everything between the header and end-of-text).
pub fn body_tokens(record: &ManifestRecord, vocab: &Vocabulary) -> Result<TokenSequence, CorpusError> {
    match (&record.timed_target, record.task_type) {
        (Some(timed), TaskCode::SRWT) => Ok(encode_timed(timed, vocab)?),
        _ => Ok(TokenSequence(vocab.encode_text(&record.target))),
    }
}

/// `header ++ body ++ <|endoftext|>` and its loss mask, false only at position 0.
pub fn target_tokens(
    record: &ManifestRecord,
    vocab: &Vocabulary,
    format: HeaderFormat,
) -> Result<(TokenSequence, Vec<bool>), CorpusError> {
    record.check().map_err(CorpusError::InvalidRecord)?;
    let mut tokens = header_tokens(record, vocab, format)?;
    tokens.extend(body_tokens(record, vocab)?.iter());
    tokens.push(vocab.special(SpecialTag::EndOfText));
    let mut mask = vec![true; tokens.len()];
    mask[0] = false;
    Ok((tokens, mask))
}

/// Combines precomputed features with the record's targets.
pub fn assemble_with_features(
    record: &ManifestRecord,
    features: MelSpectrogram,
    vocab: &Vocabulary,
    format: HeaderFormat,
) -> Result<TrainingExample, CorpusError> {
    let (tokens, loss_mask) = target_tokens(record, vocab, format)?;
    Ok(TrainingExample {
        features,
        tokens,
        loss_mask,
    })
}

/// Loads, resamples, and featurizes a record's audio.
pub fn load_features(record: &ManifestRecord, base_dir: &Path, extractor: &MelExtractor) -> Result<MelSpectrogram, CorpusError> {
    let clip = read_wav(base_dir.join(&record.audio_path))?;
    if clip.duration() > MAX_TIME {
        return Err(CorpusError::ClipTooLong {
            path: record.audio_path.clone(),
            seconds: clip.duration(),
        });
    }
    let clip = if clip.sample_rate() == SAMPLE_RATE {
        clip
    } else {
        resample(&clip, SAMPLE_RATE)?
    };
    Ok(extractor.log_mel(&clip)?)
}

/// Full assembly with the default header format.
pub fn assemble(
    record: &ManifestRecord,
    vocab: &Vocabulary,
    base_dir: &Path,
    extractor: &MelExtractor,
) -> Result<TrainingExample, CorpusError> {
    let features = load_features(record, base_dir, extractor)?;
    assemble_with_features(record, features, vocab, HeaderFormat::Full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{write_wav, AudioClip};
    use crate::grammar::{default_vocabulary, LanguageTag, TaskCategory, TaskHeader, TranscriptionKind, DEFAULT_LANGUAGES};
    use crate::srwt::{TimedTranscript, TimedWord};

    fn vocab() -> Vocabulary {
        default_vocabulary(&DEFAULT_LANGUAGES, 256).unwrap()
    }

    fn record(task: TaskCode, target: &str) -> ManifestRecord {
        ManifestRecord {
            audio_path: "a.wav".into(),
            task_type: task,
            audio_language: "en".into(),
            text_language: "en".into(),
            target: target.into(),
            timed_target: None,
            question: None,
        }
    }

    #[test]
    fn asr_record_layout() {
        let v = vocab();
        let (tokens, mask) = target_tokens(&record(TaskCode::ASR, "hello world"), &v, HeaderFormat::Full).unwrap();
        let header = TaskHeader {
            kind: TranscriptionKind::Transcripts,
            audio_language: LanguageTag::code("en"),
            task: TaskCategory::Transcribe,
            text_language: LanguageTag::code("en"),
            timestamps: false,
            instruction: String::new(),
        };
        let mut expected = build_header(&header, &v).unwrap().into_inner();
        expected.extend(v.encode_text("hello world"));
        expected.push(v.special(SpecialTag::EndOfText));
        assert_eq!(tokens.0, expected);
        assert!(!mask[0]);
        assert!(mask[1..].iter().all(|&m| m));
        assert_eq!(mask.len(), tokens.len());
    }

    #[test]
    fn audio_without_speech_uses_unknown_tag() {
        let v = vocab();
        let mut r = record(TaskCode::AAC, "a dog barks");
        r.audio_language = "unknown".into();
        let (tokens, _) = target_tokens(&r, &v, HeaderFormat::Full).unwrap();
        assert_eq!(tokens[1], v.language(&LanguageTag::Unknown).unwrap());
    }

    #[test]
    fn srwt_body_length() {
        let v = vocab();
        let mut r = record(TaskCode::SRWT, "ab cde");
        r.timed_target = Some(TimedTranscript::new(vec![TimedWord::new("ab", 0.0, 0.12), TimedWord::new("cde", 0.16, 0.28)]));
        let body = body_tokens(&r, &v).unwrap();
        assert_eq!(body.len(), 5 + 4);
    }

    #[test]
    fn shared_format_replaces_header_with_one_tag() {
        let v = vocab();
        let (tokens, mask) = target_tokens(&record(TaskCode::MNA, "3 4"), &v, HeaderFormat::Shared).unwrap();
        assert_eq!(tokens[0], v.special(SpecialTag::Shared));
        assert_eq!(tokens.len(), 1 + 3 + 1);
        assert!(!mask[0]);
    }

    #[test]
    fn assembly_is_deterministic_and_rejects_long_clips() {
        let dir = tempfile::tempdir().unwrap();
        let v = vocab();
        let ex = MelExtractor::default();
        let clip = AudioClip::new((0..8000).map(|i| (i as f64 * 0.05).sin() * 0.3).collect(), SAMPLE_RATE).unwrap();
        write_wav(dir.path().join("a.wav"), &clip).unwrap();
        let r = record(TaskCode::ASR, "hi");
        let a = assemble(&r, &v, dir.path(), &ex).unwrap();
        let b = assemble(&r, &v, dir.path(), &ex).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.features.n_frames(), 48);

        let long = AudioClip::new(vec![0.0; 16000 * 31], SAMPLE_RATE).unwrap();
        write_wav(dir.path().join("a.wav"), &long).unwrap();
        assert!(matches!(assemble(&r, &v, dir.path(), &ex), Err(CorpusError::ClipTooLong { .. })));
    }
}
