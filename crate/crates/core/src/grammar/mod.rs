//! Special-token vocabulary and the hierarchical task header.
//!
//! A header is six ordered slots:
//!
//! ```text
//! <|startoftranscripts|> | <|startofanalysis|>     kind
//! <|en|> ... | <|unknown|>                        audio language
//! <|transcribe|> ... <|question-answer|> question task
//! <|en|> ...                                      output text language
//! <|timestamps|> | <|notimestamps|>
//! instruction text <|endofinstruction|>           only when non-empty
//! ```

mod vocab;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use vocab::{default_vocabulary, SpecialTag, Token, Vocabulary, DEFAULT_LANGUAGES};

use crate::{TokenId, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TranscriptionKind {
    /// Accurate transcription of spoken content (recognition, translation).
    Transcripts,
    Analysis,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskCategory {
    Transcribe,
    Translate,
    Caption,
    Analysis,
    QuestionAnswer(String),
}

impl TaskCategory {
    fn tag(&self) -> SpecialTag {
        match self {
            TaskCategory::Transcribe => SpecialTag::Transcribe,
            TaskCategory::Translate => SpecialTag::Translate,
            TaskCategory::Caption => SpecialTag::Caption,
            TaskCategory::Analysis => SpecialTag::Analysis,
            TaskCategory::QuestionAnswer(_) => SpecialTag::QuestionAnswer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LanguageTag {
    Code(String),
    /// Audio without speech.
    Unknown,
}

impl LanguageTag {
    pub fn code(code: &str) -> Self {
        if code == "unknown" {
            LanguageTag::Unknown
        } else {
            LanguageTag::Code(code.to_string())
        }
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LanguageTag::Code(c) => f.write_str(c),
            LanguageTag::Unknown => f.write_str("unknown"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskHeader {
    pub kind: TranscriptionKind,
    pub audio_language: LanguageTag,
    pub task: TaskCategory,
    pub text_language: LanguageTag,
    pub timestamps: bool,
    pub instruction: String,
}

/// A broken header rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Violation {
    /// `kind = Transcripts` with a task other than transcribe/translate.
    TranscriptsRequireSpeechTask,
    TimestampsRequireTranscribe,
    OutputLanguageUnknown,
    EmptyQuestion,
}

impl Violation {
    pub fn field(self) -> &'static str {
        match self {
            Violation::TranscriptsRequireSpeechTask => "kind",
            Violation::TimestampsRequireTranscribe => "timestamps",
            Violation::OutputLanguageUnknown => "text_language",
            Violation::EmptyQuestion => "task",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rule = match self {
            Violation::TranscriptsRequireSpeechTask => {
                "startoftranscripts only pairs with transcribe or translate"
            }
            Violation::TimestampsRequireTranscribe => "timestamps require the transcribe task",
            Violation::OutputLanguageUnknown => "output text language cannot be unknown",
            Violation::EmptyQuestion => "question-answer needs a non-empty question",
        };
        write!(f, "{}: {}", self.field(), rule)
    }
}

/// Slot the parser was looking for when it failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagClass {
    Kind,
    AudioLanguage,
    Task,
    Question,
    TextLanguage,
    Timestamps,
    EndOfInstruction,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("invalid header: {}", join(.0))]
    InvalidHeader(Vec<Violation>),
    #[error("malformed header at position {position}: expected {expected:?}")]
    MalformedHeader { position: usize, expected: TagClass },
    #[error("language {0:?} is not in the vocabulary")]
    UnknownLanguage(String),
    #[error("duplicate language code {0:?}")]
    DuplicateLanguage(String),
    #[error("invalid language code {0:?}")]
    InvalidLanguageCode(String),
    #[error("at least one language code is required")]
    NoLanguages,
    #[error("text table must hold the 256 byte tokens first (got size {0})")]
    TextTableSize(usize),
    #[error("text token {0} duplicates an earlier entry")]
    DuplicateTextToken(TokenId),
    #[error("text token {0} is not a merge of two earlier tokens")]
    UnreachableTextToken(TokenId),
    #[error("token {0} is not a text token")]
    NotText(TokenId),
    #[error("vocabulary file line {line}: {reason}")]
    VocabFile { line: usize, reason: String },
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Every header rule `header` breaks; empty when it is valid.
pub fn validate(header: &TaskHeader) -> Vec<Violation> {
    let mut out = Vec::new();
    if header.kind == TranscriptionKind::Transcripts
        && !matches!(header.task, TaskCategory::Transcribe | TaskCategory::Translate)
    {
        out.push(Violation::TranscriptsRequireSpeechTask);
    }
    if header.timestamps && header.task != TaskCategory::Transcribe {
        out.push(Violation::TimestampsRequireTranscribe);
    }
    if header.text_language == LanguageTag::Unknown {
        out.push(Violation::OutputLanguageUnknown);
    }
    if let TaskCategory::QuestionAnswer(q) = &header.task {
        if q.is_empty() {
            out.push(Violation::EmptyQuestion);
        }
    }
    out
}

pub fn build_header(header: &TaskHeader, vocab: &Vocabulary) -> Result<TokenSequence, GrammarError> {
    let violations = validate(header);
    if !violations.is_empty() {
        return Err(GrammarError::InvalidHeader(violations));
    }
    let mut out = Vec::new();
    out.push(vocab.special(match header.kind {
        TranscriptionKind::Transcripts => SpecialTag::StartOfTranscripts,
        TranscriptionKind::Analysis => SpecialTag::StartOfAnalysis,
    }));
    out.push(vocab.language(&header.audio_language)?);
    out.push(vocab.special(header.task.tag()));
    if let TaskCategory::QuestionAnswer(q) = &header.task {
        out.extend(vocab.encode_text(q));
    }
    out.push(vocab.language(&header.text_language)?);
    out.push(vocab.special(if header.timestamps {
        SpecialTag::Timestamps
    } else {
        SpecialTag::NoTimestamps
    }));
    if !header.instruction.is_empty() {
        out.extend(vocab.encode_text(&header.instruction));
        out.push(vocab.special(SpecialTag::EndOfInstruction));
    }
    Ok(TokenSequence(out))
}

/// Splits a header off the front of `tokens`, returning it with the rest.
pub fn parse_header(
    tokens: &[TokenId],
    vocab: &Vocabulary,
) -> Result<(TaskHeader, TokenSequence), GrammarError> {
    let malformed = |position, expected| GrammarError::MalformedHeader { position, expected };
    let at = |i: usize| tokens.get(i).copied();

    let kind = match at(0).and_then(|t| vocab.as_special(t)) {
        Some(SpecialTag::StartOfTranscripts) => TranscriptionKind::Transcripts,
        Some(SpecialTag::StartOfAnalysis) => TranscriptionKind::Analysis,
        _ => return Err(malformed(0, TagClass::Kind)),
    };
    let audio_language = at(1)
        .and_then(|t| vocab.as_language(t))
        .ok_or_else(|| malformed(1, TagClass::AudioLanguage))?;
    let mut pos = 3;
    let task = match at(2).and_then(|t| vocab.as_special(t)) {
        Some(SpecialTag::Transcribe) => TaskCategory::Transcribe,
        Some(SpecialTag::Translate) => TaskCategory::Translate,
        Some(SpecialTag::Caption) => TaskCategory::Caption,
        Some(SpecialTag::Analysis) => TaskCategory::Analysis,
        Some(SpecialTag::QuestionAnswer) => {
            let end = pos + tokens[pos..].iter().take_while(|&&t| vocab.is_text(t)).count();
            if end == pos {
                return Err(malformed(pos, TagClass::Question));
            }
            let question = vocab.decode_text(&tokens[pos..end])?;
            pos = end;
            TaskCategory::QuestionAnswer(question)
        }
        _ => return Err(malformed(2, TagClass::Task)),
    };
    let text_language = at(pos)
        .and_then(|t| vocab.as_language(t))
        .ok_or_else(|| malformed(pos, TagClass::TextLanguage))?;
    pos += 1;
    let timestamps = match at(pos).and_then(|t| vocab.as_special(t)) {
        Some(SpecialTag::Timestamps) => true,
        Some(SpecialTag::NoTimestamps) => false,
        _ => return Err(malformed(pos, TagClass::Timestamps)),
    };
    pos += 1;

    // Text followed by <|endofinstruction|> is an instruction; anything else
    // after the timestamp slot already belongs to the body.
    let text_end = pos + tokens[pos..].iter().take_while(|&&t| vocab.is_text(t)).count();
    let mut instruction = String::new();
    if text_end > pos && at(text_end) == Some(vocab.special(SpecialTag::EndOfInstruction)) {
        instruction = vocab.decode_text(&tokens[pos..text_end])?;
        pos = text_end + 1;
    } else if at(pos) == Some(vocab.special(SpecialTag::EndOfInstruction)) {
        return Err(malformed(pos, TagClass::EndOfInstruction));
    }

    let header = TaskHeader {
        kind,
        audio_language,
        task,
        text_language,
        timestamps,
        instruction,
    };
    let violations = validate(&header);
    if !violations.is_empty() {
        return Err(GrammarError::InvalidHeader(violations));
    }
    Ok((header, TokenSequence(tokens[pos..].to_vec())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        default_vocabulary(&DEFAULT_LANGUAGES, 256).unwrap()
    }

    fn en() -> LanguageTag {
        LanguageTag::code("en")
    }

    fn asr(timestamps: bool) -> TaskHeader {
        TaskHeader {
            kind: TranscriptionKind::Transcripts,
            audio_language: en(),
            task: TaskCategory::Transcribe,
            text_language: en(),
            timestamps,
            instruction: String::new(),
        }
    }

    #[test]
    fn srwt_header_tokens() {
        let v = vocab();
        let toks = build_header(&asr(true), &v).unwrap();
        let lits: Vec<String> = toks.iter().map(|&t| v.literal(t)).collect();
        assert_eq!(
            lits,
            [
                "<|startoftranscripts|>",
                "<|en|>",
                "<|transcribe|>",
                "<|en|>",
                "<|timestamps|>"
            ]
        );
    }

    #[test]
    fn caption_header_with_unknown_audio_language() {
        let v = vocab();
        let h = TaskHeader {
            kind: TranscriptionKind::Analysis,
            audio_language: LanguageTag::Unknown,
            task: TaskCategory::Caption,
            text_language: en(),
            timestamps: false,
            instruction: "Describe the audio.".into(),
        };
        let toks = build_header(&h, &v).unwrap();
        let mut expected = vec![
            v.special(SpecialTag::StartOfAnalysis),
            v.language(&LanguageTag::Unknown).unwrap(),
            v.special(SpecialTag::Caption),
            v.language(&en()).unwrap(),
            v.special(SpecialTag::NoTimestamps),
        ];
        expected.extend(v.encode_text("Describe the audio."));
        expected.push(v.special(SpecialTag::EndOfInstruction));
        assert_eq!(toks.0, expected);
    }

    #[test]
    fn transcripts_with_caption_is_invalid() {
        let mut h = asr(false);
        h.task = TaskCategory::Caption;
        assert_eq!(
            build_header(&h, &vocab()),
            Err(GrammarError::InvalidHeader(vec![
                Violation::TranscriptsRequireSpeechTask
            ]))
        );
    }

    #[test]
    fn validate_examples() {
        assert!(validate(&asr(true)).is_empty());
        let mut h = asr(true);
        h.kind = TranscriptionKind::Analysis;
        h.task = TaskCategory::Caption;
        assert_eq!(validate(&h), vec![Violation::TimestampsRequireTranscribe]);
        let mut h = asr(false);
        h.text_language = LanguageTag::Unknown;
        assert_eq!(validate(&h), vec![Violation::OutputLanguageUnknown]);
        assert_eq!(Violation::OutputLanguageUnknown.field(), "text_language");
    }

    #[test]
    fn parse_examples() {
        let v = vocab();
        let toks = build_header(&asr(true), &v).unwrap();
        let (h, rest) = parse_header(&toks, &v).unwrap();
        assert_eq!(h, asr(true));
        assert!(rest.is_empty());

        let missing_kind = [v.language(&en()).unwrap(), v.special(SpecialTag::Transcribe)];
        assert_eq!(
            parse_header(&missing_kind, &v),
            Err(GrammarError::MalformedHeader {
                position: 0,
                expected: TagClass::Kind
            })
        );

        let mut with_body = build_header(&asr(false), &v).unwrap().0;
        let body = v.encode_text("hello");
        with_body.extend(&body);
        let (_, rest) = parse_header(&with_body, &v).unwrap();
        assert_eq!(rest.0, body);
    }

    #[test]
    fn question_answer_round_trip() {
        let v = vocab();
        let h = TaskHeader {
            kind: TranscriptionKind::Analysis,
            audio_language: LanguageTag::Unknown,
            task: TaskCategory::QuestionAnswer("is it a dog?".into()),
            text_language: en(),
            timestamps: false,
            instruction: "answer yes or no".into(),
        };
        let mut toks = build_header(&h, &v).unwrap().0;
        toks.extend(v.encode_text("yes"));
        let (parsed, rest) = parse_header(&toks, &v).unwrap();
        assert_eq!(parsed, h);
        assert_eq!(v.decode_text(&rest).unwrap(), "yes");
    }

    #[test]
    fn headers_differing_in_task_share_other_slots() {
        let v = vocab();
        let a = build_header(&asr(false), &v).unwrap();
        let mut h = asr(false);
        h.task = TaskCategory::Translate;
        let b = build_header(&h, &v).unwrap();
        let diffs: Vec<usize> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
        assert_eq!(diffs, vec![2]);
    }

    #[test]
    fn vocabulary_size_and_languages() {
        let v = vocab();
        // text + fixed tags + languages + unknown + time tokens
        assert_eq!(v.len(), 256 + SpecialTag::ALL.len() + 8 + 1 + 751);
        let one = default_vocabulary(&["en"], 256).unwrap();
        let langs = (0..one.len() as TokenId)
            .filter(|&t| one.as_language(t).is_some())
            .count();
        assert_eq!(langs, 2);
        assert_eq!(
            default_vocabulary(&["en", "en"], 256),
            Err(GrammarError::DuplicateLanguage("en".into()))
        );
    }

    #[test]
    fn vocabulary_file_round_trip() {
        let codes: Vec<String> = DEFAULT_LANGUAGES.iter().map(|s| s.to_string()).collect();
        let table = crate::text::learn_text_tokens(&["alpha <b> \\ x", "alpha beta"], 30, 1);
        let v = Vocabulary::new(&codes, table).unwrap();
        let text = v.to_file_string();
        assert!(text.lines().any(|l| l == "<|startoftranscripts|>"));
        assert!(text.lines().any(|l| l == "<|30.00|>"));
        assert_eq!(text.lines().count(), v.len());
        assert_eq!(Vocabulary::from_file_str(&text).unwrap(), v);
    }

    #[test]
    fn text_encoding_never_yields_specials() {
        let v = vocab();
        let ids = v.encode_text("<|en|> <|endoftext|>");
        assert!(ids.iter().all(|&t| v.is_text(t)));
        assert_eq!(v.decode_text(&ids).unwrap(), "<|en|> <|endoftext|>");
    }
}
