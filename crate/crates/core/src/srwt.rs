//! Word-level timestamps interleaved with transcription tokens.
//!
//! Each word is emitted as `<|start|> word-tokens <|end|>`. Times live on a
//! 40 ms grid over [0, 30] s, which is 751 time tokens.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{SpecialTag, Vocabulary};
use crate::{TokenId, TokenSequence};

pub const TIME_QUANTUM: f64 = 0.040;
pub const MAX_TIME: f64 = 30.0;
pub const TIME_TOKEN_COUNT: usize = 751;

const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeToken(u16);

impl TimeToken {
    pub fn new(index: u16) -> Option<Self> {
        ((index as usize) < TIME_TOKEN_COUNT).then_some(Self(index))
    }

    pub fn index(self) -> u16 {
        self.0
    }

    pub fn seconds(self) -> f64 {
        self.0 as f64 * TIME_QUANTUM
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedWord {
    #[serde(rename = "w")]
    pub word: String,
    #[serde(rename = "s")]
    pub start: f64,
    #[serde(rename = "e")]
    pub end: f64,
}

impl TimedWord {
    pub fn new(word: impl Into<String>, start: f64, end: f64) -> Self {
        Self {
            word: word.into(),
            start,
            end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimedTranscript {
    pub words: Vec<TimedWord>,
}

impl TimedTranscript {
    pub fn new(words: Vec<TimedWord>) -> Self {
        Self { words }
    }

    pub fn validate(&self) -> Result<(), SrwtError> {
        let mut prev_end = 0.0;
        for (i, w) in self.words.iter().enumerate() {
            if w.word.is_empty() || w.word.chars().any(char::is_whitespace) {
                return Err(SrwtError::InvalidTranscript { word: i, reason: "word must be non-empty without whitespace" });
            }
            if !(w.start.is_finite() && w.end.is_finite()) || w.start < 0.0 || w.end > MAX_TIME {
                return Err(SrwtError::TimeOutOfRange(if w.start < 0.0 || !w.start.is_finite() { w.start } else { w.end }));
            }
            if w.start > w.end {
                return Err(SrwtError::InvalidTranscript { word: i, reason: "start after end" });
            }
            if w.start < prev_end {
                return Err(SrwtError::InvalidTranscript { word: i, reason: "overlaps previous word" });
            }
            prev_end = w.end;
        }
        Ok(())
    }

    pub fn text(&self) -> String {
        self.words.iter().map(|w| w.word.as_str()).collect::<Vec<_>>().join(" ")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, SrwtError> {
        let t: Self = serde_json::from_str(s).map_err(|e| SrwtError::Json(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MalformedReason {
    /// Word tokens appear without an opening time token.
    MissingStartTime,
    /// Input ended inside a word.
    MissingEndTime,
    /// Two time tokens with no word between them.
    EmptyWord,
    DecreasingTime,
    /// A special token that is neither a time token nor end-of-text.
    UnexpectedToken,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SrwtError {
    #[error("time {0} s is outside [0, 30] s")]
    TimeOutOfRange(f64),
    #[error("invalid transcript at word {word}: {reason}")]
    InvalidTranscript { word: usize, reason: &'static str },
    #[error("malformed timestamp sequence at position {position}: {reason:?}")]
    MalformedSrwt { position: usize, reason: MalformedReason },
    #[error("alignment score undefined: no matched words")]
    ScoreUndefined,
    #[error("transcript JSON: {0}")]
    Json(String),
}

/// Nearest grid point; exact midpoints round down.
pub fn quantize_time(t: f64) -> Result<TimeToken, SrwtError> {
    if !t.is_finite() || t < 0.0 || t > MAX_TIME + TIE_TOLERANCE {
        return Err(SrwtError::TimeOutOfRange(t));
    }
    let x = t / TIME_QUANTUM;
    let floor = x.floor();
    let idx = if x - floor > 0.5 + TIE_TOLERANCE { floor + 1.0 } else { floor };
    Ok(TimeToken((idx as usize).min(TIME_TOKEN_COUNT - 1) as u16))
}

pub fn encode_timed(transcript: &TimedTranscript, vocab: &Vocabulary) -> Result<TokenSequence, SrwtError> {
    transcript.validate()?;
    let mut out = Vec::new();
    for w in &transcript.words {
        out.push(vocab.time(quantize_time(w.start)?.index()));
        out.extend(vocab.encode_text(&w.word));
        out.push(vocab.time(quantize_time(w.end)?.index()));
    }
    Ok(TokenSequence(out))
}

/// Inverse of [`encode_timed`]. Decoding stops at `<|endoftext|>`.
pub fn decode_timed(tokens: &[TokenId], vocab: &Vocabulary) -> Result<TimedTranscript, SrwtError> {
    let malformed = |position, reason| SrwtError::MalformedSrwt { position, reason };
    let eot = vocab.special(SpecialTag::EndOfText);
    let mut words = Vec::new();
    let mut prev_end = 0u16;
    let mut i = 0;
    while i < tokens.len() && tokens[i] != eot {
        let start = match vocab.as_time(tokens[i]) {
            Some(s) => s,
            None if vocab.is_text(tokens[i]) => return Err(malformed(i, MalformedReason::MissingStartTime)),
            None => return Err(malformed(i, MalformedReason::UnexpectedToken)),
        };
        if start < prev_end {
            return Err(malformed(i, MalformedReason::DecreasingTime));
        }
        let word_start = i + 1;
        let mut j = word_start;
        while j < tokens.len() && vocab.is_text(tokens[j]) {
            j += 1;
        }
        if j == tokens.len() || tokens[j] == eot {
            return Err(malformed(j, MalformedReason::MissingEndTime));
        }
        let end = match vocab.as_time(tokens[j]) {
            Some(e) => e,
            None => return Err(malformed(j, MalformedReason::UnexpectedToken)),
        };
        if j == word_start {
            return Err(malformed(j, MalformedReason::EmptyWord));
        }
        if end < start {
            return Err(malformed(j, MalformedReason::DecreasingTime));
        }
        let bytes = vocab.decode_bytes(&tokens[word_start..j]).expect("text tokens");
        words.push(TimedWord {
            word: String::from_utf8_lossy(&bytes).into_owned(),
            start: TimeToken(start).seconds(),
            end: TimeToken(end).seconds(),
        });
        prev_end = end;
        i = j + 1;
    }
    Ok(TimedTranscript { words })
}

/// Result of comparing predicted and reference word timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    /// Mean absolute boundary error in milliseconds.
    pub mean_ms: f64,
    /// Aligned word pairs (equal or substituted).
    pub matched: usize,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

/// Mean absolute start/end error over edit-aligned words, insertions and
/// deletions excluded.
pub fn alignment_score(pred: &TimedTranscript, reference: &TimedTranscript) -> Result<AlignmentReport, SrwtError> {
    alignment_score_with_penalty(pred, reference, None)
}

/// Like [`alignment_score`]; with `Some(p)`, each inserted or deleted word adds
/// two boundary errors of `p` ms to the mean.
pub fn alignment_score_with_penalty(
    pred: &TimedTranscript,
    reference: &TimedTranscript,
    penalty_ms: Option<f64>,
) -> Result<AlignmentReport, SrwtError> {
    if pred.words.is_empty() && reference.words.is_empty() {
        return Err(SrwtError::ScoreUndefined);
    }
    let p: Vec<&str> = pred.words.iter().map(|w| w.word.as_str()).collect();
    let r: Vec<&str> = reference.words.iter().map(|w| w.word.as_str()).collect();
    let ops = crate::metrics::align(&p, &r);

    let mut total = 0.0;
    let mut count = 0usize;
    let mut report = AlignmentReport { mean_ms: 0.0, matched: 0, substitutions: 0, insertions: 0, deletions: 0 };
    for op in ops {
        match op {
            crate::metrics::EditOp::Match(i, j) | crate::metrics::EditOp::Substitute(i, j) => {
                if matches!(op, crate::metrics::EditOp::Substitute(..)) {
                    report.substitutions += 1;
                }
                report.matched += 1;
                total += (pred.words[i].start - reference.words[j].start).abs() * 1000.0;
                total += (pred.words[i].end - reference.words[j].end).abs() * 1000.0;
                count += 2;
            }
            crate::metrics::EditOp::Insert(_) => report.insertions += 1,
            crate::metrics::EditOp::Delete(_) => report.deletions += 1,
        }
    }
    if let Some(pen) = penalty_ms {
        let n = report.insertions + report.deletions;
        total += pen * 2.0 * n as f64;
        count += 2 * n;
    }
    if count == 0 {
        return Err(SrwtError::ScoreUndefined);
    }
    report.mean_ms = total / count as f64;
    Ok(report)
}
