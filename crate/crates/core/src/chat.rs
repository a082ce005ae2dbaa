//! ChatML dialogues with numbered audio references.
//!
//! A rendered turn looks like
//!
//! ```text
//! <|im_start|>user
//! Audio 1: <audio>clips/a.wav</audio>what does the speaker say?<|im_end|>
//! ```
//!
//! Turns are joined by a single newline. Only assistant content and the
//! assistant's closing `<|im_end|>` carry loss.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{self, FrontendError, MelExtractor, MelSpectrogram};
use crate::grammar::{SpecialTag, Vocabulary};
use crate::{TokenId, TokenSequence};

const AUDIO_OPEN: &str = "<audio>";
const AUDIO_CLOSE: &str = "</audio>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

impl Role {
    fn as_str(self) -> &'static str {
        match self {
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    Text(String),
    Audio(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    pub segments: Vec<Segment>,
}

impl ChatTurn {
    pub fn user(segments: Vec<Segment>) -> Self {
        Self { role: Role::User, segments }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            segments: vec![Segment::Text(text.into())],
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChatError {
    #[error("invalid dialogue at turn {turn}: {reason}")]
    InvalidDialogue { turn: usize, reason: &'static str },
    #[error("malformed dialogue at token {position}: {reason}")]
    MalformedDialogue { position: usize, reason: &'static str },
    #[error("audio {id} not found: {path}")]
    AudioNotFound { id: usize, path: String },
    #[error("audio {id}: {source}")]
    Audio { id: usize, source: FrontendError },
    #[error("dialogue JSON: {0}")]
    Json(String),
}

/// Ordered turns plus the id assigned to every audio reference (1-based,
/// first-appearance order; repeated paths get fresh ids).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Dialogue {
    pub turns: Vec<ChatTurn>,
    #[serde(skip)]
    audio_index: Vec<String>,
}

impl Dialogue {
    /// Validates the turns and normalizes segments: empty text segments are
    /// dropped and adjacent text segments merged.
    pub fn new(turns: Vec<ChatTurn>) -> Result<Self, ChatError> {
        let mut normalized = Vec::with_capacity(turns.len());
        let mut audio_index = Vec::new();
        for (i, turn) in turns.into_iter().enumerate() {
            let expected = if i % 2 == 0 { Role::User } else { Role::Assistant };
            if turn.role != expected {
                return Err(ChatError::InvalidDialogue { turn: i, reason: "roles must alternate starting with user" });
            }
            let mut segments: Vec<Segment> = Vec::new();
            for seg in turn.segments {
                match seg {
                    Segment::Text(t) => {
                        if t.contains(AUDIO_OPEN) || t.contains(AUDIO_CLOSE) {
                            return Err(ChatError::InvalidDialogue { turn: i, reason: "text may not contain audio markup" });
                        }
                        if t.is_empty() {
                            continue;
                        }
                        if let Some(Segment::Text(prev)) = segments.last_mut() {
                            prev.push_str(&t);
                        } else {
                            segments.push(Segment::Text(t));
                        }
                    }
                    Segment::Audio(path) => {
                        if turn.role != Role::User {
                            return Err(ChatError::InvalidDialogue { turn: i, reason: "audio only allowed in user turns" });
                        }
                        if path.is_empty() || path.contains(AUDIO_CLOSE) || path.contains(AUDIO_OPEN) {
                            return Err(ChatError::InvalidDialogue { turn: i, reason: "invalid audio path" });
                        }
                        audio_index.push(path.clone());
                        segments.push(Segment::Audio(path));
                    }
                }
            }
            normalized.push(ChatTurn { role: turn.role, segments });
        }
        Ok(Self { turns: normalized, audio_index })
    }

    /// `(id, path)` for every audio reference.
    pub fn audio_refs(&self) -> impl Iterator<Item = (usize, &str)> {
        self.audio_index.iter().enumerate().map(|(i, p)| (i + 1, p.as_str()))
    }

    pub fn from_json(s: &str) -> Result<Self, ChatError> {
        let raw: Dialogue = serde_json::from_str(s).map_err(|e| ChatError::Json(e.to_string()))?;
        Dialogue::new(raw.turns)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dialogue serializes")
    }
}

fn render_content(segments: &[Segment], next_id: &mut usize) -> String {
    let mut out = String::new();
    for seg in segments {
        match seg {
            Segment::Text(t) => out.push_str(t),
            Segment::Audio(p) => {
                out.push_str(&format!("Audio {next_id}: {AUDIO_OPEN}{p}{AUDIO_CLOSE}"));
                *next_id += 1;
            }
        }
    }
    out
}

/// Plain-text form of the dialogue, with `<|im_start|>`/`<|im_end|>` literals.
pub fn render_text(dialogue: &Dialogue) -> String {
    let mut next_id = 1;
    dialogue
        .turns
        .iter()
        .map(|t| {
            format!(
                "{}{}\n{}{}",
                SpecialTag::ImStart.literal(),
                t.role.as_str(),
                render_content(&t.segments, &mut next_id),
                SpecialTag::ImEnd.literal()
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Token stream and loss mask for a dialogue.
pub fn render(dialogue: &Dialogue, vocab: &Vocabulary) -> (TokenSequence, Vec<bool>) {
    let mut tokens = Vec::new();
    let mut mask = Vec::new();
    let mut push = |ids: Vec<TokenId>, on: bool, tokens: &mut Vec<TokenId>| {
        mask.extend(std::iter::repeat_n(on, ids.len()));
        tokens.extend(ids);
    };
    let mut next_id = 1;
    for (i, turn) in dialogue.turns.iter().enumerate() {
        if i > 0 {
            push(vocab.encode_text("\n"), false, &mut tokens);
        }
        let learn = turn.role == Role::Assistant;
        push(vec![vocab.special(SpecialTag::ImStart)], false, &mut tokens);
        push(vocab.encode_text(&format!("{}\n", turn.role.as_str())), false, &mut tokens);
        push(vocab.encode_text(&render_content(&turn.segments, &mut next_id)), learn, &mut tokens);
        push(vec![vocab.special(SpecialTag::ImEnd)], learn, &mut tokens);
    }
    (TokenSequence(tokens), mask)
}

fn parse_content(text: &str, next_id: &mut usize, position: usize) -> Result<Vec<Segment>, ChatError> {
    let bad = |reason| ChatError::MalformedDialogue { position, reason };
    let mut segments = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find(AUDIO_OPEN) {
        let label = format!("Audio {next_id}: ");
        let before = rest[..open].strip_suffix(label.as_str()).ok_or(bad("audio reference without its id label"))?;
        if !before.is_empty() {
            segments.push(Segment::Text(before.to_string()));
        }
        let after = &rest[open + AUDIO_OPEN.len()..];
        let close = after.find(AUDIO_CLOSE).ok_or(bad("unterminated audio tag"))?;
        segments.push(Segment::Audio(after[..close].to_string()));
        *next_id += 1;
        rest = &after[close + AUDIO_CLOSE.len()..];
    }
    if rest.contains(AUDIO_CLOSE) {
        return Err(bad("stray audio closing tag"));
    }
    if !rest.is_empty() {
        segments.push(Segment::Text(rest.to_string()));
    }
    Ok(segments)
}

/// Inverse of [`render`].
pub fn parse(tokens: &[TokenId], vocab: &Vocabulary) -> Result<Dialogue, ChatError> {
    let start = vocab.special(SpecialTag::ImStart);
    let end = vocab.special(SpecialTag::ImEnd);
    let bad = |position, reason| ChatError::MalformedDialogue { position, reason };
    let mut turns = Vec::new();
    let mut next_id = 1;
    let mut i = 0;
    while i < tokens.len() {
        let t = tokens[i];
        if vocab.is_text(t) {
            let j = i + tokens[i..].iter().take_while(|&&x| vocab.is_text(x)).count();
            let gap = vocab.decode_text(&tokens[i..j]).expect("text tokens");
            if !gap.trim().is_empty() {
                return Err(bad(i, "text outside a turn"));
            }
            i = j;
            continue;
        }
        if t == end {
            return Err(bad(i, "im_end without im_start"));
        }
        if t != start {
            return Err(bad(i, "unexpected special token"));
        }
        let body_start = i + 1;
        let mut j = body_start;
        while j < tokens.len() && vocab.is_text(tokens[j]) {
            j += 1;
        }
        match tokens.get(j) {
            None => return Err(bad(i, "unterminated turn")),
            Some(&x) if x == end => {}
            Some(&x) if x == start => return Err(bad(j, "nested im_start")),
            Some(_) => return Err(bad(j, "unexpected special token")),
        }
        let body = String::from_utf8(vocab.decode_bytes(&tokens[body_start..j]).expect("text tokens"))
            .map_err(|_| bad(body_start, "turn is not valid UTF-8"))?;
        let (role, content) = body.split_once('\n').ok_or(bad(body_start, "missing role line"))?;
        let role = match role {
            "user" => Role::User,
            "assistant" => Role::Assistant,
            _ => return Err(bad(body_start, "unknown role")),
        };
        let segments = parse_content(content, &mut next_id, body_start)?;
        turns.push(ChatTurn { role, segments });
        i = j + 1;
    }
    Dialogue::new(turns)
}

/// Log-mel features for every audio reference, in id order. Relative paths
/// resolve against `base_dir`; clips at other rates are resampled to 16 kHz.
pub fn attach_audio(
    dialogue: &Dialogue,
    base_dir: &Path,
    extractor: &MelExtractor,
) -> Result<Vec<(usize, MelSpectrogram)>, ChatError> {
    dialogue
        .audio_refs()
        .map(|(id, path)| {
            let full = base_dir.join(path);
            if !full.is_file() {
                return Err(ChatError::AudioNotFound { id, path: path.to_string() });
            }
            let load = || -> Result<MelSpectrogram, FrontendError> {
                let clip = frontend::read_wav(&full)?;
                let clip = frontend::resample(&clip, frontend::SAMPLE_RATE)?;
                extractor.log_mel(&clip)
            };
            load().map(|m| (id, m)).map_err(|source| ChatError::Audio { id, source })
        })
        .collect()
}

/// Encoder input for a multi-audio turn: features joined on the time axis with
/// one zero frame between clips.
pub fn conditioning_features(features: &[(usize, MelSpectrogram)]) -> Option<MelSpectrogram> {
    if features.is_empty() {
        return None;
    }
    let mels: Vec<MelSpectrogram> = features.iter().map(|(_, m)| m.clone()).collect();
    Some(MelSpectrogram::concat_with_gap(&mels, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{default_vocabulary, DEFAULT_LANGUAGES};

    fn vocab() -> Vocabulary {
        default_vocabulary(&DEFAULT_LANGUAGES, 256).unwrap()
    }

    fn emotion_dialogue() -> Dialogue {
        Dialogue::new(vec![
            ChatTurn::user(vec![
                Segment::Audio("emov-db/141-168-0155.wav".into()),
                Segment::Text("what does the speaker say?".into()),
            ]),
            ChatTurn::assistant("The speaker says in English, \"Won't you draw up, gentlemen.\"."),
            ChatTurn::user(vec![Segment::Text("What's the mood of the person?".into())]),
            ChatTurn::assistant("Based on the voice, the mood of the person is disgusted."),
        ])
        .unwrap()
    }

    #[test]
    fn emotion_example_text() {
        let v = vocab();
        let d = emotion_dialogue();
        let (tokens, _) = render(&d, &v);
        let expected = "<|im_start|>user\nAudio 1: <audio>emov-db/141-168-0155.wav</audio>what does the speaker say?<|im_end|>\n\
<|im_start|>assistant\nThe speaker says in English, \"Won't you draw up, gentlemen.\".<|im_end|>\n\
<|im_start|>user\nWhat's the mood of the person?<|im_end|>\n\
<|im_start|>assistant\nBased on the voice, the mood of the person is disgusted.<|im_end|>";
        assert_eq!(v.render(&tokens), expected);
        assert_eq!(render_text(&d), expected);
        assert_eq!(parse(&tokens, &v).unwrap(), d);
    }

    #[test]
    fn empty_assistant_masks_only_im_end() {
        let v = vocab();
        let d = Dialogue::new(vec![
            ChatTurn::user(vec![Segment::Text("hi".into())]),
            ChatTurn::assistant(""),
        ])
        .unwrap();
        let (tokens, mask) = render(&d, &v);
        let on: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        assert_eq!(on, vec![tokens.len() - 1]);
        assert_eq!(*tokens.last().unwrap(), v.special(SpecialTag::ImEnd));
    }

    #[test]
    fn two_audios_numbered_in_order() {
        let d = Dialogue::new(vec![ChatTurn::user(vec![
            Segment::Audio("a.wav".into()),
            Segment::Audio("a.wav".into()),
            Segment::Text("compare them".into()),
        ])])
        .unwrap();
        let refs: Vec<(usize, &str)> = d.audio_refs().collect();
        assert_eq!(refs, vec![(1, "a.wav"), (2, "a.wav")]);
        assert!(render_text(&d).contains("Audio 1: <audio>a.wav</audio>Audio 2: <audio>a.wav</audio>"));
    }

    #[test]
    fn parse_errors_and_empty() {
        let v = vocab();
        assert_eq!(parse(&[], &v).unwrap(), Dialogue::default());
        let stray = [v.special(SpecialTag::ImEnd)];
        assert!(matches!(parse(&stray, &v), Err(ChatError::MalformedDialogue { position: 0, .. })));
        let mut open = vec![v.special(SpecialTag::ImStart)];
        open.extend(v.encode_text("user\nhi"));
        assert!(matches!(parse(&open, &v), Err(ChatError::MalformedDialogue { .. })));
    }

    #[test]
    fn invalid_dialogues() {
        assert!(matches!(
            Dialogue::new(vec![ChatTurn::assistant("hi")]),
            Err(ChatError::InvalidDialogue { turn: 0, .. })
        ));
        let audio_in_assistant = ChatTurn { role: Role::Assistant, segments: vec![Segment::Audio("x.wav".into())] };
        assert!(Dialogue::new(vec![ChatTurn::user(vec![]), audio_in_assistant]).is_err());
    }

    #[test]
    fn attach_audio_cases() {
        let dir = tempfile::tempdir().unwrap();
        let ex = MelExtractor::default();
        let none = Dialogue::new(vec![ChatTurn::user(vec![Segment::Text("hi".into())])]).unwrap();
        assert!(attach_audio(&none, dir.path(), &ex).unwrap().is_empty());

        let clip = crate::frontend::AudioClip::new(vec![0.1; 8000], 8000).unwrap();
        crate::frontend::write_wav(dir.path().join("a.wav"), &clip).unwrap();
        let twice = Dialogue::new(vec![ChatTurn::user(vec![Segment::Audio("a.wav".into()), Segment::Audio("a.wav".into())])]).unwrap();
        let feats = attach_audio(&twice, dir.path(), &ex).unwrap();
        assert_eq!(feats.iter().map(|f| f.0).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(feats[0].1.n_frames(), 98);
        let joined = conditioning_features(&feats).unwrap();
        assert_eq!(joined.n_frames(), 98 * 2 + 1);

        let missing = Dialogue::new(vec![ChatTurn::user(vec![Segment::Audio("nope.wav".into())])]).unwrap();
        assert_eq!(
            attach_audio(&missing, dir.path(), &ex),
            Err(ChatError::AudioNotFound { id: 1, path: "nope.wav".into() })
        );
    }

    #[test]
    fn json_round_trip() {
        let d = emotion_dialogue();
        let back = Dialogue::from_json(&d.to_json()).unwrap();
        assert_eq!(back, d);
        assert!(d.to_json().contains("\"audio\": \"emov-db/141-168-0155.wav\""));
    }
}
