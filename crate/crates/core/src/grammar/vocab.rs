use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{GrammarError, LanguageTag};
use crate::srwt::{TIME_QUANTUM, TIME_TOKEN_COUNT};
use crate::text::merge_pair;
use crate::TokenId;

/// Fixed special tags, in vocabulary order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpecialTag {
    EndOfText,
    StartOfTranscripts,
    StartOfAnalysis,
    Transcribe,
    Translate,
    Caption,
    Analysis,
    QuestionAnswer,
    Timestamps,
    NoTimestamps,
    EndOfInstruction,
    ImStart,
    ImEnd,
    /// Single task-agnostic prefix used when headers are deliberately stripped.
    Shared,
}

impl SpecialTag {
    pub const ALL: [SpecialTag; 14] = [
        SpecialTag::EndOfText,
        SpecialTag::StartOfTranscripts,
        SpecialTag::StartOfAnalysis,
        SpecialTag::Transcribe,
        SpecialTag::Translate,
        SpecialTag::Caption,
        SpecialTag::Analysis,
        SpecialTag::QuestionAnswer,
        SpecialTag::Timestamps,
        SpecialTag::NoTimestamps,
        SpecialTag::EndOfInstruction,
        SpecialTag::ImStart,
        SpecialTag::ImEnd,
        SpecialTag::Shared,
    ];

    pub fn literal(self) -> &'static str {
        match self {
            SpecialTag::EndOfText => "<|endoftext|>",
            SpecialTag::StartOfTranscripts => "<|startoftranscripts|>",
            SpecialTag::StartOfAnalysis => "<|startofanalysis|>",
            SpecialTag::Transcribe => "<|transcribe|>",
            SpecialTag::Translate => "<|translate|>",
            SpecialTag::Caption => "<|caption|>",
            SpecialTag::Analysis => "<|analysis|>",
            SpecialTag::QuestionAnswer => "<|question-answer|>",
            SpecialTag::Timestamps => "<|timestamps|>",
            SpecialTag::NoTimestamps => "<|notimestamps|>",
            SpecialTag::EndOfInstruction => "<|endofinstruction|>",
            SpecialTag::ImStart => "<|im_start|>",
            SpecialTag::ImEnd => "<|im_end|>",
            SpecialTag::Shared => "<|shared|>",
        }
    }
}

/// What a vocabulary index stands for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Text(Vec<u8>),
    Special(SpecialTag),
    Language(LanguageTag),
    /// Index into the 40 ms timestamp grid.
    Time(u16),
}

pub const DEFAULT_LANGUAGES: [&str; 8] = ["zh", "en", "de", "es", "fr", "it", "ja", "ko"];

/// Token table: text subwords, fixed tags, language tags, `<|unknown|>`, then
/// the 751 time tokens. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    text: Vec<Vec<u8>>,
    languages: Vec<String>,
    merges: HashMap<(TokenId, TokenId), TokenId>,
    lookup: HashMap<String, TokenId>,
}

/// Byte-level vocabulary with `text_tokenizer_size` text entries. Only the
/// plain byte table (256) is available without a corpus; use
/// [`Vocabulary::new`] with learned tokens for larger tables.
pub fn default_vocabulary(
    language_codes: &[&str],
    text_tokenizer_size: usize,
) -> Result<Vocabulary, GrammarError> {
    if text_tokenizer_size != 256 {
        return Err(GrammarError::TextTableSize(text_tokenizer_size));
    }
    let codes: Vec<String> = language_codes.iter().map(|s| s.to_string()).collect();
    Vocabulary::new(&codes, (0..=255u8).map(|b| vec![b]).collect())
}

impl Vocabulary {
    /// `text_tokens` must start with the 256 single bytes in order; any further
    /// entries are merged tokens, each the concatenation of two earlier ones.
    pub fn new(language_codes: &[String], text_tokens: Vec<Vec<u8>>) -> Result<Self, GrammarError> {
        if language_codes.is_empty() {
            return Err(GrammarError::NoLanguages);
        }
        let mut seen = std::collections::HashSet::new();
        for code in language_codes {
            if code.is_empty()
                || code == "unknown"
                || !code.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
            {
                return Err(GrammarError::InvalidLanguageCode(code.clone()));
            }
            if !seen.insert(code.as_str()) {
                return Err(GrammarError::DuplicateLanguage(code.clone()));
            }
        }
        if text_tokens.len() < 256 || (0..256).any(|b| text_tokens[b] != [b as u8]) {
            return Err(GrammarError::TextTableSize(text_tokens.len()));
        }

        let mut by_bytes: HashMap<&[u8], TokenId> = HashMap::new();
        let mut merges = HashMap::new();
        for (id, tok) in text_tokens.iter().enumerate() {
            let id = id as TokenId;
            if by_bytes.insert(tok.as_slice(), id).is_some() {
                return Err(GrammarError::DuplicateTextToken(id));
            }
            if id < 256 {
                continue;
            }
            // canonical pair: shortest left part where both halves are earlier tokens
            let pair = (1..tok.len()).find_map(|split| {
                let l = by_bytes.get(&tok[..split]).copied()?;
                let r = by_bytes.get(&tok[split..]).copied()?;
                (l < id && r < id).then_some((l, r))
            });
            match pair {
                Some(p) => {
                    merges.entry(p).or_insert(id);
                }
                None => return Err(GrammarError::UnreachableTextToken(id)),
            }
        }

        let mut vocab = Self {
            text: text_tokens,
            languages: language_codes.to_vec(),
            merges,
            lookup: HashMap::new(),
        };
        let mut lookup = HashMap::new();
        for id in vocab.text.len() as TokenId..vocab.len() as TokenId {
            lookup.insert(vocab.literal(id), id);
        }
        vocab.lookup = lookup;
        Ok(vocab)
    }

    pub fn len(&self) -> usize {
        self.text.len() + SpecialTag::ALL.len() + self.languages.len() + 1 + TIME_TOKEN_COUNT
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn text_len(&self) -> usize {
        self.text.len()
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    fn special_base(&self) -> usize {
        self.text.len()
    }

    fn language_base(&self) -> usize {
        self.special_base() + SpecialTag::ALL.len()
    }

    fn unknown_id(&self) -> TokenId {
        (self.language_base() + self.languages.len()) as TokenId
    }

    fn time_base(&self) -> usize {
        self.unknown_id() as usize + 1
    }

    pub fn special(&self, tag: SpecialTag) -> TokenId {
        let pos = SpecialTag::ALL.iter().position(|&t| t == tag).unwrap();
        (self.special_base() + pos) as TokenId
    }

    pub fn language(&self, tag: &LanguageTag) -> Result<TokenId, GrammarError> {
        match tag {
            LanguageTag::Unknown => Ok(self.unknown_id()),
            LanguageTag::Code(code) => self
                .languages
                .iter()
                .position(|c| c == code)
                .map(|p| (self.language_base() + p) as TokenId)
                .ok_or_else(|| GrammarError::UnknownLanguage(code.clone())),
        }
    }

    pub fn time(&self, index: u16) -> TokenId {
        assert!((index as usize) < TIME_TOKEN_COUNT, "time index {index} out of range");
        (self.time_base() + index as usize) as TokenId
    }

    pub fn token(&self, id: TokenId) -> Option<Token> {
        let i = id as usize;
        if i < self.text.len() {
            Some(Token::Text(self.text[i].clone()))
        } else if i < self.language_base() {
            Some(Token::Special(SpecialTag::ALL[i - self.special_base()]))
        } else if i < self.unknown_id() as usize {
            Some(Token::Language(LanguageTag::Code(
                self.languages[i - self.language_base()].clone(),
            )))
        } else if i == self.unknown_id() as usize {
            Some(Token::Language(LanguageTag::Unknown))
        } else if i < self.len() {
            Some(Token::Time((i - self.time_base()) as u16))
        } else {
            None
        }
    }

    pub fn is_text(&self, id: TokenId) -> bool {
        (id as usize) < self.text.len()
    }

    pub fn is_special_tag(&self, id: TokenId, tag: SpecialTag) -> bool {
        id == self.special(tag)
    }

    pub fn as_special(&self, id: TokenId) -> Option<SpecialTag> {
        let i = id as usize;
        (i >= self.special_base() && i < self.language_base())
            .then(|| SpecialTag::ALL[i - self.special_base()])
    }

    pub fn as_language(&self, id: TokenId) -> Option<LanguageTag> {
        match self.token(id)? {
            Token::Language(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_time(&self, id: TokenId) -> Option<u16> {
        let i = id as usize;
        (i >= self.time_base() && i < self.len()).then(|| (i - self.time_base()) as u16)
    }

    /// Looks up a special, language or time token by its literal, e.g. `<|en|>`.
    pub fn id_of_literal(&self, literal: &str) -> Option<TokenId> {
        self.lookup.get(literal).copied()
    }

    /// Byte-pair encodes `text`. Never yields a non-text token.
    pub fn encode_text(&self, text: &str) -> Vec<TokenId> {
        let mut seq: Vec<TokenId> = text.bytes().map(TokenId::from).collect();
        loop {
            let best = seq
                .windows(2)
                .filter_map(|w| self.merges.get(&(w[0], w[1])).map(|&m| (m, w[0], w[1])))
                .min();
            match best {
                Some((merged, l, r)) => seq = merge_pair(&seq, l, r, merged),
                None => return seq,
            }
        }
    }

    /// Concatenated bytes of text tokens; fails on any non-text id.
    pub fn decode_bytes(&self, ids: &[TokenId]) -> Result<Vec<u8>, GrammarError> {
        let mut out = Vec::new();
        for &id in ids {
            match self.text.get(id as usize) {
                Some(bytes) => out.extend_from_slice(bytes),
                None => return Err(GrammarError::NotText(id)),
            }
        }
        Ok(out)
    }

    /// Lossy UTF-8 decode of text tokens.
    pub fn decode_text(&self, ids: &[TokenId]) -> Result<String, GrammarError> {
        Ok(String::from_utf8_lossy(&self.decode_bytes(ids)?).into_owned())
    }

    /// Human-readable rendering of any token sequence; non-text tokens appear
    /// as their literals.
    pub fn render(&self, ids: &[TokenId]) -> String {
        let mut out = String::new();
        let mut pending = Vec::new();
        for &id in ids {
            if self.is_text(id) {
                pending.extend_from_slice(&self.text[id as usize]);
            } else {
                out.push_str(&String::from_utf8_lossy(&pending));
                pending.clear();
                out.push_str(&self.literal(id));
            }
        }
        out.push_str(&String::from_utf8_lossy(&pending));
        out
    }

    /// File form of one token: specials literally, text bytes escaped.
    pub fn literal(&self, id: TokenId) -> String {
        match self.token(id) {
            Some(Token::Text(bytes)) => escape_bytes(&bytes),
            Some(Token::Special(tag)) => tag.literal().to_string(),
            Some(Token::Language(LanguageTag::Code(c))) => format!("<|{c}|>"),
            Some(Token::Language(LanguageTag::Unknown)) => "<|unknown|>".to_string(),
            Some(Token::Time(i)) => format!("<|{:.2}|>", i as f64 * TIME_QUANTUM),
            None => format!("<|invalid:{id}|>"),
        }
    }

    /// One token per line; the line number is the index.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for id in 0..self.len() as TokenId {
            let _ = writeln!(out, "{}", self.literal(id));
        }
        out
    }

    pub fn from_file_str(content: &str) -> Result<Self, GrammarError> {
        let lines: Vec<&str> = content.lines().collect();
        let mut text = Vec::new();
        let mut i = 0;
        while i < lines.len() && !lines[i].starts_with("<|") {
            text.push(unescape_bytes(lines[i]).map_err(|reason| GrammarError::VocabFile {
                line: i + 1,
                reason,
            })?);
            i += 1;
        }
        let first_tag = i;
        i += SpecialTag::ALL.len();
        let mut codes = Vec::new();
        while i < lines.len() && lines[i] != "<|unknown|>" {
            let code = lines[i]
                .strip_prefix("<|")
                .and_then(|s| s.strip_suffix("|>"))
                .ok_or_else(|| GrammarError::VocabFile {
                    line: i + 1,
                    reason: "expected a language tag".into(),
                })?;
            codes.push(code.to_string());
            i += 1;
        }
        let vocab = Vocabulary::new(&codes, text).map_err(|e| GrammarError::VocabFile {
            line: first_tag + 1,
            reason: e.to_string(),
        })?;
        if lines.len() != vocab.len() {
            return Err(GrammarError::VocabFile {
                line: lines.len().min(vocab.len()) + 1,
                reason: format!("expected {} lines, found {}", vocab.len(), lines.len()),
            });
        }
        for (n, line) in lines.iter().enumerate().skip(first_tag) {
            if *line != vocab.literal(n as TokenId) {
                return Err(GrammarError::VocabFile {
                    line: n + 1,
                    reason: format!("expected {:?}, found {:?}", vocab.literal(n as TokenId), line),
                });
            }
        }
        Ok(vocab)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_file_string())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, GrammarError> {
        let path = path.as_ref();
        let content = std::fs::read_to_string(path).map_err(|e| GrammarError::VocabFile {
            line: 0,
            reason: format!("{}: {e}", path.display()),
        })?;
        Self::from_file_str(&content)
    }
}

fn escape_bytes(bytes: &[u8]) -> String {
    let mut out = String::new();
    for &b in bytes {
        match b {
            b'\\' => out.push_str("\\\\"),
            0x21..=0x7e if b != b'<' => out.push(b as char),
            _ => {
                let _ = write!(out, "\\x{b:02x}");
            }
        }
    }
    out
}

fn unescape_bytes(line: &str) -> Result<Vec<u8>, String> {
    let bytes = line.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\\' {
            match bytes.get(i + 1) {
                Some(b'\\') => {
                    out.push(b'\\');
                    i += 2;
                }
                Some(b'x') => {
                    let hex = line.get(i + 2..i + 4).ok_or("truncated escape")?;
                    out.push(u8::from_str_radix(hex, 16).map_err(|_| "bad hex escape")?);
                    i += 4;
                }
                _ => return Err("bad escape".into()),
            }
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    if out.is_empty() {
        return Err("empty text token".into());
    }
    Ok(out)
}
