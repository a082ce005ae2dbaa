//! Word splitting shared by the timestamp codec and the metrics, and the
//! byte-pair merge learner behind the desk-scale text tokenizer.

use std::collections::HashMap;

/// True for characters written without spaces between words (CJK ideographs,
/// kana, hangul, fullwidth forms). Each such character counts as one word.
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF      // hiragana, katakana
        | 0x3400..=0x4DBF    // CJK extension A
        | 0x4E00..=0x9FFF    // CJK unified ideographs
        | 0xAC00..=0xD7AF    // hangul syllables
        | 0xF900..=0xFAFF    // compatibility ideographs
        | 0xFF00..=0xFFEF    // fullwidth forms
        | 0x20000..=0x2FA1F)
}

/// Splits text into words: whitespace-delimited runs, with every CJK
/// character standing alone.
pub fn split_words(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_whitespace() {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
        } else if is_cjk(c) {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            words.push(c.to_string());
        } else {
            current.push(c);
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

/// Learns up to `max_merges` byte-pair merges from `corpus`.
///
/// Returns the full text-token table: the 256 single bytes followed by the
/// merged tokens in the order they were learned. Text is split before every
/// space so merges never cross a word boundary; a merge needs at least
/// `min_count` occurrences. Ties break on the lexicographically smallest pair
/// so the table is stable across runs.
pub fn learn_text_tokens<S: AsRef<str>>(
    corpus: &[S],
    max_merges: usize,
    min_count: usize,
) -> Vec<Vec<u8>> {
    let mut tokens: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();

    // chunk -> frequency, chunks held as token-id sequences
    let mut chunks: HashMap<Vec<u32>, usize> = HashMap::new();
    for text in corpus {
        for chunk in pre_split(text.as_ref()) {
            *chunks
                .entry(chunk.bytes().map(u32::from).collect())
                .or_default() += 1;
        }
    }
    let mut chunks: Vec<(Vec<u32>, usize)> = chunks.into_iter().collect();
    chunks.sort();

    for _ in 0..max_merges {
        let mut counts: HashMap<(u32, u32), usize> = HashMap::new();
        for (seq, freq) in &chunks {
            for w in seq.windows(2) {
                *counts.entry((w[0], w[1])).or_default() += freq;
            }
        }
        let best = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count.max(1))
            .max_by(|a, b| {
                a.1.cmp(&b.1).then_with(|| {
                    let ka = (&tokens[a.0 .0 as usize], &tokens[a.0 .1 as usize]);
                    let kb = (&tokens[b.0 .0 as usize], &tokens[b.0 .1 as usize]);
                    kb.cmp(&ka)
                })
            });
        let Some(((left, right), _)) = best else {
            break;
        };
        let mut merged = tokens[left as usize].clone();
        merged.extend_from_slice(&tokens[right as usize]);
        if tokens.contains(&merged) {
            // same bytes reachable through another pair; stop rather than duplicate
            break;
        }
        let id = tokens.len() as u32;
        tokens.push(merged);
        for (seq, _) in chunks.iter_mut() {
            *seq = merge_pair(seq, left, right, id);
        }
    }
    tokens
}

fn pre_split(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if c == ' ' && i > start {
            out.push(&text[start..i]);
            start = i;
        }
    }
    if start < text.len() {
        out.push(&text[start..]);
    }
    out
}

pub(crate) fn merge_pair(seq: &[u32], left: u32, right: u32, id: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(seq.len());
    let mut i = 0;
    while i < seq.len() {
        if i + 1 < seq.len() && seq[i] == left && seq[i + 1] == right {
            out.push(id);
            i += 2;
        } else {
            out.push(seq[i]);
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_whitespace_and_cjk() {
        assert_eq!(split_words("  hello   world "), vec!["hello", "world"]);
        assert_eq!(split_words("我爱你"), vec!["我", "爱", "你"]);
        assert_eq!(split_words("say 你好 ok"), vec!["say", "你", "好", "ok"]);
        assert!(split_words("   ").is_empty());
    }

    #[test]
    fn learns_frequent_words() {
        let corpus = ["alpha bravo", "bravo alpha", "alpha alpha"];
        let table = learn_text_tokens(&corpus, 50, 2);
        assert_eq!(table.len() > 256, true);
        assert!(table.iter().any(|t| t == b"alpha"));
        assert!(table.iter().any(|t| t == b" bravo" || t == b"bravo"));
        for (i, t) in table.iter().enumerate().take(256) {
            assert_eq!(t, &vec![i as u8]);
        }
    }

    #[test]
    fn learning_is_deterministic() {
        let corpus = ["the cat sat", "the mat", "a cat"];
        assert_eq!(
            learn_text_tokens(&corpus, 20, 2),
            learn_text_tokens(&corpus, 20, 2)
        );
    }
}
