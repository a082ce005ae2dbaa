//! Tone-sequence corpora with exactly known targets.
//!
//! Each symbol of a 16-letter alphabet is a pure tone lasting 120 ms followed
//! by 40 ms of silence, so symbol `k` of an utterance occupies
//! `[0.160 k, 0.160 k + 0.120]` seconds.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{write_manifest, ManifestRecord};
use super::tasks::TaskCode;
use super::CorpusError;
use crate::frontend::{write_wav, AudioClip, SAMPLE_RATE};
use crate::srwt::{TimedTranscript, TimedWord};

pub const ALPHABET_SIZE: usize = 16;
pub const TONE_MS: u32 = 120;
pub const GAP_MS: u32 = 40;
pub const SYMBOL_MS: u32 = TONE_MS + GAP_MS;

const LOW_HZ: f64 = 300.0;
const HIGH_HZ: f64 = 4000.0;
const AMPLITUDE: f64 = 0.5;
const RAMP_MS: f64 = 5.0;

pub const SYMBOL_NAMES: [&str; ALPHABET_SIZE] = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliett", "kilo", "lima",
    "mike", "november", "oscar", "papa",
];

/// Target-language words for the translation task, indexed through [`translate_symbol`].
pub const TRANSLATION_WORDS: [&str; ALPHABET_SIZE] = [
    "null", "eins", "zwei", "drei", "vier", "fünf", "sechs", "sieben", "acht", "neun", "zehn", "elf", "zwölf",
    "dreizehn", "vierzehn", "fünfzehn",
];

pub fn translate_symbol(k: usize) -> &'static str {
    TRANSLATION_WORDS[(5 * k + 3) % ALPHABET_SIZE]
}

/// Tone frequencies are spaced geometrically from 300 Hz to 4 kHz.
pub fn symbol_frequency(k: usize) -> f64 {
    LOW_HZ * (HIGH_HZ / LOW_HZ).powf(k as f64 / (ALPHABET_SIZE - 1) as f64)
}

/// Exact start and end of symbol position `k`, in seconds.
pub fn symbol_times(k: usize) -> (f64, f64) {
    let start = k as u32 * SYMBOL_MS;
    (start as f64 / 1000.0, (start + TONE_MS) as f64 / 1000.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ToyTask {
    ToyASR,
    ToyClassify,
    ToySRWT,
    ToyTranslate,
    ToyConflict,
}

impl ToyTask {
    pub const ALL: [ToyTask; 5] = [
        ToyTask::ToyASR,
        ToyTask::ToyClassify,
        ToyTask::ToySRWT,
        ToyTask::ToyTranslate,
        ToyTask::ToyConflict,
    ];

    /// File stem used for manifests.
    pub fn file_stem(self) -> &'static str {
        match self {
            ToyTask::ToyASR => "toy_asr",
            ToyTask::ToyClassify => "toy_classify",
            ToyTask::ToySRWT => "toy_srwt",
            ToyTask::ToyTranslate => "toy_translate",
            ToyTask::ToyConflict => "toy_conflict",
        }
    }
}

impl fmt::Display for ToyTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for ToyTask {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ToyTask::ALL
            .into_iter()
            .find(|t| t.to_string().eq_ignore_ascii_case(s) || t.file_stem() == s)
            .ok_or_else(|| CorpusError::UnknownTask(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Heldout,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Heldout => "heldout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub tasks: Vec<ToyTask>,
    pub n_train: usize,
    pub n_heldout: usize,
    pub min_symbols: usize,
    pub max_symbols: usize,
    /// Peak amplitude of uniform background noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            tasks: ToyTask::ALL.to_vec(),
            n_train: 200,
            n_heldout: 50,
            min_symbols: 3,
            max_symbols: 6,
            noise: 0.01,
            seed: 0,
        }
    }
}

/// Paths written by [`synth_corpus`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthOutput {
    pub manifests: Vec<PathBuf>,
    pub audio: Vec<PathBuf>,
}

pub fn manifest_path(dir: &Path, task: ToyTask, split: Split) -> PathBuf {
    dir.join(format!("{}.{}.jsonl", task.file_stem(), split.name()))
}

/// Synthesizes one utterance.
pub fn render_symbols(symbols: &[usize], noise: f64, rng: &mut impl Rng) -> AudioClip {
    let rate = SAMPLE_RATE as f64;
    let per_symbol = (SYMBOL_MS * SAMPLE_RATE / 1000) as usize;
    let tone = (TONE_MS * SAMPLE_RATE / 1000) as usize;
    let ramp = (RAMP_MS * rate / 1000.0) as usize;
    let mut samples = vec![0.0; per_symbol * symbols.len()];
    for (k, &sym) in symbols.iter().enumerate() {
        let f = symbol_frequency(sym);
        for n in 0..tone {
            let edge = n.min(tone - 1 - n);
            let env = if edge < ramp {
                0.5 - 0.5 * (std::f64::consts::PI * edge as f64 / ramp as f64).cos()
            } else {
                1.0
            };
            samples[k * per_symbol + n] = AMPLITUDE * env * (2.0 * std::f64::consts::PI * f * n as f64 / rate).sin();
        }
    }
    if noise > 0.0 {
        for s in &mut samples {
            *s += rng.random_range(-noise..noise);
        }
    }
    AudioClip::new(samples, SAMPLE_RATE).expect("synthetic audio is valid")
}

fn names(symbols: &[usize]) -> String {
    symbols.iter().map(|&s| SYMBOL_NAMES[s]).collect::<Vec<_>>().join(" ")
}

fn timed(symbols: &[usize]) -> TimedTranscript {
    TimedTranscript::new(
        symbols
            .iter()
            .enumerate()
            .map(|(k, &s)| {
                let (start, end) = symbol_times(k);
                TimedWord::new(SYMBOL_NAMES[s], start, end)
            })
            .collect(),
    )
}

fn record(audio_path: &str, task: TaskCode, audio_lang: &str, text_lang: &str, target: String) -> ManifestRecord {
    ManifestRecord {
        audio_path: audio_path.to_string(),
        task_type: task,
        audio_language: audio_lang.to_string(),
        text_language: text_lang.to_string(),
        target,
        timed_target: None,
        question: None,
    }
}

/// Records a toy task contributes for one utterance.
pub fn toy_records(task: ToyTask, audio_path: &str, symbols: &[usize]) -> Vec<ManifestRecord> {
    match task {
        ToyTask::ToyASR => vec![record(audio_path, TaskCode::ASR, "en", "en", names(symbols))],
        ToyTask::ToySRWT => {
            let mut r = record(audio_path, TaskCode::SRWT, "en", "en", names(symbols));
            r.timed_target = Some(timed(symbols));
            vec![r]
        }
        ToyTask::ToyTranslate => {
            let words: Vec<&str> = symbols.iter().map(|&s| translate_symbol(s)).collect();
            vec![record(audio_path, TaskCode::S2TT, "en", "de", words.join(" "))]
        }
        ToyTask::ToyClassify => {
            let parity = if symbols.len() % 2 == 0 { "even" } else { "odd" };
            vec![record(audio_path, TaskCode::SEC, "unknown", "en", parity.to_string())]
        }
        ToyTask::ToyConflict => {
            let digits: Vec<String> = symbols.iter().map(|s| s.to_string()).collect();
            vec![
                record(audio_path, TaskCode::ASR, "en", "en", names(symbols)),
                record(audio_path, TaskCode::MNA, "unknown", "en", digits.join(" ")),
            ]
        }
    }
}

/// Writes WAV files under `<out>/audio/` and one manifest per task and split
/// (`<out>/<task>.<split>.jsonl`). Every task shares the same utterances.
pub fn synth_corpus(spec: &SynthSpec, out_dir: &Path) -> Result<SynthOutput, CorpusError> {
    if spec.min_symbols == 0 || spec.min_symbols > spec.max_symbols {
        return Err(CorpusError::InvalidSpec(format!(
            "symbol range {}..={} is empty",
            spec.min_symbols, spec.max_symbols
        )));
    }
    let max_seconds = spec.max_symbols as f64 * SYMBOL_MS as f64 / 1000.0;
    if max_seconds > crate::srwt::MAX_TIME {
        return Err(CorpusError::InvalidSpec(format!("utterances up to {max_seconds} s exceed 30 s")));
    }
    if !(spec.noise.is_finite() && (0.0..0.5).contains(&spec.noise)) {
        return Err(CorpusError::InvalidSpec(format!("noise {} outside [0, 0.5)", spec.noise)));
    }
    let io = |path: &Path, e: std::io::Error| CorpusError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let audio_dir = out_dir.join("audio");
    std::fs::create_dir_all(&audio_dir).map_err(|e| io(&audio_dir, e))?;

    let mut out = SynthOutput {
        manifests: Vec::new(),
        audio: Vec::new(),
    };
    for (stream, split, count) in [(0, Split::Train, spec.n_train), (1, Split::Heldout, spec.n_heldout)] {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(stream);
        let mut utterances = Vec::with_capacity(count);
        for i in 0..count {
            let len = rng.random_range(spec.min_symbols..=spec.max_symbols);
            let symbols: Vec<usize> = (0..len).map(|_| rng.random_range(0..ALPHABET_SIZE)).collect();
            let clip = render_symbols(&symbols, spec.noise, &mut rng);
            let rel = format!("audio/{}_{i:05}.wav", split.name());
            let path = out_dir.join(&rel);
            write_wav(&path, &clip)?;
            out.audio.push(path);
            utterances.push((rel, symbols));
        }
        for &task in &spec.tasks {
            let records: Vec<ManifestRecord> = utterances
                .iter()
                .flat_map(|(rel, symbols)| toy_records(task, rel, symbols))
                .collect();
            let path = manifest_path(out_dir, task, split);
            write_manifest(&path, &records)?;
            out.manifests.push(path);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_manifest;

    fn small() -> SynthSpec {
        SynthSpec {
            n_train: 4,
            n_heldout: 2,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn times_follow_the_symbol_grid() {
        let t = timed(&[1, 2, 3, 4, 5]);
        for (k, w) in t.words.iter().enumerate() {
            assert_eq!(w.start, k as f64 * 0.160);
            assert_eq!(w.end, k as f64 * 0.160 + 0.120);
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let oa = synth_corpus(&small(), a.path()).unwrap();
        let ob = synth_corpus(&small(), b.path()).unwrap();
        assert_eq!(oa.manifests.len(), 10);
        for (pa, pb) in oa.manifests.iter().chain(&oa.audio).zip(ob.manifests.iter().chain(&ob.audio)) {
            assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
        }
    }

    #[test]
    fn conflict_pairs_share_audio_but_not_headers() {
        let dir = tempfile::tempdir().unwrap();
        synth_corpus(&small(), dir.path()).unwrap();
        let recs = load_manifest(manifest_path(dir.path(), ToyTask::ToyConflict, Split::Train)).unwrap();
        assert_eq!(recs.len(), 8);
        for pair in recs.chunks(2) {
            assert_eq!(pair[0].audio_path, pair[1].audio_path);
            assert_ne!(pair[0].task_type, pair[1].task_type);
            assert_ne!(pair[0].target, pair[1].target);
        }
    }

    #[test]
    fn clip_length_matches_symbol_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let clip = render_symbols(&[0, 15, 7], 0.0, &mut rng);
        assert!((clip.duration() - 0.48).abs() < 1e-12);
        assert!(clip.samples()[1920..2560].iter().all(|&s| s == 0.0));
    }

    #[test]
    fn task_names_parse() {
        assert_eq!("ToySRWT".parse::<ToyTask>().unwrap(), ToyTask::ToySRWT);
        assert_eq!("toy_asr".parse::<ToyTask>().unwrap(), ToyTask::ToyASR);
        assert!(matches!("ToyNope".parse::<ToyTask>(), Err(CorpusError::UnknownTask(_))));
    }

    #[test]
    fn translation_is_a_permutation() {
        let mut seen: Vec<&str> = (0..ALPHABET_SIZE).map(translate_symbol).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), ALPHABET_SIZE);
    }
}
