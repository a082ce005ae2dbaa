use std::collections::HashMap;

use audiomt_core::corpus::{
    assemble, parse_manifest, symbol_times, synth_corpus, write_manifest, ManifestRecord, MixSpec, Mixer, SynthSpec,
    TaskCode, ToyTask,
};
use audiomt_core::corpus::{manifest_path, Split};
use audiomt_core::frontend::MelExtractor;
use audiomt_core::grammar::{default_vocabulary, DEFAULT_LANGUAGES};
use proptest::prelude::*;
use sha2::{Digest, Sha256};

fn hash_dir(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, Sha256::digest(std::fs::read(&p).unwrap()).to_vec()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn equal_weights_give_balanced_frequencies() {
    for seed in 0..5 {
        let spec = MixSpec { sources: vec![("a".into(), 1.0), ("b".into(), 1.0)], seed };
        let draws = Mixer::new(&spec, &[("a", 13), ("b", 29)]).unwrap().take(10_000);
        let a = draws.filter(|d| d.source == 0).count() as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&a), "seed {seed}: {a}");
    }
}

#[test]
fn weighted_frequencies_follow_weights() {
    let spec = MixSpec { sources: vec![("a".into(), 3.0), ("b".into(), 1.0)], seed: 9 };
    let a = Mixer::new(&spec, &[("a", 5), ("b", 5)]).unwrap().take(20_000).filter(|d| d.source == 0).count();
    assert!((0.73..=0.77).contains(&(a as f64 / 20_000.0)));
}

#[test]
fn fast_forward_equals_skipping() {
    let spec = MixSpec::uniform(&["a", "b", "c"], 4);
    let data = [("a", 3), ("b", 8), ("c", 1)];
    let all: Vec<_> = Mixer::new(&spec, &data).unwrap().take(500).collect();
    let mut m = Mixer::new(&spec, &data).unwrap();
    m.fast_forward(321);
    assert_eq!(m.take(179).collect::<Vec<_>>(), all[321..]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_item_appears_once_per_epoch(len in 1usize..40, seed in any::<u64>()) {
        let spec = MixSpec::uniform(&["only"], seed);
        let draws: Vec<usize> = Mixer::new(&spec, &[("only", len)]).unwrap().take(len * 3).map(|d| d.index).collect();
        for epoch in draws.chunks(len) {
            let mut e = epoch.to_vec();
            e.sort();
            prop_assert_eq!(e, (0..len).collect::<Vec<_>>());
        }
    }

    #[test]
    fn manifest_lines_round_trip(targets in prop::collection::vec("[a-zA-Z \"\\\\]{1,20}", 0..10)) {
        let records: Vec<ManifestRecord> = targets
            .iter()
            .enumerate()
            .map(|(i, t)| ManifestRecord {
                audio_path: format!("audio/{i}.wav"),
                task_type: TaskCode::ASR,
                audio_language: "en".into(),
                text_language: "en".into(),
                target: t.clone(),
                timed_target: None,
                question: None,
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        write_manifest(&path, &records).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        prop_assert_eq!(parse_manifest(&text).unwrap(), records);
    }
}

#[test]
fn synthetic_corpus_is_reproducible_and_consistent() {
    let spec = SynthSpec { n_train: 6, n_heldout: 3, ..SynthSpec::default() };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth_corpus(&spec, a.path()).unwrap();
    synth_corpus(&spec, b.path()).unwrap();
    assert_eq!(hash_dir(a.path()), hash_dir(b.path()));

    let other = tempfile::tempdir().unwrap();
    synth_corpus(&SynthSpec { seed: 1, ..spec.clone() }, other.path()).unwrap();
    assert_ne!(hash_dir(a.path()), hash_dir(other.path()));

    let vocab = default_vocabulary(&DEFAULT_LANGUAGES, 256).unwrap();
    let extractor = MelExtractor::default();
    for task in ToyTask::ALL {
        for split in [Split::Train, Split::Heldout] {
            let text = std::fs::read_to_string(manifest_path(a.path(), task, split)).unwrap();
            let records = parse_manifest(&text).unwrap();
            let expected = if split == Split::Train { spec.n_train } else { spec.n_heldout };
            let per_clip = if task == ToyTask::ToyConflict { 2 } else { 1 };
            assert_eq!(records.len(), expected * per_clip, "{task:?} {split:?}");
            for r in &records {
                let ex = assemble(r, &vocab, a.path(), &extractor).unwrap();
                assert_eq!(ex.tokens.len(), ex.loss_mask.len());
                if let Some(timed) = &r.timed_target {
                    for (k, w) in timed.words.iter().enumerate() {
                        assert_eq!((w.start, w.end), symbol_times(k));
                    }
                }
            }
        }
    }
}

#[test]
fn conflict_pairs_share_audio() {
    let spec = SynthSpec { tasks: vec![ToyTask::ToyConflict], n_train: 5, n_heldout: 1, ..SynthSpec::default() };
    let dir = tempfile::tempdir().unwrap();
    synth_corpus(&spec, dir.path()).unwrap();
    let text = std::fs::read_to_string(manifest_path(dir.path(), ToyTask::ToyConflict, Split::Train)).unwrap();
    let mut by_audio: HashMap<String, Vec<TaskCode>> = HashMap::new();
    for r in parse_manifest(&text).unwrap() {
        by_audio.entry(r.audio_path).or_default().push(r.task_type);
    }
    assert_eq!(by_audio.len(), 5);
    for codes in by_audio.values() {
        assert_eq!(codes, &[TaskCode::ASR, TaskCode::MNA]);
    }
}
