use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread::JoinHandle;

use audiomt_core::corpus::{
    assemble_with_features, load_features, load_manifest, manifest_path, HeaderFormat, ManifestRecord, MixSpec,
    Mixer, Split, TaskCode, ToyTask, TrainingExample,
};
use audiomt_core::frontend::{spec_augment, MelExtractor, SpecAugmentPolicy};
use audiomt_core::grammar::Vocabulary;
use audiomt_core::text::learn_text_tokens;

use crate::config::{RunConfig, TaskWeight};
use crate::error::{HarnessError, Result};

/// Learns the text table from every training manifest in the corpus
/// (targets, questions and task instructions) and writes `vocab.txt`.
pub fn prepare_vocabulary(cfg: &RunConfig) -> Result<Vocabulary> {
    let mut texts: Vec<String> = TaskCode::ALL
        .iter()
        .map(|c| c.rule().instruction.to_string())
        .filter(|s| !s.is_empty())
        .collect();
    let mut found = 0;
    for task in ToyTask::ALL {
        let path = manifest_path(&cfg.corpus_dir, task, Split::Train);
        if !path.exists() {
            continue;
        }
        found += 1;
        for r in load_manifest(&path)? {
            texts.push(r.target);
            texts.extend(r.question);
        }
    }
    if found == 0 {
        return Err(HarnessError::Data(format!(
            "no training manifests in {}; run synth first",
            cfg.corpus_dir.display()
        )));
    }
    let tokens = learn_text_tokens(&texts, cfg.vocab.merges, cfg.vocab.min_count.max(1));
    let vocab = Vocabulary::new(&cfg.vocab.languages, tokens)?;
    let path = cfg.vocab_path();
    vocab.write(&path).map_err(|e| HarnessError::io(&path, e))?;
    Ok(vocab)
}

pub fn load_vocabulary(cfg: &RunConfig) -> Result<Vocabulary> {
    let path = cfg.vocab_path();
    if !path.exists() {
        return Err(HarnessError::Data(format!("{} missing; run prepare first", path.display())));
    }
    Ok(Vocabulary::read(&path)?)
}

/// Records of one task with their assembled examples.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub task: ToyTask,
    pub records: Vec<ManifestRecord>,
    pub examples: Vec<TrainingExample>,
}

pub fn load_task(
    cfg: &RunConfig,
    task: ToyTask,
    split: Split,
    limit: Option<usize>,
    vocab: &Vocabulary,
    format: HeaderFormat,
) -> Result<TaskData> {
    let path = manifest_path(&cfg.corpus_dir, task, split);
    if !path.exists() {
        return Err(HarnessError::Data(format!("manifest {} not found", path.display())));
    }
    let mut records = load_manifest(&path)?;
    if let Some(n) = limit {
        records.truncate(n);
    }
    let extractor = MelExtractor::default();
    let mut examples = Vec::with_capacity(records.len());
    let mut cache: Option<(String, audiomt_core::frontend::MelSpectrogram)> = None;
    for r in &records {
        // Paired records often share audio; reuse the previous features.
        let features = match &cache {
            Some((p, f)) if *p == r.audio_path => f.clone(),
            _ => {
                let f = load_features(r, &cfg.corpus_dir, &extractor)?;
                cache = Some((r.audio_path.clone(), f.clone()));
                f
            }
        };
        examples.push(assemble_with_features(r, features, vocab, format)?);
    }
    Ok(TaskData {
        task,
        records,
        examples,
    })
}

pub fn load_training_sets(cfg: &RunConfig, vocab: &Vocabulary) -> Result<Vec<TaskData>> {
    let t = &cfg.train;
    if t.tasks.is_empty() {
        return Err(HarnessError::Usage("train.tasks is empty".into()));
    }
    t.tasks
        .iter()
        .map(|tw| load_task(cfg, tw.task, t.split, t.limit, vocab, t.header_format))
        .collect()
}

/// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Augmentation seed of batch slot `slot` at 0-based step `step`.
pub fn augment_seed(seed: u64, step: u64, slot: usize) -> u64 {
    mix64(mix64(mix64(seed) ^ step) ^ slot as u64)
}

/// Deterministic batch source: the batch for step `s` depends only on the
/// seed, the task list and `s`.
pub struct Batcher {
    sets: Arc<Vec<TaskData>>,
    mixer: Mixer,
    batch_size: usize,
    augment: Option<SpecAugmentPolicy>,
    seed: u64,
    next_step: u64,
}

impl Batcher {
    pub fn new(
        sets: Arc<Vec<TaskData>>,
        weights: &[TaskWeight],
        batch_size: usize,
        augment: Option<SpecAugmentPolicy>,
        seed: u64,
        start_step: u64,
    ) -> Result<Self> {
        if batch_size == 0 {
            return Err(HarnessError::Usage("batch_size must be positive".into()));
        }
        let spec = MixSpec {
            sources: weights.iter().map(|w| (w.task.to_string(), w.weight)).collect(),
            seed,
        };
        let names: Vec<String> = sets.iter().map(|s| s.task.to_string()).collect();
        let datasets: Vec<(&str, usize)> =
            names.iter().zip(sets.iter()).map(|(n, s)| (n.as_str(), s.examples.len())).collect();
        let mut mixer = Mixer::new(&spec, &datasets)?;
        mixer.fast_forward(start_step as usize * batch_size);
        Ok(Self {
            sets,
            mixer,
            batch_size,
            augment,
            seed,
            next_step: start_step,
        })
    }

    pub fn next_batch(&mut self) -> Vec<TrainingExample> {
        let step = self.next_step;
        self.next_step += 1;
        (0..self.batch_size)
            .map(|slot| {
                let d = self.mixer.next().expect("mixer is infinite");
                let mut ex = self.sets[d.source].examples[d.index].clone();
                if let Some(policy) = &self.augment {
                    let p = policy.clone().with_seed(augment_seed(self.seed, step, slot));
                    ex.features = spec_augment(&ex.features, &p);
                }
                ex
            })
            .collect()
    }

    /// Moves batch assembly to a producer thread. Batches arrive in step order
    /// through a bounded FIFO queue.
    pub fn spawn(mut self, count: u64, depth: usize) -> (Receiver<Vec<TrainingExample>>, JoinHandle<()>) {
        let (tx, rx) = sync_channel(depth.max(1));
        let handle = std::thread::spawn(move || {
            for _ in 0..count {
                if tx.send(self.next_batch()).is_err() {
                    break;
                }
            }
        });
        (rx, handle)
    }
}
