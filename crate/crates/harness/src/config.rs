use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use audiomt_core::corpus::{HeaderFormat, Split, SynthSpec, ToyTask};
use audiomt_core::frontend::SpecAugmentPolicy;
use audiomt_core::grammar::DEFAULT_LANGUAGES;
use audiomt_core::model::{AdamWConfig, LrSchedule, ModelConfig, TrainStage};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

/// Model sizes; the vocabulary size comes from the prepared vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_encoder_layers: usize,
    pub n_decoder_layers: usize,
    pub ff_multiplier: usize,
    pub max_audio_frames: usize,
    pub max_text_len: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let d = ModelConfig::desk(1);
        Self {
            d_model: d.d_model,
            n_heads: d.n_heads,
            n_encoder_layers: d.n_encoder_layers,
            n_decoder_layers: d.n_decoder_layers,
            ff_multiplier: d.ff_multiplier,
            max_audio_frames: d.max_audio_frames,
            max_text_len: d.max_text_len,
        }
    }
}

impl ModelSection {
    pub fn config(&self, vocab_size: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            d_model: self.d_model,
            n_heads: self.n_heads,
            n_encoder_layers: self.n_encoder_layers,
            n_decoder_layers: self.n_decoder_layers,
            ff_multiplier: self.ff_multiplier,
            vocab_size,
            max_audio_frames: self.max_audio_frames,
            max_text_len: self.max_text_len,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabSection {
    pub languages: Vec<String>,
    /// Upper bound on learned byte-pair merges.
    pub merges: usize,
    pub min_count: usize,
}

impl Default for VocabSection {
    fn default() -> Self {
        Self {
            languages: DEFAULT_LANGUAGES.iter().map(|s| s.to_string()).collect(),
            merges: 200,
            min_count: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskWeight {
    pub task: ToyTask,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub tasks: Vec<TaskWeight>,
    pub split: Split,
    /// Use only the first `limit` records of each task.
    pub limit: Option<usize>,
    pub steps: u64,
    pub batch_size: usize,
    pub stage: TrainStage,
    pub precision: Precision,
    pub header_format: HeaderFormat,
    pub schedule: LrSchedule,
    pub adam: AdamWConfig,
    pub spec_augment: Option<SpecAugmentPolicy>,
    /// Save a checkpoint every this many steps (0: only at the end).
    pub checkpoint_every: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            tasks: vec![TaskWeight {
                task: ToyTask::ToyASR,
                weight: 1.0,
            }],
            split: Split::Train,
            limit: None,
            steps: 3000,
            batch_size: 32,
            stage: TrainStage::Joint,
            precision: Precision::F64,
            header_format: HeaderFormat::Full,
            schedule: LrSchedule::default(),
            adam: AdamWConfig::default(),
            spec_augment: None,
            checkpoint_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub tasks: Vec<ToyTask>,
    pub split: Split,
    pub limit: Option<usize>,
    pub max_new_tokens: usize,
    /// Keep per-item scores in the report.
    pub items: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            tasks: vec![ToyTask::ToyASR],
            split: Split::Heldout,
            limit: None,
            max_new_tokens: 64,
            items: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateSection {
    pub seeds: Vec<u64>,
    /// Steps for each arm of the timestamp ablation.
    pub srwt_steps: u64,
    pub conflict_steps: u64,
    /// Model used by every ablation arm.
    pub model: ModelSection,
    pub batch_size: usize,
    pub precision: Precision,
    pub schedule: LrSchedule,
    pub spec_augment: Option<SpecAugmentPolicy>,
    pub conflict_split: Split,
}

impl Default for AblateSection {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2],
            srwt_steps: 1500,
            conflict_steps: 800,
            model: ModelSection {
                d_model: 64,
                n_encoder_layers: 2,
                n_decoder_layers: 2,
                ..ModelSection::default()
            },
            batch_size: 32,
            precision: Precision::F32,
            schedule: LrSchedule {
                peak: 1e-3,
                min: 1e-4,
                warmup_steps: 100,
                total_steps: 1500,
            },
            spec_augment: None,
            conflict_split: Split::Train,
        }
    }
}

/// Everything a command needs. Relative paths resolve against the config
/// file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_dir: PathBuf,
    pub run_dir: PathBuf,
    pub seed: u64,
    pub synth: SynthSpec,
    pub vocab: VocabSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub ablate: AblateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus_dir: PathBuf::from("corpus"),
            run_dir: PathBuf::from("run"),
            seed: 0,
            synth: SynthSpec::default(),
            vocab: VocabSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            ablate: AblateSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Usage(format!("config: {e}")))?;
        cfg.corpus_dir = base.join(&cfg.corpus_dir);
        cfg.run_dir = base.join(&cfg.run_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn vocab_path(&self) -> PathBuf {
        self.corpus_dir.join("vocab.txt")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.run_dir.join("checkpoint.bin")
    }

    pub fn log_path(&self) -> PathBuf {
        self.run_dir.join("train.jsonl")
    }
}
