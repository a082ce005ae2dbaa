use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use audiomt_core::corpus::{parse_manifest, synth_corpus, SynthOutput, TaskCode};
use audiomt_core::frontend::{read_wav, resample, MelExtractor, SAMPLE_RATE};
use audiomt_core::grammar::{build_header, Vocabulary};
use audiomt_core::model::{
    decode_checkpoint, generated_body, greedy_decode, load_checkpoint, Group, ModelConfig, Parameters, Real,
};
use audiomt_core::srwt::decode_timed;

use crate::config::{Precision, RunConfig};
use crate::data::{load_vocabulary, prepare_vocabulary};
use crate::error::{HarnessError, Result};
use crate::eval::body_text;
use crate::lock::RunLock;

pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthOutput> {
    let _lock = RunLock::acquire(&cfg.corpus_dir)?;
    Ok(synth_corpus(&cfg.synth, &cfg.corpus_dir)?)
}

pub fn cmd_prepare(cfg: &RunConfig) -> Result<Vocabulary> {
    let _lock = RunLock::acquire(&cfg.corpus_dir)?;
    prepare_vocabulary(cfg)
}

/// SHA-256 over the little-endian bytes of one parameter group.
pub fn group_hash<T: Real>(params: &Parameters<T>, group: Group) -> String {
    let mut h = Sha256::new();
    for t in params.tensors().iter().filter(|t| t.group() == group) {
        h.update(t.name.as_bytes());
        for v in t.data {
            h.update(v.as_f64().to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct CheckpointSummary {
    pub config: ModelConfig,
    pub step: u64,
    pub encoder_parameters: usize,
    pub decoder_parameters: usize,
    pub encoder_sha256: String,
    pub decoder_sha256: String,
}

pub fn summarize_checkpoint(bytes: &[u8]) -> Result<CheckpointSummary> {
    let (p, opt) = decode_checkpoint::<f64>(bytes)?;
    let count = |g| p.tensors().iter().filter(|t| t.group() == g).map(|t| t.data.len()).sum();
    Ok(CheckpointSummary {
        config: p.config,
        step: opt.step,
        encoder_parameters: count(Group::Encoder),
        decoder_parameters: count(Group::Decoder),
        encoder_sha256: group_hash(&p, Group::Encoder),
        decoder_sha256: group_hash(&p, Group::Decoder),
    })
}

/// JSON description of a checkpoint, manifest (`.jsonl`) or vocabulary file.
pub fn cmd_inspect(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    let json = if bytes.starts_with(audiomt_core::model::CHECKPOINT_MAGIC) {
        serde_json::to_value(summarize_checkpoint(&bytes)?)
    } else if path.extension().is_some_and(|e| e == "jsonl") {
        let text = String::from_utf8_lossy(&bytes);
        let records = parse_manifest(&text).map_err(|e| HarnessError::Data(e.to_string()))?;
        let mut counts: Vec<(TaskCode, usize)> = Vec::new();
        for r in &records {
            match counts.iter_mut().find(|(c, _)| *c == r.task_type) {
                Some((_, n)) => *n += 1,
                None => counts.push((r.task_type, 1)),
            }
        }
        let by_task: serde_json::Map<String, serde_json::Value> =
            counts.into_iter().map(|(c, n)| (c.to_string(), n.into())).collect();
        Ok(serde_json::json!({ "records": records.len(), "tasks": by_task }))
    } else {
        let v = Vocabulary::from_file_str(&String::from_utf8_lossy(&bytes))?;
        Ok(serde_json::json!({
            "size": v.len(),
            "text_tokens": v.text_len(),
            "languages": v.languages(),
        }))
    };
    Ok(serde_json::to_string_pretty(&json.expect("summary serializes")).expect("json"))
}

/// Decodes one WAV file with the header of `task`.
pub fn cmd_decode(
    cfg: &RunConfig,
    checkpoint: &Path,
    audio: &Path,
    task: TaskCode,
    audio_language: &str,
    text_language: &str,
) -> Result<String> {
    let vocab = load_vocabulary(cfg)?;
    let clip = read_wav(audio)?;
    let clip = if clip.sample_rate() == SAMPLE_RATE { clip } else { resample(&clip, SAMPLE_RATE)? };
    let mel = MelExtractor::default().log_mel(&clip)?;
    let header = build_header(&task.header(audio_language, text_language, None), &vocab)?;
    let tokens = match cfg.train.precision {
        Precision::F64 => greedy_decode(&load_checkpoint::<f64>(checkpoint)?.0, &mel, &header, &vocab, cfg.eval.max_new_tokens)?,
        Precision::F32 => greedy_decode(&load_checkpoint::<f32>(checkpoint)?.0, &mel, &header, &vocab, cfg.eval.max_new_tokens)?,
    };
    let body = generated_body(&tokens, header.len(), &vocab);
    let text = if task == TaskCode::SRWT {
        match decode_timed(&body, &vocab) {
            Ok(t) => t.to_json(),
            Err(e) => format!("malformed timestamps ({e}): {}", vocab.render(&body)),
        }
    } else {
        body_text(&vocab, &body)
    };
    Ok(format!("{}\n{text}", vocab.render(&tokens)))
}
