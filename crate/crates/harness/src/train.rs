use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use audiomt_core::grammar::Vocabulary;
use audiomt_core::model::{
    load_checkpoint, save_checkpoint, train_step, OptimizerState, Parameters, Real,
};

use crate::config::{Precision, RunConfig};
use crate::data::{load_training_sets, load_vocabulary, Batcher};
use crate::error::{HarnessError, Result};
use crate::lock::RunLock;

/// One line of `train.jsonl`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub step: u64,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub start_step: u64,
    pub final_step: u64,
    pub last_loss: Option<f64>,
}

/// Trains to `cfg.train.steps` total steps, from scratch or resuming from a
/// checkpoint. Writes `checkpoint.bin`, `train.jsonl` and `config.json` into the
/// run directory.
pub fn cmd_train(cfg: &RunConfig, resume: Option<&Path>) -> Result<TrainOutcome> {
    let vocab = load_vocabulary(cfg)?;
    match cfg.train.precision {
        Precision::F64 => train_impl::<f64>(cfg, &vocab, resume),
        Precision::F32 => train_impl::<f32>(cfg, &vocab, resume),
    }
}

fn kept_log_lines(path: &Path, upto: u64) -> Result<String> {
    if !path.exists() {
        return Ok(String::new());
    }
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut kept = String::new();
    for line in text.lines() {
        let parsed: LogLine = serde_json::from_str(line)
            .map_err(|e| HarnessError::Data(format!("{}: bad log line: {e}", path.display())))?;
        if parsed.step <= upto {
            kept.push_str(line);
            kept.push('\n');
        }
    }
    Ok(kept)
}

fn train_impl<T: Real>(cfg: &RunConfig, vocab: &Vocabulary, resume: Option<&Path>) -> Result<TrainOutcome> {
    let _lock = RunLock::acquire(&cfg.run_dir)?;
    let t = &cfg.train;
    let (mut params, mut opt) = match resume {
        Some(path) => load_checkpoint::<T>(path)?,
        None => {
            let p = Parameters::<T>::init(cfg.model.config(vocab.len(), cfg.seed))?;
            let o = OptimizerState::new(&p, t.adam);
            (p, o)
        }
    };
    if params.config.vocab_size != vocab.len() {
        return Err(HarnessError::Data(format!(
            "checkpoint vocabulary size {} differs from prepared vocabulary {}",
            params.config.vocab_size,
            vocab.len()
        )));
    }
    let start = opt.step;
    if start > t.steps {
        return Err(HarnessError::Usage(format!(
            "checkpoint is at step {start}, beyond the requested {} steps",
            t.steps
        )));
    }

    let config_path = cfg.run_dir.join("config.json");
    std::fs::write(&config_path, cfg.to_json()).map_err(|e| HarnessError::io(&config_path, e))?;
    let log_path = cfg.log_path();
    let kept = if resume.is_some() { kept_log_lines(&log_path, start)? } else { String::new() };
    let mut log = std::fs::File::create(&log_path).map_err(|e| HarnessError::io(&log_path, e))?;
    log.write_all(kept.as_bytes()).map_err(|e| HarnessError::io(&log_path, e))?;

    let checkpoint = cfg.checkpoint_path();
    let mut last_loss = None;
    if t.steps > start {
        let sets = Arc::new(load_training_sets(cfg, vocab)?);
        let batcher = Batcher::new(sets, &t.tasks, t.batch_size, t.spec_augment.clone(), cfg.seed, start)?;
        let (batches, producer) = batcher.spawn(t.steps - start, 2);
        for batch in batches.iter() {
            let report = train_step(&mut params, &mut opt, &batch, t.stage, &t.schedule)?;
            let line = serde_json::to_string(&LogLine {
                step: report.step,
                lr: report.lr,
                loss: report.loss,
            })
            .expect("log line serializes");
            writeln!(log, "{line}").map_err(|e| HarnessError::io(&log_path, e))?;
            last_loss = Some(report.loss);
            if t.checkpoint_every > 0 && report.step % t.checkpoint_every == 0 {
                save_checkpoint(&checkpoint, &params, &opt)?;
            }
        }
        producer.join().map_err(|_| HarnessError::Data("batch producer panicked".into()))?;
    }
    save_checkpoint(&checkpoint, &params, &opt)?;
    Ok(TrainOutcome {
        checkpoint,
        start_step: start,
        final_step: opt.step,
        last_loss,
    })
}
