#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Output;

use serde_json::json;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_audiomt")
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    std::process::Command::new(bin()).current_dir(dir).args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Small model and corpus so a step takes milliseconds.
pub fn tiny_config() -> serde_json::Value {
    json!({
        "corpus_dir": "corpus",
        "run_dir": "run",
        "synth": { "tasks": ["ToyASR", "ToyClassify"], "n_train": 8, "n_heldout": 4, "noise": 0.01 },
        "vocab": { "merges": 40 },
        "model": {
            "d_model": 16, "n_heads": 2, "n_encoder_layers": 1, "n_decoder_layers": 1,
            "ff_multiplier": 2, "max_audio_frames": 750, "max_text_len": 64
        },
        "train": {
            "tasks": [{ "task": "ToyASR" }, { "task": "ToyClassify" }],
            "steps": 6,
            "batch_size": 4,
            "schedule": { "peak": 1e-3, "min": 1e-4, "warmup_steps": 2, "total_steps": 6 }
        },
        "eval": { "tasks": ["ToyASR"], "split": "heldout", "max_new_tokens": 8 }
    })
}

pub fn write_config(dir: &Path, name: &str, value: &serde_json::Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

/// Writes `config.json`, then runs synth and prepare.
pub fn prepared(value: &serde_json::Value) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "config.json", value);
    for cmd in ["synth", "prepare"] {
        let out = run(dir.path(), &["--config", "config.json", cmd]);
        assert_eq!(code(&out), 0, "{cmd}: {}", stderr(&out));
    }
    dir
}
