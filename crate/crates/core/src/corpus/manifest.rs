use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tasks::TaskCode;
use super::{CorpusError, ManifestError};
use crate::srwt::TimedTranscript;

/// One line of a JSON-lines manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    /// Relative paths resolve against the manifest's directory.
    pub audio_path: String,
    pub task_type: TaskCode,
    pub audio_language: String,
    pub text_language: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timed_target: Option<TimedTranscript>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
}

impl ManifestRecord {
    /// The first broken record rule, if any.
    pub fn check(&self) -> Result<(), String> {
        if self.audio_path.is_empty() {
            return Err("audio_path is empty".into());
        }
        if self.text_language == "unknown" {
            return Err("text_language cannot be unknown".into());
        }
        if self.audio_language.is_empty() || self.text_language.is_empty() {
            return Err("language codes must be non-empty".into());
        }
        match (&self.timed_target, self.task_type) {
            (None, TaskCode::SRWT) => return Err("SRWT records require timed_target".into()),
            (Some(_), code) if code != TaskCode::SRWT => {
                return Err(format!("timed_target is only allowed on SRWT records, not {code}"))
            }
            (Some(t), _) => t.validate().map_err(|e| e.to_string())?,
            (None, _) => {}
        }
        let has_question = self.question.as_deref().is_some_and(|q| !q.is_empty());
        if self.task_type.is_question_answer() && !has_question {
            return Err(format!("{} records require a non-empty question", self.task_type));
        }
        if !self.task_type.is_question_answer() && self.question.is_some() {
            return Err(format!("question is only allowed on QA records, not {}", self.task_type));
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// Parses manifest text; line numbers in errors are 1-based. Blank lines are skipped.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRecord>, ManifestError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: ManifestRecord = serde_json::from_str(line).map_err(|e| ManifestError {
            line: i + 1,
            reason: e.to_string(),
        })?;
        record.check().map_err(|reason| ManifestError { line: i + 1, reason })?;
        out.push(record);
    }
    Ok(out)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(parse_manifest(&text)?)
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut text = String::new();
    for r in records {
        text.push_str(&r.to_json_line());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
