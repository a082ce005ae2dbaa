use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::grammar::{LanguageTag, TaskCategory, TaskHeader, TranscriptionKind};

/// Task codes of the multitask pretraining mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskCode {
    ASR,
    S2TT,
    OSR,
    #[serde(alias = "Dialect ASR")]
    DialectASR,
    SRWT,
    DID,
    LID,
    SGC,
    ER,
    SV,
    SD,
    SER,
    KS,
    IC,
    SF,
    SAP,
    VSC,
    AAC,
    SEC,
    ASC,
    SED,
    AQA,
    SID,
    SMER,
    MC,
    MIC,
    MNA,
    MGR,
    MR,
    MQA,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CategoryRule {
    Transcribe,
    Translate,
    Caption,
    Analysis,
    QuestionAnswer,
}

/// How a task code becomes a header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskRule {
    pub kind: TranscriptionKind,
    pub category: CategoryRule,
    pub timestamps: bool,
    pub instruction: &'static str,
}

const fn speech(category: CategoryRule, timestamps: bool) -> TaskRule {
    TaskRule {
        kind: TranscriptionKind::Transcripts,
        category,
        timestamps,
        instruction: "",
    }
}

const fn analysis(category: CategoryRule, instruction: &'static str) -> TaskRule {
    TaskRule {
        kind: TranscriptionKind::Analysis,
        category,
        timestamps: false,
        instruction,
    }
}

impl TaskCode {
    pub const ALL: [TaskCode; 30] = [
        TaskCode::ASR,
        TaskCode::S2TT,
        TaskCode::OSR,
        TaskCode::DialectASR,
        TaskCode::SRWT,
        TaskCode::DID,
        TaskCode::LID,
        TaskCode::SGC,
        TaskCode::ER,
        TaskCode::SV,
        TaskCode::SD,
        TaskCode::SER,
        TaskCode::KS,
        TaskCode::IC,
        TaskCode::SF,
        TaskCode::SAP,
        TaskCode::VSC,
        TaskCode::AAC,
        TaskCode::SEC,
        TaskCode::ASC,
        TaskCode::SED,
        TaskCode::AQA,
        TaskCode::SID,
        TaskCode::SMER,
        TaskCode::MC,
        TaskCode::MIC,
        TaskCode::MNA,
        TaskCode::MGR,
        TaskCode::MR,
        TaskCode::MQA,
    ];

    pub fn rule(self) -> TaskRule {
        use CategoryRule::*;
        match self {
            TaskCode::ASR | TaskCode::OSR | TaskCode::DialectASR => speech(Transcribe, false),
            TaskCode::S2TT => speech(Translate, false),
            TaskCode::SRWT => speech(Transcribe, true),
            TaskCode::DID => analysis(Analysis, "dialect"),
            TaskCode::LID => analysis(Analysis, "language"),
            TaskCode::SGC => analysis(Analysis, "gender"),
            TaskCode::ER => analysis(Analysis, "emotion"),
            TaskCode::SV => analysis(Analysis, "verify speaker"),
            TaskCode::SD => analysis(Analysis, "diarize"),
            TaskCode::SER => analysis(Analysis, "entities"),
            TaskCode::KS => analysis(Analysis, "keywords"),
            TaskCode::IC => analysis(Analysis, "intent"),
            TaskCode::SF => analysis(Analysis, "slots"),
            TaskCode::SAP => analysis(Analysis, "age"),
            TaskCode::VSC => analysis(Analysis, "vocal sound"),
            TaskCode::AAC => analysis(Caption, ""),
            TaskCode::SEC => analysis(Analysis, "sound event"),
            TaskCode::ASC => analysis(Analysis, "scene"),
            TaskCode::SED => analysis(Analysis, "detect events"),
            TaskCode::AQA => analysis(QuestionAnswer, ""),
            TaskCode::SID => analysis(Analysis, "singer"),
            TaskCode::SMER => analysis(Analysis, "music emotion"),
            TaskCode::MC => analysis(Caption, "music"),
            TaskCode::MIC => analysis(Analysis, "instruments"),
            TaskCode::MNA => analysis(Analysis, "notes"),
            TaskCode::MGR => analysis(Analysis, "genre"),
            TaskCode::MR => analysis(Analysis, "music"),
            TaskCode::MQA => analysis(QuestionAnswer, "music"),
        }
    }

    pub fn is_question_answer(self) -> bool {
        self.rule().category == CategoryRule::QuestionAnswer
    }

    pub fn header(self, audio_language: &str, text_language: &str, question: Option<&str>) -> TaskHeader {
        let rule = self.rule();
        let task = match rule.category {
            CategoryRule::Transcribe => TaskCategory::Transcribe,
            CategoryRule::Translate => TaskCategory::Translate,
            CategoryRule::Caption => TaskCategory::Caption,
            CategoryRule::Analysis => TaskCategory::Analysis,
            CategoryRule::QuestionAnswer => TaskCategory::QuestionAnswer(question.unwrap_or_default().to_string()),
        };
        TaskHeader {
            kind: rule.kind,
            audio_language: LanguageTag::code(audio_language),
            task,
            text_language: LanguageTag::code(text_language),
            timestamps: rule.timestamps,
            instruction: rule.instruction.to_string(),
        }
    }
}

impl fmt::Display for TaskCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for TaskCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskCode::ALL
            .into_iter()
            .find(|c| c.to_string() == s || (s == "Dialect ASR" && *c == TaskCode::DialectASR))
            .ok_or_else(|| format!("unknown task code {s:?}"))
    }
}
