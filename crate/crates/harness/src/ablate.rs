use serde::{Deserialize, Serialize};

use audiomt_core::corpus::{HeaderFormat, Split, ToyTask};
use audiomt_core::metrics::EvalReport;

use crate::config::{RunConfig, TaskWeight};
use crate::error::{HarnessError, Result};
use crate::eval::cmd_eval;
use crate::train::cmd_train;

/// Which comparisons to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblationPart {
    /// All tasks with vs without the timestamp task.
    Srwt,
    /// Paired conflicting targets with task headers vs one shared tag.
    Conflict,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub arm: String,
    pub seed: u64,
    pub final_loss: Option<f64>,
    pub reports: Vec<EvalReport>,
}

impl ArmResult {
    pub fn metric(&self, task: &str, metric: &str) -> Option<f64> {
        self.reports
            .iter()
            .find(|r| r.task == task && r.metric == metric)
            .and_then(|r| r.value)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AblationSummary {
    pub asr_wer_with_srwt: Vec<f64>,
    pub asr_wer_without_srwt: Vec<f64>,
    pub median_wer_with_srwt: Option<f64>,
    pub median_wer_without_srwt: Option<f64>,
    pub srwt_aas_ms: Vec<f64>,
    pub median_srwt_aas_ms: Option<f64>,
    pub tagged_asr_accuracy: Option<f64>,
    pub tagged_mna_accuracy: Option<f64>,
    pub shared_asr_accuracy: Option<f64>,
    pub shared_mna_accuracy: Option<f64>,
    pub shared_mean_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AblationReport {
    pub arms: Vec<ArmResult>,
    pub summary: AblationSummary,
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

fn arm_config(
    base: &RunConfig,
    arm: &str,
    seed: u64,
    tasks: &[ToyTask],
    steps: u64,
    format: HeaderFormat,
    eval_tasks: &[ToyTask],
    eval_split: Split,
) -> RunConfig {
    let a = &base.ablate;
    let mut cfg = base.clone();
    cfg.run_dir = base.run_dir.join("ablate").join(format!("{arm}-seed{seed}"));
    cfg.seed = seed;
    cfg.model = a.model;
    cfg.train.tasks = tasks.iter().map(|&task| TaskWeight { task, weight: 1.0 }).collect();
    cfg.train.split = Split::Train;
    cfg.train.limit = None;
    cfg.train.steps = steps;
    cfg.train.batch_size = a.batch_size;
    cfg.train.precision = a.precision;
    cfg.train.header_format = format;
    cfg.train.schedule = a.schedule;
    cfg.train.schedule.total_steps = steps;
    cfg.train.spec_augment = a.spec_augment.clone();
    cfg.train.checkpoint_every = 0;
    cfg.eval.tasks = eval_tasks.to_vec();
    cfg.eval.split = eval_split;
    cfg.eval.limit = None;
    cfg
}

fn run_arm(cfg: &RunConfig, arm: &str) -> Result<ArmResult> {
    let outcome = cmd_train(cfg, None)?;
    let reports = cmd_eval(cfg, &outcome.checkpoint)?;
    Ok(ArmResult {
        arm: arm.to_string(),
        seed: cfg.seed,
        final_loss: outcome.last_loss,
        reports,
    })
}

/// Runs matched-budget training arms and compares them. Arms share the model,
/// schedule, batch size, step budget and seeds; only the task mix or header
/// format differs.
pub fn cmd_ablate(cfg: &RunConfig, part: AblationPart) -> Result<AblationReport> {
    let a = &cfg.ablate;
    if a.seeds.is_empty() {
        return Err(HarnessError::Usage("ablate.seeds is empty".into()));
    }
    let mut report = AblationReport::default();
    let s = &mut report.summary;
    if matches!(part, AblationPart::Srwt | AblationPart::All) {
        let with = [ToyTask::ToyASR, ToyTask::ToySRWT, ToyTask::ToyTranslate, ToyTask::ToyClassify];
        let without = [ToyTask::ToyASR, ToyTask::ToyTranslate, ToyTask::ToyClassify];
        for &seed in &a.seeds {
            let c = arm_config(cfg, "with-srwt", seed, &with, a.srwt_steps, HeaderFormat::Full, &[ToyTask::ToyASR, ToyTask::ToySRWT], Split::Heldout);
            let r = run_arm(&c, "with-srwt")?;
            s.asr_wer_with_srwt.push(r.metric("ToyASR", "wer").unwrap_or(f64::NAN));
            s.srwt_aas_ms.push(r.metric("ToySRWT", "aas_ms").unwrap_or(f64::NAN));
            report.arms.push(r);
            let c = arm_config(cfg, "without-srwt", seed, &without, a.srwt_steps, HeaderFormat::Full, &[ToyTask::ToyASR], Split::Heldout);
            let r = run_arm(&c, "without-srwt")?;
            s.asr_wer_without_srwt.push(r.metric("ToyASR", "wer").unwrap_or(f64::NAN));
            report.arms.push(r);
        }
        s.median_wer_with_srwt = median(&s.asr_wer_with_srwt);
        s.median_wer_without_srwt = median(&s.asr_wer_without_srwt);
        s.median_srwt_aas_ms = median(&s.srwt_aas_ms);
    }
    if matches!(part, AblationPart::Conflict | AblationPart::All) {
        let seed = a.seeds[0];
        let tasks = [ToyTask::ToyConflict];
        let c = arm_config(cfg, "tagged", seed, &tasks, a.conflict_steps, HeaderFormat::Full, &tasks, a.conflict_split);
        let r = run_arm(&c, "tagged")?;
        s.tagged_asr_accuracy = r.metric("ToyConflict/ASR", "accuracy");
        s.tagged_mna_accuracy = r.metric("ToyConflict/MNA", "accuracy");
        report.arms.push(r);
        let c = arm_config(cfg, "shared", seed, &tasks, a.conflict_steps, HeaderFormat::Shared, &tasks, a.conflict_split);
        let r = run_arm(&c, "shared")?;
        s.shared_asr_accuracy = r.metric("ToyConflict/ASR", "accuracy");
        s.shared_mna_accuracy = r.metric("ToyConflict/MNA", "accuracy");
        s.shared_mean_accuracy = s.shared_asr_accuracy.zip(s.shared_mna_accuracy).map(|(x, y)| 0.5 * (x + y));
        report.arms.push(r);
    }
    let dir = cfg.run_dir.join("ablate");
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let json = dir.join("report.json");
    std::fs::write(&json, serde_json::to_string_pretty(&report).expect("report serializes"))
        .map_err(|e| HarnessError::io(&json, e))?;
    let txt = dir.join("report.txt");
    std::fs::write(&txt, render_ablation(&report)).map_err(|e| HarnessError::io(&txt, e))?;
    Ok(report)
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}

pub fn render_ablation(report: &AblationReport) -> String {
    let mut out = format!("{:<14} {:>6} {:<18} {:<10} {:>10}\n", "arm", "seed", "task", "metric", "value");
    for arm in &report.arms {
        for r in &arm.reports {
            out.push_str(&format!(
                "{:<14} {:>6} {:<18} {:<10} {:>10}\n",
                arm.arm,
                arm.seed,
                r.task,
                r.metric,
                fmt(r.value)
            ));
        }
    }
    let s = &report.summary;
    out.push_str(&format!(
        "\nmedian held-out ToyASR WER: with SRWT {} / without SRWT {}\n",
        fmt(s.median_wer_with_srwt),
        fmt(s.median_wer_without_srwt)
    ));
    out.push_str(&format!("median ToySRWT alignment score: {} ms\n", fmt(s.median_srwt_aas_ms)));
    out.push_str(&format!(
        "conflict accuracy: tagged ASR {} MNA {} | shared ASR {} MNA {} mean {}\n",
        fmt(s.tagged_asr_accuracy),
        fmt(s.tagged_mna_accuracy),
        fmt(s.shared_asr_accuracy),
        fmt(s.shared_mna_accuracy),
        fmt(s.shared_mean_accuracy)
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
