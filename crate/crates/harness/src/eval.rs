use std::path::Path;

use audiomt_core::corpus::{header_tokens, HeaderFormat, Split, TaskCode, ToyTask};
use audiomt_core::grammar::{SpecialTag, Vocabulary};
use audiomt_core::metrics::{accuracy, bleu, corpus_wer, wer, EvalReport, ItemScore};
use audiomt_core::model::{
    continuation_logprob, generated_body, greedy_continue, load_checkpoint, Parameters, Real,
};
use audiomt_core::srwt::{alignment_score, decode_timed, TimedTranscript};
use audiomt_core::TokenId;

use crate::config::{Precision, RunConfig};
use crate::data::{load_task, load_vocabulary, TaskData};
use crate::error::{HarnessError, Result};

/// Evaluation settings that vary between runs of the same model.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPlan {
    pub tasks: Vec<ToyTask>,
    pub split: Split,
    pub limit: Option<usize>,
    pub max_new_tokens: usize,
    pub header_format: HeaderFormat,
    pub items: bool,
}

impl EvalPlan {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            tasks: cfg.eval.tasks.clone(),
            split: cfg.eval.split,
            limit: cfg.eval.limit,
            max_new_tokens: cfg.eval.max_new_tokens,
            header_format: cfg.train.header_format,
            items: cfg.eval.items,
        }
    }
}

/// Evaluates a checkpoint on the configured tasks and writes `eval.json` and
/// `eval.txt` next to it in the run directory.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: &Path) -> Result<Vec<EvalReport>> {
    let vocab = load_vocabulary(cfg)?;
    let plan = EvalPlan::from_config(cfg);
    let reports = match cfg.train.precision {
        Precision::F64 => evaluate(&load_checkpoint::<f64>(checkpoint)?.0, &vocab, cfg, &plan)?,
        Precision::F32 => evaluate(&load_checkpoint::<f32>(checkpoint)?.0, &vocab, cfg, &plan)?,
    };
    std::fs::create_dir_all(&cfg.run_dir).map_err(|e| HarnessError::io(&cfg.run_dir, e))?;
    let json = cfg.run_dir.join("eval.json");
    std::fs::write(&json, serde_json::to_string_pretty(&reports).expect("reports serialize"))
        .map_err(|e| HarnessError::io(&json, e))?;
    let txt = cfg.run_dir.join("eval.txt");
    std::fs::write(&txt, audiomt_core::metrics::render_table(&reports)).map_err(|e| HarnessError::io(&txt, e))?;
    Ok(reports)
}

pub fn evaluate<T: Real>(
    params: &Parameters<T>,
    vocab: &Vocabulary,
    cfg: &RunConfig,
    plan: &EvalPlan,
) -> Result<Vec<EvalReport>> {
    let mut out = Vec::new();
    for &task in &plan.tasks {
        let data = load_task(cfg, task, plan.split, plan.limit, vocab, plan.header_format)?;
        if data.records.is_empty() {
            return Err(HarnessError::Data(format!("{task} {} manifest is empty", plan.split.name())));
        }
        out.extend(evaluate_task(params, vocab, &data, plan)?);
    }
    Ok(out)
}

/// Text of the text tokens in `body`; other tokens are dropped.
pub fn body_text(vocab: &Vocabulary, body: &[TokenId]) -> String {
    let text: Vec<TokenId> = body.iter().copied().filter(|&t| vocab.is_text(t)).collect();
    vocab.decode_text(&text).expect("text tokens decode")
}

fn decode_body<T: Real>(
    params: &Parameters<T>,
    vocab: &Vocabulary,
    data: &TaskData,
    i: usize,
    plan: &EvalPlan,
) -> Result<Vec<TokenId>> {
    let prefix = header_tokens(&data.records[i], vocab, plan.header_format)?;
    let eot = vocab.special(SpecialTag::EndOfText);
    let out = greedy_continue(params, &data.examples[i].features, &prefix, plan.max_new_tokens, eot)?;
    Ok(generated_body(&out, prefix.len(), vocab))
}

fn report(task: String, metric: &str, value: Option<f64>, support: usize, items: Option<Vec<ItemScore>>) -> EvalReport {
    EvalReport {
        task,
        metric: metric.to_string(),
        value,
        support,
        items,
    }
}

fn evaluate_task<T: Real>(
    params: &Parameters<T>,
    vocab: &Vocabulary,
    data: &TaskData,
    plan: &EvalPlan,
) -> Result<Vec<EvalReport>> {
    let n = data.records.len();
    let ids: Vec<String> = data.records.iter().map(|r| r.audio_path.clone()).collect();
    let items = |values: Vec<f64>| {
        plan.items
            .then(|| ids.iter().zip(values).map(|(id, value)| ItemScore { id: id.clone(), value }).collect())
    };
    let name = data.task.to_string();
    match data.task {
        ToyTask::ToyASR | ToyTask::ToyTranslate => {
            let mut hyps = Vec::with_capacity(n);
            for i in 0..n {
                hyps.push(body_text(vocab, &decode_body(params, vocab, data, i, plan)?));
            }
            let refs: Vec<String> = data.records.iter().map(|r| r.target.clone()).collect();
            if data.task == ToyTask::ToyASR {
                let per: Vec<f64> = hyps.iter().zip(&refs).map(|(h, r)| wer(h, r).unwrap_or(f64::NAN)).collect();
                Ok(vec![report(name, "wer", Some(corpus_wer(&hyps, &refs)?), n, items(per))])
            } else {
                let per: Vec<f64> = hyps
                    .iter()
                    .zip(&refs)
                    .map(|(h, r)| bleu(&[h], &[r]).unwrap_or(f64::NAN))
                    .collect();
                Ok(vec![report(name, "bleu", Some(bleu(&hyps, &refs)?), n, items(per))])
            }
        }
        ToyTask::ToySRWT => {
            let mut hyps = Vec::with_capacity(n);
            let mut refs = Vec::with_capacity(n);
            let mut total_ms = 0.0;
            let mut boundaries = 0usize;
            let mut per = Vec::with_capacity(n);
            for i in 0..n {
                let body = decode_body(params, vocab, data, i, plan)?;
                let pred = decode_timed(&body, vocab).unwrap_or_else(|_| TimedTranscript::default());
                let reference = data.records[i].timed_target.clone().expect("SRWT records carry timings");
                match alignment_score(&pred, &reference) {
                    Ok(a) => {
                        total_ms += a.mean_ms * (2 * a.matched) as f64;
                        boundaries += 2 * a.matched;
                        per.push(a.mean_ms);
                    }
                    Err(_) => per.push(f64::NAN),
                }
                hyps.push(pred.text());
                refs.push(reference.text());
            }
            let aas = (boundaries > 0).then(|| total_ms / boundaries as f64);
            Ok(vec![
                report(name.clone(), "aas_ms", aas, n, items(per)),
                report(name, "wer", Some(corpus_wer(&hyps, &refs)?), n, None),
            ])
        }
        ToyTask::ToyClassify => {
            let mut labels: Vec<String> = data.records.iter().map(|r| r.target.clone()).collect();
            labels.sort();
            labels.dedup();
            let eot = vocab.special(SpecialTag::EndOfText);
            let candidates: Vec<Vec<TokenId>> = labels
                .iter()
                .map(|l| {
                    let mut c = vocab.encode_text(l);
                    c.push(eot);
                    c
                })
                .collect();
            let mut preds = Vec::with_capacity(n);
            for i in 0..n {
                let prefix = header_tokens(&data.records[i], vocab, plan.header_format)?;
                let mut best = (f64::NEG_INFINITY, 0);
                for (k, c) in candidates.iter().enumerate() {
                    let lp = continuation_logprob(params, &data.examples[i].features, &prefix, c)?;
                    if lp > best.0 {
                        best = (lp, k);
                    }
                }
                preds.push(labels[best.1].clone());
            }
            let refs: Vec<String> = data.records.iter().map(|r| r.target.clone()).collect();
            let per = preds.iter().zip(&refs).map(|(p, r)| (p == r) as u8 as f64).collect();
            Ok(vec![report(name, "accuracy", Some(accuracy(&preds, &refs)?), n, items(per))])
        }
        ToyTask::ToyConflict => {
            let mut by_code: Vec<(TaskCode, Vec<String>, Vec<String>)> = Vec::new();
            for i in 0..n {
                let hyp = body_text(vocab, &decode_body(params, vocab, data, i, plan)?);
                let r = &data.records[i];
                match by_code.iter_mut().find(|(c, _, _)| *c == r.task_type) {
                    Some((_, h, t)) => {
                        h.push(hyp);
                        t.push(r.target.clone());
                    }
                    None => by_code.push((r.task_type, vec![hyp], vec![r.target.clone()])),
                }
            }
            by_code
                .into_iter()
                .map(|(code, hyps, refs)| {
                    Ok(report(format!("{name}/{code}"), "accuracy", Some(accuracy(&hyps, &refs)?), hyps.len(), None))
                })
                .collect()
        }
    }
}
