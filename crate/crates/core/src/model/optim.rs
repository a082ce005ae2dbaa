use serde::{Deserialize, Serialize};

use super::network::{batch_gradient, GradNeeds};
use super::params::{Group, Parameters};
use super::real::Real;
use super::ModelError;
use crate::corpus::TrainingExample;

/// Which parameter group a step updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainStage {
    /// Encoder trains, decoder frozen.
    Pretrain,
    /// Decoder trains, encoder frozen.
    Finetune,
    /// Both groups train; for from-scratch runs that have no pretrained decoder.
    Joint,
}

impl TrainStage {
    pub fn trains(self, group: Group) -> bool {
        matches!(
            (self, group),
            (TrainStage::Joint, _) | (TrainStage::Pretrain, Group::Encoder) | (TrainStage::Finetune, Group::Decoder)
        )
    }

    fn needs(self) -> GradNeeds {
        GradNeeds {
            encoder: self.trains(Group::Encoder),
            decoder: true,
        }
    }
}

impl std::str::FromStr for TrainStage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pretrain" => Ok(TrainStage::Pretrain),
            "finetune" => Ok(TrainStage::Finetune),
            "joint" => Ok(TrainStage::Joint),
            other => Err(format!("unknown stage {other:?} (pretrain, finetune, joint)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-6,
            weight_decay: 0.05,
            clip_norm: 1.0,
        }
    }
}

/// Linear warmup to `peak`, then cosine decay to `min` at `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub peak: f64,
    pub min: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            peak: 3e-4,
            min: 3e-5,
            warmup_steps: 200,
            total_steps: 3000,
        }
    }
}

impl LrSchedule {
    /// Rate for 1-based step `step`.
    pub fn at(&self, step: u64) -> f64 {
        if step < self.warmup_steps {
            return self.peak * step as f64 / self.warmup_steps as f64;
        }
        if step >= self.total_steps || self.total_steps <= self.warmup_steps {
            return if step >= self.total_steps { self.min } else { self.peak };
        }
        let progress = (step - self.warmup_steps) as f64 / (self.total_steps - self.warmup_steps) as f64;
        self.min + 0.5 * (self.peak - self.min) * (1.0 + (std::f64::consts::PI * progress).cos())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub hyper: AdamWConfig,
    pub m: Parameters<T>,
    pub v: Parameters<T>,
    /// Completed steps.
    pub step: u64,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(params: &Parameters<T>, hyper: AdamWConfig) -> Self {
        Self {
            hyper,
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u64,
    pub lr: f64,
    pub loss: f64,
    /// Norm of the trainable gradient before clipping.
    pub grad_norm: f64,
}

/// Global L2 norm of the gradient restricted to `stage`'s trainable group.
pub fn grad_norm<T: Real>(grads: &Parameters<T>, stage: TrainStage) -> f64 {
    grads
        .tensors()
        .iter()
        .filter(|t| stage.trains(t.group()))
        .flat_map(|t| t.data.iter())
        .map(|v| v.as_f64() * v.as_f64())
        .sum::<f64>()
        .sqrt()
}

/// Clips `grads` to the configured norm and applies one decoupled-weight-decay
/// Adam update to the trainable group. Weight decay touches matrices only.
pub fn apply_update<T: Real>(
    params: &mut Parameters<T>,
    opt: &mut OptimizerState<T>,
    grads: &Parameters<T>,
    stage: TrainStage,
    lr: f64,
) -> f64 {
    let h = opt.hyper;
    let norm = grad_norm(grads, stage);
    let clip = if norm > h.clip_norm { h.clip_norm / norm } else { 1.0 };
    opt.step += 1;
    let t = opt.step as i32;
    let bc1 = 1.0 - h.beta1.powi(t);
    let bc2 = 1.0 - h.beta2.powi(t);
    let (b1, b2) = (T::of(h.beta1), T::of(h.beta2));
    let (one_b1, one_b2) = (T::of(1.0 - h.beta1), T::of(1.0 - h.beta2));
    let clip = T::of(clip);
    let step_size = T::of(lr / bc1);
    let inv_bc2 = T::of(1.0 / bc2);
    let eps = T::of(h.eps);
    let tensors = params
        .tensors_mut()
        .into_iter()
        .zip(opt.m.tensors_mut())
        .zip(opt.v.tensors_mut())
        .zip(grads.tensors());
    for (((p, m), v), g) in tensors {
        if !stage.trains(p.group()) {
            continue;
        }
        let decay = if p.shape.len() >= 2 { T::of(1.0 - lr * h.weight_decay) } else { T::one() };
        for (((pv, mv), vv), &gv) in p.data.iter_mut().zip(m.data.iter_mut()).zip(v.data.iter_mut()).zip(g.data) {
            let g = gv * clip;
            *mv = b1 * *mv + one_b1 * g;
            *vv = b2 * *vv + one_b2 * g * g;
            *pv = *pv * decay - step_size * *mv / ((*vv * inv_bc2).sqrt() + eps);
        }
    }
    norm
}

/// One optimizer step on `batch`. On a non-finite loss or gradient nothing is
/// modified.
pub fn train_step<T: Real>(
    params: &mut Parameters<T>,
    opt: &mut OptimizerState<T>,
    batch: &[TrainingExample],
    stage: TrainStage,
    schedule: &LrSchedule,
) -> Result<StepReport, ModelError> {
    let (loss, grads) = batch_gradient(params, batch, stage.needs())?;
    let step = opt.step + 1;
    let norm = grad_norm(&grads, stage);
    if !loss.is_finite() || !norm.is_finite() {
        return Err(ModelError::DivergenceDetected { step });
    }
    let lr = schedule.at(step);
    apply_update(params, opt, &grads, stage, lr);
    Ok(StepReport {
        step,
        lr,
        loss,
        grad_norm: norm,
    })
}
