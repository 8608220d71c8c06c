use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::mlp::{log_softmax, softmax, MlpParams};
use super::problem::{architecture, TestbedProblem};
use crate::metrics::PredictiveModel;
use crate::numkit::{Generator, RngStream};
use crate::{EnsembleFamily, Error, Result};

/// One ensemble member: logits `g_θ(x) + s · p(x)` with a trainable network
/// `g_θ`, a frozen prior network `p` and per-row loss weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierMember {
    pub trainable: MlpParams,
    prior: MlpParams,
    prior_scale: f64,
    data_weights: Vec<f64>,
}

impl ClassifierMember {
    pub fn new(trainable: MlpParams, prior: MlpParams, prior_scale: f64, data_weights: Vec<f64>) -> Result<Self> {
        if trainable.dims() != prior.dims() {
            return Err(Error::InvalidArgument("trainable and prior networks must share a shape".into()));
        }
        if !(prior_scale >= 0.0 && prior_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("prior scale must be nonnegative, got {prior_scale}")));
        }
        if data_weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument("data weights must be nonnegative".into()));
        }
        Ok(ClassifierMember { trainable, prior, prior_scale, data_weights })
    }

    pub fn prior(&self) -> &MlpParams {
        &self.prior
    }

    pub fn prior_scale(&self) -> f64 {
        self.prior_scale
    }

    pub fn data_weights(&self) -> &[f64] {
        &self.data_weights
    }

    fn prior_logits(&self, x: &[f64]) -> Option<Vec<f64>> {
        (self.prior_scale != 0.0).then(|| self.prior.logits(x).into_iter().map(|v| self.prior_scale * v).collect())
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.trainable.logits(x);
        if let Some(p) = self.prior_logits(x) {
            out.iter_mut().zip(p).for_each(|(o, v)| *o += v);
        }
        out
    }

    /// Class probabilities `softmax(g_θ(x) + s · p(x))`.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }
}

impl PredictiveModel for ClassifierMember {
    fn num_classes(&self) -> usize {
        self.trainable.output_dim()
    }

    fn class_probabilities(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x)
    }
}

/// Rows of a labelled dataset selected for one gradient step.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub inputs: &'a [Vec<f64>],
    pub labels: &'a [usize],
    pub rows: &'a [usize],
}

/// Weighted cross-entropy over the batch plus `λ‖θ‖²`, and its gradient
/// with respect to the trainable network only.
pub fn loss_and_gradient(member: &ClassifierMember, batch: Batch<'_>, weight_decay: f64) -> Result<(f64, MlpParams)> {
    check_batch(member, batch)?;
    let mut grad = MlpParams::zeros(&member.trainable.dims())?;
    let loss = accumulate(member, batch, None, 1.0, weight_decay, &mut grad);
    Ok((loss, grad))
}

fn check_batch(member: &ClassifierMember, batch: Batch<'_>) -> Result<()> {
    if batch.rows.is_empty() {
        return Err(Error::InvalidArgument("batch is empty".into()));
    }
    if batch.inputs.len() != batch.labels.len() {
        return Err(Error::DimensionMismatch { expected: batch.inputs.len(), found: batch.labels.len() });
    }
    if member.data_weights.len() != batch.labels.len() {
        return Err(Error::DimensionMismatch { expected: batch.labels.len(), found: member.data_weights.len() });
    }
    let classes = member.num_classes();
    let dim = member.trainable.input_dim();
    for &r in batch.rows {
        if r >= batch.labels.len() {
            return Err(Error::InvalidArgument(format!("row {r} out of range")));
        }
        if batch.labels[r] >= classes {
            return Err(Error::InvalidArgument(format!("label {} out of range", batch.labels[r])));
        }
        if batch.inputs[r].len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: batch.inputs[r].len() });
        }
    }
    Ok(())
}

/// Adds the gradient of `data_scale · Σ W CE + reg_scale · ‖θ‖²` to `grad`
/// and returns that objective. `prior_logits` caches `s · p(x)` per row.
fn accumulate(
    member: &ClassifierMember,
    batch: Batch<'_>,
    prior_logits: Option<&[Vec<f64>]>,
    data_scale: f64,
    reg_scale: f64,
    grad: &mut MlpParams,
) -> f64 {
    let mut data_loss = 0.0;
    for &r in batch.rows {
        let w = member.data_weights[r];
        if w == 0.0 {
            continue;
        }
        let x = &batch.inputs[r];
        let trace = member.trainable.forward_trace(x);
        let mut logits = trace.logits().to_vec();
        let offset = match prior_logits {
            Some(cache) => (member.prior_scale != 0.0).then(|| cache[r].clone()),
            None => member.prior_logits(x),
        };
        if let Some(p) = offset {
            logits.iter_mut().zip(p).for_each(|(l, v)| *l += v);
        }
        let log_probs = log_softmax(&logits);
        let y = batch.labels[r];
        data_loss -= w * log_probs[y];
        let mut dlogits: Vec<f64> = log_probs.iter().map(|lp| data_scale * w * lp.exp()).collect();
        dlogits[y] -= data_scale * w;
        member.trainable.backprop(&trace, &dlogits, grad);
    }
    if reg_scale != 0.0 {
        grad.axpy(2.0 * reg_scale, &member.trainable);
    }
    data_scale * data_loss + reg_scale * member.trainable.squared_norm()
}

/// How per-row loss weights are drawn for bootstrapped members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BootstrapMode {
    /// Every weight is 1.
    None,
    /// `Bernoulli(p)/p`.
    Bernoulli { p: f64 },
    /// `2 × Bernoulli(0.5)`.
    DoubleHalf,
}

impl BootstrapMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            BootstrapMode::Bernoulli { p } if !(*p > 0.0 && *p <= 1.0) => {
                Err(Error::InvalidArgument(format!("bootstrap probability must be in (0, 1], got {p}")))
            }
            _ => Ok(()),
        }
    }

    pub fn sample_weights(&self, n: usize, g: &mut Generator) -> Vec<f64> {
        let (p, value) = match *self {
            BootstrapMode::None => return vec![1.0; n],
            BootstrapMode::Bernoulli { p } => (p, 1.0 / p),
            BootstrapMode::DoubleHalf => (0.5, 2.0),
        };
        (0..n).map(|_| if g.random::<f64>() < p { value } else { 0.0 }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Constant,
    /// Divide by 10 after half the epochs, by 100 after three quarters and
    /// by 1000 after seven eighths.
    StepDecay,
}

impl LrSchedule {
    pub fn factor(&self, epoch: usize, epochs: usize) -> f64 {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::StepDecay => {
                let frac = epoch as f64 / epochs.max(1) as f64;
                if frac < 0.5 {
                    1.0
                } else if frac < 0.75 {
                    0.1
                } else if frac < 0.875 {
                    0.01
                } else {
                    0.001
                }
            }
        }
    }
}

/// Training hyperparameters. `weight_decay` is the `λ` of the full-data
/// loss; each step descends on the batch mean plus `λ‖θ‖²/T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub weight_decay: f64,
    pub prior_scale: f64,
    pub learning_rate: f64,
    pub schedule: LrSchedule,
    pub epochs: usize,
    pub batch_size: usize,
    pub bootstrap: BootstrapMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            weight_decay: 1.0,
            prior_scale: 1.0,
            learning_rate: 0.05,
            schedule: LrSchedule::StepDecay,
            epochs: 200,
            batch_size: 32,
            bootstrap: BootstrapMode::DoubleHalf,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        if !nonneg(self.weight_decay) || !nonneg(self.prior_scale) {
            return Err(Error::InvalidArgument("weight decay and prior scale must be nonnegative".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        self.bootstrap.validate()
    }
}

/// Builds and trains one member from `stream`: initialization, prior,
/// bootstrap weights and shuffling each use their own substream.
pub fn train_member(
    problem: &TestbedProblem,
    family: EnsembleFamily,
    config: &TrainConfig,
    stream: RngStream,
) -> Result<ClassifierMember> {
    config.validate()?;
    let dims = architecture(problem.input_dim(), problem.num_classes());
    let trainable = MlpParams::fan_in_uniform(&dims, &mut stream.derive(1).generator())?;
    let prior = MlpParams::gaussian(&dims, &mut stream.derive(2).generator())?;
    let prior_scale = if family.uses_prior() { config.prior_scale } else { 0.0 };
    let n = problem.train_size();
    let weights = if family.uses_bootstrap() {
        config.bootstrap.sample_weights(n, &mut stream.derive(3).generator())
    } else {
        vec![1.0; n]
    };
    let mut member = ClassifierMember::new(trainable, prior, prior_scale, weights)?;
    if n == 0 {
        return Ok(member);
    }

    let prior_cache: Vec<Vec<f64>> =
        problem.inputs.iter().map(|x| member.prior_logits(x).unwrap_or_default()).collect();
    let mut shuffle = stream.derive(4).generator();
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = MlpParams::zeros(&dims)?;
    let reg_scale = config.weight_decay / n as f64;
    for epoch in 0..config.epochs {
        let lr = config.learning_rate * config.schedule.factor(epoch, config.epochs);
        order.shuffle(&mut shuffle);
        for rows in order.chunks(config.batch_size) {
            grad.fill(0.0);
            let batch = Batch { inputs: &problem.inputs, labels: &problem.labels, rows };
            accumulate(&member, batch, Some(&prior_cache), 1.0 / rows.len() as f64, reg_scale, &mut grad);
            member.trainable.axpy(-lr, &grad);
        }
    }
    if !member.trainable.is_finite() {
        return Err(Error::InvalidArgument("training diverged".into()));
    }
    Ok(member)
}

/// Trains `m` independent members; member `i` uses `rng.derive(i)`.
pub fn train_ensemble(
    problem: &TestbedProblem,
    m: usize,
    family: EnsembleFamily,
    config: &TrainConfig,
    rng: RngStream,
) -> Result<Vec<ClassifierMember>> {
    if m == 0 {
        return Err(Error::InvalidArgument("ensemble needs at least one member".into()));
    }
    (0..m).into_par_iter().map(|i| train_member(problem, family, config, rng.derive(i as u64))).collect()
}
