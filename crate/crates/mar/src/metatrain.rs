//! Meta-learned reweighting of weak supervision.
//!
//! Each training step pseudo-updates the scorer with zero-initialized
//! per-example weights, measures how the target-batch loss would react to
//! each weight, clips and batch-normalizes the resulting raw weights, and
//! only then applies the real optimizer to the weighted synthetic loss.
//!
//! With weights initialized to zero the pseudo-update leaves the parameters
//! at theta, so the derivative of the mean target loss in w_j collapses to
//! `-alpha * g_j . g_bar`: the alignment between the example's gradient and
//! the mean target gradient. No second-order term survives for a one-step
//! vanilla-SGD inner loop, which is what `meta_backward` exploits; the
//! general path lives only in the finite-difference oracle.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranker::{grad, pairwise_loss, Gradient, PairExample, RankerParams};
use crate::rng::{seeded, stream};

/// The optimizer applied to the actual (weighted) update. The meta-forward
/// pseudo-update always uses vanilla SGD regardless of this choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Meta-forward (pseudo-update) learning rate.
    pub alpha: f64,
    /// Weight learning rate; normalization cancels it, kept for oracle
    /// comparisons.
    pub eta: f64,
    /// Synthetic batch size n.
    pub batch_synth: usize,
    /// Target batch size m.
    pub batch_target: usize,
    pub steps: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.1,
            eta: 1.0,
            batch_synth: 8,
            batch_target: 8,
            steps: 500,
            optimizer: Optimizer::Sgd { lr: 1.5e-4 },
            seed: 42,
        }
    }
}

/// Per-example weights of one synthetic batch through the raw -> clipped ->
/// normalized lifecycle.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub raw: Vec<f64>,
    pub clipped: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl WeightVector {
    pub fn from_raw(raw: Vec<f64>) -> Self {
        let clipped: Vec<f64> = raw.iter().map(|&w| w.max(0.0)).collect();
        let sum: f64 = clipped.iter().sum();
        // The delta guard: an all-clipped batch divides by 1 and stays zero
        // instead of dividing by zero.
        let denom = if sum == 0.0 { 1.0 } else { sum };
        let normalized = clipped.iter().map(|&w| w / denom).collect();
        WeightVector {
            raw,
            clipped,
            normalized,
        }
    }
}

/// Clip raw weights at zero and normalize them to the batch sum; an
/// all-nonpositive batch maps to all zeros.
pub fn normalize_weights(raw: &[f64]) -> Vec<f64> {
    WeightVector::from_raw(raw.to_vec()).normalized
}

/// One-step weighted pseudo-update: theta - alpha * sum_j w_j g_j. Vanilla
/// SGD by construction, whatever the actual optimizer is.
pub fn meta_forward(
    params: &RankerParams,
    grads: &[Gradient],
    weights: &[f64],
    alpha: f64,
) -> Result<RankerParams> {
    if grads.len() != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} gradients vs {} weights",
            grads.len(),
            weights.len()
        )));
    }
    let mut updated = params.clone();
    let theta = updated.theta_mut();
    for (g, &w) in grads.iter().zip(weights) {
        if g.as_slice().len() != theta.len() {
            return Err(Error::ShapeMismatch(format!(
                "gradient of length {} vs {} parameters",
                g.as_slice().len(),
                theta.len()
            )));
        }
        if w == 0.0 {
            continue;
        }
        for (t, gk) in theta.iter_mut().zip(g.as_slice()) {
            *t -= alpha * w * gk;
        }
    }
    Ok(updated)
}

/// Raw meta-weights for a synthetic batch: w~_j = eta * alpha * (g_j . g_bar)
/// where g_bar is the mean target-batch gradient, everything evaluated at
/// the current parameters.
pub fn meta_backward(
    params: &RankerParams,
    synth_batch: &[PairExample],
    target_batch: &[PairExample],
    alpha: f64,
    eta: f64,
) -> Result<Vec<f64>> {
    if synth_batch.is_empty() || target_batch.is_empty() {
        return Err(Error::InvalidArgument(
            "meta_backward requires non-empty synthetic and target batches".into(),
        ));
    }
    let target_mean = mean_gradient(params, target_batch);
    Ok(synth_batch
        .iter()
        .map(|ex| eta * alpha * grad(params, ex).dot(&target_mean))
        .collect())
}

/// Central-difference estimate of d(mean target loss)/d w_j at w = 0: the
/// independent oracle for `meta_backward` (which should equal -eta times
/// this vector).
pub fn meta_grad_fd(
    params: &RankerParams,
    synth_batch: &[PairExample],
    target_batch: &[PairExample],
    alpha: f64,
    eps: f64,
) -> Vec<f64> {
    let grads: Vec<Gradient> = synth_batch.iter().map(|ex| grad(params, ex)).collect();
    let mut weights = vec![0.0; synth_batch.len()];
    let mut out = Vec::with_capacity(synth_batch.len());
    for j in 0..synth_batch.len() {
        weights[j] = eps;
        let up = target_mean_loss(
            &meta_forward(params, &grads, &weights, alpha).expect("shapes fixed"),
            target_batch,
        );
        weights[j] = -eps;
        let down = target_mean_loss(
            &meta_forward(params, &grads, &weights, alpha).expect("shapes fixed"),
            target_batch,
        );
        weights[j] = 0.0;
        out.push((up - down) / (2.0 * eps));
    }
    out
}

fn target_mean_loss(params: &RankerParams, batch: &[PairExample]) -> f64 {
    batch
        .iter()
        .map(|ex| pairwise_loss(params, ex))
        .sum::<f64>()
        / batch.len() as f64
}

fn mean_gradient(params: &RankerParams, batch: &[PairExample]) -> Gradient {
    let mut acc = vec![0.0; params.len()];
    for ex in batch {
        let g = grad(params, ex);
        for (a, gk) in acc.iter_mut().zip(g.as_slice()) {
            *a += gk;
        }
    }
    let m = batch.len() as f64;
    for a in &mut acc {
        *a /= m;
    }
    Gradient(acc)
}

/// Adam moment vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// Summary statistics of one batch's normalized weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSummary {
    pub step: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub frac_zero: f64,
}

impl WeightSummary {
    fn of(step: usize, weights: &[f64]) -> Self {
        let n = weights.len() as f64;
        let mean = weights.iter().sum::<f64>() / n;
        let var = weights.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / n;
        WeightSummary {
            step,
            mean,
            std: var.sqrt(),
            min: weights.iter().copied().fold(f64::INFINITY, f64::min),
            max: weights.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            frac_zero: weights.iter().filter(|&&w| w == 0.0).count() as f64 / n,
        }
    }
}

/// Mutable training state: parameters, step counter, optimizer moments and
/// the per-step weight log.
#[derive(Debug, Clone)]
pub struct TrainerState {
    pub params: RankerParams,
    pub step: usize,
    adam: Option<AdamState>,
    pub weight_log: Vec<WeightSummary>,
}

impl TrainerState {
    pub fn new(params: RankerParams) -> Self {
        TrainerState {
            params,
            step: 0,
            adam: None,
            weight_log: Vec::new(),
        }
    }

    pub fn adam_state(&self) -> Option<&AdamState> {
        self.adam.as_ref()
    }

    pub fn restore_adam(&mut self, state: AdamState) {
        self.adam = Some(state);
    }

    /// Apply the configured optimizer to an aggregate gradient.
    fn apply(&mut self, optimizer: Optimizer, grad: &[f64]) {
        match optimizer {
            Optimizer::Sgd { lr } => {
                for (t, g) in self.params.theta_mut().iter_mut().zip(grad) {
                    *t -= lr * g;
                }
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                let n = self.params.len();
                let state = self.adam.get_or_insert_with(|| AdamState::new(n));
                state.t += 1;
                let bias1 = 1.0 - beta1.powi(state.t as i32);
                let bias2 = 1.0 - beta2.powi(state.t as i32);
                let theta = self.params.theta_mut();
                for k in 0..n {
                    state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * grad[k];
                    state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * grad[k] * grad[k];
                    let m_hat = state.m[k] / bias1;
                    let v_hat = state.v[k] / bias2;
                    theta[k] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
}

/// One meta-reweighted step. Returns the normalized weights so callers can
/// attribute them back to individual synthetic examples.
pub fn train_step(
    config: &TrainConfig,
    state: &mut TrainerState,
    synth_batch: &[PairExample],
    target_batch: &[PairExample],
) -> Result<Vec<f64>> {
    let raw = meta_backward(
        &state.params,
        synth_batch,
        target_batch,
        config.alpha,
        config.eta,
    )?;
    let weights = WeightVector::from_raw(raw);
    let w = &weights.normalized;
    state.weight_log.push(WeightSummary::of(state.step, w));

    // A fully clipped batch is noise to be ignored: skip the update rather
    // than feeding a zero gradient into the optimizer.
    if w.iter().sum::<f64>() > 0.0 {
        let aggregate = weighted_gradient(&state.params, synth_batch, w);
        state.apply(config.optimizer, &aggregate);
    }
    state.step += 1;
    Ok(weights.normalized)
}

/// One uniform-weight step (the no-meta ablation): every example gets 1/n.
pub fn train_uniform(
    config: &TrainConfig,
    state: &mut TrainerState,
    synth_batch: &[PairExample],
) -> Result<()> {
    if synth_batch.is_empty() {
        return Err(Error::InvalidArgument(
            "train_uniform requires a non-empty batch".into(),
        ));
    }
    let w = vec![1.0 / synth_batch.len() as f64; synth_batch.len()];
    state.weight_log.push(WeightSummary::of(state.step, &w));
    let aggregate = weighted_gradient(&state.params, synth_batch, &w);
    state.apply(config.optimizer, &aggregate);
    state.step += 1;
    Ok(())
}

fn weighted_gradient(params: &RankerParams, batch: &[PairExample], weights: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; params.len()];
    for (ex, &w) in batch.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let g = grad(params, ex);
        for (a, gk) in acc.iter_mut().zip(g.as_slice()) {
            *a += w * gk;
        }
    }
    acc
}

/// Cycles indices 0..len in seeded epoch-wise shuffles; batches may straddle
/// an epoch boundary.
struct BatchCycler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha20Rng,
}

impl BatchCycler {
    fn new(len: usize, seed: u64, stream_id: u64) -> Self {
        let mut cycler = BatchCycler {
            order: (0..len).collect(),
            pos: 0,
            rng: seeded(seed, stream_id),
        };
        cycler.order.shuffle(&mut cycler.rng);
        cycler
    }

    fn take(&mut self, k: usize) -> Vec<usize> {
        let mut batch = Vec::with_capacity(k);
        for _ in 0..k {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            batch.push(self.order[self.pos]);
            self.pos += 1;
        }
        batch
    }
}

/// Whether training reweights batches against target data or applies
/// uniform weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Meta,
    Uniform,
}

/// A finished training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: TrainerState,
    /// Last normalized weight each synthetic example received; examples the
    /// batch sequence never visited stay `None`. Uniform runs leave this
    /// empty.
    pub final_weights: Vec<Option<f64>>,
}

/// Drive `steps` training steps with seeded epoch-shuffled batch sequencing.
pub fn run_training(
    config: &TrainConfig,
    init: RankerParams,
    synth: &[PairExample],
    target: &[PairExample],
    mode: TrainMode,
) -> Result<TrainOutcome> {
    if synth.is_empty() {
        return Err(Error::InvalidArgument(
            "training requires at least one synthetic example".into(),
        ));
    }
    if mode == TrainMode::Meta && target.is_empty() {
        return Err(Error::InvalidArgument(
            "meta training requires at least one target example".into(),
        ));
    }
    let mut state = TrainerState::new(init);
    let mut synth_cycler = BatchCycler::new(synth.len(), config.seed, stream::SYNTH_BATCHES);
    let mut target_cycler =
        BatchCycler::new(target.len().max(1), config.seed, stream::TARGET_BATCHES);
    let mut final_weights = vec![None; synth.len()];

    for _ in 0..config.steps {
        let synth_idx = synth_cycler.take(config.batch_synth);
        let synth_batch: Vec<PairExample> = synth_idx.iter().map(|&i| synth[i]).collect();
        match mode {
            TrainMode::Meta => {
                let target_idx = target_cycler.take(config.batch_target);
                let target_batch: Vec<PairExample> =
                    target_idx.iter().map(|&i| target[i]).collect();
                let weights = train_step(config, &mut state, &synth_batch, &target_batch)?;
                for (&i, &w) in synth_idx.iter().zip(&weights) {
                    final_weights[i] = Some(w);
                }
            }
            TrainMode::Uniform => {
                train_uniform(config, &mut state, &synth_batch)?;
            }
        }
    }
    if mode == TrainMode::Uniform {
        final_weights.clear();
    }
    Ok(TrainOutcome {
        state,
        final_weights,
    })
}
