//! Training loop (Adam + categorical cross-entropy), evaluation, and
//! single-sample latency measurement.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{FeatureSet, Grads, ModelState, SampleInput, NUM_CLASSES};
use super::Scalar;
use crate::{Error, Result};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Early exit: stop after this many consecutive epochs without the
    /// validation loss improving by at least `convergence_threshold`.
    pub convergence_window: usize,
    pub convergence_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 50,
            batch_size: 64,
            seed: 0,
            convergence_window: 3,
            convergence_threshold: 1e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Domain("learning rate must be > 0".into()));
        }
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::Domain("epochs and batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// Accuracy plus the 5x5 confusion matrix (rows = true label, columns =
/// predicted).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub mean_loss: f64,
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
    pub samples: usize,
}

impl EvalReport {
    pub fn per_class_accuracy(&self) -> [f64; NUM_CLASSES] {
        let mut out = [0.0; NUM_CLASSES];
        for (k, row) in self.confusion.iter().enumerate() {
            let total: usize = row.iter().sum();
            if total > 0 {
                out[k] = row[k] as f64 / total as f64;
            }
        }
        out
    }
}

/// One Adam update with bias correction. Deterministic given inputs; the
/// step counter lives in the state.
pub fn adam_step<F: Scalar>(state: &mut ModelState<F>, grads: &Grads<F>, learning_rate: f64) {
    state.step += 1;
    let t = state.step as f64;
    let b1 = F::from_f64(ADAM_BETA1);
    let b2 = F::from_f64(ADAM_BETA2);
    let one_minus_b1 = F::from_f64(1.0 - ADAM_BETA1);
    let one_minus_b2 = F::from_f64(1.0 - ADAM_BETA2);
    let eps = F::from_f64(ADAM_EPS);
    let corr1 = F::from_f64(1.0 - ADAM_BETA1.powf(t));
    let corr2 = F::from_f64(1.0 - ADAM_BETA2.powf(t));
    let lr = F::from_f64(learning_rate);

    // Split borrows: moments move out temporarily.
    let mut m_bufs = std::mem::take(&mut state.adam_m);
    let mut v_bufs = std::mem::take(&mut state.adam_v);
    {
        let params = state.param_slices_mut();
        for (((p, g), m), v) in params
            .into_iter()
            .zip(&grads.bufs)
            .zip(m_bufs.iter_mut())
            .zip(v_bufs.iter_mut())
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + one_minus_b1 * gi;
                v[i] = b2 * v[i] + one_minus_b2 * gi * gi;
                let m_hat = m[i] / corr1;
                let v_hat = v[i] / corr2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
    state.adam_m = m_bufs;
    state.adam_v = v_bufs;
}

fn argmax<F: Scalar>(xs: &[F]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

fn sample_loss<F: Scalar>(probs: &[F], label: u8) -> f64 {
    let p = probs[label as usize].to_f64().clamp(1e-12, 1.0);
    -p.ln()
}

/// Trains in place; returns per-epoch history. Deterministic given the
/// config seed: shuffling, batching and gradient reduction all follow a
/// fixed order.
pub fn train<F: Scalar>(
    state: &mut ModelState<F>,
    train_set: &FeatureSet<F>,
    val_set: &FeatureSet<F>,
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut stale_epochs = 0usize;

    let mut indices: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut correct = 0usize;
        for batch in indices.chunks(cfg.batch_size) {
            let mut acc = Grads::zeros_like(state);
            for &idx in batch {
                let cache = state.forward(&train_set.inputs[idx])?;
                let label = train_set.labels[idx];
                let loss = sample_loss(&cache.probs, label);
                if !loss.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite loss at epoch {epoch}, sample {idx}"
                    )));
                }
                epoch_loss += loss;
                if argmax(&cache.probs) == label as usize {
                    correct += 1;
                }
                let g = state.backward(&cache, label)?;
                acc.accumulate(&g);
            }
            acc.scale(F::from_f64(1.0 / batch.len() as f64));
            adam_step(state, &acc, cfg.learning_rate);
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let train_accuracy = correct as f64 / train_set.len() as f64;

        let (val_loss, val_accuracy) = if val_set.is_empty() {
            (train_loss, train_accuracy)
        } else {
            let report = evaluate(state, val_set)?;
            (report.mean_loss, report.accuracy)
        };
        if !val_loss.is_finite() {
            return Err(Error::Training(format!("non-finite validation loss at epoch {epoch}")));
        }
        history.push(EpochStats { epoch, train_loss, train_accuracy, val_loss, val_accuracy });

        if best_val - val_loss >= cfg.convergence_threshold {
            best_val = val_loss;
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= cfg.convergence_window {
                break;
            }
        }
    }
    Ok(history)
}

/// Argmax-of-softmax evaluation over a dataset.
pub fn evaluate<F: Scalar>(state: &ModelState<F>, data: &FeatureSet<F>) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::Domain("evaluate: empty dataset".into()));
    }
    let mut confusion = [[0usize; NUM_CLASSES]; NUM_CLASSES];
    let mut correct = 0usize;
    let mut loss = 0.0;
    for (input, &label) in data.inputs.iter().zip(&data.labels) {
        let probs = state.predict(input)?;
        let pred = argmax(&probs);
        confusion[label as usize][pred] += 1;
        if pred == label as usize {
            correct += 1;
        }
        loss += sample_loss(&probs, label);
    }
    Ok(EvalReport {
        accuracy: correct as f64 / data.len() as f64,
        mean_loss: loss / data.len() as f64,
        confusion,
        samples: data.len(),
    })
}

/// Median wall-clock time of single-sample forward passes.
pub fn inference_latency<F: Scalar>(
    state: &ModelState<F>,
    sample: &SampleInput<F>,
    repetitions: usize,
) -> Result<std::time::Duration> {
    if repetitions == 0 {
        return Err(Error::Domain("repetitions must be >= 1".into()));
    }
    // Warm-up pass; also validates shapes.
    state.predict(sample)?;
    let mut times: Vec<std::time::Duration> = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = std::time::Instant::now();
        let probs = state.predict(sample)?;
        let elapsed = start.elapsed();
        std::hint::black_box(&probs);
        times.push(elapsed);
    }
    times.sort();
    Ok(times[times.len() / 2])
}
