//! Noise-prediction training for the denoiser.
//!
//! Standard objective: corrupt an expert trajectory to a uniformly sampled
//! step with the forward process, predict the injected noise, and minimize
//! the squared error. Endpoint coordinates are excluded from the loss — they
//! are overwritten by inpainting at inference and carry no signal.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::denoiser::{ActionState, Activation, Condition, Denoiser, ModelDims};
use crate::harness::checkpoint::save_checkpoint;
use crate::harness::dataset::Dataset;
use crate::rng::derive_rng;
use crate::schedule::{NoiseSchedule, ScheduleConfig};
use crate::{Error, Result};

const SHUFFLE_TAG: u64 = 0x7368_7566;
const SAMPLE_TAG: u64 = 0x7472_6169;
const VAL_TAG: u64 = 0x7661_6c69;

/// Training hyperparameters and paths, stored verbatim in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub schedule: ScheduleConfig,
    pub dims: ModelDims,
    pub activation: Activation,
    /// Trailing fraction of the dataset held out for validation.
    pub holdout_fraction: f64,
    /// Freeze the per-record corruption draws across epochs, turning the
    /// dataset into a fixed regression set (memorization sanity checks).
    pub overfit: bool,
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
    pub metrics_csv: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 40,
            batch_size: 64,
            learning_rate: 1e-4,
            seed: 0,
            schedule: ScheduleConfig::default(),
            dims: ModelDims::default(),
            activation: Activation::Tanh,
            holdout_fraction: 0.05,
            overfit: false,
            dataset: PathBuf::from("dataset.bin"),
            checkpoint: PathBuf::from("checkpoint.bin"),
            metrics_csv: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidArgument(
                "batch size and learning rate must be positive".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.holdout_fraction) {
            return Err(Error::InvalidArgument(
                "holdout fraction must lie in [0, 0.5)".into(),
            ));
        }
        self.dims.validate()
    }
}

/// Forward-noised action `a_t = √ᾱ_t·a_0 + √(1−ᾱ_t)·ε`.
pub fn noise_action(
    schedule: &NoiseSchedule,
    clean: &DVector<f64>,
    t: usize,
    noise: &DVector<f64>,
) -> DVector<f64> {
    let bar = schedule.alpha_bar(t);
    clean * bar.sqrt() + noise * (1.0 - bar).sqrt()
}

/// Invert the forward process: `(a_t − √(1−ᾱ_t)·ε)/√ᾱ_t`. With the true
/// injected noise this recovers the clean action exactly; `t = 0` returns
/// the state unchanged.
pub fn reconstruct_a0(schedule: &NoiseSchedule, state: &ActionState, eps: &DVector<f64>) -> DVector<f64> {
    let bar = schedule.alpha_bar(state.step);
    (&state.values - eps * (1.0 - bar).sqrt()) / bar.sqrt()
}

/// One row of the training metrics log.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricsRow {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub metrics: Vec<MetricsRow>,
    pub initial_val_loss: f64,
    pub final_val_loss: f64,
}

pub struct TrainOutcome {
    pub model: Denoiser,
    pub schedule: NoiseSchedule,
    pub report: TrainReport,
}

/// Per-tensor gradient accumulator mirroring the model parameters.
struct Grads {
    w1: DMatrix<f64>,
    b1: DVector<f64>,
    w2: DMatrix<f64>,
    b2: DVector<f64>,
    w3: DMatrix<f64>,
    b3: DVector<f64>,
    head_w: DMatrix<f64>,
    head_b: DVector<f64>,
}

impl Grads {
    fn zeros(dims: &ModelDims) -> Self {
        Grads {
            w1: DMatrix::zeros(dims.hidden_dim, dims.input_dim()),
            b1: DVector::zeros(dims.hidden_dim),
            w2: DMatrix::zeros(dims.hidden_dim, dims.hidden_dim),
            b2: DVector::zeros(dims.hidden_dim),
            w3: DMatrix::zeros(dims.latent_dim, dims.hidden_dim),
            b3: DVector::zeros(dims.latent_dim),
            head_w: DMatrix::zeros(dims.action_dim(), dims.latent_dim),
            head_b: DVector::zeros(dims.action_dim()),
        }
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.w1.as_mut_slice(),
            self.b1.as_mut_slice(),
            self.w2.as_mut_slice(),
            self.b2.as_mut_slice(),
            self.w3.as_mut_slice(),
            self.b3.as_mut_slice(),
            self.head_w.as_mut_slice(),
            self.head_b.as_mut_slice(),
        ]
    }

    fn add(&mut self, other: &Grads) {
        self.w1 += &other.w1;
        self.b1 += &other.b1;
        self.w2 += &other.w2;
        self.b2 += &other.b2;
        self.w3 += &other.w3;
        self.b3 += &other.b3;
        self.head_w += &other.head_w;
        self.head_b += &other.head_b;
    }
}

/// Adam with cosine-annealed learning rate.
struct Adam {
    m: Grads,
    v: Grads,
    step: usize,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(dims: &ModelDims) -> Self {
        Adam {
            m: Grads::zeros(dims),
            v: Grads::zeros(dims),
            step: 0,
        }
    }

    fn update(&mut self, model: &mut Denoiser, grads: &mut Grads, lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.step as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.step as i32);
        let params: [&mut [f64]; 8] = [
            model.w1.as_mut_slice(),
            model.b1.as_mut_slice(),
            model.w2.as_mut_slice(),
            model.b2.as_mut_slice(),
            model.w3.as_mut_slice(),
            model.b3.as_mut_slice(),
            model.head_w.as_mut_slice(),
            model.head_b.as_mut_slice(),
        ];
        let grads = grads.slices_mut();
        let ms = self.m.slices_mut();
        let vs = self.v.slices_mut();
        for (((param, grad), m), v) in params.into_iter().zip(grads).zip(ms).zip(vs) {
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                param[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Loss gradient of one sample accumulated into `grads`; returns the masked
/// per-coordinate squared error.
fn sample_backward(
    model: &Denoiser,
    cond: &Condition,
    state: &ActionState,
    target: &DVector<f64>,
    mask: &[bool],
    grads: &mut Grads,
) -> Result<f64> {
    let trace = model.forward_trace(cond, state)?;
    let unmasked = mask.iter().filter(|&&m| !m).count() as f64;
    let mut err = &trace.eps - target;
    for (i, &masked) in mask.iter().enumerate() {
        if masked {
            err[i] = 0.0;
        }
    }
    let loss = err.norm_squared() / unmasked;
    let d_eps = &err * (2.0 / unmasked);

    let act = model.activation();
    let s3 = act.deriv_from_output(&trace.h);
    let s2 = act.deriv_from_output(&trace.z2);
    let s1 = act.deriv_from_output(&trace.z1);

    grads.head_w.ger(1.0, &d_eps, &trace.h, 1.0);
    grads.head_b += &d_eps;
    let dq3 = s3.component_mul(&model.head_w.tr_mul(&d_eps));
    grads.w3.ger(1.0, &dq3, &trace.z2, 1.0);
    grads.b3 += &dq3;
    let dq2 = s2.component_mul(&model.w3.tr_mul(&dq3));
    grads.w2.ger(1.0, &dq2, &trace.z1, 1.0);
    grads.b2 += &dq2;
    let dq1 = s1.component_mul(&model.w2.tr_mul(&dq2));
    grads.w1.ger(1.0, &dq1, &trace.x, 1.0);
    grads.b1 += &dq1;
    Ok(loss)
}

fn endpoint_mask(action_dim: usize) -> Vec<bool> {
    let mut mask = vec![false; action_dim];
    mask[0] = true;
    mask[1] = true;
    mask[action_dim - 2] = true;
    mask[action_dim - 1] = true;
    mask
}

/// Per-sample corruption drawn from a stream keyed by `(seed, tag, epoch,
/// record)`, so results do not depend on batching or thread count.
fn draw_sample(
    schedule: &NoiseSchedule,
    clean: &DVector<f64>,
    seed: u64,
    tag: u64,
    epoch: usize,
    record: usize,
) -> (ActionState, DVector<f64>) {
    let mut rng = derive_rng(seed, &[tag, epoch as u64, record as u64]);
    let t = rng.random_range(1..=schedule.total_steps());
    let noise = DVector::from_fn(clean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let state = ActionState::new(noise_action(schedule, clean, t, &noise), t);
    (state, noise)
}

fn masked_val_loss(
    model: &Denoiser,
    schedule: &NoiseSchedule,
    samples: &[(Condition, DVector<f64>)],
    mask: &[bool],
    seed: u64,
) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let unmasked = mask.iter().filter(|&&m| !m).count() as f64;
    let losses: Vec<Result<f64>> = samples
        .par_iter()
        .enumerate()
        .map(|(i, (cond, clean))| {
            let (state, noise) = draw_sample(schedule, clean, seed, VAL_TAG, 0, i);
            let (eps, _) = model.forward(cond, &state)?;
            let mut err = eps - noise;
            for (j, &m) in mask.iter().enumerate() {
                if m {
                    err[j] = 0.0;
                }
            }
            Ok(err.norm_squared() / unmasked)
        })
        .collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / samples.len() as f64)
}

/// Train a fresh model on an in-memory dataset.
pub fn train_on_dataset(config: &TrainConfig, dataset: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.records.is_empty() {
        return Err(Error::Training("dataset is empty".into()));
    }
    if dataset.horizon != config.dims.horizon {
        return Err(Error::Training(format!(
            "dataset horizon {} does not match model horizon {}",
            dataset.horizon, config.dims.horizon
        )));
    }
    let schedule = config.schedule.build()?;
    let mut model = Denoiser::init(config.dims, config.activation, config.seed)?;
    let mask = endpoint_mask(config.dims.action_dim());

    // Precompute encodings and flattened targets.
    let samples: Vec<(Condition, DVector<f64>)> = dataset
        .records
        .par_iter()
        .map(|r| (r.condition(), r.expert.flatten()))
        .collect();
    let holdout = ((samples.len() as f64 * config.holdout_fraction) as usize).min(samples.len() - 1);
    let split = samples.len() - holdout;
    let (train_set, val_set) = samples.split_at(split);

    let initial_val_loss = masked_val_loss(&model, &schedule, val_set, &mask, config.seed)?;
    let mut adam = Adam::new(&config.dims);
    let mut metrics = Vec::new();
    let total_updates = config.epochs * train_set.len().div_ceil(config.batch_size).max(1);
    let mut update_idx = 0usize;

    for epoch in 0..config.epochs {
        // Deterministic shuffle.
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut shuffle_rng = derive_rng(config.seed, &[SHUFFLE_TAG, epoch as u64]);
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.random_range(0..=i);
            order.swap(i, j);
        }

        let mut epoch_loss = 0.0;
        let mut epoch_count = 0usize;
        for batch in order.chunks(config.batch_size) {
            // Parallel over fixed chunks, reduced in chunk order so the
            // result is independent of thread scheduling.
            let chunk_len = batch.len().div_ceil(8).max(1);
            let partials: Vec<Result<(Grads, f64)>> = batch
                .par_chunks(chunk_len)
                .map(|chunk| {
                    let mut grads = Grads::zeros(&config.dims);
                    let mut loss = 0.0;
                    for &idx in chunk {
                        let (cond, clean) = &train_set[idx];
                        let draw_epoch = if config.overfit { 0 } else { epoch };
                        let (state, noise) =
                            draw_sample(&schedule, clean, config.seed, SAMPLE_TAG, draw_epoch, idx);
                        loss +=
                            sample_backward(&model, cond, &state, &noise, &mask, &mut grads)?;
                    }
                    Ok((grads, loss))
                })
                .collect();

            let mut grads = Grads::zeros(&config.dims);
            let mut batch_loss = 0.0;
            for partial in partials {
                let (g, l) = partial?;
                grads.add(&g);
                batch_loss += l;
            }
            let scale = 1.0 / batch.len() as f64;
            for slice in grads.slices_mut() {
                for v in slice.iter_mut() {
                    *v *= scale;
                }
            }
            batch_loss *= scale;
            if !batch_loss.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss at epoch {epoch}, update {update_idx}"
                )));
            }
            let progress = update_idx as f64 / total_updates.max(1) as f64;
            let lr = config.learning_rate
                * 0.5
                * (1.0 + (std::f64::consts::PI * progress).cos());
            adam.update(&mut model, &mut grads, lr);
            update_idx += 1;
            epoch_loss += batch_loss;
            epoch_count += 1;

            metrics.push(MetricsRow {
                step: update_idx,
                loss: batch_loss,
                lr,
            });
        }
        let _ = epoch_loss / epoch_count.max(1) as f64;
    }

    model.rebuild_pullback();
    let final_val_loss = masked_val_loss(&model, &schedule, val_set, &mask, config.seed)?;
    Ok(TrainOutcome {
        model,
        schedule,
        report: TrainReport {
            metrics,
            initial_val_loss,
            final_val_loss,
        },
    })
}

/// Load the dataset, train, and persist the checkpoint (and metrics CSV when
/// configured).
pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    let dataset = Dataset::load(&config.dataset)?;
    let outcome = train_on_dataset(config, &dataset)?;
    save_checkpoint(
        &config.checkpoint,
        &outcome.model,
        &config.schedule,
        config.seed,
        Some(config),
    )?;
    if let Some(csv) = &config.metrics_csv {
        let mut body = String::from("step,loss,lr\n");
        for row in &outcome.report.metrics {
            body.push_str(&format!("{},{},{}\n", row.step, row.loss, row.lr));
        }
        std::fs::write(csv, body)?;
    }
    Ok(outcome)
}
