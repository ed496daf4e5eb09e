//! Seeded mini-batch training with Adam, evaluation and resumable runs.

use std::time::Instant;

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::checkpoint::{Checkpoint, RngState};
use crate::dataset::SequenceDataset;
use crate::real::Real;
use crate::rnn::{self, AdamConfig, AdamState, Architecture, RnnError, RnnParams};

/// Sequences per chunk in evaluation passes.
const EVAL_CHUNK: usize = 500;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("sequences in a training batch have different lengths")]
    RaggedBatch,
    #[error("checkpoint was trained in {found:?} precision, requested {requested:?}")]
    PrecisionMismatch { found: Precision, requested: Precision },
    #[error(transparent)]
    Numeric(#[from] RnnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Single,
    Double,
}

impl Precision {
    pub fn of<T: Real>() -> Self {
        if T::DTYPE == <f64 as Real>::DTYPE {
            Precision::Double
        } else {
            Precision::Single
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Precision::Single => 1,
            Precision::Double => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Precision::Single),
            2 => Some(Precision::Double),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub precision: Precision,
    pub arch: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            adam: AdamConfig::default(),
            seed: 0,
            precision: Precision::Single,
            arch: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch size must be at least 1".into()));
        }
        if !(self.adam.lr > 0.0 && self.adam.lr.is_finite()) {
            return Err(TrainError::InvalidConfig("learning rate must be positive".into()));
        }
        let betas_ok = [self.adam.beta1, self.adam.beta2]
            .iter()
            .all(|b| (0.0..1.0).contains(b));
        if !betas_ok || self.adam.eps.is_nan() || self.adam.eps <= 0.0 {
            return Err(TrainError::InvalidConfig(
                "Adam betas must lie in [0, 1) and eps > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-example loss over the epoch.
    pub train_loss: f64,
    /// Accuracy of the predictions made during the epoch's forward passes.
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    pub updates: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub checkpoint: Checkpoint<T>,
    pub metrics: Vec<EpochMetrics>,
}

/// Order in which the training set is visited during `epoch` (0-based).
///
/// Each epoch draws its permutation from its own ChaCha stream of the run
/// seed, so any epoch can be reproduced without replaying earlier ones.
pub fn epoch_permutation(seed: u64, epoch: usize, len: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng);
    order
}

/// Fresh parameters and optimizer state for a run.
pub fn initial_checkpoint<T: Real>(config: &TrainConfig) -> Result<Checkpoint<T>, TrainError> {
    config.validate()?;
    check_precision::<T>(config.precision)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = RnnParams::init_uniform(config.arch, &mut rng);
    Ok(Checkpoint {
        config: *config,
        adam: AdamState::new(&config.arch),
        params,
        epoch: 0,
        rng: RngState {
            seed: config.seed,
            next_stream: 1,
        },
    })
}

fn check_precision<T: Real>(precision: Precision) -> Result<(), TrainError> {
    let requested = Precision::of::<T>();
    if requested != precision {
        return Err(TrainError::PrecisionMismatch {
            found: precision,
            requested,
        });
    }
    Ok(())
}

/// Trains from scratch for `config.epochs` epochs.
///
/// `on_epoch` is called after every epoch; `test_set`, when given, is
/// evaluated at the end of each epoch.
pub fn train<T: Real>(
    config: &TrainConfig,
    train_set: &SequenceDataset,
    test_set: Option<&SequenceDataset>,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome<T>, TrainError> {
    let start = initial_checkpoint::<T>(config)?;
    resume(start, train_set, test_set, on_epoch)
}

/// Continues a run from `checkpoint` until `checkpoint.config.epochs`.
pub fn resume<T: Real>(
    mut checkpoint: Checkpoint<T>,
    train_set: &SequenceDataset,
    test_set: Option<&SequenceDataset>,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome<T>, TrainError> {
    let config = checkpoint.config;
    config.validate()?;
    check_precision::<T>(config.precision)?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut metrics = Vec::new();
    while checkpoint.epoch < config.epochs {
        let timer = Instant::now();
        let epoch = checkpoint.epoch;
        let order = epoch_permutation(checkpoint.rng.seed, epoch, train_set.len());
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for (batch_index, batch) in order.chunks(config.batch_size).enumerate() {
            let views: Vec<ArrayView2<f32>> = batch.iter().map(|&i| train_set.sequences[i].view()).collect();
            if views.iter().any(|v| v.dim() != views[0].dim()) {
                return Err(TrainError::RaggedBatch);
            }
            let inputs = rnn::stack_sequences::<T>(&views);
            let labels: Vec<u8> = batch.iter().map(|&i| train_set.labels[i]).collect();
            let out = rnn::batch_gradients(&checkpoint.params, inputs.view(), &labels)?;
            let loss = out.loss.to_f64().unwrap_or(f64::NAN);
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: batch_index,
                });
            }
            loss_sum += loss * batch.len() as f64;
            correct += out.correct;
            rnn::adam_step(&mut checkpoint.params, &out.grads, &mut checkpoint.adam, &config.adam)?;
        }
        checkpoint.epoch += 1;
        checkpoint.rng.next_stream = checkpoint.epoch as u64 + 1;
        let test_acc = match test_set {
            Some(ds) => Some(evaluate(&checkpoint.params, ds, Readout::Final)?.accuracy),
            None => None,
        };
        let m = EpochMetrics {
            epoch: checkpoint.epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_acc: correct as f64 / train_set.len() as f64,
            test_acc,
            updates: checkpoint.adam.step,
            seconds: timer.elapsed().as_secs_f64(),
        };
        on_epoch(&m);
        metrics.push(m);
    }
    Ok(TrainOutcome { checkpoint, metrics })
}

/// Which hidden state feeds the readout during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    /// The last step of each sequence.
    Final,
    /// A fixed 1-based step, valid for every sequence.
    Step(usize),
}

impl Readout {
    fn step_for(self, len: usize) -> usize {
        match self {
            Readout::Final => len,
            Readout::Step(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
}

/// Predicted class of every sequence, in dataset order.
pub fn predictions<T: Real>(
    params: &RnnParams<T>,
    dataset: &SequenceDataset,
    readout: Readout,
) -> Result<Vec<usize>, RnnError> {
    let chunks: Vec<Result<Vec<usize>, RnnError>> = dataset
        .sequences
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| predict_chunk(params, chunk, readout))
        .collect();
    let mut out = Vec::with_capacity(dataset.len());
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

fn predict_chunk<T: Real>(
    params: &RnnParams<T>,
    chunk: &[ndarray::Array2<f32>],
    readout: Readout,
) -> Result<Vec<usize>, RnnError> {
    let mut out = Vec::with_capacity(chunk.len());
    let mut start = 0;
    // consecutive runs of equal-length sequences share one batched pass
    while start < chunk.len() {
        let len = chunk[start].nrows();
        let end = chunk[start..]
            .iter()
            .position(|s| s.nrows() != len)
            .map_or(chunk.len(), |p| start + p);
        let views: Vec<_> = chunk[start..end].iter().map(|s| s.view()).collect();
        let inputs = rnn::stack_sequences::<T>(&views);
        let logits = rnn::readout_logits(params, inputs.view(), &[readout.step_for(len)])?;
        out.extend(logits[0].axis_iter(Axis(0)).map(rnn::argmax));
        start = end;
    }
    Ok(out)
}

/// Accuracy and confusion counts of `params` on `dataset`.
pub fn evaluate<T: Real>(
    params: &RnnParams<T>,
    dataset: &SequenceDataset,
    readout: Readout,
) -> Result<Evaluation, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let preds = predictions(params, dataset, readout)?;
    Ok(score(&preds, &dataset.labels, params.arch.classes))
}

pub(crate) fn score(preds: &[usize], labels: &[u8], classes: usize) -> Evaluation {
    let mut confusion = vec![vec![0; classes]; classes];
    let mut correct = 0;
    for (&p, &l) in preds.iter().zip(labels) {
        confusion[l as usize][p] += 1;
        if p == l as usize {
            correct += 1;
        }
    }
    Evaluation {
        accuracy: correct as f64 / labels.len() as f64,
        correct,
        total: labels.len(),
        confusion,
    }
}
