//! Vanilla tanh RNN: forward pass, softmax cross-entropy, backpropagation
//! through time and the Adam update.
//!
//! The recurrence is `h_t = tanh(W_in x_t + W_rec h_{t-1})` with `h_0 = 0` and
//! no bias inside the recurrent layer. Classification reads the linear
//! readout `W_out h_r + b_out` at a single readout step `r`.
//!
//! All batched kernels go through the same GEMM calls, and a row of a batch
//! never depends on the other rows, so a single-sequence call is bit-identical
//! to the corresponding row of any batched call.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3, Axis, Zip};
use rand::Rng;
use thiserror::Error;

use crate::real::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RnnError {
    #[error("empty input sequence")]
    EmptySequence,
    #[error("input sequence contains a non-finite value")]
    NonFiniteInput,
    #[error("input width {found} does not match the network input size {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("label {0} is not a valid class")]
    InvalidLabel(usize),
    #[error("readout step {step} outside 1..={len}")]
    ReadoutOutOfRange { step: usize, len: usize },
    #[error("BPTT reads out at step {step} but the sequence has {len} steps")]
    ReadoutMismatch { step: usize, len: usize },
    #[error("hidden state left [-1, 1] or became non-finite at step {step}")]
    InvalidHiddenState { step: usize },
    #[error("gradient contains a non-finite value")]
    NonFiniteGradient,
    #[error("batch has {inputs} sequences but {labels} labels")]
    BatchMismatch { inputs: usize, labels: usize },
}

/// Layer sizes. The defaults are the sequential-MNIST network: 28 inputs per
/// step, 200 hidden units, 10 classes, readout bias on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
    pub output_bias: bool,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            input: 28,
            hidden: 200,
            classes: 10,
            output_bias: true,
        }
    }
}

/// The complete trainable state of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnParams<T> {
    pub arch: Architecture,
    /// `hidden x input`
    pub w_in: Array2<T>,
    /// `hidden x hidden`
    pub w_rec: Array2<T>,
    /// `classes x hidden`
    pub w_out: Array2<T>,
    /// `classes`; stays zero when the architecture disables the readout bias.
    pub b_out: Array1<T>,
}

/// Same layout as [`RnnParams`]; also used for the Adam moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub g_in: Array2<T>,
    pub g_rec: Array2<T>,
    pub g_out: Array2<T>,
    pub g_bout: Array1<T>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros(arch: &Architecture) -> Self {
        Self {
            g_in: Array2::zeros((arch.hidden, arch.input)),
            g_rec: Array2::zeros((arch.hidden, arch.hidden)),
            g_out: Array2::zeros((arch.classes, arch.hidden)),
            g_bout: Array1::zeros(arch.classes),
        }
    }

    pub fn slices(&self) -> [&[T]; 4] {
        [
            self.g_in.as_slice().expect("standard layout"),
            self.g_rec.as_slice().expect("standard layout"),
            self.g_out.as_slice().expect("standard layout"),
            self.g_bout.as_slice().expect("standard layout"),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [T]; 4] {
        [
            self.g_in.as_slice_mut().expect("standard layout"),
            self.g_rec.as_slice_mut().expect("standard layout"),
            self.g_out.as_slice_mut().expect("standard layout"),
            self.g_bout.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

impl<T: Real> RnnParams<T> {
    pub fn zeros(arch: Architecture) -> Self {
        Self {
            arch,
            w_in: Array2::zeros((arch.hidden, arch.input)),
            w_rec: Array2::zeros((arch.hidden, arch.hidden)),
            w_out: Array2::zeros((arch.classes, arch.hidden)),
            b_out: Array1::zeros(arch.classes),
        }
    }

    /// Draws every weight matrix from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`,
    /// in the order `w_in`, `w_rec`, `w_out`, row-major. The readout bias
    /// starts at zero.
    pub fn init_uniform<R: Rng>(arch: Architecture, rng: &mut R) -> Self {
        let mut fill = |rows: usize, cols: usize| {
            let bound = 1.0 / (cols as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || T::from_f64_lossy(rng.random_range(-bound..bound)))
        };
        let w_in = fill(arch.hidden, arch.input);
        let w_rec = fill(arch.hidden, arch.hidden);
        let w_out = fill(arch.classes, arch.hidden);
        Self {
            arch,
            w_in,
            w_rec,
            w_out,
            b_out: Array1::zeros(arch.classes),
        }
    }

    pub fn cast<U: Real>(&self) -> RnnParams<U> {
        let c2 = |a: &Array2<T>| a.mapv(|v| U::from_f64_lossy(v.to_f64().unwrap()));
        RnnParams {
            arch: self.arch,
            w_in: c2(&self.w_in),
            w_rec: c2(&self.w_rec),
            w_out: c2(&self.w_out),
            b_out: self.b_out.mapv(|v| U::from_f64_lossy(v.to_f64().unwrap())),
        }
    }

    pub fn slices(&self) -> [&[T]; 4] {
        [
            self.w_in.as_slice().expect("standard layout"),
            self.w_rec.as_slice().expect("standard layout"),
            self.w_out.as_slice().expect("standard layout"),
            self.b_out.as_slice().expect("standard layout"),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [T]; 4] {
        [
            self.w_in.as_slice_mut().expect("standard layout"),
            self.w_rec.as_slice_mut().expect("standard layout"),
            self.w_out.as_slice_mut().expect("standard layout"),
            self.b_out.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// `h W_out^T + b_out` for a batch of hidden states (`batch x hidden`).
    /// The bias is skipped when the architecture disables it.
    pub fn readout(&self, hidden: ArrayView2<T>) -> Array2<T> {
        let mut logits = hidden.dot(&self.w_out.t());
        if self.arch.output_bias {
            logits += &self.b_out;
        }
        logits
    }
}

/// Hidden states `h_1..h_T` of one sequence, one row per step.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenTrajectory<T> {
    pub states: Array2<T>,
}

impl<T: Real> HiddenTrajectory<T> {
    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }

    /// State after consuming `step` rows (1-based).
    pub fn at(&self, step: usize) -> ArrayView1<'_, T> {
        self.states.row(step - 1)
    }

    pub fn last(&self) -> ArrayView1<'_, T> {
        self.states.row(self.len() - 1)
    }
}

fn check_inputs<T: Real>(arch: &Architecture, inputs: &ArrayView3<T>) -> Result<(), RnnError> {
    let (_, steps, width) = inputs.dim();
    if steps == 0 {
        return Err(RnnError::EmptySequence);
    }
    if width != arch.input {
        return Err(RnnError::ShapeMismatch {
            expected: arch.input,
            found: width,
        });
    }
    if !inputs.iter().all(|v| v.is_finite()) {
        return Err(RnnError::NonFiniteInput);
    }
    Ok(())
}

/// One recurrence step for a batch: `tanh(x W_in^T + h W_rec^T)`.
fn step<T: Real>(
    params: &RnnParams<T>,
    x: ArrayView2<T>,
    h: ArrayView2<T>,
    step_index: usize,
) -> Result<Array2<T>, RnnError> {
    let mut a = x.dot(&params.w_in.t());
    general_mat_mul(T::one(), &h, &params.w_rec.t(), T::one(), &mut a);
    a.mapv_inplace(|v| v.tanh());
    if !a.iter().all(|v| v.abs() <= T::one()) {
        return Err(RnnError::InvalidHiddenState { step: step_index });
    }
    Ok(a)
}

/// Runs a batch of equal-length sequences (`batch x steps x input`) and
/// calls `visit(t, h_t)` after every step `t` (1-based).
pub fn run_batch<T: Real, F>(params: &RnnParams<T>, inputs: ArrayView3<T>, mut visit: F) -> Result<Array2<T>, RnnError>
where
    F: FnMut(usize, ArrayView2<T>),
{
    check_inputs(&params.arch, &inputs)?;
    let (batch, steps, _) = inputs.dim();
    let mut h = Array2::zeros((batch, params.arch.hidden));
    for t in 0..steps {
        h = step(params, inputs.index_axis(Axis(1), t), h.view(), t + 1)?;
        visit(t + 1, h.view());
    }
    Ok(h)
}

/// Stacks equal-length sequences into a `batch x steps x input` tensor.
pub fn stack_sequences<T: Real>(sequences: &[ArrayView2<f32>]) -> Array3<T> {
    let steps = sequences.first().map_or(0, |s| s.nrows());
    let width = sequences.first().map_or(0, |s| s.ncols());
    let mut out = Array3::zeros((sequences.len(), steps, width));
    for (mut dst, src) in out.outer_iter_mut().zip(sequences) {
        assert_eq!(src.dim(), (steps, width), "sequences in a batch must share a shape");
        Zip::from(&mut dst).and(src).for_each(|d, &s| *d = T::from_single(s));
    }
    out
}

/// Forward pass over one `steps x input` sequence.
///
/// Returns the hidden trajectory and the logits read out from the final
/// state.
pub fn forward<T: Real>(
    params: &RnnParams<T>,
    sequence: ArrayView2<T>,
) -> Result<(HiddenTrajectory<T>, Array1<T>), RnnError> {
    let inputs = sequence.insert_axis(Axis(0));
    let mut states = Array2::zeros((sequence.nrows(), params.arch.hidden));
    let last = run_batch(params, inputs, |t, h| states.row_mut(t - 1).assign(&h.row(0)))?;
    let logits = params.readout(last.view()).row(0).to_owned();
    Ok((HiddenTrajectory { states }, logits))
}

/// Logits at each requested readout step (1-based) for a batch, from a single
/// pass over the inputs. Entry `i` of the result corresponds to `steps[i]`.
pub fn readout_logits<T: Real>(
    params: &RnnParams<T>,
    inputs: ArrayView3<T>,
    steps: &[usize],
) -> Result<Vec<Array2<T>>, RnnError> {
    let len = inputs.dim().1;
    if let Some(&bad) = steps.iter().find(|&&s| s == 0 || s > len) {
        return Err(RnnError::ReadoutOutOfRange { step: bad, len });
    }
    let max_step = steps.iter().copied().max().unwrap_or(0);
    let mut found: Vec<Option<Array2<T>>> = vec![None; steps.len()];
    if max_step > 0 {
        run_batch(params, inputs.slice(s![.., ..max_step, ..]), |t, h| {
            let mut logits = None;
            for (slot, _) in found.iter_mut().zip(steps).filter(|(_, &s)| s == t) {
                let l = logits.get_or_insert_with(|| params.readout(h));
                *slot = Some(l.clone());
            }
        })?;
    }
    Ok(found.into_iter().map(|l| l.expect("every step visited")).collect())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: Real>(values: ArrayView1<T>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Class predicted from the hidden state after `readout_step` rows.
pub fn predict<T: Real>(
    params: &RnnParams<T>,
    sequence: ArrayView2<T>,
    readout_step: usize,
) -> Result<usize, RnnError> {
    let len = sequence.nrows();
    if readout_step == 0 || readout_step > len {
        return Err(RnnError::ReadoutOutOfRange {
            step: readout_step,
            len,
        });
    }
    let (_, logits) = forward(params, sequence.slice(s![..readout_step, ..]))?;
    Ok(argmax(logits.view()))
}

/// Probabilities are clamped here before taking the log.
pub const PROB_FLOOR: f64 = 1e-30;

/// Softmax cross-entropy: `-log softmax(logits)[label]` and its gradient
/// `softmax(logits) - onehot(label)`.
pub fn loss_and_dlogits<T: Real>(logits: ArrayView1<T>, label: usize) -> Result<(T, Array1<T>), RnnError> {
    if label >= logits.len() {
        return Err(RnnError::InvalidLabel(label));
    }
    let max = logits.fold(T::neg_infinity(), |m, &v| m.max(v));
    let mut probs = logits.mapv(|v| (v - max).exp());
    let sum = probs.sum();
    probs /= sum;
    let loss = -probs[label].max(T::from_f64_lossy(PROB_FLOOR)).ln();
    probs[label] -= T::one();
    Ok((loss, probs))
}

/// Result of a forward/backward pass over a batch.
#[derive(Debug, Clone)]
pub struct BatchGradients<T> {
    /// Mean loss over the batch.
    pub loss: T,
    /// Gradients of the mean loss.
    pub grads: Gradients<T>,
    /// Number of sequences whose final-step prediction matched the label.
    pub correct: usize,
}

/// Backpropagation through time for a batch of equal-length sequences read
/// out at their final step. Gradients are of the batch-mean loss.
pub fn batch_gradients<T: Real>(
    params: &RnnParams<T>,
    inputs: ArrayView3<T>,
    labels: &[u8],
) -> Result<BatchGradients<T>, RnnError> {
    let (batch, steps, _) = inputs.dim();
    if batch != labels.len() {
        return Err(RnnError::BatchMismatch {
            inputs: batch,
            labels: labels.len(),
        });
    }
    let arch = params.arch;
    // hs[t] = h_t, hs[0] = h_0 = 0
    let mut hs = Vec::with_capacity(steps + 1);
    hs.push(Array2::<T>::zeros((batch, arch.hidden)));
    run_batch(params, inputs, |_, h| hs.push(h.to_owned()))?;

    let logits = params.readout(hs[steps].view());
    let scale = T::one() / T::from_usize(batch).expect("batch size fits");
    let mut dlogits = Array2::zeros((batch, arch.classes));
    let mut loss = T::zero();
    let mut correct = 0;
    for (b, &label) in labels.iter().enumerate() {
        let (l, d) = loss_and_dlogits(logits.row(b), label as usize)?;
        loss += l;
        if argmax(logits.row(b)) == label as usize {
            correct += 1;
        }
        dlogits.row_mut(b).assign(&(d * scale));
    }

    let mut grads = Gradients::zeros(&arch);
    general_mat_mul(T::one(), &dlogits.t(), &hs[steps], T::zero(), &mut grads.g_out);
    if arch.output_bias {
        grads.g_bout = dlogits.sum_axis(Axis(0));
    }
    let mut dh = dlogits.dot(&params.w_out);
    for t in (1..=steps).rev() {
        let h = &hs[t];
        let da = Zip::from(&dh).and(h).map_collect(|&g, &hv| g * (T::one() - hv * hv));
        let x = inputs.index_axis(Axis(1), t - 1);
        general_mat_mul(T::one(), &da.t(), &x, T::one(), &mut grads.g_in);
        general_mat_mul(T::one(), &da.t(), &hs[t - 1], T::one(), &mut grads.g_rec);
        if t > 1 {
            dh = da.dot(&params.w_rec);
        }
    }
    Ok(BatchGradients {
        loss: loss * scale,
        grads,
        correct,
    })
}

/// Loss and gradients for a single sequence read out at `readout_step`,
/// which must equal the sequence length.
pub fn bptt<T: Real>(
    params: &RnnParams<T>,
    sequence: ArrayView2<T>,
    label: usize,
    readout_step: usize,
) -> Result<(T, Gradients<T>), RnnError> {
    if readout_step != sequence.nrows() {
        return Err(RnnError::ReadoutMismatch {
            step: readout_step,
            len: sequence.nrows(),
        });
    }
    if label >= params.arch.classes {
        return Err(RnnError::InvalidLabel(label));
    }
    let out = batch_gradients(params, sequence.insert_axis(Axis(0)), &[label as u8])?;
    Ok((out.loss, out.grads))
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Gradients<T>,
    pub v: Gradients<T>,
    /// Number of updates applied so far.
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(arch: &Architecture) -> Self {
        Self {
            m: Gradients::zeros(arch),
            v: Gradients::zeros(arch),
            step: 0,
        }
    }
}

/// Bias-corrected Adam update over flat buffers. `step` is the 1-based index
/// of this update.
pub fn adam_update<T: Real>(params: &mut [T], grads: &[T], m: &mut [T], v: &mut [T], step: u64, cfg: &AdamConfig) {
    let b1 = T::from_f64_lossy(cfg.beta1);
    let b2 = T::from_f64_lossy(cfg.beta2);
    let lr = T::from_f64_lossy(cfg.lr);
    let eps = T::from_f64_lossy(cfg.eps);
    let bc1 = T::one() - b1.powi(step as i32);
    let bc2 = T::one() - b2.powi(step as i32);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Applies one Adam update to every parameter and increments the step count.
pub fn adam_step<T: Real>(
    params: &mut RnnParams<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<(), RnnError> {
    if !grads.is_finite() {
        return Err(RnnError::NonFiniteGradient);
    }
    state.step += 1;
    let step = state.step;
    let AdamState { m, v, .. } = state;
    for (((p, g), m), v) in params
        .slices_mut()
        .into_iter()
        .zip(grads.slices())
        .zip(m.slices_mut())
        .zip(v.slices_mut())
    {
        adam_update(p, g, m, v, step, cfg);
    }
    Ok(())
}
