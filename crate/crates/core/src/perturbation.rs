//! The three input perturbations and their accuracy sweeps.
//!
//! - `BlankTail(n)`: zero the last `n` rows, keep the length at 28, read out
//!   at step 28.
//! - `Truncate(n)`: keep only the first `n` rows and read out at step `n`.
//! - `PadBlank(k)`: append `k` zero rows and read out at step `28 + k`.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{SequenceDataset, IMAGE_ROWS};
use crate::real::Real;
use crate::rnn::{self, RnnError, RnnParams};

/// Largest number of appended blank rows.
pub const MAX_PAD: usize = 500;

const SWEEP_CHUNK: usize = 500;

#[derive(Debug, Error, PartialEq)]
pub enum PerturbationError {
    #[error("{kind} amount {amount} outside {min}..={max}")]
    AmountOutOfRange {
        kind: PerturbationKind,
        amount: usize,
        min: usize,
        max: usize,
    },
    #[error("sequence has {found} rows, perturbations apply to {expected}-row sequences")]
    WrongLength { expected: usize, found: usize },
    #[error("sweep amounts must be strictly increasing and non-empty")]
    BadGrid,
    #[error("cannot sweep an empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Numeric(#[from] RnnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PerturbationKind {
    BlankTail,
    Truncate,
    PadBlank,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 3] = [
        PerturbationKind::BlankTail,
        PerturbationKind::Truncate,
        PerturbationKind::PadBlank,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PerturbationKind::BlankTail => "blank_tail",
            PerturbationKind::Truncate => "truncate",
            PerturbationKind::PadBlank => "pad_blank",
        }
    }

    /// Valid amounts, inclusive.
    pub fn range(self) -> (usize, usize) {
        match self {
            PerturbationKind::BlankTail => (0, IMAGE_ROWS),
            PerturbationKind::Truncate => (1, IMAGE_ROWS),
            PerturbationKind::PadBlank => (0, MAX_PAD),
        }
    }

    pub fn check(self, amount: usize) -> Result<(), PerturbationError> {
        let (min, max) = self.range();
        if amount < min || amount > max {
            return Err(PerturbationError::AmountOutOfRange {
                kind: self,
                amount,
                min,
                max,
            });
        }
        Ok(())
    }

    /// Step whose hidden state is read out after applying this perturbation
    /// with `amount`.
    pub fn readout_step(self, amount: usize) -> usize {
        match self {
            PerturbationKind::BlankTail => IMAGE_ROWS,
            PerturbationKind::Truncate => amount,
            PerturbationKind::PadBlank => IMAGE_ROWS + amount,
        }
    }

    /// Image rows the network actually sees.
    pub fn shown_rows(self, amount: usize) -> usize {
        match self {
            PerturbationKind::BlankTail => IMAGE_ROWS - amount,
            PerturbationKind::Truncate => amount,
            PerturbationKind::PadBlank => IMAGE_ROWS,
        }
    }

    /// The sweep grid used for the experiment figures.
    pub fn default_grid(self) -> Vec<usize> {
        match self {
            PerturbationKind::BlankTail | PerturbationKind::Truncate => (1..=27).collect(),
            PerturbationKind::PadBlank => (0..=MAX_PAD).collect(),
        }
    }

    /// Experiment number (1, 2 or 3).
    pub fn experiment(self) -> u8 {
        match self {
            PerturbationKind::BlankTail => 1,
            PerturbationKind::Truncate => 2,
            PerturbationKind::PadBlank => 3,
        }
    }

    pub fn from_experiment(exp: u8) -> Option<Self> {
        match exp {
            1 => Some(PerturbationKind::BlankTail),
            2 => Some(PerturbationKind::Truncate),
            3 => Some(PerturbationKind::PadBlank),
            _ => None,
        }
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PerturbationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown perturbation kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub amount: usize,
}

impl PerturbationSpec {
    pub fn new(kind: PerturbationKind, amount: usize) -> Result<Self, PerturbationError> {
        kind.check(amount)?;
        Ok(Self { kind, amount })
    }

    pub fn apply(&self, sequence: ArrayView2<f32>) -> Result<Array2<f32>, PerturbationError> {
        match self.kind {
            PerturbationKind::BlankTail => blank_tail(sequence, self.amount),
            PerturbationKind::Truncate => truncate(sequence, self.amount),
            PerturbationKind::PadBlank => pad_blank(sequence, self.amount),
        }
    }

    pub fn readout_step(&self) -> usize {
        self.kind.readout_step(self.amount)
    }
}

fn check_base(sequence: &ArrayView2<f32>) -> Result<(), PerturbationError> {
    if sequence.nrows() != IMAGE_ROWS {
        return Err(PerturbationError::WrongLength {
            expected: IMAGE_ROWS,
            found: sequence.nrows(),
        });
    }
    Ok(())
}

/// Zeroes the last `n` rows.
pub fn blank_tail(sequence: ArrayView2<f32>, n: usize) -> Result<Array2<f32>, PerturbationError> {
    PerturbationKind::BlankTail.check(n)?;
    check_base(&sequence)?;
    let mut out = sequence.to_owned();
    out.slice_mut(s![IMAGE_ROWS - n.., ..]).fill(0.0);
    Ok(out)
}

/// Keeps the first `n` rows.
pub fn truncate(sequence: ArrayView2<f32>, n: usize) -> Result<Array2<f32>, PerturbationError> {
    PerturbationKind::Truncate.check(n)?;
    check_base(&sequence)?;
    Ok(sequence.slice(s![..n, ..]).to_owned())
}

/// Appends `k` zero rows to a full-length sequence.
pub fn pad_blank(sequence: ArrayView2<f32>, k: usize) -> Result<Array2<f32>, PerturbationError> {
    let len = sequence.nrows();
    if k > MAX_PAD {
        return Err(PerturbationError::AmountOutOfRange {
            kind: PerturbationKind::PadBlank,
            amount: k,
            min: 0,
            max: MAX_PAD,
        });
    }
    let mut out = Array2::zeros((len + k, sequence.ncols()));
    out.slice_mut(s![..len, ..]).assign(&sequence);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub amount: usize,
    pub shown_rows: usize,
    pub readout_step: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyCurve {
    pub kind: PerturbationKind,
    pub points: Vec<CurvePoint>,
}

impl AccuracyCurve {
    pub fn accuracy_at(&self, amount: usize) -> Option<f64> {
        self.points.iter().find(|p| p.amount == amount).map(|p| p.accuracy)
    }
}

fn check_grid(kind: PerturbationKind, amounts: &[usize]) -> Result<(), PerturbationError> {
    if amounts.is_empty() || amounts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PerturbationError::BadGrid);
    }
    amounts.iter().try_for_each(|&a| kind.check(a))
}

/// Accuracy of `params` on `dataset` under each perturbation amount.
///
/// Truncations are prefixes of the original sequence and blank paddings are
/// prefixes of the longest padding, so both are evaluated from one pass that
/// reads out at every requested step. Those readouts run the same arithmetic
/// as transforming each sequence and evaluating it separately.
pub fn accuracy_sweep<T: Real>(
    params: &RnnParams<T>,
    dataset: &SequenceDataset,
    kind: PerturbationKind,
    amounts: &[usize],
) -> Result<AccuracyCurve, PerturbationError> {
    check_grid(kind, amounts)?;
    if dataset.is_empty() {
        return Err(PerturbationError::EmptyDataset);
    }
    if let Some(s) = dataset.sequences.iter().find(|s| s.nrows() != IMAGE_ROWS) {
        return Err(PerturbationError::WrongLength {
            expected: IMAGE_ROWS,
            found: s.nrows(),
        });
    }
    let correct: Vec<usize> = match kind {
        PerturbationKind::BlankTail => amounts
            .iter()
            .map(|&n| {
                let steps = [IMAGE_ROWS];
                let counts = count_correct(params, dataset, &steps, |s| blank_tail(s, n))?;
                Ok(counts[0])
            })
            .collect::<Result<_, PerturbationError>>()?,
        PerturbationKind::Truncate => count_correct(params, dataset, amounts, |s| Ok(s.to_owned()))?,
        PerturbationKind::PadBlank => {
            let max = *amounts.last().expect("non-empty grid");
            let steps: Vec<usize> = amounts.iter().map(|&k| IMAGE_ROWS + k).collect();
            count_correct(params, dataset, &steps, |s| pad_blank(s, max))?
        }
    };
    let total = dataset.len() as f64;
    let points = amounts
        .iter()
        .zip(correct)
        .map(|(&amount, c)| CurvePoint {
            amount,
            shown_rows: kind.shown_rows(amount),
            readout_step: kind.readout_step(amount),
            accuracy: c as f64 / total,
        })
        .collect();
    Ok(AccuracyCurve { kind, points })
}

/// Correct predictions at each readout step after transforming every
/// sequence with `transform`.
fn count_correct<T, F>(
    params: &RnnParams<T>,
    dataset: &SequenceDataset,
    steps: &[usize],
    transform: F,
) -> Result<Vec<usize>, PerturbationError>
where
    T: Real,
    F: Fn(ArrayView2<f32>) -> Result<Array2<f32>, PerturbationError> + Sync,
{
    let per_chunk: Vec<Result<Vec<usize>, PerturbationError>> = dataset
        .sequences
        .par_chunks(SWEEP_CHUNK)
        .zip(dataset.labels.par_chunks(SWEEP_CHUNK))
        .map(|(seqs, labels)| {
            let transformed = seqs
                .iter()
                .map(|s| transform(s.view()))
                .collect::<Result<Vec<_>, _>>()?;
            let views: Vec<_> = transformed.iter().map(|s| s.view()).collect();
            let inputs = rnn::stack_sequences::<T>(&views);
            let logits = rnn::readout_logits(params, inputs.view(), steps)?;
            Ok(logits
                .iter()
                .map(|l| {
                    l.axis_iter(Axis(0))
                        .zip(labels)
                        .filter(|(row, &label)| rnn::argmax(row.view()) == label as usize)
                        .count()
                })
                .collect())
        })
        .collect();
    let mut totals = vec![0; steps.len()];
    for chunk in per_chunk {
        for (t, c) in totals.iter_mut().zip(chunk?) {
            *t += c;
        }
    }
    Ok(totals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Array2<f32> {
        Array2::from_shape_fn((28, 28), |(r, c)| (r * 28 + c) as f32 / 784.0 + 0.001)
    }

    #[test]
    fn blank_tail_cases() {
        let s = ramp();
        assert_eq!(blank_tail(s.view(), 0).unwrap(), s);
        assert!(blank_tail(s.view(), 28).unwrap().iter().all(|&v| v == 0.0));
        let b = blank_tail(s.view(), 5).unwrap();
        assert_eq!(b.dim(), (28, 28));
        assert_eq!(b.slice(s![..23, ..]), s.slice(s![..23, ..]));
        assert!(b.slice(s![23.., ..]).iter().all(|&v| v == 0.0));
        assert!(matches!(
            blank_tail(s.view(), 29),
            Err(PerturbationError::AmountOutOfRange { amount: 29, .. })
        ));
    }

    #[test]
    fn truncate_cases() {
        let s = ramp();
        assert_eq!(truncate(s.view(), 28).unwrap(), s);
        assert_eq!(truncate(s.view(), 1).unwrap().dim(), (1, 28));
        for n in 1..=28 {
            let blanked = blank_tail(s.view(), 28 - n).unwrap();
            assert_eq!(blanked.slice(s![..n, ..]), truncate(s.view(), n).unwrap());
        }
        assert!(truncate(s.view(), 0).is_err());
        assert!(truncate(s.view(), 29).is_err());
    }

    #[test]
    fn pad_blank_cases() {
        let s = ramp();
        assert_eq!(pad_blank(s.view(), 0).unwrap(), s);
        let twice = pad_blank(pad_blank(s.view(), 2).unwrap().view(), 3).unwrap();
        assert_eq!(twice, pad_blank(s.view(), 5).unwrap());
        let p = pad_blank(s.view(), 500).unwrap();
        assert_eq!(p.nrows(), 528);
        assert!(p.slice(s![28.., ..]).iter().all(|&v| v == 0.0));
        assert!(pad_blank(s.view(), 501).is_err());
    }

    #[test]
    fn readout_rule() {
        assert_eq!(
            PerturbationSpec::new(PerturbationKind::BlankTail, 9)
                .unwrap()
                .readout_step(),
            28
        );
        assert_eq!(
            PerturbationSpec::new(PerturbationKind::Truncate, 9)
                .unwrap()
                .readout_step(),
            9
        );
        assert_eq!(
            PerturbationSpec::new(PerturbationKind::PadBlank, 9)
                .unwrap()
                .readout_step(),
            37
        );
        assert_eq!(PerturbationKind::PadBlank.default_grid().len(), 501);
        assert_eq!(PerturbationKind::BlankTail.default_grid(), (1..=27).collect::<Vec<_>>());
    }

    #[test]
    fn transforms_leave_input_untouched() {
        let s = ramp();
        let copy = s.clone();
        for kind in PerturbationKind::ALL {
            PerturbationSpec::new(kind, 3).unwrap().apply(s.view()).unwrap();
        }
        assert_eq!(s, copy);
    }

    #[test]
    fn grid_validation() {
        let p = RnnParams::<f32>::zeros(Default::default());
        let ds = SequenceDataset::new(vec![ramp()], vec![0]).unwrap();
        for bad in [vec![], vec![3, 3], vec![4, 2]] {
            assert_eq!(
                accuracy_sweep(&p, &ds, PerturbationKind::BlankTail, &bad).unwrap_err(),
                PerturbationError::BadGrid
            );
        }
        assert!(accuracy_sweep(&p, &ds, PerturbationKind::Truncate, &[0, 1]).is_err());
        assert_eq!(
            accuracy_sweep(&p, &SequenceDataset::default(), PerturbationKind::Truncate, &[1]).unwrap_err(),
            PerturbationError::EmptyDataset
        );
    }
}
