//! Hidden-state geometry: capture, PCA dimensionality, t-SNE and k-NN purity.

mod pca;
mod purity;
pub mod tsne;

use std::collections::BTreeMap;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::{SequenceDataset, IMAGE_ROWS, NUM_CLASSES};
use crate::real::Real;
use crate::rnn::{self, RnnError, RnnParams};

pub use pca::{center, dim_at, pca_spectrum, Spectrum, DEFAULT_THRESHOLD};
pub use purity::knn_purity;
pub use tsne::{tsne, EmbeddingResult, TsneConfig};

const CAPTURE_CHUNK: usize = 500;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("timestep {step} outside 1..={max}")]
    TimestepOutOfRange { step: usize, max: usize },
    #[error("need at least {needed} rows, got {rows}")]
    TooFewRows { rows: usize, needed: usize },
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("perplexity {perplexity} needs more than 1 and at most (n - 1) / 3 with n = {n}")]
    PerplexityTooLargeForN { perplexity: f64, n: usize },
    #[error("t-SNE diverged at iteration {iteration}")]
    NonFiniteEmbedding { iteration: usize },
    #[error("k = {k} needs 1 <= k < n = {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("{rows} rows but {labels} labels")]
    LabelMismatch { rows: usize, labels: usize },
    #[error("subsample of {requested} from {available} examples")]
    SubsampleTooLarge { requested: usize, available: usize },
    #[error(transparent)]
    Numeric(#[from] RnnError),
}

/// Hidden states of many examples at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    pub timestep: usize,
    /// One row per example.
    pub states: Array2<f64>,
    pub labels: Vec<u8>,
}

impl StateMatrix {
    /// Rows belonging to `class`.
    pub fn class_rows(&self, class: u8) -> Array2<f64> {
        let idx: Vec<usize> = (0..self.labels.len()).filter(|&i| self.labels[i] == class).collect();
        self.states.select(Axis(0), &idx)
    }
}

/// Records `h_t` for every example at each requested timestep.
pub fn capture_states<T: Real>(
    params: &RnnParams<T>,
    dataset: &SequenceDataset,
    timesteps: &[usize],
) -> Result<BTreeMap<usize, StateMatrix>, GeometryError> {
    let max = dataset.sequences.iter().map(|s| s.nrows()).min().unwrap_or(IMAGE_ROWS);
    if let Some(&bad) = timesteps.iter().find(|&&t| t == 0 || t > max) {
        return Err(GeometryError::TimestepOutOfRange { step: bad, max });
    }
    let hidden = params.arch.hidden;
    let mut out: BTreeMap<usize, StateMatrix> = timesteps
        .iter()
        .map(|&t| {
            let m = StateMatrix {
                timestep: t,
                states: Array2::zeros((dataset.len(), hidden)),
                labels: dataset.labels.clone(),
            };
            (t, m)
        })
        .collect();
    let last = timesteps.iter().copied().max().unwrap_or(0);
    for (chunk_index, chunk) in dataset.sequences.chunks(CAPTURE_CHUNK).enumerate() {
        let offset = chunk_index * CAPTURE_CHUNK;
        let views: Vec<_> = chunk.iter().map(|s| s.slice(ndarray::s![..last, ..])).collect();
        let inputs = rnn::stack_sequences::<T>(&views);
        rnn::run_batch(params, inputs.view(), |t, h| {
            if let Some(m) = out.get_mut(&t) {
                for (b, row) in h.axis_iter(Axis(0)).enumerate() {
                    m.states
                        .row_mut(offset + b)
                        .iter_mut()
                        .zip(row)
                        .for_each(|(d, s)| *d = s.to_f64().expect("finite state"));
                }
            }
        })?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scope {
    Global,
    Class(u8),
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scope::Global => f.write_str("global"),
            Scope::Class(c) => write!(f, "class_{c}"),
        }
    }
}

/// A PCA spectrum tagged with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub timestep: usize,
    pub scope: Scope,
    pub spectrum: Spectrum,
    pub dim90: usize,
}

/// A class left out of the per-class spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkippedClass {
    pub timestep: usize,
    pub class: u8,
    pub rows: usize,
}

pub fn global_spectrum(states: &StateMatrix) -> Result<SpectrumResult, GeometryError> {
    let spectrum = pca_spectrum(states.states.view())?;
    Ok(SpectrumResult {
        timestep: states.timestep,
        scope: Scope::Global,
        dim90: spectrum.dim90(),
        spectrum,
    })
}

/// One spectrum per class with at least two rows; the rest are reported as
/// skipped.
pub fn per_class_spectra(states: &StateMatrix) -> Result<(Vec<SpectrumResult>, Vec<SkippedClass>), GeometryError> {
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for class in 0..NUM_CLASSES as u8 {
        let rows = states.class_rows(class);
        match rows.nrows() {
            0 => {}
            1 => skipped.push(SkippedClass {
                timestep: states.timestep,
                class,
                rows: 1,
            }),
            _ => {
                let spectrum = pca_spectrum(rows.view())?;
                results.push(SpectrumResult {
                    timestep: states.timestep,
                    scope: Scope::Class(class),
                    dim90: spectrum.dim90(),
                    spectrum,
                });
            }
        }
    }
    Ok((results, skipped))
}

/// Global and per-class spectra across timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionalityCurve {
    pub spectra: Vec<SpectrumResult>,
    pub skipped: Vec<SkippedClass>,
}

impl DimensionalityCurve {
    /// `(timestep, dim90)` for one scope, in timestep order.
    pub fn dims(&self, scope: Scope) -> Vec<(usize, usize)> {
        self.spectra
            .iter()
            .filter(|s| s.scope == scope)
            .map(|s| (s.timestep, s.dim90))
            .collect()
    }

    pub fn is_degenerate_at(&self, timestep: usize) -> bool {
        self.spectra
            .iter()
            .any(|s| s.timestep == timestep && s.scope == Scope::Global && s.spectrum.degenerate)
    }
}

pub fn spectra_for(states: &StateMatrix) -> Result<(Vec<SpectrumResult>, Vec<SkippedClass>), GeometryError> {
    let mut spectra = vec![global_spectrum(states)?];
    let (classes, skipped) = per_class_spectra(states)?;
    spectra.extend(classes);
    Ok((spectra, skipped))
}

/// PCA spectra (global and per class) of the hidden states at each timestep.
pub fn dimensionality_curve<T: Real>(
    params: &RnnParams<T>,
    dataset: &SequenceDataset,
    timesteps: &[usize],
) -> Result<DimensionalityCurve, GeometryError> {
    let captured = capture_states(params, dataset, timesteps)?;
    let mut curve = DimensionalityCurve {
        spectra: Vec::new(),
        skipped: Vec::new(),
    };
    for states in captured.values() {
        let (spectra, skipped) = spectra_for(states)?;
        curve.spectra.extend(spectra);
        curve.skipped.extend(skipped);
    }
    Ok(curve)
}

/// Seeded class-stratified subsample, returned as sorted indices.
///
/// Each class receives `size * n_c / n` slots, rounded down, with the
/// leftover slots going to the classes with the largest remainders (lowest
/// class first on ties).
pub fn stratified_subsample(labels: &[u8], size: usize, seed: u64) -> Result<Vec<usize>, GeometryError> {
    let n = labels.len();
    if size > n {
        return Err(GeometryError::SubsampleTooLarge {
            requested: size,
            available: n,
        });
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let mut quota: Vec<usize> = by_class.iter().map(|c| size * c.len() / n).collect();
    let mut remainders: Vec<(usize, usize)> = by_class
        .iter()
        .enumerate()
        .map(|(c, members)| ((size * members.len()) % n, c))
        .collect();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let missing = size - quota.iter().sum::<usize>();
    for &(_, c) in remainders.iter().take(missing) {
        quota[c] += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(size);
    for (members, q) in by_class.iter_mut().zip(quota) {
        members.shuffle(&mut rng);
        chosen.extend_from_slice(&members[..q]);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnn::Architecture;

    fn dataset(n: usize) -> SequenceDataset {
        let sequences = (0..n)
            .map(|i| Array2::from_shape_fn((28, 28), |(r, c)| ((r + 2 * c + 5 * i) % 9) as f32 / 9.0))
            .collect();
        SequenceDataset::new(sequences, (0..n).map(|i| (i % 10) as u8).collect()).unwrap()
    }

    #[test]
    fn zero_params_capture_zero_states() {
        let p = RnnParams::<f32>::zeros(Architecture::default());
        let states = capture_states(&p, &dataset(12), &[1, 4, 28]).unwrap();
        assert_eq!(states.len(), 3);
        for m in states.values() {
            assert_eq!(m.states.dim(), (12, 200));
            assert!(m.states.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn final_capture_matches_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = RnnParams::<f32>::init_uniform(Architecture::default(), &mut rng);
        let ds = dataset(3);
        let states = capture_states(&p, &ds, &[28]).unwrap();
        for i in 0..3 {
            let (traj, _) = rnn::forward(&p, ds.sequences[i].view()).unwrap();
            let expected = traj.last().mapv(|v| v as f64);
            assert_eq!(states[&28].states.row(i), expected);
        }
    }

    #[test]
    fn timestep_range_checked() {
        let p = RnnParams::<f32>::zeros(Architecture::default());
        for bad in [0, 29] {
            assert!(matches!(
                capture_states(&p, &dataset(2), &[4, bad]),
                Err(GeometryError::TimestepOutOfRange { .. })
            ));
        }
    }

    #[test]
    fn orthogonal_class_lines() {
        // class 0 varies along x, class 1 along y
        let mut states = Array2::zeros((20, 3));
        let mut labels = Vec::new();
        for i in 0..10 {
            states[[i, 0]] = i as f64;
            labels.push(0);
        }
        for i in 10..20 {
            states[[i, 1]] = (i - 10) as f64;
            labels.push(1);
        }
        let m = StateMatrix {
            timestep: 5,
            states,
            labels,
        };
        let (classes, skipped) = per_class_spectra(&m).unwrap();
        assert!(skipped.is_empty());
        assert_eq!(classes.len(), 2);
        assert!(classes.iter().all(|s| s.dim90 == 1));
        assert_eq!(global_spectrum(&m).unwrap().dim90, 2);
    }

    #[test]
    fn singleton_class_skipped() {
        let states = Array2::from_shape_fn((5, 2), |(i, j)| (i * 3 + j * i) as f64);
        let m = StateMatrix {
            timestep: 1,
            states,
            labels: vec![0, 0, 0, 0, 7],
        };
        let (classes, skipped) = per_class_spectra(&m).unwrap();
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].scope, Scope::Class(0));
        assert_eq!(classes[0].spectrum, pca_spectrum(m.class_rows(0).view()).unwrap());
        assert_eq!(
            skipped,
            vec![SkippedClass {
                timestep: 1,
                class: 7,
                rows: 1
            }]
        );
    }

    #[test]
    fn zero_params_curve_is_degenerate() {
        let p = RnnParams::<f32>::zeros(Architecture::default());
        let curve = dimensionality_curve(&p, &dataset(20), &(1..=28).collect::<Vec<_>>()).unwrap();
        for t in 1..=28 {
            assert!(curve.is_degenerate_at(t));
        }
        assert!(curve.dims(Scope::Global).iter().all(|&(_, d)| d == 0));
    }

    #[test]
    fn stratified_quota() {
        let labels: Vec<u8> = (0..1000).map(|i| if i < 500 { 0 } else { (i % 9 + 1) as u8 }).collect();
        let idx = stratified_subsample(&labels, 100, 3).unwrap();
        assert_eq!(idx.len(), 100);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        let zeros = idx.iter().filter(|&&i| labels[i] == 0).count();
        assert_eq!(zeros, 50);
        assert_eq!(idx, stratified_subsample(&labels, 100, 3).unwrap());
        assert_ne!(idx, stratified_subsample(&labels, 100, 4).unwrap());
        assert!(stratified_subsample(&labels, 1001, 3).is_err());
    }
}
