//! Exact (all-pairs) t-SNE.
//!
//! Conditional Gaussian affinities are calibrated per row by binary search on
//! the precision so that each row reaches the target perplexity, then
//! symmetrized as `P = (P_cond + P_cond^T) / 2N`. The 2-D embedding uses the
//! Student-t kernel `(1 + |y_i - y_j|^2)^-1` and is fitted by gradient descent
//! with momentum, per-coordinate adaptive gains and early exaggeration.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::GeometryError;

/// Output dimensionality.
pub const EMBED_DIMS: usize = 2;

/// Largest allowed gap between realized and target perplexity.
pub const PERPLEXITY_TOLERANCE: f64 = 1e-3;
const MAX_SEARCH_STEPS: usize = 200;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub exaggeration: f64,
    /// Iterations run with exaggerated affinities and the initial momentum.
    pub exaggeration_iters: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    /// Standard deviation of the Gaussian initial embedding.
    pub init_std: f64,
    pub seed: u64,
    /// KL divergence is recorded every this many iterations (0 disables the
    /// trace; the final value is always recorded).
    pub kl_every: usize,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            init_std: 1e-4,
            seed: 0,
            kl_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingResult {
    /// `n x 2`
    pub points: Array2<f64>,
    pub labels: Vec<u8>,
    pub perplexity: f64,
    pub iterations: usize,
    pub final_kl: f64,
    pub seed: u64,
    /// `(iteration, KL)` pairs; iteration counts completed updates.
    pub kl_trace: Vec<(usize, f64)>,
}

fn squared_distances(data: ArrayView2<f64>) -> Array2<f64> {
    let n = data.nrows();
    let mut d = Array2::zeros((n, n));
    d.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let xi = data.row(i);
            for (j, out) in row.iter_mut().enumerate() {
                if j != i {
                    *out = Zip::from(&xi)
                        .and(&data.row(j))
                        .fold(0.0, |acc, &a, &b| acc + (a - b) * (a - b));
                }
            }
        });
    d
}

/// Gaussian conditional distribution of one row at precision `beta`, with its
/// natural-log entropy.
fn row_distribution(dists: &[f64], skip: usize, beta: f64, out: &mut [f64]) -> f64 {
    let min = dists
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != skip)
        .fold(f64::INFINITY, |m, (_, &d)| m.min(d));
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (j, (&d, p)) in dists.iter().zip(out.iter_mut()).enumerate() {
        if j == skip {
            *p = 0.0;
            continue;
        }
        let shifted = d - min;
        *p = (-beta * shifted).exp();
        sum += *p;
        weighted += shifted * *p;
    }
    for p in out.iter_mut() {
        *p /= sum;
    }
    sum.ln() + beta * weighted / sum
}

/// Row-conditional affinities `p_{j|i}` and each row's realized perplexity.
pub fn conditional_affinities(
    data: ArrayView2<f64>,
    perplexity: f64,
) -> Result<(Array2<f64>, Vec<f64>), GeometryError> {
    let n = data.nrows();
    check_perplexity(n, perplexity)?;
    if data.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFiniteInput);
    }
    let dists = squared_distances(data);
    let target = perplexity.ln();
    let mut p = Array2::zeros((n, n));
    let realized: Vec<f64> = p
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .map(|(i, mut row)| {
            let d = dists.row(i);
            let d = d.as_slice().expect("standard layout");
            let out = row.as_slice_mut().expect("standard layout");
            let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
            let mut entropy = row_distribution(d, i, beta, out);
            for _ in 0..MAX_SEARCH_STEPS {
                if (entropy.exp() - perplexity).abs() < PERPLEXITY_TOLERANCE * 0.5 {
                    break;
                }
                if entropy > target {
                    lo = beta;
                    beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
                } else {
                    hi = beta;
                    beta = (beta + lo) / 2.0;
                }
                entropy = row_distribution(d, i, beta, out);
            }
            entropy.exp()
        })
        .collect();
    Ok((p, realized))
}

/// Symmetrized joint affinities `(P_cond + P_cond^T) / 2N`.
pub fn joint_affinities(data: ArrayView2<f64>, perplexity: f64) -> Result<Array2<f64>, GeometryError> {
    let (cond, _) = conditional_affinities(data, perplexity)?;
    let n = cond.nrows() as f64;
    let mut p = &cond + &cond.t();
    p /= 2.0 * n;
    Ok(p)
}

fn check_perplexity(n: usize, perplexity: f64) -> Result<(), GeometryError> {
    if perplexity.is_nan() || perplexity <= 1.0 || (n as f64) < 3.0 * perplexity + 1.0 {
        return Err(GeometryError::PerplexityTooLargeForN { perplexity, n });
    }
    Ok(())
}

/// Unnormalized Student-t kernel matrix (zero diagonal) and its sum.
fn student_kernel(y: ArrayView2<f64>) -> (Array2<f64>, f64) {
    let n = y.nrows();
    let mut num = Array2::zeros((n, n));
    let row_sums: Vec<f64> = num
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .map(|(i, mut row)| {
            let mut s = 0.0;
            for j in 0..n {
                if j != i {
                    let dx = y[[i, 0]] - y[[j, 0]];
                    let dy = y[[i, 1]] - y[[j, 1]];
                    let v = 1.0 / (1.0 + dx * dx + dy * dy);
                    row[j] = v;
                    s += v;
                }
            }
            s
        })
        .collect();
    let z = row_sums.iter().sum();
    (num, z)
}

/// `KL(P || Q)` for an embedding `y`.
pub fn kl_divergence(p: ArrayView2<f64>, y: ArrayView2<f64>) -> f64 {
    let (num, z) = student_kernel(y);
    Zip::from(&p).and(&num).fold(0.0, |acc, &pij, &nij| {
        if pij > 0.0 {
            acc + pij * (pij / (nij / z).max(f64::MIN_POSITIVE)).ln()
        } else {
            acc
        }
    })
}

/// Gradient of `KL(P || Q)` with respect to `y`:
/// `4 sum_j (p_ij - q_ij) (y_i - y_j) / (1 + |y_i - y_j|^2)`.
pub fn kl_gradient(p: ArrayView2<f64>, y: ArrayView2<f64>) -> Array2<f64> {
    let (num, z) = student_kernel(y);
    gradient_from_kernel(p, y, &num, z)
}

fn gradient_from_kernel(p: ArrayView2<f64>, y: ArrayView2<f64>, num: &Array2<f64>, z: f64) -> Array2<f64> {
    let n = y.nrows();
    let mut grad = Array2::zeros((n, EMBED_DIMS));
    grad.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut g)| {
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let nij = num[[i, j]];
                let mult = (p[[i, j]] - nij / z) * nij;
                gx += mult * (y[[i, 0]] - y[[j, 0]]);
                gy += mult * (y[[i, 1]] - y[[j, 1]]);
            }
            g[0] = 4.0 * gx;
            g[1] = 4.0 * gy;
        });
    grad
}

/// Seeded `N(0, std^2)` starting embedding.
pub fn initial_embedding(n: usize, std: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std).expect("positive std");
    Array2::from_shape_simple_fn((n, EMBED_DIMS), || normal.sample(&mut rng))
}

/// Embeds the rows of `data` in two dimensions.
pub fn tsne(data: ArrayView2<f64>, labels: &[u8], config: &TsneConfig) -> Result<EmbeddingResult, GeometryError> {
    let n = data.nrows();
    if labels.len() != n {
        return Err(GeometryError::LabelMismatch {
            rows: n,
            labels: labels.len(),
        });
    }
    let p = joint_affinities(data, config.perplexity)?;
    let exaggerated = &p * config.exaggeration;

    let mut y = initial_embedding(n, config.init_std, config.seed);
    let mut update = Array2::<f64>::zeros((n, EMBED_DIMS));
    let mut gains = Array2::<f64>::ones((n, EMBED_DIMS));
    let mut trace = Vec::new();

    for iter in 0..config.iterations {
        let early = iter < config.exaggeration_iters;
        let target = if early { exaggerated.view() } else { p.view() };
        let momentum = if early {
            config.initial_momentum
        } else {
            config.final_momentum
        };
        let (num, z) = student_kernel(y.view());
        let grad = gradient_from_kernel(target, y.view(), &num, z);

        Zip::from(&mut gains).and(&grad).and(&update).for_each(|gain, &g, &u| {
            *gain = if (g > 0.0) != (u > 0.0) {
                *gain + 0.2
            } else {
                (*gain * 0.8).max(MIN_GAIN)
            };
        });
        Zip::from(&mut update)
            .and(&grad)
            .and(&gains)
            .for_each(|u, &g, &gain| *u = momentum * *u - config.learning_rate * gain * g);
        y += &update;
        let mean: Array1<f64> = y.mean_axis(Axis(0)).expect("non-empty");
        y -= &mean;

        if y.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFiniteEmbedding { iteration: iter + 1 });
        }
        let done = iter + 1;
        if config.kl_every > 0 && done % config.kl_every == 0 {
            trace.push((done, kl_divergence(p.view(), y.view())));
        }
    }
    let final_kl = match trace.last() {
        Some(&(it, kl)) if it == config.iterations => kl,
        _ => {
            let kl = kl_divergence(p.view(), y.view());
            trace.push((config.iterations, kl));
            kl
        }
    };
    Ok(EmbeddingResult {
        points: y,
        labels: labels.to_vec(),
        perplexity: config.perplexity,
        iterations: config.iterations,
        final_kl,
        seed: config.seed,
        kl_trace: trace,
    })
}
