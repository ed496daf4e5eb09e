//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the library's numeric kernels.

#![allow(dead_code, clippy::needless_range_loop)]

pub mod checks;

use std::path::PathBuf;

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rnn_introspect::dataset::{load_mnist, SequenceDataset};
use rnn_introspect::rnn::{Architecture, RnnParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_arch(input: usize, hidden: usize, classes: usize) -> Architecture {
    Architecture {
        input,
        hidden,
        classes,
        output_bias: true,
    }
}

/// Parameters drawn uniformly from `[-scale, scale]`, including the bias.
pub fn random_params(arch: Architecture, scale: f64, seed: u64) -> RnnParams<f64> {
    let mut r = rng(seed);
    let mut p = RnnParams::<f64>::zeros(arch);
    for s in p.slices_mut() {
        for v in s.iter_mut() {
            *v = r.random_range(-scale..scale);
        }
    }
    p
}

pub fn random_matrix(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_simple_fn((rows, cols), || r.random_range(lo..hi))
}

/// Plain-loop recurrence `h_t = tanh(W_in x_t + W_rec h_{t-1})`; returns
/// `h_1..h_T`.
pub fn naive_states(p: &RnnParams<f64>, x: ArrayView2<f64>) -> Vec<Vec<f64>> {
    let hidden = p.arch.hidden;
    let mut h = vec![0.0; hidden];
    let mut out = Vec::new();
    for t in 0..x.nrows() {
        let mut next = vec![0.0; hidden];
        for i in 0..hidden {
            let mut a = 0.0;
            for k in 0..p.arch.input {
                a += p.w_in[[i, k]] * x[[t, k]];
            }
            for k in 0..hidden {
                a += p.w_rec[[i, k]] * h[k];
            }
            next[i] = a.tanh();
        }
        h = next;
        out.push(h.clone());
    }
    out
}

pub fn naive_logits(p: &RnnParams<f64>, h: &[f64]) -> Vec<f64> {
    (0..p.arch.classes)
        .map(|c| {
            let mut z = if p.arch.output_bias { p.b_out[c] } else { 0.0 };
            for (k, hk) in h.iter().enumerate() {
                z += p.w_out[[c, k]] * hk;
            }
            z
        })
        .collect()
}

/// `log(sum exp z) - z[label]`, stabilized.
pub fn naive_cross_entropy(z: &[f64], label: usize) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - z[label]
}

pub fn naive_loss(p: &RnnParams<f64>, x: ArrayView2<f64>, label: usize) -> f64 {
    let states = naive_states(p, x);
    naive_cross_entropy(&naive_logits(p, states.last().unwrap()), label)
}

/// Central differences of `f` at every parameter, in `slices()` order.
pub fn numeric_param_grad(p: &RnnParams<f64>, h: f64, f: impl Fn(&RnnParams<f64>) -> f64) -> Vec<Vec<f64>> {
    let mut work = p.clone();
    let mut out = Vec::new();
    for s in 0..4 {
        let len = p.slices()[s].len();
        let mut g = vec![0.0; len];
        for (i, gi) in g.iter_mut().enumerate() {
            let orig = work.slices()[s][i];
            work.slices_mut()[s][i] = orig + h;
            let plus = f(&work);
            work.slices_mut()[s][i] = orig - h;
            let minus = f(&work);
            work.slices_mut()[s][i] = orig;
            *gi = (plus - minus) / (2.0 * h);
        }
        out.push(g);
    }
    out
}

/// Elementwise relative error with a floor on the denominator so that
/// vanishing components are compared absolutely.
pub fn max_rel_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, sorted descending.
pub fn jacobi_eigenvalues(mut a: Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Explained-variance ratios from the sample covariance.
pub fn covariance_ratios(data: ArrayView2<f64>) -> Vec<f64> {
    let (n, d) = data.dim();
    let mean: Array1<f64> = (0..d).map(|j| data.column(j).sum() / n as f64).collect();
    let mut cov = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for r in 0..n {
                s += (data[[r, i]] - mean[i]) * (data[[r, j]] - mean[j]);
            }
            cov[[i, j]] = s / (n as f64 - 1.0);
        }
    }
    let ev = jacobi_eigenvalues(cov);
    let total: f64 = ev.iter().map(|v| v.max(0.0)).sum();
    ev.iter().map(|v| v.max(0.0) / total).collect()
}

/// Plain-loop `KL(P || Q)` with the Student-t kernel.
pub fn naive_kl(p: ArrayView2<f64>, y: ArrayView2<f64>) -> f64 {
    let n = y.nrows();
    let kernel = |i: usize, j: usize| {
        let d: f64 = (0..y.ncols()).map(|c| (y[[i, c]] - y[[j, c]]).powi(2)).sum();
        1.0 / (1.0 + d)
    };
    let mut z = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                z += kernel(i, j);
            }
        }
    }
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j && p[[i, j]] > 0.0 {
                kl += p[[i, j]] * (p[[i, j]] / (kernel(i, j) / z)).ln();
            }
        }
    }
    kl
}

/// Synthetic dataset of `n` 28x28 sequences whose label is encoded by
/// which band of rows is bright, plus noise.
pub fn synthetic_digits(n: usize, seed: u64) -> SequenceDataset {
    let mut r = rng(seed);
    let mut sequences = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 10) as u8;
        let seq = Array2::from_shape_fn((28, 28), |(row, col)| {
            let band = row / 3 == label as usize || col / 3 == label as usize;
            let base = if band { 0.8 } else { 0.0 };
            (base + r.random_range(0.0..0.2f32)).min(1.0)
        });
        sequences.push(seq);
        labels.push(label);
    }
    SequenceDataset::new(sequences, labels).unwrap()
}

pub fn mnist_dir() -> PathBuf {
    match std::env::var_os("MNIST_DIR") {
        Some(d) => PathBuf::from(d),
        None => PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"),
    }
}

pub struct MnistFiles {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

pub fn mnist_files() -> Option<MnistFiles> {
    let d = mnist_dir();
    let f = MnistFiles {
        train_images: d.join("train-images-idx3-ubyte"),
        train_labels: d.join("train-labels-idx1-ubyte"),
        test_images: d.join("t10k-images-idx3-ubyte"),
        test_labels: d.join("t10k-labels-idx1-ubyte"),
    };
    [&f.train_images, &f.train_labels, &f.test_images, &f.test_labels]
        .iter()
        .all(|p| p.is_file())
        .then_some(f)
}

pub fn load_test_set(files: &MnistFiles) -> SequenceDataset {
    load_mnist(&files.test_images, &files.test_labels).unwrap()
}
