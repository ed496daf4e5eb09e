//! Oracle comparisons returning the measured error, shared by the oracle
//! tests and the acceptance suite.

use ndarray::{Array1, Array2};
use rand::Rng;
use rnn_introspect::geometry::pca_spectrum;
use rnn_introspect::geometry::tsne::{joint_affinities, kl_gradient};
use rnn_introspect::rnn::{self, Architecture, RnnParams};

use super::*;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_FLOOR: f64 = 1e-6;
pub const TSNE_FD_STEP: f64 = 1e-3;

/// Library forward pass vs the plain recurrence, full-size network.
pub fn forward_error(seed: u64) -> f64 {
    let arch = Architecture::default();
    let params = RnnParams::<f64>::init_uniform(arch, &mut rng(seed));
    let x = random_matrix(28, arch.input, 0.0, 1.0, seed + 100);
    let (traj, logits) = rnn::forward(&params, x.view()).unwrap();
    let states = naive_states(&params, x.view());
    let mut err: f64 = 0.0;
    for (t, s) in states.iter().enumerate() {
        err = err.max(max_rel_error(traj.at(t + 1).as_slice().unwrap(), s, 1e-12));
    }
    let z = naive_logits(&params, states.last().unwrap());
    err.max(max_rel_error(logits.as_slice().unwrap(), &z, 1e-12))
}

/// Softmax cross-entropy gradient vs central differences.
pub fn softmax_grad_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let classes = 10;
    let z: Array1<f64> = (0..classes).map(|_| r.random_range(-4.0..4.0)).collect();
    let label = r.random_range(0..classes);
    let (_, d) = rnn::loss_and_dlogits(z.view(), label).unwrap();
    let numeric: Vec<f64> = (0..classes)
        .map(|i| {
            let mut plus = z.to_vec();
            let mut minus = z.to_vec();
            plus[i] += FD_STEP;
            minus[i] -= FD_STEP;
            (naive_cross_entropy(&plus, label) - naive_cross_entropy(&minus, label)) / (2.0 * FD_STEP)
        })
        .collect();
    max_rel_error(d.as_slice().unwrap(), &numeric, GRAD_FLOOR)
}

/// BPTT gradient vs central differences of the plain-loop loss.
pub fn bptt_error(params: &RnnParams<f64>, x: &Array2<f64>, label: usize) -> f64 {
    let (loss, grads) = rnn::bptt(params, x.view(), label, x.nrows()).unwrap();
    let direct = naive_loss(params, x.view(), label);
    assert!((loss - direct).abs() <= 1e-12 * direct.abs().max(1.0));
    let numeric = numeric_param_grad(params, FD_STEP, |p| naive_loss(p, x.view(), label));
    grads
        .slices()
        .iter()
        .zip(&numeric)
        .map(|(a, n)| max_rel_error(a, n, GRAD_FLOOR))
        .fold(0.0, f64::max)
}

/// A seeded shape-reduced instance: hidden <= 8, steps <= 6.
pub fn bptt_instance(seed: u64) -> (RnnParams<f64>, Array2<f64>, usize) {
    let mut r = rng(seed);
    let arch = small_arch(r.random_range(1..=5), r.random_range(1..=8), r.random_range(2..=10));
    let steps = r.random_range(1..=6);
    let params = random_params(arch, 0.9, seed + 1000);
    let x = random_matrix(steps, arch.input, 0.0, 1.0, seed + 2000);
    let label = r.random_range(0..arch.classes);
    (params, x, label)
}

/// t-SNE KL gradient vs central differences of the plain-loop KL.
pub fn tsne_grad_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = r.random_range(10..=30);
    let data = random_matrix(n, 5, -1.0, 1.0, seed + 1);
    let perplexity = ((n - 1) as f64 / 3.0).min(5.0);
    let p = joint_affinities(data.view(), perplexity).unwrap();
    let y = random_matrix(n, 2, -2.0, 2.0, seed + 2);
    let analytic = kl_gradient(p.view(), y.view());
    // fourth-order stencil: KL is O(1) while some gradient components are
    // O(1e-7), beyond what a central difference resolves
    let h = TSNE_FD_STEP;
    let mut numeric = Array2::<f64>::zeros((n, 2));
    let mut work = y.clone();
    for i in 0..n {
        for c in 0..2 {
            let orig = work[[i, c]];
            let mut at = |d: f64| {
                work[[i, c]] = orig + d;
                naive_kl(p.view(), work.view())
            };
            let value = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
            work[[i, c]] = orig;
            numeric[[i, c]] = value;
        }
    }
    max_rel_error(analytic.as_slice().unwrap(), numeric.as_slice().unwrap(), GRAD_FLOOR)
}

/// SVD spectrum vs covariance eigenvalues on a random small matrix.
pub fn pca_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let rows = r.random_range(3..=40);
    let cols = r.random_range(2..=10);
    let mut data = random_matrix(rows, cols, -3.0, 3.0, seed + 1);
    // uneven column scales give a spread-out spectrum
    for (j, mut col) in data.columns_mut().into_iter().enumerate() {
        col *= 1.0 + j as f64;
    }
    let svd = pca_spectrum(data.view()).unwrap();
    let oracle = covariance_ratios(data.view());
    let mut err: f64 = 0.0;
    for (i, o) in oracle.iter().enumerate() {
        let s = svd.ratios.get(i).copied().unwrap_or(0.0);
        err = err.max((s - o).abs());
    }
    err
}
