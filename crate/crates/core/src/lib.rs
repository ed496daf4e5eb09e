//! Training and introspection toolkit for a bias-free vanilla tanh RNN on
//! sequential MNIST.
//!
//! The crate covers the whole pipeline:
//!
//! - [`dataset`]: IDX parsing and row-by-row sequence conversion
//! - [`rnn`]: forward pass, cross-entropy, BPTT and Adam
//! - [`trainer`]: seeded mini-batch training, evaluation, checkpoints
//! - [`perturbation`]: blank-tail, truncation and blank-padding sweeps
//! - [`geometry`]: hidden-state capture, PCA dimensionality, exact t-SNE,
//!   k-NN class purity
//! - [`report`]: CSV/SVG outputs, run manifests and the command layer used by
//!   the `rnn-introspect` binary
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod checkpoint;
pub mod dataset;
pub mod geometry;
pub mod perturbation;
pub mod real;
pub mod report;
pub mod rnn;
pub mod trainer;

pub use real::Real;
