//! Hidden-state geometry over time: explained-variance dimensionality of the
//! state cloud at every step and k-NN class purity at a few steps.
//!
//! ```text
//! cargo run --release -p rnn-introspect --example hidden_geometry -- data/mnist checkpoint.ckpt
//! ```

use std::path::PathBuf;

use rnn_introspect::checkpoint::load_checkpoint;
use rnn_introspect::dataset::load_mnist;
use rnn_introspect::geometry::{capture_states, dimensionality_curve, knn_purity, stratified_subsample, Scope};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/mnist".into()));
    let ckpt = PathBuf::from(args.next().ok_or("usage: hidden_geometry <mnist dir> <checkpoint>")?);
    let params = load_checkpoint::<f32>(&ckpt)?.params;
    let test_set = load_mnist(&dir.join("t10k-images-idx3-ubyte"), &dir.join("t10k-labels-idx1-ubyte"))?;

    let steps: Vec<usize> = (1..=28).collect();
    let curve = dimensionality_curve(&params, &test_set, &steps)?;
    println!("step  dim90 (all digits)");
    for (t, d) in curve.dims(Scope::Global) {
        println!("{t:>4}  {d:>5}  {}", "#".repeat(d));
    }

    let idx = stratified_subsample(&test_set.labels, 2000, 0)?;
    let subset = test_set.select(&idx);
    let states = capture_states(&params, &subset, &[4, 14, 28])?;
    println!("\nstep  10-NN purity");
    for (t, m) in &states {
        println!("{t:>4}  {:.4}", knn_purity(m.states.view(), &m.labels, 10)?);
    }
    Ok(())
}
