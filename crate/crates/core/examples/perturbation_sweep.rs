//! Accuracy under the three input perturbations: blanking the last rows,
//! truncating the sequence, and appending blank rows.
//!
//! ```text
//! cargo run --release -p rnn-introspect --example perturbation_sweep -- data/mnist [checkpoint.ckpt]
//! ```
//! Without a checkpoint a network is trained for two epochs on 10,000 images
//! first.

use std::path::{Path, PathBuf};

use rnn_introspect::checkpoint::load_checkpoint;
use rnn_introspect::dataset::load_mnist;
use rnn_introspect::perturbation::{accuracy_sweep, PerturbationKind};
use rnn_introspect::rnn::RnnParams;
use rnn_introspect::trainer::{train, TrainConfig};

fn params(dir: &Path, checkpoint: Option<PathBuf>) -> Result<RnnParams<f32>, Box<dyn std::error::Error>> {
    if let Some(path) = checkpoint {
        return Ok(load_checkpoint::<f32>(&path)?.params);
    }
    let train_set = load_mnist(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )?
    .take(10_000);
    let config = TrainConfig {
        epochs: 2,
        ..Default::default()
    };
    let out = train::<f32>(&config, &train_set, None, |m| {
        eprintln!("epoch {} loss {:.4}", m.epoch, m.train_loss)
    })?;
    Ok(out.checkpoint.params)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/mnist".into()));
    let params = params(&dir, args.next().map(PathBuf::from))?;
    let test_set = load_mnist(&dir.join("t10k-images-idx3-ubyte"), &dir.join("t10k-labels-idx1-ubyte"))?;

    let blank = accuracy_sweep(
        &params,
        &test_set,
        PerturbationKind::BlankTail,
        &PerturbationKind::BlankTail.default_grid(),
    )?;
    let cut = accuracy_sweep(
        &params,
        &test_set,
        PerturbationKind::Truncate,
        &PerturbationKind::Truncate.default_grid(),
    )?;
    println!("rows shown  blank tail  truncated");
    for shown in (1..=27).rev().step_by(2) {
        println!(
            "{shown:>10}  {:>10.4}  {:>9.4}",
            blank.accuracy_at(28 - shown).unwrap_or(f64::NAN),
            cut.accuracy_at(shown).unwrap_or(f64::NAN)
        );
    }

    let pad = accuracy_sweep(
        &params,
        &test_set,
        PerturbationKind::PadBlank,
        &PerturbationKind::PadBlank.default_grid(),
    )?;
    println!("\nappended blank rows  accuracy");
    for k in [0, 1, 2, 5, 10, 25, 50, 100, 200, 300, 400, 500] {
        println!("{k:>19}  {:.4}", pad.accuracy_at(k).unwrap_or(f64::NAN));
    }
    Ok(())
}
