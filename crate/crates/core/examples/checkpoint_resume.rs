//! Trains a small network, stops after one epoch, saves and reloads the
//! checkpoint, then resumes and compares against an uninterrupted run.
//!
//! ```text
//! cargo run --release -p rnn-introspect --example checkpoint_resume
//! ```

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rnn_introspect::checkpoint::{load_checkpoint, save_checkpoint};
use rnn_introspect::dataset::SequenceDataset;
use rnn_introspect::rnn::Architecture;
use rnn_introspect::trainer::{resume, train, TrainConfig};

fn toy_dataset(n: usize) -> SequenceDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
    let sequences = labels
        .iter()
        .map(|&l| {
            Array2::from_shape_fn((28, 28), |(r, _)| {
                let on = r / 3 == l as usize;
                if on {
                    0.9
                } else {
                    rng.random_range(0.0..0.1)
                }
            })
        })
        .collect();
    SequenceDataset::new(sequences, labels).expect("valid toy data")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = toy_dataset(300);
    let config = TrainConfig {
        epochs: 3,
        batch_size: 32,
        arch: Architecture {
            hidden: 32,
            ..Architecture::default()
        },
        ..TrainConfig::default()
    };

    let full = train::<f32>(&config, &ds, None, |m| {
        println!("uninterrupted epoch {} loss {:.4}", m.epoch, m.train_loss)
    })?;

    let first = train::<f32>(&TrainConfig { epochs: 1, ..config }, &ds, None, |_| {})?;
    let path = std::env::temp_dir().join("rnn-introspect-example.ckpt");
    save_checkpoint(&first.checkpoint, &path)?;
    let mut restored = load_checkpoint::<f32>(&path)?;
    restored.config.epochs = 3;
    let resumed = resume(restored, &ds, None, |m| {
        println!("resumed epoch {} loss {:.4}", m.epoch, m.train_loss)
    })?;

    let same = resumed.checkpoint.to_bytes() == full.checkpoint.to_bytes();
    println!("resumed run bit-identical to uninterrupted run: {same}");
    Ok(())
}
