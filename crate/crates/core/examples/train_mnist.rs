//! Trains the 200-unit RNN on sequential MNIST and reports per-epoch metrics.
//!
//! ```text
//! cargo run --release -p rnn-introspect --example train_mnist -- data/mnist 2 10000
//! ```
//! Arguments: MNIST directory, epochs (default 1), training-set limit
//! (default: all 60,000 images).

use std::path::PathBuf;

use rnn_introspect::dataset::load_mnist;
use rnn_introspect::trainer::{train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/mnist".into()));
    let epochs = args.next().map_or(Ok(1), |s| s.parse())?;
    let limit = args.next().map_or(Ok(usize::MAX), |s| s.parse())?;

    let train_set = load_mnist(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )?
    .take(limit);
    let test_set = load_mnist(&dir.join("t10k-images-idx3-ubyte"), &dir.join("t10k-labels-idx1-ubyte"))?;
    println!(
        "{} training sequences, {} test sequences",
        train_set.len(),
        test_set.len()
    );

    let config = TrainConfig {
        epochs,
        ..Default::default()
    };
    train::<f32>(&config, &train_set, Some(&test_set), |m| {
        println!(
            "epoch {:>2}  loss {:.4}  train acc {:.4}  test acc {:.4}  ({:.1}s)",
            m.epoch,
            m.train_loss,
            m.train_acc,
            m.test_acc.unwrap_or(f64::NAN),
            m.seconds
        );
    })?;
    Ok(())
}
