//! Embeds three Gaussian clusters with exact t-SNE and writes a scatter SVG.
//!
//! ```text
//! cargo run --release -p rnn-introspect --example tsne_embedding -- blobs.svg
//! ```

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rnn_introspect::geometry::{knn_purity, tsne, TsneConfig};
use rnn_introspect::report::svg::{scatter_chart, Axes};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "tsne_blobs.svg".into());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let noise = Normal::new(0.0, 1.0)?;
    let per_class = 60;
    let labels: Vec<u8> = (0..3 * per_class).map(|i| (i / per_class) as u8).collect();
    let data = Array2::from_shape_fn((labels.len(), 20), |(i, j)| {
        let centre = if j % 3 == labels[i] as usize { 6.0 } else { 0.0 };
        centre + noise.sample(&mut rng)
    });

    let result = tsne(data.view(), &labels, &TsneConfig::default())?;
    for (iteration, kl) in &result.kl_trace {
        println!("iteration {iteration:>4}  KL {kl:.4}");
    }
    println!(
        "10-NN purity: input {:.3}, embedding {:.3}",
        knn_purity(data.view(), &labels, 10)?,
        knn_purity(result.points.view(), &labels, 10)?
    );

    let points: Vec<(f64, f64)> = result.points.rows().into_iter().map(|r| (r[0], r[1])).collect();
    let axes = Axes {
        title: "t-SNE of three clusters".into(),
        x_label: "t-SNE 1".into(),
        y_label: "t-SNE 2".into(),
    };
    std::fs::write(&out, scatter_chart(&axes, &points, &labels))?;
    println!("wrote {out}");
    Ok(())
}
