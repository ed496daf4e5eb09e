//! Writes a small IDX image/label pair, reads it back as row sequences and
//! shows the parser's error reporting.
//!
//! ```text
//! cargo run -p rnn-introspect --example idx_roundtrip
//! ```

use rnn_introspect::dataset::{load_mnist, parse_idx_labels, ImageSet, LabelSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("rnn-introspect-idx-example");
    std::fs::create_dir_all(&dir)?;

    // a diagonal stroke per image, shifted by the label
    let labels: Vec<u8> = (0..20).map(|i| (i % 10) as u8).collect();
    let mut pixels = vec![0u8; labels.len() * 784];
    for (n, &l) in labels.iter().enumerate() {
        for r in 0..28 {
            pixels[n * 784 + r * 28 + (r + l as usize) % 28] = 255;
        }
    }
    let images = ImageSet {
        count: labels.len(),
        rows: 28,
        cols: 28,
        pixels,
    };
    let label_bytes = LabelSet { labels }.to_idx_bytes();
    std::fs::write(dir.join("images"), images.to_idx_bytes())?;
    std::fs::write(dir.join("labels"), &label_bytes)?;

    let ds = load_mnist(&dir.join("images"), &dir.join("labels"))?;
    println!("{} sequences of shape {:?}", ds.len(), ds.sequences[0].dim());
    println!("class histogram {:?}", ds.class_histogram());
    println!("row 0 of sequence 3 peaks at column {}", {
        let row = ds.sequences[3].row(0);
        row.iter().position(|&v| v == 1.0).unwrap()
    });

    let mut broken = label_bytes.clone();
    broken[8] = 42;
    println!("bad label: {}", parse_idx_labels(&broken).unwrap_err());
    println!("truncated: {}", parse_idx_labels(&label_bytes[..12]).unwrap_err());
    Ok(())
}
