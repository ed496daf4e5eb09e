//! MNIST IDX parsing and conversion into row-by-row input sequences.
//!
//! Image files start with magic `0x00000803` followed by big-endian `u32`
//! count, rows and cols; label files start with magic `0x00000801` and a
//! big-endian `u32` count. Payloads are unsigned bytes.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Rows (timesteps) and columns (input width) of one MNIST digit.
pub const IMAGE_ROWS: usize = 28;
pub const IMAGE_COLS: usize = 28;
pub const NUM_CLASSES: usize = 10;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("wrong magic number 0x{found:08x} (expected 0x{expected:08x})")]
    WrongMagic { expected: u32, found: u32 },
    #[error("truncated stream: header declares {declared} bytes, {available} available")]
    TruncatedStream { declared: usize, available: usize },
    #[error("image dimensions {rows}x{cols} are not 28x28")]
    DimensionMismatch { rows: usize, cols: usize },
    #[error("label {label} at index {index} is not a digit class")]
    InvalidLabel { index: usize, label: u8 },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Raw MNIST images, row-major, exactly as stored in the IDX payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageSet {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    pub labels: Vec<u8>,
}

impl LabelSet {
    pub fn count(&self) -> usize {
        self.labels.len()
    }
}

impl ImageSet {
    pub fn image(&self, index: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[index * size..(index + 1) * size]
    }

    /// Serializes back into IDX bytes.
    pub fn to_idx_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        for dim in [self.count, self.rows, self.cols] {
            out.extend_from_slice(&(dim as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }
}

impl LabelSet {
    pub fn to_idx_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.labels.len());
        out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.labels.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.labels);
        out
    }
}

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32, DatasetError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(DatasetError::TruncatedStream {
            declared: offset + 4,
            available: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<(), DatasetError> {
    let found = read_be_u32(bytes, 0)?;
    if found != expected {
        return Err(DatasetError::WrongMagic { expected, found });
    }
    Ok(())
}

/// Parses an IDX3 image stream. Bytes past the declared payload are ignored.
pub fn parse_idx_images(bytes: &[u8]) -> Result<ImageSet, DatasetError> {
    check_magic(bytes, IMAGE_MAGIC)?;
    let count = read_be_u32(bytes, 4)? as usize;
    let rows = read_be_u32(bytes, 8)? as usize;
    let cols = read_be_u32(bytes, 12)? as usize;
    if rows != IMAGE_ROWS || cols != IMAGE_COLS {
        return Err(DatasetError::DimensionMismatch { rows, cols });
    }
    let payload = count * rows * cols;
    let available = bytes.len() - 16;
    if available < payload {
        return Err(DatasetError::TruncatedStream {
            declared: payload,
            available,
        });
    }
    Ok(ImageSet {
        count,
        rows,
        cols,
        pixels: bytes[16..16 + payload].to_vec(),
    })
}

/// Parses an IDX1 label stream, rejecting any byte that is not a digit class.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<LabelSet, DatasetError> {
    check_magic(bytes, LABEL_MAGIC)?;
    let count = read_be_u32(bytes, 4)? as usize;
    let available = bytes.len() - 8;
    if available < count {
        return Err(DatasetError::TruncatedStream {
            declared: count,
            available,
        });
    }
    let labels = bytes[8..8 + count].to_vec();
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= NUM_CLASSES) {
        return Err(DatasetError::InvalidLabel { index, label });
    }
    Ok(LabelSet { labels })
}

/// A labelled collection of input sequences, one `T x 28` matrix per item.
///
/// Pixel values live in `[0, 1]`; row `i` of a sequence is timestep `i`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SequenceDataset {
    pub sequences: Vec<Array2<f32>>,
    pub labels: Vec<u8>,
}

impl SequenceDataset {
    pub fn new(sequences: Vec<Array2<f32>>, labels: Vec<u8>) -> Result<Self, DatasetError> {
        if sequences.len() != labels.len() {
            return Err(DatasetError::CountMismatch {
                images: sequences.len(),
                labels: labels.len(),
            });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= NUM_CLASSES) {
            return Err(DatasetError::InvalidLabel { index, label });
        }
        Ok(Self { sequences, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// First `n` items (or all, if fewer).
    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            sequences: self.sequences[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }

    /// Items at the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            sequences: indices.iter().map(|&i| self.sequences[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Per-class example counts.
    pub fn class_histogram(&self) -> [usize; NUM_CLASSES] {
        let mut hist = [0; NUM_CLASSES];
        for &l in &self.labels {
            hist[l as usize] += 1;
        }
        hist
    }
}

/// Normalizes each pixel by 255 and turns image rows into timesteps.
pub fn to_sequences(images: &ImageSet, labels: &LabelSet) -> Result<SequenceDataset, DatasetError> {
    if images.count != labels.count() {
        return Err(DatasetError::CountMismatch {
            images: images.count,
            labels: labels.count(),
        });
    }
    let sequences = (0..images.count)
        .map(|i| {
            let data = images.image(i).iter().map(|&p| p as f32 / 255.0).collect();
            Array2::from_shape_vec((images.rows, images.cols), data).expect("image buffer matches its declared shape")
        })
        .collect();
    Ok(SequenceDataset {
        sequences,
        labels: labels.labels.clone(),
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>, DatasetError> {
    fs::read(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads an image/label IDX file pair from disk into a sequence dataset.
pub fn load_mnist(images: &Path, labels: &Path) -> Result<SequenceDataset, DatasetError> {
    let images = parse_idx_images(&read_file(images)?)?;
    let labels = parse_idx_labels(&read_file(labels)?)?;
    to_sequences(&images, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_bytes(count: u32, rows: u32, cols: u32, payload: &[u8]) -> Vec<u8> {
        let mut out = IMAGE_MAGIC.to_be_bytes().to_vec();
        for d in [count, rows, cols] {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out.extend_from_slice(payload);
        out
    }

    fn label_bytes(labels: &[u8]) -> Vec<u8> {
        let mut out = LABEL_MAGIC.to_be_bytes().to_vec();
        out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        out.extend_from_slice(labels);
        out
    }

    #[test]
    fn parses_two_images() {
        let bytes = image_bytes(2, 28, 28, &[7u8; 1568]);
        let set = parse_idx_images(&bytes).unwrap();
        assert_eq!(set.count, 2);
        assert_eq!(set.pixels.len(), 1568);
        assert_eq!(set.to_idx_bytes(), bytes);
    }

    #[test]
    fn empty_payload_is_truncated() {
        let bytes = image_bytes(1, 28, 28, &[]);
        assert!(matches!(
            parse_idx_images(&bytes),
            Err(DatasetError::TruncatedStream {
                declared: 784,
                available: 0
            })
        ));
    }

    #[test]
    fn short_header_is_truncated() {
        assert!(matches!(
            parse_idx_images(&IMAGE_MAGIC.to_be_bytes()),
            Err(DatasetError::TruncatedStream { .. })
        ));
    }

    #[test]
    fn label_magic_on_image_parser() {
        let mut bytes = image_bytes(0, 28, 28, &[]);
        bytes[3] = 0x01;
        assert!(matches!(
            parse_idx_images(&bytes),
            Err(DatasetError::WrongMagic { found: 0x801, .. })
        ));
    }

    #[test]
    fn non_mnist_dimensions_rejected() {
        let bytes = image_bytes(1, 32, 32, &[0u8; 1024]);
        assert!(matches!(
            parse_idx_images(&bytes),
            Err(DatasetError::DimensionMismatch { rows: 32, cols: 32 })
        ));
    }

    #[test]
    fn labels_copied_directly() {
        let set = parse_idx_labels(&label_bytes(&[7, 0, 9])).unwrap();
        assert_eq!(set.labels, vec![7, 0, 9]);
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(
            parse_idx_labels(&label_bytes(&[1, 12])),
            Err(DatasetError::InvalidLabel { index: 1, label: 12 })
        ));
    }

    #[test]
    fn empty_label_set() {
        assert_eq!(parse_idx_labels(&label_bytes(&[])).unwrap().count(), 0);
    }

    #[test]
    fn truncated_labels() {
        let mut bytes = label_bytes(&[1, 2, 3]);
        bytes.pop();
        assert!(matches!(
            parse_idx_labels(&bytes),
            Err(DatasetError::TruncatedStream {
                declared: 3,
                available: 2
            })
        ));
    }

    #[test]
    fn normalization_cases() {
        let mut pixels = vec![0u8; 784 * 3];
        pixels[784..1568].fill(255);
        pixels[1568] = 51;
        let images = parse_idx_images(&image_bytes(3, 28, 28, &pixels)).unwrap();
        let labels = parse_idx_labels(&label_bytes(&[0, 1, 2])).unwrap();
        let ds = to_sequences(&images, &labels).unwrap();
        assert!(ds.sequences[0].iter().all(|&v| v == 0.0));
        assert!(ds.sequences[1].iter().all(|&v| v == 1.0));
        assert_eq!(ds.sequences[2][[0, 0]], 0.2);
        assert_eq!(ds.sequences[2].iter().filter(|&&v| v != 0.0).count(), 1);
        assert_eq!(ds.labels, vec![0, 1, 2]);
    }

    #[test]
    fn count_mismatch() {
        let images = parse_idx_images(&image_bytes(1, 28, 28, &[0u8; 784])).unwrap();
        let labels = parse_idx_labels(&label_bytes(&[0, 1])).unwrap();
        assert!(matches!(
            to_sequences(&images, &labels),
            Err(DatasetError::CountMismatch { images: 1, labels: 2 })
        ));
    }
}
