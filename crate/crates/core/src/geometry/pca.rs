//! Explained-variance spectra via the SVD of the mean-centered data.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2, Axis};

use super::GeometryError;

/// Variance fraction that defines the headline dimensionality.
pub const DEFAULT_THRESHOLD: f64 = 0.90;

/// Slack on the cumulative-ratio comparison so that a spectrum whose
/// cumulative sum lands on the threshold up to rounding counts as reaching it.
const THRESHOLD_SLACK: f64 = 1e-12;

/// Explained-variance ratios of a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Descending, summing to 1 unless `degenerate`.
    pub ratios: Vec<f64>,
    /// Set when every row is identical; `ratios` are then all zero.
    pub degenerate: bool,
    pub rows: usize,
}

impl Spectrum {
    /// Smallest number of components whose cumulative ratio reaches
    /// `threshold` (inclusive). Degenerate spectra report 0.
    pub fn dim_at(&self, threshold: f64) -> usize {
        if self.degenerate {
            return 0;
        }
        dim_at(&self.ratios, threshold)
    }

    pub fn dim90(&self) -> usize {
        self.dim_at(DEFAULT_THRESHOLD)
    }
}

/// Smallest `m` with `ratios[..m].sum() >= threshold`.
pub fn dim_at(ratios: &[f64], threshold: f64) -> usize {
    let mut cumulative = 0.0;
    for (i, r) in ratios.iter().enumerate() {
        cumulative += r;
        if cumulative >= threshold - THRESHOLD_SLACK {
            return i + 1;
        }
    }
    ratios.len()
}

/// Subtracts the column means.
pub fn center(data: ArrayView2<f64>) -> Array2<f64> {
    let mean = data.mean_axis(Axis(0)).expect("at least one row");
    &data - &mean
}

/// PCA spectrum of `data` (one observation per row).
pub fn pca_spectrum(data: ArrayView2<f64>) -> Result<Spectrum, GeometryError> {
    let (rows, cols) = data.dim();
    if rows < 2 {
        return Err(GeometryError::TooFewRows { rows, needed: 2 });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFiniteInput);
    }
    let centered = center(data);
    let scale = data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let spread = centered.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rank_bound = rows.min(cols);
    if spread <= 1e-12 * scale {
        return Ok(Spectrum {
            ratios: vec![0.0; rank_bound],
            degenerate: true,
            rows,
        });
    }
    let matrix = DMatrix::from_row_iterator(rows, cols, centered.iter().copied());
    let mut singular: Vec<f64> = matrix.singular_values().iter().copied().collect();
    singular.sort_by(|a, b| b.total_cmp(a));
    let squares: Vec<f64> = singular.iter().map(|s| s * s).collect();
    let total: f64 = squares.iter().sum();
    Ok(Spectrum {
        ratios: squares.iter().map(|s| s / total).collect(),
        degenerate: false,
        rows,
    })
}
