use std::cmp::Ordering;

use ndarray::{ArrayView2, Zip};
use rayon::prelude::*;

use super::GeometryError;

/// Mean fraction of each point's `k` nearest neighbours (Euclidean, self
/// excluded, distance ties broken by lower index) that share its label.
pub fn knn_purity(points: ArrayView2<f64>, labels: &[u8], k: usize) -> Result<f64, GeometryError> {
    let n = points.nrows();
    if labels.len() != n {
        return Err(GeometryError::LabelMismatch {
            rows: n,
            labels: labels.len(),
        });
    }
    if k == 0 || k >= n {
        return Err(GeometryError::KTooLarge { k, n });
    }
    let fractions: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = points.row(i);
            let mut neighbours: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = Zip::from(&xi)
                        .and(&points.row(j))
                        .fold(0.0, |acc, &a, &b| acc + (a - b) * (a - b));
                    (d, j)
                })
                .collect();
            let order = |a: &(f64, usize), b: &(f64, usize)| {
                a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
            };
            neighbours.select_nth_unstable_by(k - 1, order);
            let same = neighbours[..k].iter().filter(|&&(_, j)| labels[j] == labels[i]).count();
            same as f64 / k as f64
        })
        .collect();
    Ok(fractions.iter().sum::<f64>() / n as f64)
}
