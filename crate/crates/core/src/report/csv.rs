//! CSV writers. Every file has a header row, UTF-8 text and LF line endings.
//! Reals are printed with fixed precision so outputs are byte-stable.

use std::fmt::Write;

use crate::geometry::{EmbeddingResult, SpectrumResult};
use crate::perturbation::AccuracyCurve;
use crate::trainer::EpochMetrics;

pub const METRICS_HEADER: &str = "epoch,train_loss,train_acc,test_acc";
pub const CURVE_HEADER: &str = "kind,amount,shown_rows,readout_step,accuracy";
pub const SPECTRA_HEADER: &str = "timestep,scope,component_index,ratio,dim90";
pub const EMBEDDING_HEADER: &str = "point_id,x,y,label,timestep";
pub const PURITY_HEADER: &str = "timestep,k,purity";

pub fn metrics_csv(metrics: &[EpochMetrics]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for m in metrics {
        let test = m.test_acc.map(|a| format!("{a:.6}")).unwrap_or_default();
        writeln!(out, "{},{:.8},{:.6},{}", m.epoch, m.train_loss, m.train_acc, test).unwrap();
    }
    out
}

pub fn curves_csv(curves: &[&AccuracyCurve]) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for c in curves {
        for p in &c.points {
            writeln!(
                out,
                "{},{},{},{},{:.6}",
                c.kind, p.amount, p.shown_rows, p.readout_step, p.accuracy
            )
            .unwrap();
        }
    }
    out
}

/// One row per principal component; `component_index` is 1-based.
pub fn spectra_csv(spectra: &[SpectrumResult]) -> String {
    let mut out = format!("{SPECTRA_HEADER}\n");
    for s in spectra {
        for (i, r) in s.spectrum.ratios.iter().enumerate() {
            writeln!(out, "{},{},{},{:.10e},{}", s.timestep, s.scope, i + 1, r, s.dim90).unwrap();
        }
    }
    out
}

pub fn embedding_csv(embeddings: &[(usize, &EmbeddingResult, &[usize])]) -> String {
    let mut out = format!("{EMBEDDING_HEADER}\n");
    for (timestep, e, ids) in embeddings {
        for ((row, label), id) in e.points.rows().into_iter().zip(&e.labels).zip(ids.iter()) {
            writeln!(out, "{},{:.6},{:.6},{},{}", id, row[0], row[1], label, timestep).unwrap();
        }
    }
    out
}

pub fn purity_csv(rows: &[(usize, usize, f64)]) -> String {
    let mut out = format!("{PURITY_HEADER}\n");
    for (t, k, p) in rows {
        writeln!(out, "{t},{k},{p:.6}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::{CurvePoint, PerturbationKind};

    #[test]
    fn curve_rows() {
        let c = AccuracyCurve {
            kind: PerturbationKind::Truncate,
            points: vec![CurvePoint {
                amount: 4,
                shown_rows: 4,
                readout_step: 4,
                accuracy: 0.25,
            }],
        };
        assert_eq!(
            curves_csv(&[&c]),
            "kind,amount,shown_rows,readout_step,accuracy\ntruncate,4,4,4,0.250000\n"
        );
    }

    #[test]
    fn metrics_without_test_set() {
        let m = EpochMetrics {
            epoch: 1,
            train_loss: 0.5,
            train_acc: 0.75,
            test_acc: None,
            updates: 3,
            seconds: 1.0,
        };
        assert_eq!(
            metrics_csv(&[m]),
            "epoch,train_loss,train_acc,test_acc\n1,0.50000000,0.750000,\n"
        );
    }
}
