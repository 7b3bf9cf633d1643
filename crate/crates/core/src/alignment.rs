//! Orthogonal Procrustes alignment.
//!
//! Finds `W` in the full orthogonal group (reflections included) and an
//! optional shift `a` minimizing `||target - source W - 1 a^T||_F`.

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{check_comparable, row_norms};
use crate::types::Configuration;

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub rotation: DMatrix<f64>,
    pub translation: DVector<f64>,
    /// `||target - (source W + 1 a^T)||_F`
    pub residual: f64,
}

impl Alignment {
    /// `points W + 1 a^T`.
    pub fn apply(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = points * &self.rotation;
        for mut row in out.row_iter_mut() {
            row += self.translation.transpose();
        }
        out
    }

    pub fn determinant(&self) -> f64 {
        self.rotation.determinant()
    }
}

/// Error metric applied to the rows of `reference - aligned(estimate)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    AvgL2,
    TwoToInfinity,
}

impl ErrorMetric {
    pub fn of(self, diff: &DMatrix<f64>) -> f64 {
        let norms = row_norms(diff);
        match self {
            ErrorMetric::AvgL2 => norms.iter().sum::<f64>() / norms.len() as f64,
            ErrorMetric::TwoToInfinity => norms.into_iter().fold(0.0, f64::max),
        }
    }
}

fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / m.nrows() as f64))
}

fn subtract_row(m: &DMatrix<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        row -= v.transpose();
    }
    out
}

/// Procrustes alignment of `source` onto `target_cfg`.
pub fn procrustes(
    source: &Configuration,
    target_cfg: &Configuration,
    with_translation: bool,
) -> Result<Alignment> {
    check_comparable(source, target_cfg)?;
    let d = source.dim();
    let (src, tgt, src_mean, tgt_mean) = if with_translation {
        let sm = column_means(source.points());
        let tm = column_means(target_cfg.points());
        (subtract_row(source.points(), &sm), subtract_row(target_cfg.points(), &tm), sm, tm)
    } else {
        let z = DVector::zeros(d);
        (source.points().clone(), target_cfg.points().clone(), z.clone(), z)
    };

    let cross = src.transpose() * &tgt;
    let svd = SVD::new(cross, true, true);
    let (Some(mut u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::Numerical("singular value decomposition failed".into()));
    };
    let mut v = v_t.transpose();
    // sign convention: largest-magnitude entry of each left vector positive
    for k in 0..d {
        let col = u.column(k);
        let pivot = col.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            u.column_mut(k).neg_mut();
            v.column_mut(k).neg_mut();
        }
    }
    let rotation = u * v.transpose();
    let translation = if with_translation {
        tgt_mean - rotation.transpose() * src_mean
    } else {
        DVector::zeros(d)
    };
    let mut alignment = Alignment { rotation, translation, residual: 0.0 };
    alignment.residual = (target_cfg.points() - alignment.apply(source.points())).norm();
    Ok(alignment)
}

/// Align `estimate` onto `reference` (translation on) and score the residual
/// rows with `metric`.
pub fn aligned_error(
    estimate: &Configuration,
    reference: &Configuration,
    metric: ErrorMetric,
) -> Result<f64> {
    aligned_error_with(estimate, reference, metric, true)
}

pub fn aligned_error_with(
    estimate: &Configuration,
    reference: &Configuration,
    metric: ErrorMetric,
    with_translation: bool,
) -> Result<f64> {
    let a = procrustes(estimate, reference, with_translation)?;
    let diff = reference.points() - a.apply(estimate.points());
    Ok(metric.of(&diff))
}
