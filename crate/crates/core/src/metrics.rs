//! The raw-stress objective and the row norms used to score configurations.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::types::{Configuration, DissimilarityMatrix};

/// Euclidean distance between rows `a` and `b` of `points`.
#[inline]
pub(crate) fn row_distance(points: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    let mut acc = 0.0;
    for c in 0..points.ncols() {
        let diff = points[(a, c)] - points[(b, c)];
        acc += diff * diff;
    }
    acc.sqrt()
}

/// Raw stress of bare points against bare target values. Ordered pairs:
/// every unordered pair contributes twice.
pub(crate) fn stress_of(points: &DMatrix<f64>, target: &DMatrix<f64>) -> f64 {
    let n = points.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = row_distance(points, i, j) - target[(i, j)];
            acc += r * r;
        }
    }
    2.0 * acc
}

/// `sum_{i,i'} (||z_i - z_i'|| - target[i][i'])^2` over all ordered pairs.
pub fn raw_stress(config: &Configuration, target: &DissimilarityMatrix) -> Result<f64> {
    if config.n() != target.n() {
        return Err(Error::shape(format!(
            "configuration has {} points, target has {}",
            config.n(),
            target.n()
        )));
    }
    Ok(stress_of(config.points(), target.values()))
}

/// Euclidean norms of the rows of `m`.
pub fn row_norms(m: &DMatrix<f64>) -> Vec<f64> {
    m.row_iter().map(|r| r.norm()).collect()
}

/// Mean over rows of the row-wise Euclidean distance between `a` and `b`.
pub fn avg_l2(a: &Configuration, b: &Configuration) -> Result<f64> {
    check_comparable(a, b)?;
    let diff = a.points() - b.points();
    Ok(row_norms(&diff).iter().sum::<f64>() / a.n() as f64)
}

/// Largest Euclidean row norm of `m`.
pub fn two_to_infinity(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::shape("two-to-infinity norm of an empty matrix"));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    Ok(row_norms(m).into_iter().fold(0.0, f64::max))
}

pub(crate) fn check_comparable(a: &Configuration, b: &Configuration) -> Result<()> {
    if a.n() != b.n() || a.dim() != b.dim() {
        return Err(Error::shape(format!(
            "configurations are {}x{} and {}x{}",
            a.n(),
            a.dim(),
            b.n(),
            b.dim()
        )));
    }
    if a.labels() != b.labels() {
        return Err(Error::Labels("configurations list different labels".into()));
    }
    if a.n() == 0 {
        return Err(Error::shape("configurations are empty"));
    }
    Ok(())
}
