//! Domain types shared across the crate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All embedded replicates of one model's responses to one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseBatch {
    model_id: String,
    query_id: String,
    vectors: Vec<Vec<f64>>,
}

impl ResponseBatch {
    pub fn new(
        model_id: impl Into<String>,
        query_id: impl Into<String>,
        vectors: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let model_id = model_id.into();
        let query_id = query_id.into();
        let Some(first) = vectors.first() else {
            return Err(Error::invalid(format!(
                "batch ({model_id}, {query_id}) has no replicates"
            )));
        };
        let s = first.len();
        if s == 0 {
            return Err(Error::invalid(format!(
                "batch ({model_id}, {query_id}) has empty vectors"
            )));
        }
        for (k, v) in vectors.iter().enumerate() {
            if v.len() != s {
                return Err(Error::shape(format!(
                    "batch ({model_id}, {query_id}) replicate {k} has dimension {}, expected {s}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!(
                    "batch ({model_id}, {query_id}) replicate {k} has a non-finite entry"
                )));
            }
        }
        Ok(Self { model_id, query_id, vectors })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Embedding dimension `s`.
    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    /// Replicate count `r`.
    pub fn replicates(&self) -> usize {
        self.vectors.len()
    }

    /// Componentwise mean of the replicates.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim()];
        for v in &self.vectors {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x;
            }
        }
        let r = self.vectors.len() as f64;
        acc.iter_mut().for_each(|a| *a /= r);
        acc
    }
}

/// Whether a [`ModelMatrix`] holds replicate averages or population means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    SampleMean,
    PopulationMean,
}

/// The `m x s` mean-response matrix of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMatrix {
    model_id: String,
    rows: DMatrix<f64>,
    role: Role,
}

impl ModelMatrix {
    pub fn new(model_id: impl Into<String>, rows: DMatrix<f64>, role: Role) -> Result<Self> {
        let model_id = model_id.into();
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(Error::shape(format!("model matrix for {model_id} is empty")));
        }
        if rows.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!(
                "model matrix for {model_id} has non-finite entries"
            )));
        }
        Ok(Self { model_id, rows, role })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn role(&self) -> Role {
        self.role
    }

    /// Number of queries `m`.
    pub fn queries(&self) -> usize {
        self.rows.nrows()
    }

    /// Embedding dimension `s`.
    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }
}

/// Symmetric, hollow, nonnegative `n x n` matrix with row labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    labels: Vec<String>,
    values: DMatrix<f64>,
}

/// Relative asymmetry tolerated by [`DissimilarityMatrix::new`] before the
/// matrix is rejected. Accepted matrices are symmetrized exactly.
const SYMMETRY_TOL: f64 = 1e-12;

impl DissimilarityMatrix {
    /// Validates the invariants. Entries that differ from their transpose by
    /// at most `1e-12` relative are replaced by their average.
    pub fn new(labels: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::shape(format!(
                "dissimilarity matrix is {}x{}, expected square",
                n,
                values.ncols()
            )));
        }
        if labels.len() != n {
            return Err(Error::shape(format!("{} labels for {n} rows", labels.len())));
        }
        let mut values = values;
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(Error::invalid(format!(
                    "diagonal entry ({i},{i}) is {}, expected 0",
                    values[(i, i)]
                )));
            }
            for j in (i + 1)..n {
                let (a, b) = (values[(i, j)], values[(j, i)]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::invalid(format!("entry ({i},{j}) is not finite")));
                }
                if a < 0.0 || b < 0.0 {
                    return Err(Error::invalid(format!("entry ({i},{j}) is negative")));
                }
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
                if a != b {
                    let mid = 0.5 * (a + b);
                    values[(i, j)] = mid;
                    values[(j, i)] = mid;
                }
            }
        }
        Ok(Self { labels, values })
    }

    /// Builds the matrix from an upper-triangle generator `f(i, j)`, `i < j`.
    pub fn from_fn(labels: Vec<String>, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let n = labels.len();
        let mut values = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                values[(i, j)] = v;
                values[(j, i)] = v;
            }
        }
        Self::new(labels, values)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Multiply every entry by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("scale factor {c} must be positive")));
        }
        Ok(Self { labels: self.labels.clone(), values: &self.values * c })
    }

    /// Sub-matrix on the given row indices, in order. Repeated indices give
    /// repeated rows and columns.
    pub fn select(&self, rows: &[usize]) -> Self {
        let labels = rows.iter().map(|&i| self.labels[i].clone()).collect();
        let values = DMatrix::from_fn(rows.len(), rows.len(), |a, b| self.values[(rows[a], rows[b])]);
        Self { labels, values }
    }
}

/// Which start produced a solver result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum StartKind {
    /// Not produced by the solver (read from a file, constructed by hand).
    #[default]
    External,
    Classical,
    Random(usize),
}

/// Provenance of a [`Configuration`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverMeta {
    pub start: StartKind,
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    pub converged: bool,
}

/// An `n x d` point configuration with its raw stress against the target it
/// was fitted to.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    labels: Vec<String>,
    points: DMatrix<f64>,
    stress: f64,
    meta: SolverMeta,
}

impl Configuration {
    /// A configuration not tied to any target; stress is recorded as 0.
    pub fn new(labels: Vec<String>, points: DMatrix<f64>) -> Result<Self> {
        if labels.len() != points.nrows() {
            return Err(Error::shape(format!(
                "{} labels for {} points",
                labels.len(),
                points.nrows()
            )));
        }
        if points.ncols() == 0 {
            return Err(Error::shape("configuration has dimension 0"));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("configuration has non-finite coordinates"));
        }
        Ok(Self { labels, points, stress: 0.0, meta: SolverMeta::default() })
    }

    /// Points fitted to `target`; stress is computed here.
    pub fn fitted(
        target: &DissimilarityMatrix,
        points: DMatrix<f64>,
        meta: SolverMeta,
    ) -> Result<Self> {
        let mut cfg = Self::new(target.labels().to_vec(), points)?;
        cfg.stress = crate::metrics::raw_stress(&cfg, target)?;
        cfg.meta = meta;
        Ok(cfg)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn into_points(self) -> DMatrix<f64> {
        self.points
    }

    pub fn stress(&self) -> f64 {
        self.stress
    }

    pub fn meta(&self) -> &SolverMeta {
        &self.meta
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Rows at the given indices, relabelled.
    pub fn select(&self, rows: &[usize], labels: Vec<String>) -> Result<Self> {
        let points = DMatrix::from_fn(rows.len(), self.dim(), |a, c| self.points[(rows[a], c)]);
        Self::new(labels, points)
    }
}

/// Subtract the column means in place.
pub(crate) fn center_columns(points: &mut DMatrix<f64>) {
    let n = points.nrows() as f64;
    for mut col in points.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
}
