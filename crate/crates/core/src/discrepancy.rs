//! Replicate means and the pairwise discrepancy matrix between models.
//!
//! For every model the replicate embeddings of each query are averaged into
//! one row of an `m x s` matrix. Two models are then compared by the
//! Frobenius norm of the difference of their matrices, scaled by `1/m`.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{DissimilarityMatrix, ModelMatrix, ResponseBatch, Role};

/// Complete grid of response batches for `n` models and `m` queries.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectionTable {
    model_ids: Vec<String>,
    query_ids: Vec<String>,
    /// Model-major: batch for (model a, query b) at `a * m + b`.
    batches: Vec<ResponseBatch>,
    dim: usize,
}

impl CollectionTable {
    /// Batches may come in any order; every `(model, query)` pair must be
    /// present exactly once and every vector must share one dimension.
    pub fn new(
        model_ids: Vec<String>,
        query_ids: Vec<String>,
        batches: Vec<ResponseBatch>,
    ) -> Result<Self> {
        if model_ids.is_empty() || query_ids.is_empty() {
            return Err(Error::invalid("collection needs at least one model and one query"));
        }
        let model_pos = index_of(&model_ids, "model")?;
        let query_pos = index_of(&query_ids, "query")?;
        let m = query_ids.len();
        let mut slots: Vec<Option<ResponseBatch>> = vec![None; model_ids.len() * m];
        let mut dim = None;
        for batch in batches {
            let a = *model_pos
                .get(batch.model_id())
                .ok_or_else(|| Error::UnknownModel(batch.model_id().to_string()))?;
            let b = *query_pos.get(batch.query_id()).ok_or_else(|| {
                Error::invalid(format!("unknown query id `{}`", batch.query_id()))
            })?;
            match dim {
                None => dim = Some(batch.dim()),
                Some(s) if s != batch.dim() => {
                    return Err(Error::shape(format!(
                        "batch ({}, {}) has dimension {}, expected {s}",
                        batch.model_id(),
                        batch.query_id(),
                        batch.dim()
                    )))
                }
                _ => {}
            }
            let slot = &mut slots[a * m + b];
            if slot.is_some() {
                return Err(Error::invalid(format!(
                    "duplicate batch for ({}, {})",
                    batch.model_id(),
                    batch.query_id()
                )));
            }
            *slot = Some(batch);
        }
        let mut out = Vec::with_capacity(slots.len());
        for (idx, slot) in slots.into_iter().enumerate() {
            match slot {
                Some(b) => out.push(b),
                None => {
                    return Err(Error::invalid(format!(
                        "missing responses for model `{}` on query `{}`",
                        model_ids[idx / m],
                        query_ids[idx % m]
                    )))
                }
            }
        }
        Ok(Self { model_ids, query_ids, batches: out, dim: dim.unwrap_or(0) })
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn query_ids(&self) -> &[String] {
        &self.query_ids
    }

    /// Embedding dimension `s`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn batch(&self, model: usize, query: usize) -> &ResponseBatch {
        &self.batches[model * self.query_ids.len() + query]
    }

    /// All batches, model-major.
    pub fn batches(&self) -> &[ResponseBatch] {
        &self.batches
    }

    /// The replicate count when every pair has the same one.
    pub fn uniform_replicates(&self) -> Option<usize> {
        let r = self.batches[0].replicates();
        self.batches.iter().all(|b| b.replicates() == r).then_some(r)
    }

    fn model_index(&self, model_id: &str) -> Result<usize> {
        self.model_ids
            .iter()
            .position(|id| id == model_id)
            .ok_or_else(|| Error::UnknownModel(model_id.to_string()))
    }

    fn mean_matrix_at(&self, a: usize) -> Result<ModelMatrix> {
        let m = self.query_ids.len();
        let mut rows = DMatrix::zeros(m, self.dim);
        for b in 0..m {
            let batch = self.batch(a, b);
            if batch.dim() != self.dim {
                return Err(Error::shape(format!(
                    "batch ({}, {}) has dimension {}",
                    batch.model_id(),
                    batch.query_id(),
                    batch.dim()
                )));
            }
            for (c, v) in batch.mean().into_iter().enumerate() {
                rows[(b, c)] = v;
            }
        }
        ModelMatrix::new(self.model_ids[a].clone(), rows, Role::SampleMean)
    }
}

fn index_of<'a>(ids: &'a [String], what: &str) -> Result<HashMap<&'a str, usize>> {
    let mut map = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if map.insert(id.as_str(), i).is_some() {
            return Err(Error::invalid(format!("duplicate {what} id `{id}`")));
        }
    }
    Ok(map)
}

/// Row `j` is the mean of the replicates for `(model_id, query_j)`. Each pair
/// uses its own replicate count.
pub fn mean_response_matrix(table: &CollectionTable, model_id: &str) -> Result<ModelMatrix> {
    let a = table.model_index(model_id)?;
    table.mean_matrix_at(a)
}

/// Mean-response matrices for every model, in table order.
pub fn mean_response_matrices(table: &CollectionTable) -> Result<Vec<ModelMatrix>> {
    (0..table.model_ids.len())
        .into_par_iter()
        .map(|a| table.mean_matrix_at(a))
        .collect()
}

/// Entry `(i, i')` is `||X_i - X_i'||_F / m`.
pub fn discrepancy_matrix(mats: &[ModelMatrix]) -> Result<DissimilarityMatrix> {
    if mats.len() < 2 {
        return Err(Error::invalid(format!(
            "discrepancy needs at least 2 models, got {}",
            mats.len()
        )));
    }
    let (m, s, role) = (mats[0].queries(), mats[0].dim(), mats[0].role());
    for mat in mats {
        if mat.queries() != m || mat.dim() != s {
            return Err(Error::shape(format!(
                "model {} is {}x{}, expected {m}x{s}",
                mat.model_id(),
                mat.queries(),
                mat.dim()
            )));
        }
        if mat.role() != role {
            return Err(Error::invalid("cannot mix sample and population means"));
        }
    }
    let labels = mats.iter().map(|x| x.model_id().to_string()).collect();
    let scale = 1.0 / m as f64;
    DissimilarityMatrix::from_fn(labels, |i, j| {
        let a = mats[i].rows();
        let b = mats[j].rows();
        let mut acc = 0.0;
        for (x, y) in a.iter().zip(b.iter()) {
            let d = x - y;
            acc += d * d;
        }
        scale * acc.sqrt()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn mm(id: &str, rows: usize, cols: usize, data: &[f64]) -> ModelMatrix {
        ModelMatrix::new(id, DMatrix::from_row_slice(rows, cols, data), Role::SampleMean).unwrap()
    }

    fn table(r: usize) -> CollectionTable {
        let mut batches = vec![];
        for (mi, model) in ["a", "b"].iter().enumerate() {
            for (qi, query) in ["q0", "q1", "q2"].iter().enumerate() {
                let vecs = (0..r).map(|k| vec![(mi * 10 + qi) as f64, k as f64]).collect();
                batches.push(ResponseBatch::new(*model, *query, vecs).unwrap());
            }
        }
        batches.reverse();
        CollectionTable::new(
            vec!["a".into(), "b".into()],
            vec!["q0".into(), "q1".into(), "q2".into()],
            batches,
        )
        .unwrap()
    }

    #[test]
    fn single_replicate_is_unchanged() {
        let t = table(1);
        let x = mean_response_matrix(&t, "b").unwrap();
        assert_eq!(x.rows(), &DMatrix::from_row_slice(3, 2, &[10.0, 0.0, 11.0, 0.0, 12.0, 0.0]));
        assert_eq!(x.role(), Role::SampleMean);
    }

    #[test]
    fn replicate_average() {
        let b = ResponseBatch::new("a", "q", vec![vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        let t = CollectionTable::new(vec!["a".into()], vec!["q".into()], vec![b]).unwrap();
        let x = mean_response_matrix(&t, "a").unwrap();
        assert_eq!(x.rows().row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0]);
    }

    #[test]
    fn rows_follow_query_order() {
        let t = table(3);
        let x = mean_response_matrix(&t, "a").unwrap();
        assert_eq!(x.rows()[(2, 0)], 2.0);
        assert_eq!(x.rows()[(2, 1)], 1.0);
        assert_eq!(t.uniform_replicates(), Some(3));
    }

    #[test]
    fn unknown_model_errors() {
        assert!(matches!(mean_response_matrix(&table(1), "zzz"), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn incomplete_or_inconsistent_tables_rejected() {
        let b0 = ResponseBatch::new("a", "q0", vec![vec![1.0]]).unwrap();
        let missing = CollectionTable::new(
            vec!["a".into()],
            vec!["q0".into(), "q1".into()],
            vec![b0.clone()],
        );
        assert!(missing.is_err());
        let b1 = ResponseBatch::new("a", "q1", vec![vec![1.0, 2.0]]).unwrap();
        let ragged =
            CollectionTable::new(vec!["a".into()], vec!["q0".into(), "q1".into()], vec![b0, b1]);
        assert!(matches!(ragged, Err(Error::Shape(_))));
    }

    #[test]
    fn ragged_replicate_counts_use_own_r() {
        let b0 = ResponseBatch::new("a", "q0", vec![vec![1.0], vec![3.0]]).unwrap();
        let b1 = ResponseBatch::new("a", "q1", vec![vec![5.0]]).unwrap();
        let t = CollectionTable::new(vec!["a".into()], vec!["q0".into(), "q1".into()], vec![b0, b1])
            .unwrap();
        let x = mean_response_matrix(&t, "a").unwrap();
        assert_eq!(x.rows().as_slice(), &[2.0, 5.0]);
        assert_eq!(t.uniform_replicates(), None);
    }

    #[test]
    fn large_sample_mean_is_close_to_population_mean() {
        // r = 10000 isotropic Gaussian replicates with trace-1 covariance in s = 4
        let mu = [0.5, -1.0, 2.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let sd = (1.0f64 / 4.0).sqrt();
        let vecs: Vec<Vec<f64>> = (0..10_000)
            .map(|_| {
                mu.iter()
                    .map(|m| m + sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                    .collect()
            })
            .collect();
        let t = CollectionTable::new(
            vec!["a".into()],
            vec!["q".into()],
            vec![ResponseBatch::new("a", "q", vecs).unwrap()],
        )
        .unwrap();
        let x = mean_response_matrix(&t, "a").unwrap();
        let err: f64 = x.rows().row(0).iter().zip(mu).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn discrepancy_examples() {
        let z = mm("a", 2, 2, &[0.0; 4]);
        let z2 = mm("b", 2, 2, &[0.0; 4]);
        assert_eq!(discrepancy_matrix(&[z.clone(), z2]).unwrap().get(0, 1), 0.0);

        let d = discrepancy_matrix(&[mm("a", 1, 1, &[0.0]), mm("b", 1, 1, &[3.0])]).unwrap();
        assert_eq!(d.get(0, 1), 3.0);

        let x2 = mm("b", 2, 2, &[3.0, 4.0, 3.0, 4.0]);
        let d = discrepancy_matrix(&[z, x2]).unwrap();
        assert!((d.get(0, 1) - 5.0 * 2f64.sqrt() / 2.0).abs() < 1e-12);
        assert!((d.get(1, 0) - 3.535_53).abs() < 1e-5);
    }

    #[test]
    fn discrepancy_errors() {
        assert!(discrepancy_matrix(&[mm("a", 1, 1, &[0.0])]).is_err());
        let r = discrepancy_matrix(&[mm("a", 1, 1, &[0.0]), mm("b", 2, 1, &[0.0, 1.0])]);
        assert!(matches!(r, Err(Error::Shape(_))));
        let p = ModelMatrix::new("b", DMatrix::zeros(1, 1), Role::PopulationMean).unwrap();
        assert!(discrepancy_matrix(&[mm("a", 1, 1, &[0.0]), p]).is_err());
    }

    proptest! {
        #[test]
        fn discrepancy_is_a_metric(seed in any::<u64>(), n in 3usize..7, m in 1usize..5, s in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mats: Vec<ModelMatrix> = (0..n)
                .map(|i| {
                    let rows = DMatrix::from_fn(m, s, |_, _| StandardNormal.sample(&mut rng));
                    ModelMatrix::new(format!("m{i}"), rows, Role::SampleMean).unwrap()
                })
                .collect();
            let d = discrepancy_matrix(&mats).unwrap();
            for i in 0..n {
                prop_assert_eq!(d.get(i, i), 0.0);
                for j in 0..n {
                    prop_assert_eq!(d.get(i, j), d.get(j, i));
                    prop_assert!(d.get(i, j) >= 0.0);
                    for k in 0..n {
                        prop_assert!(d.get(i, j) <= d.get(i, k) + d.get(k, j) + 1e-12);
                    }
                }
            }
        }
    }
}
