//! Synthetic model collections with known ground truth.
//!
//! Model `i` has a latent vector `phi_i` in `R^q`. Query `j` carries a map
//! `R_j` (an `s x q` matrix with orthonormal columns) and an offset `c_j`.
//! The population mean response is
//!
//! ```text
//! (mu_i)_j = sqrt(m) * R_j phi_i + c_j
//! ```
//!
//! so `||mu_i - mu_i'||_F / m = ||phi_i - phi_i'||` holds exactly for every
//! number of queries `m`. Replicates are isotropic Gaussians around the mean
//! with covariance `(gamma_ij / s) I_s`, whose trace is `gamma_ij`.
//!
//! Every draw comes from a substream keyed by `(seed, i, j, k)`, so tables
//! are identical under any evaluation order.

use nalgebra::{DMatrix, DVector, QR};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrepancy::CollectionTable;
use crate::error::{Error, Result};
use crate::rng::{domain, substream};
use crate::types::{DissimilarityMatrix, ModelMatrix, ResponseBatch, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Manifold {
    UnitSphere,
    UnitCube,
}

/// Uniform distribution on a compact latent manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentSpec {
    pub q: usize,
    pub manifold: Manifold,
    #[serde(default)]
    pub seed: u64,
}

/// Covariance-trace schedule as a function of the replicate count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum GammaSchedule {
    Constant { c: f64 },
    /// `gamma = c * r^alpha`
    Power { c: f64, alpha: f64 },
}

impl GammaSchedule {
    pub fn validate(&self) -> Result<()> {
        let (c, alpha) = match *self {
            GammaSchedule::Constant { c } => (c, 0.0),
            GammaSchedule::Power { c, alpha } => (c, alpha),
        };
        if !(c > 0.0 && c.is_finite()) || !alpha.is_finite() {
            return Err(Error::invalid(format!("gamma schedule needs c > 0, got {c}")));
        }
        Ok(())
    }

    pub fn gamma(&self, r: usize) -> f64 {
        match *self {
            GammaSchedule::Constant { c } => c,
            GammaSchedule::Power { c, alpha } => c * (r as f64).powf(alpha),
        }
    }
}

/// Everything needed to generate a [`SyntheticCollection`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub m: usize,
    /// Embedding dimension.
    pub s: usize,
    pub r: usize,
    pub latent: LatentSpec,
    /// `None` means noiseless (`gamma = 0`).
    pub gamma: Option<GammaSchedule>,
    #[serde(default)]
    pub seed: u64,
}

/// Per-query map `phi -> R_j phi + c_j` (before the `sqrt(m)` factor).
#[derive(Debug, Clone, PartialEq)]
pub struct QueryMap {
    pub rotation: DMatrix<f64>,
    pub offset: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCollection {
    latents: DMatrix<f64>,
    query_maps: Vec<QueryMap>,
    gamma: DMatrix<f64>,
    r: usize,
    seed: u64,
}

/// i.i.d. uniform draws on the manifold, one substream per row.
pub fn sample_latents(spec: &LatentSpec, n: usize) -> Result<DMatrix<f64>> {
    if spec.q == 0 {
        return Err(Error::invalid("latent dimension q must be at least 1"));
    }
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 latents, got {n}")));
    }
    let q = spec.q;
    let mut out = DMatrix::zeros(n, q);
    for i in 0..n {
        let mut rng = substream(spec.seed, &[domain::LATENT, i as u64]);
        let row: Vec<f64> = match spec.manifold {
            Manifold::UnitCube => (0..q).map(|_| rng.random::<f64>()).collect(),
            Manifold::UnitSphere => loop {
                let g: Vec<f64> = (0..q).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-8 {
                    break g.into_iter().map(|x| x / norm).collect();
                }
            },
        };
        for (c, v) in row.into_iter().enumerate() {
            out[(i, c)] = v;
        }
    }
    Ok(out)
}

pub fn model_label(i: usize) -> String {
    format!("model_{i}")
}

pub fn query_label(j: usize) -> String {
    format!("query_{j}")
}

impl SyntheticCollection {
    /// Validates the invariants: `s >= q`, orthonormal map columns, and
    /// nonnegative traces in an `n x m` gamma matrix.
    pub fn new(
        latents: DMatrix<f64>,
        query_maps: Vec<QueryMap>,
        gamma: DMatrix<f64>,
        r: usize,
        seed: u64,
    ) -> Result<Self> {
        let (n, q) = latents.shape();
        let m = query_maps.len();
        if n < 2 || q == 0 || m == 0 {
            return Err(Error::invalid(format!("collection needs n >= 2, q >= 1, m >= 1 (got {n}, {q}, {m})")));
        }
        if r == 0 {
            return Err(Error::invalid("replicate count must be at least 1"));
        }
        if latents.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("latents must be finite"));
        }
        let s = query_maps[0].rotation.nrows();
        for (j, map) in query_maps.iter().enumerate() {
            if map.rotation.shape() != (s, q) || map.offset.len() != s {
                return Err(Error::shape(format!("query map {j} is not {s}x{q}")));
            }
            let gram = map.rotation.transpose() * &map.rotation;
            if (gram - DMatrix::identity(q, q)).norm() >= 1e-10 {
                return Err(Error::invalid(format!("query map {j} columns are not orthonormal")));
            }
        }
        if s < q {
            return Err(Error::invalid(format!("embedding dimension {s} is below latent dimension {q}")));
        }
        if gamma.shape() != (n, m) {
            return Err(Error::shape(format!("gamma is {:?}, expected ({n}, {m})", gamma.shape())));
        }
        if gamma.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::invalid("covariance traces must be finite and nonnegative"));
        }
        Ok(Self { latents, query_maps, gamma, r, seed })
    }

    /// Seeded collection: latents from the spec, QR-orthonormalized Gaussian
    /// maps, standard normal offsets, and gamma from the schedule at `r`.
    pub fn generate(config: &SynthConfig) -> Result<Self> {
        if config.s < config.latent.q {
            return Err(Error::invalid(format!(
                "embedding dimension {} is below latent dimension {}",
                config.s, config.latent.q
            )));
        }
        if config.m == 0 {
            return Err(Error::invalid("need at least one query"));
        }
        if let Some(g) = &config.gamma {
            g.validate()?;
        }
        let latents = sample_latents(&config.latent, config.n)?;
        let query_maps = (0..config.m)
            .map(|j| random_query_map(config.seed, j, config.s, config.latent.q))
            .collect();
        let g = config.gamma.map_or(0.0, |sch| sch.gamma(config.r));
        let gamma = DMatrix::from_element(config.n, config.m, g);
        Self::new(latents, query_maps, gamma, config.r, config.seed)
    }

    pub fn latents(&self) -> &DMatrix<f64> {
        &self.latents
    }

    pub fn query_maps(&self) -> &[QueryMap] {
        &self.query_maps
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn replicates(&self) -> usize {
        self.r
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.latents.nrows()
    }

    pub fn m(&self) -> usize {
        self.query_maps.len()
    }

    pub fn s(&self) -> usize {
        self.query_maps[0].rotation.nrows()
    }

    /// Same latents and maps with a different gamma matrix and replicate count.
    pub fn with_gamma(&self, gamma: DMatrix<f64>, r: usize) -> Result<Self> {
        Self::new(self.latents.clone(), self.query_maps.clone(), gamma, r, self.seed)
    }

    /// `sqrt(m_eff) R_j phi_i + c_j`, where `m_eff` is the number of queries
    /// the mean matrix is assembled from.
    pub fn mean_row(&self, i: usize, j: usize, m_eff: usize) -> DVector<f64> {
        let map = &self.query_maps[j];
        let phi = self.latents.row(i).transpose();
        (&map.rotation * phi) * (m_eff as f64).sqrt() + &map.offset
    }

    /// Standard normal vector for replicate `k` of pair `(i, j)`.
    pub fn standard_noise(&self, i: usize, j: usize, k: u64) -> DVector<f64> {
        let mut rng = substream(self.seed, &[domain::NOISE, i as u64, j as u64, k]);
        DVector::from_fn(self.s(), |_, _| StandardNormal.sample(&mut rng))
    }

    /// One draw from `Normal(mean, (gamma / s) I_s)` using replicate key `k`.
    pub fn draw(&self, mean: &DVector<f64>, gamma: f64, i: usize, j: usize, k: u64) -> DVector<f64> {
        if gamma == 0.0 {
            return mean.clone();
        }
        let sd = (gamma / self.s() as f64).sqrt();
        mean + self.standard_noise(i, j, k) * sd
    }

    pub fn population_means(&self, i: usize) -> Result<ModelMatrix> {
        if i >= self.n() {
            return Err(Error::invalid(format!("model index {i} out of range (n = {})", self.n())));
        }
        let m = self.m();
        let mut rows = DMatrix::zeros(m, self.s());
        for j in 0..m {
            rows.row_mut(j).copy_from(&self.mean_row(i, j, m).transpose());
        }
        ModelMatrix::new(model_label(i), rows, Role::PopulationMean)
    }

    /// Latent distances `||phi_i - phi_i'||`.
    pub fn exact_limit_matrix(&self) -> DissimilarityMatrix {
        let labels = (0..self.n()).map(model_label).collect();
        DissimilarityMatrix::from_fn(labels, |a, b| (self.latents.row(a) - self.latents.row(b)).norm())
            .expect("latent distances satisfy the dissimilarity invariants")
    }

    /// `r` replicates for every `(model, query)` pair.
    pub fn sample_collection(&self) -> CollectionTable {
        let m = self.m();
        let batches: Vec<ResponseBatch> = (0..self.n() * m)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / m, idx % m);
                let mean = self.mean_row(i, j, m);
                let g = self.gamma[(i, j)];
                let vectors = (0..self.r as u64)
                    .map(|k| self.draw(&mean, g, i, j, k).iter().copied().collect())
                    .collect();
                ResponseBatch::new(model_label(i), query_label(j), vectors)
                    .expect("simulated batches are well formed")
            })
            .collect();
        CollectionTable::new(
            (0..self.n()).map(model_label).collect(),
            (0..m).map(query_label).collect(),
            batches,
        )
        .expect("simulated table is complete")
    }
}

fn random_query_map(seed: u64, j: usize, s: usize, q: usize) -> QueryMap {
    let mut rng = substream(seed, &[domain::QUERY_MAP, j as u64]);
    let g = DMatrix::from_fn(s, q, |_, _| StandardNormal.sample(&mut rng));
    let rotation = QR::new(g).q();
    let offset = DVector::from_fn(s, |_, _| StandardNormal.sample(&mut rng));
    QueryMap { rotation, offset }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrepancy::{discrepancy_matrix, mean_response_matrices};

    fn config(n: usize, m: usize, s: usize, q: usize, r: usize, gamma: Option<f64>) -> SynthConfig {
        SynthConfig {
            n,
            m,
            s,
            r,
            latent: LatentSpec { q, manifold: Manifold::UnitSphere, seed: 5 },
            gamma: gamma.map(|c| GammaSchedule::Constant { c }),
            seed: 77,
        }
    }

    #[test]
    fn sphere_latents_have_unit_norm() {
        let spec = LatentSpec { q: 3, manifold: Manifold::UnitSphere, seed: 1 };
        let l = sample_latents(&spec, 50).unwrap();
        for row in l.row_iter() {
            assert!((row.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cube_latents_in_range() {
        let spec = LatentSpec { q: 2, manifold: Manifold::UnitCube, seed: 1 };
        let l = sample_latents(&spec, 50).unwrap();
        assert!(l.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn latents_deterministic_and_validated() {
        let spec = LatentSpec { q: 4, manifold: Manifold::UnitCube, seed: 9 };
        assert_eq!(sample_latents(&spec, 7).unwrap(), sample_latents(&spec, 7).unwrap());
        assert!(sample_latents(&LatentSpec { q: 0, ..spec }, 7).is_err());
        assert!(sample_latents(&spec, 1).is_err());
    }

    #[test]
    fn query_maps_orthonormal() {
        let c = SyntheticCollection::generate(&config(3, 6, 5, 3, 1, None)).unwrap();
        for map in c.query_maps() {
            let gram = map.rotation.transpose() * &map.rotation;
            assert!((gram - DMatrix::identity(3, 3)).norm() < 1e-10);
        }
    }

    #[test]
    fn generate_rejects_bad_configs() {
        assert!(SyntheticCollection::generate(&config(3, 2, 2, 3, 1, None)).is_err());
        assert!(SyntheticCollection::generate(&config(3, 0, 3, 3, 1, None)).is_err());
        assert!(SyntheticCollection::generate(&config(3, 2, 3, 3, 0, None)).is_err());
        assert!(SyntheticCollection::generate(&config(3, 2, 3, 3, 1, Some(-1.0))).is_err());
    }

    #[test]
    fn identical_latents_give_zero_discrepancy() {
        let base = SyntheticCollection::generate(&config(2, 4, 3, 2, 1, None)).unwrap();
        let mut latents = base.latents().clone();
        let first = latents.row(0).clone_owned();
        latents.row_mut(1).copy_from(&first);
        let c = SyntheticCollection::new(latents, base.query_maps().to_vec(), DMatrix::zeros(2, 4), 1, 0).unwrap();
        let d = discrepancy_matrix(&[c.population_means(0).unwrap(), c.population_means(1).unwrap()]).unwrap();
        assert_eq!(d.get(0, 1), 0.0);
    }

    #[test]
    fn scalar_closed_form() {
        let maps = vec![QueryMap { rotation: DMatrix::from_element(1, 1, 1.0), offset: DVector::zeros(1) }; 4];
        let latents = DMatrix::from_row_slice(2, 1, &[0.0, 2.0]);
        let c = SyntheticCollection::new(latents, maps, DMatrix::zeros(2, 4), 1, 0).unwrap();
        let mu2 = c.population_means(1).unwrap();
        assert!(mu2.rows().iter().all(|x| *x == 4.0));
        let d = discrepancy_matrix(&[c.population_means(0).unwrap(), mu2]).unwrap();
        assert_eq!(d.get(0, 1), 2.0);
        assert_eq!(c.population_means(0).unwrap().role(), Role::PopulationMean);
        assert!(c.population_means(2).is_err());
    }

    #[test]
    fn exact_limit_basis_vectors() {
        let maps = vec![QueryMap { rotation: DMatrix::identity(3, 3), offset: DVector::zeros(3) }];
        let c = SyntheticCollection::new(DMatrix::identity(3, 3), maps, DMatrix::zeros(3, 1), 1, 0).unwrap();
        let d = c.exact_limit_matrix();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 0.0 } else { 2f64.sqrt() };
                assert!((d.get(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn exact_limit_matches_population_route() {
        for seed in 0..5 {
            let mut cfg = config(6, 7, 5, 3, 1, None);
            cfg.seed = seed;
            cfg.latent.seed = seed + 100;
            let c = SyntheticCollection::generate(&cfg).unwrap();
            let mus: Vec<_> = (0..c.n()).map(|i| c.population_means(i).unwrap()).collect();
            let via_means = discrepancy_matrix(&mus).unwrap();
            let limit = c.exact_limit_matrix();
            assert!((via_means.values() - limit.values()).amax() < 1e-10);
        }
    }

    #[test]
    fn zero_gamma_replicates_equal_means() {
        let c = SyntheticCollection::generate(&config(3, 4, 3, 2, 5, None)).unwrap();
        let t = c.sample_collection();
        for i in 0..3 {
            let mu = c.population_means(i).unwrap();
            for j in 0..4 {
                for v in t.batch(i, j).vectors() {
                    for (a, b) in v.iter().zip(mu.rows().row(j).iter()) {
                        assert_eq!(a, b);
                    }
                }
            }
        }
    }

    #[test]
    fn sample_covariance_trace_matches_gamma() {
        let s = 4;
        let c = SyntheticCollection::generate(&config(2, 1, s, 2, 20_000, Some(s as f64))).unwrap();
        let t = c.sample_collection();
        let b = t.batch(0, 0);
        let mean = b.mean();
        let r = b.replicates() as f64;
        let trace: f64 = b
            .vectors()
            .iter()
            .map(|v| v.iter().zip(&mean).map(|(x, m)| (x - m).powi(2)).sum::<f64>())
            .sum::<f64>()
            / (r - 1.0);
        assert!((trace - s as f64).abs() < 0.05 * s as f64, "{trace}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let c = SyntheticCollection::generate(&config(4, 3, 3, 2, 6, Some(1.0))).unwrap();
        assert_eq!(c.sample_collection(), c.sample_collection());
        let again = SyntheticCollection::generate(&config(4, 3, 3, 2, 6, Some(1.0))).unwrap();
        assert_eq!(c.sample_collection(), again.sample_collection());
    }

    #[test]
    fn noiseless_table_reproduces_limit() {
        let c = SyntheticCollection::generate(&config(5, 9, 4, 3, 2, None)).unwrap();
        let d = discrepancy_matrix(&mean_response_matrices(&c.sample_collection()).unwrap()).unwrap();
        let limit = c.exact_limit_matrix();
        for i in 0..5 {
            for j in 0..5 {
                assert!((d.get(i, j) - limit.get(i, j)).abs() <= 1e-12 * limit.get(i, j).max(1.0));
            }
        }
    }

    #[test]
    fn power_schedule() {
        let g = GammaSchedule::Power { c: 1.0, alpha: 2.0 };
        assert_eq!(g.gamma(10), 100.0);
        assert_eq!(GammaSchedule::Constant { c: 3.0 }.gamma(10), 3.0);
        assert!(GammaSchedule::Constant { c: 0.0 }.validate().is_err());
    }
}
