//! Raw-stress multidimensional scaling.
//!
//! The solver minimizes `sum_{i,i'} (||z_i - z_i'|| - target[i][i'])^2` by
//! iterative majorization (the Guttman transform). Each step cannot increase
//! the stress. Runs start from the classical (Torgerson) solution and from
//! `restarts` seeded Gaussian configurations; the lowest final stress wins,
//! ties broken by start order.
//!
//! Minimizers are only defined up to isometry, so every returned
//! configuration is column-centered and callers compare configurations
//! through [`crate::alignment`].

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{row_distance, stress_of};
use crate::rng::{domain, substream};
use crate::types::{center_columns, Configuration, DissimilarityMatrix, SolverMeta, StartKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub dim: usize,
    pub max_iters: usize,
    /// Stop once `(s_t - s_{t+1}) / s_t` drops below this.
    pub rel_tol: f64,
    /// Random starts in addition to the classical start.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { dim: 2, max_iters: 2000, rel_tol: 1e-10, restarts: 4, seed: 0 }
    }
}

impl SolverSettings {
    pub fn new(dim: usize) -> Self {
        Self { dim, ..Self::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("embedding dimension must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::invalid(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        Ok(())
    }
}

/// Classical (Torgerson) scaling: top-`d` eigenpairs of `-1/2 J D^2 J`.
///
/// Negative eigenvalues are clamped to zero, so non-Euclidean targets give
/// degenerate trailing columns rather than an error. When `d > n` the extra
/// columns are zero. Eigenvector signs are fixed by making the first
/// non-negligible component positive.
pub fn classical_mds_init(target: &DissimilarityMatrix, d: usize) -> Result<Configuration> {
    let points = classical_points(target, d)?;
    Configuration::fitted(
        target,
        points,
        SolverMeta { start: StartKind::Classical, ..SolverMeta::default() },
    )
}

fn classical_points(target: &DissimilarityMatrix, d: usize) -> Result<DMatrix<f64>> {
    let n = target.n();
    if n < 2 {
        return Err(Error::invalid(format!("classical scaling needs n >= 2, got {n}")));
    }
    if d == 0 {
        return Err(Error::invalid("embedding dimension must be at least 1"));
    }
    let values = target.values();
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("target has non-finite entries"));
    }

    let sq = values.map(|x| x * x);
    let row_means: Vec<f64> = sq.row_iter().map(|r| r.sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));

    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut points = DMatrix::zeros(n, d);
    for (c, &k) in order.iter().take(d).enumerate() {
        let lambda = eig.eigenvalues[k].max(0.0);
        if lambda <= 0.0 {
            continue;
        }
        let mut v = eig.eigenvectors.column(k).clone_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        let root = lambda.sqrt();
        for i in 0..n {
            points[(i, c)] = v[i] * root;
        }
    }
    center_columns(&mut points);
    Ok(points)
}

/// Pairwise distances of the rows of `points`, row-major `n x n`.
fn distances(points: &DMatrix<f64>) -> Vec<f64> {
    let n = points.nrows();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = row_distance(points, i, j);
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    out
}

fn stress_from_distances(dist: &[f64], target: &DMatrix<f64>) -> f64 {
    let n = target.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = dist[i * n + j] - target[(i, j)];
            acc += r * r;
        }
    }
    2.0 * acc
}

/// `(1/n) B(Z) Z` using precomputed distances; zero distances get weight 0.
fn guttman_update(points: &DMatrix<f64>, dist: &[f64], target: &DMatrix<f64>) -> DMatrix<f64> {
    let n = points.nrows();
    let d = points.ncols();
    let mut next = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dij = dist[i * n + j];
            if dij <= 0.0 {
                continue;
            }
            let w = target[(i, j)] / dij;
            for c in 0..d {
                next[(i, c)] += w * (points[(i, c)] - points[(j, c)]);
            }
        }
    }
    next /= n as f64;
    center_columns(&mut next);
    next
}

/// One Guttman transform of `current` toward `target`.
pub fn guttman_step(current: &Configuration, target: &DissimilarityMatrix) -> Result<Configuration> {
    if current.n() != target.n() {
        return Err(Error::shape(format!(
            "configuration has {} points, target has {}",
            current.n(),
            target.n()
        )));
    }
    if current.labels() != target.labels() {
        return Err(Error::Labels("configuration and target list different labels".into()));
    }
    let dist = distances(current.points());
    let next = guttman_update(current.points(), &dist, target.values());
    let mut meta = *current.meta();
    meta.iterations += 1;
    Configuration::fitted(target, next, meta)
}

/// Stress after every iteration of one run, starting with the initial stress.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: StartKind,
    pub stress: Vec<f64>,
    pub converged: bool,
}

struct Run {
    points: DMatrix<f64>,
    stress: f64,
    iterations: usize,
    trajectory: Trajectory,
}

fn descend(
    mut points: DMatrix<f64>,
    target: &DMatrix<f64>,
    settings: &SolverSettings,
    start: StartKind,
) -> Run {
    center_columns(&mut points);
    let mut dist = distances(&points);
    let mut stress = stress_from_distances(&dist, target);
    let mut history = vec![stress];
    let mut converged = stress == 0.0;
    let mut iterations = 0;
    while !converged && iterations < settings.max_iters {
        let next = guttman_update(&points, &dist, target);
        let next_dist = distances(&next);
        let next_stress = stress_from_distances(&next_dist, target);
        iterations += 1;
        history.push(next_stress);
        let decrease = (stress - next_stress) / stress.max(1e-300);
        points = next;
        dist = next_dist;
        stress = next_stress;
        if decrease < settings.rel_tol || stress == 0.0 {
            converged = true;
        }
    }
    Run {
        points,
        stress,
        iterations,
        trajectory: Trajectory { start, stress: history, converged },
    }
}

fn random_start(target: &DissimilarityMatrix, settings: &SolverSettings, index: usize) -> DMatrix<f64> {
    let n = target.n();
    let mean_sq = target.values().iter().map(|x| x * x).sum::<f64>() / (n * (n - 1)).max(1) as f64;
    let scale = (mean_sq / (2.0 * settings.dim as f64)).sqrt().max(1e-3);
    let mut rng = substream(settings.seed, &[domain::SOLVER_START, index as u64]);
    DMatrix::from_fn(n, settings.dim, |_, _| {
        scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    })
}

/// Minimize raw stress against `target`, returning the best run.
pub fn mds(target: &DissimilarityMatrix, settings: &SolverSettings) -> Result<Configuration> {
    mds_traced(target, settings).map(|(cfg, _)| cfg)
}

/// Like [`mds`], also returning the stress trajectory of every run in start
/// order (classical first).
pub fn mds_traced(
    target: &DissimilarityMatrix,
    settings: &SolverSettings,
) -> Result<(Configuration, Vec<Trajectory>)> {
    settings.validate()?;
    let init = classical_points(target, settings.dim)?;
    let runs: Vec<Run> = (0..=settings.restarts)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                descend(init.clone(), target.values(), settings, StartKind::Classical)
            } else {
                let start = random_start(target, settings, k - 1);
                descend(start, target.values(), settings, StartKind::Random(k - 1))
            }
        })
        .collect();

    // first minimum in start order, so ties resolve the same on any schedule
    let best = runs
        .iter()
        .enumerate()
        .min_by(|(a, x), (b, y)| x.stress.total_cmp(&y.stress).then(a.cmp(b)))
        .map(|(k, _)| k)
        .expect("at least one run");
    let trajectories = runs.iter().map(|r| r.trajectory.clone()).collect();
    let winner = &runs[best];
    debug_assert!((stress_of(&winner.points, target.values()) - winner.stress).abs()
        <= 1e-12 * winner.stress.max(1e-300));
    let meta = SolverMeta {
        start: winner.trajectory.start,
        iterations: winner.iterations,
        restarts: settings.restarts,
        seed: settings.seed,
        converged: winner.trajectory.converged,
    };
    let cfg = Configuration::fitted(target, winner.points.clone(), meta)?;
    Ok((cfg, trajectories))
}
