//! Bootstrap consistency experiments on synthetic collections.
//!
//! A pool collection of `N` models, `M` queries and `R` replicates per pair
//! is drawn once. Every grid point `(n, m, r)` and bootstrap index `b` is an
//! independent trial: replicates (and, depending on the regime, queries and
//! models) are resampled with replacement from the pool, the discrepancy
//! matrix is embedded, and the estimate is aligned to a reference
//! configuration restricted to the sampled models.
//!
//! All randomness is keyed by the master seed plus the trial coordinates, so
//! the output does not depend on how trials are scheduled across threads.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{aligned_error_with, ErrorMetric};
use crate::discrepancy::{discrepancy_matrix, mean_response_matrices, CollectionTable};
use crate::error::{Error, Result};
use crate::mds::{mds, SolverSettings};
use crate::rng::{derive_seed, domain, substream};
use crate::synth::{model_label, query_label, GammaSchedule, LatentSpec, Manifold, SynthConfig, SyntheticCollection};
use crate::types::{Configuration, ResponseBatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Fixed models and queries; replicates resampled.
    FixedNm,
    /// Fixed models; queries and replicates resampled.
    GrowingM,
    /// Models, queries and replicates all resampled.
    GrowingNm,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::FixedNm => "fixed_nm",
            Regime::GrowingM => "growing_m",
            Regime::GrowingNm => "growing_nm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fixed_nm" => Some(Regime::FixedNm),
            "growing_m" => Some(Regime::GrowingM),
            "growing_nm" => Some(Regime::GrowingNm),
            _ => None,
        }
    }

    fn resamples_models(self) -> bool {
        self == Regime::GrowingNm
    }

    fn resamples_queries(self) -> bool {
        self != Regime::FixedNm
    }
}

/// Where the reference configuration comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyRule {
    /// `mds` of the latent distance matrix (known only for synthetic data).
    #[default]
    ExactLimit,
    /// `mds` of the full pool's discrepancy matrix at maximal `(n, m, r)`.
    MaxParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    pub r: Vec<usize>,
}

/// Shape of the synthetic pool; seeds are derived from the regime seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionSpec {
    /// Embedding dimension.
    pub s: usize,
    /// Latent dimension.
    pub q: usize,
    pub manifold: Manifold,
    /// `null` for noiseless responses.
    pub gamma: Option<GammaSchedule>,
}

/// Pool sizes; each defaults to the maximum of the matching grid.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSizes {
    pub models: Option<usize>,
    pub queries: Option<usize>,
    pub replicates: Option<usize>,
}

/// Solver overrides; unset fields keep [`SolverSettings`] defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub max_iters: Option<usize>,
    pub rel_tol: Option<f64>,
    pub restarts: Option<usize>,
}

fn default_reps() -> usize {
    10
}

fn default_dim() -> usize {
    2
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeConfig {
    pub regime: Regime,
    pub grids: Grids,
    #[serde(default = "default_reps")]
    pub bootstrap_reps: usize,
    #[serde(default = "default_dim")]
    pub embed_dim: usize,
    pub collection: CollectionSpec,
    #[serde(default)]
    pub proxy_rule: ProxyRule,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub pool: PoolSizes,
    #[serde(default)]
    pub solver: SolverOverrides,
    /// Fit a translation as well as `W` when aligning.
    #[serde(default = "yes")]
    pub align_translation: bool,
    /// Record per-trial wall time. Off by default so output is reproducible
    /// byte for byte; when off the column is 0.
    #[serde(default)]
    pub record_timing: bool,
}

impl RegimeConfig {
    pub fn validate(&self) -> Result<()> {
        let g = &self.grids;
        if g.n.is_empty() || g.m.is_empty() || g.r.is_empty() {
            return Err(Error::invalid("every grid needs at least one value"));
        }
        if g.n.iter().any(|&n| n < 2) {
            return Err(Error::invalid("grid n values must be at least 2"));
        }
        if g.m.contains(&0) || g.r.contains(&0) {
            return Err(Error::invalid("grid m and r values must be positive"));
        }
        if self.regime != Regime::GrowingNm && g.n.len() != 1 {
            return Err(Error::invalid(format!("regime {} needs a single n", self.regime.as_str())));
        }
        if self.regime == Regime::FixedNm && g.m.len() != 1 {
            return Err(Error::invalid("regime fixed_nm needs a single m"));
        }
        if self.bootstrap_reps == 0 {
            return Err(Error::invalid("bootstrap_reps must be positive"));
        }
        if self.embed_dim == 0 {
            return Err(Error::invalid("embed_dim must be positive"));
        }
        if self.collection.q == 0 || self.collection.s < self.collection.q {
            return Err(Error::invalid("collection needs 1 <= q <= s"));
        }
        if let Some(gamma) = &self.collection.gamma {
            gamma.validate()?;
        }
        let (pn, pm, pr) = self.pool_sizes();
        if pn < max(&g.n) || pm < max(&g.m) || pr < max(&g.r) {
            return Err(Error::invalid("pool sizes must cover the grid maxima"));
        }
        if self.regime == Regime::FixedNm && pm != g.m[0] {
            return Err(Error::invalid("fixed_nm uses every pool query; pool.queries must equal m"));
        }
        if !self.regime.resamples_models() && pn != g.n[0] {
            return Err(Error::invalid("regimes with fixed models need pool.models equal to n"));
        }
        self.solver_settings(0).validate()
    }

    /// `(N, M, R)`.
    pub fn pool_sizes(&self) -> (usize, usize, usize) {
        (
            self.pool.models.unwrap_or_else(|| max(&self.grids.n)),
            self.pool.queries.unwrap_or_else(|| max(&self.grids.m)),
            self.pool.replicates.unwrap_or_else(|| max(&self.grids.r)),
        )
    }

    pub fn solver_settings(&self, seed: u64) -> SolverSettings {
        let mut s = SolverSettings::new(self.embed_dim).with_seed(seed);
        if let Some(v) = self.solver.max_iters {
            s.max_iters = v;
        }
        if let Some(v) = self.solver.rel_tol {
            s.rel_tol = v;
        }
        if let Some(v) = self.solver.restarts {
            s.restarts = v;
        }
        s
    }

    /// Grid points in output order: `n` outermost, then `m`, then `r`.
    pub fn grid_points(&self) -> Vec<(usize, usize, usize)> {
        let mut out = vec![];
        for &n in &self.grids.n {
            for &m in &self.grids.m {
                for &r in &self.grids.r {
                    out.push((n, m, r));
                }
            }
        }
        out
    }

    pub fn trial_count(&self) -> usize {
        self.grid_points().len() * self.bootstrap_reps
    }

    fn pool_config(&self) -> SynthConfig {
        let (n, m, r) = self.pool_sizes();
        SynthConfig {
            n,
            m,
            s: self.collection.s,
            r,
            latent: LatentSpec {
                q: self.collection.q,
                manifold: self.collection.manifold,
                seed: derive_seed(self.seed, &[domain::POOL, domain::LATENT]),
            },
            gamma: self.collection.gamma,
            seed: derive_seed(self.seed, &[domain::POOL]),
        }
    }

    fn gamma_at(&self, r: usize) -> f64 {
        self.collection.gamma.map_or(0.0, |g| g.gamma(r))
    }
}

fn max(v: &[usize]) -> usize {
    v.iter().copied().max().unwrap_or(0)
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub regime: Regime,
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub bootstrap: usize,
    pub avg_l2_err: f64,
    pub two_inf_err: f64,
    pub stress: f64,
    pub condition_ratio: f64,
    pub wall_time: f64,
}

/// A trial that failed; the remaining trials still run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub bootstrap: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeOutcome {
    pub results: Vec<TrialResult>,
    pub failures: Vec<TrialFailure>,
    /// The reference configuration on the full pool.
    pub reference: Configuration,
}

/// Worst-model value of `(mean_j gamma_ij) / r`.
pub fn condition_ratio(gamma_row_means: &[f64], r: usize) -> f64 {
    let r = r.max(1) as f64;
    gamma_row_means.iter().fold(0.0f64, |acc, g| acc.max(g / r))
}

/// Run every trial of `config`, in grid-then-bootstrap order.
pub fn run_regime(config: &RegimeConfig) -> Result<RegimeOutcome> {
    config.validate()?;
    let pool = SyntheticCollection::generate(&config.pool_config())?;
    let reference = build_reference(config, &pool)?;

    let tasks: Vec<((usize, usize, usize), usize)> = config
        .grid_points()
        .into_iter()
        .flat_map(|p| (0..config.bootstrap_reps).map(move |b| (p, b)))
        .collect();
    let outcomes: Vec<std::result::Result<TrialResult, TrialFailure>> = tasks
        .par_iter()
        .map(|&((n, m, r), b)| {
            run_trial(config, &pool, &reference, n, m, r, b).map_err(|e| TrialFailure {
                n,
                m,
                r,
                bootstrap: b,
                message: e.to_string(),
            })
        })
        .collect();

    let mut results = Vec::with_capacity(outcomes.len());
    let mut failures = vec![];
    for o in outcomes {
        match o {
            Ok(t) => results.push(t),
            Err(f) => failures.push(f),
        }
    }
    Ok(RegimeOutcome { results, failures, reference })
}

fn build_reference(config: &RegimeConfig, pool: &SyntheticCollection) -> Result<Configuration> {
    let settings = config.solver_settings(derive_seed(config.seed, &[domain::REFERENCE]));
    match config.proxy_rule {
        ProxyRule::ExactLimit => mds(&pool.exact_limit_matrix(), &settings),
        ProxyRule::MaxParams => {
            let (n, m, r) = config.pool_sizes();
            let models: Vec<usize> = (0..n).collect();
            let queries: Vec<usize> = (0..m).collect();
            let gamma = config.gamma_at(r);
            let table = assemble_table(pool, &models, &queries, false, false, gamma, |_, _| {
                (0..r as u64).collect()
            })?;
            let target = discrepancy_matrix(&mean_response_matrices(&table)?)?;
            mds(&target, &settings)
        }
    }
}

/// Table over the given pool models and queries. Each pair's replicate keys
/// come from `replicates(a, b)` where `a`, `b` are positions in the lists.
fn assemble_table(
    pool: &SyntheticCollection,
    models: &[usize],
    queries: &[usize],
    tag_models: bool,
    tag_queries: bool,
    gamma: f64,
    mut replicates: impl FnMut(usize, usize) -> Vec<u64>,
) -> Result<CollectionTable> {
    let label = |base: String, pos: usize, tag: bool| if tag { format!("{base}#{pos}") } else { base };
    let model_ids: Vec<String> =
        models.iter().enumerate().map(|(a, &i)| label(model_label(i), a, tag_models)).collect();
    let query_ids: Vec<String> =
        queries.iter().enumerate().map(|(b, &j)| label(query_label(j), b, tag_queries)).collect();
    let m_eff = queries.len();
    let mut batches = Vec::with_capacity(models.len() * queries.len());
    for (a, &i) in models.iter().enumerate() {
        for (b, &j) in queries.iter().enumerate() {
            let mean = pool.mean_row(i, j, m_eff);
            let vectors = replicates(a, b)
                .into_iter()
                .map(|k| pool.draw(&mean, gamma, i, j, k).iter().copied().collect())
                .collect();
            batches.push(ResponseBatch::new(model_ids[a].clone(), query_ids[b].clone(), vectors)?);
        }
    }
    CollectionTable::new(model_ids, query_ids, batches)
}

#[allow(clippy::too_many_arguments)]
fn run_trial(
    config: &RegimeConfig,
    pool: &SyntheticCollection,
    reference: &Configuration,
    n: usize,
    m: usize,
    r: usize,
    bootstrap: usize,
) -> Result<TrialResult> {
    let clock = Instant::now();
    let (pn, pm, pr) = config.pool_sizes();
    let key = [domain::RESAMPLE, n as u64, m as u64, r as u64, bootstrap as u64];
    let mut rng = substream(config.seed, &key);

    let models: Vec<usize> = if config.regime.resamples_models() {
        (0..n).map(|_| rng.random_range(0..pn)).collect()
    } else {
        (0..n).collect()
    };
    let queries: Vec<usize> = if config.regime.resamples_queries() {
        (0..m).map(|_| rng.random_range(0..pm)).collect()
    } else {
        (0..m).collect()
    };
    let gamma = config.gamma_at(r);
    let table = assemble_table(
        pool,
        &models,
        &queries,
        config.regime.resamples_models(),
        config.regime.resamples_queries(),
        gamma,
        |_, _| (0..r).map(|_| rng.random_range(0..pr as u64)).collect(),
    )?;
    let target = discrepancy_matrix(&mean_response_matrices(&table)?)?;
    let settings = config.solver_settings(derive_seed(
        config.seed,
        &[domain::TRIAL_SOLVER, n as u64, m as u64, r as u64, bootstrap as u64],
    ));
    let estimate = mds(&target, &settings)?;
    let restricted = reference.select(&models, table.model_ids().to_vec())?;
    let t = config.align_translation;
    let avg_l2_err = aligned_error_with(&estimate, &restricted, ErrorMetric::AvgL2, t)?;
    let two_inf_err = aligned_error_with(&estimate, &restricted, ErrorMetric::TwoToInfinity, t)?;
    let condition = condition_ratio(&vec![gamma; n], r);
    let wall_time = if config.record_timing { clock.elapsed().as_secs_f64() } else { 0.0 };
    Ok(TrialResult {
        regime: config.regime,
        n,
        m,
        r,
        bootstrap,
        avg_l2_err,
        two_inf_err,
        stress: estimate.stress(),
        condition_ratio: condition,
        wall_time,
    })
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Per-grid-point aggregates over bootstrap replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub trials: usize,
    pub median_avg_l2: f64,
    pub mean_avg_l2: f64,
    pub median_two_inf: f64,
    pub mean_two_inf: f64,
}

/// Grid summaries sorted by `(n, m, r)`.
pub fn summarize(results: &[TrialResult]) -> Vec<GridSummary> {
    let mut groups: BTreeMap<(usize, usize, usize), Vec<&TrialResult>> = BTreeMap::new();
    for t in results {
        groups.entry((t.n, t.m, t.r)).or_default().push(t);
    }
    groups
        .into_iter()
        .map(|((n, m, r), ts)| {
            let l2: Vec<f64> = ts.iter().map(|t| t.avg_l2_err).collect();
            let inf: Vec<f64> = ts.iter().map(|t| t.two_inf_err).collect();
            GridSummary {
                n,
                m,
                r,
                trials: ts.len(),
                median_avg_l2: median(&l2),
                mean_avg_l2: l2.iter().sum::<f64>() / l2.len() as f64,
                median_two_inf: median(&inf),
                mean_two_inf: inf.iter().sum::<f64>() / inf.len() as f64,
            }
        })
        .collect()
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end + 1 < idx.len() && values[idx[end + 1]] == values[idx[start]] {
            end += 1;
        }
        let avg = (start + end) as f64 / 2.0 + 1.0;
        for &i in &idx[start..=end] {
            out[i] = avg;
        }
        start = end + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman inputs differ in length");
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    N,
    M,
    R,
}

impl Axis {
    fn of(self, t: &TrialResult) -> usize {
        match self {
            Axis::N => t.n,
            Axis::M => t.m,
            Axis::R => t.r,
        }
    }
}

/// Least-squares slope of `log(median avg_l2_err)` against `log(axis)`.
pub fn loglog_slope(results: &[TrialResult], vary: Axis) -> Result<f64> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for t in results {
        groups.entry(vary.of(t)).or_default().push(t.avg_l2_err);
    }
    if groups.len() < 3 {
        return Err(Error::invalid(format!(
            "slope needs at least 3 distinct grid values, got {}",
            groups.len()
        )));
    }
    let mut xs = vec![];
    let mut ys = vec![];
    for (v, errs) in groups {
        let med = median(&errs);
        if med.is_nan() || med <= 0.0 || v == 0 {
            return Err(Error::invalid("slope needs positive errors and grid values"));
        }
        xs.push((v as f64).ln());
        ys.push(med.ln());
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// One cell of the tail-bound table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailBoundRow {
    pub model: usize,
    pub r: usize,
    pub eps: f64,
    pub trials: usize,
    pub exceedances: usize,
    pub frequency: f64,
    /// `sum_j gamma_ij / (r m eps^2)`
    pub bound: f64,
    /// Binomial standard error at `min(bound, 1)`.
    pub std_err: f64,
    /// False when the bound is at least 1 and says nothing.
    pub informative: bool,
    pub pass: bool,
}

/// Monte Carlo estimate of `P[||X_i - mu_i||_F / m > eps]` for every model,
/// replicate count and threshold, next to the Chebyshev-type bound.
pub fn tail_bound_check(
    config: &SynthConfig,
    eps: &[f64],
    r_grid: &[usize],
    trials: usize,
) -> Result<Vec<TailBoundRow>> {
    if trials < 100 {
        return Err(Error::invalid(format!("tail-bound check needs at least 100 trials, got {trials}")));
    }
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::invalid("thresholds must be positive"));
    }
    if r_grid.is_empty() || r_grid.contains(&0) {
        return Err(Error::invalid("replicate grid must be nonempty and positive"));
    }
    let mut rows = vec![];
    for &r in r_grid {
        let coll = SyntheticCollection::generate(&SynthConfig { r, ..config.clone() })?;
        let (n, m) = (coll.n(), coll.m());
        let means: Vec<Vec<_>> =
            (0..n).map(|i| (0..m).map(|j| coll.mean_row(i, j, m)).collect()).collect();
        // deviations[t][i] = ||X_i - mu_i||_F / m for trial t
        let deviations: Vec<Vec<f64>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                (0..n)
                    .map(|i| {
                        let mut sq = 0.0;
                        for j in 0..m {
                            let g = coll.gamma()[(i, j)];
                            let mu = &means[i][j];
                            let mut acc = nalgebra::DVector::zeros(mu.len());
                            for k in 0..r {
                                let key = ((r as u64) << 40) + (t * r + k) as u64;
                                acc += coll.draw(mu, g, i, j, key);
                            }
                            acc /= r as f64;
                            sq += (acc - mu).norm_squared();
                        }
                        sq.sqrt() / m as f64
                    })
                    .collect()
            })
            .collect();
        for &e in eps {
            for i in 0..n {
                let exceedances = deviations.iter().filter(|d| d[i] > e).count();
                let frequency = exceedances as f64 / trials as f64;
                let gamma_sum: f64 = coll.gamma().row(i).sum();
                let bound = gamma_sum / (r as f64 * m as f64 * e * e);
                let p = bound.min(1.0);
                let std_err = (p * (1.0 - p) / trials as f64).sqrt();
                rows.push(TailBoundRow {
                    model: i,
                    r,
                    eps: e,
                    trials,
                    exceedances,
                    frequency,
                    bound,
                    std_err,
                    informative: bound < 1.0,
                    pass: frequency <= bound + 3.0 * std_err,
                });
            }
        }
    }
    Ok(rows)
}
