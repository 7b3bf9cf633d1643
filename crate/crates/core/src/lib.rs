//! Perspective spaces for collections of generative models.
//!
//! Each model is summarised by the mean of its embedded responses to a shared
//! set of queries. Pairwise Frobenius discrepancies between those mean
//! matrices are embedded into a low-dimensional Euclidean space by raw-stress
//! multidimensional scaling. The crate also carries a synthetic model
//! simulator with exact ground truth and a bootstrap harness that measures
//! how the estimated configuration approaches the limit as the number of
//! models, queries and replicates grows.
//!
//! Module map:
//!
//! - [`types`], [`metrics`]: shared domain types, the raw-stress objective and row norms.
//! - [`discrepancy`]: replicate means and the discrepancy matrix.
//! - [`mds`]: classical initialisation and SMACOF majorization.
//! - [`alignment`]: orthogonal Procrustes.
//! - [`synth`]: synthetic collections with exactly realizable means.
//! - [`experiments`]: bootstrap regimes, tail-bound check, trend statistics.
//! - [`io`]: JSONL embeddings, CSV matrices and results, JSON configs.

pub mod alignment;
pub mod discrepancy;
mod error;
pub mod experiments;
pub mod io;
pub mod mds;
pub mod metrics;
pub mod rng;
pub mod synth;
pub mod types;

pub use alignment::{aligned_error, procrustes, Alignment, ErrorMetric};
pub use discrepancy::{discrepancy_matrix, mean_response_matrix, CollectionTable};
pub use error::{Error, Result};
pub use experiments::{run_regime, RegimeConfig, TrialResult};
pub use mds::{classical_mds_init, guttman_step, mds, SolverSettings};
pub use metrics::{avg_l2, raw_stress, two_to_infinity};
pub use synth::{GammaSchedule, LatentSpec, Manifold, SyntheticCollection};
pub use types::{Configuration, DissimilarityMatrix, ModelMatrix, ResponseBatch, Role, SolverMeta, StartKind};

pub use nalgebra::{DMatrix, DVector};
