use perspace::{mds, procrustes, raw_stress, Configuration, DMatrix, DissimilarityMatrix, SolverSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}")).collect()
}

fn distances_of(points: &DMatrix<f64>) -> DissimilarityMatrix {
    DissimilarityMatrix::from_fn(labels(points.nrows()), |a, b| (points.row(a) - points.row(b)).norm()).unwrap()
}

#[test]
fn regular_tetrahedron_matches_brute_force() {
    let t = DissimilarityMatrix::from_fn(labels(4), |_, _| 1.0).unwrap();
    let cfg = mds(&t, &SolverSettings::new(2)).unwrap();
    let delta = [[0.0, 1.0, 1.0, 1.0], [1.0, 0.0, 1.0, 1.0], [1.0, 1.0, 0.0, 1.0], [1.0, 1.0, 1.0, 0.0]];
    let brute = common::brute_force_min(&delta, &mut ChaCha8Rng::seed_from_u64(17));
    assert!(cfg.stress() > 1e-3, "tetrahedron is not planar");
    assert!(
        (cfg.stress() - brute).abs() <= 0.01 * brute,
        "solver {} vs brute force {brute}",
        cfg.stress()
    );
    let literal = common::stress4(cfg.points().transpose().as_slice(), &delta);
    assert!((literal - cfg.stress()).abs() < 1e-12);
}

#[test]
fn realizable_targets_fit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for seed in 0..10 {
        let n = rng.random_range(4..=20);
        let pts = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-2.0..2.0));
        let t = distances_of(&pts);
        let cfg = mds(&t, &SolverSettings::new(3).with_seed(seed)).unwrap();
        assert!(cfg.stress() <= 1e-8 * t.values().norm_squared(), "stress {}", cfg.stress());
        for c in cfg.points().column_iter() {
            assert!((c.sum() / n as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn scale_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for seed in 0..8u64 {
        let n = rng.random_range(5..=12);
        let t = DissimilarityMatrix::from_fn(labels(n), |_, _| rng.random_range(0.2..2.0)).unwrap();
        let settings = SolverSettings::new(2).with_seed(seed);
        let base = mds(&t, &settings).unwrap();
        for c in [0.5, 2.0] {
            let scaled = mds(&t.scaled(c).unwrap(), &settings).unwrap();
            let expected = c * c * base.stress();
            assert!(
                (scaled.stress() - expected).abs() <= 1e-6 * expected.max(1e-12),
                "c={c}: {} vs {expected}",
                scaled.stress()
            );
            let grown = Configuration::new(labels(n), base.points() * c).unwrap();
            let a = procrustes(&scaled, &grown, true).unwrap();
            let rel = a.residual / grown.points().norm();
            assert!(rel < 1e-4, "c={c}: relative residual {rel}");
        }
    }
}

#[test]
fn reported_stress_matches_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let t = DissimilarityMatrix::from_fn(labels(9), |_, _| rng.random_range(0.0..3.0)).unwrap();
    let cfg = mds(&t, &SolverSettings::new(2).with_seed(1)).unwrap();
    let again = raw_stress(&cfg, &t).unwrap();
    assert!((again - cfg.stress()).abs() <= 1e-12 * again);
}
