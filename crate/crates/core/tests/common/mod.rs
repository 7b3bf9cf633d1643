//! Brute-force raw-stress oracle for four points in the plane. Uses no part
//! of the solver.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Literal ordered-pair raw stress of four planar points packed as `[x0, y0, x1, y1, ...]`.
pub fn stress4(x: &[f64], delta: &[[f64; 4]; 4]) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let d = ((x[2 * i] - x[2 * j]).powi(2) + (x[2 * i + 1] - x[2 * j + 1]).powi(2)).sqrt();
            acc += (d - delta[i][j]).powi(2);
        }
    }
    acc
}

pub fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64) -> (Vec<f64>, f64) {
    let dim = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    for _ in 0..20_000 {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if vals[dim] - vals[0] < 1e-15 * vals[0].max(1e-300) + 1e-300 {
            break;
        }
        let centroid: Vec<f64> =
            (0..dim).map(|c| simplex[..dim].iter().map(|v| v[c]).sum::<f64>() / dim as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            (0..dim).map(|c| centroid[c] + t * (simplex[dim][c] - centroid[c])).collect()
        };
        let refl = along(-1.0);
        let fr = f(&refl);
        if fr < vals[0] {
            let exp = along(-2.0);
            let fe = f(&exp);
            if fe < fr {
                simplex[dim] = exp;
                vals[dim] = fe;
            } else {
                simplex[dim] = refl;
                vals[dim] = fr;
            }
        } else if fr < vals[dim - 1] {
            simplex[dim] = refl;
            vals[dim] = fr;
        } else {
            let con = if fr < vals[dim] { along(-0.5) } else { along(0.5) };
            let fc = f(&con);
            if fc < vals[dim].min(fr) {
                simplex[dim] = con;
                vals[dim] = fc;
            } else {
                for i in 1..=dim {
                    simplex[i] = (0..dim).map(|c| simplex[0][c] + 0.5 * (simplex[i][c] - simplex[0][c])).collect();
                    vals[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=dim).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    (simplex[best].clone(), vals[best])
}

/// Minimum raw stress of four points in the plane: 1e5 uniform random
/// configurations, the best 25 polished by Nelder-Mead.
pub fn brute_force_min(delta: &[[f64; 4]; 4], rng: &mut ChaCha8Rng) -> f64 {
    let f = |x: &[f64]| stress4(x, delta);
    let scale = delta.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let mut pool: Vec<(f64, Vec<f64>)> = Vec::with_capacity(100_000);
    for _ in 0..100_000 {
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-scale..scale)).collect();
        pool.push((f(&x), x));
    }
    pool.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = f64::INFINITY;
    for (_, x) in pool.iter().take(25) {
        let (mut x, mut v) = nelder_mead(&f, x, 0.1 * scale);
        for _ in 0..3 {
            let (nx, nv) = nelder_mead(&f, &x, 0.01 * scale);
            x = nx;
            v = nv;
        }
        best = best.min(v);
    }
    best
}
