//! Shared helpers for the integration suites: an independently coded slow
//! projection oracle and small random-input generators.

use ndarray::{Array2, Array3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use kspace_opt::Trajectory;

/// Dense stacked difference matrix rows for one shot: `ns - 1` first
/// differences followed by `ns - 2` second differences. Each row acts on
/// both coordinate axes independently.
pub fn difference_rows(ns: usize) -> Vec<Vec<f64>> {
    let mut rows = Vec::new();
    for i in 0..ns - 1 {
        let mut r = vec![0.0; ns];
        r[i] = -1.0;
        r[i + 1] = 1.0;
        rows.push(r);
    }
    for i in 0..ns.saturating_sub(2) {
        let mut r = vec![0.0; ns];
        r[i] = 1.0;
        r[i + 1] = -2.0;
        r[i + 2] = 1.0;
        rows.push(r);
    }
    rows
}

/// Slow dual-ascent oracle for the Euclidean projection of one shot onto
/// the per-interval speed/acceleration ball constraints: unaccelerated
/// proximal gradient ascent on the dual with a conservative fixed step,
/// run for a fixed (large) number of iterations. Written against the dense
/// difference matrix, independent of the library's FISTA solver.
pub fn oracle_project_shot(
    shot: &Array2<f64>,
    alpha: f64,
    beta: f64,
    iters: usize,
) -> Array2<f64> {
    let ns = shot.shape()[0];
    let rows = difference_rows(ns);
    let nb = rows.len();
    let n1 = ns - 1;
    let radius = |b: usize| if b < n1 { alpha } else { beta };

    // ||D||^2 <= ||D1||^2 + ||D2||^2 <= 4 + 16
    let step = 1.0 / 20.0;
    let mut u = vec![[0.0f64; 2]; nb];
    let mut z = vec![[0.0f64; 2]; ns];
    for _ in 0..iters {
        // z = D^T u - k
        for i in 0..ns {
            z[i] = [-shot[[i, 0]], -shot[[i, 1]]];
        }
        for (b, row) in rows.iter().enumerate() {
            for i in 0..ns {
                if row[i] != 0.0 {
                    z[i][0] += row[i] * u[b][0];
                    z[i][1] += row[i] * u[b][1];
                }
            }
        }
        // gradient step on 0.5||D^T u - k||^2, then block shrink
        for (b, row) in rows.iter().enumerate() {
            let mut g = [0.0f64; 2];
            for i in 0..ns {
                if row[i] != 0.0 {
                    g[0] += row[i] * z[i][0];
                    g[1] += row[i] * z[i][1];
                }
            }
            let vx = u[b][0] - step * g[0];
            let vy = u[b][1] - step * g[1];
            let norm = (vx * vx + vy * vy).sqrt();
            let thresh = step * radius(b);
            let shrink = if norm > thresh { 1.0 - thresh / norm } else { 0.0 };
            u[b] = [vx * shrink, vy * shrink];
        }
    }
    // primal point z = k - D^T u
    let mut out = shot.clone();
    for (b, row) in rows.iter().enumerate() {
        for i in 0..ns {
            if row[i] != 0.0 {
                out[[i, 0]] -= row[i] * u[b][0];
                out[[i, 1]] -= row[i] * u[b][1];
            }
        }
    }
    out
}

pub fn random_trajectory(nc: usize, ns: usize, scale: f64, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Trajectory::new(
        Array3::from_shape_fn((nc, ns, 2), |_| rng.gen_range(-scale..scale)),
        1,
    )
    .unwrap()
}

pub fn frobenius(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
