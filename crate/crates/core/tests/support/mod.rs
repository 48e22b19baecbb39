//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the crate's eigensolver or derivative code.

#![allow(dead_code)]

use eos_core::{ModelConfig, Params};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Mat3 = [[f64; 3]; 3];

/// Loss written out from scratch.
pub fn loss(l1: f64, l2: f64, p: [f64; 3]) -> f64 {
    let [a, b1, b2] = p;
    0.5 * l1 * (a * b1).powi(2) + 0.5 * l2 * (a * b2 - 1.0).powi(2)
}

/// Central differences of the scratch loss.
pub fn fd_gradient(l1: f64, l2: f64, p: [f64; 3], h: f64) -> [f64; 3] {
    let mut g = [0.0; 3];
    for i in 0..3 {
        let (mut hi, mut lo) = (p, p);
        hi[i] += h;
        lo[i] -= h;
        g[i] = (loss(l1, l2, hi) - loss(l1, l2, lo)) / (2.0 * h);
    }
    g
}

/// Central differences of a gradient function.
pub fn fd_jacobian<F>(grad: F, p: [f64; 3], h: f64) -> Mat3
where
    F: Fn([f64; 3]) -> [f64; 3],
{
    let mut j = [[0.0; 3]; 3];
    for c in 0..3 {
        let (mut hi, mut lo) = (p, p);
        hi[c] += h;
        lo[c] -= h;
        let (gh, gl) = (grad(hi), grad(lo));
        for r in 0..3 {
            j[r][c] = (gh[r] - gl[r]) / (2.0 * h);
        }
    }
    j
}

fn mat_vec(a: &Mat3, v: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (o, row) in out.iter_mut().zip(a) {
        *o = row.iter().zip(v).map(|(x, y)| x * y).sum();
    }
    out
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.map(|x| x / n)
}

/// Largest eigenvalue and eigenvector by power iteration on `A + cI`, with `c`
/// a Gershgorin shift making every eigenvalue of the shifted matrix nonnegative.
pub fn power_iteration(a: &Mat3, iters: usize) -> (f64, [f64; 3]) {
    let shift = (0..3)
        .map(|i| {
            let radius: f64 = (0..3).filter(|&j| j != i).map(|j| a[i][j].abs()).sum();
            radius - a[i][i]
        })
        .fold(0.0f64, f64::max);
    let mut b = *a;
    for (i, row) in b.iter_mut().enumerate() {
        row[i] += shift;
    }
    let mut v = unit([0.577, 0.613, 0.539]);
    for _ in 0..iters {
        v = unit(mat_vec(&b, &v));
    }
    let av = mat_vec(a, &v);
    let value = v.iter().zip(&av).map(|(x, y)| x * y).sum();
    (value, v)
}

/// Uniform points in the box α, β2 ∈ [0.1, 3], β1 ∈ [−0.1, 0.1].
pub fn box_points(seed: u64, n: usize) -> Vec<Params> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Params::new(
                rng.gen_range(0.1..3.0),
                rng.gen_range(-0.1..0.1),
                rng.gen_range(0.1..3.0),
            )
        })
        .collect()
}

pub fn figure1() -> ModelConfig {
    ModelConfig::new(100.0, 0.01, 0.05).unwrap()
}
