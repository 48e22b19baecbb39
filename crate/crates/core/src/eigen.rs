//! Closed-form eigen-decomposition of real symmetric 3×3 matrices.
//!
//! Eigenvalues come from the trigonometric solution of the characteristic cubic.
//! The top eigenvector is the normalized largest cross product of two rows of
//! `A - λI`, and the returned eigenvalue is its Rayleigh quotient.

use crate::num::{acos, cos, cross, dot, hypot, norm, scale, sqrt};
use core::f64::consts::PI;

/// Symmetric 3×3 matrix stored row-major.
pub type Sym3 = [[f64; 3]; 3];

/// Relative gap below which the two largest eigenvalues are treated as equal.
pub const DEGENERACY_GAP: f64 = 1e-12;

/// All three eigenvalues in descending order.
pub fn eigenvalues(a: &Sym3) -> [f64; 3] {
    let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let d0 = a[0][0] - q;
    let d1 = a[1][1] - q;
    let d2 = a[2][2] - q;
    let p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1;
    if p2 == 0.0 {
        return [q, q, q];
    }
    let p = sqrt(p2 / 6.0);
    // det((A - qI) / p) / 2
    let b = [
        [d0 / p, a[0][1] / p, a[0][2] / p],
        [a[1][0] / p, d1 / p, a[1][2] / p],
        [a[2][0] / p, a[2][1] / p, d2 / p],
    ];
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = acos(r) / 3.0;
    let hi = q + 2.0 * p * cos(phi);
    let lo = q + 2.0 * p * cos(phi + 2.0 * PI / 3.0);
    let mid = 3.0 * q - hi - lo;
    let mut out = [hi, mid, lo];
    // cos is monotone on the relevant range, but guard the ordering anyway
    if out[1] > out[0] {
        out.swap(0, 1);
    }
    if out[2] > out[1] {
        out.swap(1, 2);
    }
    if out[1] > out[0] {
        out.swap(0, 1);
    }
    out
}

/// Unit vector spanning the null space of `A - λI`, assuming that null space is
/// one-dimensional. Returns `None` when every row cross product vanishes.
fn null_vector(a: &Sym3, lambda: f64) -> Option<[f64; 3]> {
    let r0 = [a[0][0] - lambda, a[0][1], a[0][2]];
    let r1 = [a[1][0], a[1][1] - lambda, a[1][2]];
    let r2 = [a[2][0], a[2][1], a[2][2] - lambda];
    let candidates = [cross(&r0, &r1), cross(&r0, &r2), cross(&r1, &r2)];
    let mut best = candidates[0];
    let mut best_n = dot(&best, &best);
    for c in &candidates[1..] {
        let n = dot(c, c);
        if n > best_n {
            best = *c;
            best_n = n;
        }
    }
    if best_n == 0.0 || !best_n.is_finite() {
        return None;
    }
    // scale the largest entry to ±1 first, so axis vectors come out exact
    let m = best.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let best = scale(&best, 1.0 / m);
    Some(scale(&best, 1.0 / norm(&best)))
}

fn mat_vec(a: &Sym3, v: &[f64; 3]) -> [f64; 3] {
    [dot(&a[0], v), dot(&a[1], v), dot(&a[2], v)]
}

/// Largest eigenvalue and a unit eigenvector for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopEigen {
    pub value: f64,
    pub vector: [f64; 3],
    /// The two largest eigenvalues coincide (relative gap at most
    /// [`DEGENERACY_GAP`]); `vector` is then the unit vector in the top
    /// eigenspace with the largest `|v[1]|`.
    pub degenerate: bool,
}

/// Relative gap below which the cubic's eigenvalues are too inaccurate to
/// separate the top pair; the gap is then remeasured on a 2×2 deflation.
const CLOSE_GAP: f64 = 1e-6;

/// Top eigenpair of a symmetric 3×3 matrix.
pub fn top_eigen(a: &Sym3) -> TopEigen {
    let eig = eigenvalues(a);
    let scale_ref = eig[0].abs().max(eig[2].abs());
    let e1 = [0.0, 1.0, 0.0];

    let (vector, degenerate) = if eig[0] - eig[1] > CLOSE_GAP * scale_ref {
        (null_vector(a, eig[0]).unwrap_or(e1), false)
    } else if eig[0] - eig[2] <= DEGENERACY_GAP * scale_ref {
        // multiple of the identity
        (e1, true)
    } else {
        match null_vector(a, eig[2]) {
            Some(w) => top_of_complement(a, &w, scale_ref),
            None => (e1, true),
        }
    };
    let vector = canonical_sign(vector);
    let value = dot(&vector, &mat_vec(a, &vector));
    TopEigen {
        value,
        vector,
        degenerate,
    }
}

/// Top eigenvector within the plane orthogonal to the bottom eigenvector `w`.
///
/// The plane basis starts from the projection of `e_β1`, which is also the
/// answer when the top pair is degenerate.
fn top_of_complement(a: &Sym3, w: &[f64; 3], scale_ref: f64) -> ([f64; 3], bool) {
    let mut u1 = [-w[1] * w[0], 1.0 - w[1] * w[1], -w[1] * w[2]];
    let n = norm(&u1);
    if n < 1e-8 {
        // e_β1 is (nearly) the bottom eigenvector
        let seed = if w[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 0.0, 1.0]
        };
        let c = dot(&seed, w);
        u1 = [seed[0] - c * w[0], seed[1] - c * w[1], seed[2] - c * w[2]];
        u1 = scale(&u1, 1.0 / norm(&u1));
    } else {
        u1 = scale(&u1, 1.0 / n);
    }
    let u2 = cross(w, &u1);
    let (au1, au2) = (mat_vec(a, &u1), mat_vec(a, &u2));
    let p = dot(&u1, &au1);
    let q = dot(&u1, &au2);
    let r = dot(&u2, &au2);
    let half = 0.5 * (p - r);
    let rad = hypot(half, q);
    if 2.0 * rad <= DEGENERACY_GAP * scale_ref {
        return (u1, true);
    }
    let mu = 0.5 * (p + r) + rad;
    let (c1, c2) = if p >= r { (mu - r, q) } else { (q, mu - p) };
    let m = hypot(c1, c2);
    let v = [
        (c1 * u1[0] + c2 * u2[0]) / m,
        (c1 * u1[1] + c2 * u2[1]) / m,
        (c1 * u1[2] + c2 * u2[2]) / m,
    ];
    (v, false)
}

/// Fix the sign so the largest-magnitude component is positive.
fn canonical_sign(v: [f64; 3]) -> [f64; 3] {
    let mut k = 0;
    for i in 1..3 {
        if v[i].abs() > v[k].abs() {
            k = i;
        }
    }
    if v[k] < 0.0 {
        scale(&v, -1.0)
    } else {
        v
    }
}

/// `‖A·v − λ·v‖₂`.
pub fn residual(a: &Sym3, value: f64, v: &[f64; 3]) -> f64 {
    let av = mat_vec(a, v);
    norm(&[av[0] - value * v[0], av[1] - value * v[1], av[2] - value * v[2]])
}
