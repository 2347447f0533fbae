#![allow(dead_code)]

use hd_delta::montecarlo::SimRng;
use nalgebra::{DMatrix, DVector};

pub fn gaussian(rng: &mut SimRng, rows: usize, cols: usize) -> DMatrix<f64> {
    rng.normal_matrix(rows, cols)
}

pub fn gaussian_vec(rng: &mut SimRng, len: usize) -> DVector<f64> {
    rng.normal_vector(len, 1.0)
}

/// `B'B/k + εI`, well-conditioned symmetric positive definite.
pub fn spd(rng: &mut SimRng, p: usize) -> DMatrix<f64> {
    let b = rng.normal_matrix(p + 2, p);
    let mut s = b.transpose() * &b / (p + 2) as f64;
    for i in 0..p {
        s[(i, i)] += 0.1;
    }
    // exact symmetry
    (&s + s.transpose()) * 0.5
}

/// Columns orthogonal with `X'X/n = I`, via modified Gram–Schmidt written
/// out here so the check does not lean on the library's own QR.
pub fn orthonormal_design(rng: &mut SimRng, n: usize, p: usize) -> DMatrix<f64> {
    let mut q = rng.normal_matrix(n, p);
    for j in 0..p {
        for _ in 0..2 {
            for k in 0..j {
                let proj = q.column(k).dot(&q.column(j));
                let ck = q.column(k).clone_owned();
                q.column_mut(j).axpy(-proj, &ck, 1.0);
            }
        }
        let norm = q.column(j).norm();
        q.column_mut(j).scale_mut(1.0 / norm);
    }
    q * (n as f64).sqrt()
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// `sign(z)·max(|z| − t, 0)`, kept separate from the library version.
pub fn soft_threshold_oracle(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// OLS through the normal equations and Cholesky, independent of the
/// library's QR path.
pub fn ols_normal_equations(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    xtx.cholesky().expect("full rank").solve(&xty)
}
