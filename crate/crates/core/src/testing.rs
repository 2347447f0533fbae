//! Shared fixtures for unit tests.

use nalgebra::{DMatrix, DVector};

pub use crate::montecarlo::SimRng;

pub fn rng(seed: u64) -> SimRng {
    SimRng::new(seed)
}

pub fn gaussian_matrix(r: &mut SimRng, rows: usize, cols: usize) -> DMatrix<f64> {
    r.normal_matrix(rows, cols)
}

/// `n × p` design with `X'X/n = I`.
pub fn orthonormal_design(r: &mut SimRng, n: usize, p: usize) -> DMatrix<f64> {
    let q = gaussian_matrix(r, n, p).qr().q();
    q * (n as f64).sqrt()
}

/// Random symmetric positive-definite matrix `B'B/k + δI`.
pub fn random_spd(r: &mut SimRng, p: usize) -> DMatrix<f64> {
    let b = gaussian_matrix(r, p + 2, p);
    b.tr_mul(&b) / (p + 2) as f64 + DMatrix::identity(p, p) * 0.1
}

pub fn random_vector(r: &mut SimRng, len: usize) -> DVector<f64> {
    r.normal_vector(len, 1.0)
}
