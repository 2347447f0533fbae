use nalgebra::DVector;

use super::{Dataset, Estimate};
use crate::error::{Error, Result};

/// Diagonal entries of `R` below this fraction of the largest are treated as
/// rank loss.
const RANK_TOL: f64 = 1e-10;

/// Least squares through a Householder QR of `X`.
pub fn ols(data: &Dataset) -> Result<Estimate> {
    let (n, p) = (data.n(), data.p());
    if p > n {
        return Err(Error::Rank(format!("p = {p} exceeds n = {n}")));
    }
    let qr = data.x().clone().qr();
    let r = qr.r();
    let scale = r.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if let Some(j) = (0..p).find(|&j| r[(j, j)].abs() <= RANK_TOL * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::Rank(format!("normal equations are singular (column {j})")));
    }
    let qty: DVector<f64> = qr.q().tr_mul(data.y());
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Rank("triangular solve failed".into()))?;
    Ok(Estimate::from_beta(data, beta, 0.0))
}
