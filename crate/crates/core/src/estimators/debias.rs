use nalgebra::{DMatrix, DVector};

use super::{nodewise::PrecisionEstimate, Dataset, Estimate};
use crate::error::{ensure_dims, Result};

/// Debiased conservative lasso `b̂ = β̂_CL + Θ̂X'(y − Xβ̂_CL)/n`.
///
/// The result is dense: every coordinate is reported in the support.
pub fn debias_dcl(data: &Dataset, beta_cl: &Estimate, prec: &PrecisionEstimate) -> Result<Estimate> {
    let b = debias_with(data, &beta_cl.beta_hat, &prec.theta_hat)?;
    let mut est = Estimate::from_beta(data, b, beta_cl.lambda);
    est.support = (0..data.p()).collect();
    est.iterations = beta_cl.iterations;
    est.converged = beta_cl.converged;
    Ok(est)
}

/// One-step correction with an arbitrary `p × p` matrix in place of `Θ̂`.
pub fn debias_with(data: &Dataset, beta: &DVector<f64>, theta: &DMatrix<f64>) -> Result<DVector<f64>> {
    let p = data.p();
    ensure_dims(beta.len() == p, || format!("beta has length {} but p = {p}", beta.len()))?;
    ensure_dims(theta.nrows() == p && theta.ncols() == p, || {
        format!("precision is {}x{} but p = {p}", theta.nrows(), theta.ncols())
    })?;
    let score = data.x().tr_mul(&(data.y() - data.x() * beta)) / data.n() as f64;
    Ok(beta + theta * score)
}
