//! Global-minimum-variance weights and bounds on the out-of-sample variance
//! error `|ŵ'Σŵ − w'Σw|`.
//!
//! Two bounds are provided. The derivative route uses `f(w) = w'Σw`,
//! `f_d(w) = 2w'Σ`:
//!
//! ```text
//! |ŵ'Σŵ − w'Σw| ≤ 2‖Σw‖₁ ‖ŵ − w‖₁ + |h'Σh|,      h = ŵ − w
//! ```
//!
//! and the direct expansion `(ŵ−w)'Σ(ŵ−w) + 2(ŵ−w)'Σw` with Hölder's
//! inequality gives
//!
//! ```text
//! |ŵ'Σŵ − w'Σw| ≤ ‖h‖₁² ‖Σ‖_max + 2‖h‖₁ ‖Σ‖_max ‖w‖₁
//! ```
//!
//! The ratio `‖|Σ|‖₁ / ‖Σ‖_max` ([`div_measure`]) says how much looser the
//! first route's leading constant can be.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bound::{holds_slack, BoundReport};
use crate::error::{ensure_dims, Error, Result};
use crate::estimators::{nodewise_precision, LassoOptions, PrecisionEstimate};
use crate::norms::{mat_norm, le_with_slack, MatrixNorm, VectorNorm};
use crate::serde_util;

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioInstance {
    sigma: DMatrix<f64>,
    w: DVector<f64>,
    returns: Option<DMatrix<f64>>,
}

impl PortfolioInstance {
    pub fn new(sigma: DMatrix<f64>, w: DVector<f64>) -> Result<Self> {
        check_sigma(&sigma)?;
        ensure_dims(w.len() == sigma.nrows(), || {
            format!("weights have length {} but Sigma is {}x{}", w.len(), sigma.nrows(), sigma.ncols())
        })?;
        let total = w.sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        Ok(PortfolioInstance { sigma, w, returns: None })
    }

    /// GMV instance for a known covariance: `w ∝ Σ⁻¹1`.
    pub fn gmv(sigma: DMatrix<f64>) -> Result<Self> {
        check_sigma(&sigma)?;
        let theta = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Degenerate("Sigma is not positive definite".into()))?
            .inverse();
        let w = gmv_weights(&theta)?;
        PortfolioInstance::new(sigma, w)
    }

    pub fn with_returns(mut self, returns: DMatrix<f64>) -> Result<Self> {
        ensure_dims(returns.ncols() == self.w.len(), || {
            format!("returns have {} columns but p = {}", returns.ncols(), self.w.len())
        })?;
        self.returns = Some(returns);
        Ok(self)
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn returns(&self) -> Option<&DMatrix<f64>> {
        self.returns.as_ref()
    }
}

fn check_sigma(sigma: &DMatrix<f64>) -> Result<()> {
    ensure_dims(sigma.is_square() && !sigma.is_empty(), || {
        format!("Sigma must be square and nonempty, got {}x{}", sigma.nrows(), sigma.ncols())
    })?;
    let asym = (sigma - sigma.transpose()).amax();
    if asym > 1e-12 * sigma.amax().max(1.0) {
        return Err(Error::InvalidArgument(format!("Sigma is not symmetric (max |S - S'| = {asym:e})")));
    }
    Ok(())
}

/// `ŵ = (Θ1/p) / (1'Θ1/p)`, renormalized to sum to one.
pub fn gmv_weights(theta: &DMatrix<f64>) -> Result<DVector<f64>> {
    ensure_dims(theta.is_square() && !theta.is_empty(), || {
        format!("precision must be square, got {}x{}", theta.nrows(), theta.ncols())
    })?;
    let p = theta.nrows() as f64;
    let row_sums = DVector::from_iterator(theta.nrows(), theta.row_iter().map(|r| r.sum()));
    let total = row_sums.sum();
    if !(total.abs() > 1e-10 * p) {
        return Err(Error::Degenerate(format!("1'Θ1 = {total:e} is too close to zero")));
    }
    let w = (row_sums / p) / (total / p);
    let s = w.sum();
    Ok(w / s)
}

/// `ŵ'Σŵ`
pub fn oos_variance(w_hat: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    ensure_dims(sigma.is_square() && sigma.nrows() == w_hat.len(), || {
        format!("weights have length {} but Sigma is {}x{}", w_hat.len(), sigma.nrows(), sigma.ncols())
    })?;
    Ok(w_hat.dot(&(sigma * w_hat)).max(0.0))
}

fn check_conformable(w_hat: &DVector<f64>, w: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<()> {
    ensure_dims(w_hat.len() == w.len(), || format!("ŵ has length {} but w has {}", w_hat.len(), w.len()))?;
    ensure_dims(sigma.is_square() && sigma.nrows() == w.len(), || {
        format!("Sigma is {}x{} but weights have length {}", sigma.nrows(), sigma.ncols(), w.len())
    })?;
    ensure_dims(!w.is_empty(), || "empty weights".into())
}

fn l1(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Derivative route: `bound = 2‖Σw‖₁‖h‖₁ + |h'Σh|`, reported in ℓ1.
pub fn variance_error_bound_theorem(w_hat: &DVector<f64>, w: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<BoundReport> {
    check_conformable(w_hat, w, sigma)?;
    let h = w_hat - w;
    let sigma_w = sigma * w;
    let fd_norm = 2.0 * l1(&sigma_w);
    let est_err = l1(&h);
    let remainder = h.dot(&(sigma * &h)).abs();
    let actual = (w_hat.dot(&(sigma * w_hat)) - w.dot(&sigma_w)).abs();
    let bound = fd_norm * est_err + remainder;
    Ok(BoundReport {
        norm: VectorNorm::L1,
        fd_norm,
        est_err,
        actual,
        linear_term: 2.0 * h.dot(&sigma_w).abs(),
        remainder,
        bound,
        holds: actual <= bound + holds_slack(bound),
        regime: None,
        rate_value: None,
    })
}

/// Direct route: `bound = ‖h‖₁²‖Σ‖_max + 2‖h‖₁‖Σ‖_max‖w‖₁`.
///
/// In the report, `fd_norm` holds the coefficient `2‖Σ‖_max‖w‖₁` of `‖h‖₁`
/// and `remainder` holds `‖h‖₁²‖Σ‖_max`.
pub fn variance_error_bound_direct(w_hat: &DVector<f64>, w: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<BoundReport> {
    check_conformable(w_hat, w, sigma)?;
    let h = w_hat - w;
    let max_abs = mat_norm(sigma, MatrixNorm::MaxAbs)?;
    let est_err = l1(&h);
    let fd_norm = 2.0 * max_abs * l1(w);
    let remainder = est_err * est_err * max_abs;
    let sigma_w = sigma * w;
    let actual = (w_hat.dot(&(sigma * w_hat)) - w.dot(&sigma_w)).abs();
    let bound = remainder + fd_norm * est_err;
    Ok(BoundReport {
        norm: VectorNorm::L1,
        fd_norm,
        est_err,
        actual,
        linear_term: 2.0 * h.dot(&sigma_w).abs(),
        remainder,
        bound,
        holds: actual <= bound + holds_slack(bound),
        regime: None,
        rate_value: None,
    })
}

/// `‖|Σ|‖₁ / ‖Σ‖_max`; at least 1 for any nonzero matrix.
pub fn div_measure(sigma: &DMatrix<f64>) -> Result<f64> {
    let max_abs = mat_norm(sigma, MatrixNorm::MaxAbs)?;
    if max_abs == 0.0 {
        return Err(Error::Degenerate("div measure of a zero matrix".into()));
    }
    Ok(mat_norm(sigma, MatrixNorm::ColSum)? / max_abs)
}

fn vech_len(q: usize) -> usize {
    q * (q + 1) / 2
}

/// Position of `(i, j)`, `i ≥ j`, in `vech` (columns of the lower triangle).
fn vech_index(q: usize, i: usize, j: usize) -> usize {
    j * q - j * (j + 1) / 2 + i
}

/// Duplication matrix `D_q` (`q² × q(q+1)/2`) with `vec(S) = D_q vech(S)`.
pub fn duplication_matrix(q: usize) -> Result<DMatrix<f64>> {
    if q == 0 {
        return Err(Error::InvalidArgument("duplication matrix needs q >= 1".into()));
    }
    let mut d = DMatrix::zeros(q * q, vech_len(q));
    for j in 0..q {
        for i in 0..q {
            let (a, b) = if i >= j { (i, j) } else { (j, i) };
            // vec is column-major: entry (i, j) sits at j*q + i
            d[(j * q + i, vech_index(q, a, b))] = 1.0;
        }
    }
    Ok(d)
}

/// Half-vectorization: the lower triangle stacked column by column.
pub fn vech(s: &DMatrix<f64>) -> Result<DVector<f64>> {
    ensure_dims(s.is_square() && !s.is_empty(), || format!("vech needs a square matrix, got {}x{}", s.nrows(), s.ncols()))?;
    let q = s.nrows();
    let mut v = DVector::zeros(vech_len(q));
    for j in 0..q {
        for i in j..q {
            v[vech_index(q, i, j)] = s[(i, j)];
        }
    }
    Ok(v)
}

/// Inverse of [`vech`] for symmetric matrices.
pub fn unvech(v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let q = ((((8 * v.len() + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    ensure_dims(q >= 1 && vech_len(q) == v.len(), || format!("length {} is not q(q+1)/2", v.len()))?;
    let mut s = DMatrix::zeros(q, q);
    for j in 0..q {
        for i in j..q {
            s[(i, j)] = v[vech_index(q, i, j)];
            s[(j, i)] = v[vech_index(q, i, j)];
        }
    }
    Ok(s)
}

/// `‖|(w'⊗w')D_q|‖₂` and the two upper bounds `√2‖w‖₂²` and `√2‖w‖₁²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VechNormReport {
    pub direct: f64,
    pub sqrt2_l2_squared: f64,
    pub sqrt2_l1_squared: f64,
    pub holds: bool,
}

pub fn vech_fd_norm(w: &DVector<f64>) -> Result<VechNormReport> {
    ensure_dims(!w.is_empty(), || "empty weights".into())?;
    let q = w.len();
    let kron = w.kronecker(w).transpose();
    let row = kron * duplication_matrix(q)?;
    let direct = row.norm();
    let sqrt2_l2_squared = std::f64::consts::SQRT_2 * w.norm_squared();
    let sqrt2_l1_squared = std::f64::consts::SQRT_2 * l1(w).powi(2);
    Ok(VechNormReport {
        direct,
        sqrt2_l2_squared,
        sqrt2_l1_squared,
        holds: le_with_slack(direct, sqrt2_l2_squared) && le_with_slack(sqrt2_l2_squared, sqrt2_l1_squared),
    })
}

/// Column covariance (or second moment when `demean` is false) of `returns`.
pub fn sample_covariance(returns: &DMatrix<f64>, demean: bool) -> DMatrix<f64> {
    let centered = centered(returns, demean);
    centered.tr_mul(&centered) / returns.nrows() as f64
}

fn centered(returns: &DMatrix<f64>, demean: bool) -> DMatrix<f64> {
    let mut r = returns.clone();
    if demean {
        for mut c in r.column_iter_mut() {
            let m = c.mean();
            c.add_scalar_mut(-m);
        }
    }
    r
}

/// GMV weights estimated from returns through a nodewise precision matrix.
#[derive(Debug, Clone, Serialize)]
pub struct GmvFit {
    #[serde(serialize_with = "serde_util::vector")]
    pub weights: DVector<f64>,
    /// `‖ŵ‖₁`
    pub gross_exposure: f64,
    /// Largest nodewise support, the empirical stand-in for `s̄`.
    pub max_row_support: usize,
    #[serde(skip)]
    pub precision: PrecisionEstimate,
}

pub fn estimate_gmv(returns: &DMatrix<f64>, lambda_node: &[f64], demean: bool, opts: &LassoOptions) -> Result<GmvFit> {
    ensure_dims(returns.nrows() >= 2, || "need at least 2 return observations".into())?;
    let x = centered(returns, demean);
    let precision = nodewise_precision(&x, lambda_node, opts)?;
    let weights = gmv_weights(&precision.theta_hat)?;
    Ok(GmvFit {
        gross_exposure: l1(&weights),
        max_row_support: precision.max_row_support(),
        weights,
        precision,
    })
}
