//! Regression estimators: lasso by coordinate descent, the two-stage
//! conservative lasso, nodewise precision estimation, the debiased
//! conservative lasso, and OLS.

mod debias;
mod lasso;
mod nodewise;
mod ols;

pub use debias::{debias_dcl, debias_with};
pub use lasso::{
    conservative_lasso, conservative_lasso_with, conservative_weights, kkt_max_violation,
    lasso_cd, lasso_objective, soft_threshold, GramLasso, LassoOptions,
};
pub use nodewise::{default_node_lambda, nodewise_precision, PrecisionEstimate, TAU2_FLOOR};
pub use ols::ols;

pub(crate) use lasso::estimate_from_outcome;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{ensure_dims, Error, Result};
use crate::serde_util;

/// Observations in rows: `y = X β₀ + u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    beta_true: Option<DVector<f64>>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        ensure_dims(x.nrows() >= 2, || format!("need at least 2 observations, got {}", x.nrows()))?;
        ensure_dims(x.ncols() >= 1, || "design has no columns".into())?;
        ensure_dims(y.len() == x.nrows(), || {
            format!("y has length {} but X has {} rows", y.len(), x.nrows())
        })?;
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite entry in X or y".into()));
        }
        Ok(Dataset { x, y, beta_true: None })
    }

    pub fn with_beta_true(mut self, beta: DVector<f64>) -> Result<Self> {
        ensure_dims(beta.len() == self.p(), || {
            format!("beta_true has length {} but p = {}", beta.len(), self.p())
        })?;
        self.beta_true = Some(beta);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn beta_true(&self) -> Option<&DVector<f64>> {
        self.beta_true.as_ref()
    }

    /// Mean squared residual `‖y − Xβ‖²/n`.
    pub fn mean_squared_residual(&self, beta: &DVector<f64>) -> f64 {
        (&self.y - &self.x * beta).norm_squared() / self.n() as f64
    }

    /// Sample second-moment matrix `X'X/n`.
    pub fn gram(&self) -> DMatrix<f64> {
        let xt = self.x.transpose();
        (&xt * &self.x) / self.n() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    #[serde(serialize_with = "serde_util::vector")]
    pub beta_hat: DVector<f64>,
    /// Indices with `beta_hat[j] != 0.0` (exact test).
    pub support: Vec<usize>,
    pub lambda: f64,
    pub sigma2_hat: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Penalized objective after each sweep, when requested.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub objective_path: Vec<f64>,
}

impl Estimate {
    pub(crate) fn from_beta(data: &Dataset, beta_hat: DVector<f64>, lambda: f64) -> Self {
        let sigma2_hat = data.mean_squared_residual(&beta_hat);
        Estimate {
            support: support_of(&beta_hat),
            beta_hat,
            lambda,
            sigma2_hat,
            iterations: 0,
            converged: true,
            objective_path: Vec::new(),
        }
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }
}

pub fn support_of(beta: &DVector<f64>) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(j, _)| j)
        .collect()
}
