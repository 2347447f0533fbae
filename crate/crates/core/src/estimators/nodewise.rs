use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::lasso::{GramLasso, LassoOptions};
use crate::error::{ensure_dims, Error, Result};
use crate::serde_util;

/// `τ̂_j²` at or below this value marks a constant or collinear column.
pub const TAU2_FLOOR: f64 = 1e-10;

/// Approximate inverse of `X'X/n` built from nodewise lasso regressions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionEstimate {
    #[serde(serialize_with = "serde_util::matrix")]
    pub theta_hat: DMatrix<f64>,
    #[serde(serialize_with = "serde_util::vector")]
    pub tau2: DVector<f64>,
    #[serde(serialize_with = "serde_util::vector")]
    pub lambda_node: DVector<f64>,
    /// Nonzero off-diagonal count in each row of `theta_hat`.
    pub row_support: Vec<usize>,
}

impl PrecisionEstimate {
    /// Wraps a known precision matrix (e.g. an exact inverse Gram matrix).
    pub fn exact(theta: DMatrix<f64>) -> Result<Self> {
        ensure_dims(theta.is_square() && theta.nrows() > 0, || {
            format!("precision must be square, got {}x{}", theta.nrows(), theta.ncols())
        })?;
        let p = theta.nrows();
        let tau2 = DVector::from_fn(p, |j, _| 1.0 / theta[(j, j)]);
        let row_support = (0..p)
            .map(|j| (0..p).filter(|&k| k != j && theta[(j, k)] != 0.0).count())
            .collect();
        Ok(PrecisionEstimate {
            theta_hat: theta,
            tau2,
            lambda_node: DVector::zeros(p),
            row_support,
        })
    }

    pub fn p(&self) -> usize {
        self.theta_hat.nrows()
    }

    /// Largest row support, the empirical counterpart of `s̄`.
    pub fn max_row_support(&self) -> usize {
        self.row_support.iter().copied().max().unwrap_or(0)
    }
}

/// `√(log p / n)`
pub fn default_node_lambda(n: usize, p: usize) -> f64 {
    ((p as f64).ln() / n as f64).sqrt()
}

/// Nodewise regression: column `j` is lasso-regressed on the others with
/// penalty `λ_j`, giving `γ̂_j` and
/// `τ̂_j² = ‖x_j − X_{−j}γ̂_j‖²/n + λ_j‖γ̂_j‖₁`. Row `j` of `Θ̂` is
/// `(1/τ̂_j²)·(…, −γ̂_{j,k}, …, 1 at j, …)`.
///
/// At the lasso optimum `[Θ̂ X'X/n]_jj = 1`, so `opts.tol` controls how
/// closely that identity holds.
pub fn nodewise_precision(x: &DMatrix<f64>, lambda_node: &[f64], opts: &LassoOptions) -> Result<PrecisionEstimate> {
    let (n, p) = (x.nrows(), x.ncols());
    ensure_dims(p >= 2, || format!("nodewise regression needs p >= 2, got {p}"))?;
    ensure_dims(n >= 2, || format!("nodewise regression needs n >= 2, got {n}"))?;
    ensure_dims(lambda_node.len() == p, || {
        format!("lambda_node has length {} but p = {p}", lambda_node.len())
    })?;
    let gram = x.tr_mul(x) / n as f64;

    let rows: Vec<Result<(DVector<f64>, f64)>> = (0..p)
        .into_par_iter()
        .map(|j| node_regression(x, &gram, j, lambda_node[j], opts))
        .collect();

    let mut theta = DMatrix::zeros(p, p);
    let mut tau2 = DVector::zeros(p);
    let mut row_support = Vec::with_capacity(p);
    for (j, row) in rows.into_iter().enumerate() {
        let (gamma, t2) = row?;
        tau2[j] = t2;
        let mut nnz = 0;
        for k in 0..p {
            theta[(j, k)] = if k == j {
                1.0 / t2
            } else {
                let g = gamma[if k < j { k } else { k - 1 }];
                if g != 0.0 {
                    nnz += 1;
                }
                -g / t2
            };
        }
        row_support.push(nnz);
    }
    Ok(PrecisionEstimate {
        theta_hat: theta,
        tau2,
        lambda_node: DVector::from_column_slice(lambda_node),
        row_support,
    })
}

fn node_regression(
    x: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    j: usize,
    lambda: f64,
    opts: &LassoOptions,
) -> Result<(DVector<f64>, f64)> {
    let n = x.nrows() as f64;
    let sub_gram = gram.clone().remove_row(j).remove_column(j);
    let xty = gram.column(j).into_owned().remove_row(j);
    let solver = GramLasso::from_parts(sub_gram, xty, gram[(j, j)])?;
    let out = solver.solve_scaled(lambda, None, None, opts)?;
    let gamma = out.beta;

    let others = x.clone().remove_column(j);
    let resid = x.column(j) - &others * &gamma;
    let t2 = resid.norm_squared() / n + lambda * gamma.iter().map(|g| g.abs()).sum::<f64>();
    if !(t2 > TAU2_FLOOR) {
        return Err(Error::Degenerate(format!(
            "nodewise residual scale for column {j} is {t2:e} (constant or collinear column)"
        )));
    }
    Ok((gamma, t2))
}
