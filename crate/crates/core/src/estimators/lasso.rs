use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Dataset, Estimate};
use crate::error::{ensure_dims, Error, Result};

/// Solver controls for cyclic coordinate descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    /// Stop once a full sweep moves no coordinate by more than this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Rescale columns to `x_j'x_j/n = 1` before solving; coefficients are
    /// mapped back to the original scale.
    pub standardize: bool,
    /// Keep the penalized objective after every sweep in
    /// [`Estimate::objective_path`].
    pub record_objective: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tol: 1e-8,
            max_sweeps: 10_000,
            standardize: false,
            record_objective: false,
        }
    }
}

/// `sign(z) · max(|z| − t, 0)`
#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// `(1/n)‖y − Xβ‖² + 2λ Σ_j w_j |β_j|`
pub fn lasso_objective(data: &Dataset, beta: &DVector<f64>, lambda: f64, weights: Option<&[f64]>) -> f64 {
    let pen: f64 = beta
        .iter()
        .enumerate()
        .map(|(j, b)| weights.map_or(1.0, |w| w[j]) * b.abs())
        .sum();
    data.mean_squared_residual(beta) + 2.0 * lambda * pen
}

/// Largest violation of the lasso KKT conditions at `beta`:
/// `|x_j'r/n| ≤ λw_j` where `β_j = 0`, and `x_j'r/n = λw_j·sign(β_j)` elsewhere.
pub fn kkt_max_violation(data: &Dataset, beta: &DVector<f64>, lambda: f64, weights: Option<&[f64]>) -> f64 {
    let n = data.n() as f64;
    let grad = data.x().tr_mul(&(data.y() - data.x() * beta)) / n;
    grad.iter()
        .zip(beta.iter())
        .enumerate()
        .map(|(j, (g, b))| {
            let t = lambda * weights.map_or(1.0, |w| w[j]);
            if *b == 0.0 {
                (g.abs() - t).max(0.0)
            } else {
                (g - t * b.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Lasso in covariance form: only `X'X/n`, `X'y/n` and `y'y/n` are kept, so a
/// whole λ path (or every nodewise regression) reuses one Gram matrix.
#[derive(Debug, Clone)]
pub struct GramLasso {
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct CdOutcome {
    pub beta: DVector<f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub objective_path: Vec<f64>,
}

impl GramLasso {
    pub fn new(data: &Dataset) -> Self {
        let n = data.n() as f64;
        GramLasso {
            gram: data.gram(),
            xty: data.x().tr_mul(data.y()) / n,
            yty: data.y().norm_squared() / n,
        }
    }

    pub fn from_parts(gram: DMatrix<f64>, xty: DVector<f64>, yty: f64) -> Result<Self> {
        ensure_dims(gram.is_square() && gram.nrows() == xty.len(), || {
            format!("gram is {}x{} but X'y has length {}", gram.nrows(), gram.ncols(), xty.len())
        })?;
        Ok(GramLasso { gram, xty, yty })
    }

    pub fn p(&self) -> usize {
        self.xty.len()
    }

    /// `max_j |x_j'y/n| / w_j`: the smallest λ whose solution is all zeros.
    pub fn lambda_max(&self, weights: Option<&[f64]>) -> f64 {
        self.xty
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let w = weights.map_or(1.0, |w| w[j]);
                if w > 0.0 {
                    c.abs() / w
                } else if *c != 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    fn objective(&self, beta: &DVector<f64>, grad: &DVector<f64>, lambda: f64, weights: Option<&[f64]>) -> f64 {
        // β'Gβ = β'(c − g) with g = c − Gβ
        let bc = beta.dot(&self.xty);
        let bg = beta.dot(grad);
        let pen: f64 = beta
            .iter()
            .enumerate()
            .map(|(j, b)| weights.map_or(1.0, |w| w[j]) * b.abs())
            .sum();
        self.yty - bc - bg + 2.0 * lambda * pen
    }

    pub(crate) fn solve(
        &self,
        lambda: f64,
        weights: Option<&[f64]>,
        warm_start: Option<&DVector<f64>>,
        opts: &LassoOptions,
    ) -> Result<CdOutcome> {
        validate_penalty(lambda, weights, self.p())?;
        let p = self.p();
        let mut beta = match warm_start {
            Some(b) => {
                ensure_dims(b.len() == p, || format!("warm start has length {} but p = {p}", b.len()))?;
                b.clone()
            }
            None => DVector::zeros(p),
        };
        // grad_j = x_j'(y − Xβ)/n
        let mut grad = &self.xty - &self.gram * &beta;
        let mut objective_path = Vec::new();
        let mut last_obj = self.objective(&beta, &grad, lambda, weights);
        let mut sweeps = 0;
        let mut converged = false;

        while sweeps < opts.max_sweeps {
            sweeps += 1;
            let mut max_delta = 0.0f64;
            for j in 0..p {
                let gjj = self.gram[(j, j)];
                if gjj <= 0.0 {
                    // all-zero column
                    beta[j] = 0.0;
                    continue;
                }
                let rho = grad[j] + gjj * beta[j];
                let thresh = lambda * weights.map_or(1.0, |w| w[j]);
                let updated = soft_threshold(rho, thresh) / gjj;
                let delta = updated - beta[j];
                if delta != 0.0 {
                    beta[j] = updated;
                    grad.axpy(-delta, &self.gram.column(j), 1.0);
                    max_delta = max_delta.max(delta.abs());
                }
            }
            let obj = self.objective(&beta, &grad, lambda, weights);
            debug_assert!(
                obj <= last_obj + 1e-10 * (1.0 + last_obj.abs()),
                "coordinate descent objective increased: {last_obj} -> {obj}"
            );
            last_obj = obj;
            if opts.record_objective {
                objective_path.push(obj);
            }
            if max_delta < opts.tol {
                converged = true;
                break;
            }
        }

        Ok(CdOutcome {
            beta,
            sweeps,
            converged,
            objective_path,
        })
    }

    fn standardized(&self) -> (GramLasso, DVector<f64>) {
        let scale = DVector::from_iterator(
            self.p(),
            (0..self.p()).map(|j| {
                let d = self.gram[(j, j)];
                if d > 0.0 {
                    d.sqrt()
                } else {
                    1.0
                }
            }),
        );
        let gram = DMatrix::from_fn(self.p(), self.p(), |i, k| self.gram[(i, k)] / (scale[i] * scale[k]));
        let xty = self.xty.component_div(&scale);
        (
            GramLasso {
                gram,
                xty,
                yty: self.yty,
            },
            scale,
        )
    }

    /// Solve with optional standardization, mapping coefficients back.
    pub(crate) fn solve_scaled(
        &self,
        lambda: f64,
        weights: Option<&[f64]>,
        warm_start: Option<&DVector<f64>>,
        opts: &LassoOptions,
    ) -> Result<CdOutcome> {
        if !opts.standardize {
            return self.solve(lambda, weights, warm_start, opts);
        }
        let (scaled, scale) = self.standardized();
        let warm = warm_start.map(|b| b.component_mul(&scale));
        let mut out = scaled.solve(lambda, weights, warm.as_ref(), opts)?;
        out.beta = out.beta.component_div(&scale);
        Ok(out)
    }
}

fn validate_penalty(lambda: f64, weights: Option<&[f64]>, p: usize) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if let Some(w) = weights {
        ensure_dims(w.len() == p, || format!("weights have length {} but p = {p}", w.len()))?;
        if let Some(bad) = w.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!("penalty weights must be finite and >= 0, got {bad}")));
        }
    }
    Ok(())
}

pub(crate) fn estimate_from_outcome(data: &Dataset, out: CdOutcome, lambda: f64) -> Estimate {
    let mut est = Estimate::from_beta(data, out.beta, lambda);
    est.iterations = out.sweeps;
    est.converged = out.converged;
    est.objective_path = out.objective_path;
    est
}

/// Minimizes `(1/n)‖y − Xβ‖² + 2λ Σ_j w_j|β_j|` by cyclic coordinate descent.
///
/// Non-convergence is reported through `Estimate::converged`, not as an error.
pub fn lasso_cd(data: &Dataset, lambda: f64, weights: Option<&[f64]>, opts: &LassoOptions) -> Result<Estimate> {
    let out = GramLasso::new(data).solve_scaled(lambda, weights, None, opts)?;
    Ok(estimate_from_outcome(data, out, lambda))
}

/// `ŵ_j = λ / max(|β̂_j|, λ)`, always in `(0, 1]` for `λ > 0`.
pub fn conservative_weights(stage1: &DVector<f64>, lambda: f64) -> Vec<f64> {
    stage1.iter().map(|b| lambda / b.abs().max(lambda)).collect()
}

/// Two-stage conservative lasso with the same λ in both stages.
pub fn conservative_lasso(data: &Dataset, lambda: f64, opts: &LassoOptions) -> Result<Estimate> {
    conservative_lasso_with(data, lambda, lambda, opts)
}

/// Stage 1 is a plain lasso at `lambda_stage1`, which also sets the weights
/// `ŵ_j = λ₁/max(|β̂_j|, λ₁)`; stage 2 reruns the lasso at `lambda_stage2`
/// with those weights, warm-started from stage 1.
pub fn conservative_lasso_with(
    data: &Dataset,
    lambda_stage1: f64,
    lambda_stage2: f64,
    opts: &LassoOptions,
) -> Result<Estimate> {
    for l in [lambda_stage1, lambda_stage2] {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidArgument(format!("conservative lasso needs lambda > 0, got {l}")));
        }
    }
    let solver = GramLasso::new(data);
    let stage1 = solver.solve_scaled(lambda_stage1, None, None, opts)?;
    let weights = conservative_weights(&stage1.beta, lambda_stage1);
    let stage2 = solver.solve_scaled(lambda_stage2, Some(&weights), Some(&stage1.beta), opts)?;
    Ok(estimate_from_outcome(data, stage2, lambda_stage2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::ols;
    use crate::testing::{gaussian_matrix, orthonormal_design, rng};
    use approx::assert_relative_eq;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(1.0, 0.3), 0.7);
        assert_eq!(soft_threshold(-1.0, 0.3), -0.7);
        assert_eq!(soft_threshold(0.2, 0.3), 0.0);
        assert_eq!(soft_threshold(0.3, 0.3), 0.0);
    }

    #[test]
    fn zero_penalty_matches_ols() {
        let mut r = rng(11);
        let x = gaussian_matrix(&mut r, 80, 6);
        let beta = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0, 3.0, -1.0]);
        let noise = gaussian_matrix(&mut r, 80, 1).column(0).into_owned();
        let y = &x * &beta + noise;
        let data = Dataset::new(x, y).unwrap();
        let lasso = lasso_cd(&data, 0.0, None, &LassoOptions::default()).unwrap();
        let ols = ols(&data).unwrap();
        assert!(lasso.converged);
        assert!((&lasso.beta_hat - &ols.beta_hat).amax() < 1e-8);
    }

    #[test]
    fn orthonormal_design_is_soft_thresholding() {
        let mut r = rng(3);
        let x = orthonormal_design(&mut r, 50, 5);
        let mut y = DVector::zeros(50);
        // choose y so that rho_0 = x_0'y/n = 1.0 exactly
        y.axpy(1.0, &x.column(0), 0.0);
        let data = Dataset::new(x, y).unwrap();
        let est = lasso_cd(&data, 0.3, None, &LassoOptions::default()).unwrap();
        assert_relative_eq!(est.beta_hat[0], 0.7, epsilon = 1e-12);
        for j in 1..5 {
            assert_eq!(est.beta_hat[j], 0.0);
        }
        assert_eq!(est.support, vec![0]);
    }

    #[test]
    fn lambda_above_max_gives_zero() {
        let mut r = rng(5);
        let mut x = gaussian_matrix(&mut r, 60, 8);
        for mut c in x.column_iter_mut() {
            let m = c.mean();
            c.add_scalar_mut(-m);
        }
        let y = DVector::from_fn(60, |_, _| r.uniform() - 0.5);
        let data = Dataset::new(x, y).unwrap();
        let lmax = GramLasso::new(&data).lambda_max(None);
        let est = lasso_cd(&data, lmax * (1.0 + 1e-12), None, &LassoOptions::default()).unwrap();
        assert!(est.support.is_empty());
        assert_eq!(est.iterations, 1);
        let below = lasso_cd(&data, lmax * 0.9, None, &LassoOptions::default()).unwrap();
        assert!(!below.support.is_empty());
    }

    #[test]
    fn zero_column_stays_zero() {
        let mut r = rng(8);
        let mut x = gaussian_matrix(&mut r, 40, 4);
        x.column_mut(2).fill(0.0);
        let y = x.column(0) * 2.0;
        let data = Dataset::new(x, y).unwrap();
        let est = lasso_cd(&data, 0.01, None, &LassoOptions::default()).unwrap();
        assert_eq!(est.beta_hat[2], 0.0);
        assert!(est.converged);
    }

    #[test]
    fn sweep_cap_reports_non_convergence() {
        let mut r = rng(9);
        let x = gaussian_matrix(&mut r, 30, 20);
        let y = x.column(0) + x.column(1);
        let data = Dataset::new(x, y).unwrap();
        let opts = LassoOptions {
            max_sweeps: 1,
            tol: 1e-15,
            ..Default::default()
        };
        let est = lasso_cd(&data, 1e-4, None, &opts).unwrap();
        assert!(!est.converged);
        assert_eq!(est.iterations, 1);
    }

    #[test]
    fn invalid_penalties_rejected() {
        let mut r = rng(1);
        let x = gaussian_matrix(&mut r, 10, 3);
        let data = Dataset::new(x, DVector::zeros(10)).unwrap();
        let opts = LassoOptions::default();
        assert!(matches!(lasso_cd(&data, -1.0, None, &opts), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            lasso_cd(&data, 0.1, Some(&[1.0, -0.5, 1.0]), &opts),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(lasso_cd(&data, 0.1, Some(&[1.0]), &opts), Err(Error::Dimension(_))));
        assert!(matches!(conservative_lasso(&data, 0.0, &opts), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn objective_never_increases_and_kkt_holds() {
        let mut r = rng(21);
        let x = gaussian_matrix(&mut r, 100, 150);
        let beta: DVector<f64> = DVector::from_fn(150, |j, _| if j < 5 { 1.0 } else { 0.0 });
        let y = &x * &beta + gaussian_matrix(&mut r, 100, 1).column(0);
        let data = Dataset::new(x, y).unwrap();
        let weights: Vec<f64> = (0..150).map(|j| if j % 3 == 0 { 0.5 } else { 1.0 }).collect();
        let opts = LassoOptions {
            record_objective: true,
            ..Default::default()
        };
        for (lambda, w) in [(0.05, None), (0.2, Some(weights.as_slice()))] {
            let est = lasso_cd(&data, lambda, w, &opts).unwrap();
            assert!(est.converged);
            for pair in est.objective_path.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12 * pair[0].abs());
            }
            let direct = lasso_objective(&data, &est.beta_hat, lambda, w);
            assert_relative_eq!(direct, *est.objective_path.last().unwrap(), max_relative = 1e-9);
            assert!(kkt_max_violation(&data, &est.beta_hat, lambda, w) < 1e-6);
        }
    }

    #[test]
    fn standardization_matches_rescaled_problem() {
        let mut r = rng(4);
        let mut x = gaussian_matrix(&mut r, 120, 6);
        let y = x.column(0) * 1.5 - x.column(3) + gaussian_matrix(&mut r, 120, 1).column(0);
        for (j, s) in [1.0, 3.0, 0.5, 2.0, 10.0, 0.1].iter().enumerate() {
            x.column_mut(j).scale_mut(*s);
        }
        let data = Dataset::new(x.clone(), y.clone()).unwrap();
        let opts = LassoOptions {
            standardize: true,
            tol: 1e-12,
            ..Default::default()
        };
        let est = lasso_cd(&data, 0.1, None, &opts).unwrap();

        let norms: Vec<f64> = x.column_iter().map(|c| (c.norm_squared() / 120.0).sqrt()).collect();
        let mut xs = x.clone();
        for (j, s) in norms.iter().enumerate() {
            xs.column_mut(j).unscale_mut(*s);
        }
        let plain = lasso_cd(
            &Dataset::new(xs, y).unwrap(),
            0.1,
            None,
            &LassoOptions {
                tol: 1e-12,
                ..Default::default()
            },
        )
        .unwrap();
        for j in 0..6 {
            assert_relative_eq!(est.beta_hat[j] * norms[j], plain.beta_hat[j], epsilon = 1e-9);
        }
    }

    #[test]
    fn conservative_weight_formula() {
        let lambda = 0.2;
        let w = conservative_weights(&DVector::from_vec(vec![0.0, 5.0 * lambda, -0.1, 0.2]), lambda);
        assert_eq!(w[0], 1.0);
        assert_relative_eq!(w[1], 0.2, epsilon = 1e-15);
        assert_eq!(w[2], 1.0);
        assert_eq!(w[3], 1.0);
        assert!(w.iter().all(|v| *v > 0.0 && *v <= 1.0));
    }

    #[test]
    fn conservative_lasso_satisfies_weighted_kkt() {
        let mut r = rng(31);
        let x = gaussian_matrix(&mut r, 150, 40);
        let beta: DVector<f64> = DVector::from_fn(40, |j, _| if j < 4 { 1.0 } else { 0.0 });
        let y = &x * &beta + gaussian_matrix(&mut r, 150, 1).column(0) * 2.0;
        let data = Dataset::new(x, y).unwrap();
        let lambda = 0.15;
        let opts = LassoOptions::default();
        let stage1 = lasso_cd(&data, lambda, None, &opts).unwrap();
        let weights = conservative_weights(&stage1.beta_hat, lambda);
        let est = conservative_lasso(&data, lambda, &opts).unwrap();
        assert!(kkt_max_violation(&data, &est.beta_hat, lambda, Some(&weights)) < 1e-6);
        // less shrinkage on the strong coordinates than plain lasso
        for j in 0..4 {
            assert!(est.beta_hat[j].abs() >= stage1.beta_hat[j].abs() - 1e-9);
        }
    }
}
