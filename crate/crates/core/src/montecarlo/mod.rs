//! Simulation study for the lasso: Gaussian design, information-criterion
//! choice of λ, and the ratio `s₀‖β̂ − β₀‖₂ / ‖D(β̂ − β₀)‖₂` with
//! `D = (I_{s₀}, 0)` averaged over replications.

mod rng;
mod table;

pub use rng::{derive_seed, SimRng};
pub use table::{run_table1, run_table1_with_threads, CellSpec, SimCell, SimConfig, SimResult, SimTable};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::estimators::{estimate_from_outcome, Dataset, Estimate, GramLasso, LassoOptions};

/// `c` in `λ = c·√(log p / n)`.
pub const DEFAULT_LAMBDA_COEFS: [f64; 13] = [0.1, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];

/// Floor applied to `σ̂²` before taking its log.
pub const SIGMA2_FLOOR: f64 = 1e-12;

/// `x_i ~ N(0, I_p)`, `u_i ~ N(0, s₀)`, `β₀ = (1_{s₀}, 0_{p−s₀})'`,
/// `y = Xβ₀ + u`. Rows of `X` are drawn first, then `u`.
pub fn dgp_sample(n: usize, p: usize, s0: usize, seed: u64) -> Result<Dataset> {
    if s0 == 0 || s0 > p {
        return Err(Error::InvalidArgument(format!("need 0 < s0 <= p, got s0 = {s0}, p = {p}")));
    }
    let mut rng = SimRng::new(seed);
    let x = rng.normal_matrix(n, p);
    let u = rng.normal_vector(n, (s0 as f64).sqrt());
    let beta0 = DVector::from_fn(p, |j, _| if j < s0 { 1.0 } else { 0.0 });
    let y = &x * &beta0 + u;
    Dataset::new(x, y)?.with_beta_true(beta0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcPoint {
    pub c: f64,
    pub lambda: f64,
    pub sigma2_hat: f64,
    /// `σ̂²` hit [`SIGMA2_FLOOR`].
    pub sigma2_floored: bool,
    pub support_size: usize,
    pub ic: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcSelection {
    pub lambda_star: f64,
    pub c_star: f64,
    /// Diagnostics in the order of the supplied coefficients.
    pub path: Vec<IcPoint>,
    pub estimate: Estimate,
}

/// Fits the lasso at `λ = c·√(log p / n)` for each `c` (descending λ, warm
/// starts) and returns the minimizer of
/// `log σ̂²(λ) + ŝ(λ)/n · log n · log log p`. Ties go to the smaller λ.
pub fn select_lambda_ic(data: &Dataset, lambda_coefs: &[f64], opts: &LassoOptions) -> Result<IcSelection> {
    let (n, p) = (data.n(), data.p());
    if p < 3 {
        return Err(Error::InvalidArgument(format!("log log p needs p >= 3, got {p}")));
    }
    ensure_dims(!lambda_coefs.is_empty(), || "empty lambda grid".into())?;
    if let Some(c) = lambda_coefs.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return Err(Error::InvalidArgument(format!("lambda coefficients must be > 0, got {c}")));
    }
    let nf = n as f64;
    let base = ((p as f64).ln() / nf).sqrt();
    let penalty = nf.ln() * (p as f64).ln().ln() / nf;

    let mut order: Vec<usize> = (0..lambda_coefs.len()).collect();
    order.sort_by(|&a, &b| lambda_coefs[b].total_cmp(&lambda_coefs[a]));

    let solver = GramLasso::new(data);
    let mut warm: Option<DVector<f64>> = None;
    let mut fits: Vec<Option<(IcPoint, Estimate)>> = vec![None; lambda_coefs.len()];
    for &k in &order {
        let lambda = lambda_coefs[k] * base;
        let out = solver.solve_scaled(lambda, None, warm.as_ref(), opts)?;
        warm = Some(out.beta.clone());
        let est = estimate_from_outcome(data, out, lambda);
        let floored = est.sigma2_hat < SIGMA2_FLOOR;
        let ic = est.sigma2_hat.max(SIGMA2_FLOOR).ln() + est.support_size() as f64 * penalty;
        let point = IcPoint {
            c: lambda_coefs[k],
            lambda,
            sigma2_hat: est.sigma2_hat,
            sigma2_floored: floored,
            support_size: est.support_size(),
            ic,
            converged: est.converged,
        };
        fits[k] = Some((point, est));
    }

    let mut best: Option<usize> = None;
    for k in 0..fits.len() {
        let (pk, _) = fits[k].as_ref().expect("every grid point fitted");
        best = match best {
            None => Some(k),
            Some(b) => {
                let (pb, _) = fits[b].as_ref().expect("every grid point fitted");
                if pk.ic < pb.ic || (pk.ic == pb.ic && pk.lambda < pb.lambda) {
                    Some(k)
                } else {
                    Some(b)
                }
            }
        };
    }
    let best = best.expect("nonempty grid");
    let mut path = Vec::with_capacity(fits.len());
    let mut chosen = None;
    for (k, fit) in fits.into_iter().enumerate() {
        let (point, est) = fit.expect("every grid point fitted");
        path.push(point);
        if k == best {
            chosen = Some(est);
        }
    }
    let estimate = chosen.expect("best index in range");
    Ok(IcSelection {
        lambda_star: path[best].lambda,
        c_star: path[best].c,
        path,
        estimate,
    })
}

/// Multiplier on `‖β̂ − β₀‖₂ / ‖D(β̂ − β₀)‖₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioScale {
    /// `s₀`, the default factor.
    #[default]
    Printed,
    /// `√s₀ = ‖|(I_{s₀}, 0)|‖₂`, the Frobenius norm of `D`.
    Frobenius,
}

impl RatioScale {
    pub fn factor(self, s0: usize) -> f64 {
        match self {
            RatioScale::Printed => s0 as f64,
            RatioScale::Frobenius => (s0 as f64).sqrt(),
        }
    }
}

/// `scale·‖β̂ − β₀‖₂ / ‖D(β̂ − β₀)‖₂` with `D = (I_{s₀}, 0)`.
///
/// `Ok(None)` when the denominator is zero: the replication is excluded.
pub fn ratio_statistic(beta_hat: &DVector<f64>, beta0: &DVector<f64>, s0: usize, scale: RatioScale) -> Result<Option<f64>> {
    ensure_dims(beta_hat.len() == beta0.len(), || {
        format!("beta_hat has length {} but beta0 has {}", beta_hat.len(), beta0.len())
    })?;
    if s0 == 0 || s0 > beta0.len() {
        return Err(Error::InvalidArgument(format!("need 0 < s0 <= p, got s0 = {s0}")));
    }
    let mut head = 0.0;
    let mut tail = 0.0;
    for (j, (a, b)) in beta_hat.iter().zip(beta0.iter()).enumerate() {
        let d = (a - b) * (a - b);
        if j < s0 {
            head += d;
        } else {
            tail += d;
        }
    }
    if head == 0.0 {
        return Ok(None);
    }
    // sqrt and division are correctly rounded, so (head + tail)/head ≥ 1 survives
    Ok(Some(scale.factor(s0) * ((head + tail).sqrt() / head.sqrt())))
}
