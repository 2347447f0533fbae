//! Series (sieve) regression on a power basis and the pointwise bound
//! `|h(x₀)'(β̂ − β*)| ≤ ζ(p)·‖β̂ − β*‖₂`, where `ζ(p) = sup_x ‖h(x)‖₂`.
//!
//! Power series have `ζ(p) = O(p)`; splines would give `O(√p)` but only the
//! power basis is implemented.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{ols, Dataset, Estimate};
use crate::montecarlo::SimRng;
use crate::norms::le_with_slack;
use crate::serde_util;

pub const DEFAULT_GRID: usize = 1001;
pub const DEFAULT_ORACLE_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Power,
}

/// `p` basis functions on `[a, b]`, evaluated after mapping `[a, b]` onto `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub p: usize,
    pub a: f64,
    pub b: f64,
}

impl BasisSpec {
    pub fn power(p: usize, a: f64, b: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("basis needs p >= 1".into()));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid domain [{a}, {b}]")));
        }
        Ok(BasisSpec { kind: BasisKind::Power, p, a, b })
    }

    fn mapped(&self, x: f64) -> f64 {
        (2.0 * x - self.a - self.b) / (self.b - self.a)
    }

    /// `grid_size` equally spaced points covering `[a, b]`.
    pub fn grid(&self, grid_size: usize) -> Vec<f64> {
        let step = (self.b - self.a) / (grid_size - 1) as f64;
        (0..grid_size)
            .map(|i| if i + 1 == grid_size { self.b } else { self.a + step * i as f64 })
            .collect()
    }

    /// Rows are `h(x_i)'`.
    pub fn design(&self, xs: &[f64]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(xs.len(), self.p);
        for (i, &x) in xs.iter().enumerate() {
            m.row_mut(i).copy_from(&basis_eval(self, x)?.transpose());
        }
        Ok(m)
    }
}

/// `(1, t, t², …, t^{p−1})` with `t` the image of `x` in `[−1, 1]`.
pub fn basis_eval(spec: &BasisSpec, x: f64) -> Result<DVector<f64>> {
    if !(x >= spec.a && x <= spec.b) {
        return Err(Error::Domain(format!("x = {x} outside [{}, {}]", spec.a, spec.b)));
    }
    let t = spec.mapped(x);
    let mut h = DVector::zeros(spec.p);
    let mut power = 1.0;
    for k in 0..spec.p {
        h[k] = power;
        power *= t;
    }
    Ok(h)
}

/// `max ‖h(x)‖₂` over a uniform grid.
pub fn zeta(spec: &BasisSpec, grid_size: usize) -> Result<f64> {
    if grid_size < 2 {
        return Err(Error::InvalidArgument(format!("grid needs >= 2 points, got {grid_size}")));
    }
    spec.grid(grid_size)
        .into_iter()
        .map(|x| basis_eval(spec, x).map(|h| h.norm()))
        .try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesFit {
    pub spec: BasisSpec,
    pub estimate: Estimate,
}

impl SeriesFit {
    pub fn predict(&self, x: f64) -> Result<f64> {
        Ok(basis_eval(&self.spec, x)?.dot(&self.estimate.beta_hat))
    }
}

/// OLS of `y` on the basis expansion of `x`.
pub fn fit_series(x: &[f64], y: &[f64], spec: &BasisSpec) -> Result<SeriesFit> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("x has {} points but y has {}", x.len(), y.len())));
    }
    if x.len() <= spec.p {
        return Err(Error::Rank(format!("series fit needs n > p, got n = {} and p = {}", x.len(), spec.p)));
    }
    let data = Dataset::new(spec.design(x)?, DVector::from_column_slice(y))?;
    Ok(SeriesFit {
        spec: *spec,
        estimate: ols(&data)?,
    })
}

/// L2 proxy for the pseudo-true coefficients: OLS on `samples` noiseless
/// evaluations of `g` on a uniform grid.
pub fn pseudo_true(spec: &BasisSpec, g: impl Fn(f64) -> f64, samples: usize) -> Result<DVector<f64>> {
    let xs = spec.grid(samples.max(2));
    let ys: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    Ok(fit_series(&xs, &ys, spec)?.estimate.beta_hat)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointwiseBound {
    pub x0: f64,
    /// `|h(x₀)'(β̂ − β*)|`
    pub error: f64,
    pub zeta: f64,
    /// `ζ(p)·‖β̂ − β*‖₂`
    pub bound: f64,
    pub holds: bool,
}

/// Pointwise bound at `x0` with `ζ(p)` taken over the default grid.
pub fn predict_error_bound(fit: &SeriesFit, beta_pseudo: &DVector<f64>, x0: f64) -> Result<PointwiseBound> {
    let z = zeta(&fit.spec, DEFAULT_GRID)?;
    pointwise_with_zeta(fit, beta_pseudo, x0, z)
}

fn pointwise_with_zeta(fit: &SeriesFit, beta_pseudo: &DVector<f64>, x0: f64, z: f64) -> Result<PointwiseBound> {
    if beta_pseudo.len() != fit.spec.p {
        return Err(Error::Dimension(format!("pseudo-true has length {} but p = {}", beta_pseudo.len(), fit.spec.p)));
    }
    let diff = &fit.estimate.beta_hat - beta_pseudo;
    let h = basis_eval(&fit.spec, x0)?;
    let error = h.dot(&diff).abs();
    let bound = z * diff.norm();
    Ok(PointwiseBound {
        x0,
        error,
        zeta: z,
        bound,
        holds: le_with_slack(error, bound),
    })
}

/// The pointwise bound at every point of a `grid_size` grid.
pub fn grid_bounds(fit: &SeriesFit, beta_pseudo: &DVector<f64>, grid_size: usize) -> Result<Vec<PointwiseBound>> {
    let z = zeta(&fit.spec, grid_size)?;
    fit.spec
        .grid(grid_size)
        .into_iter()
        .map(|x| pointwise_with_zeta(fit, beta_pseudo, x, z))
        .collect()
}

/// Named regression functions for simulations and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// `sin(2x)`
    Sin2x,
    /// `1 + 2x`
    Linear,
    /// `x³ − x`
    Cubic,
    /// `exp(x)`
    Exp,
    /// `|x|`, not smooth at 0
    Abs,
}

impl TestFunction {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            TestFunction::Sin2x => (2.0 * x).sin(),
            TestFunction::Linear => 1.0 + 2.0 * x,
            TestFunction::Cubic => x * x * x - x,
            TestFunction::Exp => x.exp(),
            TestFunction::Abs => x.abs(),
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestFunction::Sin2x => "sin2x",
            TestFunction::Linear => "linear",
            TestFunction::Cubic => "cubic",
            TestFunction::Exp => "exp",
            TestFunction::Abs => "abs",
        })
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sin2x" | "sin" => Ok(TestFunction::Sin2x),
            "linear" => Ok(TestFunction::Linear),
            "cubic" => Ok(TestFunction::Cubic),
            "exp" => Ok(TestFunction::Exp),
            "abs" => Ok(TestFunction::Abs),
            other => Err(Error::Parse(format!("unknown function `{other}` (sin2x, linear, cubic, exp, abs)"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesReport {
    pub function: TestFunction,
    pub n: usize,
    pub p: usize,
    pub noise_sd: f64,
    pub seed: u64,
    pub zeta: f64,
    #[serde(serialize_with = "serde_util::vector")]
    pub beta_hat: DVector<f64>,
    #[serde(serialize_with = "serde_util::vector")]
    pub beta_pseudo: DVector<f64>,
    /// `‖β̂ − β*‖₂`
    pub coef_error: f64,
    /// `ζ(p)·‖β̂ − β*‖₂`
    pub pointwise_bound: f64,
    /// `max_x |h(x)'(β̂ − β*)|` over the grid.
    pub max_pointwise_error: f64,
    pub bound_holds_on_grid: bool,
    /// `max_x |ĝ(x) − g(x)|` over the grid.
    pub sup_error: f64,
    /// `max_x |h(x)'β* − g(x)|`: how far the L2 proxy is from `g` in sup norm.
    pub pseudo_true_sup_gap: f64,
    pub grid_size: usize,
}

/// Draws `x ~ U[a, b]`, `y = g(x) + N(0, noise_sd²)`, fits the series and
/// evaluates the pointwise bound on a grid.
pub fn simulate_series(
    function: TestFunction,
    spec: &BasisSpec,
    n: usize,
    noise_sd: f64,
    seed: u64,
    grid_size: usize,
    oracle_samples: usize,
) -> Result<SeriesReport> {
    if !(noise_sd >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise sd must be >= 0, got {noise_sd}")));
    }
    let mut rng = SimRng::new(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.uniform_in(spec.a, spec.b)).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| function.eval(x) + rng.normal(0.0, noise_sd)).collect();
    let fit = fit_series(&xs, &ys, spec)?;
    let beta_pseudo = pseudo_true(spec, |x| function.eval(x), oracle_samples)?;
    let bounds = grid_bounds(&fit, &beta_pseudo, grid_size)?;

    let mut sup_error = 0.0f64;
    let mut gap = 0.0f64;
    for x in spec.grid(grid_size) {
        let h = basis_eval(spec, x)?;
        let g = function.eval(x);
        sup_error = sup_error.max((h.dot(&fit.estimate.beta_hat) - g).abs());
        gap = gap.max((h.dot(&beta_pseudo) - g).abs());
    }
    let coef_error = (&fit.estimate.beta_hat - &beta_pseudo).norm();
    Ok(SeriesReport {
        function,
        n,
        p: spec.p,
        noise_sd,
        seed,
        zeta: bounds[0].zeta,
        coef_error,
        pointwise_bound: bounds[0].bound,
        max_pointwise_error: bounds.iter().map(|b| b.error).fold(0.0, f64::max),
        bound_holds_on_grid: bounds.iter().all(|b| b.holds),
        sup_error,
        pseudo_true_sup_gap: gap,
        grid_size,
        beta_hat: fit.estimate.beta_hat,
        beta_pseudo,
    })
}
