//! Upper bounds for `‖f(β̂) − f(β₀)‖_q` through the derivative of `f` at `β₀`.
//!
//! For a differentiable `f` with derivative matrix `f_d(β₀)` (`m × p`),
//!
//! ```text
//! f(β̂) − f(β₀) = f_d(β₀)(β̂ − β₀) + l(β̂ − β₀)
//! ‖f(β̂) − f(β₀)‖_q ≤ ‖f_d(β₀)(β̂ − β₀)‖_q + ‖l(β̂ − β₀)‖_q
//!                  ≤ ‖|f_d(β₀)|‖_q ‖β̂ − β₀‖_q + ‖l(β̂ − β₀)‖_q
//! ```
//!
//! [`pathwise_check`] evaluates every term of that chain on concrete vectors
//! with the exact remainder `l`, so each inequality can be checked in finite
//! samples. Multiplying through by a rate `r_n` with `r_n‖β̂ − β₀‖ = O_p(1)`
//! gives orders `1/r_n`, `k_n/r_n` or `1/(d_n r_n)` depending on whether
//! `‖|f_d(β₀)|‖` stays constant, grows like `k_n` or shrinks like `1/d_n`;
//! see [`classify_regime`] and [`rate_bound`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::norms::{mat_norm, vec_norm, VectorNorm};

/// Default relative band for [`classify_regime`].
pub const REGIME_TOL: f64 = 0.05;

/// Slack on `holds`: `actual ≤ bound + 1e-9·(1 + bound)`.
pub fn holds_slack(bound: f64) -> f64 {
    1e-9 * (1.0 + bound)
}

/// The supported families of differentiable targets.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    /// `f(β) = Dβ`
    Linear(DMatrix<f64>),
    /// `f(β) = β'Sβ` with `S` symmetric.
    Quadratic(DMatrix<f64>),
    /// `f(β) = h'β`, e.g. a basis vector evaluated at a point.
    BasisPoint(DVector<f64>),
}

impl FunctionSpec {
    pub fn linear(d: DMatrix<f64>) -> Result<Self> {
        ensure_dims(!d.is_empty(), || "empty restriction matrix".into())?;
        Ok(FunctionSpec::Linear(d))
    }

    /// Rejects `S` unless `|S − S'|` is within `1e-12·max|S|`.
    pub fn quadratic(s: DMatrix<f64>) -> Result<Self> {
        ensure_dims(s.is_square() && !s.is_empty(), || {
            format!("quadratic form must be square, got {}x{}", s.nrows(), s.ncols())
        })?;
        let scale = s.amax();
        let asym = (&s - s.transpose()).amax();
        if asym > 1e-12 * scale.max(1.0) {
            return Err(Error::InvalidArgument(format!("quadratic form is not symmetric (max |S - S'| = {asym:e})")));
        }
        Ok(FunctionSpec::Quadratic(s))
    }

    pub fn basis_point(h: DVector<f64>) -> Result<Self> {
        ensure_dims(!h.is_empty(), || "empty basis vector".into())?;
        Ok(FunctionSpec::BasisPoint(h))
    }

    /// Length of `β`.
    pub fn input_dim(&self) -> usize {
        match self {
            FunctionSpec::Linear(d) => d.ncols(),
            FunctionSpec::Quadratic(s) => s.ncols(),
            FunctionSpec::BasisPoint(h) => h.len(),
        }
    }

    /// `m`, the length of `f(β)`.
    pub fn output_dim(&self) -> usize {
        match self {
            FunctionSpec::Linear(d) => d.nrows(),
            FunctionSpec::Quadratic(_) | FunctionSpec::BasisPoint(_) => 1,
        }
    }

    fn check_input(&self, beta: &DVector<f64>) -> Result<()> {
        ensure_dims(beta.len() == self.input_dim(), || {
            format!("vector has length {} but f expects {}", beta.len(), self.input_dim())
        })
    }

    pub fn evaluate(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(beta)?;
        Ok(match self {
            FunctionSpec::Linear(d) => d * beta,
            FunctionSpec::Quadratic(s) => DVector::from_element(1, beta.dot(&(s * beta))),
            FunctionSpec::BasisPoint(h) => DVector::from_element(1, h.dot(beta)),
        })
    }

    /// Exact remainder `l(h) = f(β₀ + h) − f(β₀) − f_d(β₀)h`; for these
    /// families it does not depend on `β₀`.
    pub fn remainder(&self, h: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(h)?;
        Ok(match self {
            FunctionSpec::Linear(d) => DVector::zeros(d.nrows()),
            FunctionSpec::Quadratic(s) => DVector::from_element(1, h.dot(&(s * h))),
            FunctionSpec::BasisPoint(_) => DVector::zeros(1),
        })
    }
}

/// `m × p` derivative of `f` at `beta0`.
pub fn derivative(f: &FunctionSpec, beta0: &DVector<f64>) -> Result<DMatrix<f64>> {
    f.check_input(beta0)?;
    Ok(match f {
        FunctionSpec::Linear(d) => d.clone(),
        FunctionSpec::Quadratic(s) => DMatrix::from_row_slice(1, beta0.len(), (s * beta0 * 2.0).as_slice()),
        FunctionSpec::BasisPoint(h) => DMatrix::from_row_slice(1, h.len(), h.as_slice()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `‖|f_d|‖ = C`, order `1/r_n`
    A,
    /// `‖|f_d|‖ = C k_n`, order `k_n/r_n`
    B,
    /// `‖|f_d|‖ = C/d_n`, order `1/(d_n r_n)`
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub c: f64,
    pub k_n: f64,
    pub d_n: f64,
    pub regime: Regime,
}

fn within_band(value: f64, target: f64, tol: f64) -> bool {
    target > 0.0 && value >= target / (1.0 + tol) && value <= target * (1.0 + tol)
}

/// Labels `fd_norm` against the three forms `C`, `C·k_n`, `C/d_n` at the
/// supplied sequence values, checked in that order within a relative band
/// `tol`. Inputs matching none of them are rejected.
pub fn classify_regime(fd_norm: f64, c: f64, k_n: f64, d_n: f64, tol: f64) -> Result<RegimeSpec> {
    if !(fd_norm > 0.0) {
        return Err(Error::Hypothesis(format!("derivative norm must be > 0, got {fd_norm}")));
    }
    for (name, v) in [("C", c), ("k_n", k_n), ("d_n", d_n)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be finite and > 0, got {v}")));
        }
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be >= 0, got {tol}")));
    }
    let regime = if within_band(fd_norm, c, tol) {
        Regime::A
    } else if within_band(fd_norm, c * k_n, tol) {
        Regime::B
    } else if within_band(fd_norm, c / d_n, tol) {
        Regime::C
    } else {
        return Err(Error::Hypothesis(format!(
            "derivative norm {fd_norm} matches none of C = {c}, C·k_n = {}, C/d_n = {}",
            c * k_n,
            c / d_n
        )));
    };
    Ok(RegimeSpec { c, k_n, d_n, regime })
}

/// Convergence rates `r_n` with `r_n‖β̂ − β₀‖ = O_p(1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateSpec {
    /// Lasso: `√(n / log p) / √s₀`.
    Lasso { n: usize, p: usize, s0: usize },
    /// Nodewise GMV weights in ℓ1: `(√n / √log p) / s̄^{3/2}`.
    PortfolioWeights { n: usize, p: usize, s_bar: usize },
    /// Coordinatewise debiased lasso: `√n`.
    RootN { n: usize },
    /// Series regression: `1 / (√(p/n) + p^{−α})`.
    Series { n: usize, p: usize, alpha: f64 },
    Fixed { value: f64 },
}

impl RateSpec {
    pub fn evaluate(&self) -> Result<f64> {
        let log_p = |p: usize| -> Result<f64> {
            if p < 2 {
                return Err(Error::InvalidArgument(format!("rate needs p >= 2 for log p > 0, got {p}")));
            }
            Ok((p as f64).ln())
        };
        let positive = |name: &str, v: usize| -> Result<f64> {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be > 0")));
            }
            Ok(v as f64)
        };
        let r = match *self {
            RateSpec::Lasso { n, p, s0 } => {
                (positive("n", n)? / log_p(p)?).sqrt() / positive("s0", s0)?.sqrt()
            }
            RateSpec::PortfolioWeights { n, p, s_bar } => {
                (positive("n", n)?.sqrt() / log_p(p)?.sqrt()) / positive("s_bar", s_bar)?.powf(1.5)
            }
            RateSpec::RootN { n } => positive("n", n)?.sqrt(),
            RateSpec::Series { n, p, alpha } => {
                let (n, p) = (positive("n", n)?, positive("p", p)?);
                1.0 / ((p / n).sqrt() + p.powf(-alpha))
            }
            RateSpec::Fixed { value } => value,
        };
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!("rate must be finite and > 0, got {r}")));
        }
        Ok(r)
    }
}

/// Order of the bound: `1/r_n`, `k_n/r_n` or `1/(d_n r_n)`.
pub fn rate_bound(rate: &RateSpec, regime: &RegimeSpec) -> Result<f64> {
    let r = rate.evaluate()?;
    Ok(match regime.regime {
        Regime::A => 1.0 / r,
        Regime::B => regime.k_n / r,
        Regime::C => 1.0 / (regime.d_n * r),
    })
}

/// Every term of the bound chain for one `(β̂, β₀)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub norm: VectorNorm,
    /// `‖|f_d(β₀)|‖_q`
    pub fd_norm: f64,
    /// `‖β̂ − β₀‖_q`
    pub est_err: f64,
    /// `‖f(β̂) − f(β₀)‖_q`
    pub actual: f64,
    /// `‖f_d(β₀)(β̂ − β₀)‖_q`
    pub linear_term: f64,
    /// `‖l(β̂ − β₀)‖_q`
    pub remainder: f64,
    /// `fd_norm · est_err + remainder`
    pub bound: f64,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub regime: Option<RegimeSpec>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rate_value: Option<f64>,
}

impl BoundReport {
    /// `actual ≤ linear_term + remainder` (triangle step).
    pub fn triangle_holds(&self) -> bool {
        self.actual <= self.linear_term + self.remainder + holds_slack(self.linear_term + self.remainder)
    }

    /// `linear_term ≤ fd_norm · est_err` (compatibility step).
    pub fn compatibility_holds(&self) -> bool {
        let rhs = self.fd_norm * self.est_err;
        self.linear_term <= rhs + holds_slack(rhs)
    }

    /// Attach a regime label and the order value it implies for `rate`.
    pub fn with_regime(mut self, regime: RegimeSpec, rate: Option<&RateSpec>) -> Result<Self> {
        self.rate_value = rate.map(|r| rate_bound(r, &regime)).transpose()?;
        self.regime = Some(regime);
        Ok(self)
    }
}

/// Evaluates the bound chain on concrete vectors in norm `q`, using the
/// matrix norm compatible with `q` for `f_d(β₀)`.
pub fn pathwise_check(
    f: &FunctionSpec,
    beta_hat: &DVector<f64>,
    beta0: &DVector<f64>,
    q: VectorNorm,
) -> Result<BoundReport> {
    f.check_input(beta_hat)?;
    let fd = derivative(f, beta0)?;
    let h = beta_hat - beta0;

    let fd_norm = mat_norm(&fd, q.compatible_matrix_norm())?;
    let est_err = vec_norm(&h, q)?;
    let actual = vec_norm(&(f.evaluate(beta_hat)? - f.evaluate(beta0)?), q)?;
    let linear_term = vec_norm(&(&fd * &h), q)?;
    let remainder = vec_norm(&f.remainder(&h)?, q)?;
    let bound = fd_norm * est_err + remainder;
    Ok(BoundReport {
        norm: q,
        fd_norm,
        est_err,
        actual,
        linear_term,
        remainder,
        bound,
        holds: actual <= bound + holds_slack(bound),
        regime: None,
        rate_value: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{random_spd, random_vector, rng};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn derivatives_per_family() {
        let d = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b0 = DVector::from_vec(vec![1.0, -1.0, 0.5]);
        assert_eq!(derivative(&FunctionSpec::linear(d.clone()).unwrap(), &b0).unwrap(), d);

        let s = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0]);
        let fd = derivative(&FunctionSpec::quadratic(s.clone()).unwrap(), &b0).unwrap();
        assert_eq!(fd, (b0.transpose() * &s) * 2.0);

        let h = DVector::from_vec(vec![1.0, 0.25, 0.0625]);
        let fd = derivative(&FunctionSpec::basis_point(h.clone()).unwrap(), &b0).unwrap();
        assert_eq!(fd, h.transpose());

        assert!(matches!(
            derivative(&FunctionSpec::Linear(d), &DVector::zeros(2)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn asymmetric_quadratic_rejected() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(FunctionSpec::quadratic(s), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn zero_displacement() {
        let f = FunctionSpec::quadratic(DMatrix::identity(3, 3)).unwrap();
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let r = pathwise_check(&f, &b, &b, VectorNorm::L2).unwrap();
        assert_eq!(r.actual, 0.0);
        assert_eq!(r.bound, 0.0);
        assert!(r.holds);
    }

    #[test]
    fn selection_matrix_example() {
        let (s0, p) = (5, 20);
        let d = DMatrix::from_fn(s0, p, |i, j| if i == j { 1.0 } else { 0.0 });
        let f = FunctionSpec::linear(d).unwrap();
        let mut r = rng(40);
        let b0 = random_vector(&mut r, p);
        let bh = &b0 + random_vector(&mut r, p) * 0.1;
        let rep = pathwise_check(&f, &bh, &b0, VectorNorm::L2).unwrap();
        let head = (&bh - &b0).rows(0, s0).norm();
        assert_relative_eq!(rep.actual, head, epsilon = 1e-14);
        assert_relative_eq!(rep.fd_norm, (s0 as f64).sqrt(), epsilon = 1e-14);
        assert_eq!(rep.remainder, 0.0);
        assert!(rep.actual <= (s0 as f64).sqrt() * rep.est_err);
        assert!(rep.holds && rep.triangle_holds() && rep.compatibility_holds());
    }

    #[test]
    fn quadratic_hand_example() {
        let f = FunctionSpec::quadratic(DMatrix::identity(2, 2)).unwrap();
        let b0 = DVector::from_vec(vec![1.0, 0.0]);
        let bh = DVector::from_vec(vec![1.1, 0.2]);
        let r = pathwise_check(&f, &bh, &b0, VectorNorm::L2).unwrap();
        assert_relative_eq!(r.actual, 0.25, epsilon = 1e-14);
        assert_relative_eq!(r.linear_term, 0.2, epsilon = 1e-14);
        assert_relative_eq!(r.remainder, 0.05, epsilon = 1e-14);
        assert_relative_eq!(r.actual, r.linear_term + r.remainder, epsilon = 1e-14);
        assert!(r.holds);
    }

    #[test]
    fn remainder_vanishes_linearly() {
        let mut r = rng(41);
        let s = random_spd(&mut r, 6);
        let f = FunctionSpec::quadratic(s).unwrap();
        let h = random_vector(&mut r, 6);
        let ratio = |t: f64| {
            let th = &h * t;
            f.remainder(&th).unwrap()[0].abs() / th.norm()
        };
        let (r1, r2, r4) = (ratio(1.0), ratio(1e-2), ratio(1e-4));
        assert!(r2 < r1 && r4 < r2);
        assert_relative_eq!(r2 / r1, 1e-2, max_relative = 1e-8);
        assert_relative_eq!(r4 / r2, 1e-2, max_relative = 1e-8);
    }

    #[test]
    fn regime_examples() {
        let m = 4.0f64;
        assert_eq!(classify_regime(m.sqrt(), m.sqrt(), 1.0, 1.0, REGIME_TOL).unwrap().regime, Regime::A);

        // ‖|D|‖ = √s₀ against k_n = s₀ with C = 1/√s₀
        let s0 = 25.0f64;
        let spec = classify_regime(s0.sqrt(), 1.0 / s0.sqrt(), s0, 1.0, REGIME_TOL).unwrap();
        assert_eq!(spec.regime, Regime::B);

        let spec = classify_regime(0.1, 1.0, 3.0, 10.0, REGIME_TOL).unwrap();
        assert_eq!(spec.regime, Regime::C);

        assert!(matches!(classify_regime(0.0, 1.0, 1.0, 1.0, REGIME_TOL), Err(Error::Hypothesis(_))));
        assert!(matches!(classify_regime(1.0, 0.0, 1.0, 1.0, REGIME_TOL), Err(Error::InvalidArgument(_))));
        assert!(matches!(classify_regime(7.0, 1.0, 2.0, 2.0, REGIME_TOL), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn regime_scale_consistent() {
        for (fd, c, k, d) in [(1.0, 1.02, 1.0, 1.0), (6.0, 2.0, 3.0, 5.0), (0.2, 1.0, 9.0, 5.0)] {
            let a = classify_regime(fd, c, k, d, REGIME_TOL).unwrap().regime;
            let b = classify_regime(2.0 * fd, 2.0 * c, k, d, REGIME_TOL).unwrap().regime;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rate_orders() {
        let a = RegimeSpec { c: 1.0, k_n: 1.0, d_n: 1.0, regime: Regime::A };
        assert_relative_eq!(rate_bound(&RateSpec::Fixed { value: 10.0 }, &a).unwrap(), 0.1);

        let (n, p, s0) = (400usize, 200usize, 9usize);
        let b = RegimeSpec { c: 1.0, k_n: s0 as f64, d_n: 1.0, regime: Regime::B };
        let got = rate_bound(&RateSpec::Lasso { n, p, s0 }, &b).unwrap();
        let expected = (s0 as f64).powf(1.5) * (p as f64).ln().sqrt() / (n as f64).sqrt();
        assert_relative_eq!(got, expected, max_relative = 1e-14);

        let s_bar = 4usize;
        let b = RegimeSpec { c: 1.0, k_n: (s_bar as f64).sqrt(), d_n: 1.0, regime: Regime::B };
        let got = rate_bound(&RateSpec::PortfolioWeights { n, p, s_bar }, &b).unwrap();
        let expected = (s_bar as f64).powi(2) * (p as f64).ln().sqrt() / (n as f64).sqrt();
        assert_relative_eq!(got, expected, max_relative = 1e-14);

        let c = RegimeSpec { c: 1.0, k_n: 1.0, d_n: 4.0, regime: Regime::C };
        assert_relative_eq!(rate_bound(&RateSpec::RootN { n: 100 }, &c).unwrap(), 1.0 / 40.0);

        assert!(RateSpec::Lasso { n: 10, p: 1, s0: 1 }.evaluate().is_err());
    }

    #[test]
    fn rates_grow_with_n() {
        let mut last = 0.0;
        for n in [100usize, 200, 400, 800, 1600] {
            let r = RateSpec::Lasso { n, p: 2 * n, s0: 5 }.evaluate().unwrap();
            assert!(r > last);
            last = r;
        }
    }

    #[test]
    fn report_json_roundtrip() {
        let f = FunctionSpec::basis_point(DVector::from_vec(vec![1.0, 0.5])).unwrap();
        let rep = pathwise_check(&f, &DVector::from_vec(vec![1.0, 1.0]), &DVector::zeros(2), VectorNorm::LInf)
            .unwrap()
            .with_regime(classify_regime(1.5, 1.5, 1.0, 1.0, REGIME_TOL).unwrap(), Some(&RateSpec::RootN { n: 100 }))
            .unwrap();
        let json = serde_json::to_string(&rep).unwrap();
        let back: BoundReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rep);
        assert_eq!(rep.rate_value, Some(0.1));
    }

    fn family(p: usize, kind: u8, seed: u64) -> FunctionSpec {
        let mut r = rng(seed);
        match kind {
            0 => FunctionSpec::Linear(r.normal_matrix(1 + (seed as usize % 5), p)),
            1 => FunctionSpec::Quadratic(random_spd(&mut r, p)),
            _ => FunctionSpec::BasisPoint(random_vector(&mut r, p)),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn chain_holds_for_all_families(p in 1usize..40, kind in 0u8..3, seed in any::<u64>(), scale in 1e-3..10.0f64) {
            let f = family(p, kind, seed);
            let mut r = rng(seed ^ 0xABCD);
            let b0 = random_vector(&mut r, p);
            let bh = &b0 + random_vector(&mut r, p) * scale;
            for q in VectorNorm::ALL {
                let rep = pathwise_check(&f, &bh, &b0, q).unwrap();
                prop_assert!(rep.holds);
                prop_assert!(rep.triangle_holds());
                prop_assert!(rep.compatibility_holds());
            }
        }

        #[test]
        fn quadratic_decomposition_exact(p in 1usize..30, seed in any::<u64>()) {
            let mut r = rng(seed);
            let s = random_spd(&mut r, p);
            let f = FunctionSpec::Quadratic(s.clone());
            let b0 = random_vector(&mut r, p);
            let bh = random_vector(&mut r, p);
            let h = &bh - &b0;
            let lhs = f.evaluate(&bh).unwrap()[0] - f.evaluate(&b0).unwrap()[0];
            let rhs = (derivative(&f, &b0).unwrap() * &h)[0] + f.remainder(&h).unwrap()[0];
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }
    }
}
