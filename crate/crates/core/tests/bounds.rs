//! Bound-chain behaviour on the lasso setup: the error of `Dβ̂` shrinks
//! with `n`, and the pathwise inequality holds on every draw.

mod common;

use common::median;
use hd_delta::bound::{pathwise_check, FunctionSpec};
use hd_delta::estimators::LassoOptions;
use hd_delta::montecarlo::{derive_seed, dgp_sample, select_lambda_ic, DEFAULT_LAMBDA_COEFS};
use hd_delta::norms::VectorNorm;
use nalgebra::DMatrix;

#[test]
fn restricted_error_median_decreases_in_n() {
    let (p, s0) = (100, 5);
    let d = DMatrix::from_fn(s0, p, |i, j| if i == j { 1.0 } else { 0.0 });
    let f = FunctionSpec::linear(d).unwrap();
    let mut medians = Vec::new();
    for n in [100, 200, 400, 800] {
        let mut errs = Vec::new();
        for rep in 0..60 {
            let data = dgp_sample(n, p, s0, derive_seed(21, &[n as u64, rep])).unwrap();
            let sel = select_lambda_ic(&data, &DEFAULT_LAMBDA_COEFS, &LassoOptions::default()).unwrap();
            let beta0 = data.beta_true().unwrap();
            for q in VectorNorm::ALL {
                let r = pathwise_check(&f, &sel.estimate.beta_hat, beta0, q).unwrap();
                assert!(r.holds && r.triangle_holds() && r.compatibility_holds());
                assert_eq!(r.remainder, 0.0);
            }
            let r = pathwise_check(&f, &sel.estimate.beta_hat, beta0, VectorNorm::L2).unwrap();
            errs.push(r.actual);
        }
        medians.push(median(&mut errs));
    }
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "median ‖D(β̂ − β₀)‖₂ by n: {medians:?}");
}
