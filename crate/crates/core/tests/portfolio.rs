mod common;

use common::median;
use hd_delta::estimators::{default_node_lambda, LassoOptions};
use hd_delta::montecarlo::{derive_seed, SimRng};
use hd_delta::portfolio::{estimate_gmv, variance_error_bound_direct, variance_error_bound_theorem, PortfolioInstance};
use nalgebra::DMatrix;

/// AR(1)-style covariance `ρ^|i−j|`; its inverse is tridiagonal.
fn toeplitz(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| rho.powi((i as i32 - j as i32).abs()))
}

#[test]
fn estimated_weights_converge_in_l1() {
    let p = 50;
    let sigma = toeplitz(p, 0.5);
    let truth = PortfolioInstance::gmv(sigma.clone()).unwrap();
    let chol = sigma.clone().cholesky().unwrap().l();
    let opts = LassoOptions::default();
    let mut medians = Vec::new();
    for n in [200, 500, 1000] {
        let mut errs = Vec::new();
        for rep in 0..20 {
            let mut rng = SimRng::new(derive_seed(31, &[n as u64, rep]));
            let z = rng.normal_matrix(n, p);
            let returns = z * chol.transpose();
            let fit = estimate_gmv(&returns, &vec![default_node_lambda(n, p); p], true, &opts).unwrap();
            assert!((fit.weights.sum() - 1.0).abs() < 1e-12);
            errs.push((&fit.weights - truth.weights()).lp_norm(1));
            for report in [
                variance_error_bound_theorem(&fit.weights, truth.weights(), &sigma).unwrap(),
                variance_error_bound_direct(&fit.weights, truth.weights(), &sigma).unwrap(),
            ] {
                assert!(report.holds, "{report:?}");
            }
        }
        medians.push(median(&mut errs));
    }
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "median ‖ŵ − w‖₁ by n: {medians:?}");
}
