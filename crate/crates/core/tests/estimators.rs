mod common;

use common::{gaussian, median};
use hd_delta::estimators::{
    conservative_lasso, debias_dcl, default_node_lambda, nodewise_precision, Dataset, LassoOptions,
};
use hd_delta::montecarlo::{derive_seed, dgp_sample, select_lambda_ic, SimRng, DEFAULT_LAMBDA_COEFS};

fn universal_lambda(n: usize, p: usize) -> f64 {
    ((p as f64).ln() / n as f64).sqrt()
}

#[test]
fn conservative_lasso_keeps_true_support() {
    let (n, p, s0) = (300, 50, 5);
    let reps = 100;
    let mut covered = 0;
    for rep in 0..reps {
        let data = dgp_sample(n, p, s0, derive_seed(11, &[rep])).unwrap();
        let est = conservative_lasso(&data, universal_lambda(n, p), &LassoOptions::default()).unwrap();
        assert!(est.converged);
        if (0..s0).all(|j| est.support.contains(&j)) {
            covered += 1;
        }
    }
    assert!(covered >= 95, "true support kept in {covered}/{reps} replications");
}

#[test]
fn dcl_error_shrinks_with_n() {
    let (p, s0) = (50, 5);
    let opts = LassoOptions::default();
    let mut medians = Vec::new();
    for n in [100, 200, 300] {
        let mut errs = Vec::new();
        for rep in 0..60 {
            let data = dgp_sample(n, p, s0, derive_seed(12, &[n as u64, rep])).unwrap();
            let cl = conservative_lasso(&data, universal_lambda(n, p), &opts).unwrap();
            let prec = nodewise_precision(data.x(), &vec![default_node_lambda(n, p); p], &opts).unwrap();
            let b = debias_dcl(&data, &cl, &prec).unwrap();
            assert_eq!(b.support.len(), p);
            let beta0 = data.beta_true().unwrap();
            errs.extend((0..p).map(|j| (b.beta_hat[j] - beta0[j]).abs()));
        }
        medians.push(median(&mut errs));
    }
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "median |b̂ − β₀| by n: {medians:?}");
}

#[test]
fn ic_picks_small_models_on_pure_noise() {
    let (n, p) = (200, 100);
    let mut sizes = Vec::new();
    for rep in 0..100 {
        let mut rng = SimRng::new(derive_seed(13, &[rep]));
        let x = gaussian(&mut rng, n, p);
        let y = rng.normal_vector(n, 1.0);
        let data = Dataset::new(x, y).unwrap();
        let sel = select_lambda_ic(&data, &DEFAULT_LAMBDA_COEFS, &LassoOptions::default()).unwrap();
        sizes.push(sel.estimate.support.len() as f64);
    }
    let m = median(&mut sizes);
    assert!(m <= 2.0, "median selected support {m}");
}

#[test]
fn ic_path_is_reported_for_every_coefficient() {
    let data = dgp_sample(100, 40, 5, 5).unwrap();
    let sel = select_lambda_ic(&data, &DEFAULT_LAMBDA_COEFS, &LassoOptions::default()).unwrap();
    assert_eq!(sel.path.len(), DEFAULT_LAMBDA_COEFS.len());
    let best = sel.path.iter().map(|p| p.ic).fold(f64::INFINITY, f64::min);
    let chosen = sel.path.iter().find(|p| p.c == sel.c_star).unwrap();
    assert_eq!(chosen.ic, best);
    assert_eq!(sel.estimate.support.len(), chosen.support_size);
    assert_eq!(sel.estimate.lambda, sel.lambda_star);
}
