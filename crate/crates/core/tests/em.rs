mod common;

use approx::assert_relative_eq;
use common::*;
use mixreg_core::em::{canonicalize, estep, estep_with_loglik, expected_complete_loglik, mstep, ASCENT_SLACK};
use mixreg_core::{
    fit, fit_gmm_covariate, fit_mbc, fit_ols, loglik, posterior_weights, sample, select_k, Component, Dataset,
    Error, FitConfig, Floors, Gaussian, MixtureModel, ModelKind, Regression, Responsibilities,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mcr2(labels: &[usize], truth: &[usize]) -> f64 {
    let n = labels.len() as f64;
    let wrong = labels.iter().zip(truth).filter(|(a, b)| a != b).count() as f64;
    (wrong / n).min(1.0 - wrong / n)
}

/// Slopes of a two-component fit aligned to `truth` by the cheaper permutation.
fn aligned_slopes(m: &MixtureModel, truth: &MixtureModel) -> [DVector<f64>; 2] {
    let b = |mm: &MixtureModel, k: usize| mm.component(k).regression.as_ref().unwrap().beta.clone();
    let direct = (b(m, 0) - b(truth, 0)).norm_squared() + (b(m, 1) - b(truth, 1)).norm_squared();
    let swapped = (b(m, 1) - b(truth, 0)).norm_squared() + (b(m, 0) - b(truth, 1)).norm_squared();
    if direct <= swapped {
        [b(m, 0), b(m, 1)]
    } else {
        [b(m, 1), b(m, 0)]
    }
}

#[test]
fn estep_two_point_oracle() {
    let m = MixtureModel::new(
        ModelKind::Jmr,
        vec![0.3, 0.7],
        vec![
            jmr_component(1.0, &[0.5], 0.5, &[0.0], &[1.0]),
            jmr_component(-1.0, &[2.0], 2.0, &[1.0], &[0.5]),
        ],
    )
    .unwrap();
    let d = Dataset::new(
        DVector::from_row_slice(&[0.8, 2.5]),
        DMatrix::from_row_slice(2, 1, &[0.2, 1.4]),
        None,
        None,
    )
    .unwrap();
    let tau = estep(&m, &d).unwrap();
    for i in 0..2 {
        let (y, x) = (d.y[i], d.x[(i, 0)]);
        let a = 0.3 * (normal_logpdf(y, 1.0 + 0.5 * x, 0.5) + normal_logpdf(x, 0.0, 1.0)).exp();
        let b = 0.7 * (normal_logpdf(y, -1.0 + 2.0 * x, 2.0) + normal_logpdf(x, 1.0, 0.5)).exp();
        assert_relative_eq!(tau.matrix()[(i, 0)], a / (a + b), epsilon = 1e-14);
        assert_relative_eq!(tau.matrix()[(i, 1)], b / (a + b), epsilon = 1e-14);
    }
}

#[test]
fn estep_identical_components_gives_mixing_weights() {
    let c = jmr_component(0.0, &[1.0, 1.0], 0.2, &[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]);
    let m = MixtureModel::new(ModelKind::Jmr, vec![0.6, 0.4], vec![c.clone(), c]).unwrap();
    let d = sample(&separated_model(), 30, 2).unwrap();
    let tau = estep(&m, &d).unwrap();
    for i in 0..30 {
        assert_relative_eq!(tau.matrix()[(i, 0)], 0.6, epsilon = 1e-14);
        assert_relative_eq!(tau.matrix()[(i, 1)], 0.4, epsilon = 1e-14);
    }
}

/// Weighted normal equations solved by explicit inverse.
fn mstep_oracle(tau: &DMatrix<f64>, d: &Dataset, k: usize) -> (f64, DVector<f64>, f64, DVector<f64>, DMatrix<f64>) {
    let n = d.n();
    let p = d.p();
    let w: Vec<f64> = tau.column(k).iter().copied().collect();
    let nk: f64 = w.iter().sum();
    let xbar = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { d.x[(i, j - 1)] });
    let wm = DMatrix::from_diagonal(&DVector::from_vec(w.clone()));
    let coef = (xbar.transpose() * &wm * &xbar).try_inverse().unwrap() * xbar.transpose() * &wm * &d.y;
    let resid = &d.y - &xbar * &coef;
    let sigma2 = (0..n).map(|i| w[i] * resid[i] * resid[i]).sum::<f64>() / nk;
    let mu = DVector::from_fn(p, |a, _| (0..n).map(|i| w[i] * d.x[(i, a)]).sum::<f64>() / nk);
    let cov = DMatrix::from_fn(p, p, |a, b| {
        (0..n).map(|i| w[i] * (d.x[(i, a)] - mu[a]) * (d.x[(i, b)] - mu[b])).sum::<f64>() / nk
    });
    (coef[0], coef.rows(1, p).into_owned(), sigma2, mu, cov)
}

#[test]
fn mstep_matches_weighted_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 5;
    let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-2.0..2.0));
    let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let d = Dataset::new(y, x, None, None).unwrap();
    let t: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
    let tau = DMatrix::from_fn(n, 2, |i, j| if j == 0 { t[i] } else { 1.0 - t[i] });
    let m = mstep(&Responsibilities::new(tau.clone()).unwrap(), &d, ModelKind::Jmr, &Floors::default(), 0.5).unwrap();
    let nk0: f64 = t.iter().sum();
    assert_relative_eq!(m.weights()[0], nk0 / n as f64, epsilon = 1e-14);
    for k in 0..2 {
        let (alpha, beta, sigma2, mu, cov) = mstep_oracle(&tau, &d, k);
        let reg = m.component(k).regression.as_ref().unwrap();
        let law = m.component(k).covariate.as_ref().unwrap();
        assert_relative_eq!(reg.alpha, alpha, epsilon = 1e-10);
        assert_relative_eq!(reg.beta, beta, epsilon = 1e-10);
        assert_relative_eq!(reg.sigma2, sigma2, epsilon = 1e-10);
        assert_relative_eq!(law.mean().clone(), mu, epsilon = 1e-12);
        assert_relative_eq!(law.cov().clone(), cov, epsilon = 1e-12);
    }
}

fn perturbed(m: &MixtureModel, k: usize, which: usize, eps: f64) -> Option<MixtureModel> {
    let c = m.component(k);
    let reg = c.regression.clone().unwrap();
    let law = c.covariate.clone().unwrap();
    let p = reg.beta.len();
    let mut alpha = reg.alpha;
    let mut beta = reg.beta.clone();
    let mut sigma2 = reg.sigma2;
    let mut mu = law.mean().clone();
    let mut cov = law.cov().clone();
    match which {
        0 => alpha += eps,
        1 => sigma2 += eps,
        w if w < 2 + p => beta[w - 2] += eps,
        w if w < 2 + 2 * p => mu[w - 2 - p] += eps,
        w => {
            let idx = w - 2 - 2 * p;
            let (a, b) = (idx / p, idx % p);
            if b > a {
                return None;
            }
            cov[(a, b)] += eps;
            if a != b {
                cov[(b, a)] += eps;
            }
        }
    }
    let comp = Component::jmr(
        Regression::new(alpha, reg.zeta.clone(), beta, sigma2).ok()?,
        Gaussian::new(mu, cov).ok()?,
    );
    let mut comps = m.components().to_vec();
    comps[k] = comp;
    MixtureModel::new(ModelKind::Jmr, m.weights().to_vec(), comps).ok()
}

#[test]
fn mstep_maximizes_q_function() {
    for seed in 0..5 {
        let d = sample(&separated_model(), 60, 100 + seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tau = DMatrix::from_fn(60, 2, |_, _| rng.random_range(0.0..1.0));
        let tau = DMatrix::from_fn(60, 2, |i, j| tau[(i, j)] / tau.row(i).sum());
        let tau = Responsibilities::new(tau).unwrap();
        let m = mstep(&tau, &d, ModelKind::Jmr, &Floors::default(), 4.0).unwrap();
        let q0 = expected_complete_loglik(&m, &d, &tau).unwrap();
        for k in 0..2 {
            for which in 0..(2 + 2 + 2 + 4) {
                for eps in [1e-3, -1e-3] {
                    if let Some(mp) = perturbed(&m, k, which, eps) {
                        let q = expected_complete_loglik(&mp, &d, &tau).unwrap();
                        assert!(q <= q0 + 1e-12, "seed {seed} k {k} param {which} eps {eps}: {q} > {q0}");
                    }
                }
            }
            // mixing proportions, shifted in a way that keeps the sum
            let w = m.weights();
            for eps in [1e-3, -1e-3] {
                let mp = MixtureModel::new(ModelKind::Jmr, vec![w[0] + eps, w[1] - eps], m.components().to_vec())
                    .unwrap();
                assert!(expected_complete_loglik(&mp, &d, &tau).unwrap() <= q0 + 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn em_steps_never_decrease_loglik(seed in 0u64..10_000, kind_idx in 0usize..3) {
        let kind = [ModelKind::Jmr, ModelKind::Omr, ModelKind::Gmm][kind_idx];
        let d = sample(&separated_model(), 80, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..80).map(|_| rng.random_range(0..2)).collect();
        let tau = Responsibilities::from_labels(&labels, 2).unwrap();
        let mut m = mstep(&tau, &d, kind, &Floors::default(), 1.0).unwrap();
        let mut ll = loglik(&m, &d).unwrap();
        for _ in 0..15 {
            let (tau, _) = estep_with_loglik(&m, &d).unwrap();
            m = match mstep(&tau, &d, kind, &Floors::default(), 1.0) {
                Ok(m) => m,
                Err(_) => break,
            };
            let next = loglik(&m, &d).unwrap();
            prop_assert!(next >= ll - ASCENT_SLACK, "{next} < {ll}");
            ll = next;
        }
    }

    #[test]
    fn canonicalize_is_idempotent(seed in 0u64..100_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let last = 1.0 - w[0] - w[1];
        w[2] = last;
        let comps = (0..3)
            .map(|_| {
                let mu = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
                jmr_component(rng.random_range(-1.0..1.0), &[rng.random_range(-2.0..2.0), 1.0], 0.3, &mu,
                    &[1.0, 0.0, 0.0, 1.0])
            })
            .collect();
        let m = MixtureModel::new(ModelKind::Jmr, w, comps).unwrap();
        let c = canonicalize(&m);
        prop_assert_eq!(canonicalize(&c), c.clone());
        for pair in c.weights().windows(2) {
            prop_assert!(pair[0] >= pair[1]);
        }
    }
}

#[test]
fn canonicalize_examples() {
    let m = separated_model();
    assert_eq!(canonicalize(&m), m);
    assert_eq!(canonicalize(&m.permuted(&[1, 0])), m);
    // equal weights fall back to the first covariate coordinate
    let c = |mu: f64| jmr_component(0.0, &[1.0], 0.1, &[mu], &[1.0]);
    let eq = MixtureModel::new(ModelKind::Jmr, vec![0.5, 0.5], vec![c(3.0), c(-1.0)]).unwrap();
    let out = canonicalize(&eq);
    assert_eq!(out.component(0).covariate.as_ref().unwrap().mean()[0], -1.0);
}

#[test]
fn k1_fit_is_ols_plus_ml_moments() {
    let d = sample(&separated_model(), 120, 8).unwrap();
    let res = fit(&d, 1, ModelKind::Jmr, &FitConfig::default().with_seed(3)).unwrap();
    let ols = fit_ols(&d).unwrap();
    let reg = res.model.component(0).regression.as_ref().unwrap();
    assert_relative_eq!(reg.alpha, ols.alpha, epsilon = 1e-10);
    assert_relative_eq!(reg.beta, ols.beta, epsilon = 1e-10);
    assert_relative_eq!(reg.sigma2, ols.sigma2, epsilon = 1e-10);
    let law = res.model.component(0).covariate.as_ref().unwrap();
    let mean = d.x.row_mean().transpose();
    assert_relative_eq!(law.mean().clone(), mean, epsilon = 1e-12);
    let centered = DMatrix::from_fn(120, 2, |i, j| d.x[(i, j)] - mean[j]);
    assert_relative_eq!(law.cov().clone(), centered.transpose() * &centered / 120.0, epsilon = 1e-12);
    assert!(res.converged);
    assert!(res.iterations() <= 2);
}

#[test]
fn separated_fit_recovers_slopes() {
    let truth = separated_model();
    let d = sample(&truth, 300, 2024).unwrap();
    let res = fit(&d, 2, ModelKind::Jmr, &FitConfig::default().with_seed(1)).unwrap();
    let [b0, b1] = aligned_slopes(&res.model, &truth);
    let tb = |k: usize| truth.component(k).regression.as_ref().unwrap().beta.clone();
    assert!((b0 - tb(0)).amax() < 3.0 * 0.03);
    assert!((b1 - tb(1)).amax() < 3.0 * 0.03);
    for w in res.loglik_trace.windows(2) {
        assert!(w[1] >= w[0] - ASCENT_SLACK);
    }
}

#[test]
fn fit_is_bit_identical_across_runs() {
    let d = sample(&separated_model(), 200, 77).unwrap();
    let cfg = FitConfig::default().with_seed(42);
    let a = fit(&d, 2, ModelKind::Jmr, &cfg).unwrap();
    let b = fit(&d, 2, ModelKind::Jmr, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn all_restarts_collapsing_fails() {
    let d = sample(&separated_model(), 12, 1).unwrap();
    let err = fit(&d, 4, ModelKind::Jmr, &FitConfig::default()).unwrap_err();
    assert!(matches!(err, Error::FitFailed { restarts: 10, .. }), "{err:?}");
}

#[test]
fn gmm_k1_moments() {
    let d = sample(&separated_model(), 50, 9).unwrap();
    let res = fit_gmm_covariate(&d.x, 1, &FitConfig::default()).unwrap();
    let law = res.model.component(0).covariate.as_ref().unwrap();
    let mean = d.x.row_mean().transpose();
    assert_relative_eq!(law.mean().clone(), mean, epsilon = 1e-12);
}

#[test]
fn gmm_far_clusters_are_recovered() {
    let m = MixtureModel::new(
        ModelKind::Jmr,
        vec![0.5, 0.5],
        vec![
            jmr_component(0.0, &[1.0, 0.0], 1.0, &[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]),
            jmr_component(0.0, &[1.0, 0.0], 1.0, &[10.0, 0.0], &[1.0, 0.0, 0.0, 1.0]),
        ],
    )
    .unwrap();
    let d = sample(&m, 200, 4).unwrap();
    let res = fit_gmm_covariate(&d.x, 2, &FitConfig::default()).unwrap();
    assert!(mcr2(&res.tau.hard_labels(), d.truth.as_ref().unwrap()) < 0.01);
}

/// Three EM iterations of a 1-d two-component Gaussian mixture, by hand.
#[test]
fn gmm_three_iteration_trace_oracle() {
    let xs = [-2.1, -1.4, -0.3, 0.9, 1.8, 2.6];
    let d = Dataset::new(DVector::zeros(6), DMatrix::from_row_slice(6, 1, &xs), None, None).unwrap();
    let mut tau: Vec<[f64; 2]> = vec![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]];
    let mut r = Responsibilities::from_labels(&[0, 0, 0, 1, 1, 1], 2).unwrap();
    for _ in 0..3 {
        let mut pi = [0.0; 2];
        let mut mu = [0.0; 2];
        let mut var = [0.0; 2];
        for k in 0..2 {
            let nk: f64 = tau.iter().map(|t| t[k]).sum();
            pi[k] = nk / 6.0;
            mu[k] = tau.iter().zip(&xs).map(|(t, x)| t[k] * x).sum::<f64>() / nk;
            var[k] = tau.iter().zip(&xs).map(|(t, x)| t[k] * (x - mu[k]).powi(2)).sum::<f64>() / nk;
        }
        let m = mstep(&r, &d, ModelKind::Gmm, &Floors::default(), 0.5).unwrap();
        for k in 0..2 {
            let law = m.component(k).covariate.as_ref().unwrap();
            assert_relative_eq!(m.weights()[k], pi[k], epsilon = 1e-13);
            assert_relative_eq!(law.mean()[0], mu[k], epsilon = 1e-13);
            assert_relative_eq!(law.cov()[(0, 0)], var[k], epsilon = 1e-13);
        }
        for (t, x) in tau.iter_mut().zip(&xs) {
            let f: Vec<f64> = (0..2).map(|k| pi[k] * normal_logpdf(*x, mu[k], var[k]).exp()).collect();
            *t = [f[0] / (f[0] + f[1]), f[1] / (f[0] + f[1])];
        }
        r = estep(&m, &d).unwrap();
        for (i, t) in tau.iter().enumerate() {
            assert_relative_eq!(r.matrix()[(i, 0)], t[0], epsilon = 1e-12);
        }
    }
}

#[test]
fn mbc_on_separated_groups_matches_per_group_ols() {
    let truth = separated_model();
    let d = sample(&truth, 200, 31).unwrap();
    let labels = d.truth.clone().unwrap();
    let mbc = fit_mbc(&d, 2, &FitConfig::default()).unwrap();
    assert_eq!(mcr2(&mbc.labels, &labels), 0.0);
    for c in 0..2 {
        let idx: Vec<usize> = (0..d.n()).filter(|&i| mbc.labels[i] == c).collect();
        let ols = fit_ols(&d.select(&idx)).unwrap();
        let reg = mbc.model.component(c).regression.as_ref().unwrap();
        assert_relative_eq!(reg.beta, ols.beta, epsilon = 1e-12);
        assert_relative_eq!(reg.alpha, ols.alpha, epsilon = 1e-12);
    }
}

#[test]
fn mbc_on_homogeneous_covariates_is_uninformative() {
    let d = sample(&homogeneous_model(), 300, 12).unwrap();
    let mbc = fit_mbc(&d, 2, &FitConfig::default()).unwrap();
    let rate = mcr2(&mbc.labels, d.truth.as_ref().unwrap());
    assert!(rate > 0.3, "{rate}");
}

#[test]
fn mbc_assignments_match_posterior_argmax() {
    let xs = [-3.0, -2.5, -2.2, -1.9, 1.7, 2.0, 2.4, 3.1, -2.8, -2.0, 2.2, 2.9];
    let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| 0.5 * x + 0.1 * (i as f64).sin()).collect();
    let d = Dataset::new(DVector::from_vec(ys), DMatrix::from_row_slice(12, 1, &xs), None, None).unwrap();
    let mbc = fit_mbc(&d, 2, &FitConfig::default()).unwrap();
    let g = &mbc.gmm.model;
    for (i, x) in xs.iter().enumerate() {
        let f: Vec<f64> = (0..2)
            .map(|k| {
                let law = g.component(k).covariate.as_ref().unwrap();
                g.weights()[k] * normal_logpdf(*x, law.mean()[0], law.cov()[(0, 0)]).exp()
            })
            .collect();
        let want = if f[1] > f[0] { 1 } else { 0 };
        assert_eq!(mbc.labels[i], want);
        let post = posterior_weights(g, &DVector::from_element(1, *x)).unwrap();
        assert_relative_eq!(post[0], f[0] / (f[0] + f[1]), epsilon = 1e-12);
    }
}

#[test]
fn mbc_small_cluster_is_degenerate() {
    let xs = [-10.0, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
    let d = Dataset::new(
        DVector::from_fn(10, |i, _| i as f64),
        DMatrix::from_row_slice(10, 1, &xs),
        None,
        None,
    )
    .unwrap();
    let cfg = FitConfig {
        min_effective_weight: Some(0.5),
        ..FitConfig::default()
    };
    assert!(matches!(fit_mbc(&d, 2, &cfg), Err(Error::DegenerateCluster { .. }) | Err(Error::FitFailed { .. })));
}

#[test]
fn ols_examples() {
    // exact line
    let d = Dataset::new(
        DVector::from_row_slice(&[1.0, 3.0, 5.0, 7.0]),
        DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]),
        None,
        None,
    )
    .unwrap();
    let o = fit_ols(&d).unwrap();
    assert!(o.sigma2 < 1e-24);
    assert_relative_eq!(o.beta[0], 2.0, epsilon = 1e-12);

    // three points, closed-form slope = Sxy/Sxx
    let xs = [0.5, 1.7, 3.0];
    let ys = [1.2, 0.4, 2.9];
    let d = Dataset::new(DVector::from_row_slice(&ys), DMatrix::from_row_slice(3, 1, &xs), None, None).unwrap();
    let o = fit_ols(&d).unwrap();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    assert_relative_eq!(o.beta[0], sxy / sxx, epsilon = 1e-12);
    assert_relative_eq!(o.alpha, my - sxy / sxx * mx, epsilon = 1e-12);

    // intercept only
    let d = Dataset::new(DVector::from_row_slice(&ys), DMatrix::zeros(3, 0), None, None).unwrap();
    assert_relative_eq!(fit_ols(&d).unwrap().alpha, my, epsilon = 1e-14);

    // rank deficient
    let d = Dataset::new(DVector::from_row_slice(&ys), DMatrix::from_row_slice(3, 1, &[1.0; 3]), None, None).unwrap();
    assert!(fit_ols(&d).is_err());
}

#[test]
fn fixed_point_from_truth_at_large_n() {
    let truth = separated_model();
    let d = sample(&truth, 100_000, 55).unwrap();
    let tau = estep(&truth, &d).unwrap();
    let m = mstep(&tau, &d, ModelKind::Jmr, &Floors::default(), 4.0).unwrap();
    for k in 0..2 {
        let got = &m.component(k).regression.as_ref().unwrap().beta;
        let want = &truth.component(k).regression.as_ref().unwrap().beta;
        assert!((got - want).amax() < 0.05);
    }
}

#[test]
fn zero_padded_invariant_columns_change_nothing() {
    let d = sample(&separated_model(), 250, 13).unwrap();
    let padded = Dataset::new(d.y.clone(), d.x.clone(), Some(DMatrix::zeros(250, 1)), None).unwrap();
    let cfg = FitConfig::default().with_seed(6);
    let a = fit(&d, 2, ModelKind::Jmr, &cfg).unwrap();
    let b = fit(&padded, 2, ModelKind::Jmr, &cfg).unwrap();
    assert_eq!(b.model.q(), 1);
    for k in 0..2 {
        let (ra, rb) = (
            a.model.component(k).regression.as_ref().unwrap(),
            b.model.component(k).regression.as_ref().unwrap(),
        );
        assert!((ra.alpha - rb.alpha).abs() < 1e-8);
        assert!((&ra.beta - &rb.beta).amax() < 1e-8);
        assert!((ra.sigma2 - rb.sigma2).abs() < 1e-8);
        assert!((a.model.weights()[k] - b.model.weights()[k]).abs() < 1e-8);
        let (ga, gb) = (
            a.model.component(k).covariate.as_ref().unwrap(),
            b.model.component(k).covariate.as_ref().unwrap(),
        );
        assert!((ga.mean() - gb.mean()).amax() < 1e-8);
        assert!((ga.cov() - gb.cov()).amax() < 1e-8);
    }
}

#[test]
fn bic_selects_one_component_for_homogeneous_data() {
    let one = MixtureModel::new(
        ModelKind::Jmr,
        vec![1.0],
        vec![jmr_component(0.5, &[1.0, -1.0], 0.25, &[0.0, 0.0], &[1.0, 0.3, 0.3, 1.0])],
    )
    .unwrap();
    let hits = (0..50u64)
        .filter(|&s| {
            let d = sample(&one, 300, 1000 + s).unwrap();
            select_k(&d, 3, ModelKind::Jmr, &FitConfig::default().with_seed(s)).unwrap().k_hat == 1
        })
        .count();
    assert!(hits >= 45, "{hits}/50");
}

#[test]
fn bic_selects_two_components_for_separated_data() {
    let hits = (0..50u64)
        .filter(|&s| {
            let d = sample(&separated_model(), 300, 2000 + s).unwrap();
            select_k(&d, 3, ModelKind::Jmr, &FitConfig::default().with_seed(s)).unwrap().k_hat == 2
        })
        .count();
    assert!(hits >= 48, "{hits}/50");
}

#[test]
fn select_k_single_candidate() {
    let d = sample(&separated_model(), 60, 1).unwrap();
    let sel = select_k(&d, 1, ModelKind::Omr, &FitConfig::default()).unwrap();
    assert_eq!(sel.k_hat, 1);
    assert!(select_k(&d, 0, ModelKind::Omr, &FitConfig::default()).is_err());
}

fn slope_rmse(n: usize, reps: u64, kind: ModelKind, comp: usize, coord: usize) -> f64 {
    let truth = separated_model();
    let target = truth.component(comp).regression.as_ref().unwrap().beta[coord];
    let se: f64 = (0..reps)
        .map(|r| {
            let d = sample(&truth, n, 50_000 + r).unwrap();
            let res = fit(&d, 2, kind, &FitConfig::default().with_seed(r)).unwrap();
            let slopes = aligned_slopes(&res.model, &truth);
            (slopes[comp][coord] - target).powi(2)
        })
        .sum();
    (se / reps as f64).sqrt()
}

#[test]
fn jmr_slope_rmse_scales_like_root_n() {
    let ratio = slope_rmse(300, 200, ModelKind::Jmr, 0, 1) / slope_rmse(100, 200, ModelKind::Jmr, 0, 1);
    assert!((0.45..=0.72).contains(&ratio), "{ratio}");
}

// OMR is misspecified under JMR data with separated covariates; observed
// RMSE of β₁₂ is about 0.10 at both n=100 and n=300, and the β₂₂ estimate
// drifts toward ~1.7 as n grows. Kept as a probe, run with --ignored.
#[test]
#[ignore = "probe of OMR consistency under JMR data; does not hold for this design"]
fn omr_slope_rmse_shrinks_with_n() {
    let small = slope_rmse(100, 100, ModelKind::Omr, 0, 1);
    let large = slope_rmse(300, 100, ModelKind::Omr, 0, 1);
    assert!(large < small, "{large} vs {small}");
}

#[test]
fn constant_response_is_rejected() {
    let d = Dataset::new(DVector::from_element(30, 1.5), DMatrix::from_fn(30, 1, |i, _| i as f64), None, None).unwrap();
    for kind in [ModelKind::Jmr, ModelKind::Omr] {
        assert!(matches!(fit(&d, 2, kind, &FitConfig::default()), Err(Error::DegenerateResponse)));
    }
}
