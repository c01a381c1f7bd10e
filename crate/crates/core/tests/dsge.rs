use ctcb::dsge::{
    inflation_moments, nominal_df_approx, rate_inflation_cov, real_df_approx, rn_weight, short_rate_moments, simulate_dsge, DsgeMeasure, DsgeParams,
    Expectation, ExpectationPath, PeriodShocks, ShockSpec,
};
use ctcb::math::{mean_se, path_rng};
use rand_distr::{Distribution, StandardNormal};

fn params() -> DsgeParams {
    DsgeParams { sigma: 1.5, k: 0.05, delta_pi: 3.0, delta_x: 1.0, beta: 0.95, n_bar: 0.04, tau: vec![1.0], tau0: 1.0 }
}

fn setup() -> (ShockSpec, ExpectationPath) {
    (ShockSpec { periods: vec![PeriodShocks::gaussian(0.01, 0.02, 1e-4)] }, ExpectationPath { periods: vec![Expectation { ex: -0.01, ep: 0.025 }] })
}

/// Sample variance and the standard error of that estimate.
fn var_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let (m, _) = mean_se(xs);
    let c2: f64 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let c4: f64 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (c2, ((c4 - c2 * c2) / n).sqrt())
}

#[test]
fn moments_match_simulation() {
    let p = params();
    let (shocks, e) = setup();
    let sim = simulate_dsge(&p, &shocks, &e, 100_000, 21, DsgeMeasure::P).unwrap();
    let infl = sim.column(0, |s| s.p);
    let rate = sim.column(0, |s| s.n_next);
    for (xs, m) in [(&infl, inflation_moments(&p, &shocks, &e, 0).unwrap()), (&rate, short_rate_moments(&p, &shocks, &e, 0).unwrap())] {
        let (mean, se) = mean_se(xs);
        assert!((mean - m.mean).abs() < 3.0 * se, "mean {mean} vs {}", m.mean);
        let (v, vse) = var_and_se(xs);
        assert!((v - m.var).abs() < 3.0 * vse, "var {v} vs {}", m.var);
        assert_eq!(m.skew3, 0.0);
        assert!((m.kurt4 - 3.0 * m.var * m.var).abs() < 1e-12 * m.var * m.var);
    }
    let (mi, _) = mean_se(&infl);
    let (mr, _) = mean_se(&rate);
    let prods: Vec<f64> = infl.iter().zip(&rate).map(|(a, b)| (a - mi) * (b - mr)).collect();
    let (cov, cse) = mean_se(&prods);
    let exact = rate_inflation_cov(&p, &shocks, 0).unwrap();
    assert!((cov - exact).abs() < 3.0 * cse, "cov {cov} vs {exact}");
}

#[test]
fn discount_factors_match_simulated_payoffs() {
    let (shocks, e) = setup();
    for n_bar in [-0.05, 0.0, 0.02, 0.05] {
        let p = DsgeParams { n_bar, ..params() };
        let sim = simulate_dsge(&p, &shocks, &e, 100_000, 5, DsgeMeasure::Q).unwrap();
        let nominal: Vec<f64> = sim.column(0, |s| (-s.n_next).exp());
        let real: Vec<f64> = sim.column(0, |s| (-s.n_next + s.p).exp());
        let (mn, sn) = mean_se(&nominal);
        let (mr, sr) = mean_se(&real);
        let cn = nominal_df_approx(&p, &shocks, &e, 0).unwrap();
        let cr = real_df_approx(&p, &shocks, &e, 0).unwrap();
        assert!((mn - cn).abs() < 1e-3 && (mn - cn).abs() < 3.0 * sn.max(1e-15), "n_bar {n_bar}: {mn} vs {cn}");
        assert!((mr - cr).abs() < 1e-3 && (mr - cr).abs() < 3.0 * sr.max(1e-15), "n_bar {n_bar}: {mr} vs {cr}");
    }
}

#[test]
fn radon_nikodym_weight_has_unit_mean() {
    let mut shocks = PeriodShocks::gaussian(1.0, 1.0, 1.0);
    shocks.lambda = [0.1, 0.2, 0.3];
    let w: Vec<f64> = (0..200_000u64)
        .map(|j| {
            let mut rng = path_rng(3, j);
            let eps: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            rn_weight(eps, &shocks)
        })
        .collect();
    let (m, se) = mean_se(&w);
    assert!((m - 1.0).abs() < 3.0 * se, "{m} +- {se}");
}

#[test]
fn measure_change_shifts_the_simulated_means() {
    let p = params();
    let (mut shocks, e) = setup();
    shocks.periods[0].lambda = [0.0, 0.5, -0.3];
    let q = simulate_dsge(&p, &shocks, &e, 20_000, 9, DsgeMeasure::Q).unwrap();
    let pp = simulate_dsge(&p, &shocks, &e, 20_000, 9, DsgeMeasure::P).unwrap();
    let (mq, _) = mean_se(&q.column(0, |s| s.p));
    let (mp, _) = mean_se(&pp.column(0, |s| s.p));
    // same draws, so the difference is the deterministic wedge C lambda
    let k2 = p.k / (p.sigma + p.delta_x + p.k * p.delta_pi);
    let wedge = -k2 * 0.5 - 0.3;
    assert!((mq - mp - wedge).abs() < 1e-12, "{} vs {wedge}", mq - mp);
}
