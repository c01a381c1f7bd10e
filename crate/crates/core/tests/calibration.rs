use std::path::PathBuf;

use ctcb::calibration::{calibrate, fit_nominal, reprice, synthetic_snapshot, CalibConfig, Instrument, Strategy, VolMagnitudes};
use ctcb::ctcb::{Model, ModelFunctions, StructuralParams, VarianceWeights};
use ctcb::inflation::zciis_fair_strike;
use ctcb::market_data::{Format, MarketSnapshot, NominalCurve};
use ctcb::math::{dot, integrate, norm};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn snapshot() -> MarketSnapshot {
    MarketSnapshot::load(&data("market_2012-12-07.csv"), Format::Csv).unwrap()
}

fn structural() -> StructuralParams {
    serde_json::from_str(&std::fs::read_to_string(data("structural_2012.json")).unwrap()).unwrap()
}

#[test]
fn nominal_pillars_reprice_exactly() {
    let snap = snapshot();
    let dual = fit_nominal(&snap, &structural(), 0.01).unwrap();
    for &m in &snap.nominal.maturities {
        assert!((dual.p0(m) - snap.nominal.df(m)).abs() < 1e-14, "pillar {m}");
    }
    for delta in [0.025, 0.075] {
        let s = StructuralParams { delta, ..structural() };
        let dual = fit_nominal(&snap, &s, 0.01).unwrap();
        for &m in &snap.nominal.maturities {
            assert!((dual.p0(m) - snap.nominal.df(m)).abs() < 1e-14);
        }
    }
}

#[test]
fn market_calibration_meets_threshold() {
    let snap = snapshot();
    let res = calibrate(&snap, &structural(), &CalibConfig::default()).unwrap();
    assert_eq!(res.errors.len(), 40);
    assert!(res.max_abs_error < 1e-7, "max error {}", res.max_abs_error);
    // b_I keeps the configured constant norm in every bucket
    for &b in &res.magnitudes.b_i {
        assert!((b - 0.001).abs() < 1e-15);
    }
    let w = res.funcs.weights.clone().unwrap();
    w.check(3).unwrap();
    let c = res.correlations.achieved;
    assert!((c.rate_infl + 0.6).abs() < 0.05 && (c.rate_growth + 0.6).abs() < 0.05 && (c.infl_growth - 0.7).abs() < 0.05);
    // the reference 1y inflation row carries s_I with a norm near 0.0095
    assert!((res.magnitudes.s_i[0] - 0.0095).abs() < 0.001);
}

#[test]
fn stored_errors_equal_independent_reprice() {
    let snap = snapshot();
    let res = calibrate(&snap, &structural(), &CalibConfig::default()).unwrap();
    let again = reprice(&snap, &res.model()).unwrap();
    assert_eq!(again, res.errors);
    for e in &res.errors {
        assert_eq!(e.error, e.model - e.market);
    }
    let be = res.errors.iter().filter(|e| e.instrument == Instrument::Breakeven).count();
    assert_eq!(be, 10);
}

#[test]
fn calibration_is_deterministic() {
    let snap = snapshot();
    let a = calibrate(&snap, &structural(), &CalibConfig::default()).unwrap();
    let b = calibrate(&snap, &structural(), &CalibConfig::default()).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn both_strategies_reprice() {
    let snap = snapshot();
    for strategy in [Strategy::InflationFirst, Strategy::NominalFirst] {
        let cfg = CalibConfig { strategy, ..CalibConfig::default() };
        let res = calibrate(&snap, &structural(), &cfg).unwrap();
        assert!(res.max_abs_error < 1e-7, "{strategy:?}: {}", res.max_abs_error);
    }
}

#[test]
fn structural_shocks_recalibrate() {
    let snap = snapshot();
    let base = structural();
    for bump in [0.8, 1.2] {
        for s in [
            StructuralParams { delta: base.delta * bump, ..base },
            StructuralParams { h_p: base.h_p * bump, ..base },
            StructuralParams { h_x: base.h_x * bump, ..base },
        ] {
            let res = calibrate(&snap, &s, &CalibConfig::default()).unwrap();
            assert!(res.max_abs_error < 1e-7, "{s:?}: {}", res.max_abs_error);
        }
    }
}

#[test]
fn separability_of_inflation_option_quotes() {
    let snap = snapshot();
    let cfg = CalibConfig { target_correlations: false, ..CalibConfig::default() };
    let base = calibrate(&snap, &structural(), &cfg).unwrap();
    let k = 6;
    let mut bumped = snap.clone();
    bumped.quotes.atm_zc_infl_option_pv[k - 1] *= 1.02;
    let res = calibrate(&bumped, &structural(), &cfg).unwrap();
    assert!(res.max_abs_error < 1e-7);
    for j in 0..k - 1 {
        assert_eq!(res.magnitudes.s_i[j], base.magnitudes.s_i[j], "bucket {j} moved");
        assert_eq!(res.magnitudes.b_i[j], base.magnitudes.b_i[j]);
    }
    assert!(res.magnitudes.s_i[k - 1] > base.magnitudes.s_i[k - 1]);
}

fn synthetic_model() -> (Model, VarianceWeights, VolMagnitudes) {
    let s = structural();
    let w = VarianceWeights::reference();
    let mags = VolMagnitudes {
        b_i: vec![0.001; 10],
        b_x: (0..10).map(|k| 0.004 + 0.0004 * k as f64).collect(),
        s_i: (0..10).map(|k| 0.009 - 0.0003 * k as f64).collect(),
        s_x: vec![0.01; 10],
    };
    let mut f = ModelFunctions::zeros(3);
    mags.apply(&w, &mut f);
    f.a_i = ctcb::step::ScalarStep::annual((0..10).map(|k| 0.0005 - 0.0001 * k as f64).collect());
    (Model::new(s, f), w, mags)
}

#[test]
fn synthetic_round_trip() {
    let (model, w, mags) = synthetic_model();
    let curve = NominalCurve::new((1..=10).map(|k| k as f64).collect(), (1..=10).map(|k| 0.005 + 0.002 * k as f64).collect()).unwrap();
    let mut model = model;
    model.funcs.m_i0 = 0.02;
    let snap = synthetic_snapshot(&model, &curve, 10).unwrap();
    let cfg = CalibConfig { target_correlations: false, initial_weights: Some(w), abs_price_tol: 1e-14, ..CalibConfig::default() };
    let res = calibrate(&snap, &model.structural, &cfg).unwrap();
    assert!(res.max_abs_error < 1e-10, "max error {}", res.max_abs_error);
    for k in 0..10 {
        assert!((res.magnitudes.s_i[k] - mags.s_i[k]).abs() < 1e-10, "s_I bucket {k}");
        assert!((res.magnitudes.b_x[k] - mags.b_x[k]).abs() < 1e-10, "b_X bucket {k}");
    }
    // breakevens are linear in a_I, so the fair strikes come back to round-off
    for k in 1..=10 {
        let t = k as f64;
        let a = zciis_fair_strike(&res.model(), 0.0, t, res.funcs.m_i0).unwrap();
        assert!((a - snap.inflation.breakeven(t)).abs() < 1e-12);
    }
}

/// Left forward f(0, t-) from the curve by a backward difference.
fn forward_left(curve: &NominalCurve, t: f64) -> f64 {
    let h = 1e-7;
    (curve.df(t - h).ln() - curve.df(t).ln()) / h
}

#[test]
fn expected_short_rate_matches_hull_white() {
    let snap = snapshot();
    let s = structural();
    let res = calibrate(&snap, &s, &CalibConfig::default()).unwrap();
    let f = &res.funcs;
    let sig2 = |u: f64| {
        let num: Vec<f64> = f.b_x.at(u).iter().zip(f.b_i.at(u)).map(|(x, i)| -(s.h_x * x + s.h_p * i) / s.zeta(u)).collect();
        dot(&num, &num)
    };
    for k in 1..=10 {
        let t = k as f64;
        let m_i = f.m_i0 + integrate(0.0, t, 1e-3, |u| *f.a_i.at(u));
        let m_x = f.m_x0 + integrate(0.0, t, 1e-3, |u| *f.a_x.at(u));
        let from_drifts = s.short_rate_from_drifts(t, m_i, m_x);
        let b = |u: f64| (1.0 - (-s.delta * (t - u)).exp()) / s.delta;
        let hw = forward_left(&snap.nominal, t) + integrate(0.0, t, 1e-3, |u| sig2(u) * (-s.delta * (t - u)).exp() * b(u));
        assert!((from_drifts - hw).abs() < 1e-6, "t={t}: {from_drifts} vs {hw}");
    }
}

#[test]
fn reference_weights_have_unit_norm() {
    let raw = [[0.20285, 0.13219, 0.97024], [-0.95101, -0.02865, 0.30781], [0.14035, 0.10000, 0.98503], [0.85195, -0.07168, 0.51868]];
    for v in raw {
        assert!((norm(&v) - 1.0).abs() < 1e-4, "{v:?}");
    }
    let w = VarianceWeights::reference();
    w.check(3).unwrap();
    assert!((w.b_i[0] - 0.20285).abs() < 1e-4);
}

#[test]
fn config_round_trips_through_json() {
    let cfg = CalibConfig::default();
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(CalibConfig::from_json(&text).unwrap(), cfg);
    assert!(CalibConfig::from_json("{\"dim\": 0}").is_err());
    assert!(CalibConfig::from_json("{not json").is_err());
}
