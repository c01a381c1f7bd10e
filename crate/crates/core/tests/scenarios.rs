use std::path::PathBuf;

use ctcb::calibration::{calibrate, CalibConfig, CalibResult};
use ctcb::ctcb::StructuralParams;
use ctcb::error::Error;
use ctcb::ir_pricing::{CapKind, OptionKind};
use ctcb::market_data::{Format, MarketSnapshot};
use ctcb::monte_carlo::{simulate, Measure, SimConfig};
use ctcb::scenarios::{
    hedge_on_paths, inflation_delta, price_product, price_trade, refit_inflation_leg, run_stress, Condition, HedgeLeg, PathPayoff, Product,
    StressScenario, Trade, ONE_BP,
};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn setup() -> (MarketSnapshot, StructuralParams, CalibResult) {
    let snap = MarketSnapshot::load(&data("market_2012-12-07.csv"), Format::Csv).unwrap();
    let s: StructuralParams = serde_json::from_str(&std::fs::read_to_string(data("structural_2012.json")).unwrap()).unwrap();
    let res = calibrate(&snap, &s, &CalibConfig::default()).unwrap();
    (snap, s, res)
}

fn zc_cap() -> Trade {
    Trade::new("zc cap 10y 2%", Product::ZcOption { maturity: 10.0, strike: 0.02, kind: OptionKind::Call }, 1.0)
}

#[test]
fn refit_without_bump_is_identity() {
    let (snap, _, res) = setup();
    let m = res.model();
    let refit = refit_inflation_leg(&snap, &m).unwrap();
    assert_eq!(refit.funcs, m.funcs);
}

#[test]
fn bumped_breakevens_are_hit() {
    let (snap, _, res) = setup();
    let mut bumped = snap.clone();
    bumped.inflation = snap.inflation.shifted(ONE_BP);
    let refit = refit_inflation_leg(&bumped, &res.model()).unwrap();
    for k in 1..=10 {
        let t = k as f64;
        let fair = price_product(&refit, &bumped.nominal, &Product::Zciis { maturity: t, strike: bumped.inflation.breakeven(t) }).unwrap();
        assert!(fair.abs() < 1e-12, "{t}: {fair}");
    }
    // vols are untouched by the bump
    assert_eq!(refit.funcs.s_i, res.funcs.s_i);
    assert_eq!(refit.funcs.b_x, res.funcs.b_x);
}

#[test]
fn delta_of_a_cap_is_positive_and_of_a_floor_negative() {
    let (snap, _, res) = setup();
    let m = res.model();
    assert!(inflation_delta(&snap, &m, &zc_cap()).unwrap() > 0.0);
    let floor = Trade::new("floor", Product::ZcOption { maturity: 10.0, strike: 0.0, kind: OptionKind::Put }, 1.0);
    assert!(inflation_delta(&snap, &m, &floor).unwrap() < 0.0);
    // a ZC swap receiving inflation gains P(0,T) d(1+K)^T / dK per unit bump
    let swap = Trade::new("swap", Product::Zciis { maturity: 5.0, strike: 0.02 }, 1.0);
    let d = inflation_delta(&snap, &m, &swap).unwrap();
    let k = snap.inflation.breakeven(5.0);
    let expected = snap.nominal.df(5.0) * ((1.0 + k + ONE_BP).powi(5) - (1.0 + k).powi(5));
    assert!((d - expected).abs() < 1e-12, "{d} vs {expected}");
}

#[test]
fn stress_zero_shock_reproduces_base_and_delta_is_stable() {
    let (snap, s, res) = setup();
    let scenarios = vec![
        StressScenario { name: "none".into(), shocks: vec![] },
        StressScenario { name: "h_p".into(), shocks: vec!["h_p=0.5".parse().unwrap()] },
        StressScenario { name: "h_x".into(), shocks: vec!["h_x=0.5".parse().unwrap()] },
        StressScenario { name: "delta".into(), shocks: vec!["delta=20%".parse().unwrap()] },
    ];
    let rep = run_stress(&snap, &s, &CalibConfig::default(), &res, &scenarios, &[zc_cap()]).unwrap();
    assert_eq!(rep.rows.len(), 4);
    assert_eq!(rep.rows[0].pv, Some(rep.rows[0].base_pv));
    assert_eq!(rep.rows[0].delta, Some(rep.rows[0].base_delta));
    for r in &rep.rows {
        assert!(r.error.is_none());
        assert!(r.max_abs_error.unwrap() < 1e-7);
        assert!((r.delta.unwrap() - r.base_delta).abs() < 5e-5);
    }
    assert!(rep.to_csv().unwrap().lines().count() == 5);
}

#[test]
fn failing_scenario_is_reported_and_run_continues() {
    let (snap, s, res) = setup();
    let scenarios = vec![
        StressScenario { name: "bad".into(), shocks: vec!["delta=-100%".parse().unwrap()] },
        StressScenario { name: "ok".into(), shocks: vec![] },
    ];
    let rep = run_stress(&snap, &s, &CalibConfig::default(), &res, &scenarios, &[zc_cap()]).unwrap();
    assert!(rep.rows[0].error.is_some() && rep.rows[0].pv.is_none());
    assert!(rep.rows[1].error.is_none());
}

#[test]
fn caplet_products_price_on_the_dual() {
    let (snap, _, res) = setup();
    let m = res.model();
    let atm = snap.nominal.forward_rate(3.0, 4.0);
    let cap =
        price_trade(&m, &snap.nominal, &Trade::new("c", Product::Caplet { start: 3.0, end: 4.0, strike: atm, kind: CapKind::Caplet }, 1.0)).unwrap();
    assert!((cap - snap.quotes.atm_caplet_pv[2]).abs() < 1e-7);
    assert!(price_product(&m, &snap.nominal, &Product::Caplet { start: 3.0, end: 3.0, strike: atm, kind: CapKind::Caplet }).is_err());
}

fn hedge_fixture() -> (ctcb::monte_carlo::Paths, HedgeLeg, Vec<HedgeLeg>) {
    let (_, _, res) = setup();
    let paths = simulate(&res.model(), &SimConfig::annual(4000, 10, 17, Measure::Q)).unwrap();
    let client =
        HedgeLeg { name: "client".into(), payoff: PathPayoff::ZcOption { maturity: 10.0, strike: 0.0, kind: OptionKind::Put }, quantity: -1.0 };
    let cands = [0.0, 0.01, 0.02]
        .iter()
        .map(|&k| HedgeLeg {
            name: format!("floor {k}"),
            payoff: PathPayoff::CapFloor { maturity: 10, strike: k, kind: CapKind::Floorlet },
            quantity: 1.0,
        })
        .collect();
    (paths, client, cands)
}

#[test]
fn hedge_with_always_true_condition_uses_unconditional_values() {
    let (paths, client, cands) = hedge_fixture();
    let rep = hedge_on_paths(&paths, &client, &cands, &Condition::always(), 10.0).unwrap();
    assert_eq!(rep.selected, rep.total);
    assert!((rep.client_conditional - rep.client_pv).abs() < 1e-14);
    for c in &rep.candidates {
        assert!((c.conditional_payoff - c.premium).abs() < 1e-14);
        assert!((c.hedge_ratio + rep.client_pv / c.premium).abs() < 1e-10);
    }
}

#[test]
fn hedge_ranking_agrees_with_direct_conditional_means() {
    let (paths, client, cands) = hedge_fixture();
    let cond: Condition = "inflation(10) < 0".parse().unwrap();
    let rep = hedge_on_paths(&paths, &client, &cands, &cond, 10.0).unwrap();
    assert!(rep.selected > 0 && rep.selected < rep.total);
    let mut direct = Vec::new();
    for c in &cands {
        let (mut sel, mut all) = (Vec::new(), Vec::new());
        for p in paths.iter() {
            let v = c.payoff.discounted(&p).unwrap();
            all.push(v);
            if p.index(10.0).unwrap() < 1.0 {
                sel.push(v);
            }
        }
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        direct.push((c.name.clone(), mean(&sel) / mean(&all)));
    }
    direct.sort_by(|a, b| b.1.total_cmp(&a.1));
    let names: Vec<&str> = rep.candidates.iter().map(|c| c.name.as_str()).collect();
    let expect: Vec<&str> = direct.iter().map(|d| d.0.as_str()).collect();
    assert_eq!(names, expect);
    // with the calibrated negative rate-inflation correlation, low realised
    // inflation comes with higher forward rates
    for s in &rep.libor.stats[4..] {
        assert!(s.conditional_mean > s.unconditional_mean, "{}", s.name);
    }
}

#[test]
fn hedge_errors() {
    let (paths, client, cands) = hedge_fixture();
    let never: Condition = "inflation(10) < -0.9".parse().unwrap();
    assert!(matches!(hedge_on_paths(&paths, &client, &cands, &never, 10.0), Err(Error::Empty(_))));
    assert!(matches!(hedge_on_paths(&paths, &client, &[], &Condition::always(), 10.0), Err(Error::InvalidArgument(_))));
}
