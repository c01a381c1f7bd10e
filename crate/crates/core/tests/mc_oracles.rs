use ctcb::ctcb::{Model, ModelFunctions, StructuralParams};
use ctcb::inflation::{forward_index_vol, yoy_forward, yoy_option, zc_log_moments, zc_option};
use ctcb::ir_pricing::OptionKind;
use ctcb::math::{dot, integrate};
use ctcb::monte_carlo::{price_mc, simulate, Measure, SimConfig};
use ctcb::step::{ScalarStep, VectorStep};

fn structural() -> StructuralParams {
    StructuralParams { delta: 0.05, omega: 5.0, h_x: 2.5, h_p: 1.75, x_bar: 0.02, p_bar: 0.02 }
}

/// Rich model: every volatility active and bond vols derived from the model.
fn rich_model() -> Model {
    let mut f = ModelFunctions::zeros(3);
    f.a_i = ScalarStep::annual(vec![0.004, 0.002, -0.001, 0.0]);
    f.a_x = ScalarStep::constant(-0.001);
    f.b_i = VectorStep::annual(vec![vec![0.002, -0.001, 0.001], vec![0.003, 0.0, -0.002]]);
    f.b_x = VectorStep::constant(vec![-0.004, 0.002, 0.001]);
    f.s_i = VectorStep::constant(vec![0.004, 0.002, -0.003]);
    f.s_x = VectorStep::constant(vec![0.01, 0.0, 0.0]);
    f.lambda = VectorStep::constant(vec![0.1, -0.2, 0.05]);
    f.m_i0 = 0.02;
    f.m_x0 = -0.03;
    Model::new(structural(), f)
}

fn within(mc: f64, se: f64, cf: f64, k: f64) -> bool {
    (mc - cf).abs() <= k * se.max(1e-12)
}

#[test]
fn log_index_moments_match_closed_form() {
    let m = rich_model();
    for big_t in [3.0, 7.0] {
        let law = zc_log_moments(&m, 0.0, big_t, m.funcs.m_i0).unwrap();
        let paths = simulate(&m, &SimConfig::annual(20_000, big_t as usize, 11, Measure::Forward(big_t))).unwrap();
        let logs: Vec<f64> = paths.iter().map(|p| p.index(big_t).unwrap().ln()).collect();
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se_mean = (var / n).sqrt();
        assert!(within(mean, se_mean, law.m, 3.5), "T={big_t}: mean {mean} vs {}", law.m);
        let se_var = var * (2.0 / (n - 1.0)).sqrt();
        assert!(within(var, se_var, law.v * law.v, 3.5), "T={big_t}: var {var} vs {}", law.v * law.v);
    }
}

#[test]
fn zc_cap_matches_closed_form() {
    let m = rich_model();
    for (big_t, k) in [(5.0, 0.0), (5.0, 0.02), (8.0, 0.01)] {
        let cf = zc_option(&m, 0.0, big_t, k, OptionKind::Call, m.funcs.m_i0, 1.0).unwrap().undiscounted;
        let paths = simulate(&m, &SimConfig::annual(20_000, big_t as usize, 5, Measure::Forward(big_t))).unwrap();
        let strike = (1.0f64 + k).powf(big_t);
        let r = price_mc(&paths, big_t, 1.0, |p| Ok((p.index(big_t)? - strike).max(0.0))).unwrap();
        assert!(within(r.undiscounted, r.undiscounted_se, cf, 3.5), "T={big_t} K={k}: {} +- {} vs {cf}", r.undiscounted, r.undiscounted_se);
    }
}

#[test]
fn yoy_forward_convexity_sign() {
    let mut m = rich_model();
    m.funcs.b_x = VectorStep::constant(vec![-0.03, 0.015, 0.01]);
    m.funcs.s_i = VectorStep::constant(vec![0.01, 0.004, -0.003]);
    let (tj, ti) = (4.0, 5.0);
    let cf = yoy_forward(&m, 0.0, tj, ti, m.funcs.m_i0).unwrap();
    let paths = simulate(&m, &SimConfig::annual(40_000, 5, 3, Measure::Forward(ti))).unwrap();
    let r = price_mc(&paths, ti, 1.0, |p| p.index_ratio(tj, ti)).unwrap();
    assert!(within(r.undiscounted, r.undiscounted_se, cf, 3.5), "{} +- {} vs {cf}", r.undiscounted, r.undiscounted_se);
    // the bond-vol term with the opposite orientation is rejected by the simulation
    let cross = integrate(0.0, tj, m.dt, |u| {
        let dp: Vec<f64> = m.bond_vol(u, tj).iter().zip(m.bond_vol(u, ti)).map(|(a, b)| a - b).collect();
        dot(&dp, &forward_index_vol(&m, u, tj))
    });
    let flipped = cf * (-2.0 * cross).exp();
    assert!((r.undiscounted - flipped).abs() > 8.0 * r.undiscounted_se, "flipped {flipped} vs {}", r.undiscounted);
    let opt = yoy_option(&m, 0.0, tj, ti, 0.01, OptionKind::Call, m.funcs.m_i0, 1.0).unwrap().undiscounted;
    let r = price_mc(&paths, ti, 1.0, |p| Ok((p.index_ratio(tj, ti)? - 1.01).max(0.0))).unwrap();
    assert!(within(r.undiscounted, r.undiscounted_se, opt, 3.5), "{} +- {} vs {opt}", r.undiscounted, r.undiscounted_se);
}
