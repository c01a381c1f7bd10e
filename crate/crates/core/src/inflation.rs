//! Closed-form inflation pricing: terminal law of the index, ZC options and
//! swaps, forward index and real bonds, year-on-year forwards and options,
//! and the Poisson mixture for jumps in the index.

use serde::{Deserialize, Serialize};

use crate::ctcb::Model;
use crate::error::{invalid, Result};
use crate::ir_pricing::{black_lognormal, LognormalLaw, OptionKind};
use crate::math::{axpby, dot, integrate};

/// The g-functions for a payoff at `big_t` priced under the `t_star`-forward measure.
#[derive(Debug, Clone, Copy)]
pub struct GBundle<'a> {
    pub model: &'a Model,
    pub t: f64,
    pub big_t: f64,
    pub t_star: f64,
    /// m_I(t), the expected-inflation state at valuation time.
    pub m_i_t: f64,
}

impl<'a> GBundle<'a> {
    pub fn new(model: &'a Model, t: f64, big_t: f64, t_star: f64, m_i_t: f64) -> Result<Self> {
        if !(t <= big_t && big_t <= t_star) {
            return Err(invalid("need t <= T <= T*"));
        }
        Ok(Self { model, t, big_t, t_star, m_i_t })
    }

    /// lambda(s) - sigma_P(s, T*).
    fn shift(&self, s: f64) -> Vec<f64> {
        let f = &self.model.funcs;
        axpby(1.0, f.lambda.at(s), -1.0, &self.model.bond_vol(s, self.t_star))
    }

    pub fn g1(&self, s: f64) -> f64 {
        -dot(self.model.funcs.s_i.at(s), &self.shift(s))
    }

    pub fn g2(&self, s: f64) -> f64 {
        let f = &self.model.funcs;
        f.a_i.at(s) - dot(f.b_i.at(s), &self.shift(s))
    }

    pub fn g3(&self, s: f64) -> f64 {
        let si = self.model.funcs.s_i.at(s);
        let shift = self.shift(s);
        let f = &self.model.funcs;
        let g1 = -dot(si, &shift);
        let g2 = f.a_i.at(s) - dot(f.b_i.at(s), &shift);
        self.m_i_t + (self.big_t - s) * g2 + g1 - 0.5 * dot(si, si)
    }

    pub fn g4(&self, s: f64) -> Vec<f64> {
        let f = &self.model.funcs;
        axpby(self.big_t - s, f.b_i.at(s), 1.0, f.s_i.at(s))
    }

    pub fn g5(&self, s: f64) -> f64 {
        let g4 = self.g4(s);
        self.g3(s) + 0.5 * dot(&g4, &g4) - self.m_i_t
    }
}

/// log I(T)/I(t) under the T-forward measure.
pub fn zc_log_moments(model: &Model, t: f64, big_t: f64, m_i_t: f64) -> Result<LognormalLaw> {
    let g = GBundle::new(model, t, big_t, big_t, m_i_t)?;
    let m = integrate(t, big_t, model.dt, |s| g.g3(s));
    let v2 = integrate(t, big_t, model.dt, |s| {
        let x = g.g4(s);
        dot(&x, &x)
    });
    Ok(LognormalLaw { m, v: v2.max(0.0).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionPrice {
    pub undiscounted: f64,
    pub discounted: f64,
}

/// Strike factor (1+K)^(T-t).
pub fn zc_strike_factor(k: f64, tau: f64) -> Result<f64> {
    if !(k > -1.0) {
        return Err(invalid("inflation strike must exceed -100%"));
    }
    Ok((1.0 + k).powf(tau))
}

/// ZC inflation cap (call) or floor (put) paying (omega (I(T)/I(t) - (1+K)^(T-t)))^+ at T.
pub fn zc_option_from_law(law: LognormalLaw, tau: f64, k: f64, kind: OptionKind, df: f64) -> Result<OptionPrice> {
    let u = black_lognormal(law, zc_strike_factor(k, tau)?, kind)?;
    Ok(OptionPrice { undiscounted: u, discounted: df * u })
}

pub fn zc_option(model: &Model, t: f64, big_t: f64, k: f64, kind: OptionKind, m_i_t: f64, df: f64) -> Result<OptionPrice> {
    let law = zc_log_moments(model, t, big_t, m_i_t)?;
    zc_option_from_law(law, big_t - t, k, kind, df)
}

/// Breakeven making the ZC swap worth zero: (1+K)^(T-t) = E^T[I(T)/I(t)].
pub fn zciis_fair_strike(model: &Model, t: f64, big_t: f64, m_i_t: f64) -> Result<f64> {
    if !(big_t > t) {
        return Err(invalid("swap maturity must follow valuation time"));
    }
    let law = zc_log_moments(model, t, big_t, m_i_t)?;
    Ok(fair_strike_from_law(law, big_t - t))
}

pub fn fair_strike_from_law(law: LognormalLaw, tau: f64) -> f64 {
    ((law.m + 0.5 * law.v * law.v) / tau).exp() - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardIndex {
    pub index: f64,
    pub real_bond: f64,
}

/// Forward index I^(t,T) and real bond P^r(t,T) given P(t,T).
pub fn forward_index_and_real_bond(model: &Model, t: f64, big_t: f64, i_t: f64, m_i_t: f64, df: f64) -> Result<ForwardIndex> {
    if !(i_t > 0.0) {
        return Err(invalid("index level must be positive"));
    }
    let law = zc_log_moments(model, t, big_t, m_i_t)?;
    let growth = law.forward();
    Ok(ForwardIndex { index: i_t * growth, real_bond: df * growth })
}

/// Volatility of the forward index I^(u,T): s_I(u) + b_I(u)(T - u).
pub fn forward_index_vol(model: &Model, u: f64, big_t: f64) -> Vec<f64> {
    let f = &model.funcs;
    axpby(1.0, f.s_i.at(u), big_t - u, f.b_i.at(u))
}

/// Convexity integral of the year-on-year forward over [t, Tj].
pub fn yoy_convexity(model: &Model, t: f64, tj: f64, ti: f64) -> f64 {
    integrate(t, tj, model.dt, |u| {
        let sj = forward_index_vol(model, u, tj);
        let si = forward_index_vol(model, u, ti);
        let dp = axpby(1.0, &model.bond_vol(u, tj), -1.0, &model.bond_vol(u, ti));
        dot(&dp, &sj) + dot(&sj, &sj) - dot(&si, &sj)
    })
}

/// E^{T_i}[I(Ti)/I(Tj)] seen from t: ratio of forward indices times the
/// convexity correction.
pub fn yoy_forward(model: &Model, t: f64, tj: f64, ti: f64, m_i_t: f64) -> Result<f64> {
    if !(t <= tj && tj < ti) {
        return Err(invalid("need t <= Tj < Ti"));
    }
    let fi = zc_log_moments(model, t, ti, m_i_t)?.forward();
    let fj = zc_log_moments(model, t, tj, m_i_t)?.forward();
    Ok(fi / fj * yoy_convexity(model, t, tj, ti).exp())
}

/// Law of log I(Ti)/I(Tj) under the Ti-forward measure.
pub fn yoy_law(model: &Model, t: f64, tj: f64, ti: f64, m_i_t: f64) -> Result<LognormalLaw> {
    let fwd = yoy_forward(model, t, tj, ti, m_i_t)?;
    let d = ti - tj;
    let before = integrate(t, tj, model.dt, |u| {
        let b = model.funcs.b_i.at(u);
        d * d * dot(b, b)
    });
    let after = integrate(tj, ti, model.dt, |u| {
        let s = forward_index_vol(model, u, ti);
        dot(&s, &s)
    });
    let v2 = (before + after).max(0.0);
    Ok(LognormalLaw { m: fwd.ln() - 0.5 * v2, v: v2.sqrt() })
}

/// YoY caplet (call) or floorlet (put) paying (omega (I(Ti)/I(Tj) - (1+K)))^+ at Ti.
#[allow(clippy::too_many_arguments)]
pub fn yoy_option(model: &Model, t: f64, tj: f64, ti: f64, k: f64, kind: OptionKind, m_i_t: f64, df: f64) -> Result<OptionPrice> {
    if !(k > -1.0) {
        return Err(invalid("inflation strike must exceed -100%"));
    }
    let law = yoy_law(model, t, tj, ti, m_i_t)?;
    let u = black_lognormal(law, 1.0 + k, kind)?;
    Ok(OptionPrice { undiscounted: u, discounted: df * u })
}

/// Jumps in the index: Poisson intensity `h`, lognormal jump sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpSpec {
    pub h: f64,
    pub mu_j: f64,
    pub delta_j: f64,
    #[serde(default = "default_tail")]
    pub tail_tol: f64,
}

fn default_tail() -> f64 {
    1e-12
}

impl JumpSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.h >= 0.0 && self.delta_j >= 0.0 && self.tail_tol > 0.0) {
            return Err(invalid("jump spec needs h >= 0, delta_J >= 0, tail tolerance > 0"));
        }
        Ok(())
    }

    /// Mean relative jump size k = E[J - 1].
    pub fn k(&self) -> f64 {
        (self.mu_j + 0.5 * self.delta_j * self.delta_j).exp() - 1.0
    }

    /// Poisson weights for counts 0..=N with the truncated tail below tolerance.
    pub fn weights(&self, tau: f64) -> Vec<f64> {
        let lam = self.h * tau;
        let mut w = vec![(-lam).exp()];
        let mut cum = w[0];
        let mut n = 0usize;
        while 1.0 - cum > self.tail_tol && n < 10_000 {
            n += 1;
            let next = w[n - 1] * lam / n as f64;
            w.push(next);
            cum += next;
            if next == 0.0 && (n as f64) > lam {
                break;
            }
        }
        w
    }

    /// Conditional law given n jumps.
    pub fn conditional_law(&self, law: LognormalLaw, tau: f64, n: usize) -> LognormalLaw {
        let nf = n as f64;
        let m = law.m - self.h * self.k() * tau + nf * (self.mu_j + 0.5 * self.delta_j * self.delta_j) - 0.5 * nf * self.delta_j * self.delta_j;
        LognormalLaw { m, v: (law.v * law.v + nf * self.delta_j * self.delta_j).sqrt() }
    }
}

/// Undiscounted ZC option under the jump mixture.
pub fn merton_zc_option_from_law(law: LognormalLaw, tau: f64, k: f64, kind: OptionKind, jumps: &JumpSpec) -> Result<f64> {
    jumps.validate()?;
    let strike = zc_strike_factor(k, tau)?;
    let mut acc = 0.0;
    for (n, w) in jumps.weights(tau).into_iter().enumerate() {
        acc += w * black_lognormal(jumps.conditional_law(law, tau, n), strike, kind)?;
    }
    Ok(acc)
}

pub fn merton_zc_option(model: &Model, t: f64, big_t: f64, k: f64, kind: OptionKind, m_i_t: f64, jumps: &JumpSpec) -> Result<f64> {
    let law = zc_log_moments(model, t, big_t, m_i_t)?;
    merton_zc_option_from_law(law, big_t - t, k, kind, jumps)
}

/// Mixture forward: sum of weights times each conditional forward.
pub fn merton_forward(law: LognormalLaw, tau: f64, jumps: &JumpSpec) -> f64 {
    jumps.weights(tau).into_iter().enumerate().map(|(n, w)| w * jumps.conditional_law(law, tau, n).forward()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctcb::{ModelFunctions, StructuralParams};
    use crate::step::{ScalarStep, VectorStep};

    fn model(b: f64, s: f64) -> Model {
        let mut f = ModelFunctions::zeros(3);
        f.b_i = VectorStep::constant(vec![b; 3]);
        f.s_i = VectorStep::constant(vec![s; 3]);
        f.a_i = ScalarStep::constant(0.005);
        Model::new(StructuralParams { delta: 0.05, omega: 5.0, h_x: 2.5, h_p: 1.75, x_bar: 0.02, p_bar: 0.02 }, f)
    }

    #[test]
    fn variance_matches_polynomial_integral() {
        let (b, s) = (0.003, 0.002);
        let m = model(b, s);
        let law = zc_log_moments(&m, 0.0, 7.0, 0.0).unwrap();
        // n * integral_0^T ((T-u) b + s)^2 du
        let t: f64 = 7.0;
        let exact = 3.0 * (b * b * t.powi(3) / 3.0 + b * s * t * t + s * s * t);
        assert!((law.v * law.v - exact).abs() < 1e-8);
    }

    #[test]
    fn zero_model_is_degenerate() {
        let m = Model::new(model(0.0, 0.0).structural, ModelFunctions::zeros(3));
        let law = zc_log_moments(&m, 0.0, 5.0, 0.0).unwrap();
        assert_eq!(law.m, 0.0);
        assert_eq!(law.v, 0.0);
        assert_eq!(zciis_fair_strike(&m, 0.0, 5.0, 0.0).unwrap(), 0.0);
        assert!((yoy_forward(&m, 0.0, 2.0, 3.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fair_strike_inversion() {
        let law = LognormalLaw { m: 0.02 * 3.0, v: 0.0 };
        assert!((fair_strike_from_law(law, 3.0) - (0.02f64.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn g4_at_maturity_is_s_i() {
        let m = model(0.003, 0.002);
        let g = GBundle::new(&m, 0.0, 4.0, 4.0, 0.0).unwrap();
        assert_eq!(g.g4(4.0), vec![0.002; 3]);
    }

    #[test]
    fn poisson_weights_sum_to_one() {
        let j = JumpSpec { h: 0.5, mu_j: -0.05, delta_j: 0.1, tail_tol: 1e-12 };
        let w: f64 = j.weights(10.0).iter().sum();
        assert!((w - 1.0).abs() < 1e-12);
        let none = JumpSpec { h: 0.0, ..j };
        assert_eq!(none.weights(10.0), vec![1.0]);
    }
}
