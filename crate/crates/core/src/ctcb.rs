//! The continuous-time central-bank model: structural constants, model
//! functions, no-arbitrage relations and the Hull-White dual of the short rate.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, validation, Result};
use crate::market_data::NominalCurve;
use crate::math::{self, axpby, scale};
use crate::step::{ScalarStep, VectorStep};

/// Central-bank and economy constants. `Z(T) = exp(delta T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralParams {
    pub delta: f64,
    pub omega: f64,
    pub h_x: f64,
    pub h_p: f64,
    pub x_bar: f64,
    pub p_bar: f64,
}

impl StructuralParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.delta > 0.0 && self.omega > 0.0 && self.h_x > 0.0 && self.h_p > 0.0;
        let finite = [self.delta, self.omega, self.h_x, self.h_p, self.x_bar, self.p_bar].iter().all(|v| v.is_finite());
        if !(ok && finite) {
            return Err(validation("structural params need delta, Omega, h_x, h_p > 0 and finite targets"));
        }
        Ok(())
    }

    /// Natural money growth consistent with no arbitrage.
    pub fn gamma(&self) -> f64 {
        self.h_p * self.p_bar + self.h_x * self.x_bar
    }

    pub fn z(&self, t: f64) -> f64 {
        (self.delta * t).exp()
    }

    /// zeta(t) = integral of Z over [t, t + Omega].
    pub fn zeta(&self, t: f64) -> f64 {
        ((self.delta * (t + self.omega)).exp() - (self.delta * t).exp()) / self.delta
    }

    /// [Z(t+Omega) - Z(t)] / zeta(t).
    pub fn mean_reversion_speed(&self, t: f64) -> f64 {
        (self.z(t + self.omega) - self.z(t)) / self.zeta(t)
    }

    /// Integral of 1/zeta over [a, b], in closed form.
    pub fn inv_zeta_integral(&self, a: f64, b: f64) -> f64 {
        let c = ((self.delta * self.omega).exp() - 1.0) / self.delta;
        ((-self.delta * a).exp() - (-self.delta * b).exp()) / (self.delta * c)
    }

    /// B(t,T) of the affine bond price.
    pub fn b(&self, t: f64, big_t: f64) -> f64 {
        (1.0 - (-self.delta * (big_t - t)).exp()) / self.delta
    }

    /// n(t) implied by the expected drifts.
    pub fn short_rate_from_drifts(&self, t: f64, m_i: f64, m_x: f64) -> f64 {
        -(self.h_p * m_i + self.h_x * m_x) / self.zeta(t)
    }
}

pub fn no_arb_gamma(s: &StructuralParams) -> f64 {
    s.gamma()
}

/// Unit-norm variance-split weights for the four volatility functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceWeights {
    pub b_i: Vec<f64>,
    pub b_x: Vec<f64>,
    pub s_i: Vec<f64>,
    pub s_x: Vec<f64>,
}

impl VarianceWeights {
    pub fn check(&self, n: usize) -> Result<()> {
        for (name, w) in [("b_i", &self.b_i), ("b_x", &self.b_x), ("s_i", &self.s_i), ("s_x", &self.s_x)] {
            if w.len() != n {
                return Err(validation(format!("weights {name}: expected {n} components")));
            }
            if (math::norm(w) - 1.0).abs() > 1e-12 {
                return Err(validation(format!("weights {name}: not unit norm")));
            }
        }
        Ok(())
    }

    /// Reference weights of the December 2012 calibration, renormalised.
    pub fn reference() -> Self {
        let unit = |v: [f64; 3]| {
            let n = math::norm(&v);
            v.iter().map(|x| x / n).collect::<Vec<_>>()
        };
        Self {
            b_i: unit([0.20285, 0.13219, 0.97024]),
            b_x: unit([-0.95101, -0.02865, 0.30781]),
            s_i: unit([0.14035, 0.10000, 0.98503]),
            s_x: unit([0.85195, -0.07168, 0.51868]),
        }
    }

    /// Equal weights on every component.
    pub fn uniform(n: usize) -> Self {
        let w = vec![1.0 / (n as f64).sqrt(); n];
        Self { b_i: w.clone(), b_x: w.clone(), s_i: w.clone(), s_x: w }
    }
}

/// Time-dependent CTCB functions. Volatilities are n-vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFunctions {
    pub dim: usize,
    pub a_i: ScalarStep,
    pub a_x: ScalarStep,
    pub b_i: VectorStep,
    pub b_x: VectorStep,
    pub s_i: VectorStep,
    pub s_x: VectorStep,
    pub lambda: VectorStep,
    pub m_i0: f64,
    pub m_x0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<VarianceWeights>,
    /// Replaces the model bond volatility by a constant vector. Only the
    /// forward-measure pricing paths honour it; the short-rate dynamics do not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bond_vol_override: Option<Vec<f64>>,
}

impl ModelFunctions {
    /// All-zero functions of dimension `n`.
    pub fn zeros(n: usize) -> Self {
        Self {
            dim: n,
            a_i: ScalarStep::constant(0.0),
            a_x: ScalarStep::constant(0.0),
            b_i: VectorStep::zeros(n),
            b_x: VectorStep::zeros(n),
            s_i: VectorStep::zeros(n),
            s_x: VectorStep::zeros(n),
            lambda: VectorStep::zeros(n),
            m_i0: 0.0,
            m_x0: 0.0,
            weights: None,
            bond_vol_override: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(validation("Brownian dimension must be positive"));
        }
        self.a_i.check()?;
        self.a_x.check()?;
        for (name, f) in [("b_i", &self.b_i), ("b_x", &self.b_x), ("s_i", &self.s_i), ("s_x", &self.s_x), ("lambda", &self.lambda)] {
            f.check_dim(self.dim, name)?;
        }
        if let Some(w) = &self.weights {
            w.check(self.dim)?;
        }
        if let Some(v) = &self.bond_vol_override {
            if v.len() != self.dim {
                return Err(validation("bond vol override has the wrong dimension"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(text)?;
        f.validate()?;
        Ok(f)
    }

    /// s_M = h_p s_I + h_x s_X.
    pub fn s_m(&self, t: f64, s: &StructuralParams) -> Vec<f64> {
        axpby(s.h_p, self.s_i.at(t), s.h_x, self.s_x.at(t))
    }

    /// sigma_n(t) = -(h_x b_X + h_p b_I) / zeta(t).
    pub fn short_rate_vol(&self, t: f64, s: &StructuralParams) -> Vec<f64> {
        let z = s.zeta(t);
        axpby(-s.h_x / z, self.b_x.at(t), -s.h_p / z, self.b_i.at(t))
    }

    /// Bond volatility from the model, ignoring any override.
    pub fn model_bond_vol(&self, t: f64, big_t: f64, s: &StructuralParams) -> Vec<f64> {
        scale(-s.b(t, big_t), &self.short_rate_vol(t, s))
    }

    /// Bond volatility used by pricing: the override when present.
    pub fn bond_vol(&self, t: f64, big_t: f64, s: &StructuralParams) -> Vec<f64> {
        match &self.bond_vol_override {
            Some(v) => v.clone(),
            None => self.model_bond_vol(t, big_t, s),
        }
    }

    /// Sigma_P(t) = integral over [t, t+Omega] of Z(T) sigma_P(t,T), closed form.
    pub fn sigma_p_weighted(&self, t: f64, s: &StructuralParams) -> Vec<f64> {
        let k = (s.zeta(t) - s.omega * s.z(t)) / s.delta;
        scale(-k, &self.short_rate_vol(t, s))
    }

    /// s_L = -Sigma_P.
    pub fn s_l(&self, t: f64, s: &StructuralParams) -> Vec<f64> {
        scale(-1.0, &self.sigma_p_weighted(t, s))
    }

    /// f1(t) = -(h_p a_I + h_x a_X) / zeta(t), the primary mean-reversion level.
    pub fn theta(&self, t: f64, s: &StructuralParams) -> f64 {
        -(s.h_p * self.a_i.at(t) + s.h_x * self.a_x.at(t)) / s.zeta(t)
    }

    pub fn n0(&self, s: &StructuralParams) -> f64 {
        s.short_rate_from_drifts(0.0, self.m_i0, self.m_x0)
    }
}

fn default_dt() -> f64 {
    math::DEFAULT_DT
}

/// Structural constants plus model functions: everything a pricer needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub structural: StructuralParams,
    pub funcs: ModelFunctions,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

impl Model {
    pub fn new(structural: StructuralParams, funcs: ModelFunctions) -> Self {
        Self { structural, funcs, dt: math::DEFAULT_DT }
    }

    pub fn validate(&self) -> Result<()> {
        self.structural.validate()?;
        self.funcs.validate()?;
        if !(self.dt > 0.0) {
            return Err(validation("integration step must be positive"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn bond_vol(&self, t: f64, big_t: f64) -> Vec<f64> {
        self.funcs.bond_vol(t, big_t, &self.structural)
    }

    pub fn short_rate_vol(&self, t: f64) -> Vec<f64> {
        self.funcs.short_rate_vol(t, &self.structural)
    }
}

/// Short-rate volatility of the dual. The CTCB form keeps zeta(t) continuous
/// inside each step of b_I and b_X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SigmaN {
    /// sigma_n(t) = numerator(t) / zeta(t), numerator = -(h_x b_X + h_p b_I).
    Ctcb { numerator: VectorStep },
    /// sigma_n given directly as a step function.
    Step(VectorStep),
}

/// The Hull-White reading of the short rate, fitted to a nominal curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullWhiteDual {
    pub structural: StructuralParams,
    pub n0: f64,
    pub curve: NominalCurve,
    pub sigma_n: SigmaN,
    /// Integration step for time integrals.
    pub dt: f64,
}

impl HullWhiteDual {
    pub fn delta(&self) -> f64 {
        self.structural.delta
    }

    /// beta(T) = B(0,T) = exp(-delta T).
    pub fn beta(&self, t: f64) -> f64 {
        (-self.delta() * t).exp()
    }

    /// Mean-reversion speed, constant for exponential Z.
    pub fn a(&self, t: f64) -> f64 {
        self.structural.mean_reversion_speed(t)
    }

    pub fn log_a0(&self, t: f64) -> f64 {
        -self.curve.rate(t) * t.max(0.0) + self.n0 * self.beta(t)
    }

    /// A(0,T) = P(0,T) / exp(-n(0) beta(T)).
    pub fn a0(&self, t: f64) -> f64 {
        self.curve.df(t) / (-self.n0 * self.beta(t)).exp()
    }

    /// P(0,T) rebuilt from the Ansatz.
    pub fn p0(&self, t: f64) -> f64 {
        self.a0(t) * (-self.n0 * self.beta(t)).exp()
    }

    pub fn big_b(&self, t: f64, big_t: f64) -> f64 {
        self.structural.b(t, big_t)
    }

    pub fn sigma_n_at(&self, t: f64) -> Vec<f64> {
        match &self.sigma_n {
            SigmaN::Ctcb { numerator } => scale(1.0 / self.structural.zeta(t), numerator.at(t)),
            SigmaN::Step(f) => f.at(t).clone(),
        }
    }

    /// Flattened scalar volatility sigma*(t) = |sigma_n(t)|.
    pub fn sigma_star(&self, t: f64) -> f64 {
        math::norm(&self.sigma_n_at(t))
    }

    /// Bond volatility sigma_P(t,T) = -sigma_n(t) B(t,T).
    pub fn bond_vol(&self, t: f64, big_t: f64) -> Vec<f64> {
        scale(-self.big_b(t, big_t), &self.sigma_n_at(t))
    }

    /// Integral of (sigma*(u) / beta'(u))^2 over [a, b].
    /// The range is split at the volatility breakpoints so no cell straddles
    /// a jump.
    pub fn scaled_var_integral(&self, a: f64, b: f64) -> f64 {
        let d = self.delta();
        let bps = match &self.sigma_n {
            SigmaN::Ctcb { numerator } => &numerator.breakpoints,
            SigmaN::Step(f) => &f.breakpoints,
        };
        let mut edges = vec![a];
        edges.extend(bps.iter().copied().filter(|&x| x > a && x < b));
        edges.push(b);
        edges
            .windows(2)
            .map(|w| {
                math::integrate(w[0], w[1], self.dt, |u| {
                    let s = self.sigma_star(u);
                    s * s * (2.0 * d * u).exp() / (d * d)
                })
            })
            .sum()
    }

    fn dlog_a0(&self, t: f64) -> (f64, f64) {
        let h = self.dt;
        if t - h >= 0.0 {
            let (lm, l0, lp) = (self.log_a0(t - h), self.log_a0(t), self.log_a0(t + h));
            ((lp - lm) / (2.0 * h), (lp - 2.0 * l0 + lm) / (h * h))
        } else {
            let (l0, l1, l2) = (self.log_a0(t), self.log_a0(t + h), self.log_a0(t + 2.0 * h));
            ((l1 - l0) / h, (l2 - 2.0 * l1 + l0) / (h * h))
        }
    }

    /// log A(t,T) from the affine reconstruction.
    pub fn log_a(&self, t: f64, big_t: f64) -> f64 {
        let (d1, _) = self.dlog_a0(t);
        let bb = self.big_b(t, big_t);
        let beta_p = -self.delta() * self.beta(t);
        self.log_a0(big_t) - self.log_a0(t) - bb * d1 - 0.5 * (bb * beta_p).powi(2) * self.scaled_var_integral(0.0, t)
    }

    /// Hull-White mean-reversion level from curve derivatives; the diagnostic
    /// counterpart of the drift-based level.
    pub fn theta_from_curve(&self, t: f64, lambda_dot_sigma: f64) -> f64 {
        let (d1, d2) = self.dlog_a0(t);
        let beta_p = -self.delta() * self.beta(t);
        lambda_dot_sigma - self.delta() * d1 - d2 + beta_p * beta_p * self.scaled_var_integral(0.0, t)
    }
}

/// Builds the dual from a curve: a = delta, beta, A0 and, when model
/// functions are given, the CTCB short-rate volatility.
pub fn hw_ansatz_from_curve(curve: &NominalCurve, s: &StructuralParams, funcs: Option<&ModelFunctions>, dt: f64) -> Result<HullWhiteDual> {
    curve.validate()?;
    s.validate()?;
    let sigma_n = match funcs {
        Some(f) => SigmaN::Ctcb { numerator: vol_numerator(f, s) },
        None => SigmaN::Step(VectorStep::zeros(1)),
    };
    Ok(HullWhiteDual { structural: *s, n0: curve.short_rate(), curve: curve.clone(), sigma_n, dt })
}

/// -(h_x b_X + h_p b_I) on the union of both breakpoint sets.
pub fn vol_numerator(f: &ModelFunctions, s: &StructuralParams) -> VectorStep {
    let mut bps: Vec<f64> = f.b_i.breakpoints.iter().chain(&f.b_x.breakpoints).copied().collect();
    bps.sort_by(|a, b| a.total_cmp(b));
    bps.dedup();
    let values = bps.iter().map(|&b| axpby(-s.h_x, f.b_x.at(b), -s.h_p, f.b_i.at(b))).collect();
    VectorStep { breakpoints: bps, values }
}

pub fn check_positive(x: f64, what: &str) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(invalid(format!("{what} must be positive")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_structural() -> StructuralParams {
        StructuralParams { delta: 0.05, omega: 5.0, h_x: 2.5, h_p: 1.75, x_bar: 0.02, p_bar: 0.02 }
    }

    #[test]
    fn zeta_at_origin() {
        let s = reference_structural();
        assert!((s.zeta(0.0) - 5.680_508_333_754_7).abs() < 1e-9);
        assert!((s.zeta(3.0) / s.zeta(0.0) - (0.15f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn gamma_examples() {
        assert!((reference_structural().gamma() - 0.085).abs() < 1e-15);
        let s = StructuralParams { h_x: 3.0, h_p: 1.0, ..reference_structural() };
        assert!((s.gamma() - 0.08).abs() < 1e-15);
    }

    #[test]
    fn inv_zeta_matches_quadrature() {
        let s = reference_structural();
        let q = math::integrate(0.3, 2.7, 1e-4, |u| 1.0 / s.zeta(u));
        assert!((q - s.inv_zeta_integral(0.3, 2.7)).abs() < 1e-10);
    }

    #[test]
    fn weighted_bond_vol_matches_quadrature() {
        let s = reference_structural();
        let mut f = ModelFunctions::zeros(2);
        f.b_i = VectorStep::constant(vec![0.001, -0.002]);
        f.b_x = VectorStep::constant(vec![0.004, 0.003]);
        let t = 1.3;
        let closed = f.sigma_p_weighted(t, &s);
        for (k, c) in closed.iter().enumerate() {
            let q = math::integrate(t, t + s.omega, 1e-4, |big_t| s.z(big_t) * f.model_bond_vol(t, big_t, &s)[k]);
            assert!((q - c).abs() < 1e-9);
        }
    }
}
