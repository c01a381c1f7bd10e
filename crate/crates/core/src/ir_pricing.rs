//! Closed-form nominal rates pricing on the Hull-White dual: the lognormal
//! option formula, zero-bond options, caplets, coupon-bond options and
//! swaptions.

use serde::{Deserialize, Serialize};

use crate::ctcb::HullWhiteDual;
use crate::error::{invalid, Error, Result};
use crate::math::{norm_cdf, solve_bracketed};

/// log X ~ N(m, v^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalLaw {
    pub m: f64,
    pub v: f64,
}

impl LognormalLaw {
    pub fn forward(&self) -> f64 {
        (self.m + 0.5 * self.v * self.v).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    pub fn omega(self) -> f64 {
        match self {
            OptionKind::Call => 1.0,
            OptionKind::Put => -1.0,
        }
    }

    pub fn from_omega(omega: f64) -> Self {
        if omega >= 0.0 {
            OptionKind::Call
        } else {
            OptionKind::Put
        }
    }
}

/// Undiscounted E[(omega (X - K))^+] for lognormal X.
pub fn black_lognormal(law: LognormalLaw, strike: f64, kind: OptionKind) -> Result<f64> {
    if !(strike > 0.0) {
        return Err(invalid("strike must be positive"));
    }
    if law.v < 0.0 || !law.v.is_finite() || !law.m.is_finite() {
        return Err(invalid("lognormal law needs finite mean and non-negative deviation"));
    }
    let w = kind.omega();
    let lk = strike.ln();
    if law.v == 0.0 {
        return Ok((w * (law.m.exp() - strike)).max(0.0));
    }
    let v = law.v;
    let fwd = law.forward();
    Ok(w * fwd * norm_cdf(w * (law.m - lk + v * v) / v) - w * strike * norm_cdf(w * (law.m - lk) / v))
}

/// Variance of log[P(T1,T2)] seen from t.
pub fn vp_variance(t: f64, t1: f64, t2: f64, dual: &HullWhiteDual) -> Result<f64> {
    if !(t <= t1 && t1 <= t2) {
        return Err(invalid("need t <= T1 <= T2"));
    }
    let db = dual.beta(t2) - dual.beta(t1);
    Ok(db * db * dual.scaled_var_integral(t, t1))
}

/// Option with expiry T1 on the zero bond maturing at T2, given today's bond
/// prices and the log-variance of P(T1,T2).
pub fn zbo_from_inputs(kind: OptionKind, p1: f64, p2: f64, strike: f64, var: f64) -> Result<f64> {
    if !(strike > 0.0) {
        return Err(invalid("zero-bond option strike must be positive"));
    }
    if var <= 0.0 {
        return Ok(match kind {
            OptionKind::Call => (p2 - strike * p1).max(0.0),
            OptionKind::Put => (strike * p1 - p2).max(0.0),
        });
    }
    let sv = var.sqrt();
    let h = (p2 / (p1 * strike)).ln() / sv + 0.5 * sv;
    Ok(match kind {
        OptionKind::Call => p2 * norm_cdf(h) - strike * p1 * norm_cdf(h - sv),
        OptionKind::Put => strike * p1 * norm_cdf(-h + sv) - p2 * norm_cdf(-h),
    })
}

/// Bond price P(t,T) as seen from the curve: the forward P(0,T)/P(0,t).
fn fwd_bond(dual: &HullWhiteDual, t: f64, big_t: f64) -> f64 {
    dual.curve.df(big_t) / dual.curve.df(t)
}

/// Zero-bond option valued at t on the dual's curve.
pub fn zbo(kind: OptionKind, t: f64, t1: f64, t2: f64, strike: f64, dual: &HullWhiteDual) -> Result<f64> {
    let var = vp_variance(t, t1, t2, dual)?;
    zbo_from_inputs(kind, fwd_bond(dual, t, t1), fwd_bond(dual, t, t2), strike, var)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapKind {
    Caplet,
    Floorlet,
}

/// Caplet or floorlet on the simple rate over [T1, T2].
pub fn caplet_floorlet(kind: CapKind, t: f64, t1: f64, t2: f64, strike: f64, notional: f64, dual: &HullWhiteDual) -> Result<f64> {
    let tau = t2 - t1;
    if !(tau > 0.0) {
        return Err(invalid("caplet accrual period must be positive"));
    }
    let f = 1.0 + strike * tau;
    if !(f > 0.0) {
        return Err(invalid("caplet strike gives a non-positive bond strike"));
    }
    let bond_kind = match kind {
        CapKind::Caplet => OptionKind::Put,
        CapKind::Floorlet => OptionKind::Call,
    };
    Ok(notional * f * zbo(bond_kind, t, t1, t2, 1.0 / f, dual)?)
}

/// ATM caplet PV from today's curve in closed form: P(0,T1) (2N(sqrt(V)/2) - 1).
pub fn atm_caplet_from_var(p1: f64, var: f64) -> f64 {
    if var <= 0.0 {
        return 0.0;
    }
    p1 * (2.0 * norm_cdf(0.5 * var.sqrt()) - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapSchedule {
    pub expiry: f64,
    pub payments: Vec<f64>,
    pub fixed_rate: f64,
}

impl SwapSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.payments.is_empty() || !(self.payments[0] > self.expiry) || self.payments.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("swap schedule needs expiry < T1 < ... < TM"));
        }
        Ok(())
    }

    /// c_i = K (T_i - T_{i-1}); the last coupon carries the unit notional.
    pub fn coupons(&self) -> Vec<f64> {
        let mut prev = self.expiry;
        let mut c: Vec<f64> = self
            .payments
            .iter()
            .map(|&t| {
                let v = self.fixed_rate * (t - prev);
                prev = t;
                v
            })
            .collect();
        if let Some(last) = c.last_mut() {
            *last += 1.0;
        }
        c
    }
}

/// Critical short rate at which the coupon bond is worth `strike` at expiry.
pub fn jamshidian_nstar(schedule: &SwapSchedule, dual: &HullWhiteDual, strike: f64) -> Result<f64> {
    schedule.validate()?;
    let t = schedule.expiry;
    let c = schedule.coupons();
    let ab: Vec<(f64, f64)> = schedule.payments.iter().map(|&ti| (dual.log_a(t, ti).exp(), dual.big_b(t, ti))).collect();
    let f = |n: f64| {
        let mut v = -strike;
        let mut d = 0.0;
        for (ci, (a, b)) in c.iter().zip(&ab) {
            let x = ci * a * (-n * b).exp();
            v += x;
            d -= b * x;
        }
        (v, d)
    };
    let root = solve_bracketed(f, -1.0, 2.0, 0.0, 1e-14, 200).map_err(|e| match e {
        Error::NoRoot { msg, residual } => Error::NoRoot { msg: format!("critical rate: {msg}"), residual },
        other => other,
    })?;
    Ok(root.x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwaptionKind {
    Payer,
    Receiver,
}

/// European swaption valued at time 0 as a portfolio of zero-bond options.
pub fn swaption(kind: SwaptionKind, schedule: &SwapSchedule, dual: &HullWhiteDual) -> Result<f64> {
    let nstar = jamshidian_nstar(schedule, dual, 1.0)?;
    let t = schedule.expiry;
    let bond_kind = match kind {
        SwaptionKind::Payer => OptionKind::Put,
        SwaptionKind::Receiver => OptionKind::Call,
    };
    let mut pv = 0.0;
    for (ci, &ti) in schedule.coupons().iter().zip(&schedule.payments) {
        let xi = dual.log_a(t, ti).exp() * (-nstar * dual.big_b(t, ti)).exp();
        pv += ci * zbo(bond_kind, 0.0, t, ti, xi, dual)?;
    }
    Ok(pv)
}

/// Value of the forward-starting payer swap at time 0.
pub fn forward_payer_swap(schedule: &SwapSchedule, dual: &HullWhiteDual) -> f64 {
    let fixed: f64 = schedule.coupons().iter().zip(&schedule.payments).map(|(c, &t)| c * dual.curve.df(t)).sum();
    dual.curve.df(schedule.expiry) - fixed
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_vol_limit_is_intrinsic() {
        let law = LognormalLaw { m: 0.1, v: 0.0 };
        let c = black_lognormal(law, 1.0, OptionKind::Call).unwrap();
        assert!((c - (0.1f64.exp() - 1.0)).abs() < 1e-15);
        assert_eq!(black_lognormal(law, 1.0, OptionKind::Put).unwrap(), 0.0);
    }

    #[test]
    fn reference_value() {
        // E[(e^X - 1)^+] with X ~ N(0, 0.04), from 30-digit quadrature
        let c = black_lognormal(LognormalLaw { m: 0.0, v: 0.2 }, 1.0, OptionKind::Call).unwrap();
        assert!((c - 0.090_961_531_793_282_12).abs() < 1e-15, "{c}");
    }

    #[test]
    fn rejects_bad_strike() {
        assert!(black_lognormal(LognormalLaw { m: 0.0, v: 0.2 }, 0.0, OptionKind::Call).is_err());
    }

    #[test]
    fn coupons_carry_notional() {
        let s = SwapSchedule { expiry: 1.0, payments: vec![2.0, 3.0], fixed_rate: 0.03 };
        let c = s.coupons();
        assert!((c[0] - 0.03).abs() < 1e-15 && (c[1] - 1.03).abs() < 1e-15);
    }
}
