//! Side-by-side first-year statistics of the DSGE model and a one-step
//! reading of the continuous-time model: mean and standard deviation of the
//! short-rate change and of inflation, and their correlation.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsge::{self, DsgeMeasure, DsgeParams, Expectation, ExpectationPath, PeriodShocks, ShockSpec};
use crate::error::{invalid, Result};
use crate::math::{axpby, dot, mean_se, norm, path_rng};

/// DSGE inputs for one period starting from a known short rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsgeMatchInput {
    pub params: DsgeParams,
    pub shocks: PeriodShocks,
    pub expectation: Expectation,
    /// n_i, the rate set in the previous period.
    pub n_current: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<MomentStats>,
}

/// Continuous-model values on the first unit step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousMatchInput {
    pub h_x: f64,
    pub h_p: f64,
    pub zeta0: f64,
    pub a_x: f64,
    pub a_i: f64,
    pub m_x0: f64,
    pub m_i0: f64,
    pub s_x: Vec<f64>,
    pub s_i: Vec<f64>,
    pub b_x: Vec<f64>,
    pub b_i: Vec<f64>,
}

impl ContinuousMatchInput {
    pub fn validate(&self) -> Result<()> {
        let n = self.b_i.len();
        if n == 0 || [&self.s_x, &self.s_i, &self.b_x].iter().any(|v| v.len() != n) {
            return Err(invalid("continuous inputs: volatility vectors must share a positive dimension"));
        }
        if !(self.zeta0 > 0.0) {
            return Err(invalid("continuous inputs: zeta(0) must be positive"));
        }
        Ok(())
    }

    /// Loading of the inflation rate on the Brownian increment: b_I + s_I.
    pub fn inflation_vol(&self) -> Vec<f64> {
        axpby(1.0, &self.b_i, 1.0, &self.s_i)
    }

    /// Loading of the short-rate change: -(h_x b_X + h_p b_I) / zeta(0).
    pub fn rate_vol(&self) -> Vec<f64> {
        axpby(-self.h_x / self.zeta0, &self.b_x, -self.h_p / self.zeta0, &self.b_i)
    }

    /// n(0) = -(h_p m_I(0) + h_x m_X(0)) / zeta(0).
    pub fn n0(&self) -> f64 {
        -(self.h_p * self.m_i0 + self.h_x * self.m_x0) / self.zeta0
    }
}

/// Mean and standard deviation of the rate change and of inflation, and
/// their correlation. All in decimal units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentStats {
    pub mean_dn: f64,
    pub mean_p: f64,
    pub sd_dn: f64,
    pub sd_p: f64,
    pub corr: f64,
}

impl MomentStats {
    pub fn from_samples(dn: &[f64], p: &[f64]) -> Result<Self> {
        if dn.len() != p.len() || dn.len() < 2 {
            return Err(invalid("need at least two paired samples"));
        }
        let n = dn.len() as f64;
        let (mdn, _) = mean_se(dn);
        let (mp, _) = mean_se(p);
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for (a, b) in dn.iter().zip(p) {
            sxx += (a - mdn) * (a - mdn);
            syy += (b - mp) * (b - mp);
            sxy += (a - mdn) * (b - mp);
        }
        let corr = if sxx > 0.0 && syy > 0.0 { sxy / (sxx * syy).sqrt() } else { 0.0 };
        Ok(Self { mean_dn: mdn, mean_p: mp, sd_dn: (sxx / (n - 1.0)).sqrt(), sd_p: (syy / (n - 1.0)).sqrt(), corr })
    }
}

/// Residuals of the three second-moment matching conditions: DSGE analytic
/// value minus continuous value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingConditions {
    pub var_p: f64,
    pub var_dn: f64,
    pub cov: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentMatchReport {
    pub n_paths: usize,
    pub seed: u64,
    pub targets: Option<MomentStats>,
    pub dsge: MomentStats,
    pub continuous: MomentStats,
    pub dsge_analytic: MomentStats,
    pub continuous_analytic: MomentStats,
    pub conditions: MatchingConditions,
    /// n(0) implied by the continuous inputs.
    pub continuous_n0: f64,
}

impl MomentMatchReport {
    /// Table in percent with one row per statistic.
    pub fn table(&self) -> String {
        let cols: Vec<(&str, Option<MomentStats>)> = vec![("target", self.targets), ("dsge", Some(self.dsge)), ("continuous", Some(self.continuous))];
        let mut out = String::from("statistic,target,dsge,continuous\n");
        type Getter = fn(&MomentStats) -> f64;
        let rows: [(&str, Getter); 5] =
            [("mean_dn", |s| s.mean_dn), ("mean_p", |s| s.mean_p), ("sd_dn", |s| s.sd_dn), ("sd_p", |s| s.sd_p), ("corr", |s| s.corr)];
        for (name, get) in rows {
            out.push_str(name);
            for (_, c) in &cols {
                match c {
                    Some(s) => out.push_str(&format!(",{:.4}", 100.0 * get(s))),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn dsge_setup(input: &DsgeMatchInput) -> (ShockSpec, ExpectationPath) {
    (ShockSpec { periods: vec![input.shocks.clone()] }, ExpectationPath { periods: vec![input.expectation] })
}

/// DSGE first-period statistics from the closed forms. n_i is known, so the
/// rate change inherits the variance of n_{i+1}.
pub fn dsge_analytic(input: &DsgeMatchInput) -> Result<MomentStats> {
    let (shocks, exp) = dsge_setup(input);
    let p = dsge::inflation_moments(&input.params, &shocks, &exp, 0)?;
    let n = dsge::short_rate_moments(&input.params, &shocks, &exp, 0)?;
    let corr = dsge::rate_inflation_corr(&input.params, &shocks, &exp, 0)?.unwrap_or(0.0);
    Ok(MomentStats { mean_dn: n.mean - input.n_current, mean_p: p.mean, sd_dn: n.var.sqrt(), sd_p: p.var.sqrt(), corr })
}

/// One-step statistics of the continuous model over the first year.
pub fn continuous_analytic(input: &ContinuousMatchInput) -> Result<MomentStats> {
    input.validate()?;
    let vi = input.inflation_vol();
    let vn = input.rate_vol();
    let d = norm(&vi) * norm(&vn);
    Ok(MomentStats {
        mean_dn: -(input.h_p * input.a_i + input.h_x * input.a_x) / input.zeta0,
        mean_p: input.m_i0 + input.a_i,
        sd_dn: norm(&vn),
        sd_p: norm(&vi),
        corr: if d > 0.0 { dot(&vi, &vn) / d } else { 0.0 },
    })
}

pub fn simulate_dsge_stats(input: &DsgeMatchInput, n_paths: usize, seed: u64) -> Result<MomentStats> {
    let (shocks, exp) = dsge_setup(input);
    let sim = dsge::simulate_dsge(&input.params, &shocks, &exp, n_paths, seed, DsgeMeasure::P)?;
    let dn = sim.column(0, |s| s.n_next - input.n_current);
    let p = sim.column(0, |s| s.p);
    MomentStats::from_samples(&dn, &p)
}

/// One unit step with a single Gaussian draw W: the year's inflation is
/// m_I(0) + a_I + (b_I + s_I).W and the rate change is
/// -(h_p (a_I + b_I.W) + h_x (a_X + b_X.W)) / zeta(0).
pub fn simulate_continuous_stats(input: &ContinuousMatchInput, n_paths: usize, seed: u64) -> Result<MomentStats> {
    input.validate()?;
    let dim = input.b_i.len();
    let vi = input.inflation_vol();
    let draws: Vec<(f64, f64)> = (0..n_paths)
        .into_par_iter()
        .map(|j| {
            let mut rng = path_rng(seed, j as u64);
            let w: Vec<f64> = (0..dim).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
            let m_i = input.a_i + dot(&input.b_i, &w);
            let m_x = input.a_x + dot(&input.b_x, &w);
            let dn = -(input.h_p * m_i + input.h_x * m_x) / input.zeta0;
            (dn, input.m_i0 + input.a_i + dot(&vi, &w))
        })
        .collect();
    let (dn, p): (Vec<f64>, Vec<f64>) = draws.into_iter().unzip();
    MomentStats::from_samples(&dn, &p)
}

pub fn matching_conditions(dsge: &DsgeMatchInput, cont: &ContinuousMatchInput) -> Result<MatchingConditions> {
    let (shocks, exp) = dsge_setup(dsge);
    let p = dsge::inflation_moments(&dsge.params, &shocks, &exp, 0)?;
    let n = dsge::short_rate_moments(&dsge.params, &shocks, &exp, 0)?;
    let cov = dsge::rate_inflation_cov(&dsge.params, &shocks, 0)?;
    let vi = cont.inflation_vol();
    let vn = cont.rate_vol();
    Ok(MatchingConditions { var_p: p.var - dot(&vi, &vi), var_dn: n.var - dot(&vn, &vn), cov: cov - dot(&vi, &vn) })
}

pub fn moment_match(dsge: &DsgeMatchInput, cont: &ContinuousMatchInput, n_paths: usize, seed: u64) -> Result<MomentMatchReport> {
    if n_paths < 2 {
        return Err(invalid("moment matching needs at least two paths"));
    }
    Ok(MomentMatchReport {
        n_paths,
        seed,
        targets: dsge.targets,
        dsge: simulate_dsge_stats(dsge, n_paths, seed)?,
        continuous: simulate_continuous_stats(cont, n_paths, seed.wrapping_add(1))?,
        dsge_analytic: dsge_analytic(dsge)?,
        continuous_analytic: continuous_analytic(cont)?,
        conditions: matching_conditions(dsge, cont)?,
        continuous_n0: cont.n0(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_vol() -> ContinuousMatchInput {
        ContinuousMatchInput {
            h_x: 1.0,
            h_p: 3.0,
            zeta0: 2.0,
            a_x: 0.01,
            a_i: -0.01,
            m_x0: 0.0,
            m_i0: 0.04,
            s_x: vec![0.0; 3],
            s_i: vec![0.0; 3],
            b_x: vec![0.0; 3],
            b_i: vec![0.0; 3],
        }
    }

    #[test]
    fn zero_vol_is_deterministic() {
        let s = simulate_continuous_stats(&zero_vol(), 100, 1).unwrap();
        assert!((s.mean_p - 0.03).abs() < 1e-15);
        assert!((s.mean_dn - 0.01).abs() < 1e-15);
        assert!(s.sd_p < 1e-15);
        assert!(s.sd_dn < 1e-15);
    }

    #[test]
    fn sample_stats_of_known_pairs() {
        let s = MomentStats::from_samples(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert!((s.corr - 1.0).abs() < 1e-15);
        assert!((s.sd_dn - 1.0).abs() < 1e-15);
        assert!(MomentStats::from_samples(&[1.0], &[1.0]).is_err());
    }
}
