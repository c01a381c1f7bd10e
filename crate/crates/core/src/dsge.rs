//! Discrete-time DSGE pricing toy: system matrices and stability, moments of
//! inflation and the short rate, the Gaussian measure change, approximate
//! one-period nominal and real discount factors, market-price-of-risk
//! bootstrapping and path simulation.

use nalgebra::{Matrix2, Matrix2x3, RowVector3, Vector2, Vector3};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, validation, Error, Result};
use crate::market_data::MarketSnapshot;
use crate::math::path_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsgeParams {
    /// Relative risk aversion.
    pub sigma: f64,
    /// Price flexibility.
    pub k: f64,
    pub delta_pi: f64,
    pub delta_x: f64,
    /// Subjective discount factor.
    pub beta: f64,
    /// Equilibrium nominal rate.
    pub n_bar: f64,
    /// Year fraction of period i, i.e. the accrual of n_{i+1}. The last entry
    /// extends to later periods.
    #[serde(default = "default_tau")]
    pub tau: Vec<f64>,
    /// Accrual of the inflation observed before the first period; zero under
    /// the p_0 = 0 convention.
    #[serde(default)]
    pub tau0: f64,
}

fn default_tau() -> Vec<f64> {
    vec![1.0]
}

impl DsgeParams {
    /// k = (1 - omega)(1 - beta omega)(sigma + eta) / omega.
    pub fn price_flexibility(omega: f64, beta: f64, sigma: f64, eta: f64) -> Result<f64> {
        if !(omega > 0.0 && omega <= 1.0) {
            return Err(invalid("price stickiness omega must lie in (0, 1]"));
        }
        Ok((1.0 - omega) * (1.0 - beta * omega) * (sigma + eta) / omega)
    }

    pub fn denominator(&self) -> f64 {
        self.sigma + self.delta_x + self.k * self.delta_pi
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.sigma, self.k, self.delta_pi, self.delta_x, self.beta, self.n_bar, self.tau0];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(validation("DSGE parameters must be finite"));
        }
        if self.sigma < 0.0 || self.k < 0.0 {
            return Err(validation("sigma and k must be non-negative"));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(validation("beta must lie in (0, 1]"));
        }
        if !(self.denominator() > 0.0) {
            return Err(validation("sigma + delta_x + k delta_pi must be positive"));
        }
        if self.tau.is_empty() || self.tau.iter().any(|t| !(*t > 0.0)) || self.tau0 < 0.0 {
            return Err(validation("year fractions must be positive"));
        }
        Ok(())
    }

    /// tau_{i+1}.
    pub fn period_length(&self, i: usize) -> f64 {
        *self.tau.get(i).or(self.tau.last()).unwrap_or(&1.0)
    }

    /// tau_i, the accrual of p_i.
    pub fn inflation_length(&self, i: usize) -> f64 {
        if i == 0 {
            self.tau0
        } else {
            self.period_length(i - 1)
        }
    }

    fn delta(&self) -> Vector2<f64> {
        Vector2::new(self.delta_x, self.delta_pi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub a: Matrix2<f64>,
    pub k: Vector2<f64>,
    pub c: Matrix2x3<f64>,
    pub h: Vector3<f64>,
    pub denominator: f64,
    /// delta' C, the loadings of n_{i+1}/n_bar on (u, v, z).
    pub delta_c: RowVector3<f64>,
    /// delta' K.
    pub delta_k: f64,
}

pub fn build_system(params: &DsgeParams) -> Result<SystemMatrices> {
    params.validate()?;
    let p = params;
    let d = p.denominator();
    let a = Matrix2::new(p.sigma, 1.0 - p.beta * p.delta_pi, p.k * p.sigma, p.k + p.beta * (p.sigma + p.delta_x)) / d;
    let k = Vector2::new(1.0, p.k) / d;
    let c = Matrix2x3::new(p.sigma * k[0], -k[0], 0.0, p.sigma * k[1], -k[1], 1.0);
    let h = Vector3::new(p.sigma * k[1], -k[1], 1.0);
    let delta_c = p.delta().transpose() * c;
    let delta_k = p.delta().dot(&k);
    Ok(SystemMatrices { a, k, c, h, denominator: d, delta_c, delta_k })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub stable: bool,
    pub closed_form: f64,
    pub spectral_radius: f64,
}

pub fn stability_check(params: &DsgeParams) -> Result<Stability> {
    let sys = build_system(params)?;
    let closed_form = params.k * (params.delta_pi - 1.0) + (1.0 - params.beta) * params.delta_x;
    let tr = sys.a.trace();
    let det = sys.a.determinant();
    let disc = tr * tr - 4.0 * det;
    let spectral_radius = if disc >= 0.0 {
        let s = disc.sqrt();
        ((tr + s) / 2.0).abs().max(((tr - s) / 2.0).abs())
    } else {
        det.abs().sqrt()
    };
    Ok(Stability { stable: closed_form > 0.0, closed_form, spectral_radius })
}

/// Centered moments of one shock. Missing higher moments default to Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ShockMoments {
    pub var: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skew: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kurt: Option<f64>,
}

impl ShockMoments {
    pub fn gaussian(var: f64) -> Self {
        Self { var, skew: None, kurt: None }
    }

    pub fn m3(&self) -> f64 {
        self.skew.unwrap_or(0.0)
    }

    pub fn m4(&self) -> f64 {
        self.kurt.unwrap_or(3.0 * self.var * self.var)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.var >= 0.0) || !self.var.is_finite() {
            return Err(validation("shock variance must be finite and non-negative"));
        }
        if self.skew.is_some() || self.kurt.is_some() {
            let (m3, m4) = (self.m3(), self.m4());
            if self.var == 0.0 {
                if m3 != 0.0 || m4 != 0.0 {
                    return Err(validation("a degenerate shock has zero higher moments"));
                }
            } else if m4 < (m3 * m3 / self.var + self.var * self.var) * (1.0 - 1e-12) {
                // standardized kurtosis must be at least skewness^2 + 1
                return Err(validation("shock kurtosis is inconsistent with its skewness"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PeriodShocks {
    pub u: ShockMoments,
    pub v: ShockMoments,
    pub z: ShockMoments,
    /// Market prices of risk (lambda^u, lambda^v, lambda^z).
    #[serde(default)]
    pub lambda: [f64; 3],
}

impl PeriodShocks {
    pub fn gaussian(var_u: f64, var_v: f64, var_z: f64) -> Self {
        Self { u: ShockMoments::gaussian(var_u), v: ShockMoments::gaussian(var_v), z: ShockMoments::gaussian(var_z), lambda: [0.0; 3] }
    }

    pub fn moments(&self) -> [ShockMoments; 3] {
        [self.u, self.v, self.z]
    }

    pub fn variances(&self) -> [f64; 3] {
        [self.u.var, self.v.var, self.z.var]
    }

    pub fn is_gaussian(&self) -> bool {
        self.moments().iter().all(|m| m.skew.is_none() && m.kurt.is_none())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ShockSpec {
    pub periods: Vec<PeriodShocks>,
}

impl ShockSpec {
    pub fn validate(&self) -> Result<()> {
        if self.periods.is_empty() {
            return Err(validation("shock spec needs at least one period"));
        }
        for p in &self.periods {
            for m in p.moments() {
                m.validate()?;
            }
            if p.lambda.iter().any(|l| !l.is_finite()) {
                return Err(validation("market prices of risk must be finite"));
            }
        }
        Ok(())
    }

    pub fn period(&self, i: usize) -> Result<&PeriodShocks> {
        self.periods.get(i).ok_or_else(|| invalid(format!("no shock specification for period {i}")))
    }
}

/// E_i x_{i+1} and E_i p_{i+1}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub ex: f64,
    pub ep: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExpectationPath {
    pub periods: Vec<Expectation>,
}

impl ExpectationPath {
    pub fn validate(&self) -> Result<()> {
        if self.periods.is_empty() || self.periods.iter().any(|e| !e.ex.is_finite() || !e.ep.is_finite()) {
            return Err(validation("expectation path needs finite entries"));
        }
        Ok(())
    }

    pub fn period(&self, i: usize) -> Result<Vector2<f64>> {
        let e = self.periods.get(i).ok_or_else(|| invalid(format!("no expectations for period {i}")))?;
        Ok(Vector2::new(e.ex, e.ep))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub var: f64,
    /// Centered third moment.
    pub skew3: f64,
    /// Centered fourth moment.
    pub kurt4: f64,
}

/// Moments of mean + sum_j c_j e_j for independent zero-mean shocks e_j.
fn linear_moments(mean: f64, loadings: [f64; 3], shocks: &PeriodShocks) -> Moments {
    let m = shocks.moments();
    let mut var = 0.0;
    let mut skew3 = 0.0;
    let mut kurt4 = 0.0;
    for j in 0..3 {
        let c = loadings[j];
        var += c * c * m[j].var;
        skew3 += c.powi(3) * m[j].m3();
        kurt4 += c.powi(4) * m[j].m4();
        for l in (j + 1)..3 {
            let d = loadings[l];
            kurt4 += 6.0 * c * c * m[j].var * d * d * m[l].var;
        }
    }
    Moments { mean, var, skew3, kurt4 }
}

fn row(v: &RowVector3<f64>) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

/// Moments of p_i under the real-world measure.
pub fn inflation_moments(params: &DsgeParams, shocks: &ShockSpec, expectations: &ExpectationPath, i: usize) -> Result<Moments> {
    let sys = build_system(params)?;
    let e = expectations.period(i)?;
    let mean = sys.a[(1, 0)] * e[0] + sys.a[(1, 1)] * e[1];
    Ok(linear_moments(mean, [sys.h[0], sys.h[1], sys.h[2]], shocks.period(i)?))
}

/// Moments of n_{i+1} = n_bar (1 + delta' xi_i) under the real-world measure.
pub fn short_rate_moments(params: &DsgeParams, shocks: &ShockSpec, expectations: &ExpectationPath, i: usize) -> Result<Moments> {
    let sys = build_system(params)?;
    let e = expectations.period(i)?;
    let mean = params.n_bar * (1.0 + params.delta().dot(&(sys.a * e)));
    let loadings = row(&(sys.delta_c * params.n_bar));
    Ok(linear_moments(mean, loadings, shocks.period(i)?))
}

/// Cov(p_i, n_{i+1}).
pub fn rate_inflation_cov(params: &DsgeParams, shocks: &ShockSpec, i: usize) -> Result<f64> {
    let sys = build_system(params)?;
    let var = shocks.period(i)?.variances();
    Ok((0..3).map(|j| sys.h[j] * params.n_bar * sys.delta_c[j] * var[j]).sum())
}

/// Corr(p_i, n_{i+1}); `None` when either variance vanishes.
pub fn rate_inflation_corr(params: &DsgeParams, shocks: &ShockSpec, expectations: &ExpectationPath, i: usize) -> Result<Option<f64>> {
    let vp = inflation_moments(params, shocks, expectations, i)?.var;
    let vn = short_rate_moments(params, shocks, expectations, i)?.var;
    if vp <= 0.0 || vn <= 0.0 {
        return Ok(None);
    }
    Ok(Some(rate_inflation_cov(params, shocks, i)? / (vp * vn).sqrt()))
}

/// Law of the shifted shocks (u*, v*, z*) used for pricing: each shock moves
/// by its market price of risk and keeps its variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedShocks {
    pub mean: [f64; 3],
    pub var: [f64; 3],
}

pub fn measure_shift(shocks: &PeriodShocks) -> ShiftedShocks {
    ShiftedShocks { mean: shocks.lambda, var: shocks.variances() }
}

/// Density exp(-eps.lambda - lambda' Sigma lambda / 2) of the exponential
/// Gaussian martingale for one period's draw.
pub fn rn_weight(eps: [f64; 3], shocks: &PeriodShocks) -> f64 {
    let l = shocks.lambda;
    let v = shocks.variances();
    let lin: f64 = (0..3).map(|j| eps[j] * l[j]).sum();
    let quad: f64 = (0..3).map(|j| l[j] * l[j] * v[j]).sum();
    (-lin - 0.5 * quad).exp()
}

/// Coefficients of exp(c1 + c2 Var(u) + c3 Var(v) + c4 Var(z)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DfCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl DfCoefficients {
    pub fn log_value(&self, var: [f64; 3]) -> f64 {
        self.c1 + self.c2 * var[0] + self.c3 * var[1] + self.c4 * var[2]
    }
}

/// Exponent loadings of the one-period log discount factors on the shocks.
struct DfLoadings {
    nominal: [f64; 3],
    real: [f64; 3],
    nominal_const: f64,
    real_const: f64,
}

fn df_loadings(params: &DsgeParams, sys: &SystemMatrices, e: Vector2<f64>, i: usize) -> DfLoadings {
    let t1 = params.period_length(i);
    let t0 = params.inflation_length(i);
    let nb = params.n_bar;
    let axi = sys.a * e;
    let nominal_const = -t1 * nb * (1.0 + params.delta().dot(&axi));
    let real_const = t0 * axi[1] + nominal_const;
    let nominal = [-t1 * nb * sys.delta_c[0], -t1 * nb * sys.delta_c[1], -t1 * nb * sys.delta_c[2]];
    let real = [t0 * sys.h[0] + nominal[0], t0 * sys.h[1] + nominal[1], t0 * sys.h[2] + nominal[2]];
    DfLoadings { nominal, real, nominal_const, real_const }
}

fn coefficients(constant: f64, loadings: [f64; 3], lambda: [f64; 3]) -> DfCoefficients {
    let wedge: f64 = (0..3).map(|j| loadings[j] * lambda[j]).sum();
    DfCoefficients {
        c1: constant + wedge,
        c2: 0.5 * loadings[0] * loadings[0],
        c3: 0.5 * loadings[1] * loadings[1],
        c4: 0.5 * loadings[2] * loadings[2],
    }
}

/// Coefficients of E^Q[exp(-tau_{i+1} n_{i+1})].
pub fn nominal_df_coefficients(params: &DsgeParams, shocks: &ShockSpec, expectations: &ExpectationPath, i: usize) -> Result<DfCoefficients> {
    let sys = build_system(params)?;
    let l = df_loadings(params, &sys, expectations.period(i)?, i);
    Ok(coefficients(l.nominal_const, l.nominal, shocks.period(i)?.lambda))
}

/// Coefficients of E^Q[exp(-tau_{i+1} n_{i+1} + tau_i p_i)].
pub fn real_df_coefficients(params: &DsgeParams, shocks: &ShockSpec, expectations: &ExpectationPath, i: usize) -> Result<DfCoefficients> {
    let sys = build_system(params)?;
    let l = df_loadings(params, &sys, expectations.period(i)?, i);
    Ok(coefficients(l.real_const, l.real, shocks.period(i)?.lambda))
}

pub fn nominal_df_approx(params: &DsgeParams, shocks: &ShockSpec, expectations: &ExpectationPath, i: usize) -> Result<f64> {
    let c = nominal_df_coefficients(params, shocks, expectations, i)?;
    Ok(c.log_value(shocks.period(i)?.variances()).exp())
}

pub fn real_df_approx(params: &DsgeParams, shocks: &ShockSpec, expectations: &ExpectationPath, i: usize) -> Result<f64> {
    let c = real_df_coefficients(params, shocks, expectations, i)?;
    Ok(c.log_value(shocks.period(i)?.variances()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaComponent {
    U,
    V,
    Z,
}

impl LambdaComponent {
    fn index(self) -> usize {
        match self {
            LambdaComponent::U => 0,
            LambdaComponent::V => 1,
            LambdaComponent::Z => 2,
        }
    }
}

/// Which market price of risk is held fixed while the other two are solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaBootstrap {
    pub fixed: LambdaComponent,
    #[serde(default)]
    pub value: f64,
    #[serde(default = "default_bootstrap_tol")]
    pub tol: f64,
}

fn default_bootstrap_tol() -> f64 {
    1e-10
}

impl Default for LambdaBootstrap {
    fn default() -> Self {
        Self { fixed: LambdaComponent::U, value: 0.0, tol: default_bootstrap_tol() }
    }
}

/// One-period nominal and real discount factor targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DfTarget {
    pub nominal: f64,
    pub real: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrappedPeriod {
    pub lambda: [f64; 3],
    /// Log-space residuals of the nominal and real equations.
    pub nominal_residual: f64,
    pub real_residual: f64,
}

/// Per-period targets from a snapshot on the grid implied by `params.tau`.
/// The real bond paying at t_{i+1} carries index growth up to t_i.
pub fn targets_from_snapshot(snapshot: &MarketSnapshot, params: &DsgeParams, n_periods: usize) -> Result<Vec<DfTarget>> {
    let mut out = Vec::with_capacity(n_periods);
    let mut t_prev_prev = 0.0;
    let mut t_prev = 0.0;
    for i in 0..n_periods {
        let t_next = t_prev + params.period_length(i);
        let nominal = snapshot.nominal.df(t_next) / snapshot.nominal.df(t_prev);
        let real_next = snapshot.nominal.df(t_next) * snapshot.inflation.growth(t_prev);
        let real_prev = if i == 0 { 1.0 } else { snapshot.nominal.df(t_prev) * snapshot.inflation.growth(t_prev_prev) };
        out.push(DfTarget { nominal, real: real_next / real_prev });
        t_prev_prev = t_prev;
        t_prev = t_next;
    }
    Ok(out)
}

/// Solves each period's market prices of risk so that the approximate
/// discount factors hit the targets. Both exponents are linear in lambda, so
/// each period is a 2x2 linear system in the two free components; a
/// rank-deficient system takes the minimum-norm solution and fails only if
/// the targets are then missed.
pub fn bootstrap_lambda_targets(
    params: &DsgeParams,
    shocks: &ShockSpec,
    expectations: &ExpectationPath,
    targets: &[DfTarget],
    cfg: LambdaBootstrap,
) -> Result<Vec<BootstrappedPeriod>> {
    let sys = build_system(params)?;
    shocks.validate()?;
    let fixed = cfg.fixed.index();
    let free: Vec<usize> = (0..3).filter(|&j| j != fixed).collect();
    let mut out = Vec::with_capacity(targets.len());
    for (i, target) in targets.iter().enumerate() {
        if !(target.nominal > 0.0 && target.real > 0.0) {
            return Err(invalid(format!("period {i}: discount factor targets must be positive")));
        }
        let period = shocks.period(i)?;
        let l = df_loadings(params, &sys, expectations.period(i)?, i);
        let var = period.variances();
        let mut base = [0.0; 3];
        base[fixed] = cfg.value;
        let log_nom = coefficients(l.nominal_const, l.nominal, base).log_value(var);
        let log_real = coefficients(l.real_const, l.real, base).log_value(var);
        let y = Vector2::new(target.nominal.ln() - log_nom, target.real.ln() - log_real);
        let m = Matrix2::new(l.nominal[free[0]], l.nominal[free[1]], l.real[free[0]], l.real[free[1]]);
        let scale = m.abs().max().max(1e-300);
        let svd = m.svd(true, true);
        let x = svd.solve(&y, 1e-12 * scale).map_err(|e| Error::NoRoot { msg: format!("period {i}: {e}"), residual: y.abs().max() })?;
        let r = m * x - y;
        let residual = r.abs().max();
        if residual > cfg.tol {
            return Err(Error::NoRoot { msg: format!("period {i}: targets unreachable with lambda[{fixed}] fixed"), residual });
        }
        let mut lambda = base;
        lambda[free[0]] = x[0];
        lambda[free[1]] = x[1];
        out.push(BootstrappedPeriod { lambda, nominal_residual: r[0], real_residual: r[1] });
    }
    Ok(out)
}

pub fn bootstrap_lambda(
    snapshot: &MarketSnapshot,
    params: &DsgeParams,
    shocks: &ShockSpec,
    expectations: &ExpectationPath,
    cfg: LambdaBootstrap,
) -> Result<Vec<BootstrappedPeriod>> {
    let targets = targets_from_snapshot(snapshot, params, shocks.periods.len().min(expectations.periods.len()))?;
    bootstrap_lambda_targets(params, shocks, expectations, &targets, cfg)
}

/// Copy of `shocks` carrying bootstrapped market prices of risk.
pub fn with_lambdas(shocks: &ShockSpec, solved: &[BootstrappedPeriod]) -> ShockSpec {
    let mut out = shocks.clone();
    for (p, s) in out.periods.iter_mut().zip(solved) {
        p.lambda = s.lambda;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DsgeMeasure {
    /// Real-world shocks.
    P,
    /// Shocks shifted by their market prices of risk.
    Q,
}

/// One simulated period: output gap, inflation and the rate it sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DsgeSample {
    pub x: f64,
    pub p: f64,
    pub n_next: f64,
}

/// `paths[j][i]` is period i on path j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsgeSimulation {
    pub paths: Vec<Vec<DsgeSample>>,
}

impl DsgeSimulation {
    pub fn column<F: Fn(&DsgeSample) -> f64>(&self, period: usize, f: F) -> Vec<f64> {
        self.paths.iter().map(|p| f(&p[period])).collect()
    }
}

pub fn simulate_dsge(
    params: &DsgeParams,
    shocks: &ShockSpec,
    expectations: &ExpectationPath,
    n_paths: usize,
    seed: u64,
    measure: DsgeMeasure,
) -> Result<DsgeSimulation> {
    let sys = build_system(params)?;
    shocks.validate()?;
    expectations.validate()?;
    if n_paths == 0 {
        return Err(invalid("need at least one path"));
    }
    let n_periods = shocks.periods.len().min(expectations.periods.len());
    if shocks.periods.iter().take(n_periods).any(|p| !p.is_gaussian()) {
        return Err(invalid("simulation supports Gaussian shocks only"));
    }
    let mut drift = Vec::with_capacity(n_periods);
    for i in 0..n_periods {
        let e = expectations.period(i)?;
        let p = &shocks.periods[i];
        let mut mean = sys.a * e;
        if measure == DsgeMeasure::Q {
            mean += sys.c * Vector3::from(p.lambda);
        }
        let sd = p.variances().map(f64::sqrt);
        drift.push((mean, sd));
    }
    let delta = params.delta();
    let paths = (0..n_paths)
        .into_par_iter()
        .map(|j| {
            let mut rng = path_rng(seed, j as u64);
            drift
                .iter()
                .map(|(mean, sd)| {
                    let eps = Vector3::new(
                        sd[0] * Distribution::<f64>::sample(&StandardNormal, &mut rng),
                        sd[1] * Distribution::<f64>::sample(&StandardNormal, &mut rng),
                        sd[2] * Distribution::<f64>::sample(&StandardNormal, &mut rng),
                    );
                    let xi = mean + sys.c * eps;
                    DsgeSample { x: xi[0], p: xi[1], n_next: params.n_bar * (1.0 + delta.dot(&xi)) }
                })
                .collect()
        })
        .collect();
    Ok(DsgeSimulation { paths })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> DsgeParams {
        DsgeParams { sigma: 0.0, k: 0.01, delta_pi: 3.0, delta_x: 1.0, beta: 0.95, n_bar: 0.04, tau: vec![1.0], tau0: 0.0 }
    }

    #[test]
    fn example_system() {
        let s = build_system(&example()).unwrap();
        assert!((s.denominator - 1.03).abs() < 1e-15);
        assert!((s.a[(0, 1)] + 1.85 / 1.03).abs() < 1e-14);
        assert!((s.a[(1, 1)] - 0.96 / 1.03).abs() < 1e-14);
        assert_eq!(s.a[(0, 0)], 0.0);
        assert!((s.k[1] - 0.01 / 1.03).abs() < 1e-15);
        assert_eq!(s.h, Vector3::new(0.0, -s.k[1], 1.0));
    }

    #[test]
    fn unit_system() {
        let p = DsgeParams { sigma: 1.0, k: 1.0, delta_pi: 1.0, delta_x: 0.0, beta: 1.0, ..example() };
        let s = build_system(&p).unwrap();
        assert_eq!(s.a, Matrix2::new(0.5, 0.0, 0.5, 1.0));
    }

    #[test]
    fn stability_examples() {
        let s = stability_check(&example()).unwrap();
        assert!(s.stable && (s.closed_form - 0.07).abs() < 1e-14);
        assert!((s.spectral_radius - 0.96 / 1.03).abs() < 1e-14);
        let edge = DsgeParams { delta_pi: 1.0, delta_x: 0.0, ..example() };
        assert!(!stability_check(&edge).unwrap().stable);
        let bad = DsgeParams { k: 0.3, delta_pi: 0.5, delta_x: 0.0, beta: 0.99, ..example() };
        let s = stability_check(&bad).unwrap();
        assert!(!s.stable && (s.closed_form + 0.15).abs() < 1e-14);
    }

    #[test]
    fn gaussian_higher_moments() {
        let shocks = ShockSpec { periods: vec![PeriodShocks::gaussian(0.01, 0.01, 1e-4)] };
        let e = ExpectationPath { periods: vec![Expectation { ex: -0.02, ep: 0.03 }] };
        let m = inflation_moments(&example(), &shocks, &e, 0).unwrap();
        let k2 = 0.01 / 1.03;
        assert!((m.var - (k2 * k2 * 0.01 + 1e-4)).abs() < 1e-18);
        assert_eq!(m.skew3, 0.0);
        assert!((m.kurt4 - 3.0 * m.var * m.var).abs() < 1e-20);
        let n = short_rate_moments(&example(), &shocks, &e, 0).unwrap();
        assert!((n.kurt4 - 3.0 * n.var * n.var).abs() < 1e-24);
    }

    #[test]
    fn perfect_hedge_zeroes_real_variance_terms() {
        // both hedge conditions hold together when delta_x = 0 and tau_i = tau_{i+1} n_bar delta_pi
        let mut p = DsgeParams { sigma: 0.5, delta_x: 0.0, ..example() };
        p.tau0 = p.n_bar * p.delta_pi;
        let shocks = ShockSpec { periods: vec![PeriodShocks::gaussian(0.01, 0.01, 1e-4)] };
        let e = ExpectationPath { periods: vec![Expectation { ex: 0.0, ep: 0.02 }] };
        let c = real_df_coefficients(&p, &shocks, &e, 0).unwrap();
        assert!(c.c2.abs() < 1e-30 && c.c3.abs() < 1e-30 && c.c4.abs() < 1e-30, "{c:?}");
        let v = real_df_approx(&p, &shocks, &e, 0).unwrap();
        assert!((v - c.c1.exp()).abs() < 1e-16);
    }

    #[test]
    fn bootstrap_identity_and_round_trip() {
        let p = DsgeParams { sigma: 1.5, tau: vec![1.0], tau0: 1.0, ..example() };
        let e = ExpectationPath { periods: vec![Expectation { ex: 0.01, ep: 0.02 }; 3] };
        let mut shocks = ShockSpec { periods: vec![PeriodShocks::gaussian(0.01, 0.02, 1e-4); 3] };
        let targets = |s: &ShockSpec| -> Vec<DfTarget> {
            (0..3).map(|i| DfTarget { nominal: nominal_df_approx(&p, s, &e, i).unwrap(), real: real_df_approx(&p, s, &e, i).unwrap() }).collect()
        };
        let t0 = targets(&shocks);
        let solved = bootstrap_lambda_targets(&p, &shocks, &e, &t0, LambdaBootstrap::default()).unwrap();
        for s in &solved {
            assert!(s.lambda.iter().all(|l| l.abs() < 1e-12));
        }
        for (k, period) in shocks.periods.iter_mut().enumerate() {
            period.lambda = [0.0, 0.3 - 0.1 * k as f64, -0.2 + 0.05 * k as f64];
        }
        let t1 = targets(&shocks);
        let zeroed = ShockSpec { periods: shocks.periods.iter().map(|q| PeriodShocks { lambda: [0.0; 3], ..*q }).collect() };
        let solved = bootstrap_lambda_targets(&p, &zeroed, &e, &t1, LambdaBootstrap::default()).unwrap();
        for (s, q) in solved.iter().zip(&shocks.periods) {
            for j in 0..3 {
                assert!((s.lambda[j] - q.lambda[j]).abs() < 1e-10, "{:?} vs {:?}", s.lambda, q.lambda);
            }
        }
    }

    #[test]
    fn fixing_lambda_z_leaves_a_singular_system() {
        let p = DsgeParams { sigma: 1.5, tau0: 1.0, ..example() };
        let e = ExpectationPath { periods: vec![Expectation { ex: 0.01, ep: 0.02 }] };
        let mut shocks = ShockSpec { periods: vec![PeriodShocks::gaussian(0.01, 0.02, 1e-4)] };
        shocks.periods[0].lambda = [0.0, 0.0, 0.4];
        let t = vec![DfTarget { nominal: nominal_df_approx(&p, &shocks, &e, 0).unwrap(), real: real_df_approx(&p, &shocks, &e, 0).unwrap() }];
        shocks.periods[0].lambda = [0.0; 3];
        let cfg = LambdaBootstrap { fixed: LambdaComponent::Z, ..LambdaBootstrap::default() };
        assert!(matches!(bootstrap_lambda_targets(&p, &shocks, &e, &t, cfg), Err(Error::NoRoot { .. })));
    }

    #[test]
    fn kurtosis_consistency_is_checked() {
        let bad = ShockMoments { var: 1.0, skew: Some(2.0), kurt: Some(3.0) };
        assert!(bad.validate().is_err());
        let ok = ShockMoments { var: 1.0, skew: Some(1.0), kurt: Some(3.0) };
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn zero_variance_simulation_is_deterministic() {
        let shocks = ShockSpec { periods: vec![PeriodShocks::gaussian(0.0, 0.0, 0.0)] };
        let e = ExpectationPath { periods: vec![Expectation { ex: -0.02, ep: 0.0321875 }] };
        let sim = simulate_dsge(&example(), &shocks, &e, 4, 7, DsgeMeasure::P).unwrap();
        let m = inflation_moments(&example(), &shocks, &e, 0).unwrap();
        for s in sim.column(0, |s| s.p) {
            assert!((s - m.mean).abs() < 1e-16);
        }
        assert!((m.mean - 0.03).abs() < 1e-15);
    }
}
