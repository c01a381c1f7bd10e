//! Separable at-the-money calibration of the CTCB model to a market snapshot:
//! nominal curve, inflation option vols, caplet vols, breakevens and the
//! growth drift, followed by variance-split weights targeting a correlation
//! structure.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctcb::{hw_ansatz_from_curve, HullWhiteDual, Model, ModelFunctions, StructuralParams, VarianceWeights};
use crate::error::{invalid, Error, Result};
use crate::inflation::{zc_option, zc_option_from_law, zciis_fair_strike};
use crate::ir_pricing::{caplet_floorlet, CapKind, LognormalLaw, OptionKind};
use crate::market_data::MarketSnapshot;
use crate::math::{self, dot, integrate, path_rng, scale, solve_bracketed};
use crate::step::{ScalarStep, VectorStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Caplets first with b_I held; inflation options may then hit the
    /// variance floor.
    NominalFirst,
    /// Inflation options first (b_I and s_I), then caplets through b_X.
    InflationFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum LambdaPolicy {
    Zero,
    /// Constant market price of risk vector.
    Given(Vec<f64>),
}

/// Target instantaneous correlations between the short-rate change, the
/// index return and the output return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTargets {
    pub rate_infl: f64,
    pub rate_growth: f64,
    pub infl_growth: f64,
}

impl Default for CorrelationTargets {
    fn default() -> Self {
        Self { rate_infl: -0.6, rate_growth: -0.6, infl_growth: 0.7 }
    }
}

impl CorrelationTargets {
    fn as_array(&self) -> [f64; 3] {
        [self.rate_infl, self.rate_growth, self.infl_growth]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibConfig {
    pub strategy: Strategy,
    pub max_iter: usize,
    pub abs_price_tol: f64,
    pub dt: f64,
    /// Number of annual buckets.
    pub horizon: usize,
    pub dim: usize,
    pub targets: CorrelationTargets,
    pub multistart: usize,
    pub seed: u64,
    /// Norm of the maturity-constant b_I.
    pub b_i_norm: f64,
    /// Norm of the realised output volatility s_X, an input of the model.
    pub s_x_norm: f64,
    pub lambda: LambdaPolicy,
    /// Starting weights; defaults to the reference set for n = 3 and equal
    /// weights otherwise.
    pub initial_weights: Option<VarianceWeights>,
    /// Refit the variance split to the correlation targets.
    pub target_correlations: bool,
    pub max_outer: usize,
    pub weight_tol: f64,
}

impl Default for CalibConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::InflationFirst,
            max_iter: 5000,
            abs_price_tol: 1e-8,
            dt: math::DEFAULT_DT,
            horizon: 10,
            dim: 3,
            targets: CorrelationTargets::default(),
            multistart: 16,
            seed: 7,
            b_i_norm: 0.001,
            s_x_norm: 0.01,
            lambda: LambdaPolicy::Zero,
            initial_weights: None,
            target_correlations: true,
            max_outer: 20,
            weight_tol: 1e-9,
        }
    }
}

impl CalibConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.horizon == 0 || self.max_iter == 0 || self.multistart == 0 {
            return Err(invalid("calibration config: dim, horizon, max_iter and multistart must be positive"));
        }
        if !(self.abs_price_tol > 0.0 && self.dt > 0.0 && self.b_i_norm >= 0.0 && self.s_x_norm >= 0.0) {
            return Err(invalid("calibration config: tolerances, step and norms must be positive"));
        }
        if self.targets.as_array().iter().any(|r| !(-1.0..=1.0).contains(r)) {
            return Err(invalid("correlation targets must lie in [-1, 1]"));
        }
        if let LambdaPolicy::Given(l) = &self.lambda {
            if l.len() != self.dim {
                return Err(invalid("lambda must have one component per Brownian dimension"));
            }
        }
        if let Some(w) = &self.initial_weights {
            w.check(self.dim)?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    fn start_weights(&self) -> VarianceWeights {
        match &self.initial_weights {
            Some(w) => w.clone(),
            None if self.dim == 3 => VarianceWeights::reference(),
            None => VarianceWeights::uniform(self.dim),
        }
    }

    fn lambda_vec(&self) -> Vec<f64> {
        match &self.lambda {
            LambdaPolicy::Zero => vec![0.0; self.dim],
            LambdaPolicy::Given(l) => l.clone(),
        }
    }
}

/// Per-bucket norms of the four volatility functions. The direction of each
/// function is its variance-split weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolMagnitudes {
    pub b_i: Vec<f64>,
    pub b_x: Vec<f64>,
    pub s_i: Vec<f64>,
    pub s_x: Vec<f64>,
}

impl VolMagnitudes {
    pub fn constant(horizon: usize, b_i: f64, s_x: f64) -> Self {
        Self { b_i: vec![b_i; horizon], b_x: vec![0.0; horizon], s_i: vec![0.0; horizon], s_x: vec![s_x; horizon] }
    }

    fn slot(&mut self, f: VolFn) -> &mut Vec<f64> {
        match f {
            VolFn::BI => &mut self.b_i,
            VolFn::BX => &mut self.b_x,
            VolFn::SI => &mut self.s_i,
        }
    }

    /// Writes magnitudes times weights into the vector functions of `funcs`.
    pub fn apply(&self, w: &VarianceWeights, funcs: &mut ModelFunctions) {
        let build = |mags: &[f64], dir: &[f64]| VectorStep::annual(mags.iter().map(|&m| scale(m, dir)).collect());
        funcs.b_i = build(&self.b_i, &w.b_i);
        funcs.b_x = build(&self.b_x, &w.b_x);
        funcs.s_i = build(&self.s_i, &w.s_i);
        funcs.s_x = build(&self.s_x, &w.s_x);
        funcs.weights = Some(w.clone());
    }
}

/// Which volatility norm a bucket solve moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolFn {
    BI,
    BX,
    SI,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostic {
    pub step: String,
    pub maturity: f64,
    pub iterations: usize,
    pub residual: f64,
    pub floored: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instrument {
    NominalZero,
    Breakeven,
    Caplet,
    ZcOption,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentError {
    pub instrument: Instrument,
    pub maturity: f64,
    pub market: f64,
    pub model: f64,
    /// model - market.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub target: CorrelationTargets,
    pub achieved: CorrelationTargets,
    pub objective: f64,
    pub starts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibResult {
    pub structural: StructuralParams,
    pub funcs: ModelFunctions,
    pub dual: HullWhiteDual,
    pub magnitudes: VolMagnitudes,
    pub errors: Vec<InstrumentError>,
    pub max_abs_error: f64,
    pub diagnostics: Vec<StepDiagnostic>,
    pub correlations: CorrelationReport,
    pub outer_iterations: usize,
    pub dt: f64,
}

impl CalibResult {
    pub fn model(&self) -> Model {
        Model { structural: self.structural, funcs: self.funcs.clone(), dt: self.dt }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-maturity table of the calibrated functions together with the
    /// derived s_M and s_L at each bucket start.
    pub fn table_csv(&self) -> Result<String> {
        let f = &self.funcs;
        let n = f.dim;
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["maturity".to_string()];
        for name in ["b_i", "s_i"] {
            header.extend((1..=n).map(|k| format!("{name}_{k}")));
        }
        header.push("a_i".into());
        for name in ["b_x", "s_x"] {
            header.extend((1..=n).map(|k| format!("{name}_{k}")));
        }
        header.push("a_x".into());
        for name in ["s_m", "s_l"] {
            header.extend((1..=n).map(|k| format!("{name}_{k}")));
        }
        w.write_record(&header)?;
        for k in 0..self.magnitudes.b_i.len() {
            let t = k as f64;
            let mut row = vec![format!("{}", k + 1)];
            let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.9}")).collect::<Vec<_>>();
            row.extend(fmt(f.b_i.at(t)));
            row.extend(fmt(f.s_i.at(t)));
            row.push(format!("{:.9}", f.a_i.at(t)));
            row.extend(fmt(f.b_x.at(t)));
            row.extend(fmt(f.s_x.at(t)));
            row.push(format!("{:.9}", f.a_x.at(t)));
            row.extend(fmt(&f.s_m(t, &self.structural)));
            row.extend(fmt(&f.s_l(t, &self.structural)));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }

    pub fn errors_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.errors {
            w.serialize(e)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }
}

/// Fits the Hull-White dual (beta, A0) to the nominal curve.
pub fn fit_nominal(snapshot: &MarketSnapshot, structural: &StructuralParams, dt: f64) -> Result<HullWhiteDual> {
    hw_ansatz_from_curve(&snapshot.nominal, structural, None, dt)
}

fn maturities(snapshot: &MarketSnapshot) -> &[f64] {
    &snapshot.quotes.maturities
}

fn check_annual(snapshot: &MarketSnapshot) -> Result<()> {
    let ok = snapshot.quotes.maturities.iter().enumerate().all(|(k, &m)| (m - (k + 1) as f64).abs() < 1e-12);
    if !ok {
        return Err(invalid("calibration needs an annual snapshot (use resample_annual)"));
    }
    Ok(())
}

/// Total log-variance of I(T)/I(0): the integral of |g4|^2.
pub fn zc_total_variance(model: &Model, big_t: f64) -> f64 {
    let f = &model.funcs;
    integrate(0.0, big_t, model.dt, |s| {
        let g: Vec<f64> = f.b_i.at(s).iter().zip(f.s_i.at(s)).map(|(b, si)| (big_t - s) * b + si).collect();
        dot(&g, &g)
    })
}

/// ATM ZC option PV when the model forward matches the market breakeven.
pub fn atm_zc_pv(model: &Model, snapshot: &MarketSnapshot, big_t: f64) -> Result<f64> {
    let v = zc_total_variance(model, big_t).max(0.0).sqrt();
    let g = snapshot.inflation.growth(big_t);
    let law = LognormalLaw { m: g.ln() - 0.5 * v * v, v };
    Ok(zc_option_from_law(law, big_t, snapshot.inflation.breakeven(big_t), OptionKind::Call, snapshot.nominal.df(big_t))?.discounted)
}

/// ATM caplet fixing at `t1` and paying at `t1 + 1`.
pub fn atm_caplet_pv(model: &Model, snapshot: &MarketSnapshot, t1: f64) -> Result<f64> {
    let dual = hw_ansatz_from_curve(&snapshot.nominal, &model.structural, Some(&model.funcs), model.dt)?;
    let t2 = t1 + 1.0;
    caplet_floorlet(CapKind::Caplet, 0.0, t1, t2, snapshot.nominal.forward_rate(t1, t2), 1.0, &dual)
}

struct Solved {
    x: f64,
    iterations: usize,
    residual: f64,
    floored: bool,
}

/// Solves `price(x) = target` for x >= lo where price increases in x. When
/// even `lo` overprices, returns `lo` flagged as floored.
fn solve_increasing<F>(mut price: F, target: f64, lo: f64, cfg: &CalibConfig) -> Result<Solved>
where
    F: FnMut(f64) -> Result<f64>,
{
    let f_lo = price(lo)? - target;
    if f_lo.abs() <= cfg.abs_price_tol {
        return Ok(Solved { x: lo, iterations: 0, residual: f_lo.abs(), floored: false });
    }
    if f_lo > 0.0 {
        return Ok(Solved { x: lo, iterations: 0, residual: f_lo, floored: true });
    }
    let mut hi = lo.abs().max(1e-3) * 2.0;
    let mut f_hi = price(hi)? - target;
    let mut doublings = 0;
    while f_hi < 0.0 {
        hi *= 2.0;
        f_hi = price(hi)? - target;
        doublings += 1;
        if doublings > 60 || !f_hi.is_finite() {
            return Err(Error::NoRoot { msg: "price cannot reach the market quote".into(), residual: f_hi.abs() });
        }
    }
    let mut failure: Option<Error> = None;
    let root = solve_bracketed(
        |x| match price(x) {
            Ok(p) => (p - target, f64::NAN),
            Err(e) => {
                failure.get_or_insert(e);
                (0.0, f64::NAN)
            }
        },
        lo,
        hi,
        0.5 * (lo + hi),
        cfg.abs_price_tol,
        cfg.max_iter,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let r = root?;
    Ok(Solved { x: r.x, iterations: r.iterations, residual: r.residual, floored: false })
}

fn model_from(structural: &StructuralParams, base: &ModelFunctions, mags: &VolMagnitudes, w: &VarianceWeights, dt: f64) -> Model {
    let mut funcs = base.clone();
    mags.apply(w, &mut funcs);
    Model { structural: *structural, funcs, dt }
}

/// Bucket-by-bucket inflation-option fit. The maturity-constant b_I stays as
/// given and s_I absorbs each bucket's variance. When `free_b_i` is set, a
/// bucket whose variance is already exceeded switches to solving b_I with
/// s_I at zero.
pub fn fit_inflation_vols(
    snapshot: &MarketSnapshot,
    structural: &StructuralParams,
    base: &ModelFunctions,
    mags: &mut VolMagnitudes,
    weights: &VarianceWeights,
    free_b_i: bool,
    cfg: &CalibConfig,
) -> Result<Vec<StepDiagnostic>> {
    check_annual(snapshot)?;
    let mut diags = Vec::new();
    for (k, &big_t) in maturities(snapshot).iter().enumerate() {
        let market = snapshot.quotes.atm_zc_infl_option_pv[k];
        // minimiser of the bucket's |(T-s) b_I + sigma w_sI|^2 contribution over sigma >= 0
        let lo = (-0.5 * mags.b_i[k] * dot(&weights.b_i, &weights.s_i)).max(0.0);
        let price = |f: VolFn, x: f64, m: &mut VolMagnitudes| {
            m.slot(f)[k] = x;
            atm_zc_pv(&model_from(structural, base, m, weights, cfg.dt), snapshot, big_t)
        };
        let mut trial = mags.clone();
        let solved = solve_increasing(|x| price(VolFn::SI, x, &mut trial), market, lo, cfg)?;
        if !solved.floored {
            mags.s_i[k] = solved.x;
            diags.push(StepDiagnostic {
                step: "zc_option:s_i".into(),
                maturity: big_t,
                iterations: solved.iterations,
                residual: solved.residual,
                floored: false,
                note: None,
            });
            continue;
        }
        if free_b_i {
            let mut trial = mags.clone();
            trial.s_i[k] = 0.0;
            let alt = solve_increasing(|x| price(VolFn::BI, x, &mut trial), market, 0.0, cfg)?;
            mags.s_i[k] = 0.0;
            mags.b_i[k] = alt.x;
            diags.push(StepDiagnostic {
                step: "zc_option:b_i".into(),
                maturity: big_t,
                iterations: alt.iterations,
                residual: alt.residual,
                floored: alt.floored,
                note: Some(if alt.floored {
                    "variance from earlier buckets exceeds the quote; b_I and s_I floored at zero".into()
                } else {
                    "s_I floor reached; bucket solved through b_I".into()
                }),
            });
        } else {
            mags.s_i[k] = lo;
            diags.push(StepDiagnostic {
                step: "zc_option:s_i".into(),
                maturity: big_t,
                iterations: 0,
                residual: solved.residual,
                floored: true,
                note: Some("held b_I already exceeds the quoted variance; s_I floored".into()),
            });
        }
    }
    Ok(diags)
}

/// Bucket-by-bucket caplet fit through the norm of `unknown` (b_X or b_I).
/// The caplet fixing at T reads the short-rate variance up to T, so bucket
/// [T-1, T) is the first one it sees.
pub fn fit_rate_vols(
    snapshot: &MarketSnapshot,
    structural: &StructuralParams,
    base: &ModelFunctions,
    mags: &mut VolMagnitudes,
    weights: &VarianceWeights,
    unknown: VolFn,
    cfg: &CalibConfig,
) -> Result<Vec<StepDiagnostic>> {
    check_annual(snapshot)?;
    if unknown == VolFn::SI {
        return Err(invalid("caplets calibrate b_X or b_I only"));
    }
    let mut diags = Vec::new();
    for (k, &t1) in maturities(snapshot).iter().enumerate() {
        let market = snapshot.quotes.atm_caplet_pv[k];
        // |h_x b_X + h_p b_I| is minimised over the unknown's norm at `lo`
        let lo = match unknown {
            VolFn::BX => (-structural.h_p * mags.b_i[k] * dot(&weights.b_x, &weights.b_i) / structural.h_x).max(0.0),
            _ => (-structural.h_x * mags.b_x[k] * dot(&weights.b_x, &weights.b_i) / structural.h_p).max(0.0),
        };
        let mut trial = mags.clone();
        let solved = solve_increasing(
            |x| {
                trial.slot(unknown)[k] = x;
                atm_caplet_pv(&model_from(structural, base, &trial, weights, cfg.dt), snapshot, t1)
            },
            market,
            lo,
            cfg,
        )?;
        mags.slot(unknown)[k] = solved.x;
        diags.push(StepDiagnostic {
            step: format!("caplet:{}", if unknown == VolFn::BX { "b_x" } else { "b_i" }),
            maturity: t1,
            iterations: solved.iterations,
            residual: solved.residual,
            floored: solved.floored,
            note: solved.floored.then(|| "short-rate variance from earlier buckets exceeds the quote; norm floored".into()),
        });
    }
    Ok(diags)
}

/// Solves a_I bucket by bucket so the model ZC swap rate equals the market
/// breakeven. The fair strike's log-growth is linear in each bucket's a_I.
pub fn fit_breakevens(snapshot: &MarketSnapshot, model: &mut Model) -> Result<Vec<StepDiagnostic>> {
    check_annual(snapshot)?;
    let ms = maturities(snapshot).to_vec();
    let mut a = vec![0.0; ms.len()];
    let mut diags = Vec::new();
    let log_growth = |model: &Model, big_t: f64| -> Result<f64> {
        let k = zciis_fair_strike(model, 0.0, big_t, model.funcs.m_i0)?;
        Ok(big_t * (1.0 + k).ln())
    };
    for (k, &big_t) in ms.iter().enumerate() {
        let target = big_t * (1.0 + snapshot.inflation.breakeven(big_t)).ln();
        a[k] = 0.0;
        model.funcs.a_i = ScalarStep::annual(a.clone());
        let y0 = log_growth(model, big_t)?;
        a[k] = 1.0;
        model.funcs.a_i = ScalarStep::annual(a.clone());
        let slope = log_growth(model, big_t)? - y0;
        if !(slope.abs() > 0.0) {
            return Err(invalid("breakeven is insensitive to a_I"));
        }
        a[k] = (target - y0) / slope;
        model.funcs.a_i = ScalarStep::annual(a.clone());
        let fitted = zciis_fair_strike(model, 0.0, big_t, model.funcs.m_i0)?;
        diags.push(StepDiagnostic {
            step: "breakeven:a_i".into(),
            maturity: big_t,
            iterations: 1,
            residual: (fitted - snapshot.inflation.breakeven(big_t)).abs(),
            floored: false,
            note: None,
        });
    }
    Ok(diags)
}

/// Left limit of the instantaneous forward f(0, t-) by a backward difference
/// of log P(0, t).
fn forward_left(curve: &crate::market_data::NominalCurve, t: f64) -> f64 {
    if t <= 0.0 {
        return curve.short_rate();
    }
    let h = 1e-7 * t.max(1.0);
    (curve.df(t - h).ln() - curve.df(t).ln()) / h
}

/// a_X per bucket from the curve-implied mean-reversion level:
/// a_X = -(zeta theta + h_p a_I) / h_x with zeta theta averaged over the bucket.
///
/// Since zeta' = delta zeta, the curve part of zeta theta integrates to
/// [zeta f(0, .)] between the bucket ends. Taking left limits of the forward
/// keeps each pillar's forward jump in the bucket it opens, so the expected
/// short rate implied by the drifts lands on f(0, T-) plus the convexity term
/// at every pillar.
pub fn derive_growth_drift(snapshot: &MarketSnapshot, model: &mut Model) -> Result<()> {
    let s = model.structural;
    let dual = hw_ansatz_from_curve(&snapshot.nominal, &s, Some(&model.funcs), model.dt)?;
    let ms = maturities(snapshot).to_vec();
    let mut a_x = Vec::with_capacity(ms.len());
    let mut prev = 0.0;
    let funcs = &model.funcs;
    for &m in &ms {
        let curve_part = s.zeta(m) * forward_left(&snapshot.nominal, m) - s.zeta(prev) * forward_left(&snapshot.nominal, prev);
        let rest = integrate(prev, m, model.dt, |t| {
            let sigma = dual.sigma_n_at(t);
            let bp = s.delta * dual.beta(t);
            s.zeta(t) * (dot(funcs.lambda.at(t), &sigma) + bp * bp * dual.scaled_var_integral(0.0, t))
        });
        let zeta_theta = (curve_part + rest) / (m - prev);
        let a_i = *funcs.a_i.at(prev);
        a_x.push(-(zeta_theta + s.h_p * a_i) / s.h_x);
        prev = m;
    }
    model.funcs.a_x = ScalarStep::annual(a_x);
    Ok(())
}

/// Instantaneous correlations at the origin from the first bucket's norms:
/// (rate, index), (rate, output), (index, output).
pub fn model_correlations(structural: &StructuralParams, mags: &VolMagnitudes, w: &VarianceWeights) -> [f64; 3] {
    let z = structural.zeta(0.0);
    let sn: Vec<f64> = w.b_x.iter().zip(&w.b_i).map(|(x, i)| -(structural.h_x * mags.b_x[0] * x + structural.h_p * mags.b_i[0] * i) / z).collect();
    let si = scale(mags.s_i[0], &w.s_i);
    let sx = scale(mags.s_x[0], &w.s_x);
    [corr(&sn, &si), corr(&sn, &sx), corr(&si, &sx)]
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let d = math::norm(a) * math::norm(b);
    if d > 0.0 {
        dot(a, b) / d
    } else {
        0.0
    }
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = math::norm(v);
    if n > 0.0 {
        scale(1.0 / n, v)
    } else {
        let mut e = vec![0.0; v.len()];
        e[0] = 1.0;
        e
    }
}

fn weights_from_raw(x: &[f64], n: usize) -> VarianceWeights {
    VarianceWeights { b_i: unit(&x[0..n]), b_x: unit(&x[n..2 * n]), s_i: unit(&x[2 * n..3 * n]), s_x: unit(&x[3 * n..4 * n]) }
}

fn raw_from_weights(w: &VarianceWeights) -> Vec<f64> {
    [&w.b_i, &w.b_x, &w.s_i, &w.s_x].iter().flat_map(|v| v.iter().copied()).collect()
}

fn weight_distance(a: &VarianceWeights, b: &VarianceWeights) -> f64 {
    raw_from_weights(a).iter().zip(raw_from_weights(b)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Levenberg-Marquardt on the normalised raw weight vectors.
fn levenberg_marquardt<F: Fn(&[f64]) -> [f64; 3]>(res: F, x0: Vec<f64>, max_iter: usize) -> (Vec<f64>, f64) {
    let obj = |r: &[f64; 3]| r.iter().map(|v| v * v).sum::<f64>();
    let p = x0.len();
    let mut x = x0;
    let mut r = res(&x);
    let mut f = obj(&r);
    let mut mu = 1e-3;
    for _ in 0..max_iter {
        if f < 1e-28 {
            break;
        }
        let h = 1e-7;
        let mut jac = DMatrix::<f64>::zeros(3, p);
        for j in 0..p {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let (rp, rm) = (res(&xp), res(&xm));
            for i in 0..3 {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let rv = DVector::from_row_slice(&r);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * rv;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for d in 0..p {
                a[(d, d)] += mu * (1.0 + jtj[(d, d)]);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                mu *= 10.0;
                continue;
            };
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rn = res(&xn);
            let fnew = obj(&rn);
            if fnew < f {
                // project back to unit blocks so the scale of the raw vector stays bounded
                let n = p / 4;
                x = raw_from_weights(&weights_from_raw(&xn, n));
                r = res(&x);
                f = obj(&r);
                mu = (mu / 3.0).max(1e-12);
                improved = true;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (x, f)
}

/// Finds unit-norm weights matching the correlation targets, best of
/// `cfg.multistart` starts; start 0 is `warm`.
pub fn correlation_target(
    structural: &StructuralParams,
    mags: &VolMagnitudes,
    warm: &VarianceWeights,
    cfg: &CalibConfig,
) -> Result<(VarianceWeights, CorrelationReport)> {
    cfg.validate()?;
    let n = cfg.dim;
    let targets = cfg.targets.as_array();
    let residual = |x: &[f64]| {
        let c = model_correlations(structural, mags, &weights_from_raw(x, n));
        [c[0] - targets[0], c[1] - targets[1], c[2] - targets[2]]
    };
    let starts: Vec<Vec<f64>> = (0..cfg.multistart)
        .map(|i| {
            if i == 0 {
                raw_from_weights(warm)
            } else {
                let mut rng = path_rng(cfg.seed, i as u64);
                (0..4 * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
            }
        })
        .collect();
    let runs: Vec<(Vec<f64>, f64)> = starts.into_par_iter().map(|x0| levenberg_marquardt(residual, x0, 500)).collect();
    // earliest start wins ties so the warm start keeps the solution stable
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.1 < runs[best].1 - 1e-20 {
            best = i;
        }
    }
    let w = weights_from_raw(&runs[best].0, n);
    let c = model_correlations(structural, mags, &w);
    let report = CorrelationReport {
        target: cfg.targets,
        achieved: CorrelationTargets { rate_infl: c[0], rate_growth: c[1], infl_growth: c[2] },
        objective: runs[best].1,
        starts: cfg.multistart,
    };
    Ok((w, report))
}

struct Fit {
    model: Model,
    mags: VolMagnitudes,
    diagnostics: Vec<StepDiagnostic>,
}

fn fit_once(snapshot: &MarketSnapshot, structural: &StructuralParams, weights: &VarianceWeights, cfg: &CalibConfig) -> Result<Fit> {
    let h = snapshot.quotes.maturities.len();
    let mut base = ModelFunctions::zeros(cfg.dim);
    base.lambda = VectorStep::constant(cfg.lambda_vec());
    let mut mags = VolMagnitudes::constant(h, cfg.b_i_norm, cfg.s_x_norm);
    let mut diagnostics = Vec::new();
    match cfg.strategy {
        Strategy::InflationFirst => {
            diagnostics.extend(fit_inflation_vols(snapshot, structural, &base, &mut mags, weights, true, cfg)?);
            diagnostics.extend(fit_rate_vols(snapshot, structural, &base, &mut mags, weights, VolFn::BX, cfg)?);
        }
        Strategy::NominalFirst => {
            diagnostics.extend(fit_rate_vols(snapshot, structural, &base, &mut mags, weights, VolFn::BX, cfg)?);
            diagnostics.extend(fit_inflation_vols(snapshot, structural, &base, &mut mags, weights, false, cfg)?);
        }
    }
    let mut model = model_from(structural, &base, &mags, weights, cfg.dt);
    model.funcs.m_i0 = (1.0 + snapshot.inflation.breakeven(snapshot.quotes.maturities[0])).ln();
    diagnostics.extend(fit_breakevens(snapshot, &mut model)?);
    derive_growth_drift(snapshot, &mut model)?;
    let n0 = snapshot.nominal.short_rate();
    model.funcs.m_x0 = -(structural.zeta(0.0) * n0 + structural.h_p * model.funcs.m_i0) / structural.h_x;
    Ok(Fit { model, mags, diagnostics })
}

/// Reprices every calibration instrument from scratch with the pricing
/// modules only.
pub fn reprice(snapshot: &MarketSnapshot, model: &Model) -> Result<Vec<InstrumentError>> {
    let s = &model.structural;
    let bare = hw_ansatz_from_curve(&snapshot.nominal, s, None, model.dt)?;
    let dual = hw_ansatz_from_curve(&snapshot.nominal, s, Some(&model.funcs), model.dt)?;
    let mut out = Vec::new();
    let mut push =
        |instrument, maturity, market: f64, model: f64| out.push(InstrumentError { instrument, maturity, market, model, error: model - market });
    for (k, &m) in snapshot.quotes.maturities.iter().enumerate() {
        push(Instrument::NominalZero, m, snapshot.nominal.df(m), bare.p0(m));
        let be = snapshot.inflation.breakeven(m);
        push(Instrument::Breakeven, m, be, zciis_fair_strike(model, 0.0, m, model.funcs.m_i0)?);
        let cap = caplet_floorlet(CapKind::Caplet, 0.0, m, m + 1.0, snapshot.nominal.forward_rate(m, m + 1.0), 1.0, &dual)?;
        push(Instrument::Caplet, m, snapshot.quotes.atm_caplet_pv[k], cap);
        let zc = zc_option(model, 0.0, m, be, OptionKind::Call, model.funcs.m_i0, snapshot.nominal.df(m))?.discounted;
        push(Instrument::ZcOption, m, snapshot.quotes.atm_zc_infl_option_pv[k], zc);
    }
    Ok(out)
}

/// Full pipeline: fit in the configured order, retarget the variance split,
/// refit until the weights settle, then reprice every instrument.
pub fn calibrate(snapshot: &MarketSnapshot, structural: &StructuralParams, cfg: &CalibConfig) -> Result<CalibResult> {
    cfg.validate()?;
    structural.validate()?;
    check_annual(snapshot)?;
    let mut weights = cfg.start_weights();
    let mut outer = 0;
    let mut fit;
    loop {
        outer += 1;
        fit = fit_once(snapshot, structural, &weights, cfg)?;
        if !cfg.target_correlations || outer >= cfg.max_outer {
            break;
        }
        let (next, _) = correlation_target(structural, &fit.mags, &weights, cfg)?;
        let moved = weight_distance(&next, &weights);
        weights = next;
        if moved < cfg.weight_tol {
            fit = fit_once(snapshot, structural, &weights, cfg)?;
            break;
        }
    }
    if cfg.target_correlations && outer >= cfg.max_outer {
        fit.diagnostics.push(StepDiagnostic {
            step: "correlation:outer".into(),
            maturity: 0.0,
            iterations: outer,
            residual: f64::NAN,
            floored: false,
            note: Some("weights still moving at the outer iteration cap".into()),
        });
    }
    let c = model_correlations(structural, &fit.mags, &weights);
    let t = cfg.targets.as_array();
    let correlations = CorrelationReport {
        target: cfg.targets,
        achieved: CorrelationTargets { rate_infl: c[0], rate_growth: c[1], infl_growth: c[2] },
        objective: (0..3).map(|i| (c[i] - t[i]).powi(2)).sum(),
        starts: cfg.multistart,
    };
    let errors = reprice(snapshot, &fit.model)?;
    let max_abs_error = errors.iter().map(|e| e.error.abs()).fold(0.0, f64::max);
    let dual = hw_ansatz_from_curve(&snapshot.nominal, structural, Some(&fit.model.funcs), cfg.dt)?;
    Ok(CalibResult {
        structural: *structural,
        funcs: fit.model.funcs,
        dual,
        magnitudes: fit.mags,
        errors,
        max_abs_error,
        diagnostics: fit.diagnostics,
        correlations,
        outer_iterations: outer,
        dt: cfg.dt,
    })
}

/// Reprices the ATM quotes of a snapshot from a given model: the synthetic
/// market used for round trips.
pub fn synthetic_snapshot(model: &Model, nominal: &crate::market_data::NominalCurve, horizon: usize) -> Result<MarketSnapshot> {
    let mut rows = Vec::with_capacity(horizon);
    let dual = hw_ansatz_from_curve(nominal, &model.structural, Some(&model.funcs), model.dt)?;
    for k in 1..=horizon {
        let m = k as f64;
        let be = zciis_fair_strike(model, 0.0, m, model.funcs.m_i0)?;
        let cap = caplet_floorlet(CapKind::Caplet, 0.0, m, m + 1.0, nominal.forward_rate(m, m + 1.0), 1.0, &dual)?;
        let zc = zc_option(model, 0.0, m, be, OptionKind::Call, model.funcs.m_i0, nominal.df(m))?.discounted;
        rows.push(crate::market_data::SnapshotRow {
            maturity_years: m,
            nominal_ir: nominal.rate(m),
            zc_breakeven: be,
            atm_caplet_pv: cap,
            atm_zc_infl_option_pv: zc,
        });
    }
    MarketSnapshot::from_rows(None, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn structural() -> StructuralParams {
        StructuralParams { delta: 0.05, omega: 5.0, h_x: 2.5, h_p: 1.75, x_bar: 0.02, p_bar: 0.02 }
    }

    #[test]
    fn reference_weights_give_known_infl_growth_corr() {
        let w = VarianceWeights::reference();
        let m = VolMagnitudes { b_i: vec![0.001], b_x: vec![0.004], s_i: vec![0.01], s_x: vec![0.01] };
        let c = model_correlations(&structural(), &m, &w);
        assert!((c[2] - dot(&w.s_i, &w.s_x)).abs() < 1e-15);
        assert!((c[2] - 0.623).abs() < 1e-3);
    }

    #[test]
    fn one_dimension_is_degenerate() {
        let cfg = CalibConfig { dim: 1, multistart: 4, ..CalibConfig::default() };
        let m = VolMagnitudes { b_i: vec![0.001], b_x: vec![0.004], s_i: vec![0.01], s_x: vec![0.01] };
        let (w, rep) = correlation_target(&structural(), &m, &VarianceWeights::uniform(1), &cfg).unwrap();
        for c in [rep.achieved.rate_infl, rep.achieved.rate_growth, rep.achieved.infl_growth] {
            assert!((c.abs() - 1.0).abs() < 1e-12);
        }
        assert!(rep.objective > 0.1);
        assert!(w.check(1).is_ok());
    }

    #[test]
    fn solver_floors_when_minimum_overprices() {
        let cfg = CalibConfig::default();
        let s = solve_increasing(|x| Ok(1.0 + x), 0.5, 0.0, &cfg).unwrap();
        assert!(s.floored && s.x == 0.0);
        let s = solve_increasing(|x| Ok(x * x), 0.25, 0.0, &cfg).unwrap();
        assert!(!s.floored && (s.x - 0.5).abs() < 1e-7);
    }
}
