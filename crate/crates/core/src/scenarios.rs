//! Trade pricing on a calibrated model, the inflation delta, structural and
//! curve stress runs with recalibration, and conditional Monte Carlo hedge
//! reports.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate, derive_growth_drift, fit_breakevens, CalibConfig, CalibResult};
use crate::ctcb::{hw_ansatz_from_curve, Model, StructuralParams};
use crate::error::{invalid, Error, Result};
use crate::inflation::{yoy_option, zc_option, zciis_fair_strike};
use crate::ir_pricing::{caplet_floorlet, swaption, CapKind, OptionKind, SwapSchedule, SwaptionKind};
use crate::market_data::{MarketSnapshot, NominalCurve};
use crate::math::mean_se;
use crate::monte_carlo::{conditional_scenario, price_mc, simulate, Measure, PathView, Paths, ScenarioReport, SimConfig, Statistic};

/// A path functional as used by the conditional reports.
type PathFn = dyn Fn(&PathView) -> Result<f64> + Sync;

/// A priced product. Maturities are in years from today, strikes in decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "product", rename_all = "kebab-case")]
pub enum Product {
    /// ZC inflation cap (call) or floor (put) on I(T)/I(0) against (1+K)^T.
    ZcOption { maturity: f64, strike: f64, kind: OptionKind },
    /// YoY caplet or floorlet on I(T)/I(T-1) against 1+K, paid at T.
    YoyOption { maturity: f64, strike: f64, kind: OptionKind },
    /// Receiver of realised inflation on a ZC swap: I(T)/I(0) - (1+K)^T at T.
    Zciis { maturity: f64, strike: f64 },
    /// Caplet or floorlet on the simple rate over [T1, T2], paid at T2.
    Caplet { start: f64, end: f64, strike: f64, kind: CapKind },
    /// Swaption on an annual swap from `expiry` to `expiry + tenor`.
    Swaption { expiry: f64, tenor: usize, strike: f64, kind: SwaptionKind },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub name: String,
    pub product: Product,
    pub notional: f64,
}

impl Trade {
    pub fn new(name: impl Into<String>, product: Product, notional: f64) -> Self {
        Self { name: name.into(), product, notional }
    }
}

/// Closed-form PV at time 0 of one unit of `product`, discounting on `curve`.
pub fn price_product(model: &Model, curve: &NominalCurve, product: &Product) -> Result<f64> {
    let m_i0 = model.funcs.m_i0;
    match *product {
        Product::ZcOption { maturity, strike, kind } => Ok(zc_option(model, 0.0, maturity, strike, kind, m_i0, curve.df(maturity))?.discounted),
        Product::YoyOption { maturity, strike, kind } => {
            if !(maturity >= 1.0) {
                return Err(invalid("YoY option maturity must be at least one year"));
            }
            let tj = maturity - 1.0;
            Ok(yoy_option(model, 0.0, tj, maturity, strike, kind, m_i0, curve.df(maturity))?.discounted)
        }
        Product::Zciis { maturity, strike } => {
            let fair = zciis_fair_strike(model, 0.0, maturity, m_i0)?;
            Ok(curve.df(maturity) * ((1.0 + fair).powf(maturity) - (1.0 + strike).powf(maturity)))
        }
        Product::Caplet { start, end, strike, kind } => {
            let dual = hw_ansatz_from_curve(curve, &model.structural, Some(&model.funcs), model.dt)?;
            caplet_floorlet(kind, 0.0, start, end, strike, 1.0, &dual)
        }
        Product::Swaption { expiry, tenor, strike, kind } => {
            if tenor == 0 {
                return Err(invalid("swaption tenor must be at least one year"));
            }
            let dual = hw_ansatz_from_curve(curve, &model.structural, Some(&model.funcs), model.dt)?;
            let schedule = SwapSchedule { expiry, payments: (1..=tenor).map(|k| expiry + k as f64).collect(), fixed_rate: strike };
            swaption(kind, &schedule, &dual)
        }
    }
}

pub fn price_trade(model: &Model, curve: &NominalCurve, trade: &Trade) -> Result<f64> {
    Ok(trade.notional * price_product(model, curve, &trade.product)?)
}

/// Monte Carlo estimate of a product under the T-forward measure of its
/// payment date, for cross-checking the closed forms.
pub fn price_product_mc(model: &Model, curve: &NominalCurve, product: &Product, n_paths: usize, seed: u64) -> Result<(f64, f64)> {
    let pay = match *product {
        Product::ZcOption { maturity, .. } | Product::YoyOption { maturity, .. } | Product::Zciis { maturity, .. } => maturity,
        Product::Caplet { end, .. } => end,
        Product::Swaption { .. } => return Err(invalid("no Monte Carlo cross-check for swaptions")),
    };
    let mut grid = vec![pay];
    if let Product::Caplet { start, .. } = *product {
        grid.push(start);
    }
    if let Product::YoyOption { maturity, .. } = *product {
        grid.push(maturity - 1.0);
    }
    let horizon = pay.ceil() as usize;
    let cfg = SimConfig::annual(n_paths, horizon, seed, Measure::Forward(pay)).with_dates(&grid);
    let paths = simulate(model, &cfg)?;
    let df = curve.df(pay);
    let r = match *product {
        Product::ZcOption { maturity, strike, kind } => {
            let g = (1.0 + strike).powf(maturity);
            price_mc(&paths, pay, df, |p| Ok((kind.omega() * (p.index(maturity)? - g)).max(0.0)))?
        }
        Product::YoyOption { maturity, strike, kind } => {
            price_mc(&paths, pay, df, |p| Ok((kind.omega() * (p.index_ratio(maturity - 1.0, maturity)? - 1.0 - strike)).max(0.0)))?
        }
        Product::Zciis { maturity, strike } => {
            let g = (1.0 + strike).powf(maturity);
            price_mc(&paths, pay, df, |p| Ok(p.index(maturity)? - g))?
        }
        Product::Caplet { start, end, strike, kind } => {
            let w = match kind {
                CapKind::Caplet => 1.0,
                CapKind::Floorlet => -1.0,
            };
            let tau = end - start;
            price_mc(&paths, pay, df, |p| Ok(tau * (w * (p.forward_rate(start, start, end)? - strike)).max(0.0)))?
        }
        Product::Swaption { .. } => unreachable!(),
    };
    Ok((r.pv, r.standard_error))
}

/// Size of the parallel breakeven bump used for the inflation delta.
pub const ONE_BP: f64 = 1e-4;

/// Refits the inflation drift leg (m_I(0), a_I and the dependent a_X, m_X(0))
/// to `snapshot` with every volatility held.
pub fn refit_inflation_leg(snapshot: &MarketSnapshot, model: &Model) -> Result<Model> {
    let mut m = model.clone();
    let s = m.structural;
    m.funcs.m_i0 = (1.0 + snapshot.inflation.breakeven(snapshot.quotes.maturities[0])).ln();
    fit_breakevens(snapshot, &mut m)?;
    derive_growth_drift(snapshot, &mut m)?;
    m.funcs.m_x0 = -(s.zeta(0.0) * snapshot.nominal.short_rate() + s.h_p * m.funcs.m_i0) / s.h_x;
    Ok(m)
}

/// PV change of `trade` when every breakeven moves up by one basis point and
/// the inflation drift leg is refitted with vols held.
pub fn inflation_delta(snapshot: &MarketSnapshot, model: &Model, trade: &Trade) -> Result<f64> {
    let base = price_trade(model, &snapshot.nominal, trade)?;
    let mut bumped = snapshot.clone();
    bumped.inflation = snapshot.inflation.shifted(ONE_BP);
    let refit = refit_inflation_leg(&bumped, model)?;
    Ok(price_trade(&refit, &bumped.nominal, trade)? - base)
}

/// Structural parameter or curve targeted by a shock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockTarget {
    Delta,
    Omega,
    HX,
    HP,
    XBar,
    PBar,
    /// Parallel shift of the nominal zero curve.
    Nominal,
    /// Parallel shift of the breakeven curve.
    Breakeven,
}

impl FromStr for ShockTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "delta" => Self::Delta,
            "omega" => Self::Omega,
            "h_x" | "hx" => Self::HX,
            "h_p" | "hp" => Self::HP,
            "x_bar" | "xbar" => Self::XBar,
            "p_bar" | "pbar" => Self::PBar,
            "nominal" | "rates" => Self::Nominal,
            "breakeven" | "inflation" => Self::Breakeven,
            other => return Err(invalid(format!("unknown shock target '{other}'"))),
        })
    }
}

impl fmt::Display for ShockTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Delta => "delta",
            Self::Omega => "omega",
            Self::HX => "h_x",
            Self::HP => "h_p",
            Self::XBar => "x_bar",
            Self::PBar => "p_bar",
            Self::Nominal => "nominal",
            Self::Breakeven => "breakeven",
        };
        f.write_str(s)
    }
}

/// Additive or relative size of a shock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum ShockSize {
    Add(f64),
    /// Multiply by 1 + value.
    Relative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shock {
    pub target: ShockTarget,
    pub size: ShockSize,
}

impl Shock {
    fn shift(&self, x: f64) -> f64 {
        match self.size {
            ShockSize::Add(d) => x + d,
            ShockSize::Relative(r) => x * (1.0 + r),
        }
    }

    /// Applies the shock to copies of the inputs.
    pub fn apply(&self, snapshot: &mut MarketSnapshot, s: &mut StructuralParams) {
        match self.target {
            ShockTarget::Delta => s.delta = self.shift(s.delta),
            ShockTarget::Omega => s.omega = self.shift(s.omega),
            ShockTarget::HX => s.h_x = self.shift(s.h_x),
            ShockTarget::HP => s.h_p = self.shift(s.h_p),
            ShockTarget::XBar => s.x_bar = self.shift(s.x_bar),
            ShockTarget::PBar => s.p_bar = self.shift(s.p_bar),
            ShockTarget::Nominal => {
                let c = &mut snapshot.nominal;
                c.rates = c.rates.iter().map(|&r| self.shift(r)).collect();
            }
            ShockTarget::Breakeven => {
                let c = &mut snapshot.inflation;
                c.breakevens = c.breakevens.iter().map(|&k| self.shift(k)).collect();
            }
        }
    }
}

/// Parses `key=value`: a plain number is additive, a trailing `%` makes it
/// relative, e.g. `h_p=0.5` or `delta=+20%`.
impl FromStr for Shock {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (key, value) = s.split_once('=').ok_or_else(|| invalid(format!("shock '{s}' is not key=value")))?;
        let target: ShockTarget = key.trim().parse()?;
        let value = value.trim();
        let num = |v: &str| v.parse::<f64>().map_err(|_| invalid(format!("shock value '{v}' is not a number")));
        let size = match value.strip_suffix('%') {
            Some(p) => ShockSize::Relative(num(p)? / 100.0),
            None => ShockSize::Add(num(value)?),
        };
        Ok(Self { target, size })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressScenario {
    pub name: String,
    pub shocks: Vec<Shock>,
}

/// One trade under one scenario next to its base values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressRow {
    pub scenario: String,
    pub trade: String,
    pub base_pv: f64,
    pub base_delta: f64,
    pub pv: Option<f64>,
    pub delta: Option<f64>,
    pub max_abs_error: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressReport {
    pub base_max_abs_error: f64,
    pub rows: Vec<StressRow>,
}

impl StressReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// PV and inflation delta of each trade on a calibrated model.
fn evaluate(snapshot: &MarketSnapshot, model: &Model, trades: &[Trade]) -> Result<Vec<(f64, f64)>> {
    trades.iter().map(|t| Ok((price_trade(model, &snapshot.nominal, t)?, inflation_delta(snapshot, model, t)?))).collect()
}

/// Recalibrates under each scenario and reports PVs and inflation deltas
/// beside the base calibration. A failing scenario is recorded and the run
/// carries on.
pub fn run_stress(
    snapshot: &MarketSnapshot,
    structural: &StructuralParams,
    cfg: &CalibConfig,
    base: &CalibResult,
    scenarios: &[StressScenario],
    trades: &[Trade],
) -> Result<StressReport> {
    if trades.is_empty() {
        return Err(invalid("stress run needs at least one trade"));
    }
    let base_vals = evaluate(snapshot, &base.model(), trades)?;
    let mut rows = Vec::new();
    for sc in scenarios {
        let mut snap = snapshot.clone();
        let mut s = *structural;
        for shock in &sc.shocks {
            shock.apply(&mut snap, &mut s);
        }
        let outcome = calibrate(&snap, &s, cfg).and_then(|res| Ok((evaluate(&snap, &res.model(), trades)?, res.max_abs_error)));
        for (k, t) in trades.iter().enumerate() {
            let (base_pv, base_delta) = base_vals[k];
            let mut row = StressRow {
                scenario: sc.name.clone(),
                trade: t.name.clone(),
                base_pv,
                base_delta,
                pv: None,
                delta: None,
                max_abs_error: None,
                error: None,
            };
            match &outcome {
                Ok((vals, err)) => {
                    row.pv = Some(vals[k].0);
                    row.delta = Some(vals[k].1);
                    row.max_abs_error = Some(*err);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            rows.push(row);
        }
    }
    Ok(StressReport { base_max_abs_error: base.max_abs_error, rows })
}

/// Path quantity referenced by a scenario condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Annualised realised inflation (I(T)/I(0))^(1/T) - 1.
    Inflation,
    /// One-year simple rate fixing at T.
    Libor,
    /// Short rate at T.
    Rate,
    /// Annualised realised growth (X(T)/X(0))^(1/T) - 1.
    Growth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub observable: Observable,
    pub horizon: f64,
    pub op: Comparison,
    pub level: f64,
}

/// Conjunction of clauses; empty means every path.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub clauses: Vec<Clause>,
}

pub fn observe(p: &PathView, what: Observable, t: f64) -> Result<f64> {
    match what {
        Observable::Inflation => Ok(p.index(t)?.powf(1.0 / t) - 1.0),
        Observable::Growth => Ok(p.growth(t)?.powf(1.0 / t) - 1.0),
        Observable::Rate => p.short_rate(t),
        Observable::Libor => p.forward_rate(t, t, t + 1.0),
    }
}

impl Condition {
    pub fn always() -> Self {
        Self::default()
    }

    pub fn holds(&self, p: &PathView) -> Result<bool> {
        for c in &self.clauses {
            let x = observe(p, c.observable, c.horizon)?;
            let ok = match c.op {
                Comparison::Lt => x < c.level,
                Comparison::Le => x <= c.level,
                Comparison::Gt => x > c.level,
                Comparison::Ge => x >= c.level,
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Dates the clauses need on the simulation grid.
    pub fn dates(&self) -> Vec<f64> {
        self.clauses
            .iter()
            .flat_map(|c| match c.observable {
                Observable::Libor => vec![c.horizon, c.horizon + 1.0],
                _ => vec![c.horizon],
            })
            .collect()
    }
}

/// Parses clauses such as `inflation(10) < 0` joined by `and`. Levels are
/// decimals unless they end in `%`. `true` or an empty string selects every path.
impl FromStr for Condition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s.eq_ignore_ascii_case("true") {
            return Ok(Self::always());
        }
        let mut clauses = Vec::new();
        for part in s.split("and").map(str::trim) {
            let bad = || invalid(format!("cannot parse condition clause '{part}'"));
            let (name, rest) = part.split_once('(').ok_or_else(bad)?;
            let (t, rest) = rest.split_once(')').ok_or_else(bad)?;
            let observable = match name.trim().to_ascii_lowercase().as_str() {
                "inflation" | "infl" => Observable::Inflation,
                "libor" => Observable::Libor,
                "rate" => Observable::Rate,
                "growth" => Observable::Growth,
                _ => return Err(bad()),
            };
            let horizon: f64 = t.trim().parse().map_err(|_| bad())?;
            if !(horizon > 0.0) {
                return Err(invalid("condition horizon must be positive"));
            }
            let rest = rest.trim();
            let (op, level) = if let Some(v) = rest.strip_prefix("<=") {
                (Comparison::Le, v)
            } else if let Some(v) = rest.strip_prefix(">=") {
                (Comparison::Ge, v)
            } else if let Some(v) = rest.strip_prefix('<') {
                (Comparison::Lt, v)
            } else if let Some(v) = rest.strip_prefix('>') {
                (Comparison::Gt, v)
            } else {
                return Err(bad());
            };
            let level = level.trim();
            let level = match level.strip_suffix('%') {
                Some(p) => p.trim().parse::<f64>().map_err(|_| bad())? / 100.0,
                None => level.parse::<f64>().map_err(|_| bad())?,
            };
            clauses.push(Clause { observable, horizon, op, level });
        }
        Ok(Self { clauses })
    }
}

/// Trade with a pathwise payoff, as used by the hedge report. Payoffs are
/// discounted along each path under the risk-neutral measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "payoff", rename_all = "kebab-case")]
pub enum PathPayoff {
    /// ZC inflation option on I(T)/I(0).
    ZcOption { maturity: f64, strike: f64, kind: OptionKind },
    /// Strip of annual caplets or floorlets fixing at 1, ..., maturity - 1.
    CapFloor { maturity: usize, strike: f64, kind: CapKind },
}

impl PathPayoff {
    fn last_date(&self) -> f64 {
        match *self {
            Self::ZcOption { maturity, .. } => maturity,
            Self::CapFloor { maturity, .. } => maturity as f64,
        }
    }

    /// Discounted payoff along one path.
    pub fn discounted(&self, p: &PathView) -> Result<f64> {
        match *self {
            Self::ZcOption { maturity, strike, kind } => {
                let g = (1.0 + strike).powf(maturity);
                Ok(p.discount(maturity)? * (kind.omega() * (p.index(maturity)? - g)).max(0.0))
            }
            Self::CapFloor { maturity, strike, kind } => {
                let w = match kind {
                    CapKind::Caplet => 1.0,
                    CapKind::Floorlet => -1.0,
                };
                let mut v = 0.0;
                for k in 1..maturity {
                    let t = k as f64;
                    v += p.discount(t + 1.0)? * (w * (p.forward_rate(t, t, t + 1.0)? - strike)).max(0.0);
                }
                Ok(v)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeLeg {
    pub name: String,
    pub payoff: PathPayoff,
    /// Signed quantity; negative for a short position.
    pub quantity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub name: String,
    /// Unconditional mean discounted payoff per unit.
    pub premium: f64,
    pub premium_se: f64,
    /// Conditional mean discounted payoff per unit.
    pub conditional_payoff: f64,
    /// Conditional payoff per unit of premium.
    pub payoff_per_premium: f64,
    /// Units of the candidate offsetting the client trade in the scenario.
    pub hedge_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeReport {
    pub selected: usize,
    pub total: usize,
    pub thin_selection: bool,
    pub client_pv: f64,
    pub client_conditional: f64,
    /// Candidates ranked by conditional payoff per unit premium, best first.
    pub candidates: Vec<CandidateReport>,
    /// Conditional one-year rate distribution at each annual fixing.
    pub libor: ScenarioReport,
}

impl HedgeReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.candidates {
            w.serialize(c)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Simulates under the risk-neutral measure, selects the paths meeting
/// `condition` and compares the client trade with each hedge candidate.
pub fn hedge_scenario(
    model: &Model,
    client: &HedgeLeg,
    candidates: &[HedgeLeg],
    condition: &Condition,
    n_paths: usize,
    seed: u64,
) -> Result<HedgeReport> {
    if candidates.is_empty() {
        return Err(invalid("hedge report needs at least one candidate"));
    }
    let horizon = candidates.iter().chain(std::iter::once(client)).map(|c| c.payoff.last_date()).fold(0.0, f64::max);
    let cfg = SimConfig::annual(n_paths, horizon.ceil() as usize, seed, Measure::Q).with_dates(&condition.dates());
    let paths = simulate(model, &cfg)?;
    hedge_on_paths(&paths, client, candidates, condition, horizon)
}

/// Hedge report on pre-simulated risk-neutral paths covering `horizon`.
pub fn hedge_on_paths(paths: &Paths, client: &HedgeLeg, candidates: &[HedgeLeg], condition: &Condition, horizon: f64) -> Result<HedgeReport> {
    if candidates.is_empty() {
        return Err(invalid("hedge report needs at least one candidate"));
    }
    let client_fn = |p: &PathView| Ok(client.quantity * client.payoff.discounted(p)?);
    let cond = |p: &PathView| condition.holds(p);
    let client_rep = conditional_scenario(paths, cond, &[("client", &client_fn)])?;
    let client_pv = client_rep.stats[0].unconditional_mean;
    let client_conditional = client_rep.stats[0].conditional_mean;
    let mut out = Vec::with_capacity(candidates.len());
    for c in candidates {
        let f = |p: &PathView| c.payoff.discounted(p);
        let rep = conditional_scenario(paths, cond, &[("candidate", &f)])?;
        let values: Vec<f64> = paths.iter().map(|p| f(&p)).collect::<Result<_>>()?;
        let (premium, premium_se) = mean_se(&values);
        let conditional_payoff = rep.stats[0].conditional_mean;
        out.push(CandidateReport {
            name: c.name.clone(),
            premium,
            premium_se,
            conditional_payoff,
            payoff_per_premium: if premium != 0.0 { conditional_payoff / premium } else { f64::NAN },
            hedge_ratio: if conditional_payoff != 0.0 { -client_conditional / conditional_payoff } else { f64::NAN },
        });
    }
    out.sort_by(|a, b| b.payoff_per_premium.total_cmp(&a.payoff_per_premium));
    let fixings: Vec<(String, f64)> = (1..horizon.ceil() as usize).map(|k| (format!("libor_{k}y"), k as f64)).collect();
    let fns: Vec<Box<PathFn>> = fixings.iter().map(|&(_, t)| Box::new(move |p: &PathView| p.forward_rate(t, t, t + 1.0)) as Box<PathFn>).collect();
    let stats: Vec<Statistic> = fixings.iter().zip(&fns).map(|((n, _), f)| (n.as_str(), f.as_ref())).collect();
    let libor = conditional_scenario(paths, cond, &stats)?;
    Ok(HedgeReport {
        selected: libor.selected,
        total: libor.total,
        thin_selection: libor.thin_selection,
        client_pv,
        client_conditional,
        candidates: out,
        libor,
    })
}
