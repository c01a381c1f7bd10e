//! Monte Carlo simulation of the model economy with exact Gaussian steps.
//!
//! Between grid dates the state (log I, m_I, log X, m_X, integral of n) is
//! jointly Gaussian given its value at the start of the step, with moments
//! that depend only on the deterministic model functions. Each step samples
//! that law directly, so the grid only needs the dates a payoff observes.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, RwLock};

use nalgebra::{SMatrix, SVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctcb::Model;
use crate::error::{invalid, validation, Error, Result};
use crate::math::{axpby, dot, mean_se, nodes, pairwise_sum, path_rng};

/// Number of simulated state variables.
pub const STATE_DIM: usize = 5;
type StateVec = SVector<f64, STATE_DIM>;
type StateMat = SMatrix<f64, STATE_DIM, STATE_DIM>;

const LOG_I: usize = 0;
const M_I: usize = 1;
const LOG_X: usize = 2;
const M_X: usize = 3;
const INT_N: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "maturity")]
pub enum Measure {
    /// Real-world measure.
    P,
    /// Risk-neutral measure with the bank account as numeraire.
    Q,
    /// Forward measure for the zero bond maturing at the given date.
    Forward(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Simulation dates, strictly increasing from zero.
    pub grid: Vec<f64>,
    pub seed: u64,
    pub measure: Measure,
    #[serde(default)]
    pub antithetic: bool,
}

impl SimConfig {
    /// Annual grid 0, 1, ..., horizon.
    pub fn annual(n_paths: usize, horizon: usize, seed: u64, measure: Measure) -> Self {
        Self { n_paths, grid: (0..=horizon).map(|k| k as f64).collect(), seed, measure, antithetic: false }
    }

    /// Adds dates to the grid, keeping it sorted and free of duplicates.
    pub fn with_dates(mut self, dates: &[f64]) -> Self {
        self.grid.extend_from_slice(dates);
        self.grid.sort_by(f64::total_cmp);
        self.grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(validation("need at least two paths"));
        }
        if self.grid.first() != Some(&0.0) || self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(validation("simulation grid must start at 0 and increase strictly"));
        }
        if let Measure::Forward(t) = self.measure {
            if !(t > 0.0) {
                return Err(validation("forward measure maturity must be positive"));
            }
        }
        Ok(())
    }
}

/// Exact transition law of one step: state(t1) = shift + coef * (m_I, m_X)(t0)
/// + previous (log I, log X, integral of n) + root * N(0, I).
#[derive(Debug, Clone)]
struct StepLaw {
    shift: StateVec,
    /// Sensitivities of each state to m_I(t0) and m_X(t0).
    coef_mi: StateVec,
    coef_mx: StateVec,
    root: StateMat,
    cov: StateMat,
}

/// Measure drift theta added to the Brownian increments: dW = dW' + theta dt.
fn theta(model: &Model, measure: Measure, v: f64) -> Vec<f64> {
    let f = &model.funcs;
    match measure {
        Measure::P => vec![0.0; f.dim],
        Measure::Q => f.lambda.at(v).iter().map(|l| -l).collect(),
        Measure::Forward(t_star) => axpby(-1.0, f.lambda.at(v), 1.0, &model.bond_vol(v, t_star)),
    }
}

fn step_law(model: &Model, measure: Measure, t0: f64, t1: f64) -> StepLaw {
    let f = &model.funcs;
    let s = &model.structural;
    let (pts, h) = nodes(t0, t1, model.dt);
    let mut shift = StateVec::zeros();
    let mut cov = StateMat::zeros();
    for &v in &pts {
        let th = theta(model, measure, v);
        let (bi, bx, si, sx) = (f.b_i.at(v), f.b_x.at(v), f.s_i.at(v), f.s_x.at(v));
        let drift_mi = f.a_i.at(v) + dot(bi, &th);
        let drift_mx = f.a_x.at(v) + dot(bx, &th);
        let kappa = s.inv_zeta_integral(v, t1);
        shift[LOG_I] += (t1 - v) * drift_mi - 0.5 * dot(si, si) + dot(si, &th);
        shift[M_I] += drift_mi;
        shift[LOG_X] += (t1 - v) * drift_mx - 0.5 * dot(sx, sx) + dot(sx, &th);
        shift[M_X] += drift_mx;
        shift[INT_N] -= kappa * (s.h_p * drift_mi + s.h_x * drift_mx);
        let loads = [axpby(t1 - v, bi, 1.0, si), bi.clone(), axpby(t1 - v, bx, 1.0, sx), bx.clone(), axpby(-kappa * s.h_p, bi, -kappa * s.h_x, bx)];
        for a in 0..STATE_DIM {
            for b in a..STATE_DIM {
                cov[(a, b)] += dot(&loads[a], &loads[b]);
            }
        }
    }
    shift *= h;
    cov *= h;
    for a in 0..STATE_DIM {
        for b in 0..a {
            cov[(a, b)] = cov[(b, a)];
        }
    }
    let j = s.inv_zeta_integral(t0, t1);
    let dt = t1 - t0;
    let coef_mi = StateVec::from_column_slice(&[dt, 1.0, 0.0, 0.0, -s.h_p * j]);
    let coef_mx = StateVec::from_column_slice(&[0.0, 0.0, dt, 1.0, -s.h_x * j]);
    StepLaw { shift, coef_mi, coef_mx, root: psd_sqrt(&cov), cov }
}

/// Symmetric square root of a covariance matrix, clipping tiny negative
/// eigenvalues from rounding.
fn psd_sqrt(cov: &StateMat) -> StateMat {
    let eig = cov.symmetric_eigen();
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let vt = eig.eigenvectors.transpose();
    eig.eigenvectors * StateMat::from_diagonal(&d) * vt
}

/// Simulated paths; `states[path][k]` is the state at `times[k]`.
#[derive(Debug, Clone)]
pub struct Paths {
    pub times: Vec<f64>,
    pub states: Vec<Vec<[f64; STATE_DIM]>>,
    pub measure: Measure,
    pub antithetic: bool,
    model: Model,
    bonds: Arc<BondCache>,
}

/// Path-independent zero-bond coefficients keyed by the bit patterns of (t, s).
type BondCache = RwLock<HashMap<(u64, u64), BondCoeffs>>;

#[derive(Debug, Clone, Copy)]
struct BondCoeffs {
    shift: f64,
    j: f64,
    var: f64,
}

fn bond_coeffs(model: &Model, t: f64, s: f64) -> BondCoeffs {
    let law = step_law(model, Measure::Q, t, s);
    BondCoeffs { shift: law.shift[INT_N], j: model.structural.inv_zeta_integral(t, s), var: law.cov[(INT_N, INT_N)] }
}

impl BondCoeffs {
    fn price(&self, model: &Model, m_i: f64, m_x: f64) -> f64 {
        let st = &model.structural;
        (-(self.shift - self.j * (st.h_p * m_i + st.h_x * m_x)) + 0.5 * self.var).exp()
    }
}

/// Read-only view of one path.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    pub index: usize,
    times: &'a [f64],
    states: &'a [[f64; STATE_DIM]],
    model: &'a Model,
    bonds: &'a BondCache,
}

impl<'a> PathView<'a> {
    fn slot(&self, t: f64) -> Result<usize> {
        self.times.iter().position(|&s| (s - t).abs() < 1e-9).ok_or_else(|| invalid(format!("time {t} is not on the simulation grid")))
    }

    pub fn state(&self, t: f64) -> Result<[f64; STATE_DIM]> {
        Ok(self.states[self.slot(t)?])
    }

    /// I(t)/I(0).
    pub fn index(&self, t: f64) -> Result<f64> {
        Ok(self.state(t)?[LOG_I].exp())
    }

    /// X(t)/X(0).
    pub fn growth(&self, t: f64) -> Result<f64> {
        Ok(self.state(t)?[LOG_X].exp())
    }

    pub fn m_i(&self, t: f64) -> Result<f64> {
        Ok(self.state(t)?[M_I])
    }

    pub fn m_x(&self, t: f64) -> Result<f64> {
        Ok(self.state(t)?[M_X])
    }

    /// Short rate implied by the expected drifts.
    pub fn short_rate(&self, t: f64) -> Result<f64> {
        let s = self.state(t)?;
        Ok(self.model.structural.short_rate_from_drifts(t, s[M_I], s[M_X]))
    }

    /// exp(-integral of n over [0, t]).
    pub fn discount(&self, t: f64) -> Result<f64> {
        Ok((-self.state(t)?[INT_N]).exp())
    }

    /// I(t2)/I(t1).
    pub fn index_ratio(&self, t1: f64, t2: f64) -> Result<f64> {
        Ok((self.state(t2)?[LOG_I] - self.state(t1)?[LOG_I]).exp())
    }

    /// Model zero bond P(t, s) given the state at t.
    pub fn zero_bond(&self, t: f64, s: f64) -> Result<f64> {
        if s < t {
            return Err(invalid("bond maturity precedes valuation date"));
        }
        let st = self.state(t)?;
        let key = (t.to_bits(), s.to_bits());
        let cached = self.bonds.read().ok().and_then(|c| c.get(&key).copied());
        let coeffs = match cached {
            Some(c) => c,
            None => {
                let c = bond_coeffs(self.model, t, s);
                if let Ok(mut w) = self.bonds.write() {
                    w.insert(key, c);
                }
                c
            }
        };
        Ok(coeffs.price(self.model, st[M_I], st[M_X]))
    }

    /// Simple forward rate over [t1, t2] seen at t.
    pub fn forward_rate(&self, t: f64, t1: f64, t2: f64) -> Result<f64> {
        Ok((self.zero_bond(t, t1)? / self.zero_bond(t, t2)? - 1.0) / (t2 - t1))
    }
}

impl Paths {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn view(&self, index: usize) -> PathView<'_> {
        PathView { index, times: &self.times, states: &self.states[index], model: &self.model, bonds: &self.bonds }
    }

    pub fn iter(&self) -> impl Iterator<Item = PathView<'_>> {
        (0..self.len()).map(move |j| self.view(j))
    }

    /// CSV dump with columns path, time, I, X, n, m_I, m_X.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["path", "time", "I", "X", "n", "m_I", "m_X"])?;
        for p in self.iter() {
            for (k, &t) in self.times.iter().enumerate() {
                let s = p.states[k];
                let n = self.model.structural.short_rate_from_drifts(t, s[M_I], s[M_X]);
                w.write_record(&[
                    p.index.to_string(),
                    t.to_string(),
                    s[LOG_I].exp().to_string(),
                    s[LOG_X].exp().to_string(),
                    n.to_string(),
                    s[M_I].to_string(),
                    s[M_X].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Risk-neutral zero bond P(t, s) implied by the model from (m_I, m_X) at t.
pub fn model_zero_bond(model: &Model, t: f64, s: f64, m_i: f64, m_x: f64) -> Result<f64> {
    if s < t {
        return Err(invalid("bond maturity precedes valuation date"));
    }
    Ok(bond_coeffs(model, t, s).price(model, m_i, m_x))
}

/// Number of worker threads requested through `CTCB_THREADS`, if any.
pub fn configured_threads() -> Option<usize> {
    std::env::var("CTCB_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

fn run_pool<T: Send, F: FnOnce() -> T + Send>(f: F) -> T {
    match configured_threads().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

pub fn simulate(model: &Model, config: &SimConfig) -> Result<Paths> {
    model.validate()?;
    config.validate()?;
    let laws: Vec<StepLaw> = config.grid.windows(2).map(|w| step_law(model, config.measure, w[0], w[1])).collect();
    let start = {
        let mut s = [0.0; STATE_DIM];
        s[M_I] = model.funcs.m_i0;
        s[M_X] = model.funcs.m_x0;
        s
    };
    let n_draws = if config.antithetic { config.n_paths.div_ceil(2) } else { config.n_paths };
    let run = |j: usize| -> Vec<Vec<[f64; STATE_DIM]>> {
        let mut rng = path_rng(config.seed, j as u64);
        let shocks: Vec<StateVec> = laws.iter().map(|_| StateVec::from_fn(|_, _| Distribution::<f64>::sample(&StandardNormal, &mut rng))).collect();
        let signs: &[f64] = if config.antithetic { &[1.0, -1.0] } else { &[1.0] };
        signs
            .iter()
            .map(|&sign| {
                let mut path = Vec::with_capacity(laws.len() + 1);
                let mut cur = StateVec::from_column_slice(&start);
                path.push(start);
                for (law, z) in laws.iter().zip(&shocks) {
                    let (mi, mx) = (cur[M_I], cur[M_X]);
                    let mut next = law.shift + law.coef_mi * mi + law.coef_mx * mx + law.root * (z * sign);
                    next[LOG_I] += cur[LOG_I];
                    next[LOG_X] += cur[LOG_X];
                    next[INT_N] += cur[INT_N];
                    cur = next;
                    path.push([cur[0], cur[1], cur[2], cur[3], cur[4]]);
                }
                path
            })
            .collect()
    };
    let nested: Vec<Vec<Vec<[f64; STATE_DIM]>>> = run_pool(|| (0..n_draws).into_par_iter().map(run).collect());
    let mut states: Vec<Vec<[f64; STATE_DIM]>> = nested.into_iter().flatten().collect();
    states.truncate(config.n_paths);
    Ok(Paths {
        times: config.grid.clone(),
        states,
        measure: config.measure,
        antithetic: config.antithetic,
        model: model.clone(),
        bonds: Arc::default(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub pv: f64,
    pub standard_error: f64,
    /// Mean payoff before numeraire scaling.
    pub undiscounted: f64,
    pub undiscounted_se: f64,
    pub n_paths: usize,
}

/// Prices a payoff paid at `pay_time`. Under Q each sample is discounted
/// along its path; under the forward measure the payment date must be the
/// measure's maturity and the mean is scaled by `numeraire_df` = P(0, T*).
/// Under P the mean is scaled by `numeraire_df` as well.
pub fn price_mc<F>(paths: &Paths, pay_time: f64, numeraire_df: f64, payoff: F) -> Result<SimResult>
where
    F: Fn(&PathView) -> Result<f64> + Sync,
{
    if paths.is_empty() {
        return Err(Error::Empty("no simulated paths".into()));
    }
    if let Measure::Forward(t) = paths.measure {
        if (t - pay_time).abs() > 1e-9 {
            return Err(invalid(format!("payment at {pay_time} differs from the forward measure date {t}")));
        }
    }
    let raw: Vec<(f64, f64)> = run_pool(|| {
        (0..paths.len())
            .into_par_iter()
            .map(|j| {
                let p = paths.view(j);
                let x = payoff(&p)?;
                if !x.is_finite() {
                    return Err(Error::NonFinitePayoff { path: j });
                }
                let disc = match paths.measure {
                    Measure::Q => p.discount(pay_time)?,
                    _ => 1.0,
                };
                Ok((x, x * disc))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let (und, disc): (Vec<f64>, Vec<f64>) = raw.into_iter().unzip();
    let (um, use_) = sample_stats(&und, paths.antithetic);
    let (dm, dse) = sample_stats(&disc, paths.antithetic);
    let scale = match paths.measure {
        Measure::Q => 1.0,
        _ => numeraire_df,
    };
    Ok(SimResult { pv: dm * scale, standard_error: dse * scale, undiscounted: um, undiscounted_se: use_, n_paths: paths.len() })
}

/// Mean and standard error; antithetic pairs are averaged first.
fn sample_stats(xs: &[f64], antithetic: bool) -> (f64, f64) {
    if antithetic && xs.len() >= 4 {
        let pairs: Vec<f64> = xs.chunks(2).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        mean_se(&pairs)
    } else {
        mean_se(xs)
    }
}

/// Summary of a quantity over all paths and over the selected ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalStat {
    pub name: String,
    pub conditional_mean: f64,
    pub unconditional_mean: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub selected: usize,
    pub total: usize,
    /// Set when fewer than 100 paths satisfy the condition.
    pub thin_selection: bool,
    pub stats: Vec<ConditionalStat>,
}

/// A named path functional.
pub type Statistic<'a> = (&'a str, &'a (dyn Fn(&PathView) -> Result<f64> + Sync));

pub fn conditional_scenario<C>(paths: &Paths, condition: C, statistics: &[Statistic]) -> Result<ScenarioReport>
where
    C: Fn(&PathView) -> Result<bool>,
{
    let mut selected = Vec::new();
    for p in paths.iter() {
        if condition(&p)? {
            selected.push(p.index);
        }
    }
    if selected.is_empty() {
        return Err(Error::Empty("no path satisfies the scenario condition".into()));
    }
    let mut stats = Vec::with_capacity(statistics.len());
    for (name, f) in statistics {
        let all: Vec<f64> = paths.iter().map(|p| f(&p)).collect::<Result<_>>()?;
        let mut sel: Vec<f64> = selected.iter().map(|&j| all[j]).collect();
        let conditional_mean = pairwise_sum(&sel) / sel.len() as f64;
        sel.sort_by(f64::total_cmp);
        stats.push(ConditionalStat {
            name: name.to_string(),
            conditional_mean,
            unconditional_mean: pairwise_sum(&all) / all.len() as f64,
            q05: quantile(&sel, 0.05),
            q50: quantile(&sel, 0.5),
            q95: quantile(&sel, 0.95),
        });
    }
    Ok(ScenarioReport { selected: selected.len(), total: paths.len(), thin_selection: selected.len() < 100, stats })
}

/// Ratio of conditional means of a target and a hedge payoff.
pub fn hedge_ratio<C, T, H>(paths: &Paths, condition: C, target: T, hedge: H) -> Result<f64>
where
    C: Fn(&PathView) -> Result<bool>,
    T: Fn(&PathView) -> Result<f64> + Sync,
    H: Fn(&PathView) -> Result<f64> + Sync,
{
    let report = conditional_scenario(paths, condition, &[("target", &target), ("hedge", &hedge)])?;
    let h = report.stats[1].conditional_mean;
    if h == 0.0 {
        return Err(invalid("hedge payoff has zero conditional mean"));
    }
    Ok(report.stats[0].conditional_mean / h)
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctcb::{ModelFunctions, StructuralParams};
    use crate::step::{ScalarStep, VectorStep};

    fn structural() -> StructuralParams {
        StructuralParams { delta: 0.05, omega: 5.0, h_x: 2.5, h_p: 1.75, x_bar: 0.02, p_bar: 0.02 }
    }

    #[test]
    fn zero_vol_paths_are_deterministic() {
        let mut f = ModelFunctions::zeros(2);
        f.a_i = ScalarStep::constant(0.001);
        f.m_i0 = 0.02;
        let model = Model::new(structural(), f);
        let paths = simulate(&model, &SimConfig::annual(3, 4, 1, Measure::P)).unwrap();
        for p in paths.iter() {
            // log I(T) = m_I0 T + a_I T^2 / 2
            let expect = 0.02 * 4.0 + 0.001 * 8.0;
            assert!((p.state(4.0).unwrap()[LOG_I] - expect).abs() < 1e-12);
            assert!((p.m_i(4.0).unwrap() - 0.024).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_payoff_under_forward_measure() {
        let mut f = ModelFunctions::zeros(3);
        f.b_i = VectorStep::constant(vec![0.003; 3]);
        f.s_i = VectorStep::constant(vec![0.003; 3]);
        let model = Model::new(structural(), f);
        let paths = simulate(&model, &SimConfig::annual(64, 5, 9, Measure::Forward(5.0))).unwrap();
        let r = price_mc(&paths, 5.0, 0.9, |_| Ok(1.0)).unwrap();
        assert_eq!(r.pv, 0.9);
        assert_eq!(r.standard_error, 0.0);
    }

    #[test]
    fn same_seed_same_paths() {
        let mut f = ModelFunctions::zeros(2);
        f.s_i = VectorStep::constant(vec![0.01, 0.02]);
        let model = Model::new(structural(), f);
        let cfg = SimConfig::annual(50, 3, 42, Measure::Q);
        let a = simulate(&model, &cfg).unwrap();
        let b = simulate(&model, &cfg).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn nan_payoff_names_the_path() {
        let model = Model::new(structural(), ModelFunctions::zeros(1));
        let paths = simulate(&model, &SimConfig::annual(5, 1, 0, Measure::Q)).unwrap();
        let r = price_mc(&paths, 1.0, 1.0, |p| Ok(if p.index == 3 { f64::NAN } else { 1.0 }));
        assert!(matches!(r, Err(Error::NonFinitePayoff { path: 3 })));
    }

    #[test]
    fn empty_condition_is_an_error() {
        let model = Model::new(structural(), ModelFunctions::zeros(1));
        let paths = simulate(&model, &SimConfig::annual(5, 1, 0, Measure::Q)).unwrap();
        let f = |p: &PathView| p.index(1.0);
        assert!(conditional_scenario(&paths, |_| Ok(false), &[("I", &f)]).is_err());
        let r = conditional_scenario(&paths, |_| Ok(true), &[("I", &f)]).unwrap();
        assert_eq!(r.stats[0].conditional_mean, r.stats[0].unconditional_mean);
    }
}
