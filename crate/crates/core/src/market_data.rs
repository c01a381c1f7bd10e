//! Market observables: nominal zero curve, inflation breakevens and ATM
//! option quotes, with loading, validation and interpolation.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, validation, Error, Result};

/// Linear interpolation on sorted pillars with flat extrapolation at both ends.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    match xs.len() {
        0 => f64::NAN,
        1 => ys[0],
        _ => {
            if x <= xs[0] {
                return ys[0];
            }
            let last = xs.len() - 1;
            if x >= xs[last] {
                return ys[last];
            }
            let k = xs.partition_point(|&p| p <= x) - 1;
            let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
            ys[k] + w * (ys[k + 1] - ys[k])
        }
    }
}

fn check_maturities(ms: &[f64], what: &str) -> Result<()> {
    if ms.is_empty() {
        return Err(validation(format!("{what}: no pillars")));
    }
    if ms.iter().any(|m| !m.is_finite() || *m <= 0.0) {
        return Err(validation(format!("{what}: maturities must be finite and positive")));
    }
    if ms.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(validation(format!("{what}: maturities must be strictly increasing")));
    }
    Ok(())
}

/// Zero rates with continuous compounding, linear in rate between pillars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalCurve {
    pub maturities: Vec<f64>,
    pub rates: Vec<f64>,
}

impl NominalCurve {
    pub fn new(maturities: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        let c = Self { maturities, rates };
        c.validate()?;
        Ok(c)
    }

    pub fn flat(rate: f64) -> Self {
        Self { maturities: vec![1.0], rates: vec![rate] }
    }

    pub fn validate(&self) -> Result<()> {
        check_maturities(&self.maturities, "nominal curve")?;
        if self.rates.len() != self.maturities.len() || self.rates.iter().any(|r| !r.is_finite()) {
            return Err(validation("nominal curve: one finite rate per pillar required"));
        }
        Ok(())
    }

    pub fn rate(&self, t: f64) -> f64 {
        interp_linear(&self.maturities, &self.rates, t)
    }

    /// P(0,T).
    pub fn df(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        (-self.rate(t) * t).exp()
    }

    /// n(0): the zero rate extrapolated flat to the origin.
    pub fn short_rate(&self) -> f64 {
        self.rates[0]
    }

    /// Simply compounded forward rate over `[t1, t2]`.
    pub fn forward_rate(&self, t1: f64, t2: f64) -> f64 {
        (self.df(t1) / self.df(t2) - 1.0) / (t2 - t1)
    }
}

/// ZC inflation breakevens K(0,T), annually compounded, linear in K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflationCurve {
    pub maturities: Vec<f64>,
    pub breakevens: Vec<f64>,
}

impl InflationCurve {
    pub fn new(maturities: Vec<f64>, breakevens: Vec<f64>) -> Result<Self> {
        let c = Self { maturities, breakevens };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        check_maturities(&self.maturities, "inflation curve")?;
        if self.breakevens.len() != self.maturities.len() || self.breakevens.iter().any(|k| !k.is_finite() || *k <= -1.0) {
            return Err(validation("inflation curve: one finite breakeven above -100% per pillar required"));
        }
        Ok(())
    }

    pub fn breakeven(&self, t: f64) -> f64 {
        interp_linear(&self.maturities, &self.breakevens, t)
    }

    /// Forward index growth (1+K)^T.
    pub fn growth(&self, t: f64) -> f64 {
        (1.0 + self.breakeven(t)).powf(t)
    }

    /// Parallel shift of every breakeven.
    pub fn shifted(&self, bump: f64) -> Self {
        Self { maturities: self.maturities.clone(), breakevens: self.breakevens.iter().map(|k| k + bump).collect() }
    }
}

/// ZC inflation option PVs on a maturity by strike grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrikeGrid {
    pub maturities: Vec<f64>,
    pub strikes: Vec<f64>,
    /// `pvs[i][j]`: maturity `i`, strike `j`.
    pub pvs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionQuotes {
    pub maturities: Vec<f64>,
    pub atm_caplet_pv: Vec<f64>,
    pub atm_zc_infl_option_pv: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zc_grid: Option<StrikeGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSnapshot {
    pub as_of: Option<NaiveDate>,
    pub nominal: NominalCurve,
    pub inflation: InflationCurve,
    pub quotes: OptionQuotes,
}

/// One row of the tabular snapshot format (CSV and JSON share field names).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub maturity_years: f64,
    pub nominal_ir: f64,
    pub zc_breakeven: f64,
    pub atm_caplet_pv: f64,
    #[serde(alias = "atm_zc_option_pv")]
    pub atm_zc_infl_option_pv: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SnapshotDoc {
    #[serde(default)]
    as_of: Option<NaiveDate>,
    rows: Vec<SnapshotRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

impl MarketSnapshot {
    pub fn from_rows(as_of: Option<NaiveDate>, rows: &[SnapshotRow]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Parse("snapshot has no rows".into()));
        }
        let ms: Vec<f64> = rows.iter().map(|r| r.maturity_years).collect();
        let snap = MarketSnapshot {
            as_of,
            nominal: NominalCurve { maturities: ms.clone(), rates: rows.iter().map(|r| r.nominal_ir).collect() },
            inflation: InflationCurve { maturities: ms.clone(), breakevens: rows.iter().map(|r| r.zc_breakeven).collect() },
            quotes: OptionQuotes {
                maturities: ms,
                atm_caplet_pv: rows.iter().map(|r| r.atm_caplet_pv).collect(),
                atm_zc_infl_option_pv: rows.iter().map(|r| r.atm_zc_infl_option_pv).collect(),
                zc_grid: None,
            },
        };
        snap.validate()?;
        Ok(snap)
    }

    /// Rows on the shared pillar grid; every component is interpolated onto
    /// the nominal curve's maturities.
    pub fn rows(&self) -> Vec<SnapshotRow> {
        self.nominal
            .maturities
            .iter()
            .map(|&m| SnapshotRow {
                maturity_years: m,
                nominal_ir: self.nominal.rate(m),
                zc_breakeven: self.inflation.breakeven(m),
                atm_caplet_pv: interp_linear(&self.quotes.maturities, &self.quotes.atm_caplet_pv, m),
                atm_zc_infl_option_pv: interp_linear(&self.quotes.maturities, &self.quotes.atm_zc_infl_option_pv, m),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.nominal.validate()?;
        self.inflation.validate()?;
        let q = &self.quotes;
        check_maturities(&q.maturities, "option quotes")?;
        if q.atm_caplet_pv.len() != q.maturities.len() || q.atm_zc_infl_option_pv.len() != q.maturities.len() {
            return Err(validation("option quotes: one PV per maturity required"));
        }
        if q.atm_caplet_pv.iter().chain(&q.atm_zc_infl_option_pv).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(validation("option quotes: PVs must be finite and non-negative"));
        }
        if let Some(g) = &q.zc_grid {
            check_maturities(&g.maturities, "strike grid")?;
            if g.strikes.is_empty() || g.strikes.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(validation("strike grid: strikes must be non-empty and strictly increasing"));
            }
            if g.pvs.len() != g.maturities.len() || g.pvs.iter().any(|r| r.len() != g.strikes.len()) {
                return Err(validation("strike grid: PV matrix shape mismatch"));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path, format: Format) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, format)
    }

    pub fn parse(text: &str, format: Format) -> Result<Self> {
        match format {
            Format::Csv => {
                let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
                let mut rows = Vec::new();
                for rec in rdr.deserialize() {
                    let row: SnapshotRow = rec.map_err(|e| Error::Parse(e.to_string()))?;
                    rows.push(row);
                }
                let as_of = text
                    .lines()
                    .find_map(|l| l.trim().strip_prefix("# as_of:").map(|d| d.trim().to_string()))
                    .map(|d| d.parse::<NaiveDate>().map_err(|e| Error::Parse(format!("as_of: {e}"))))
                    .transpose()?;
                Self::from_rows(as_of, &rows)
            }
            Format::Json => {
                let doc: SnapshotDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
                Self::from_rows(doc.as_of, &doc.rows)
            }
        }
    }

    pub fn to_string(&self, format: Format) -> Result<String> {
        let rows = self.rows();
        match format {
            Format::Csv => {
                let mut out = String::new();
                if let Some(d) = self.as_of {
                    out.push_str(&format!("# as_of: {d}\n"));
                }
                let mut w = csv::Writer::from_writer(Vec::new());
                for r in &rows {
                    w.serialize(r)?;
                }
                let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
                out.push_str(&String::from_utf8_lossy(&bytes));
                Ok(out)
            }
            Format::Json => Ok(serde_json::to_string_pretty(&SnapshotDoc { as_of: self.as_of, rows })?),
        }
    }

    /// Pillars at 1, 2, ..., `horizon` years by linear interpolation of every
    /// observable, flat beyond the quoted range.
    pub fn resample_annual(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(invalid("resample horizon must be at least one year"));
        }
        let grid: Vec<f64> = (1..=horizon).map(|k| k as f64).collect();
        let q = &self.quotes;
        let zc_grid = q.zc_grid.as_ref().map(|g| {
            let pvs = grid
                .iter()
                .map(|&m| {
                    (0..g.strikes.len())
                        .map(|j| {
                            let col: Vec<f64> = g.pvs.iter().map(|r| r[j]).collect();
                            interp_linear(&g.maturities, &col, m)
                        })
                        .collect()
                })
                .collect();
            StrikeGrid { maturities: grid.clone(), strikes: g.strikes.clone(), pvs }
        });
        let snap = MarketSnapshot {
            as_of: self.as_of,
            nominal: NominalCurve { maturities: grid.clone(), rates: grid.iter().map(|&m| self.nominal.rate(m)).collect() },
            inflation: InflationCurve { maturities: grid.clone(), breakevens: grid.iter().map(|&m| self.inflation.breakeven(m)).collect() },
            quotes: OptionQuotes {
                maturities: grid.clone(),
                atm_caplet_pv: grid.iter().map(|&m| interp_linear(&q.maturities, &q.atm_caplet_pv, m)).collect(),
                atm_zc_infl_option_pv: grid.iter().map(|&m| interp_linear(&q.maturities, &q.atm_zc_infl_option_pv, m)).collect(),
                zc_grid,
            },
        };
        snap.validate()?;
        Ok(snap)
    }

    /// Replaces the ATM ZC option PVs by strike interpolation of the grid at
    /// each maturity's breakeven.
    pub fn atm_from_grid(&self) -> Result<Self> {
        let g = self.quotes.zc_grid.as_ref().ok_or_else(|| invalid("snapshot has no strike grid"))?;
        let mut out = self.clone();
        out.quotes.maturities = g.maturities.clone();
        out.quotes.atm_zc_infl_option_pv = g
            .maturities
            .iter()
            .zip(&g.pvs)
            .map(|(&m, row)| interp_atm_strike(&g.strikes, row, self.inflation.breakeven(m)))
            .collect::<Result<_>>()?;
        let caps: Vec<f64> = g.maturities.iter().map(|&m| interp_linear(&self.quotes.maturities, &self.quotes.atm_caplet_pv, m)).collect();
        out.quotes.atm_caplet_pv = caps;
        out.validate()?;
        Ok(out)
    }
}

/// One caplet recovered from cap PVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrippedCaplet {
    pub start: f64,
    pub end: f64,
    pub pv: f64,
    /// Raw difference before flooring.
    pub raw_pv: f64,
    pub floored: bool,
}

/// Caplet PVs as successive differences of cap PVs. Negative differences are
/// floored at zero and flagged.
pub fn strip_atm_caplets(caps: &[(f64, f64)]) -> Result<Vec<StrippedCaplet>> {
    let ms: Vec<f64> = caps.iter().map(|c| c.0).collect();
    check_maturities(&ms, "cap PVs")?;
    let mut out = Vec::with_capacity(caps.len());
    let mut prev = (0.0, 0.0);
    for &(m, pv) in caps {
        let raw = pv - prev.1;
        out.push(StrippedCaplet { start: prev.0, end: m, pv: raw.max(0.0), raw_pv: raw, floored: raw < 0.0 });
        prev = (m, pv);
    }
    Ok(out)
}

/// PV at `atm` by linear interpolation across strikes, flat outside the grid.
pub fn interp_atm_strike(strikes: &[f64], pvs: &[f64], atm: f64) -> Result<f64> {
    if strikes.is_empty() || strikes.len() != pvs.len() {
        return Err(invalid("strike interpolation needs a non-empty grid"));
    }
    Ok(interp_linear(strikes, pvs, atm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_rate_interpolation() {
        let c = NominalCurve::new(vec![1.0, 3.0], vec![0.0022, 0.0045]).unwrap();
        assert!((c.rate(2.0) - 0.00335).abs() < 1e-15);
        assert_eq!(c.rate(0.2), 0.0022);
        assert_eq!(c.rate(7.0), 0.0045);
        assert_eq!(c.df(0.0), 1.0);
    }

    #[test]
    fn strip_examples() {
        let s = strip_atm_caplets(&[(1.0, 0.0007), (2.0, 0.0024)]).unwrap();
        assert!((s[1].pv - 0.0017).abs() < 1e-15);
        assert_eq!(s[0].pv, 0.0007);
        let d = strip_atm_caplets(&[(1.0, 0.002), (2.0, 0.001)]).unwrap();
        assert!(d[1].floored);
        assert_eq!(d[1].pv, 0.0);
    }

    #[test]
    fn strike_interpolation() {
        let v = interp_atm_strike(&[0.01, 0.02], &[0.01, 0.004], 0.015).unwrap();
        assert!((v - 0.007).abs() < 1e-15);
        assert_eq!(interp_atm_strike(&[0.01, 0.02], &[0.01, 0.004], 0.0).unwrap(), 0.01);
        assert!(interp_atm_strike(&[], &[], 0.0).is_err());
    }

    #[test]
    fn empty_and_duplicate_rows() {
        assert!(MarketSnapshot::parse("maturity_years,nominal_ir,zc_breakeven,atm_caplet_pv,atm_zc_infl_option_pv\n", Format::Csv).is_err());
        assert!(MarketSnapshot::parse("", Format::Csv).is_err());
        let dup = "maturity_years,nominal_ir,zc_breakeven,atm_caplet_pv,atm_zc_infl_option_pv\n1,0.01,0.01,0.001,0.001\n1,0.01,0.01,0.001,0.001\n";
        assert!(matches!(MarketSnapshot::parse(dup, Format::Csv), Err(Error::Validation(_))));
        let neg = "maturity_years,nominal_ir,zc_breakeven,atm_caplet_pv,atm_zc_infl_option_pv\n1,0.01,0.01,-0.001,0.001\n";
        assert!(matches!(MarketSnapshot::parse(neg, Format::Csv), Err(Error::Validation(_))));
    }
}
