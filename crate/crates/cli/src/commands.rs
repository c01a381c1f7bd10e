use std::fs;
use std::path::Path;

use ctcb::calibration::{calibrate, CalibConfig, CalibResult};
use ctcb::ctcb::{Model, StructuralParams};
use ctcb::inflation::zciis_fair_strike;
use ctcb::ir_pricing::{CapKind, OptionKind, SwaptionKind};
use ctcb::market_data::{Format, MarketSnapshot, NominalCurve};
use ctcb::math::mean_se;
use ctcb::moment_match::{moment_match, ContinuousMatchInput, DsgeMatchInput};
use ctcb::monte_carlo::{simulate, Measure, SimConfig};
use ctcb::scenarios::{
    hedge_scenario, price_product, price_product_mc, run_stress, Condition, HedgeLeg, PathPayoff, Product, Shock, StressScenario, Trade,
};
use serde::Serialize;

use crate::args::{
    CalibrateArgs, HedgeArgs, MarketInputs, MeasureArg, MomentMatchArgs, Output, OutputFormat, PriceArgs, ProductKind, ProductTerms, Side,
    SimulateArgs, StressArgs,
};
use crate::error::{usage, CliError, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

fn load_snapshot(path: &Path) -> Result<MarketSnapshot> {
    Ok(MarketSnapshot::parse(&read(path)?, Format::from_path(path))?)
}

fn load_structural(path: &Path) -> Result<StructuralParams> {
    let s: StructuralParams = serde_json::from_str(&read(path)?)?;
    s.validate()?;
    Ok(s)
}

fn load_config(path: Option<&Path>) -> Result<CalibConfig> {
    match path {
        Some(p) => Ok(CalibConfig::from_json(&read(p)?)?),
        None => Ok(CalibConfig::default()),
    }
}

fn load_model(path: &Path) -> Result<Model> {
    Ok(Model::from_json(&read(path)?)?)
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read(path)?)?)
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Writes `text` to `<out>/<name>`, creating the directory when needed.
fn write_file(out: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(out).map_err(|source| CliError::Write { path: out.to_path_buf(), source })?;
    let path = out.join(name);
    fs::write(&path, text).map_err(|source| CliError::Write { path, source })
}

/// Sends the main table of a command to `<out>/<stem>.<ext>` or to stdout.
fn emit(output: &Output, stem: &str, csv: impl FnOnce() -> Result<String>, json: impl FnOnce() -> Result<String>) -> Result<()> {
    let (text, ext) = match output.format {
        OutputFormat::Csv => (csv()?, "csv"),
        OutputFormat::Json => (json()?, "json"),
    };
    match &output.out {
        Some(dir) => write_file(dir, &format!("{stem}.{ext}"), &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn market(inputs: &MarketInputs) -> Result<(MarketSnapshot, StructuralParams, CalibConfig)> {
    Ok((load_snapshot(&inputs.snapshot)?, load_structural(&inputs.structural)?, load_config(inputs.config.as_deref())?))
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<()> {
    let (snap, structural, cfg) = market(&args.inputs)?;
    let res = calibrate(&snap, &structural, &cfg)?;
    emit(&args.output, "residuals", || Ok(res.errors_csv()?), || to_json(&res.errors))?;
    if let Some(dir) = &args.output.out {
        write_file(dir, "model.json", &to_json(&res.model())?)?;
        write_file(dir, "calibration.json", &(res.to_json()? + "\n"))?;
        write_file(dir, "functions.csv", &res.table_csv()?)?;
    }
    report_calibration(&res);
    if res.max_abs_error < args.tolerance {
        Ok(())
    } else {
        Err(CliError::Tolerance { max: res.max_abs_error, tol: args.tolerance })
    }
}

fn report_calibration(res: &CalibResult) {
    let c = res.correlations.achieved;
    eprintln!(
        "calibrated {} instruments, max |residual| {:.3e}; correlations rate/infl {:.4}, rate/growth {:.4}, infl/growth {:.4}",
        res.errors.len(),
        res.max_abs_error,
        c.rate_infl,
        c.rate_growth,
        c.infl_growth
    );
}

fn option_kind(side: Option<Side>) -> Result<OptionKind> {
    match side {
        None | Some(Side::Call) => Ok(OptionKind::Call),
        Some(Side::Put) => Ok(OptionKind::Put),
        Some(s) => Err(usage(format!("--kind {s:?} does not apply to inflation options; use call or put").to_lowercase())),
    }
}

fn required(v: Option<f64>, flag: &str, product: ProductKind) -> Result<f64> {
    v.ok_or_else(|| usage(format!("--{flag} is required for {product:?}").to_lowercase()))
}

/// Builds the product described by the flags; `fair_strike` fills in a
/// missing ZC swap strike.
fn product(terms: &ProductTerms, fair_strike: impl FnOnce(f64) -> Result<f64>) -> Result<Product> {
    let kind = terms.product.ok_or_else(|| usage("--product is required"))?;
    let maturity = required(terms.maturity, "maturity", kind)?;
    let strike = || required(terms.strike, "strike", kind);
    Ok(match kind {
        ProductKind::ZcOption => Product::ZcOption { maturity, strike: strike()?, kind: option_kind(terms.kind)? },
        ProductKind::YoyOption => Product::YoyOption { maturity, strike: strike()?, kind: option_kind(terms.kind)? },
        ProductKind::Zciis => Product::Zciis { maturity, strike: terms.strike.map_or_else(|| fair_strike(maturity), Ok)? },
        ProductKind::Caplet | ProductKind::Floorlet => {
            if terms.kind.is_some() {
                return Err(usage("--kind does not apply to caplets; use --product caplet or floorlet"));
            }
            let cap = if kind == ProductKind::Caplet { CapKind::Caplet } else { CapKind::Floorlet };
            Product::Caplet { start: maturity, end: maturity + terms.tenor.unwrap_or(1.0), strike: strike()?, kind: cap }
        }
        ProductKind::Swaption => {
            let side = match terms.kind {
                None | Some(Side::Payer) => SwaptionKind::Payer,
                Some(Side::Receiver) => SwaptionKind::Receiver,
                Some(_) => return Err(usage("--kind for swaptions is payer or receiver")),
            };
            let tenor = terms.tenor.unwrap_or(5.0);
            if !(tenor >= 1.0 && tenor.fract() == 0.0) {
                return Err(usage("swaption --tenor must be a whole number of years"));
            }
            Product::Swaption { expiry: maturity, tenor: tenor as usize, strike: strike()?, kind: side }
        }
    })
}

#[derive(Debug, Serialize)]
struct PriceRow {
    product: Product,
    notional: f64,
    pv: f64,
    fair_strike: Option<f64>,
    mc_pv: Option<f64>,
    mc_se: Option<f64>,
    z: Option<f64>,
}

/// Flat CSV view of a price row.
#[derive(Debug, Serialize)]
struct PriceCsv {
    product: &'static str,
    maturity: f64,
    strike: f64,
    kind: String,
    notional: f64,
    pv: f64,
    fair_strike: Option<f64>,
    mc_pv: Option<f64>,
    mc_se: Option<f64>,
    z: Option<f64>,
}

impl From<&PriceRow> for PriceCsv {
    fn from(r: &PriceRow) -> Self {
        let (product, maturity, strike, kind) = match &r.product {
            Product::ZcOption { maturity, strike, kind } => ("zc-option", *maturity, *strike, format!("{kind:?}")),
            Product::YoyOption { maturity, strike, kind } => ("yoy-option", *maturity, *strike, format!("{kind:?}")),
            Product::Zciis { maturity, strike } => ("zciis", *maturity, *strike, String::new()),
            Product::Caplet { start, strike, kind, .. } => ("caplet", *start, *strike, format!("{kind:?}")),
            Product::Swaption { expiry, strike, kind, .. } => ("swaption", *expiry, *strike, format!("{kind:?}")),
        };
        Self {
            product,
            maturity,
            strike,
            kind: kind.to_lowercase(),
            notional: r.notional,
            pv: r.pv,
            fair_strike: r.fair_strike,
            mc_pv: r.mc_pv,
            mc_se: r.mc_se,
            z: r.z,
        }
    }
}

pub fn cmd_price(args: &PriceArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let curve = match &args.snapshot {
        Some(p) => load_snapshot(p)?.nominal,
        None => {
            if matches!(args.terms.product, Some(ProductKind::Caplet | ProductKind::Floorlet | ProductKind::Swaption)) {
                return Err(usage("rate products need --snapshot for the nominal curve"));
            }
            eprintln!("no --snapshot given: PVs are undiscounted");
            NominalCurve::flat(0.0)
        }
    };
    let fair = |t: f64| Ok(zciis_fair_strike(&model, 0.0, t, model.funcs.m_i0)?);
    let product = product(&args.terms, fair)?;
    let fair_strike = match product {
        Product::Zciis { maturity, .. } => Some(fair(maturity)?),
        _ => None,
    };
    let n = args.terms.notional;
    let pv = n * price_product(&model, &curve, &product)?;
    let (mc_pv, mc_se, z) = if args.mc {
        let (m, se) = price_product_mc(&model, &curve, &product, args.paths, args.seed)?;
        let (m, se) = (n * m, n.abs() * se);
        (Some(m), Some(se), Some(if se > 0.0 { (m - pv) / se } else { 0.0 }))
    } else {
        (None, None, None)
    };
    let row = PriceRow { product, notional: n, pv, fair_strike, mc_pv, mc_se, z };
    emit(&args.output, "price", || to_csv(&[PriceCsv::from(&row)]), || to_json(&row))
}

pub fn cmd_stress(args: &StressArgs) -> Result<()> {
    if args.shocks.is_empty() {
        return Err(usage("give at least one --shock key=value"));
    }
    let scenarios = args
        .shocks
        .iter()
        .map(|spec| {
            let shocks = spec.split(',').map(|s| s.trim().parse::<Shock>()).collect::<ctcb::error::Result<Vec<_>>>()?;
            Ok(StressScenario { name: spec.clone(), shocks })
        })
        .collect::<Result<Vec<_>>>()?;
    let (snap, structural, cfg) = market(&args.inputs)?;
    let product = if args.terms.product.is_none() {
        Product::ZcOption { maturity: 10.0, strike: 0.02, kind: OptionKind::Call }
    } else {
        product(&args.terms, |_| Ok(snap.inflation.breakeven(args.terms.maturity.unwrap_or(0.0))))?
    };
    let trade = Trade::new("trade", product, args.terms.notional);
    let base = calibrate(&snap, &structural, &cfg)?;
    report_calibration(&base);
    let report = run_stress(&snap, &structural, &cfg, &base, &scenarios, &[trade])?;
    for row in report.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("scenario '{}' failed: {}", row.scenario, row.error.as_deref().unwrap_or_default());
    }
    emit(&args.output, "stress", || Ok(report.to_csv()?), || to_json(&report))
}

pub fn cmd_hedge(args: &HedgeArgs) -> Result<()> {
    if args.strikes.is_empty() {
        return Err(usage("no hedge candidates: give at least one --strike"));
    }
    let condition: Condition = args.condition.parse()?;
    let model = load_model(&args.model)?;
    let client = HedgeLeg {
        name: format!("short {}y zc inflation floor {}", args.maturity, args.client_strike),
        payoff: PathPayoff::ZcOption { maturity: args.maturity as f64, strike: args.client_strike, kind: OptionKind::Put },
        quantity: -1.0,
    };
    let candidates: Vec<HedgeLeg> = args
        .strikes
        .iter()
        .map(|&k| HedgeLeg {
            name: format!("{}y nominal floor {k}", args.maturity),
            payoff: PathPayoff::CapFloor { maturity: args.maturity, strike: k, kind: CapKind::Floorlet },
            quantity: 1.0,
        })
        .collect();
    let report = hedge_scenario(&model, &client, &candidates, &condition, args.paths, args.seed)?;
    eprintln!(
        "{} of {} paths meet '{}'{}; client pv {:.6}, conditional {:.6}",
        report.selected,
        report.total,
        args.condition,
        if report.thin_selection { " (thin selection)" } else { "" },
        report.client_pv,
        report.client_conditional
    );
    emit(&args.output, "hedge", || Ok(report.to_csv()?), || to_json(&report))?;
    if let (Some(dir), OutputFormat::Csv) = (&args.output.out, args.output.format) {
        write_file(dir, "hedge_libor.csv", &to_csv(&report.libor.stats)?)?;
    }
    Ok(())
}

pub fn cmd_moment_match(args: &MomentMatchArgs) -> Result<()> {
    let dsge: DsgeMatchInput = load_json(&args.dsge)?;
    let cont: ContinuousMatchInput = load_json(&args.continuous)?;
    let report = moment_match(&dsge, &cont, args.paths, args.seed)?;
    let c = report.conditions;
    eprintln!("matching-condition residuals: var_p {:.3e}, var_dn {:.3e}, cov {:.3e}", c.var_p, c.var_dn, c.cov);
    emit(&args.output, "moment_match", || Ok(report.table()), || to_json(&report))
}

#[derive(Debug, Serialize)]
struct DateSummary {
    time: f64,
    mean_index: f64,
    mean_growth: f64,
    mean_short_rate: f64,
    short_rate_se: f64,
    mean_discount: f64,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    if args.dump_paths && args.output.out.is_none() {
        return Err(usage("--dump-paths needs --out"));
    }
    let model = load_model(&args.model)?;
    let measure = match args.measure {
        MeasureArg::P => Measure::P,
        MeasureArg::Q => Measure::Q,
        MeasureArg::Forward => Measure::Forward(args.horizon as f64),
    };
    let paths = simulate(&model, &SimConfig::annual(args.paths, args.horizon, args.seed, measure))?;
    let mut rows = Vec::with_capacity(paths.times.len());
    for &t in &paths.times {
        let column = |f: &dyn Fn(&ctcb::monte_carlo::PathView) -> ctcb::error::Result<f64>| {
            paths.iter().map(|p| f(&p)).collect::<ctcb::error::Result<Vec<f64>>>()
        };
        let (mean_index, _) = mean_se(&column(&|p| p.index(t))?);
        let (mean_growth, _) = mean_se(&column(&|p| p.growth(t))?);
        let (mean_short_rate, short_rate_se) = mean_se(&column(&|p| p.short_rate(t))?);
        let (mean_discount, _) = mean_se(&column(&|p| p.discount(t))?);
        rows.push(DateSummary { time: t, mean_index, mean_growth, mean_short_rate, short_rate_se, mean_discount });
    }
    emit(&args.output, "simulation", || to_csv(&rows), || to_json(&rows))?;
    if let (true, Some(dir)) = (args.dump_paths, &args.output.out) {
        let mut buf = Vec::new();
        paths.write_csv(&mut buf)?;
        write_file(dir, "paths.csv", &String::from_utf8_lossy(&buf))?;
    }
    Ok(())
}
