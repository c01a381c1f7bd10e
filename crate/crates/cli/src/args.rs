use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ctcb", version, about = "Calibrate, price, stress and simulate the central-bank inflation and rates model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate the model functions to a market snapshot.
    Calibrate(CalibrateArgs),
    /// Price one product in closed form, optionally with a Monte Carlo check.
    Price(PriceArgs),
    /// Recalibrate under structural or curve shocks and report PV and inflation delta.
    Stress(StressArgs),
    /// Conditional Monte Carlo report ranking nominal hedges of an inflation trade.
    Hedge(HedgeArgs),
    /// Compare the DSGE and continuous-time simulators on first-year moments.
    MomentMatch(MomentMatchArgs),
    /// Simulate model paths and summarise them by date.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Directory receiving the output files; without it the main table goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct MarketInputs {
    /// Market snapshot, CSV or JSON by extension.
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Structural parameters JSON.
    #[arg(long)]
    pub structural: PathBuf,
    /// Calibration config JSON; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProductKind {
    ZcOption,
    YoyOption,
    Zciis,
    Caplet,
    Floorlet,
    Swaption,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Side {
    Call,
    Put,
    Payer,
    Receiver,
}

/// Terms of a single product.
#[derive(Debug, Args)]
pub struct ProductTerms {
    #[arg(long, value_enum)]
    pub product: Option<ProductKind>,
    /// Maturity in years; the fixing date for caplets and the expiry for swaptions.
    #[arg(long)]
    pub maturity: Option<f64>,
    /// Strike as a decimal, e.g. 0.02.
    #[arg(long, allow_negative_numbers = true)]
    pub strike: Option<f64>,
    /// call or put for inflation options, payer or receiver for swaptions.
    #[arg(long, value_enum)]
    pub kind: Option<Side>,
    /// Accrual length for caplets, swap length in years for swaptions.
    #[arg(long)]
    pub tenor: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub notional: f64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub inputs: MarketInputs,
    /// Largest accepted absolute reprice residual.
    #[arg(long, default_value_t = 1e-7)]
    pub tolerance: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    /// Model JSON (structural parameters plus functions), e.g. from `calibrate`.
    #[arg(long)]
    pub model: PathBuf,
    /// Snapshot supplying the discount curve; without it PVs are undiscounted.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    #[command(flatten)]
    pub terms: ProductTerms,
    /// Add a Monte Carlo estimate with its standard error and z-score.
    #[arg(long)]
    pub mc: bool,
    #[arg(long, default_value_t = 20_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct StressArgs {
    #[command(flatten)]
    pub inputs: MarketInputs,
    /// One scenario per flag; join several shocks with commas, e.g. `h_p=0.5,delta=+20%`.
    #[arg(long = "shock", allow_hyphen_values = true)]
    pub shocks: Vec<String>,
    /// Trade to reprice; defaults to a 10y 2% ZC inflation cap.
    #[command(flatten)]
    pub terms: ProductTerms,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct HedgeArgs {
    /// Calibrated model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Path selection, e.g. `inflation(10) < 0%`; `true` selects every path.
    #[arg(long, default_value = "inflation(10) < 0")]
    pub condition: String,
    /// Maturity of the client ZC inflation floor and of the hedge floor strips.
    #[arg(long, default_value_t = 10)]
    pub maturity: usize,
    /// Strike of the client ZC inflation floor, sold by the client.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub client_strike: f64,
    /// Strikes of the candidate nominal floor strips; repeat or separate with commas.
    #[arg(long = "strike", value_delimiter = ',', allow_negative_numbers = true)]
    pub strikes: Vec<f64>,
    #[arg(long, default_value_t = 20_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct MomentMatchArgs {
    /// DSGE side inputs JSON.
    #[arg(long)]
    pub dsge: PathBuf,
    /// Continuous-time side inputs JSON.
    #[arg(long)]
    pub continuous: PathBuf,
    #[arg(long, default_value_t = 5000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    /// Real-world measure.
    P,
    /// Risk-neutral measure.
    Q,
    /// Forward measure of the bond maturing at the horizon.
    Forward,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Last annual date of the grid.
    #[arg(long, default_value_t = 10)]
    pub horizon: usize,
    #[arg(long, value_enum, default_value_t = MeasureArg::Q)]
    pub measure: MeasureArg,
    #[arg(long, default_value_t = 1000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also write every simulated state to `paths.csv` in the output directory.
    #[arg(long)]
    pub dump_paths: bool,
    #[command(flatten)]
    pub output: Output,
}
