use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eldercare_core::detection::{CusumConfig, CusumInput, DetectorConfig, RateConfig};
use eldercare_core::imputation::{GapPolicy, LongGapFill};
use eldercare_core::scenario::{preset, serialize_scenario, PRESET_NAMES};
use serde::Serialize;

use crate::commands::{
    cmd_market_report, detect_series, impute, optimize, simulate, DetectOptions, ImputeOptions, OptimizeOptions,
    ScenarioSource, SimulateOptions, DEFAULT_MAX_SLOPE,
};
use crate::error::CliError;
use crate::io::alerts_csv;

pub const OUT_DIR_ENV: &str = "ELDERCARE_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Structured,
}

#[derive(Debug, Parser)]
#[command(name = "eldercare", version, about = "Health-behavior scenario simulation and analysis")]
pub struct Cli {
    /// Override the seed of every scenario.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    pub out_dir: PathBuf,
    /// Shape of what is printed on standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate scenarios and write trajectory, alerts and report files.
    Simulate(SimulateArgs),
    /// Split a budget across participants to maximize total utility.
    Optimize(OptimizeArgs),
    /// Fill missing samples in a CSV series.
    Impute(ImputeArgs),
    /// Run an anomaly detector over a CSV series.
    Detect(DetectArgs),
    /// Feature-gap and coverage analysis of a market survey.
    MarketReport(MarketArgs),
    /// List the bundled scenario presets, or print one.
    PresetList(PresetArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario files.
    pub scenarios: Vec<PathBuf>,
    /// Bundled preset to run (repeatable).
    #[arg(long = "preset")]
    pub presets: Vec<String>,
    /// Rate-detector limit on |dH/dt| per day.
    #[arg(long, default_value_t = DEFAULT_MAX_SLOPE)]
    pub max_slope: f64,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// TOML file with `[[specs]]` tables (a, b, theta, delta_u).
    pub specs: PathBuf,
    #[arg(long)]
    pub budget: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LongGapArg {
    HoldLast,
    SeriesMean,
    LeaveMissing,
}

impl From<LongGapArg> for LongGapFill {
    fn from(v: LongGapArg) -> Self {
        match v {
            LongGapArg::HoldLast => LongGapFill::HoldLast,
            LongGapArg::SeriesMean => LongGapFill::SeriesMean,
            LongGapArg::LeaveMissing => LongGapFill::LeaveMissing,
        }
    }
}

#[derive(Debug, Args)]
pub struct SeriesArgs {
    /// CSV with a header; first column is time.
    pub input: PathBuf,
    /// Value column name (defaults to the second column).
    #[arg(long)]
    pub column: Option<String>,
}

#[derive(Debug, Args)]
pub struct ImputeArgs {
    #[command(flatten)]
    pub series: SeriesArgs,
    /// Longest run of missing samples filled by the Gaussian process.
    #[arg(long, default_value_t = 5)]
    pub short_gap_max: usize,
    #[arg(long, value_enum, default_value_t = LongGapArg::HoldLast)]
    pub long_gap_fill: LongGapArg,
    #[arg(long)]
    pub length_scale: Option<f64>,
    #[arg(long)]
    pub signal_variance: Option<f64>,
    #[arg(long)]
    pub noise_variance: Option<f64>,
    /// Output file (defaults to <out-dir>/<input stem>_filled.csv).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Cusum,
    Rate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CusumInputArg {
    Increment,
    Level,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub series: SeriesArgs,
    #[arg(long, value_enum, default_value_t = Method::Cusum)]
    pub method: Method,
    /// CUSUM allowance k.
    #[arg(long, default_value_t = 0.5)]
    pub drift: f64,
    /// CUSUM alarm threshold h.
    #[arg(long, default_value_t = 4.0)]
    pub threshold: f64,
    /// Samples used to estimate the in-control baseline.
    #[arg(long, default_value_t = 10)]
    pub calibration_window: usize,
    #[arg(long, value_enum, default_value_t = CusumInputArg::Increment)]
    pub cusum_input: CusumInputArg,
    /// Rate-detector limit on |dx/dt|.
    #[arg(long, default_value_t = DEFAULT_MAX_SLOPE)]
    pub max_slope: f64,
}

#[derive(Debug, Args)]
pub struct MarketArgs {
    /// Survey fixture (defaults to the bundled one).
    pub fixture: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PresetArgs {
    /// Print this preset as a scenario document.
    pub name: Option<String>,
}

#[derive(Serialize)]
struct Rows<T> {
    rows: Vec<T>,
}

fn structured<T: Serialize>(rows: Vec<T>) -> String {
    toml::to_string(&Rows { rows }).expect("rows are representable")
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
}

#[derive(Serialize)]
struct SimulateRow {
    scenario: String,
    terminal_h: f64,
    cbr: Option<f64>,
    alerts: usize,
    report: String,
}

/// Executes a parsed command line, printing to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let out_dir = cli.out_dir.clone();
    match cli.command {
        Command::Simulate(args) => {
            let mut sources: Vec<ScenarioSource> = args.scenarios.into_iter().map(ScenarioSource::File).collect();
            sources.extend(args.presets.into_iter().map(ScenarioSource::Preset));
            let outcomes = simulate(&SimulateOptions {
                sources,
                seed: cli.seed,
                out_dir,
                max_slope: args.max_slope,
            })?;
            let rows: Vec<SimulateRow> = outcomes
                .iter()
                .map(|o| SimulateRow {
                    scenario: o.report.scenario.clone().unwrap_or_default(),
                    terminal_h: o.report.terminal_h.unwrap_or(f64::NAN),
                    cbr: o.report.cost_benefit.and_then(|c| c.cbr),
                    alerts: o.report.alert_count.unwrap_or(0),
                    report: o.report_path.display().to_string(),
                })
                .collect();
            let text = match cli.format {
                Format::Csv => {
                    let mut s = String::from("scenario,terminal_h,cbr,alerts,report\n");
                    for r in &rows {
                        let cbr = r.cbr.map_or(String::new(), |c| c.to_string());
                        s.push_str(&format!("{},{},{},{},{}\n", r.scenario, r.terminal_h, cbr, r.alerts, r.report));
                    }
                    s
                }
                Format::Structured => structured(rows),
            };
            emit(out, &text)
        }
        Command::Optimize(args) => {
            let (plan, path) = optimize(&OptimizeOptions {
                specs_path: args.specs,
                budget: args.budget,
                seed: cli.seed.unwrap_or(0),
                out_dir,
            })?;
            let text = match cli.format {
                Format::Csv => {
                    let mut s = String::from("participant,amount\n");
                    for (i, a) in plan.amounts.iter().enumerate() {
                        s.push_str(&format!("{i},{a:.6}\n"));
                    }
                    s
                }
                Format::Structured => toml::to_string(&plan).expect("plan is representable"),
            };
            emit(out, &text)?;
            eprintln!("total utility {:.6}; report written to {}", plan.total_utility, path.display());
            Ok(())
        }
        Command::Impute(args) => {
            let outcome = impute(&ImputeOptions {
                input: args.series.input,
                column: args.series.column,
                policy: GapPolicy {
                    short_gap_max: args.short_gap_max,
                    long_gap_fill: args.long_gap_fill.into(),
                },
                length_scale: args.length_scale,
                signal_variance: args.signal_variance,
                noise_variance: args.noise_variance,
                output: args.output,
                out_dir,
            })?;
            let text = match cli.format {
                Format::Csv => format!(
                    "output,filled,still_missing\n{},{},{}\n",
                    outcome.output.display(),
                    outcome.filled,
                    outcome.still_missing
                ),
                Format::Structured => format!(
                    "output = {:?}\nfilled = {}\nstill_missing = {}\n",
                    outcome.output.display().to_string(),
                    outcome.filled,
                    outcome.still_missing
                ),
            };
            emit(out, &text)
        }
        Command::Detect(args) => {
            let detector = match args.method {
                Method::Cusum => DetectorConfig::Cusum(CusumConfig {
                    drift: args.drift,
                    threshold: args.threshold,
                    calibration_window: args.calibration_window,
                    input: match args.cusum_input {
                        CusumInputArg::Increment => CusumInput::Increment,
                        CusumInputArg::Level => CusumInput::Level,
                    },
                }),
                Method::Rate => DetectorConfig::RateThreshold(RateConfig {
                    max_abs_slope: args.max_slope,
                }),
            };
            let (alerts, path) = detect_series(&DetectOptions {
                input: args.series.input,
                column: args.series.column,
                detector,
                out_dir,
            })?;
            let text = match cli.format {
                Format::Csv => String::from_utf8(alerts_csv(&alerts)).expect("csv output is UTF-8"),
                Format::Structured => structured(alerts),
            };
            emit(out, &text)?;
            eprintln!("alerts written to {}", path.display());
            Ok(())
        }
        Command::MarketReport(args) => {
            let report = cmd_market_report(args.fixture.as_deref())?;
            let text = match cli.format {
                Format::Csv => report.to_csv(),
                Format::Structured => report.to_toml(),
            };
            emit(out, &text)
        }
        Command::PresetList(args) => {
            let text = match args.name {
                Some(name) => {
                    let mut s = preset(&name).map_err(|e| CliError::Usage(e.to_string()))?;
                    if let Some(seed) = cli.seed {
                        s.seed = seed;
                    }
                    serialize_scenario(&s).map_err(|e| CliError::Usage(e.to_string()))?
                }
                None => match cli.format {
                    Format::Csv => std::iter::once("name")
                        .chain(PRESET_NAMES)
                        .map(|n| format!("{n}\n"))
                        .collect(),
                    Format::Structured => format!("presets = {:?}\n", PRESET_NAMES),
                },
            };
            emit(out, &text)
        }
    }
}
