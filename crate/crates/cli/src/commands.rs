use std::collections::HashSet;
use std::path::{Path, PathBuf};

use eldercare_core::allocation::{optimize_budget, AllocationPlan, UtilitySpec};
use eldercare_core::detection::{detect, detect_rate, Alert, DetectorConfig, RateConfig};
use eldercare_core::economics::{evaluate_scenario, trapezoid};
use eldercare_core::imputation::{fill_gaps, GapPolicy, KernelParams, TimeSeries};
use eldercare_core::scenario::{parse_scenario, preset, validate, Scenario};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io::{alerts_csv, read_series, read_text, trajectory_csv, write_atomic, write_series_bytes};
use crate::market::{market_report, MarketFixture, MarketReport};
use crate::report::RunReport;

/// Default rate-detector limit on |ΔH/Δt| for simulated trajectories.
pub const DEFAULT_MAX_SLOPE: f64 = 5.0;

/// Where a scenario comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    File(PathBuf),
    Preset(String),
}

impl ScenarioSource {
    fn label(&self) -> String {
        match self {
            ScenarioSource::File(p) => p.display().to_string(),
            ScenarioSource::Preset(name) => format!("preset `{name}`"),
        }
    }

    pub fn load(&self) -> Result<Scenario, CliError> {
        match self {
            ScenarioSource::File(path) => {
                let text = read_text(path)?;
                parse_scenario(&text).map_err(|e| CliError::scenario(&path.display().to_string(), e))
            }
            ScenarioSource::Preset(name) => preset(name).map_err(|e| CliError::scenario(&self.label(), e)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub sources: Vec<ScenarioSource>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub max_slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutcome {
    pub report: RunReport,
    pub report_path: PathBuf,
}

/// Keeps scenario names usable as file-name stems.
pub fn file_stem(name: &str) -> String {
    let stem: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if stem.is_empty() {
        "scenario".to_string()
    } else {
        stem
    }
}

/// Runs every scenario (in parallel) and writes its trajectory, alerts and
/// report. Outcomes come back in input order.
pub fn simulate(opts: &SimulateOptions) -> Result<Vec<SimulateOutcome>, CliError> {
    if opts.sources.is_empty() {
        return Err(CliError::Usage("simulate needs a scenario file or --preset".into()));
    }
    if !(opts.max_slope > 0.0) {
        return Err(CliError::Usage("--max-slope must be positive".into()));
    }
    let mut scenarios = Vec::with_capacity(opts.sources.len());
    let mut stems = HashSet::new();
    for src in &opts.sources {
        let mut s = src.load()?;
        if let Some(seed) = opts.seed {
            s.seed = seed;
        }
        let report = validate(&s);
        if !report.ok {
            return Err(CliError::Invalid {
                context: src.label(),
                report,
            });
        }
        if !stems.insert(file_stem(&s.name)) {
            return Err(CliError::Usage(format!(
                "two scenarios share the output name `{}`",
                file_stem(&s.name)
            )));
        }
        scenarios.push((src.label(), s));
    }
    let results: Vec<Result<SimulateOutcome, CliError>> = scenarios
        .par_iter()
        .map(|(label, s)| run_scenario(label, s, &opts.out_dir, opts.max_slope))
        .collect();
    results.into_iter().collect()
}

fn run_scenario(label: &str, s: &Scenario, out_dir: &Path, max_slope: f64) -> Result<SimulateOutcome, CliError> {
    let traj = s.simulate().map_err(|e| CliError::dynamics(label, e))?;
    let alerts = detect_rate(&traj, &RateConfig { max_abs_slope: max_slope }).map_err(|e| CliError::detection(label, e))?;
    let cost_benefit = evaluate_scenario(&traj, &s.economics).map_err(|e| CliError::economics(label, e))?;

    let stem = file_stem(&s.name);
    let trajectory_file = format!("{stem}_trajectory.csv");
    let alerts_file = format!("{stem}_alerts.csv");
    let report_path = out_dir.join(format!("{stem}_report.toml"));
    write_atomic(&out_dir.join(&trajectory_file), &trajectory_csv(&traj))?;
    write_atomic(&out_dir.join(&alerts_file), &alerts_csv(&alerts))?;

    let mut report = RunReport::new(s.seed);
    report.scenario = Some(s.name.clone());
    report.trajectory_file = Some(trajectory_file);
    report.alerts_file = Some(alerts_file);
    report.alert_count = Some(alerts.len());
    report.terminal_h = traj.terminal();
    report.cost_integral = Some(trapezoid(&traj.times, &traj.c));
    report.cost_benefit = Some(cost_benefit);
    report.save(&report_path)?;
    Ok(SimulateOutcome { report, report_path })
}

/// `[[specs]]` tables of utility parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecsFile {
    #[serde(default)]
    pub specs: Vec<UtilitySpec>,
}

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    pub specs_path: PathBuf,
    pub budget: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

pub fn optimize(opts: &OptimizeOptions) -> Result<(AllocationPlan, PathBuf), CliError> {
    let path = &opts.specs_path;
    let file: SpecsFile = toml::from_str(&read_text(path)?).map_err(|e| CliError::parse(path, e.message()))?;
    let context = path.display().to_string();
    let plan = optimize_budget(&file.specs, opts.budget).map_err(|e| CliError::allocation(&context, e))?;
    let stem = path.file_stem().map_or("specs".into(), |s| file_stem(&s.to_string_lossy()));
    let report_path = opts.out_dir.join(format!("{stem}_allocation.toml"));
    let mut report = RunReport::new(opts.seed);
    report.allocation = Some(plan.clone());
    report.save(&report_path)?;
    Ok((plan, report_path))
}

#[derive(Debug, Clone)]
pub struct ImputeOptions {
    pub input: PathBuf,
    pub column: Option<String>,
    pub policy: GapPolicy,
    pub length_scale: Option<f64>,
    pub signal_variance: Option<f64>,
    pub noise_variance: Option<f64>,
    pub output: Option<PathBuf>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputeOutcome {
    pub output: PathBuf,
    pub filled: usize,
    pub still_missing: usize,
}

pub fn impute(opts: &ImputeOptions) -> Result<ImputeOutcome, CliError> {
    let (table, series) = read_series(&opts.input, opts.column.as_deref())?;
    let context = opts.input.display().to_string();
    let defaults = KernelParams::for_series(&series);
    let kernel = KernelParams {
        length_scale: opts.length_scale.unwrap_or(defaults.length_scale),
        signal_variance: opts.signal_variance.unwrap_or(defaults.signal_variance),
        noise_variance: opts.noise_variance.unwrap_or(defaults.noise_variance),
    };
    let filled = fill_gaps(&series, &opts.policy, kernel).map_err(|e| CliError::imputation(&context, e))?;
    let output = opts.output.clone().unwrap_or_else(|| {
        let stem = opts.input.file_stem().map_or("series".into(), |s| file_stem(&s.to_string_lossy()));
        opts.out_dir.join(format!("{stem}_filled.csv"))
    });
    write_atomic(&output, &write_series_bytes(&table, &series, &filled))?;
    let before = series.values.iter().filter(|v| v.is_none()).count();
    let still_missing = filled.values.iter().filter(|v| v.is_none()).count();
    Ok(ImputeOutcome {
        output,
        filled: before - still_missing,
        still_missing,
    })
}

#[derive(Debug, Clone)]
pub struct DetectOptions {
    pub input: PathBuf,
    pub column: Option<String>,
    pub detector: DetectorConfig,
    pub out_dir: PathBuf,
}

pub fn detect_series(opts: &DetectOptions) -> Result<(Vec<Alert>, PathBuf), CliError> {
    let (_, series): (_, TimeSeries) = read_series(&opts.input, opts.column.as_deref())?;
    let context = opts.input.display().to_string();
    let alerts = detect(&series, &opts.detector).map_err(|e| CliError::detection(&context, e))?;
    let stem = opts.input.file_stem().map_or("series".into(), |s| file_stem(&s.to_string_lossy()));
    let path = opts.out_dir.join(format!("{stem}_alerts.csv"));
    write_atomic(&path, &alerts_csv(&alerts))?;
    Ok((alerts, path))
}

/// Gap analysis of `fixture`, or of the bundled survey when none is given.
pub fn cmd_market_report(fixture: Option<&Path>) -> Result<MarketReport, CliError> {
    let fixture = match fixture {
        Some(path) => MarketFixture::parse(&read_text(path)?).map_err(|e| CliError::parse(path, e))?,
        None => MarketFixture::bundled(),
    };
    Ok(market_report(&fixture))
}
