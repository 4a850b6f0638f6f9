//! Scenario documents: parsing, validation, cohort presets and exogenous
//! signal generation.
//!
//! A scenario is a single TOML document:
//!
//! ```toml
//! name = "example"
//! horizon = 30.0
//! dt = 0.1
//! h0 = 50.0
//! seed = 7
//!
//! [dynamics]
//! mode = "coupled"
//! alpha = 1.0
//!
//! [signals.e]
//! kind = "sinusoid"
//! level = 2.0
//! amplitude = 0.5
//! period = 365.0
//! ```
//!
//! Every block other than the four top-level scalars is optional and takes
//! the defaults of its type.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::LogisticAllocationParams;
use crate::dynamics::{
    half_grid_times, simulate_coupled, simulate_linear, step_count, CoupledSignals, DynamicsError, DynamicsMode,
    DynamicsParams, HealthTrajectory, LinearSignals, H_MAX, H_MIN,
};
use crate::economics::{CostParams, EconomicsParams, OperatingCostSource};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown field at line {line}, column {column}: {message}")]
    UnknownField { line: usize, column: usize, message: String },
    #[error("type mismatch at line {line}, column {column}: {message}")]
    TypeMismatch { line: usize, column: usize, message: String },
    #[error("invalid scenario:\n{0}")]
    Invalid(ValidationReport),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("signal sampling needs at least one time point")]
    EmptyTimes,
    #[error("serialization failed: {0}")]
    Serialize(String),
}

/// Exogenous input generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalSpec {
    Constant {
        level: f64,
    },
    /// `before` for `t < at`, `after` for `t ≥ at`.
    Step {
        before: f64,
        after: f64,
        at: f64,
    },
    /// `level + amplitude·sin(2πt/period + phase)`.
    Sinusoid {
        #[serde(default)]
        level: f64,
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `level + sigma·z` with `z` drawn from a seeded standard normal.
    GaussianNoise {
        #[serde(default)]
        level: f64,
        sigma: f64,
    },
    /// Linear interpolation between `(time, value)` knots, held constant
    /// outside the table.
    PiecewiseTable {
        points: Vec<[f64; 2]>,
    },
}

impl SignalSpec {
    pub fn constant(level: f64) -> Self {
        SignalSpec::Constant { level }
    }

    fn check(&self, path: &str, report: &mut ValidationReport) {
        let finite = |report: &mut ValidationReport, field: &str, v: f64| {
            if !v.is_finite() {
                report.error(format!("{path}.{field}"), format!("{field} must be finite"));
            }
        };
        match self {
            SignalSpec::Constant { level } => finite(report, "level", *level),
            SignalSpec::Step { before, after, at } => {
                finite(report, "before", *before);
                finite(report, "after", *after);
                finite(report, "at", *at);
            }
            SignalSpec::Sinusoid {
                level,
                amplitude,
                period,
                phase,
            } => {
                finite(report, "level", *level);
                finite(report, "amplitude", *amplitude);
                finite(report, "phase", *phase);
                if !(period.is_finite() && *period > 0.0) {
                    report.error(format!("{path}.period"), "period must be positive");
                }
            }
            SignalSpec::GaussianNoise { level, sigma } => {
                finite(report, "level", *level);
                if !(sigma.is_finite() && *sigma >= 0.0) {
                    report.error(format!("{path}.sigma"), "sigma must be non-negative");
                }
            }
            SignalSpec::PiecewiseTable { points } => {
                if points.is_empty() {
                    report.error(format!("{path}.points"), "table needs at least one knot");
                }
                if points.iter().flatten().any(|v| !v.is_finite()) {
                    report.error(format!("{path}.points"), "knots must be finite");
                }
                if points.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                    report.error(format!("{path}.points"), "knot times must be strictly increasing");
                }
            }
        }
    }
}

/// Samples `spec` at `times`. Identical inputs give bitwise-identical output.
pub fn sample_signal(spec: &SignalSpec, times: &[f64], seed: u64) -> Result<Vec<f64>, ScenarioError> {
    if times.is_empty() {
        return Err(ScenarioError::EmptyTimes);
    }
    Ok(match spec {
        SignalSpec::Constant { level } => vec![*level; times.len()],
        SignalSpec::Step { before, after, at } => {
            times.iter().map(|&t| if t >= *at { *after } else { *before }).collect()
        }
        SignalSpec::Sinusoid {
            level,
            amplitude,
            period,
            phase,
        } => times
            .iter()
            .map(|&t| level + amplitude * (std::f64::consts::TAU * t / period + phase).sin())
            .collect(),
        SignalSpec::GaussianNoise { level, sigma } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            times
                .iter()
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    level + sigma * z
                })
                .collect()
        }
        SignalSpec::PiecewiseTable { points } => times.iter().map(|&t| interpolate_table(points, t)).collect(),
    })
}

fn interpolate_table(points: &[[f64; 2]], t: f64) -> f64 {
    let (first, last) = match (points.first(), points.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return f64::NAN,
    };
    if t <= first[0] {
        return first[1];
    }
    if t >= last[0] {
        return last[1];
    }
    // First knot strictly after t; t lies in [points[k-1], points[k]).
    let k = points.partition_point(|p| p[0] <= t);
    let [t0, v0] = points[k - 1];
    let [t1, v1] = points[k];
    v0 + (t - t0) / (t1 - t0) * (v1 - v0)
}

/// One generator per exogenous input. `s`, `p` and `c` feed the linear mode;
/// `s_c` and `r_m` feed the behavior cost of the coupled mode; `e` feeds both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Signals {
    pub s: SignalSpec,
    pub p: SignalSpec,
    pub e: SignalSpec,
    pub c: SignalSpec,
    pub s_c: SignalSpec,
    pub r_m: SignalSpec,
}

impl Default for Signals {
    fn default() -> Self {
        Self {
            s: SignalSpec::constant(1.0),
            p: SignalSpec::constant(0.0),
            e: SignalSpec::constant(1.0),
            c: SignalSpec::constant(0.2),
            s_c: SignalSpec::constant(1.0),
            r_m: SignalSpec::constant(1.0),
        }
    }
}

impl Signals {
    fn named(&self) -> [(&'static str, &SignalSpec); 6] {
        [
            ("s", &self.s),
            ("p", &self.p),
            ("e", &self.e),
            ("c", &self.c),
            ("s_c", &self.s_c),
            ("r_m", &self.r_m),
        ]
    }
}

/// Per-input seed so that noise on different inputs is independent.
pub fn signal_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// All inputs sampled on the half-step grid of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignals {
    pub times: Vec<f64>,
    pub s: Vec<f64>,
    pub p: Vec<f64>,
    pub e: Vec<f64>,
    pub c: Vec<f64>,
    pub s_c: Vec<f64>,
    pub r_m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Days.
    pub horizon: f64,
    /// Days.
    pub dt: f64,
    /// Initial health on the 0–100 scale.
    pub h0: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dynamics: DynamicsParams,
    #[serde(default)]
    pub allocation: LogisticAllocationParams,
    #[serde(default)]
    pub cost: CostParams,
    #[serde(default)]
    pub economics: EconomicsParams,
    #[serde(default)]
    pub signals: Signals,
}

impl Scenario {
    /// Scenario with default parameter blocks.
    pub fn new(name: impl Into<String>, horizon: f64, dt: f64, h0: f64) -> Self {
        Self {
            name: name.into(),
            horizon,
            dt,
            h0,
            seed: 0,
            dynamics: DynamicsParams::default(),
            allocation: LogisticAllocationParams::default(),
            cost: CostParams::default(),
            economics: EconomicsParams::default(),
            signals: Signals::default(),
        }
    }

    pub fn sample_signals(&self) -> Result<SampledSignals, ScenarioError> {
        let n = step_count(self.horizon, self.dt).map_err(|_| ScenarioError::EmptyTimes)?;
        let times = half_grid_times(n, self.dt);
        let sample = |index: usize, spec: &SignalSpec| sample_signal(spec, &times, signal_seed(self.seed, index));
        let sig = &self.signals;
        Ok(SampledSignals {
            s: sample(0, &sig.s)?,
            p: sample(1, &sig.p)?,
            e: sample(2, &sig.e)?,
            c: sample(3, &sig.c)?,
            s_c: sample(4, &sig.s_c)?,
            r_m: sample(5, &sig.r_m)?,
            times,
        })
    }

    /// Integrates the scenario in its configured mode.
    pub fn simulate(&self) -> Result<HealthTrajectory, DynamicsError> {
        let sampled = self
            .sample_signals()
            .map_err(|_| DynamicsError::HorizonTooShort {
                horizon: self.horizon,
                dt: self.dt,
            })?;
        match self.dynamics.mode {
            DynamicsMode::Linear => simulate_linear(
                &self.dynamics,
                &LinearSignals {
                    s: sampled.s,
                    p: sampled.p,
                    e: sampled.e,
                    c: sampled.c,
                },
                self.h0,
                self.horizon,
                self.dt,
            ),
            DynamicsMode::Coupled => simulate_coupled(
                &self.dynamics,
                &self.allocation,
                &self.cost,
                &CoupledSignals {
                    e: sampled.e,
                    s_c: sampled.s_c,
                    r_m: sampled.r_m,
                },
                self.h0,
                self.horizon,
                self.dt,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub path: String,
    pub message: String,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>, severity: Severity) {
        self.issues.push(Issue {
            path: path.into(),
            message: message.into(),
            severity,
        });
        self.ok = !self.issues.iter().any(|i| i.severity == Severity::Error);
    }

    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.push(path, message, Severity::Error);
    }

    fn warning(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.push(path, message, Severity::Warning);
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            let tag = match issue.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            write!(f, "{tag}: {}: {}", issue.path, issue.message)?;
        }
        Ok(())
    }
}

/// Checks every invariant of the scenario and its nested blocks, collecting
/// all violations.
pub fn validate(s: &Scenario) -> ValidationReport {
    let mut r = ValidationReport {
        ok: true,
        issues: Vec::new(),
    };

    if s.name.trim().is_empty() {
        r.error("name", "name must not be empty");
    }
    let horizon_ok = s.horizon.is_finite() && s.horizon > 0.0;
    if !horizon_ok {
        r.error("horizon", "horizon must be positive");
    }
    let dt_ok = s.dt.is_finite() && s.dt > 0.0;
    if !dt_ok {
        r.error("dt", "dt must be positive");
    }
    let mut grid_ok = horizon_ok && dt_ok;
    if grid_ok && s.dt > s.horizon {
        r.error("dt", "dt must not exceed horizon");
        grid_ok = false;
    }
    if grid_ok {
        let steps = (s.horizon / s.dt).round();
        if (steps * s.dt - s.horizon).abs() > 1e-9 * s.horizon {
            r.warning(
                "dt",
                format!("horizon is not a multiple of dt; integrating {steps} steps to t={}", steps * s.dt),
            );
        }
    }
    if !(s.h0 >= H_MIN && s.h0 <= H_MAX) {
        r.error("h0", format!("h0 must lie in [{H_MIN}, {H_MAX}], got {}", s.h0));
    }

    let d = &s.dynamics;
    for (field, v) in [
        ("alpha1", d.alpha1),
        ("alpha2", d.alpha2),
        ("alpha3", d.alpha3),
        ("alpha", d.alpha),
    ] {
        if !v.is_finite() {
            r.error(format!("dynamics.{field}"), format!("{field} must be finite"));
        }
    }
    for (field, v) in [("beta", d.beta), ("kappa", d.kappa)] {
        if !(v.is_finite() && v >= 0.0) {
            r.error(format!("dynamics.{field}"), format!("{field} must be non-negative"));
        }
    }

    let a = &s.allocation;
    if !(a.lambda_total.is_finite() && a.lambda_total > 0.0) {
        r.error("allocation.lambda_total", "lambda_total must be positive");
    }
    if !a.gamma.is_finite() {
        r.error("allocation.gamma", "gamma must be finite");
    } else if d.mode == DynamicsMode::Coupled && a.gamma > 0.0 {
        r.warning(
            "allocation.gamma",
            "gamma > 0 allocates more resources to healthier states",
        );
    }

    let c = &s.cost;
    for (field, v) in [("c0", c.c0), ("delta_c", c.delta_c), ("eta", c.eta)] {
        if !(v.is_finite() && v >= 0.0) {
            r.error(format!("cost.{field}"), format!("{field} must be non-negative"));
        }
    }

    let e = &s.economics;
    for (field, w) in [("benefit_weights", e.benefit_weights), ("cost_weights", e.cost_weights)] {
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            r.error(format!("economics.{field}"), "weights must be non-negative");
        } else if w.iter().sum::<f64>() <= 0.0 {
            r.error(format!("economics.{field}"), "weights must not all be zero");
        }
    }
    for (field, v) in [("e_s", e.e_s), ("e_e", e.e_e)] {
        if !v.is_finite() {
            r.error(format!("economics.{field}"), format!("{field} must be finite"));
        }
    }
    for (field, v) in [("c_d", e.c_d), ("c_m", e.c_m)] {
        if !(v.is_finite() && v >= 0.0) {
            r.error(format!("economics.{field}"), format!("{field} must be non-negative"));
        }
    }
    if let OperatingCostSource::Supplied(v) = e.operating_cost_source {
        if !(v.is_finite() && v >= 0.0) {
            r.error("economics.operating_cost_source", "supplied operating cost must be non-negative");
        }
    }

    let before = r.issues.len();
    for (name, spec) in s.signals.named() {
        spec.check(&format!("signals.{name}"), &mut r);
    }
    let signals_ok = r.issues[before..].iter().all(|i| i.severity != Severity::Error);

    if grid_ok && signals_ok && d.mode == DynamicsMode::Coupled {
        if let Ok(sampled) = s.sample_signals() {
            sweep_coupled_inputs(s, &sampled, &mut r);
        }
    }
    r
}

fn sweep_coupled_inputs(s: &Scenario, sampled: &SampledSignals, r: &mut ValidationReport) {
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let (s_c_min, s_c_max, r_m_min) = (min(&sampled.s_c), max(&sampled.s_c), min(&sampled.r_m));
    if s_c_min < 0.0 {
        r.error("signals.s_c", format!("social-capital support must stay non-negative (min {s_c_min})"));
    }
    if r_m_min < 0.0 {
        r.error("signals.r_m", format!("social-capital resources must stay non-negative (min {r_m_min})"));
    }
    let e_min = min(&sampled.e);
    if 1.0 + s.dynamics.kappa * e_min <= 0.0 {
        r.error("signals.e", format!("1 + kappa·E must stay positive (min E {e_min})"));
    }
    if s.cost.delta_c * s_c_max > 1.0 + s.cost.eta * r_m_min.max(0.0) {
        r.warning("cost", "cost may clamp at zero");
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
    (line, column)
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let locate = |e: &toml::de::Error| e.span().map_or((1, 1), |sp| line_col(text, sp.start));
    if let Err(e) = toml::from_str::<toml::Table>(text) {
        let (line, column) = locate(&e);
        return Err(ScenarioError::Syntax {
            line,
            column,
            message: e.message().to_string(),
        });
    }
    let scenario: Scenario = toml::from_str(text).map_err(|e| {
        let (line, column) = locate(&e);
        let message = e.message().to_string();
        if message.contains("unknown field") || message.contains("unknown variant") {
            ScenarioError::UnknownField { line, column, message }
        } else {
            ScenarioError::TypeMismatch { line, column, message }
        }
    })?;
    let report = validate(&scenario);
    if report.ok {
        Ok(scenario)
    } else {
        Err(ScenarioError::Invalid(report))
    }
}

pub fn serialize_scenario(s: &Scenario) -> Result<String, ScenarioError> {
    toml::to_string(s).map_err(|e| ScenarioError::Serialize(e.to_string()))
}

pub const PRESET_NAMES: [&str; 12] = [
    "urban",
    "rural",
    "high-income",
    "low-income",
    "active",
    "sedentary",
    "balanced-diet",
    "high-fat-diet",
    "high-social",
    "low-social",
    "high-pollution",
    "low-pollution",
];

/// Cohort scenarios. Each pair differs from the shared base only in the
/// parameters that carry the contrast; magnitudes are illustrative.
pub fn preset(name: &str) -> Result<Scenario, ScenarioError> {
    let mut s = Scenario::new(name, 180.0, 0.25, 50.0);
    s.seed = 20_240_601;
    match name {
        // Pollution and pressure of city life against a cleaner, noisier
        // rural environment.
        "urban" => {
            s.signals.e = SignalSpec::GaussianNoise { level: 3.0, sigma: 0.2 };
            s.signals.s_c = SignalSpec::constant(0.8);
        }
        "rural" => {
            s.signals.e = SignalSpec::GaussianNoise { level: 1.0, sigma: 0.1 };
            s.signals.s_c = SignalSpec::constant(1.2);
        }
        "high-income" => {
            s.cost.c0 = 0.8;
            s.signals.r_m = SignalSpec::constant(2.0);
        }
        "low-income" => {
            s.cost.c0 = 1.4;
            s.signals.r_m = SignalSpec::constant(0.5);
        }
        "active" => s.dynamics.alpha = 1.3,
        "sedentary" => s.dynamics.alpha = 0.8,
        "balanced-diet" => s.dynamics.beta = 0.8,
        "high-fat-diet" => s.dynamics.beta = 1.3,
        "high-social" => s.signals.s_c = SignalSpec::constant(2.0),
        "low-social" => s.signals.s_c = SignalSpec::constant(0.3),
        "high-pollution" => s.signals.e = SignalSpec::GaussianNoise { level: 4.0, sigma: 0.3 },
        "low-pollution" => s.signals.e = SignalSpec::GaussianNoise { level: 0.5, sigma: 0.05 },
        _ => return Err(ScenarioError::UnknownPreset(name.to_string())),
    }
    Ok(s)
}
