//! Sudden-change detection on health series.
//!
//! Two detectors are provided: a two-sided CUSUM and a plain slope threshold.
//!
//! The CUSUM runs on sample-to-sample increments by default, so a level
//! shift produces a single alarm and a steady trend whose per-step change is
//! below the drift allowance never accumulates. It can also run on the raw
//! levels, in which case a persistent shift alarms repeatedly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::HealthTrajectory;
use crate::imputation::TimeSeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error("series contains missing values; fill gaps first")]
    MissingValues,
    #[error("series has {len} samples; need more than {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub index: usize,
    pub time: f64,
    pub direction: Direction,
    pub statistic: f64,
}

/// Quantity accumulated by the CUSUM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CusumInput {
    /// `x_i − x_{i−1}`; the baseline is the mean increment in the window.
    #[default]
    Increment,
    /// `x_i`; the baseline is the mean level in the window.
    Level,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CusumConfig {
    /// Allowance `k` subtracted from every deviation.
    pub drift: f64,
    /// Alarm threshold `h`.
    pub threshold: f64,
    /// Leading samples used to estimate the baseline; no alarms fire there.
    pub calibration_window: usize,
    #[serde(default)]
    pub input: CusumInput,
}

impl CusumConfig {
    pub fn check(&self) -> Result<(), DetectionError> {
        if !(self.drift >= 0.0) {
            return Err(DetectionError::InvalidConfig(format!("drift must be non-negative, got {}", self.drift)));
        }
        if !(self.threshold > 0.0) {
            return Err(DetectionError::InvalidConfig(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if self.calibration_window < 2 {
            return Err(DetectionError::InvalidConfig("calibration_window must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    /// Largest tolerated |ΔH/Δt| per day.
    pub max_abs_slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum DetectorConfig {
    Cusum(CusumConfig),
    RateThreshold(RateConfig),
}

/// Two-sided CUSUM:
///
/// ```text
/// g⁺ᵢ = max(0, g⁺ᵢ₋₁ + (xᵢ − μ₀) − k)
/// g⁻ᵢ = max(0, g⁻ᵢ₋₁ − (xᵢ − μ₀) − k)
/// ```
///
/// starting at the first sample after the calibration window. A statistic
/// above the threshold raises an alert and resets to zero.
pub fn detect_cusum(series: &TimeSeries, cfg: &CusumConfig) -> Result<Vec<Alert>, DetectionError> {
    cfg.check()?;
    let values = series.dense_values().ok_or(DetectionError::MissingValues)?;
    let window = cfg.calibration_window;
    if values.len() <= window {
        return Err(DetectionError::TooShort {
            len: values.len(),
            needed: window,
        });
    }

    let input = |i: usize| match cfg.input {
        CusumInput::Increment => values[i] - values[i - 1],
        CusumInput::Level => values[i],
    };
    let first = match cfg.input {
        CusumInput::Increment => 1,
        CusumInput::Level => 0,
    };
    let baseline = (first..window).map(input).sum::<f64>() / (window - first) as f64;

    let mut alerts = Vec::new();
    let (mut up, mut down) = (0.0_f64, 0.0_f64);
    for i in window..values.len() {
        let dev = input(i) - baseline;
        up = (up + dev - cfg.drift).max(0.0);
        down = (down - dev - cfg.drift).max(0.0);
        if up > cfg.threshold {
            alerts.push(Alert {
                index: i,
                time: series.times[i],
                direction: Direction::Up,
                statistic: up,
            });
            up = 0.0;
        }
        if down > cfg.threshold {
            alerts.push(Alert {
                index: i,
                time: series.times[i],
                direction: Direction::Down,
                statistic: down,
            });
            down = 0.0;
        }
    }
    Ok(alerts)
}

/// Alerts wherever `|x_i − x_{i−1}| / (t_i − t_{i−1})` exceeds the limit.
pub fn detect_rate_series(times: &[f64], values: &[f64], cfg: &RateConfig) -> Result<Vec<Alert>, DetectionError> {
    if cfg.max_abs_slope.is_nan() || cfg.max_abs_slope <= 0.0 {
        return Err(DetectionError::InvalidConfig(format!(
            "max_abs_slope must be positive, got {}",
            cfg.max_abs_slope
        )));
    }
    if values.len() < 2 || times.len() != values.len() {
        return Err(DetectionError::TooShort {
            len: values.len().min(times.len()),
            needed: 1,
        });
    }
    Ok((1..values.len())
        .filter_map(|i| {
            let slope = (values[i] - values[i - 1]) / (times[i] - times[i - 1]);
            (slope.abs() > cfg.max_abs_slope).then(|| Alert {
                index: i,
                time: times[i],
                direction: if slope > 0.0 { Direction::Up } else { Direction::Down },
                statistic: slope.abs(),
            })
        })
        .collect())
}

pub fn detect_rate(traj: &HealthTrajectory, cfg: &RateConfig) -> Result<Vec<Alert>, DetectionError> {
    detect_rate_series(&traj.times, &traj.h, cfg)
}

/// Runs whichever detector `cfg` selects on a gapless series.
pub fn detect(series: &TimeSeries, cfg: &DetectorConfig) -> Result<Vec<Alert>, DetectionError> {
    match cfg {
        DetectorConfig::Cusum(c) => detect_cusum(series, c),
        DetectorConfig::RateThreshold(r) => {
            let values = series.dense_values().ok_or(DetectionError::MissingValues)?;
            detect_rate_series(&series.times, &values, r)
        }
    }
}
