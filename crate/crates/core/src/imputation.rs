//! Gap filling for uniformly sampled series.
//!
//! Short runs of missing samples are replaced by the posterior mean of a
//! squared-exponential Gaussian process fitted to the observed samples.
//! Longer runs follow a configurable fallback.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImputationError {
    #[error("series has no observed values")]
    AllMissing,
    #[error("need at least {needed} observed values, found {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("covariance factorization failed even with jitter {jitter:e}")]
    Factorization { jitter: f64 },
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("short_gap_max must be at least 1")]
    InvalidPolicy,
}

/// Uniformly sampled signal with explicit missing markers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<Option<f64>>,
}

impl TimeSeries {
    pub fn new(label: impl Into<String>, times: Vec<f64>, values: Vec<Option<f64>>) -> Result<Self, ImputationError> {
        let s = Self {
            label: label.into(),
            times,
            values,
        };
        s.check()?;
        Ok(s)
    }

    /// Builds a gapless series from plain values.
    pub fn complete(label: impl Into<String>, times: Vec<f64>, values: &[f64]) -> Result<Self, ImputationError> {
        Self::new(label, times, values.iter().copied().map(Some).collect())
    }

    pub fn check(&self) -> Result<(), ImputationError> {
        if self.times.len() != self.values.len() {
            return Err(ImputationError::InvalidSeries(format!(
                "{} times but {} values",
                self.times.len(),
                self.values.len()
            )));
        }
        if let Some(w) = self.times.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(ImputationError::InvalidSeries(format!(
                "times must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn observed(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().zip(&self.values).filter_map(|(&t, v)| v.map(|v| (t, v)))
    }

    pub fn observed_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(Option::is_none)
    }

    /// Values of a gapless series.
    pub fn dense_values(&self) -> Option<Vec<f64>> {
        self.values.iter().copied().collect()
    }

    /// Spacing between the first two samples, if any.
    pub fn spacing(&self) -> Option<f64> {
        (self.times.len() >= 2).then(|| self.times[1] - self.times[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub length_scale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl KernelParams {
    /// Defaults derived from the series: `ℓ = 3·spacing`, `σ²_f` the sample
    /// variance of the observed values (1 when undefined or zero) and
    /// `σ²_n = 1e-6·σ²_f`.
    pub fn for_series(series: &TimeSeries) -> Self {
        let length_scale = 3.0 * series.spacing().filter(|d| *d > 0.0).unwrap_or(1.0);
        let obs: Vec<f64> = series.observed().map(|(_, v)| v).collect();
        let mut signal_variance = 1.0;
        if obs.len() >= 2 {
            let mean = obs.iter().sum::<f64>() / obs.len() as f64;
            let var = obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (obs.len() - 1) as f64;
            if var.is_finite() && var > 0.0 {
                signal_variance = var;
            }
        }
        Self {
            length_scale,
            signal_variance,
            noise_variance: 1e-6 * signal_variance,
        }
    }

    fn check(&self) -> Result<(), ImputationError> {
        if !(self.length_scale.is_finite() && self.length_scale > 0.0) {
            return Err(ImputationError::InvalidKernel(format!(
                "length_scale must be positive, got {}",
                self.length_scale
            )));
        }
        if !(self.signal_variance.is_finite() && self.signal_variance > 0.0) {
            return Err(ImputationError::InvalidKernel(format!(
                "signal_variance must be positive, got {}",
                self.signal_variance
            )));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(ImputationError::InvalidKernel(format!(
                "noise_variance must be non-negative, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }

    pub fn covariance(&self, a: f64, b: f64) -> f64 {
        let d = (a - b) / self.length_scale;
        self.signal_variance * (-0.5 * d * d).exp()
    }
}

/// How targets are centered before fitting the zero-mean process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centering {
    /// Subtract the mean of the observed targets; predictions revert to it.
    #[default]
    TargetMean,
    /// Fit the raw targets; predictions revert to zero.
    None,
}

const BASE_JITTER: f64 = 1e-9;
const JITTER_DOUBLINGS: usize = 6;

#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: KernelParams,
    inputs: Vec<f64>,
    offset: f64,
    chol: Cholesky<f64, Dyn>,
    weights: DVector<f64>,
    jitter: f64,
}

impl GpModel {
    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    /// Diagonal jitter that made the covariance factorizable.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Constant the predictions revert to far from data.
    pub fn prior_mean(&self) -> f64 {
        self.offset
    }
}

/// Fits a zero-mean GP to the observed samples of `observed`.
pub fn fit_gp(observed: &TimeSeries, kernel: KernelParams, centering: Centering) -> Result<GpModel, ImputationError> {
    kernel.check()?;
    let (inputs, targets): (Vec<f64>, Vec<f64>) = observed.observed().unzip();
    if inputs.is_empty() {
        return Err(ImputationError::AllMissing);
    }
    let n = inputs.len();
    let offset = match centering {
        Centering::TargetMean => targets.iter().sum::<f64>() / n as f64,
        Centering::None => 0.0,
    };
    let y = DVector::from_iterator(n, targets.iter().map(|v| v - offset));
    let base = DMatrix::from_fn(n, n, |i, j| {
        kernel.covariance(inputs[i], inputs[j]) + if i == j { kernel.noise_variance } else { 0.0 }
    });

    let floor = BASE_JITTER * kernel.signal_variance;
    // A jitter-free factorization is kept only when no pivot falls below the
    // jitter scale; otherwise the bias from jitter is the lesser evil.
    if let Some(chol) = base.clone().cholesky() {
        if chol.l_dirty().diagonal().iter().all(|d| d * d >= floor) {
            let weights = chol.solve(&y);
            return Ok(GpModel {
                kernel,
                inputs,
                offset,
                chol,
                weights,
                jitter: 0.0,
            });
        }
    }
    let mut jitter = floor;
    for attempt in 0..=JITTER_DOUBLINGS {
        let mut k = base.clone();
        for i in 0..n {
            k[(i, i)] += jitter;
        }
        if let Some(chol) = k.cholesky() {
            let weights = chol.solve(&y);
            return Ok(GpModel {
                kernel,
                inputs,
                offset,
                chol,
                weights,
                jitter,
            });
        }
        if attempt < JITTER_DOUBLINGS {
            jitter *= 2.0;
        }
    }
    Err(ImputationError::Factorization { jitter })
}

/// Posterior mean and latent-function variance at a query time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

pub fn predict(model: &GpModel, query_times: &[f64]) -> Vec<Prediction> {
    let n = model.inputs.len();
    query_times
        .iter()
        .map(|&q| {
            let k_star = DVector::from_iterator(n, model.inputs.iter().map(|&x| model.kernel.covariance(q, x)));
            let mean = k_star.dot(&model.weights) + model.offset;
            let v = model
                .chol
                .l()
                .solve_lower_triangular(&k_star)
                .expect("Cholesky factor has a positive diagonal");
            let variance = (model.kernel.signal_variance - v.dot(&v)).max(0.0);
            Prediction { mean, variance }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LongGapFill {
    /// Repeat the last observation before the gap (the first one after it
    /// for a leading gap).
    HoldLast,
    SeriesMean,
    LeaveMissing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapPolicy {
    pub short_gap_max: usize,
    pub long_gap_fill: LongGapFill,
}

impl Default for GapPolicy {
    fn default() -> Self {
        Self {
            short_gap_max: 5,
            long_gap_fill: LongGapFill::HoldLast,
        }
    }
}

/// Maximal runs of missing samples as `(start, len)`.
pub fn missing_runs(series: &TimeSeries) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < series.values.len() {
        if series.values[i].is_none() {
            let start = i;
            while i < series.values.len() && series.values[i].is_none() {
                i += 1;
            }
            runs.push((start, i - start));
        } else {
            i += 1;
        }
    }
    runs
}

/// Fills missing samples; observed samples are copied unchanged.
pub fn fill_gaps(series: &TimeSeries, policy: &GapPolicy, kernel: KernelParams) -> Result<TimeSeries, ImputationError> {
    series.check()?;
    if policy.short_gap_max < 1 {
        return Err(ImputationError::InvalidPolicy);
    }
    let runs = missing_runs(series);
    if runs.is_empty() {
        return Ok(series.clone());
    }
    let found = series.observed_count();
    if found == 0 {
        return Err(ImputationError::AllMissing);
    }

    let (short, long): (Vec<_>, Vec<_>) = runs.into_iter().partition(|&(_, len)| len <= policy.short_gap_max);
    let mut out = series.clone();

    if !short.is_empty() {
        if found < 2 {
            return Err(ImputationError::InsufficientData { needed: 2, found });
        }
        let model = fit_gp(series, kernel, Centering::TargetMean)?;
        let idx: Vec<usize> = short.iter().flat_map(|&(s, len)| s..s + len).collect();
        let query: Vec<f64> = idx.iter().map(|&i| series.times[i]).collect();
        for (i, p) in idx.into_iter().zip(predict(&model, &query)) {
            out.values[i] = Some(p.mean);
        }
    }

    let mean = series.observed().map(|(_, v)| v).sum::<f64>() / found as f64;
    for (start, len) in long {
        let fill = match policy.long_gap_fill {
            LongGapFill::LeaveMissing => continue,
            LongGapFill::SeriesMean => mean,
            LongGapFill::HoldLast => series.values[..start]
                .iter()
                .rev()
                .find_map(|v| *v)
                .or_else(|| series.values[start + len..].iter().find_map(|v| *v))
                .expect("series has an observation"),
        };
        for v in &mut out.values[start..start + len] {
            *v = Some(fill);
        }
    }
    Ok(out)
}
