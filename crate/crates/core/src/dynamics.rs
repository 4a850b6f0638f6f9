//! Health-state integration.
//!
//! Two right-hand sides share one fixed-step RK4 engine:
//!
//! * linear: `dH/dt = α₁·S(t) + α₂·P(t) + α₃·E(t) − β·C(t)` with every input
//!   exogenous;
//! * coupled: `dH/dt = α·R_h(H) / (1 + κ·E(t)) − β·C(t)` where `R_h` is the
//!   logistic allocation evaluated at the current state and `C` is the
//!   behavior cost of the social-capital inputs.
//!
//! Input series may be sampled on the full-step grid (`N + 1` points, stage
//! midpoints linearly interpolated) or on the half-step grid (`2N + 1`
//! points, midpoints read directly). The half-step grid keeps the scheme
//! fourth order for time-varying inputs.
//!
//! After each full step `H` is clamped to `[0, 100]` and the clamp is flagged.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{logistic_allocation, sigmoid, LogisticAllocationParams};
use crate::economics::{behavior_cost, CostParams, EconomicsError};

pub const H_MIN: f64 = 0.0;
pub const H_MAX: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("step size must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("horizon {horizon} with step {dt} yields fewer than two samples")]
    HorizonTooShort { horizon: f64, dt: f64 },
    #[error("signal `{name}` has {len} samples; expected {full} (full grid) or {half} (half-step grid)")]
    SignalLength {
        name: &'static str,
        len: usize,
        full: usize,
        half: usize,
    },
    #[error("{0:?} dynamics parameters passed to the wrong simulator")]
    WrongMode(DynamicsMode),
    #[error("cost evaluation failed at t={time}: {source}")]
    Cost { time: f64, source: EconomicsError },
    #[error("non-finite health state at t={0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicsMode {
    Linear,
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsParams {
    pub mode: DynamicsMode,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            mode: DynamicsMode::Coupled,
            alpha1: 0.1,
            alpha2: 0.1,
            alpha3: 0.05,
            alpha: 1.0,
            beta: 1.0,
            kappa: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthTrajectory {
    pub times: Vec<f64>,
    pub h: Vec<f64>,
    /// Allocated resource rate; present in coupled mode only.
    pub r_h: Option<Vec<f64>>,
    pub c: Vec<f64>,
    pub clamped: Vec<bool>,
}

impl HealthTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal(&self) -> Option<f64> {
        self.h.last().copied()
    }
}

/// Exogenous inputs of the linear mode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearSignals {
    pub s: Vec<f64>,
    pub p: Vec<f64>,
    pub e: Vec<f64>,
    pub c: Vec<f64>,
}

/// Exogenous inputs of the coupled mode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoupledSignals {
    pub e: Vec<f64>,
    pub s_c: Vec<f64>,
    pub r_m: Vec<f64>,
}

/// Number of full steps covering `horizon`.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize, DynamicsError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DynamicsError::NonPositiveStep(dt));
    }
    let n = (horizon / dt).round();
    if !(n.is_finite() && n >= 1.0) {
        return Err(DynamicsError::HorizonTooShort { horizon, dt });
    }
    Ok(n as usize)
}

/// Full-step sample times `i·dt` for `i = 0..=n`.
pub fn grid_times(n: usize, dt: f64) -> Vec<f64> {
    (0..=n).map(|i| i as f64 * dt).collect()
}

/// Half-step sample times `k·dt/2` for `k = 0..=2n`.
pub fn half_grid_times(n: usize, dt: f64) -> Vec<f64> {
    (0..=2 * n).map(|k| k as f64 * 0.5 * dt).collect()
}

#[derive(Clone, Copy)]
enum Stage {
    Start,
    Mid,
    End,
}

/// Read-only view of one input series aligned with the step grid.
#[derive(Clone, Copy)]
struct Aligned<'a> {
    values: &'a [f64],
    half: bool,
}

impl<'a> Aligned<'a> {
    fn new(name: &'static str, values: &'a [f64], n: usize) -> Result<Self, DynamicsError> {
        if values.len() == n + 1 {
            Ok(Self { values, half: false })
        } else if values.len() == 2 * n + 1 {
            Ok(Self { values, half: true })
        } else {
            Err(DynamicsError::SignalLength {
                name,
                len: values.len(),
                full: n + 1,
                half: 2 * n + 1,
            })
        }
    }

    fn at(&self, step: usize, stage: Stage) -> f64 {
        if self.half {
            let k = 2 * step;
            match stage {
                Stage::Start => self.values[k],
                Stage::Mid => self.values[k + 1],
                Stage::End => self.values[k + 2],
            }
        } else {
            match stage {
                Stage::Start => self.values[step],
                Stage::Mid => 0.5 * (self.values[step] + self.values[step + 1]),
                Stage::End => self.values[step + 1],
            }
        }
    }

    fn full(&self, i: usize) -> f64 {
        if self.half {
            self.values[2 * i]
        } else {
            self.values[i]
        }
    }
}

/// Grid times, health values and clamp flags.
type Integrated = (Vec<f64>, Vec<f64>, Vec<bool>);

/// Integrates one trajectory; `rate(step, stage, h)` is the right-hand side.
fn integrate<F>(h0: f64, n: usize, dt: f64, mut rate: F) -> Result<Integrated, DynamicsError>
where
    F: FnMut(usize, Stage, f64) -> Result<f64, DynamicsError>,
{
    let times = grid_times(n, dt);
    let mut h = Vec::with_capacity(n + 1);
    let mut clamped = Vec::with_capacity(n + 1);
    h.push(h0.clamp(H_MIN, H_MAX));
    clamped.push(!(H_MIN..=H_MAX).contains(&h0));
    let mut state = h[0];
    for i in 0..n {
        let k1 = rate(i, Stage::Start, state)?;
        let k2 = rate(i, Stage::Mid, state + 0.5 * dt * k1)?;
        let k3 = rate(i, Stage::Mid, state + 0.5 * dt * k2)?;
        let k4 = rate(i, Stage::End, state + dt * k3)?;
        let next = state + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(DynamicsError::NonFinite(times[i + 1]));
        }
        let out_of_range = !(H_MIN..=H_MAX).contains(&next);
        state = next.clamp(H_MIN, H_MAX);
        h.push(state);
        clamped.push(out_of_range);
    }
    Ok((times, h, clamped))
}

/// Integrates the linear mode.
pub fn simulate_linear(
    params: &DynamicsParams,
    signals: &LinearSignals,
    h0: f64,
    horizon: f64,
    dt: f64,
) -> Result<HealthTrajectory, DynamicsError> {
    if params.mode != DynamicsMode::Linear {
        return Err(DynamicsError::WrongMode(params.mode));
    }
    let n = step_count(horizon, dt)?;
    let s = Aligned::new("s", &signals.s, n)?;
    let p = Aligned::new("p", &signals.p, n)?;
    let e = Aligned::new("e", &signals.e, n)?;
    let c = Aligned::new("c", &signals.c, n)?;

    let (times, h, clamped) = integrate(h0, n, dt, |i, stage, _h| {
        Ok(params.alpha1 * s.at(i, stage) + params.alpha2 * p.at(i, stage) + params.alpha3 * e.at(i, stage)
            - params.beta * c.at(i, stage))
    })?;
    Ok(HealthTrajectory {
        c: (0..=n).map(|i| c.full(i)).collect(),
        times,
        h,
        r_h: None,
        clamped,
    })
}

/// Coupled right-hand side at a given state and instantaneous inputs.
pub fn coupled_rate(params: &DynamicsParams, alloc: &LogisticAllocationParams, h: f64, e: f64, c: f64) -> f64 {
    params.alpha * logistic_allocation(alloc, h) / (1.0 + params.kappa * e) - params.beta * c
}

/// Integrates the coupled mode.
pub fn simulate_coupled(
    params: &DynamicsParams,
    alloc: &LogisticAllocationParams,
    cost: &CostParams,
    signals: &CoupledSignals,
    h0: f64,
    horizon: f64,
    dt: f64,
) -> Result<HealthTrajectory, DynamicsError> {
    if params.mode != DynamicsMode::Coupled {
        return Err(DynamicsError::WrongMode(params.mode));
    }
    let n = step_count(horizon, dt)?;
    let e = Aligned::new("e", &signals.e, n)?;
    let s_c = Aligned::new("s_c", &signals.s_c, n)?;
    let r_m = Aligned::new("r_m", &signals.r_m, n)?;

    let cost_at = |i: usize, stage: Stage| -> Result<f64, DynamicsError> {
        behavior_cost(cost, s_c.at(i, stage), r_m.at(i, stage))
            .map(|bc| bc.value)
            .map_err(|source| DynamicsError::Cost {
                time: i as f64 * dt,
                source,
            })
    };
    let (times, h, clamped) = integrate(h0, n, dt, |i, stage, h| {
        Ok(coupled_rate(params, alloc, h, e.at(i, stage), cost_at(i, stage)?))
    })?;

    let mut c = Vec::with_capacity(n + 1);
    for i in 0..n {
        c.push(cost_at(i, Stage::Start)?);
    }
    c.push(cost_at(n - 1, Stage::End)?);
    let r_h = h.iter().map(|&x| logistic_allocation(alloc, x)).collect();
    Ok(HealthTrajectory {
        times,
        h,
        r_h: Some(r_h),
        c,
        clamped,
    })
}

const EQ_SCAN_STEP: f64 = 1.0;
const EQ_TOLERANCE: f64 = 1e-10;

/// Smallest `H* ∈ [0, 100]` where the coupled rate vanishes for constant
/// environment and cost levels, or `None` when the rate keeps one sign.
///
/// Scans at unit spacing for sign changes, then bisects the first bracket.
pub fn find_equilibrium(
    params: &DynamicsParams,
    alloc: &LogisticAllocationParams,
    e_level: f64,
    c_level: f64,
) -> Option<f64> {
    let gain = params.alpha * alloc.lambda_total / (1.0 + params.kappa * e_level);
    let drain = params.beta * c_level;
    let f = |h: f64| gain * sigmoid(alloc.gamma * h) - drain;

    let steps = ((H_MAX - H_MIN) / EQ_SCAN_STEP).round() as usize;
    let mut a = H_MIN;
    let mut fa = f(a);
    for k in 1..=steps {
        if fa == 0.0 {
            return Some(a);
        }
        let b = H_MIN + k as f64 * EQ_SCAN_STEP;
        let fb = f(b);
        if fb == 0.0 {
            return Some(b);
        }
        if fa.signum() != fb.signum() {
            return Some(bisect(&f, a, b, fa));
        }
        a = b;
        fa = fb;
    }
    None
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    while hi - lo > EQ_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
