//! Social-capital behavior cost and cost–benefit evaluation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::HealthTrajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EconomicsError {
    #[error("behavior cost inputs must be non-negative (s_c={s_c}, r_m={r_m})")]
    NegativeInput { s_c: f64, r_m: f64 },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("cost-benefit ratio undefined: total cost is zero")]
    UndefinedCbr(Box<CostBenefitReport>),
}

/// Parameters of the behavior-cost curve `C = C₀·(1 − δ_c·S_c / (1 + η·R_m))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    pub c0: f64,
    pub delta_c: f64,
    pub eta: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            c0: 1.0,
            delta_c: 0.5,
            eta: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatingCostSource {
    Supplied(f64),
    IntegratedFromTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EconomicsParams {
    /// Weights on (health, social, economic) benefit.
    pub benefit_weights: [f64; 3],
    /// Weights on (direct, operating, maintenance) cost.
    pub cost_weights: [f64; 3],
    pub e_s: f64,
    pub e_e: f64,
    pub c_d: f64,
    pub c_m: f64,
    pub operating_cost_source: OperatingCostSource,
}

impl Default for EconomicsParams {
    fn default() -> Self {
        Self {
            benefit_weights: [1.0, 0.5, 0.5],
            cost_weights: [1.0, 1.0, 1.0],
            e_s: 10.0,
            e_e: 5.0,
            c_d: 20.0,
            c_m: 5.0,
            operating_cost_source: OperatingCostSource::IntegratedFromTrajectory,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostBenefitReport {
    pub e_h: f64,
    pub e_s: f64,
    pub e_e: f64,
    pub total_benefit: f64,
    pub c_d: f64,
    pub c_o: f64,
    pub c_m: f64,
    pub total_cost: f64,
    /// Absent when the total cost is zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cbr: Option<f64>,
}

/// Result of [`behavior_cost`] together with whether the bracket went
/// negative and was clamped to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorCost {
    pub value: f64,
    pub clamped: bool,
}

pub fn behavior_cost(params: &CostParams, s_c: f64, r_m: f64) -> Result<BehaviorCost, EconomicsError> {
    if !(s_c >= 0.0 && r_m >= 0.0) {
        return Err(EconomicsError::NegativeInput { s_c, r_m });
    }
    let raw = params.c0 * (1.0 - params.delta_c * s_c / (1.0 + params.eta * r_m));
    Ok(if raw < 0.0 {
        BehaviorCost { value: 0.0, clamped: true }
    } else {
        BehaviorCost { value: raw, clamped: false }
    })
}

/// `γ₁·e_h + γ₂·e_s + γ₃·e_e`
pub fn total_benefit(params: &EconomicsParams, e_h: f64) -> f64 {
    let [g1, g2, g3] = params.benefit_weights;
    g1 * e_h + g2 * params.e_s + g3 * params.e_e
}

/// `λ₁·c_d + λ₂·c_o + λ₃·c_m`
pub fn total_cost(params: &EconomicsParams, c_o: f64) -> f64 {
    let [l1, l2, l3] = params.cost_weights;
    l1 * params.c_d + l2 * c_o + l3 * params.c_m
}

/// Trapezoidal integral of `values` over `times`.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Builds the cost–benefit report for a finished run. The health benefit is
/// the net change in health over the horizon.
pub fn evaluate_scenario(traj: &HealthTrajectory, params: &EconomicsParams) -> Result<CostBenefitReport, EconomicsError> {
    let (first, last) = match (traj.h.first(), traj.h.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(EconomicsError::EmptyTrajectory),
    };
    let e_h = last - first;
    let c_o = match params.operating_cost_source {
        OperatingCostSource::Supplied(v) => v,
        OperatingCostSource::IntegratedFromTrajectory => trapezoid(&traj.times, &traj.c),
    };
    let benefit = total_benefit(params, e_h);
    let cost = total_cost(params, c_o);
    let mut report = CostBenefitReport {
        e_h,
        e_s: params.e_s,
        e_e: params.e_e,
        total_benefit: benefit,
        c_d: params.c_d,
        c_o,
        c_m: params.c_m,
        total_cost: cost,
        cbr: None,
    };
    if cost == 0.0 {
        return Err(EconomicsError::UndefinedCbr(Box::new(report)));
    }
    report.cbr = Some(benefit / cost);
    Ok(report)
}
