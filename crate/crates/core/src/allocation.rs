//! Saturating utility, health-sensitive logistic allocation, and
//! budget-constrained resource optimization across participants.
//!
//! The utility of a participant receiving `r` units is
//!
//! ```text
//!            a · r^θ
//! U(r) = ─────────────
//!         1 + b · r^δ
//! ```
//!
//! which grows with diminishing returns whenever `θ ≤ 1`. The budget problem
//! maximizes `Σ U_i(R_i)` subject to `Σ R_i = budget`, `R_i ≥ 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocationError {
    #[error("resource amount must be non-negative, got {0}")]
    NegativeResource(f64),
    #[error("marginal utility requires a positive resource amount, got {0}")]
    NonPositiveResource(f64),
    #[error("at least one utility spec is required")]
    EmptySpecs,
    #[error("budget must be positive, got {0}")]
    NonPositiveBudget(f64),
    #[error("invalid utility spec #{index}: {message}")]
    InvalidSpec { index: usize, message: String },
}

/// Coefficients of one participant's saturating utility curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitySpec {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub delta_u: f64,
}

impl UtilitySpec {
    pub fn new(a: f64, b: f64, theta: f64, delta_u: f64) -> Self {
        Self { a, b, theta, delta_u }
    }

    /// Returns a description of the first violated invariant, if any.
    pub fn check(&self) -> Option<String> {
        if !(self.a.is_finite() && self.a > 0.0) {
            Some(format!("a must be positive, got {}", self.a))
        } else if !(self.b.is_finite() && self.b >= 0.0) {
            Some(format!("b must be non-negative, got {}", self.b))
        } else if !(self.theta.is_finite() && self.theta > 0.0) {
            Some(format!("theta must be positive, got {}", self.theta))
        } else if !(self.delta_u.is_finite() && self.delta_u > 0.0) {
            Some(format!("delta_u must be positive, got {}", self.delta_u))
        } else {
            None
        }
    }

    /// Marginal utility is nonincreasing wherever it is positive iff `θ ≤ 1`.
    pub fn has_decreasing_marginal(&self) -> bool {
        self.theta <= 1.0
    }

    fn value(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        self.a * r.powf(self.theta) / (1.0 + self.b * r.powf(self.delta_u))
    }

    fn marginal(&self, r: f64) -> f64 {
        let x = self.b * r.powf(self.delta_u);
        let denom = (1.0 + x) * (1.0 + x);
        self.a * r.powf(self.theta - 1.0) * (self.theta + x * (self.theta - self.delta_u)) / denom
    }

    /// Limit of the marginal as `r → 0+`.
    fn marginal_at_zero(&self) -> f64 {
        if self.theta < 1.0 {
            f64::INFINITY
        } else if self.theta == 1.0 {
            self.a
        } else {
            0.0
        }
    }
}

/// Parameters of the health-sensitive logistic allocation rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticAllocationParams {
    /// Total resource rate available.
    pub lambda_total: f64,
    /// Sensitivity to health state. Negative values direct more resources to
    /// poorer health, which is what every bundled scenario uses.
    pub gamma: f64,
}

impl Default for LogisticAllocationParams {
    fn default() -> Self {
        Self {
            lambda_total: 4.0,
            gamma: -0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationMethod {
    KktBisection,
    ProjectedGradient,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationPlan {
    pub amounts: Vec<f64>,
    pub total_utility: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplier: Option<f64>,
    pub method: AllocationMethod,
}

pub fn utility(spec: &UtilitySpec, r: f64) -> Result<f64, AllocationError> {
    if r.is_nan() || r < 0.0 {
        return Err(AllocationError::NegativeResource(r));
    }
    Ok(spec.value(r))
}

/// `dU/dr = a·r^(θ−1)·[θ + b·r^δ·(θ−δ)] / (1 + b·r^δ)²`
pub fn marginal_utility(spec: &UtilitySpec, r: f64) -> Result<f64, AllocationError> {
    if r.is_nan() || r <= 0.0 {
        return Err(AllocationError::NonPositiveResource(r));
    }
    Ok(spec.marginal(r))
}

/// Numerically stable logistic sigmoid.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Resource rate `λ·exp(γh) / (1 + exp(γh))`.
pub fn logistic_allocation(params: &LogisticAllocationParams, h: f64) -> f64 {
    params.lambda_total * sigmoid(params.gamma * h)
}

pub fn total_utility(specs: &[UtilitySpec], amounts: &[f64]) -> f64 {
    specs.iter().zip(amounts).map(|(s, &r)| s.value(r)).sum()
}

const KKT_ITERATIONS: usize = 200;
const KKT_NU_FLOOR: f64 = 1e-12;
const KKT_MARGINAL_PROBE: f64 = 1e-9;
const PG_STARTS: usize = 16;
const PG_STEP: f64 = 1e-2;
const PG_ITERATIONS: usize = 10_000;
const PG_SEED: u64 = 0x5EED_A110C;

/// Maximizes the summed utility under a shared budget.
///
/// When every participant has `θ ≤ 1` the marginal utilities are monotone and
/// the shared multiplier is found by bisection; each participant's demand at a
/// given multiplier comes from inverting its marginal. Otherwise (or when the
/// budget exceeds every participant's satiation point) a seeded multi-start
/// projected-gradient ascent on the scaled simplex is used.
pub fn optimize_budget(specs: &[UtilitySpec], budget: f64) -> Result<AllocationPlan, AllocationError> {
    check_problem(specs, budget)?;
    if specs.len() == 1 {
        let m = specs[0].marginal(budget);
        return Ok(AllocationPlan {
            amounts: vec![budget],
            total_utility: specs[0].value(budget),
            multiplier: Some(m),
            method: AllocationMethod::KktBisection,
        });
    }
    if specs.iter().all(UtilitySpec::has_decreasing_marginal) {
        if let Some(plan) = kkt_bisection(specs, budget) {
            return Ok(plan);
        }
    }
    Ok(projected_gradient(specs, budget))
}

/// Exhaustive search over the budget simplex at the given step, for up to
/// three participants. `budget / step` is rounded to the nearest integer.
pub fn grid_search(specs: &[UtilitySpec], budget: f64, step: f64) -> Result<AllocationPlan, AllocationError> {
    check_problem(specs, budget)?;
    if specs.len() > 3 {
        return Err(AllocationError::InvalidSpec {
            index: 3,
            message: "grid search supports at most three participants".into(),
        });
    }
    let n_steps = (budget / step).round().max(1.0) as usize;
    let h = budget / n_steps as f64;
    let tables: Vec<Vec<f64>> = specs
        .iter()
        .map(|s| (0..=n_steps).map(|k| s.value(k as f64 * h)).collect())
        .collect();
    let mut best = (f64::NEG_INFINITY, vec![0usize; specs.len()]);
    match specs.len() {
        1 => best = (tables[0][n_steps], vec![n_steps]),
        2 => {
            for i in 0..=n_steps {
                let v = tables[0][i] + tables[1][n_steps - i];
                if v > best.0 {
                    best = (v, vec![i, n_steps - i]);
                }
            }
        }
        _ => {
            for i in 0..=n_steps {
                for j in 0..=(n_steps - i) {
                    let k = n_steps - i - j;
                    let v = tables[0][i] + tables[1][j] + tables[2][k];
                    if v > best.0 {
                        best = (v, vec![i, j, k]);
                    }
                }
            }
        }
    }
    let amounts: Vec<f64> = best.1.iter().map(|&k| k as f64 * h).collect();
    Ok(AllocationPlan {
        total_utility: total_utility(specs, &amounts),
        amounts,
        multiplier: None,
        method: AllocationMethod::Grid,
    })
}

fn check_problem(specs: &[UtilitySpec], budget: f64) -> Result<(), AllocationError> {
    if specs.is_empty() {
        return Err(AllocationError::EmptySpecs);
    }
    if !(budget.is_finite() && budget > 0.0) {
        return Err(AllocationError::NonPositiveBudget(budget));
    }
    for (index, s) in specs.iter().enumerate() {
        if let Some(message) = s.check() {
            return Err(AllocationError::InvalidSpec { index, message });
        }
    }
    Ok(())
}

/// Amount at which the participant's marginal equals `nu`, capped at `cap`.
/// Assumes the marginal is nonincreasing where positive.
fn demand(spec: &UtilitySpec, nu: f64, cap: f64) -> f64 {
    if spec.marginal_at_zero() <= nu {
        return 0.0;
    }
    if spec.marginal(cap) >= nu {
        return cap;
    }
    let (mut lo, mut hi) = (0.0_f64, cap);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if spec.marginal(mid) > nu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn kkt_bisection(specs: &[UtilitySpec], budget: f64) -> Option<AllocationPlan> {
    let demands = |nu: f64| -> Vec<f64> { specs.iter().map(|s| demand(s, nu, budget)).collect() };
    let sum = |v: &[f64]| v.iter().sum::<f64>();

    let mut lo = KKT_NU_FLOOR;
    let mut hi = specs
        .iter()
        .map(|s| s.marginal(KKT_MARGINAL_PROBE))
        .fold(KKT_NU_FLOOR, f64::max);
    let mut d_lo = demands(lo);
    if sum(&d_lo) < budget {
        // Every participant is satiated below the budget.
        return None;
    }
    let mut d_hi = demands(hi);
    for _ in 0..KKT_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let d = demands(mid);
        if sum(&d) > budget {
            lo = mid;
            d_lo = d;
        } else {
            hi = mid;
            d_hi = d;
        }
    }

    // Blend the demands bracketing the budget so the plan exhausts it; this
    // also resolves ties between participants with equal constant marginals.
    let (s_lo, s_hi) = (sum(&d_lo), sum(&d_hi));
    let t = if s_lo > s_hi { ((budget - s_hi) / (s_lo - s_hi)).clamp(0.0, 1.0) } else { 0.0 };
    let mut amounts: Vec<f64> = d_hi.iter().zip(&d_lo).map(|(h, l)| h + t * (l - h)).collect();
    rescale_to_budget(&mut amounts, budget);

    Some(AllocationPlan {
        total_utility: total_utility(specs, &amounts),
        amounts,
        multiplier: Some(0.5 * (lo + hi)),
        method: AllocationMethod::KktBisection,
    })
}

fn rescale_to_budget(amounts: &mut [f64], budget: f64) {
    let s: f64 = amounts.iter().sum();
    if s > 0.0 {
        for a in amounts.iter_mut() {
            *a *= budget / s;
        }
    }
}

/// Euclidean projection onto `{x ≥ 0, Σx = budget}` (sort-based).
pub fn project_onto_simplex(v: &[f64], budget: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - budget) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

fn projected_gradient(specs: &[UtilitySpec], budget: f64) -> AllocationPlan {
    let n = specs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(PG_SEED);
    let mut starts: Vec<Vec<f64>> = vec![vec![budget / n as f64; n]];
    for i in 0..n.min(PG_STARTS - 1) {
        let mut v = vec![0.0; n];
        v[i] = budget;
        starts.push(v);
    }
    while starts.len() < PG_STARTS {
        let w: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
        let s: f64 = w.iter().sum();
        starts.push(w.iter().map(|x| budget * x / s).collect());
    }

    // Marginals blow up at zero when θ < 1; evaluate slightly inside.
    let floor = budget * 1e-12;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in starts {
        let mut x = project_onto_simplex(&start, budget);
        let mut local_best = (total_utility(specs, &x), x.clone());
        for _ in 0..PG_ITERATIONS {
            let grad: Vec<f64> = specs
                .iter()
                .zip(&x)
                .map(|(s, &r)| s.marginal(r.max(floor)).min(1e12))
                .collect();
            let y: Vec<f64> = x.iter().zip(&grad).map(|(xi, g)| xi + PG_STEP * g).collect();
            x = project_onto_simplex(&y, budget);
            let f = total_utility(specs, &x);
            if f > local_best.0 {
                local_best = (f, x.clone());
            }
        }
        if best.as_ref().is_none_or(|b| local_best.0 > b.0) {
            best = Some(local_best);
        }
    }
    let (_, mut amounts) = best.expect("at least one start");
    rescale_to_budget(&mut amounts, budget);

    let interior: Vec<f64> = specs
        .iter()
        .zip(&amounts)
        .filter(|(_, &r)| r > 1e-6)
        .map(|(s, &r)| s.marginal(r))
        .collect();
    // Only meaningful when more than one participant is interior.
    let multiplier = (interior.len() > 1)
        .then(|| interior.iter().sum::<f64>() / interior.len() as f64)
        .filter(|m| m.is_finite());

    AllocationPlan {
        total_utility: total_utility(specs, &amounts),
        amounts,
        multiplier,
        method: AllocationMethod::ProjectedGradient,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(a: f64, b: f64, theta: f64, delta_u: f64) -> UtilitySpec {
        UtilitySpec::new(a, b, theta, delta_u)
    }

    #[test]
    fn utility_examples() {
        assert_eq!(utility(&spec(3.0, 2.0, 0.5, 1.5), 0.0).unwrap(), 0.0);
        assert_eq!(utility(&spec(1.0, 0.0, 1.0, 1.0), 7.0).unwrap(), 7.0);
        assert_relative_eq!(utility(&spec(2.0, 1.0, 1.0, 1.0), 1.0).unwrap(), 1.0);
        assert!(matches!(
            utility(&spec(1.0, 1.0, 1.0, 1.0), -1.0),
            Err(AllocationError::NegativeResource(_))
        ));
    }

    #[test]
    fn marginal_examples() {
        for r in [0.1, 1.0, 42.0] {
            assert_relative_eq!(marginal_utility(&spec(1.0, 0.0, 1.0, 1.0), r).unwrap(), 1.0);
        }
        assert_relative_eq!(marginal_utility(&spec(2.0, 1.0, 1.0, 1.0), 1.0).unwrap(), 0.5);
        assert!(marginal_utility(&spec(1.0, 1.0, 1.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn logistic_examples() {
        let p = LogisticAllocationParams { lambda_total: 10.0, gamma: 0.37 };
        assert_eq!(logistic_allocation(&p, 0.0), 5.0);
        let p = LogisticAllocationParams { lambda_total: 4.0, gamma: 1.0 };
        assert_relative_eq!(logistic_allocation(&p, 3f64.ln()), 3.0, max_relative = 1e-15);
        let p = LogisticAllocationParams { lambda_total: 10.0, gamma: -1.0 };
        assert!(logistic_allocation(&p, 100.0) < 1e-10);
    }

    #[test]
    fn symmetric_specs_split_evenly() {
        let s = spec(1.0, 1.0, 1.0, 1.0);
        let plan = optimize_budget(&[s, s], 10.0).unwrap();
        assert_eq!(plan.method, AllocationMethod::KktBisection);
        assert_relative_eq!(plan.amounts[0], 5.0, epsilon = 1e-9);
        assert_relative_eq!(plan.amounts[1], 5.0, epsilon = 1e-9);
    }

    #[test]
    fn linear_specs_pick_the_steeper_slope() {
        let plan = optimize_budget(&[spec(1.0, 0.0, 1.0, 1.0), spec(2.0, 0.0, 1.0, 1.0)], 4.0).unwrap();
        assert_relative_eq!(plan.amounts[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(plan.amounts[1], 4.0, epsilon = 1e-12);
        assert_relative_eq!(plan.total_utility, 8.0, epsilon = 1e-12);
    }

    #[test]
    fn single_participant_takes_everything() {
        let plan = optimize_budget(&[spec(1.0, 1.0, 0.5, 1.0)], 3.0).unwrap();
        assert_eq!(plan.amounts, vec![3.0]);
    }

    #[test]
    fn problem_errors() {
        assert_eq!(optimize_budget(&[], 1.0), Err(AllocationError::EmptySpecs));
        let s = spec(1.0, 1.0, 1.0, 1.0);
        assert!(matches!(optimize_budget(&[s], 0.0), Err(AllocationError::NonPositiveBudget(_))));
        assert!(matches!(
            optimize_budget(&[s, spec(-1.0, 1.0, 1.0, 1.0)], 1.0),
            Err(AllocationError::InvalidSpec { index: 1, .. })
        ));
    }

    #[test]
    fn satiated_budget_falls_back_to_gradient() {
        // θ=1, δ=2 peaks at r = 1/sqrt(b) = 1; a budget of 10 overshoots both.
        let s = spec(1.0, 1.0, 1.0, 2.0);
        let plan = optimize_budget(&[s, s], 10.0).unwrap();
        assert_eq!(plan.method, AllocationMethod::ProjectedGradient);
        assert_relative_eq!(plan.amounts.iter().sum::<f64>(), 10.0, max_relative = 1e-9);
        let grid = grid_search(&[s, s], 10.0, 1e-3).unwrap();
        assert!(plan.total_utility >= grid.total_utility - 1e-4);
    }

    #[test]
    fn sigmoidal_specs_use_gradient_fallback() {
        let plan = optimize_budget(&[spec(1.0, 1.0, 2.0, 2.0), spec(1.5, 0.5, 3.0, 1.0)], 3.0).unwrap();
        assert_eq!(plan.method, AllocationMethod::ProjectedGradient);
        let grid = grid_search(&[spec(1.0, 1.0, 2.0, 2.0), spec(1.5, 0.5, 3.0, 1.0)], 3.0, 1e-3).unwrap();
        assert!(plan.total_utility >= grid.total_utility - 1e-4);
    }

    #[test]
    fn simplex_projection() {
        let p = project_onto_simplex(&[0.5, 0.5], 1.0);
        assert_eq!(p, vec![0.5, 0.5]);
        let p = project_onto_simplex(&[3.0, -1.0, 0.0], 1.0);
        assert_relative_eq!(p[0], 1.0);
        assert_eq!(p[1], 0.0);
        let p = project_onto_simplex(&[1.0, 1.0, 1.0], 6.0);
        for x in p {
            assert_relative_eq!(x, 2.0);
        }
    }
}
