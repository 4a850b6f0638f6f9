use eldercare_core::allocation::{
    logistic_allocation, marginal_utility, optimize_budget, utility, AllocationMethod, LogisticAllocationParams,
    UtilitySpec,
};
use proptest::prelude::*;

/// Brute-force maximum over the budget simplex at `step` (budget must be a
/// multiple of `step`). Written against the closed-form utility directly.
fn grid_oracle(specs: &[UtilitySpec], budget: f64, step: f64) -> (f64, Vec<f64>) {
    let u = |s: &UtilitySpec, r: f64| {
        if r == 0.0 {
            0.0
        } else {
            s.a * r.powf(s.theta) / (1.0 + s.b * r.powf(s.delta_u))
        }
    };
    let k = (budget / step).round() as usize;
    let table: Vec<Vec<f64>> = specs.iter().map(|s| (0..=k).map(|i| u(s, i as f64 * step)).collect()).collect();
    let mut best = (f64::NEG_INFINITY, vec![]);
    if specs.len() == 2 {
        for i in 0..=k {
            let v = table[0][i] + table[1][k - i];
            if v > best.0 {
                best = (v, vec![i as f64 * step, (k - i) as f64 * step]);
            }
        }
    } else {
        for i in 0..=k {
            for j in 0..=k - i {
                let v = table[0][i] + table[1][j] + table[2][k - i - j];
                if v > best.0 {
                    best = (v, vec![i as f64 * step, j as f64 * step, (k - i - j) as f64 * step]);
                }
            }
        }
    }
    best
}

#[test]
fn two_participants_match_grid_search() {
    let specs = [UtilitySpec::new(1.0, 1.0, 1.0, 1.0), UtilitySpec::new(2.0, 1.0, 1.0, 1.0)];
    let plan = optimize_budget(&specs, 2.0).unwrap();
    let (_, grid) = grid_oracle(&specs, 2.0, 1e-3);
    for (a, g) in plan.amounts.iter().zip(&grid) {
        assert!((a - g).abs() <= 2e-3, "{a} vs {g}");
    }
    // Interior KKT point: 1/(1+r₁)² = 2/(1+r₂)², r₁ + r₂ = 2.
    let r1 = (3.0 - 2f64.sqrt()) / (1.0 + 2f64.sqrt());
    assert!((plan.amounts[0] - r1).abs() < 1e-9);
}

fn arb_concave_spec() -> impl Strategy<Value = UtilitySpec> {
    (0.2..3.0f64, 0.0..2.0f64, 0.3..1.0f64, 0.0..1.5f64)
        .prop_map(|(a, b, theta, extra)| UtilitySpec::new(a, b, theta, theta + extra))
}

fn arb_equal_exponent_spec() -> impl Strategy<Value = UtilitySpec> {
    (0.1..5.0f64, 0.01..5.0f64, 0.2..3.0f64).prop_map(|(a, b, e)| UtilitySpec::new(a, b, e, e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn marginal_matches_central_difference(spec in arb_equal_exponent_spec(), r in 0.05..20.0f64) {
        let h = 1e-5;
        let fd = (utility(&spec, r + h).unwrap() - utility(&spec, r - h).unwrap()) / (2.0 * h);
        let m = marginal_utility(&spec, r).unwrap();
        prop_assert!((m - fd).abs() <= 1e-6 * m.abs().max(1e-3), "m={} fd={}", m, fd);
    }

    #[test]
    fn utility_is_increasing_and_bounded(spec in arb_equal_exponent_spec(), r1 in 0.0..50.0f64, dr in 1e-3..50.0f64) {
        let r2 = r1 + dr;
        let (u1, u2) = (utility(&spec, r1).unwrap(), utility(&spec, r2).unwrap());
        prop_assert!(u2 > u1);
        prop_assert!(u2 < spec.a / spec.b);
        prop_assert_eq!(utility(&spec, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn unit_exponents_have_diminishing_returns(a in 0.1..5.0f64, b in 0.01..5.0f64, r1 in 1e-3..50.0f64, dr in 1e-3..50.0f64) {
        let spec = UtilitySpec::new(a, b, 1.0, 1.0);
        prop_assert!(marginal_utility(&spec, r1 + dr).unwrap() < marginal_utility(&spec, r1).unwrap());
    }

    #[test]
    fn logistic_allocation_properties(lambda in 0.1..100.0f64, gamma in -2.0..2.0f64, h in -10.0..10.0f64, c in 0.1..10.0f64, dh in 1e-3..5.0f64) {
        let p = LogisticAllocationParams { lambda_total: lambda, gamma };
        let v = logistic_allocation(&p, h);
        prop_assert!(v > 0.0 && v < lambda);
        let v2 = logistic_allocation(&p, h + dh);
        if gamma > 1e-9 {
            prop_assert!(v2 > v);
        } else if gamma < -1e-9 {
            prop_assert!(v2 < v);
        }
        let scaled = LogisticAllocationParams { lambda_total: lambda, gamma: gamma / c };
        let w = logistic_allocation(&scaled, c * h);
        prop_assert!((v - w).abs() <= 1e-12 * lambda);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn optimizer_beats_grid_oracle(
        specs in prop::collection::vec(arb_concave_spec(), 2..=3),
        budget_steps in 200usize..2000,
    ) {
        let budget = budget_steps as f64 * 1e-3;
        let plan = optimize_budget(&specs, budget).unwrap();
        let (grid_best, _) = grid_oracle(&specs, budget, 1e-3);
        prop_assert!(plan.total_utility >= grid_best - 1e-4, "plan {} grid {}", plan.total_utility, grid_best);
        let sum: f64 = plan.amounts.iter().sum();
        prop_assert!((sum - budget).abs() <= 1e-9 * budget);
        prop_assert!(plan.amounts.iter().all(|&a| a >= 0.0));
        if plan.method == AllocationMethod::KktBisection {
            let marginals: Vec<f64> = specs
                .iter()
                .zip(&plan.amounts)
                .filter(|(_, &r)| r > 1e-6)
                .map(|(s, &r)| marginal_utility(s, r).unwrap())
                .collect();
            for m in &marginals {
                prop_assert!((m - marginals[0]).abs() <= 1e-4, "{:?}", marginals);
            }
        }
    }
}
