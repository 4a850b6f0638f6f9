//! Deterministic simulation and optimization toolkit for elderly-care
//! service modelling.
//!
//! * [`allocation`]: saturating utility, logistic allocation and budget
//!   optimization across participants.
//! * [`dynamics`]: fixed-step RK4 integration of the health state.
//! * [`economics`]: behavior cost and cost–benefit reports.
//! * [`imputation`]: Gaussian-process gap filling.
//! * [`detection`]: CUSUM and slope-threshold change detection.
//! * [`scenario`]: scenario documents, validation, presets and signals.
//!
//! Everything is a pure function of its inputs; seeded noise uses ChaCha8 so
//! runs are reproducible across platforms.

pub mod allocation;
pub mod detection;
pub mod dynamics;
pub mod economics;
pub mod imputation;
pub mod scenario;

pub use allocation::{
    logistic_allocation, marginal_utility, optimize_budget, utility, AllocationMethod, AllocationPlan,
    LogisticAllocationParams, UtilitySpec,
};
pub use detection::{detect_cusum, detect_rate, Alert, CusumConfig, DetectorConfig, Direction, RateConfig};
pub use dynamics::{find_equilibrium, simulate_coupled, simulate_linear, DynamicsMode, DynamicsParams, HealthTrajectory};
pub use economics::{
    behavior_cost, evaluate_scenario, total_benefit, total_cost, CostBenefitReport, CostParams, EconomicsParams,
    OperatingCostSource,
};
pub use imputation::{fill_gaps, fit_gp, predict, GapPolicy, GpModel, KernelParams, LongGapFill, TimeSeries};
pub use scenario::{parse_scenario, preset, sample_signal, validate, Scenario, SignalSpec, ValidationReport};
