use std::path::Path;

use eldercare_core::allocation::AllocationPlan;
use eldercare_core::economics::CostBenefitReport;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io::{read_text, write_atomic};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Summary document written next to the artifacts of a run. File paths are
/// relative to the directory holding the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub tool_version: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alerts_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alert_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_integral: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_benefit: Option<CostBenefitReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<AllocationPlan>,
}

impl RunReport {
    pub fn new(seed: u64) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            seed,
            scenario: None,
            trajectory_file: None,
            alerts_file: None,
            alert_count: None,
            terminal_h: None,
            cost_integral: None,
            cost_benefit: None,
            allocation: None,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report fields are always representable")
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_toml(&read_text(path)?).map_err(|e| CliError::parse(path, e.message()))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        write_atomic(path, self.to_toml().as_bytes())
    }
}
