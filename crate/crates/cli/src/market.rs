//! Market survey fixture and gap analysis.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub const BUNDLED_FIXTURE: &str = include_str!("../fixtures/market.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureRow {
    pub name: String,
    /// Percent of respondents rating the feature important.
    pub importance: f64,
    /// Percent of current products offering it.
    pub availability: f64,
    /// 1 (easy) to 5 (hard).
    pub difficulty: f64,
    /// Expected availability in five years, percent.
    pub coverage_5y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionRow {
    pub name: String,
    pub population_affected: f64,
    pub service_coverage: f64,
    pub mortality: f64,
    pub personalization_needs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketFixture {
    pub features: Vec<FeatureRow>,
    pub conditions: Vec<ConditionRow>,
}

fn check_percent(problems: &mut Vec<String>, row: &str, field: &str, v: f64) {
    if !(0.0..=100.0).contains(&v) {
        problems.push(format!("{row}: {field} = {v} is outside [0, 100]"));
    }
}

impl MarketFixture {
    pub fn parse(text: &str) -> Result<Self, String> {
        let fixture: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        let problems = fixture.problems();
        if problems.is_empty() {
            Ok(fixture)
        } else {
            Err(problems.join("\n"))
        }
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_FIXTURE).expect("bundled fixture is valid")
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for f in &self.features {
            check_percent(&mut out, &f.name, "importance", f.importance);
            check_percent(&mut out, &f.name, "availability", f.availability);
            check_percent(&mut out, &f.name, "coverage_5y", f.coverage_5y);
            if !(1.0..=5.0).contains(&f.difficulty) {
                out.push(format!("{}: difficulty = {} is outside [1, 5]", f.name, f.difficulty));
            }
        }
        for c in &self.conditions {
            check_percent(&mut out, &c.name, "population_affected", c.population_affected);
            check_percent(&mut out, &c.name, "service_coverage", c.service_coverage);
            check_percent(&mut out, &c.name, "mortality", c.mortality);
            check_percent(&mut out, &c.name, "personalization_needs", c.personalization_needs);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGap {
    #[serde(flatten)]
    pub row: FeatureRow,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionGap {
    #[serde(flatten)]
    pub row: ConditionRow,
    pub unmet: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketReport {
    pub features: Vec<FeatureGap>,
    pub conditions: Vec<ConditionGap>,
}

/// Gap = importance − availability, unmet = 100 − service coverage; both
/// tables sorted by the derived column, largest first (stable on ties).
pub fn market_report(fixture: &MarketFixture) -> MarketReport {
    let mut features: Vec<FeatureGap> = fixture
        .features
        .iter()
        .map(|r| FeatureGap {
            gap: r.importance - r.availability,
            row: r.clone(),
        })
        .collect();
    features.sort_by(|a, b| b.gap.total_cmp(&a.gap));
    let mut conditions: Vec<ConditionGap> = fixture
        .conditions
        .iter()
        .map(|r| ConditionGap {
            unmet: 100.0 - r.service_coverage,
            row: r.clone(),
        })
        .collect();
    conditions.sort_by(|a, b| b.unmet.total_cmp(&a.unmet));
    MarketReport { features, conditions }
}

impl MarketReport {
    /// Two CSV tables separated by a blank line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,importance,availability,difficulty,coverage_5y,gap\n");
        for f in &self.features {
            let r = &f.row;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                quote(&r.name),
                r.importance,
                r.availability,
                r.difficulty,
                r.coverage_5y,
                f.gap
            );
        }
        out.push_str("\ncondition,population_affected,service_coverage,mortality,personalization_needs,unmet\n");
        for c in &self.conditions {
            let r = &c.row;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                quote(&r.name),
                r.population_affected,
                r.service_coverage,
                r.mortality,
                r.personalization_needs,
                c.unmet
            );
        }
        out
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("market report is representable")
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
