//! `summary.json`: terminal values, per-channel extrema and assertion outcomes.

use popdyn_core::simplex::{dist_inf, dist_l2, norm_l1, sub};
use serde::{Deserialize, Serialize};

use crate::config::{Assertion, Dynamic, Norm, Quantity, Stat, Which};
use crate::error::{HarnessError, Result};
use crate::io::CsvTable;

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub name: String,
    pub initial: Option<f64>,
    #[serde(rename = "final")]
    pub last: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub max_increase: Option<f64>,
    pub max_decrease: Option<f64>,
    /// Number of rows where the channel is defined.
    pub defined: usize,
}

impl ChannelStats {
    pub fn from_series(name: &str, series: &[Option<f64>]) -> Self {
        let vals: Vec<f64> = series.iter().flatten().copied().collect();
        let steps: Vec<f64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
        let fold = |v: &[f64], f: fn(f64, f64) -> f64| v.iter().copied().reduce(f);
        ChannelStats {
            name: name.to_string(),
            initial: vals.first().copied(),
            last: vals.last().copied(),
            min: fold(&vals, f64::min),
            max: fold(&vals, f64::max),
            max_increase: fold(&steps, f64::max),
            max_decrease: steps.iter().map(|d| -d).reduce(f64::max),
            defined: vals.len(),
        }
    }

    pub fn stat(&self, stat: Stat) -> Option<f64> {
        match stat {
            Stat::Initial => self.initial,
            Stat::Final => self.last,
            Stat::Min => self.min,
            Stat::Max => self.max,
            Stat::MaxIncrease => self.max_increase,
            Stat::MaxDecrease => self.max_decrease,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssertionOutcome {
    pub name: String,
    pub value: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: String,
    pub config_hash: String,
    pub dynamic: Dynamic,
    pub game: String,
    /// `t` for continuous runs, `n` for discrete ones.
    pub index: String,
    pub terminal_index: f64,
    pub terminal_state: Vec<f64>,
    pub terminal_mean: Vec<f64>,
    pub terminal_gap: Option<f64>,
    pub terminal_reg_gap: Option<f64>,
    pub rows: usize,
    /// Integration steps per recorded row.
    pub stride: usize,
    pub dt: Option<f64>,
    pub events: Option<usize>,
    pub max_correction: Option<f64>,
    pub aborted_at: Option<usize>,
    pub channels: Vec<ChannelStats>,
    pub wall_time_s: f64,
    pub assertions: Vec<AssertionOutcome>,
    pub passed: bool,
}

fn distance(a: &[f64], b: &[f64], norm: Norm) -> f64 {
    match norm {
        Norm::L1 => norm_l1(&sub(a, b)),
        Norm::L2 => dist_l2(a, b),
        Norm::Inf => dist_inf(a, b),
    }
}

impl RunSummary {
    pub fn channel(&self, name: &str) -> Option<&ChannelStats> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn evaluate(&self, a: &Assertion) -> AssertionOutcome {
        let value = match &a.quantity {
            Quantity::Channel { channel, stat } => self.channel(channel).and_then(|c| c.stat(*stat)),
            Quantity::Distance { which, target, norm } => {
                let x = match which {
                    Which::State => &self.terminal_state,
                    Which::Mean => &self.terminal_mean,
                };
                (x.len() == target.len()).then(|| distance(x, target, *norm))
            }
        };
        let passed = value.is_some_and(|v| a.min.is_none_or(|m| v >= m) && a.max.is_none_or(|m| v <= m));
        AssertionOutcome {
            name: a.name.clone(),
            value,
            min: a.min,
            max: a.max,
            passed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    /// Rejects summaries whose schema major version differs from ours.
    pub fn from_json(text: &str) -> Result<Self> {
        let fmt = |message: String| HarnessError::Format {
            what: "summary",
            message,
        };
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| fmt(e.to_string()))?;
        let version = raw
            .get("schema_version")
            .and_then(|v| v.as_str())
            .ok_or_else(|| fmt("missing schema_version".into()))?;
        let major = |v: &str| v.split('.').next().unwrap_or("").to_string();
        if major(version) != major(SCHEMA_VERSION) {
            return Err(fmt(format!("unsupported schema_version {version}")));
        }
        serde_json::from_value(raw).map_err(|e| fmt(e.to_string()))
    }

    /// Largest disagreement between this summary and the values recomputed
    /// from its trajectory CSV.
    pub fn discrepancy_with(&self, table: &CsvTable) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let mut cmp = |a: Option<f64>, b: Option<f64>, what: &str| -> Result<()> {
            match (a, b) {
                (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                (None, None) => {}
                _ => {
                    return Err(HarnessError::Format {
                        what: "summary",
                        message: format!("{what} defined on one side only"),
                    })
                }
            }
            Ok(())
        };
        let index = table.column(&self.index).and_then(|c| c.last().copied().flatten());
        cmp(Some(self.terminal_index), index, "terminal index")?;
        for (prefix, v) in [("x", &self.terminal_state), ("xbar", &self.terminal_mean)] {
            let from_csv = table.final_vector(prefix);
            if from_csv.len() != v.len() {
                return Err(HarnessError::Format {
                    what: "summary",
                    message: format!("{prefix} has {} columns, expected {}", from_csv.len(), v.len()),
                });
            }
            for (a, b) in v.iter().zip(&from_csv) {
                cmp(Some(*a), Some(*b), prefix)?;
            }
        }
        for name in table.header.iter().skip(1 + 2 * self.terminal_state.len()) {
            let stats = self.channel(name).ok_or_else(|| HarnessError::Format {
                what: "summary",
                message: format!("no stats for column {name}"),
            })?;
            let again = ChannelStats::from_series(name, table.column(name).unwrap());
            cmp(stats.initial, again.initial, name)?;
            cmp(stats.last, again.last, name)?;
            cmp(stats.min, again.min, name)?;
            cmp(stats.max, again.max, name)?;
            if stats.defined != again.defined {
                return Err(HarnessError::Format {
                    what: "summary",
                    message: format!("{name}: {} defined values, csv has {}", stats.defined, again.defined),
                });
            }
        }
        cmp(self.terminal_gap, table.column("gap").and_then(|c| c.last().copied().flatten()), "gap")?;
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_skip_undefined_values() {
        let s = ChannelStats::from_series("c", &[None, Some(3.0), Some(1.0), None, Some(2.0)]);
        assert_eq!(s.initial, Some(3.0));
        assert_eq!(s.last, Some(2.0));
        assert_eq!(s.min, Some(1.0));
        assert_eq!(s.max, Some(3.0));
        assert_eq!(s.max_increase, Some(1.0));
        assert_eq!(s.max_decrease, Some(2.0));
        assert_eq!(s.defined, 3);
        let empty = ChannelStats::from_series("e", &[None]);
        assert_eq!(empty.max, None);
        assert_eq!(empty.max_increase, None);
    }

    #[test]
    fn unknown_major_version_is_rejected() {
        let text = r#"{"schema_version": "2.0"}"#;
        let err = RunSummary::from_json(text).unwrap_err();
        assert!(err.to_string().contains("unsupported"));
        assert!(RunSummary::from_json(r#"{"passed": true}"#).is_err());
    }
}
