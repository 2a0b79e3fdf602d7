//! Experiment configuration and its compatibility rules.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use popdyn_core::{GameSpec, RegularizerKind, Schedule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dynamic {
    Fp,
    Rfp,
    Vrfp,
    Da,
    Brd,
    Rbrd,
    Vbrd,
    Dad,
}

impl Dynamic {
    pub const ALL: [Dynamic; 8] = [
        Dynamic::Fp,
        Dynamic::Rfp,
        Dynamic::Vrfp,
        Dynamic::Da,
        Dynamic::Brd,
        Dynamic::Rbrd,
        Dynamic::Vbrd,
        Dynamic::Dad,
    ];

    pub fn is_continuous(self) -> bool {
        matches!(self, Dynamic::Brd | Dynamic::Rbrd | Dynamic::Vbrd | Dynamic::Dad)
    }

    fn uses_regularizer(self) -> bool {
        !matches!(self, Dynamic::Fp | Dynamic::Brd)
    }

    fn uses_eps(self) -> bool {
        matches!(self, Dynamic::Rfp | Dynamic::Vrfp | Dynamic::Rbrd | Dynamic::Vbrd)
    }

    fn vanishing_eps(self) -> bool {
        matches!(self, Dynamic::Vrfp | Dynamic::Vbrd)
    }

    fn uses_eta(self) -> bool {
        matches!(self, Dynamic::Da | Dynamic::Dad)
    }
}

impl fmt::Display for Dynamic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub label: String,
    pub point: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stat {
    Initial,
    Final,
    Min,
    Max,
    /// Largest increase between consecutive recorded values.
    MaxIncrease,
    /// Largest decrease between consecutive recorded values.
    MaxDecrease,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L1,
    #[default]
    L2,
    Inf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    State,
    Mean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Quantity {
    /// A statistic of a named CSV or extra channel.
    Channel { channel: String, stat: Stat },
    /// Distance from the terminal state or mean to a target.
    Distance {
        which: Which,
        target: Vec<f64>,
        #[serde(default)]
        norm: Norm,
    },
}

/// A bound attached to a run; `run` exits nonzero when any fails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    pub name: String,
    pub quantity: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    pub dynamic: Dynamic,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularizer: Option<RegularizerKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Schedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Schedule>,
    /// Number of steps `N` (discrete dynamics).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Horizon `T` (continuous dynamics).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Drawn uniformly from the simplex using `seed` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<f64>>,
    /// Initial score for dual averaging; overrides the score derived from `initial_state`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_score: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub references: Option<Vec<Reference>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_reference: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    /// Run directory, relative to the output root unless absolute.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assertions: Vec<Assertion>,
    /// Replaces the bound of the assertion with the same name (`max` if set, else `min`).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
}

fn config_err(field: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

fn require<T>(field: &str, value: &Option<T>, dynamic: Dynamic) -> Result<()> {
    if value.is_none() {
        return Err(config_err(field, format!("required by `{dynamic}`")));
    }
    Ok(())
}

fn forbid<T>(field: &str, value: &Option<T>, dynamic: Dynamic) -> Result<()> {
    if value.is_some() {
        return Err(config_err(field, format!("not accepted by `{dynamic}`")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| config_err("<root>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks field presence against the dynamic. Numerical validity of the
    /// game, schedules and states is checked when the run is built.
    pub fn validate(&self) -> Result<()> {
        let d = self.dynamic;
        if d.uses_regularizer() {
            require("regularizer", &self.regularizer, d)?;
        } else {
            forbid("regularizer", &self.regularizer, d)?;
        }
        if d.uses_eps() {
            require("eps", &self.eps, d)?;
            let eps = self.eps.as_ref().unwrap();
            if d.vanishing_eps() {
                if !eps.is_vanishing() {
                    return Err(config_err("eps", format!("`{d}` needs a decreasing schedule that tends to zero")));
                }
            } else if !matches!(eps, Schedule::Constant { .. }) {
                return Err(config_err("eps", format!("`{d}` needs a constant weight")));
            }
        } else {
            forbid("eps", &self.eps, d)?;
        }
        if d.uses_eta() {
            require("eta", &self.eta, d)?;
        } else {
            forbid("eta", &self.eta, d)?;
            forbid("initial_score", &self.initial_score, d)?;
            forbid("references", &self.references, d)?;
            forbid("energy_reference", &self.energy_reference, d)?;
        }
        if d.is_continuous() {
            require("horizon", &self.horizon, d)?;
            require("dt", &self.dt, d)?;
            forbid("steps", &self.steps, d)?;
        } else {
            require("steps", &self.steps, d)?;
            forbid("horizon", &self.horizon, d)?;
            forbid("dt", &self.dt, d)?;
            if self.steps == Some(0) {
                return Err(config_err("steps", "must be at least 1"));
            }
        }
        if d.is_continuous() && self.references.is_some() && d != Dynamic::Dad {
            return Err(config_err("references", format!("not accepted by `{d}`")));
        }
        for (name, _) in &self.tolerances {
            if !self.assertions.iter().any(|a| &a.name == name) {
                return Err(config_err("tolerances", format!("no assertion named `{name}`")));
            }
        }
        for a in &self.assertions {
            if a.min.is_none() && a.max.is_none() {
                return Err(config_err("assertions", format!("`{}` has neither min nor max", a.name)));
            }
        }
        Ok(())
    }

    /// Assertions with tolerance overrides applied.
    pub fn effective_assertions(&self) -> Vec<Assertion> {
        self.assertions
            .iter()
            .map(|a| {
                let mut a = a.clone();
                if let Some(t) = self.tolerances.get(&a.name) {
                    if a.max.is_some() {
                        a.max = Some(*t);
                    } else {
                        a.min = Some(*t);
                    }
                }
                a
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::json!({
            "game": {"kind": "builtin", "name": "rps"},
            "dynamic": "fp",
            "steps": 100
        })
    }

    fn parse(v: serde_json::Value) -> Result<ExperimentConfig> {
        ExperimentConfig::from_json(&v.to_string())
    }

    fn field_of(e: HarnessError) -> String {
        match e {
            HarnessError::Config { field, .. } => field,
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn fp_forbids_regularizer() {
        let mut v = base();
        v["regularizer"] = "entropic".into();
        assert_eq!(field_of(parse(v).unwrap_err()), "regularizer");
    }

    #[test]
    fn vrfp_requires_vanishing_eps() {
        let mut v = base();
        v["dynamic"] = "vrfp".into();
        v["regularizer"] = "entropic".into();
        v["eps"] = serde_json::json!({"kind": "constant", "value": 0.1});
        assert_eq!(field_of(parse(v.clone()).unwrap_err()), "eps");
        v["eps"] = serde_json::json!({"kind": "power", "scale": 1.0, "exponent": 0.5, "offset": 1.0});
        parse(v).unwrap();
    }

    #[test]
    fn continuous_dynamics_need_dt() {
        let mut v = base();
        v["dynamic"] = "brd".into();
        v.as_object_mut().unwrap().remove("steps");
        v["horizon"] = 10.0.into();
        assert_eq!(field_of(parse(v).unwrap_err()), "dt");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v = base();
        v["stepz"] = 3.into();
        assert!(parse(v).is_err());
    }

    #[test]
    fn tolerance_override_replaces_bound() {
        let mut v = base();
        v["assertions"] = serde_json::json!([{
            "name": "gap", "quantity": {"kind": "channel", "channel": "gap", "stat": "final"}, "max": 1e-3
        }]);
        v["tolerances"] = serde_json::json!({"gap": 0.5});
        let cfg = parse(v).unwrap();
        assert_eq!(cfg.effective_assertions()[0].max, Some(0.5));
    }

    #[test]
    fn hash_is_stable_under_round_trip() {
        let cfg = parse(base()).unwrap();
        let again = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg.hash(), again.hash());
        assert_eq!(cfg.hash().len(), 64);
    }
}
