//! One-axis parameter sweeps over a base config.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::run::{output_root, run_dir, run_experiment_in};
use crate::summary::RunSummary;

pub const SWEEP_FILE: &str = "sweep.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub value: f64,
    pub directory: String,
    pub summary: RunSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub axis: String,
    pub runs: Vec<SweepEntry>,
}

fn axis_err(axis: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        field: axis.to_string(),
        message: message.into(),
    }
}

/// Replaces the numeric leaf at dotted path `axis` (array indices allowed).
pub fn set_axis(cfg: &ExperimentConfig, axis: &str, value: f64) -> Result<ExperimentConfig> {
    let mut root = serde_json::to_value(cfg).expect("config serializes");
    let mut node = &mut root;
    for seg in axis.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(seg),
            Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| axis_err(axis, format!("no such path segment `{seg}`")))?;
    }
    if !node.is_number() {
        return Err(axis_err(axis, "does not address a numeric leaf"));
    }
    *node = if value.fract() == 0.0 && node.is_u64() && value >= 0.0 {
        Value::from(value as u64)
    } else {
        serde_json::Number::from_f64(value)
            .map(Value::Number)
            .ok_or_else(|| axis_err(axis, "value must be finite"))?
    };
    let out: ExperimentConfig =
        serde_json::from_value(root).map_err(|e| axis_err(axis, e.to_string()))?;
    out.validate()?;
    Ok(out)
}

fn label(axis: &str, value: f64) -> String {
    format!("{axis}={value}")
}

/// Runs every value concurrently. Each run lands in `<base dir>/<axis>=<value>`
/// and `sweep.json` in the base directory collects the summaries. An empty
/// value list does nothing.
pub fn run_sweep_in(base: &ExperimentConfig, axis: &str, values: &[f64], root: &Path) -> Result<SweepSummary> {
    if values.is_empty() {
        return Ok(SweepSummary {
            axis: axis.to_string(),
            runs: Vec::new(),
        });
    }
    let base_dir = run_dir(base, root);
    let configs = values
        .iter()
        .map(|v| {
            let mut cfg = set_axis(base, axis, *v)?;
            cfg.output = Some(base_dir.join(label(axis, *v)).to_string_lossy().into_owned());
            Ok((*v, cfg))
        })
        .collect::<Result<Vec<_>>>()?;
    let runs = configs
        .par_iter()
        .map(|(v, cfg)| {
            let summary = run_experiment_in(cfg, root)?;
            Ok(SweepEntry {
                value: *v,
                directory: label(axis, *v),
                summary,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sweep = SweepSummary {
        axis: axis.to_string(),
        runs,
    };
    let path = base_dir.join(SWEEP_FILE);
    let body = serde_json::to_string_pretty(&sweep).expect("sweep serializes");
    fs::write(&path, body + "\n").map_err(|e| HarnessError::io(format!("writing {}", path.display()), e))?;
    Ok(sweep)
}

pub fn run_sweep(base: &ExperimentConfig, axis: &str, values: &[f64]) -> Result<SweepSummary> {
    run_sweep_in(base, axis, values, &output_root())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{"game": {"kind": "builtin", "name": "rps"}, "dynamic": "rfp",
                "regularizer": "entropic", "eps": {"kind": "constant", "value": 1.0},
                "steps": 10, "initial_state": [0.5, 0.3, 0.2]}"#,
        )
        .unwrap()
    }

    #[test]
    fn sets_nested_and_indexed_leaves() {
        let c = set_axis(&cfg(), "eps.value", 0.25).unwrap();
        assert_eq!(c.eps, Some(popdyn_core::Schedule::constant(0.25)));
        let c = set_axis(&cfg(), "steps", 20.0).unwrap();
        assert_eq!(c.steps, Some(20));
        let c = set_axis(&cfg(), "initial_state.1", 0.4).unwrap();
        assert_eq!(c.initial_state, Some(vec![0.5, 0.4, 0.2]));
    }

    #[test]
    fn bad_paths_are_config_errors() {
        for axis in ["eps.nope", "game.name", "dynamic", "initial_state.7", ""] {
            let e = set_axis(&cfg(), axis, 1.0).unwrap_err();
            assert!(e.is_config(), "{axis}");
        }
    }
}
