use serde::{Deserialize, Serialize};

use crate::error::{PopdynError, Result};

/// Time-indexed positive weight: a regularization weight `ε` or a learning
/// rate `η`. Continuous dynamics evaluate it at `t ≥ 0`; discrete processes at
/// `n = 1, 2, ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant {
        value: f64,
    },
    /// `scale / (t + offset)^exponent`.
    Power {
        scale: f64,
        exponent: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Step interpolation: `values[i]` on `[breakpoints[i], breakpoints[i+1])`.
    Table {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Schedule::Constant { value }
    }

    pub fn power(scale: f64, exponent: f64, offset: f64) -> Self {
        Schedule::Power {
            scale,
            exponent,
            offset,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            Schedule::Constant { value } => *value,
            Schedule::Power {
                scale,
                exponent,
                offset,
            } => scale / (t + offset).powf(*exponent),
            Schedule::Table {
                breakpoints,
                values,
            } => {
                let idx = breakpoints.partition_point(|b| *b <= t);
                values[idx.saturating_sub(1)]
            }
        }
    }

    /// Discrete index `n ≥ 1`.
    pub fn at_step(&self, n: usize) -> f64 {
        self.at(n as f64)
    }

    fn validate_shape(&self) -> Result<()> {
        match self {
            Schedule::Constant { value } => {
                if !(value.is_finite() && *value > 0.0) {
                    return Err(PopdynError::param("schedule", format!("constant must be positive, got {value}")));
                }
            }
            Schedule::Power {
                scale,
                exponent,
                offset,
            } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(PopdynError::param("schedule", "power scale must be positive"));
                }
                if !exponent.is_finite() || !offset.is_finite() || *offset < 0.0 {
                    return Err(PopdynError::param("schedule", "power exponent/offset must be finite, offset ≥ 0"));
                }
            }
            Schedule::Table {
                breakpoints,
                values,
            } => {
                if breakpoints.is_empty() || breakpoints.len() != values.len() {
                    return Err(PopdynError::param("schedule", "table needs matching non-empty breakpoints and values"));
                }
                if breakpoints[0] != 0.0 {
                    return Err(PopdynError::param("schedule", "table must start at breakpoint 0"));
                }
                if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(PopdynError::param("schedule", "table breakpoints must increase"));
                }
                if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(PopdynError::param("schedule", "table values must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Positive on `[0, ∞)`.
    pub fn validate_continuous(&self) -> Result<()> {
        self.validate_shape()?;
        if let Schedule::Power {
            exponent, offset, ..
        } = self
        {
            if *exponent > 0.0 && *offset <= 0.0 {
                return Err(PopdynError::param("schedule", "power schedule with positive exponent needs offset > 0 in continuous time"));
            }
        }
        Ok(())
    }

    /// Positive for `n ≥ 1`.
    pub fn validate_discrete(&self) -> Result<()> {
        self.validate_shape()
    }

    pub fn is_non_increasing(&self) -> bool {
        match self {
            Schedule::Constant { .. } => true,
            Schedule::Power { exponent, .. } => *exponent >= 0.0,
            Schedule::Table { values, .. } => values.windows(2).all(|w| w[1] <= w[0]),
        }
    }

    /// Strictly decreasing to zero. Only power schedules with positive exponent qualify.
    pub fn is_vanishing(&self) -> bool {
        matches!(self, Schedule::Power { exponent, .. } if *exponent > 0.0)
    }

    /// Checks used for learning rates.
    pub fn validate_learning_rate(&self, continuous: bool) -> Result<()> {
        if continuous {
            self.validate_continuous()?;
        } else {
            self.validate_discrete()?;
        }
        if !self.is_non_increasing() {
            return Err(PopdynError::param("eta", "learning rate must be non-increasing"));
        }
        Ok(())
    }

    /// Checks used for vanishing regularization weights.
    pub fn validate_vanishing(&self, continuous: bool) -> Result<()> {
        if continuous {
            self.validate_continuous()?;
        } else {
            self.validate_discrete()?;
        }
        if !self.is_vanishing() {
            return Err(PopdynError::param("eps", "schedule must be strictly decreasing to zero (power kind with exponent > 0)"));
        }
        Ok(())
    }
}

/// Learning-rate diagnostics at horizon `n`.
#[derive(Clone, Debug, Serialize)]
pub struct LearningRateDiagnostics {
    pub eta_n: f64,
    /// `r_n = 1/η_n - 1/η_{n-1}` with `η_0 := η_1`.
    pub r_n: f64,
    /// `1 / (n η_n)`, which must vanish for the Stolz–Cesàro argument.
    pub inverse_cumulative: f64,
    /// `(1/n) Σ_{k ≤ n} η_k`.
    pub cesaro_mean: f64,
}

pub fn learning_rate_diagnostics(eta: &Schedule, n: usize) -> LearningRateDiagnostics {
    let n = n.max(1);
    let eta_n = eta.at_step(n);
    let eta_prev = eta.at_step((n - 1).max(1));
    let cesaro_mean = (1..=n).map(|k| eta.at_step(k)).sum::<f64>() / n as f64;
    LearningRateDiagnostics {
        eta_n,
        r_n: 1.0 / eta_n - 1.0 / eta_prev,
        inverse_cumulative: 1.0 / (n as f64 * eta_n),
        cesaro_mean,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation() {
        assert_eq!(Schedule::constant(2.0).at(10.0), 2.0);
        let p = Schedule::power(1.0, 1.0, 1.0);
        assert_eq!(p.at(0.0), 1.0);
        assert_eq!(p.at(3.0), 0.25);
        let t = Schedule::Table {
            breakpoints: vec![0.0, 1.0, 5.0],
            values: vec![1.0, 0.5, 0.1],
        };
        assert_eq!(t.at(0.0), 1.0);
        assert_eq!(t.at(0.99), 1.0);
        assert_eq!(t.at(1.0), 0.5);
        assert_eq!(t.at(100.0), 0.1);
        assert!(t.is_non_increasing());
    }

    #[test]
    fn validation() {
        assert!(Schedule::constant(0.0).validate_continuous().is_err());
        assert!(Schedule::power(1.0, 0.5, 0.0).validate_continuous().is_err());
        assert!(Schedule::power(1.0, 0.5, 0.0).validate_discrete().is_ok());
        assert!(Schedule::power(1.0, -0.5, 1.0).validate_learning_rate(true).is_err());
        assert!(Schedule::constant(1.0).validate_vanishing(true).is_err());
        assert!(Schedule::power(1.0, 1.0, 1.0).validate_vanishing(true).is_ok());
        let increasing = Schedule::Table {
            breakpoints: vec![0.0, 1.0],
            values: vec![0.1, 1.0],
        };
        assert!(increasing.validate_learning_rate(false).is_err());
        assert!(increasing.validate_vanishing(false).is_err());
    }

    #[test]
    fn learn_diagnostics_power_law() {
        for p in [0.25, 0.5, 0.75] {
            let eta = Schedule::power(1.0, p, 0.0);
            let d = learning_rate_diagnostics(&eta, 100_000);
            let n = 100_000f64;
            assert!(d.r_n > 0.0 && d.r_n <= 2.0 * p * n.powf(p - 1.0));
            assert!((d.inverse_cumulative - n.powf(p - 1.0)).abs() < 1e-12);
            assert!(d.cesaro_mean < 1.0 / (1.0 - p) * n.powf(-p) + 1e-9);
        }
        let d = learning_rate_diagnostics(&Schedule::constant(0.3), 10);
        assert_eq!(d.r_n, 0.0);
    }
}
