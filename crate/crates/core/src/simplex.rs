//! Points of the strategy simplex and the small amount of vector algebra the
//! rest of the crate needs.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{PopdynError, Result};

/// Components in `[-CLAMP_TOL, 0)` are treated as roundoff and clamped to zero.
pub const CLAMP_TOL: f64 = 1e-12;
/// Allowed deviation of the component sum from one.
pub const SUM_TOL: f64 = 1e-10;

/// A population state: a vector of strategy frequencies on the simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexState(Vec<f64>);

impl SimplexState {
    /// Validates `weights`, clamping roundoff negatives and renormalizing.
    pub fn new(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(PopdynError::InvalidState("empty weight vector".into()));
        }
        for (i, w) in weights.iter_mut().enumerate() {
            if !w.is_finite() {
                return Err(PopdynError::InvalidState(format!("component {i} is not finite")));
            }
            if *w < 0.0 {
                if *w < -CLAMP_TOL {
                    return Err(PopdynError::InvalidState(format!(
                        "component {i} is negative ({w:e})"
                    )));
                }
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(PopdynError::InvalidState(format!(
                "components sum to {sum}, not 1"
            )));
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(SimplexState(weights))
    }

    /// Clamp-and-renormalize for integrator output. Returns the state and the
    /// L1 size of the correction that was applied.
    pub fn project_drift(mut weights: Vec<f64>) -> Result<(Self, f64)> {
        let mut correction = 0.0;
        for (i, w) in weights.iter_mut().enumerate() {
            if !w.is_finite() {
                return Err(PopdynError::InvalidState(format!("component {i} is not finite")));
            }
            if *w < 0.0 {
                correction += -*w;
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(PopdynError::InvalidState("all components vanished".into()));
        }
        correction += (sum - 1.0).abs();
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok((SimplexState(weights), correction))
    }

    /// Wraps a vector the caller already knows lies on the simplex.
    pub(crate) fn from_vec_unchecked(weights: Vec<f64>) -> Self {
        debug_assert!(weights.iter().all(|w| *w >= 0.0));
        SimplexState(weights)
    }

    pub fn uniform(n: usize) -> Self {
        SimplexState(vec![1.0 / n as f64; n])
    }

    pub fn vertex(n: usize, index: usize) -> Self {
        let mut w = vec![0.0; n];
        w[index] = 1.0;
        SimplexState(w)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|w| *w > 0.0)
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(PopdynError::DimensionMismatch {
                expected,
                got: self.dim(),
            });
        }
        Ok(())
    }

    pub fn dist_l2(&self, other: &SimplexState) -> f64 {
        dist_l2(&self.0, &other.0)
    }

    pub fn dist_inf(&self, other: &SimplexState) -> f64 {
        dist_inf(&self.0, &other.0)
    }

    /// Uniform draw from the simplex (normalized exponential spacings).
    pub fn sample_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
        let sum: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= sum);
        SimplexState(w)
    }

    /// Uniform draw from the part of the Euclidean ball of `radius` around
    /// `center` that lies in the simplex, excluding `center` itself. Rejection
    /// sampling in the tangent hyperplane; returns `None` when `max_tries`
    /// proposals all fall outside the simplex.
    pub fn sample_in_ball<R: Rng + ?Sized>(
        center: &SimplexState,
        radius: f64,
        rng: &mut R,
        max_tries: usize,
    ) -> Option<Self> {
        let n = center.dim();
        if n < 2 {
            return None;
        }
        let d = (n - 1) as f64;
        for _ in 0..max_tries {
            let mut dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            let mean = dir.iter().sum::<f64>() / n as f64;
            dir.iter_mut().for_each(|x| *x -= mean);
            let norm = norm_l2(&dir);
            if norm == 0.0 {
                continue;
            }
            let u: f64 = rng.random();
            let r = radius * u.powf(1.0 / d);
            if r == 0.0 {
                continue;
            }
            let cand: Vec<f64> = center
                .0
                .iter()
                .zip(&dir)
                .map(|(c, g)| c + r * g / norm)
                .collect();
            if cand.iter().all(|x| *x >= 0.0) {
                let sum: f64 = cand.iter().sum();
                return Some(SimplexState(cand.into_iter().map(|x| x / sum).collect()));
            }
        }
        None
    }
}

impl TryFrom<Vec<f64>> for SimplexState {
    type Error = PopdynError;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        SimplexState::new(value)
    }
}

impl From<SimplexState> for Vec<f64> {
    fn from(value: SimplexState) -> Self {
        value.0
    }
}

impl AsRef<[f64]> for SimplexState {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_l1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn norm_l2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dist_l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn max_value(a: &[f64]) -> f64 {
    a.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
