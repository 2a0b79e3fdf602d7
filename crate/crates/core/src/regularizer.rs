//! Regularizers on the simplex, their convex conjugates and choice maps.
//!
//! A regularizer `h` is strictly convex and continuous on the simplex. Its
//! conjugate `h*(y) = max_p ⟨y, p⟩ - h(p)` is smooth and the gradient
//! `Q(y) = ∇h*(y)` is the choice map used by regularized best responses and
//! dual averaging. The Fenchel coupling `F(p, y) = h(p) + h*(y) - ⟨p, y⟩` is
//! the energy that drives the convergence diagnostics.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{PopdynError, Result};
use crate::simplex::{dot, max_value, norm_inf, norm_l1, norm_l2, SimplexState};

/// Reference norm for the strong-convexity modulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    L2,
}

impl NormKind {
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            NormKind::L1 => norm_l1(v),
            NormKind::L2 => norm_l2(v),
        }
    }

    pub fn dual_norm(self, v: &[f64]) -> f64 {
        match self {
            NormKind::L1 => norm_inf(v),
            NormKind::L2 => norm_l2(v),
        }
    }
}

pub trait Regularizer: Send + Sync {
    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    /// `h(x)` for `x` on the simplex.
    fn value(&self, x: &[f64]) -> f64;

    /// `h*(y)`.
    fn conjugate(&self, y: &[f64]) -> f64;

    /// `Q(y) = argmax_p ⟨y, p⟩ - h(p)` written into `out`.
    fn choice_into(&self, y: &[f64], out: &mut [f64]);

    /// Continuous selection of `∂h(x)` on the prox-domain.
    fn subgradient(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Strong-convexity modulus `K` with respect to [`Regularizer::norm`].
    fn modulus(&self) -> f64;

    fn norm(&self) -> NormKind;

    fn min_value(&self) -> f64;

    fn max_value(&self) -> f64;

    /// `Ω = max h - min h`.
    fn omega(&self) -> f64 {
        self.max_value() - self.min_value()
    }

    fn fenchel(&self, p: &[f64], y: &[f64]) -> f64 {
        // Shift invariance along 𝟙 keeps the terms small.
        let m = max_value(y);
        let ys: Vec<f64> = y.iter().map(|v| v - m).collect();
        (self.value(p) + self.conjugate(&ys) - dot(p, &ys)).max(0.0)
    }
}

/// Negative Shannon entropy `h(x) = Σ x_α log x_α`. Choice map: softmax (logit).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Entropic {
    n: usize,
}

impl Entropic {
    pub fn new(n: usize) -> Self {
        Entropic { n }
    }
}

fn log_sum_exp(y: &[f64]) -> f64 {
    let m = max_value(y);
    m + y.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

impl Regularizer for Entropic {
    fn name(&self) -> &'static str {
        "entropic"
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum()
    }

    fn conjugate(&self, y: &[f64]) -> f64 {
        log_sum_exp(y)
    }

    fn choice_into(&self, y: &[f64], out: &mut [f64]) {
        let m = max_value(y);
        let mut sum = 0.0;
        for (o, v) in out.iter_mut().zip(y) {
            *o = (v - m).exp();
            sum += *o;
        }
        out.iter_mut().for_each(|o| *o /= sum);
    }

    fn subgradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        if let Some(component) = x.iter().position(|v| *v <= 0.0) {
            return Err(PopdynError::Domain {
                regularizer: "entropic",
                component,
            });
        }
        Ok(x.iter().map(|v| 1.0 + v.ln()).collect())
    }

    fn modulus(&self) -> f64 {
        1.0
    }

    fn norm(&self) -> NormKind {
        NormKind::L1
    }

    fn min_value(&self) -> f64 {
        -(self.n as f64).ln()
    }

    fn max_value(&self) -> f64 {
        0.0
    }

    /// Equals `KL(p ‖ softmax(y))`.
    fn fenchel(&self, p: &[f64], y: &[f64]) -> f64 {
        let lse = log_sum_exp(y);
        p.iter()
            .zip(y)
            .filter(|(pa, _)| **pa > 0.0)
            .map(|(pa, ya)| pa * (pa.ln() - (ya - lse)))
            .sum::<f64>()
            .max(0.0)
    }
}

/// Quadratic regularizer `h(x) = ½ Σ x_α²`. Choice map: Euclidean projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Euclidean {
    n: usize,
}

impl Euclidean {
    pub fn new(n: usize) -> Self {
        Euclidean { n }
    }
}

/// Euclidean projection of `y` onto the simplex by sort-and-threshold.
/// Returns the threshold `τ` with `out = max(y - τ, 0)`.
pub fn project_onto_simplex(y: &[f64], out: &mut [f64]) -> f64 {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    for (o, v) in out.iter_mut().zip(y) {
        *o = (v - tau).max(0.0);
    }
    tau
}

impl Regularizer for Euclidean {
    fn name(&self) -> &'static str {
        "euclidean"
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, x)
    }

    fn conjugate(&self, y: &[f64]) -> f64 {
        let mut q = vec![0.0; y.len()];
        project_onto_simplex(y, &mut q);
        dot(y, &q) - 0.5 * dot(&q, &q)
    }

    fn choice_into(&self, y: &[f64], out: &mut [f64]) {
        project_onto_simplex(y, out);
    }

    fn subgradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }

    fn modulus(&self) -> f64 {
        1.0
    }

    fn norm(&self) -> NormKind {
        NormKind::L2
    }

    fn min_value(&self) -> f64 {
        0.5 / self.n as f64
    }

    fn max_value(&self) -> f64 {
        0.5
    }

    /// `½‖p - q‖² + Σ_{α ∉ supp q} p_α (τ - y_α)` with `q = Q(y)`.
    fn fenchel(&self, p: &[f64], y: &[f64]) -> f64 {
        let mut q = vec![0.0; y.len()];
        let tau = project_onto_simplex(y, &mut q);
        let mut out = 0.0;
        for ((pa, qa), ya) in p.iter().zip(&q).zip(y) {
            out += 0.5 * (pa - qa) * (pa - qa);
            if *qa == 0.0 {
                out += pa * (tau - ya).max(0.0);
            }
        }
        out
    }
}

/// Regularizer selection as it appears in configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegularizerKind {
    Entropic,
    Euclidean,
}

impl RegularizerKind {
    pub fn build(self, n: usize) -> Arc<dyn Regularizer> {
        match self {
            RegularizerKind::Entropic => Arc::new(Entropic::new(n)),
            RegularizerKind::Euclidean => Arc::new(Euclidean::new(n)),
        }
    }
}

fn check_len(reg: &dyn Regularizer, len: usize) -> Result<()> {
    if reg.dim() != len {
        return Err(PopdynError::DimensionMismatch {
            expected: reg.dim(),
            got: len,
        });
    }
    Ok(())
}

pub fn h_value(reg: &dyn Regularizer, x: &SimplexState) -> Result<f64> {
    check_len(reg, x.dim())?;
    Ok(reg.value(x.as_slice()))
}

pub fn conjugate_value(reg: &dyn Regularizer, y: &[f64]) -> Result<f64> {
    check_len(reg, y.len())?;
    Ok(reg.conjugate(y))
}

pub fn choice(reg: &dyn Regularizer, y: &[f64]) -> Result<SimplexState> {
    check_len(reg, y.len())?;
    let mut out = vec![0.0; y.len()];
    reg.choice_into(y, &mut out);
    Ok(SimplexState::from_vec_unchecked(out))
}

pub fn subgrad_selection(reg: &dyn Regularizer, x: &SimplexState) -> Result<Vec<f64>> {
    check_len(reg, x.dim())?;
    reg.subgradient(x.as_slice())
}

pub fn fenchel_coupling(reg: &dyn Regularizer, p: &SimplexState, y: &[f64]) -> Result<f64> {
    check_len(reg, p.dim())?;
    check_len(reg, y.len())?;
    Ok(reg.fenchel(p.as_slice(), y))
}
