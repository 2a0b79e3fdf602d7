//! Population games on a finite strategy set.
//!
//! A game is a payoff field `x ↦ v(x)` on the simplex, optionally carrying a
//! potential and a Jacobian. Structural flags (potential, monotone) are
//! declared by the constructors and can be spot-checked with the sampled
//! verifiers at the bottom of this module.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PopdynError, Result};
use crate::simplex::{dot, SimplexState};

/// Declared structure of a payoff field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureFlags {
    pub is_potential: bool,
    pub is_monotone: bool,
    pub is_strictly_monotone: bool,
}

pub trait PayoffField: Send + Sync {
    fn name(&self) -> &str;

    fn n_strategies(&self) -> usize;

    /// Writes `v(x)` into `out`. Both slices have length `n_strategies()`.
    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_strategies()];
        self.eval_into(x, &mut out);
        out
    }

    fn jacobian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    fn potential(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    fn flags(&self) -> StructureFlags;

    /// An analytically known equilibrium, when the game has a distinguished one.
    fn known_equilibrium(&self) -> Option<SimplexState> {
        None
    }
}

impl fmt::Debug for dyn PayoffField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PayoffField")
            .field("name", &self.name())
            .field("n_strategies", &self.n_strategies())
            .field("flags", &self.flags())
            .finish()
    }
}

/// `v(x)` with a dimension check.
pub fn payoff_eval(game: &dyn PayoffField, x: &SimplexState) -> Result<Vec<f64>> {
    x.check_dim(game.n_strategies())?;
    Ok(game.eval(x.as_slice()))
}

/// Affine field `v(x) = A x + b`. With `b = 0` this is the payoff field of
/// random matching in the symmetric two-player game `A`.
#[derive(Clone, Debug)]
pub struct MatrixField {
    name: String,
    matrix: DMatrix<f64>,
    offset: Vec<f64>,
    flags: StructureFlags,
    equilibrium: Option<SimplexState>,
}

const SYMMETRY_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-12;

impl MatrixField {
    pub fn new(name: impl Into<String>, matrix: DMatrix<f64>, offset: Vec<f64>) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols || rows == 0 {
            return Err(PopdynError::NonSquare { rows, cols });
        }
        if offset.len() != rows {
            return Err(PopdynError::DimensionMismatch {
                expected: rows,
                got: offset.len(),
            });
        }
        if matrix.iter().chain(&offset).any(|a| !a.is_finite()) {
            return Err(PopdynError::param("matrix", "entries must be finite"));
        }
        let scale = matrix.amax().max(1.0);
        let is_potential = (0..rows)
            .all(|i| (0..i).all(|j| (matrix[(i, j)] - matrix[(j, i)]).abs() <= SYMMETRY_TOL * scale));
        let top = tangent_max_eigenvalue(&matrix);
        let flags = StructureFlags {
            is_potential,
            is_monotone: top <= EIGEN_TOL * scale,
            is_strictly_monotone: top < -EIGEN_TOL * scale,
        };
        Ok(MatrixField {
            name: name.into(),
            matrix,
            offset,
            flags,
            equilibrium: None,
        })
    }

    pub fn with_equilibrium(mut self, eq: SimplexState) -> Self {
        self.equilibrium = Some(eq);
        self
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }
}

/// Largest eigenvalue of the symmetric part of `a` restricted to the tangent
/// space `{z : Σ z = 0}` of the simplex.
fn tangent_max_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n < 2 {
        return 0.0;
    }
    // Helmert basis of the sum-zero hyperplane.
    let mut basis = DMatrix::<f64>::zeros(n, n - 1);
    for k in 1..n {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            basis[(i, k - 1)] = 1.0 / norm;
        }
        basis[(k, k - 1)] = -(k as f64) / norm;
    }
    let sym = (a + a.transpose()) * 0.5;
    let reduced = basis.transpose() * sym * &basis;
    SymmetricEigen::new(reduced)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

impl PayoffField for MatrixField {
    fn name(&self) -> &str {
        &self.name
    }

    fn n_strategies(&self) -> usize {
        self.matrix.nrows()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.matrix.nrows();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let mut acc = self.offset[i];
            for (j, xj) in x.iter().enumerate() {
                acc += self.matrix[(i, j)] * xj;
            }
            *o = acc;
        }
    }

    fn jacobian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        Some(self.matrix.clone())
    }

    fn potential(&self, x: &[f64]) -> Option<f64> {
        if !self.flags.is_potential {
            return None;
        }
        let ax = self.eval(x);
        // v(x) = Ax + b, F(x) = ½xᵀAx + bᵀx.
        Some(0.5 * (dot(&ax, x) + dot(&self.offset, x)))
    }

    fn flags(&self) -> StructureFlags {
        self.flags
    }

    fn known_equilibrium(&self) -> Option<SimplexState> {
        self.equilibrium.clone()
    }
}

/// Field generated by random matching in the symmetric game with payoff matrix `a`.
pub fn random_matching_field(a: DMatrix<f64>) -> Result<MatrixField> {
    let n = a.ncols();
    MatrixField::new("matrix", a, vec![0.0; n])
}

/// Nonatomic congestion game with affine costs `c_α(u) = a_α + s_α u`;
/// payoffs are negated costs.
#[derive(Clone, Debug)]
pub struct CongestionField {
    name: String,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
}

impl CongestionField {
    pub fn new(name: impl Into<String>, slopes: Vec<f64>, intercepts: Vec<f64>) -> Result<Self> {
        if slopes.is_empty() {
            return Err(PopdynError::param("slopes", "at least one strategy required"));
        }
        if intercepts.len() != slopes.len() {
            return Err(PopdynError::DimensionMismatch {
                expected: slopes.len(),
                got: intercepts.len(),
            });
        }
        if let Some(s) = slopes.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(PopdynError::param("slopes", format!("must be nonnegative, got {s}")));
        }
        if intercepts.iter().any(|a| !a.is_finite()) {
            return Err(PopdynError::param("intercepts", "must be finite"));
        }
        Ok(CongestionField {
            name: name.into(),
            slopes,
            intercepts,
        })
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }
}

/// Congestion field with linear costs `c_α(u) = s_α u`.
pub fn congestion_field(slopes: Vec<f64>) -> Result<CongestionField> {
    let n = slopes.len();
    CongestionField::new("congestion", slopes, vec![0.0; n])
}

impl PayoffField for CongestionField {
    fn name(&self) -> &str {
        &self.name
    }

    fn n_strategies(&self) -> usize {
        self.slopes.len()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, xa), (s, a)) in out.iter_mut().zip(x).zip(self.slopes.iter().zip(&self.intercepts)) {
            *o = -(a + s * xa);
        }
    }

    fn jacobian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        let n = self.slopes.len();
        Some(DMatrix::from_fn(n, n, |i, j| if i == j { -self.slopes[i] } else { 0.0 }))
    }

    fn potential(&self, x: &[f64]) -> Option<f64> {
        Some(
            -x.iter()
                .zip(self.slopes.iter().zip(&self.intercepts))
                .map(|(xa, (s, a))| a * xa + 0.5 * s * xa * xa)
                .sum::<f64>(),
        )
    }

    fn flags(&self) -> StructureFlags {
        StructureFlags {
            is_potential: true,
            is_monotone: true,
            is_strictly_monotone: self.slopes.iter().all(|s| *s > 0.0),
        }
    }

    /// Water-filling: equalize costs on the support, `x_α = max(0, (λ - a_α)/s_α)`.
    /// Only unique, and only returned, when every slope is positive.
    fn known_equilibrium(&self) -> Option<SimplexState> {
        if self.slopes.iter().any(|s| *s == 0.0) {
            return None;
        }
        let mass = |lambda: f64| -> f64 {
            self.slopes
                .iter()
                .zip(&self.intercepts)
                .map(|(s, a)| ((lambda - a) / s).max(0.0))
                .sum()
        };
        let mut lo = self.intercepts.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = lo + 1.0;
        while mass(hi) < 1.0 {
            hi = lo + 2.0 * (hi - lo);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mass(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lambda = 0.5 * (lo + hi);
        let w: Vec<f64> = self
            .slopes
            .iter()
            .zip(&self.intercepts)
            .map(|(s, a)| ((lambda - a) / s).max(0.0))
            .collect();
        let sum: f64 = w.iter().sum();
        Some(SimplexState::from_vec_unchecked(w.into_iter().map(|x| x / sum).collect()))
    }
}

type EvalFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type PotentialFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type JacobianFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// User-supplied payoff field built from closures.
pub struct FnField {
    name: String,
    n: usize,
    eval: Box<EvalFn>,
    potential: Option<Box<PotentialFn>>,
    jacobian: Option<Box<JacobianFn>>,
    flags: StructureFlags,
    equilibrium: Option<SimplexState>,
}

impl FnField {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        eval: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        FnField {
            name: name.into(),
            n,
            eval: Box::new(eval),
            potential: None,
            jacobian: None,
            flags: StructureFlags::default(),
            equilibrium: None,
        }
    }

    pub fn with_potential(mut self, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.potential = Some(Box::new(f));
        self.flags.is_potential = true;
        self
    }

    pub fn with_jacobian(
        mut self,
        f: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Box::new(f));
        self
    }

    pub fn with_flags(mut self, flags: StructureFlags) -> Self {
        self.flags = flags;
        self
    }

    pub fn with_equilibrium(mut self, eq: SimplexState) -> Self {
        self.equilibrium = Some(eq);
        self
    }
}

impl PayoffField for FnField {
    fn name(&self) -> &str {
        &self.name
    }

    fn n_strategies(&self) -> usize {
        self.n
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.eval)(x, out)
    }

    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.jacobian.as_ref().map(|j| j(x))
    }

    fn potential(&self, x: &[f64]) -> Option<f64> {
        self.potential.as_ref().map(|f| f(x))
    }

    fn flags(&self) -> StructureFlags {
        self.flags
    }

    fn known_equilibrium(&self) -> Option<SimplexState> {
        self.equilibrium.clone()
    }
}

/// Built-in game names accepted by [`GameSpec::Builtin`].
pub const BUILTIN_GAMES: &[&str] = &[
    "rps",
    "coordination",
    "coordination3",
    "neg_identity",
    "gess",
    "congestion_1_2",
    "congestion_1_1_1",
];

/// Serializable description of a game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GameSpec {
    Matrix {
        matrix: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    Congestion {
        slopes: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        intercepts: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    Builtin {
        name: String,
    },
}

impl GameSpec {
    pub fn builtin(name: &str) -> Self {
        GameSpec::Builtin { name: name.into() }
    }

    /// Expands a built-in name into its concrete matrix or congestion form.
    pub fn resolve(&self) -> Result<GameSpec> {
        let GameSpec::Builtin { name } = self else {
            return Ok(self.clone());
        };
        let named = |matrix: Vec<Vec<f64>>, offset: Option<Vec<f64>>| GameSpec::Matrix {
            matrix,
            offset,
            name: Some(name.clone()),
        };
        let spec = match name.as_str() {
            "rps" => named(
                vec![vec![0.0, -1.0, 1.0], vec![1.0, 0.0, -1.0], vec![-1.0, 1.0, 0.0]],
                None,
            ),
            "coordination" => named(vec![vec![1.0, 0.0], vec![0.0, 1.0]], None),
            "coordination3" => named(
                vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
                None,
            ),
            "neg_identity" => named(
                vec![vec![-1.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, -1.0]],
                None,
            ),
            "gess" => named(
                vec![vec![-1.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, -1.0]],
                Some(vec![1.0, 1.0, 1.0]),
            ),
            "congestion_1_2" => GameSpec::Congestion {
                slopes: vec![1.0, 2.0],
                intercepts: None,
                name: Some(name.clone()),
            },
            "congestion_1_1_1" => GameSpec::Congestion {
                slopes: vec![1.0, 1.0, 1.0],
                intercepts: None,
                name: Some(name.clone()),
            },
            other => {
                return Err(PopdynError::param(
                    "name",
                    format!("unknown built-in game `{other}`"),
                ))
            }
        };
        Ok(spec)
    }

    pub fn build(&self) -> Result<Arc<dyn PayoffField>> {
        match self.resolve()? {
            GameSpec::Matrix {
                matrix,
                offset,
                name,
            } => {
                let n = matrix.len();
                if let Some(row) = matrix.iter().find(|r| r.len() != n) {
                    return Err(PopdynError::NonSquare {
                        rows: n,
                        cols: row.len(),
                    });
                }
                let a = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
                let b = offset.unwrap_or_else(|| vec![0.0; n]);
                let mut field = MatrixField::new(name.as_deref().unwrap_or("matrix"), a, b)?;
                if let Some(eq) = builtin_equilibrium(name.as_deref(), n) {
                    field = field.with_equilibrium(eq);
                }
                Ok(Arc::new(field))
            }
            GameSpec::Congestion {
                slopes,
                intercepts,
                name,
            } => {
                let n = slopes.len();
                let field = CongestionField::new(
                    name.as_deref().unwrap_or("congestion"),
                    slopes,
                    intercepts.unwrap_or_else(|| vec![0.0; n]),
                )?;
                Ok(Arc::new(field))
            }
            GameSpec::Builtin { .. } => unreachable!("resolved above"),
        }
    }
}

fn builtin_equilibrium(name: Option<&str>, n: usize) -> Option<SimplexState> {
    match name? {
        "rps" | "neg_identity" | "gess" => Some(SimplexState::uniform(n)),
        _ => None,
    }
}

/// Result of the sampled monotonicity check.
#[derive(Clone, Debug, Serialize)]
pub struct MonotoneReport {
    /// `max ⟨v(x') - v(x), x' - x⟩` over the sampled pairs.
    pub max_violation: f64,
    pub witness: (SimplexState, SimplexState),
    pub consistent: bool,
}

pub const MONOTONE_TOL: f64 = 1e-9;

pub fn check_monotone_sampled(game: &dyn PayoffField, n_pairs: usize, rng_seed: u64) -> MonotoneReport {
    let n = game.n_strategies();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut best = f64::NEG_INFINITY;
    let mut witness = (SimplexState::uniform(n), SimplexState::uniform(n));
    for _ in 0..n_pairs.max(1) {
        let x = SimplexState::sample_uniform(n, &mut rng);
        let y = SimplexState::sample_uniform(n, &mut rng);
        let vx = game.eval(x.as_slice());
        let vy = game.eval(y.as_slice());
        let val: f64 = (0..n)
            .map(|i| (vy[i] - vx[i]) * (y.as_slice()[i] - x.as_slice()[i]))
            .sum();
        if val > best {
            best = val;
            witness = (x, y);
        }
    }
    MonotoneReport {
        max_violation: best,
        witness,
        consistent: best <= MONOTONE_TOL,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PotentialReport {
    pub max_residual: f64,
    /// Largest sampled second directional derivative of the potential.
    pub curvature: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Checks `F'(x; x'-x) = ⟨v(x), x'-x⟩` by forward differences at sampled pairs.
pub fn check_potential_sampled(
    game: &dyn PayoffField,
    n_points: usize,
    fd_step: f64,
    rng_seed: u64,
) -> Result<PotentialReport> {
    if !(fd_step > 0.0 && fd_step <= 1e-2) {
        return Err(PopdynError::param("fd_step", "must lie in (0, 1e-2]"));
    }
    let n = game.n_strategies();
    let probe = SimplexState::uniform(n);
    if game.potential(probe.as_slice()).is_none() {
        return Err(PopdynError::MissingPotential(game.name().to_string()));
    }
    let pot = |x: &[f64]| game.potential(x).expect("potential present");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut max_residual: f64 = 0.0;
    let mut curvature: f64 = 0.0;
    for _ in 0..n_points.max(1) {
        let x = SimplexState::sample_uniform(n, &mut rng);
        let y = SimplexState::sample_uniform(n, &mut rng);
        let d: Vec<f64> = y.as_slice().iter().zip(x.as_slice()).map(|(a, b)| a - b).collect();
        let at = |s: f64| -> Vec<f64> { x.as_slice().iter().zip(&d).map(|(a, b)| a + s * b).collect() };
        let f0 = pot(x.as_slice());
        let f1 = pot(&at(fd_step));
        let f2 = pot(&at(2.0 * fd_step));
        let slope = (f1 - f0) / fd_step;
        let exact = dot(&game.eval(x.as_slice()), &d);
        max_residual = max_residual.max((slope - exact).abs());
        curvature = curvature.max(((f2 - 2.0 * f1 + f0) / (fd_step * fd_step)).abs());
    }
    let threshold = 10.0 * fd_step * curvature + 1e-9;
    Ok(PotentialReport {
        max_residual,
        curvature,
        threshold,
        passed: max_residual <= threshold,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct JacobianReport {
    pub max_rel_error: f64,
}

/// Compares the Jacobian capability against central differences of `v`.
pub fn check_jacobian_sampled(
    game: &dyn PayoffField,
    n_points: usize,
    fd_step: f64,
    rng_seed: u64,
) -> Result<JacobianReport> {
    let n = game.n_strategies();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_points.max(1) {
        let x = SimplexState::sample_uniform(n, &mut rng);
        let jac = game
            .jacobian(x.as_slice())
            .ok_or_else(|| PopdynError::MissingJacobian(game.name().to_string()))?;
        let scale = jac.amax().max(1.0);
        for j in 0..n {
            let mut xp = x.as_slice().to_vec();
            let mut xm = x.as_slice().to_vec();
            xp[j] += fd_step;
            xm[j] -= fd_step;
            let vp = game.eval(&xp);
            let vm = game.eval(&xm);
            for i in 0..n {
                let fd = (vp[i] - vm[i]) / (2.0 * fd_step);
                worst = worst.max((fd - jac[(i, j)]).abs() / scale);
            }
        }
    }
    Ok(JacobianReport { max_rel_error: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rps() -> Arc<dyn PayoffField> {
        GameSpec::builtin("rps").build().unwrap()
    }

    #[test]
    fn rps_payoffs() {
        let g = rps();
        let v = payoff_eval(g.as_ref(), &SimplexState::uniform(3)).unwrap();
        assert!(v.iter().all(|x| x.abs() < 1e-15));
        let v = payoff_eval(g.as_ref(), &SimplexState::vertex(3, 0)).unwrap();
        assert_eq!(v, vec![0.0, 1.0, -1.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let g = rps();
        let err = payoff_eval(g.as_ref(), &SimplexState::uniform(2)).unwrap_err();
        assert!(matches!(err, PopdynError::DimensionMismatch { expected: 3, got: 2 }));
    }

    #[test]
    fn congestion_payoffs_at_equilibrium() {
        let g = congestion_field(vec![1.0, 2.0]).unwrap();
        let x = SimplexState::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let v = payoff_eval(&g, &x).unwrap();
        assert_abs_diff_eq!(v[0], -2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], -2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn congestion_equilibria() {
        let eq = congestion_field(vec![1.0, 2.0]).unwrap().known_equilibrium().unwrap();
        assert_abs_diff_eq!(eq.as_slice()[0], 2.0 / 3.0, epsilon = 1e-12);
        let eq = congestion_field(vec![1.0, 1.0]).unwrap().known_equilibrium().unwrap();
        assert_abs_diff_eq!(eq.as_slice()[0], 0.5, epsilon = 1e-12);
        // Large intercept pushes a strategy out of the support.
        let g = CongestionField::new("c", vec![1.0, 1.0], vec![0.0, 5.0]).unwrap();
        assert_eq!(g.known_equilibrium().unwrap().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn congestion_potential_at_uniform() {
        let g = congestion_field(vec![1.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(g.potential(&[1.0 / 3.0; 3]).unwrap(), -1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn congestion_rejects_negative_slopes() {
        assert!(congestion_field(vec![-1.0, 2.0]).is_err());
        let flat = congestion_field(vec![1.0, 0.0]).unwrap();
        assert!(!flat.flags().is_strictly_monotone);
        assert!(flat.known_equilibrium().is_none());
    }

    #[test]
    fn matrix_flags() {
        let neg = random_matching_field(-DMatrix::<f64>::identity(3, 3)).unwrap();
        assert_eq!(
            neg.flags(),
            StructureFlags {
                is_potential: true,
                is_monotone: true,
                is_strictly_monotone: true
            }
        );
        assert_abs_diff_eq!(
            neg.potential(&[0.2, 0.3, 0.5]).unwrap(),
            -0.5 * (0.04 + 0.09 + 0.25),
            epsilon = 1e-15
        );
        let f = rps().flags();
        assert!(!f.is_potential && f.is_monotone && !f.is_strictly_monotone);
        let coord = random_matching_field(DMatrix::identity(2, 2)).unwrap();
        let f = coord.flags();
        assert!(f.is_potential && !f.is_monotone);
        assert_abs_diff_eq!(coord.potential(&[0.3, 0.7]).unwrap(), 0.5 * (0.09 + 0.49), epsilon = 1e-15);
    }

    #[test]
    fn non_square_matrix_rejected() {
        let spec = GameSpec::Matrix {
            matrix: vec![vec![1.0, 2.0], vec![3.0]],
            offset: None,
            name: None,
        };
        assert!(matches!(spec.build(), Err(PopdynError::NonSquare { .. })));
        assert!(random_matching_field(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn monotone_sampler() {
        let r = check_monotone_sampled(rps().as_ref(), 500, 1);
        assert!(r.max_violation.abs() <= 1e-12 && r.consistent);

        let coord = GameSpec::builtin("coordination").build().unwrap();
        let r = check_monotone_sampled(coord.as_ref(), 500, 1);
        assert!(r.max_violation > 0.0 && !r.consistent);
        // x=(1,0), x'=(0,1): ⟨x'-x, x'-x⟩ = 2 is the supremum.
        assert!(r.max_violation <= 2.0);

        let neg = random_matching_field(-DMatrix::<f64>::identity(3, 3)).unwrap();
        let r = check_monotone_sampled(&neg, 500, 1);
        let (x, y) = &r.witness;
        assert_abs_diff_eq!(r.max_violation, -x.dist_l2(y).powi(2), epsilon = 1e-14);
        assert!(r.max_violation <= 0.0);
    }

    #[test]
    fn potential_sampler() {
        let g = congestion_field(vec![1.0, 2.0]).unwrap();
        let r = check_potential_sampled(&g, 200, 1e-4, 5).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.max_residual < 1e-3);

        let neg = random_matching_field(-DMatrix::<f64>::identity(3, 3)).unwrap();
        assert!(check_potential_sampled(&neg, 200, 1e-4, 5).unwrap().passed);

        let err = check_potential_sampled(rps().as_ref(), 10, 1e-4, 5).unwrap_err();
        assert!(err.to_string().contains("missing potential capability"));
        assert!(check_potential_sampled(&g, 10, 0.1, 5).is_err());
    }

    #[test]
    fn wrong_potential_is_caught() {
        let bad = FnField::new("bad", 2, |x, out| {
            out[0] = -x[0];
            out[1] = -2.0 * x[1];
        })
        .with_potential(|x| -x[0] * x[0] - x[1] * x[1]);
        assert!(!check_potential_sampled(&bad, 200, 1e-4, 5).unwrap().passed);
    }

    #[test]
    fn jacobian_matches_differences() {
        for name in BUILTIN_GAMES {
            let g = GameSpec::builtin(name).build().unwrap();
            let r = check_jacobian_sampled(g.as_ref(), 50, 1e-5, 2).unwrap();
            assert!(r.max_rel_error <= 1e-6, "{name}: {r:?}");
        }
    }

    #[test]
    fn game_spec_json() {
        let spec: GameSpec = serde_json::from_str(r#"{"kind":"congestion","slopes":[1,2]}"#).unwrap();
        let g = spec.build().unwrap();
        assert_eq!(g.n_strategies(), 2);
        let spec: GameSpec = serde_json::from_str(r#"{"kind":"builtin","name":"rps"}"#).unwrap();
        assert_eq!(spec.build().unwrap().name(), "rps");
        let spec: GameSpec =
            serde_json::from_str(r#"{"kind":"matrix","matrix":[[0,1],[1,0]]}"#).unwrap();
        assert!(spec.build().unwrap().flags().is_potential);
        assert!(GameSpec::builtin("nope").build().is_err());
    }
}
