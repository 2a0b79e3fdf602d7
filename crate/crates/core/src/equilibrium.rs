//! Solution concepts and their numerical certificates.

use std::collections::{HashMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PopdynError, Result};
use crate::game::PayoffField;
use crate::regularizer::Regularizer;
use crate::simplex::{dist_inf, dot, max_value, SimplexState};

/// Payoffs within this distance of the maximum count as best responses.
pub const BR_TOL: f64 = 1e-12;
/// Mass outside the best-response support below which a state is a rest point.
pub const STATIONARY_TOL: f64 = 1e-9;
/// Default tolerance on the gap for declaring an equilibrium.
pub const EQ_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestResponseResult {
    pub argmax_indices: Vec<usize>,
    /// Vertex of the lowest argmax index.
    pub selected_vertex: SimplexState,
    pub max_value: f64,
}

pub(crate) fn argmax_set(v: &[f64]) -> (Vec<usize>, f64) {
    let m = max_value(v);
    let set = v
        .iter()
        .enumerate()
        .filter(|(_, a)| **a >= m - BR_TOL)
        .map(|(i, _)| i)
        .collect();
    (set, m)
}

/// `x ∈ conv{e_α : α ∈ support}` up to [`STATIONARY_TOL`].
pub(crate) fn supported_on(x: &[f64], support: &[usize]) -> bool {
    let outside: f64 = x
        .iter()
        .enumerate()
        .filter(|(i, _)| !support.contains(i))
        .map(|(_, w)| *w)
        .sum();
    outside <= STATIONARY_TOL
}

pub fn best_response(game: &dyn PayoffField, x: &SimplexState) -> Result<BestResponseResult> {
    x.check_dim(game.n_strategies())?;
    let v = game.eval(x.as_slice());
    let (argmax_indices, max_value) = argmax_set(&v);
    Ok(BestResponseResult {
        selected_vertex: SimplexState::vertex(v.len(), argmax_indices[0]),
        argmax_indices,
        max_value,
    })
}

/// Whether `x` is a rest point of the best-response dynamics, i.e. lies in the
/// convex hull of its own best responses.
pub fn is_br_stationary(game: &dyn PayoffField, x: &SimplexState) -> bool {
    let v = game.eval(x.as_slice());
    supported_on(x.as_slice(), &argmax_set(&v).0)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(PopdynError::param("eps", format!("must be positive, got {eps}")));
    }
    Ok(())
}

pub(crate) fn rbr_from_payoff(reg: &dyn Regularizer, v: &[f64], eps: f64) -> Vec<f64> {
    let scaled: Vec<f64> = v.iter().map(|a| a / eps).collect();
    let mut out = vec![0.0; v.len()];
    reg.choice_into(&scaled, &mut out);
    out
}

/// `Q_h(v(x)/ε)`.
pub fn regularized_best_response(
    game: &dyn PayoffField,
    reg: &dyn Regularizer,
    eps: f64,
    x: &SimplexState,
) -> Result<SimplexState> {
    check_eps(eps)?;
    x.check_dim(game.n_strategies())?;
    x.check_dim(reg.dim())?;
    let v = game.eval(x.as_slice());
    Ok(SimplexState::from_vec_unchecked(rbr_from_payoff(reg, &v, eps)))
}

pub(crate) fn gap_from_payoff(v: &[f64], x: &[f64]) -> f64 {
    max_value(v) - dot(v, x)
}

/// `G(x) = ⟨v(x), BR(x) - x⟩`.
pub fn gap(game: &dyn PayoffField, x: &SimplexState) -> Result<f64> {
    x.check_dim(game.n_strategies())?;
    let v = game.eval(x.as_slice());
    Ok(gap_from_payoff(&v, x.as_slice()))
}

pub(crate) fn regularized_gap_from_payoff(reg: &dyn Regularizer, eps: f64, v: &[f64], x: &[f64]) -> f64 {
    let r = rbr_from_payoff(reg, v, eps);
    let d: Vec<f64> = r.iter().zip(x).map(|(a, b)| a - b).collect();
    dot(v, &d) - eps * (reg.value(&r) - reg.value(x))
}

/// `G_ε(x) = max_{x'} ⟨v(x), x' - x⟩ - ε (h(x') - h(x))`.
pub fn regularized_gap(
    game: &dyn PayoffField,
    reg: &dyn Regularizer,
    eps: f64,
    x: &SimplexState,
) -> Result<f64> {
    check_eps(eps)?;
    x.check_dim(game.n_strategies())?;
    x.check_dim(reg.dim())?;
    let v = game.eval(x.as_slice());
    Ok(regularized_gap_from_payoff(reg, eps, &v, x.as_slice()))
}

/// Maximum of a sampled functional with the point that attains it.
#[derive(Clone, Debug, Serialize)]
pub struct SampledMax {
    pub max: f64,
    pub witness: SimplexState,
    pub n_samples: usize,
}

/// `max_x ⟨v(x), x - x*⟩` over uniform samples of the simplex.
pub fn mvi_violation(
    game: &dyn PayoffField,
    x_star: &SimplexState,
    n_samples: usize,
    rng_seed: u64,
) -> Result<SampledMax> {
    let n = game.n_strategies();
    x_star.check_dim(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut best = SampledMax {
        max: f64::NEG_INFINITY,
        witness: x_star.clone(),
        n_samples: 0,
    };
    // The vertices are where violations typically peak; include them.
    let candidates = (0..n)
        .map(|i| SimplexState::vertex(n, i))
        .chain((0..n_samples).map(|_| SimplexState::sample_uniform(n, &mut rng)));
    for x in candidates {
        if x.dist_inf(x_star) == 0.0 {
            continue;
        }
        let v = game.eval(x.as_slice());
        let d: Vec<f64> = x.as_slice().iter().zip(x_star.as_slice()).map(|(a, b)| a - b).collect();
        let val = dot(&v, &d);
        best.n_samples += 1;
        if val > best.max {
            best.max = val;
            best.witness = x;
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct EssReport {
    pub max_local_violation: f64,
    pub witness: SimplexState,
    pub n_accepted: usize,
    /// Negative maximum: sampled evidence of evolutionary stability.
    pub is_ess: bool,
}

/// `max ⟨v(x), x - x*⟩` over samples from the ball of `radius` around `x*`
/// intersected with the simplex.
pub fn ess_check(
    game: &dyn PayoffField,
    x_star: &SimplexState,
    radius: f64,
    n_samples: usize,
    rng_seed: u64,
) -> Result<EssReport> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(PopdynError::param("radius", "must be positive"));
    }
    x_star.check_dim(game.n_strategies())?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut report = EssReport {
        max_local_violation: f64::NEG_INFINITY,
        witness: x_star.clone(),
        n_accepted: 0,
        is_ess: false,
    };
    for _ in 0..n_samples {
        let Some(x) = SimplexState::sample_in_ball(x_star, radius, &mut rng, 10_000) else {
            continue;
        };
        if x.dist_inf(x_star) == 0.0 {
            continue;
        }
        let v = game.eval(x.as_slice());
        let d: Vec<f64> = x.as_slice().iter().zip(x_star.as_slice()).map(|(a, b)| a - b).collect();
        let val = dot(&v, &d);
        report.n_accepted += 1;
        if val > report.max_local_violation {
            report.max_local_violation = val;
            report.witness = x;
        }
    }
    report.is_ess = report.n_accepted > 0 && report.max_local_violation < 0.0;
    Ok(report)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateFlags {
    pub is_eq: bool,
    pub is_mvi_consistent: bool,
    pub is_ess_consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumCertificate {
    pub point: SimplexState,
    pub svi_residual: f64,
    pub mvi_violation: f64,
    pub flags: CertificateFlags,
    /// Iterations used by the solver that produced `point` (0 if certified directly).
    #[serde(default)]
    pub iterations: usize,
    /// `‖x - rBR(x)‖∞` at `point` for solver output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point_residual: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct CertifyOptions {
    pub gap_tol: f64,
    pub mvi_tol: f64,
    pub mvi_samples: usize,
    pub ess_radius: f64,
    pub ess_samples: usize,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            gap_tol: EQ_TOL,
            mvi_tol: 1e-9,
            mvi_samples: 1000,
            ess_radius: 0.1,
            ess_samples: 500,
            seed: 0,
        }
    }
}

pub fn certify(
    game: &dyn PayoffField,
    point: &SimplexState,
    opts: &CertifyOptions,
) -> Result<EquilibriumCertificate> {
    let svi_residual = gap(game, point)?;
    let mvi = mvi_violation(game, point, opts.mvi_samples, opts.seed)?;
    let ess = ess_check(game, point, opts.ess_radius, opts.ess_samples, opts.seed)?;
    let is_eq = svi_residual <= opts.gap_tol;
    Ok(EquilibriumCertificate {
        point: point.clone(),
        svi_residual,
        mvi_violation: mvi.max,
        flags: CertificateFlags {
            is_eq,
            is_mvi_consistent: is_eq && mvi.max <= opts.mvi_tol,
            is_ess_consistent: is_eq && ess.is_ess,
        },
        iterations: 0,
        fixed_point_residual: None,
    })
}

#[derive(Clone, Debug)]
pub struct FixedPointOptions {
    pub damping: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Halve the damping whenever the residual stalls for a window of iterations.
    pub adaptive: bool,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            damping: 0.5,
            max_iter: 100_000,
            tol: 1e-10,
            adaptive: true,
        }
    }
}

const STALL_WINDOW: usize = 50;
const MIN_DAMPING: f64 = 1e-9;

/// Damped fixed-point iteration `x ← (1-α) x + α rBR_{εh}(x)` for an
/// ε-regularized equilibrium.
pub fn solve_regularized_equilibrium(
    game: &dyn PayoffField,
    reg: &dyn Regularizer,
    eps: f64,
    x0: &SimplexState,
    opts: &FixedPointOptions,
) -> Result<EquilibriumCertificate> {
    check_eps(eps)?;
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(PopdynError::param("damping", "must lie in (0, 1]"));
    }
    if !(opts.tol > 0.0) {
        return Err(PopdynError::param("tol", "must be positive"));
    }
    x0.check_dim(game.n_strategies())?;
    x0.check_dim(reg.dim())?;

    let mut x = x0.as_slice().to_vec();
    let mut alpha = opts.damping;
    let mut best = (f64::INFINITY, x.clone());
    let mut window_start_best = f64::INFINITY;
    let mut v = vec![0.0; x.len()];
    for iter in 0..=opts.max_iter {
        game.eval_into(&x, &mut v);
        let r = rbr_from_payoff(reg, &v, eps);
        let residual = dist_inf(&x, &r);
        if residual < best.0 {
            best = (residual, x.clone());
        }
        if residual <= opts.tol {
            let point = SimplexState::project_drift(x)?.0;
            let mut cert = certify(game, &point, &CertifyOptions::default())?;
            cert.iterations = iter;
            cert.fixed_point_residual = Some(residual);
            return Ok(cert);
        }
        if iter == opts.max_iter {
            break;
        }
        if opts.adaptive && iter % STALL_WINDOW == 0 {
            if iter > 0 && best.0 > 0.5 * window_start_best && alpha > MIN_DAMPING {
                alpha *= 0.5;
                // Restart from the best iterate with the smaller step.
                x = best.1.clone();
                game.eval_into(&x, &mut v);
                let r = rbr_from_payoff(reg, &v, eps);
                x.iter_mut().zip(&r).for_each(|(a, b)| *a += alpha * (b - *a));
                window_start_best = best.0;
                continue;
            }
            window_start_best = best.0;
        }
        x.iter_mut().zip(&r).for_each(|(a, b)| *a += alpha * (b - *a));
    }
    Err(PopdynError::NonConvergence {
        best: SimplexState::project_drift(best.1)?.0,
        residual: best.0,
        iterations: opts.max_iter,
    })
}

/// One lattice point returned by the grid oracle.
#[derive(Clone, Debug, Serialize)]
pub struct OraclePoint {
    pub state: SimplexState,
    pub gap: f64,
    #[serde(skip)]
    counts: Vec<u32>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleResult {
    /// Actual lattice spacing `1/m`.
    pub spacing: f64,
    /// Largest gap change across one lattice move.
    pub slack: f64,
    pub min_gap: f64,
    /// Near-minimal points sorted by gap.
    pub points: Vec<OraclePoint>,
    /// Groups of lattice-adjacent points (indices into `points`), ordered by best gap.
    pub clusters: Vec<Vec<usize>>,
}

impl OracleResult {
    /// Lowest-gap member of each cluster.
    pub fn representatives(&self) -> Vec<&OraclePoint> {
        self.clusters.iter().map(|c| &self.points[c[0]]).collect()
    }

    /// `L∞` distance from `x` to the nearest returned point.
    pub fn distance_to(&self, x: &SimplexState) -> f64 {
        self.points
            .iter()
            .map(|p| p.state.dist_inf(x))
            .fold(f64::INFINITY, f64::min)
    }
}

pub const MAX_LATTICE_POINTS: u128 = 5_000_000;

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

fn compositions(total: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for k in 0..=total {
        prefix.push(k);
        compositions(total - k, parts - 1, prefix, out);
        prefix.pop();
    }
}

fn lattice_gap(game: &dyn PayoffField, counts: &[u32], m: f64) -> f64 {
    let x: Vec<f64> = counts.iter().map(|k| *k as f64 / m).collect();
    gap_from_payoff(&game.eval(&x), &x)
}

/// Enumerates the simplex lattice with the given spacing and returns every
/// point whose gap is within one lattice-Lipschitz slack of the minimum.
pub fn brute_force_equilibria(game: &dyn PayoffField, grid_step: f64) -> Result<OracleResult> {
    if !(1e-3..=0.5).contains(&grid_step) {
        return Err(PopdynError::param("grid_step", "must lie in [1e-3, 0.5]"));
    }
    let n = game.n_strategies();
    if n > 4 {
        return Err(PopdynError::param("n", format!("brute force supports n ≤ 4, got {n}")));
    }
    let m = (1.0 / grid_step).round() as u32;
    let points = binomial((m as usize + n - 1) as u128, (n - 1) as u128);
    if points > MAX_LATTICE_POINTS {
        return Err(PopdynError::LatticeTooLarge {
            step: grid_step,
            n,
            points,
            limit: MAX_LATTICE_POINTS,
        });
    }
    let mf = m as f64;

    // Partition by first coordinate; each worker returns its block in lattice order.
    let blocks: Vec<Vec<(Vec<u32>, f64, f64)>> = (0..=m)
        .into_par_iter()
        .map(|first| {
            let mut tails = Vec::new();
            if n == 1 {
                if first == m {
                    tails.push(vec![m]);
                }
            } else {
                let mut prefix = vec![first];
                compositions(m - first, n - 1, &mut prefix, &mut tails);
            }
            tails
                .into_iter()
                .map(|counts| {
                    let g = lattice_gap(game, &counts, mf);
                    let mut local_slack: f64 = 0.0;
                    for i in 0..n {
                        if counts[i] == 0 {
                            continue;
                        }
                        for j in 0..n {
                            if i == j {
                                continue;
                            }
                            let mut nb = counts.clone();
                            nb[i] -= 1;
                            nb[j] += 1;
                            local_slack = local_slack.max((lattice_gap(game, &nb, mf) - g).abs());
                        }
                    }
                    (counts, g, local_slack)
                })
                .collect()
        })
        .collect();
    let all: Vec<(Vec<u32>, f64, f64)> = blocks.into_iter().flatten().collect();
    let slack = all.iter().map(|(_, _, s)| *s).fold(0.0, f64::max);
    let min_gap = all.iter().map(|(_, g, _)| *g).fold(f64::INFINITY, f64::min);

    let mut selected: Vec<OraclePoint> = all
        .into_iter()
        .filter(|(_, g, _)| *g <= min_gap + slack)
        .map(|(counts, g, _)| OraclePoint {
            state: SimplexState::from_vec_unchecked(counts.iter().map(|k| *k as f64 / mf).collect()),
            gap: g,
            counts,
        })
        .collect();
    selected.sort_by(|a, b| a.gap.total_cmp(&b.gap));

    let clusters = cluster_lattice_points(&selected, n);
    Ok(OracleResult {
        spacing: 1.0 / mf,
        slack,
        min_gap,
        points: selected,
        clusters,
    })
}

fn cluster_lattice_points(points: &[OraclePoint], n: usize) -> Vec<Vec<usize>> {
    let index: HashMap<&[u32], usize> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.counts.as_slice(), i))
        .collect();
    let mut label = vec![usize::MAX; points.len()];
    let mut clusters = Vec::new();
    for start in 0..points.len() {
        if label[start] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        let mut members = vec![start];
        label[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(cur) = queue.pop_front() {
            let counts = &points[cur].counts;
            for i in 0..n {
                if counts[i] == 0 {
                    continue;
                }
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let mut nb = counts.clone();
                    nb[i] -= 1;
                    nb[j] += 1;
                    if let Some(&k) = index.get(nb.as_slice()) {
                        if label[k] == usize::MAX {
                            label[k] = id;
                            members.push(k);
                            queue.push_back(k);
                        }
                    }
                }
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{congestion_field, random_matching_field, GameSpec};
    use crate::regularizer::{Entropic, Euclidean};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use std::sync::Arc;

    fn builtin(name: &str) -> Arc<dyn PayoffField> {
        GameSpec::builtin(name).build().unwrap()
    }

    #[test]
    fn best_responses() {
        let rps = builtin("rps");
        let br = best_response(rps.as_ref(), &SimplexState::vertex(3, 0)).unwrap();
        assert_eq!(br.argmax_indices, vec![1]);
        assert_eq!(br.selected_vertex, SimplexState::vertex(3, 1));
        assert_eq!(br.max_value, 1.0);

        let br = best_response(rps.as_ref(), &SimplexState::uniform(3)).unwrap();
        assert_eq!(br.argmax_indices, vec![0, 1, 2]);
        assert_eq!(br.selected_vertex, SimplexState::vertex(3, 0));
        assert_abs_diff_eq!(br.max_value, 0.0, epsilon = 1e-15);

        let cong = congestion_field(vec![1.0, 2.0]).unwrap();
        let x = SimplexState::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let br = best_response(&cong, &x).unwrap();
        assert_eq!(br.argmax_indices, vec![0, 1]);
        assert_abs_diff_eq!(br.max_value, -2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn regularized_best_responses() {
        let rps = builtin("rps");
        let ent = Entropic::new(3);
        let r = regularized_best_response(rps.as_ref(), &ent, 1e6, &SimplexState::vertex(3, 0)).unwrap();
        assert!(r.dist_inf(&SimplexState::uniform(3)) < 1e-5);

        let r = regularized_best_response(rps.as_ref(), &ent, 1.0, &SimplexState::vertex(3, 0)).unwrap();
        let z = 1.0 + std::f64::consts::E + (-1f64).exp();
        let expected = [1.0 / z, std::f64::consts::E / z, (-1f64).exp() / z];
        for (a, b) in r.as_slice().iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(r.as_slice()[0], 0.2447, epsilon = 1e-4);
        assert_abs_diff_eq!(r.as_slice()[1], 0.6652, epsilon = 1e-4);
        assert_abs_diff_eq!(r.as_slice()[2], 0.0900, epsilon = 1e-4);

        let neg = random_matching_field(-DMatrix::<f64>::identity(2, 2)).unwrap();
        let r = regularized_best_response(&neg, &Euclidean::new(2), 1.0, &SimplexState::uniform(2)).unwrap();
        assert_abs_diff_eq!(r.as_slice()[0], 0.5, epsilon = 1e-15);

        assert!(regularized_best_response(rps.as_ref(), &ent, 0.0, &SimplexState::uniform(3)).is_err());
        assert!(regularized_best_response(rps.as_ref(), &ent, -1.0, &SimplexState::uniform(3)).is_err());
    }

    #[test]
    fn gaps() {
        let rps = builtin("rps");
        assert_abs_diff_eq!(gap(rps.as_ref(), &SimplexState::uniform(3)).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gap(rps.as_ref(), &SimplexState::vertex(3, 0)).unwrap(), 1.0, epsilon = 1e-15);
        let cong = congestion_field(vec![1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(gap(&cong, &SimplexState::uniform(2)).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn regularized_gaps() {
        let rps = builtin("rps");
        let ent = Entropic::new(3);
        assert_abs_diff_eq!(
            regularized_gap(rps.as_ref(), &ent, 1.0, &SimplexState::uniform(3)).unwrap(),
            0.0,
            epsilon = 1e-10
        );
        let g = regularized_gap(rps.as_ref(), &ent, 1e-6, &SimplexState::vertex(3, 0)).unwrap();
        assert_abs_diff_eq!(g, 1.0, epsilon = 1e-5);
        assert!(regularized_gap(rps.as_ref(), &ent, 0.0, &SimplexState::uniform(3)).is_err());
    }

    #[test]
    fn mvi_examples() {
        let rps = builtin("rps");
        let r = mvi_violation(rps.as_ref(), &SimplexState::uniform(3), 1000, 4).unwrap();
        assert!(r.max.abs() <= 1e-12);

        let neg = random_matching_field(-DMatrix::<f64>::identity(3, 3)).unwrap();
        let u = SimplexState::uniform(3);
        let r = mvi_violation(&neg, &u, 1000, 4).unwrap();
        assert!(r.max <= 0.0);
        assert_abs_diff_eq!(r.max, -r.witness.dist_l2(&u).powi(2), epsilon = 1e-14);

        let coord = builtin("coordination");
        let r = mvi_violation(coord.as_ref(), &SimplexState::uniform(2), 1000, 4).unwrap();
        assert_abs_diff_eq!(r.max, 0.5, epsilon = 1e-15);
        assert!(r.witness == SimplexState::vertex(2, 0) || r.witness == SimplexState::vertex(2, 1));
    }

    #[test]
    fn ess_examples() {
        let neg = random_matching_field(-DMatrix::<f64>::identity(3, 3)).unwrap();
        let r = ess_check(&neg, &SimplexState::uniform(3), 0.2, 500, 1).unwrap();
        assert!(r.is_ess && r.max_local_violation < 0.0);

        let coord = builtin("coordination");
        let r = ess_check(coord.as_ref(), &SimplexState::vertex(2, 0), 0.1, 500, 1).unwrap();
        assert!(r.is_ess, "{r:?}");

        let rps = builtin("rps");
        let r = ess_check(rps.as_ref(), &SimplexState::uniform(3), 0.2, 500, 1).unwrap();
        assert!(r.max_local_violation.abs() <= 1e-12);
        assert!(!r.is_ess);

        assert!(ess_check(rps.as_ref(), &SimplexState::uniform(3), 0.0, 5, 1).is_err());
    }

    #[test]
    fn solver_examples() {
        let rps = builtin("rps");
        let ent = Entropic::new(3);
        let x0 = SimplexState::new(vec![0.6, 0.3, 0.1]).unwrap();
        let c = solve_regularized_equilibrium(rps.as_ref(), &ent, 1.0, &x0, &FixedPointOptions::default()).unwrap();
        assert!(c.point.dist_inf(&SimplexState::uniform(3)) <= 1e-8);
        assert!(c.flags.is_eq);

        let cong = congestion_field(vec![1.0, 2.0]).unwrap();
        let c = solve_regularized_equilibrium(&cong, &Euclidean::new(2), 0.01, &SimplexState::uniform(2), &FixedPointOptions::default()).unwrap();
        let nash = SimplexState::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!(c.point.dist_inf(&nash) <= 2e-2);
        let oracle = brute_force_equilibria(&cong, 1e-3).unwrap();
        assert!(oracle.representatives()[0].state.dist_inf(&c.point) <= 2e-2);

        let c = solve_regularized_equilibrium(rps.as_ref(), &ent, 1e9, &x0, &FixedPointOptions::default()).unwrap();
        assert!(c.point.dist_inf(&SimplexState::uniform(3)) <= 1e-8);
    }

    #[test]
    fn solver_reports_non_convergence() {
        let cong = congestion_field(vec![1.0, 2.0]).unwrap();
        let opts = FixedPointOptions {
            damping: 1.0,
            max_iter: 20,
            tol: 1e-14,
            adaptive: false,
        };
        let err = solve_regularized_equilibrium(&cong, &Euclidean::new(2), 0.01, &SimplexState::vertex(2, 1), &opts).unwrap_err();
        match err {
            PopdynError::NonConvergence { residual, iterations, .. } => {
                assert!(residual > 1e-14);
                assert_eq!(iterations, 20);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn oracle_examples() {
        let rps = builtin("rps");
        let r = brute_force_equilibria(rps.as_ref(), 0.01).unwrap();
        assert_eq!(r.clusters.len(), 1);
        assert!(r.representatives()[0].state.dist_inf(&SimplexState::uniform(3)) <= 0.01);

        let cong = congestion_field(vec![1.0, 2.0]).unwrap();
        let r = brute_force_equilibria(&cong, 0.001).unwrap();
        let nash = SimplexState::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!(r.points[0].state.dist_inf(&nash) <= 0.001);

        let coord = builtin("coordination");
        let r = brute_force_equilibria(coord.as_ref(), 0.01).unwrap();
        assert_eq!(r.clusters.len(), 3);
        for target in [SimplexState::vertex(2, 0), SimplexState::vertex(2, 1), SimplexState::uniform(2)] {
            assert!(r.representatives().iter().any(|p| p.state.dist_inf(&target) < 1e-12));
        }
    }

    #[test]
    fn oracle_rejects_bad_inputs() {
        let rps = builtin("rps");
        assert!(brute_force_equilibria(rps.as_ref(), 1e-4).is_err());
        assert!(brute_force_equilibria(rps.as_ref(), 0.6).is_err());
        let big = random_matching_field(DMatrix::identity(5, 5)).unwrap();
        assert!(brute_force_equilibria(&big, 0.1).is_err());
        let four = random_matching_field(DMatrix::identity(4, 4)).unwrap();
        assert!(matches!(
            brute_force_equilibria(&four, 1e-3),
            Err(PopdynError::LatticeTooLarge { .. })
        ));
    }
}
