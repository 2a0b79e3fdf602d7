//! Discrete-time learning: fictitious play and its regularized variants, and
//! dual averaging, with energy, Fenchel-zone and regret diagnostics.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{argmax_set, gap_from_payoff, rbr_from_payoff, regularized_gap_from_payoff, supported_on};
use crate::error::{PopdynError, Result};
use crate::game::PayoffField;
use crate::record::{ChannelConfig, ChannelRow, Channels, RefPoint, RunRecord};
use crate::regularizer::Regularizer;
use crate::schedule::Schedule;
use crate::simplex::{dot, SimplexState};

/// Tolerance for `x_1 = Q(η_0 S_0)`.
const CONSISTENCY_TOL: f64 = 1e-12;

fn check_common(game: &dyn PayoffField, x1: &SimplexState, n_steps: usize) -> Result<()> {
    x1.check_dim(game.n_strategies())?;
    if n_steps == 0 {
        return Err(PopdynError::param("n_steps", "must be at least 1"));
    }
    Ok(())
}

fn check_reg(game: &dyn PayoffField, reg: &dyn Regularizer) -> Result<()> {
    if reg.dim() != game.n_strategies() {
        return Err(PopdynError::DimensionMismatch {
            expected: game.n_strategies(),
            got: reg.dim(),
        });
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(PopdynError::param("eps", format!("must be positive, got {eps}")));
    }
    Ok(())
}

fn new_record(dynamic: &'static str, references: Vec<RefPoint>, channels: Channels) -> RunRecord {
    RunRecord {
        dynamic,
        steps: Vec::new(),
        states: Vec::new(),
        means: Vec::new(),
        payoffs: Vec::new(),
        scores: None,
        initial_score: None,
        learning_rates: None,
        first_state_consistent: true,
        references,
        channels,
        aborted_at: None,
    }
}

/// `x̄_{n+1} = x̄_n + (x_{n+1} - x̄_n)/(n+1)`.
fn update_mean(mean: &mut [f64], next: &[f64], n: usize) {
    let w = 1.0 / (n + 1) as f64;
    for (m, x) in mean.iter_mut().zip(next) {
        *m += (x - *m) * w;
    }
}

fn accumulate_regret(regret: &mut [f64], refs: &[RefPoint], v: &[f64], x: &[f64]) -> Vec<Option<f64>> {
    let vx = dot(v, x);
    regret
        .iter_mut()
        .zip(refs)
        .map(|(r, p)| {
            *r += dot(v, p.point.as_slice()) - vx;
            Some(*r)
        })
        .collect()
}

/// Shared loop of the fictitious-play family: `x_{n+1} = step(n, x̄_n, v(x̄_n))`.
#[allow(clippy::too_many_arguments)]
fn run_mean_responder(
    dynamic: &'static str,
    game: &dyn PayoffField,
    x1: &SimplexState,
    n_steps: usize,
    config: &ChannelConfig,
    extra: &[&str],
    mut step: impl FnMut(usize, &[f64], &[f64]) -> Vec<f64>,
    mut diagnostics: impl FnMut(usize, &[f64], &[f64], &mut ChannelRow),
) -> Result<RunRecord> {
    check_common(game, x1, n_steps)?;
    let (refs, _) = config.resolve(game);
    let mut rec = new_record(dynamic, refs.clone(), Channels::with_labels(&refs, false, true, extra));
    let mut regret = vec![0.0; refs.len()];
    let mut x = x1.as_slice().to_vec();
    let mut mean = x.clone();
    for n in 1..=n_steps {
        let v = game.eval(&x);
        let vm = game.eval(&mean);
        if v.iter().chain(&vm).any(|a| !a.is_finite()) {
            rec.aborted_at = Some(n - 1);
            break;
        }
        let mut row = ChannelRow {
            gap: Some(gap_from_payoff(&vm, &mean)),
            potential: game.potential(&mean),
            regret: accumulate_regret(&mut regret, &refs, &v, &x),
            ..Default::default()
        };
        diagnostics(n, &mean, &vm, &mut row);
        rec.steps.push(n);
        rec.states.push(SimplexState::from_vec_unchecked(x.clone()));
        rec.means.push(SimplexState::from_vec_unchecked(mean.clone()));
        rec.payoffs.push(v);
        rec.channels.push(row);
        if n == n_steps {
            break;
        }
        let next = step(n, &mean, &vm);
        update_mean(&mut mean, &next, n);
        x = next;
    }
    Ok(rec)
}

/// Lowest-index best reply, or the mean itself when it already lies in the
/// hull of its best replies.
fn fp_step(mean: &[f64], vm: &[f64]) -> Vec<f64> {
    let (ties, _) = argmax_set(vm);
    if supported_on(mean, &ties) {
        return mean.to_vec();
    }
    let mut e = vec![0.0; mean.len()];
    e[ties[0]] = 1.0;
    e
}

/// Fictitious play `x_{n+1} = BR(x̄_n)`.
pub fn run_fp(game: &dyn PayoffField, x1: &SimplexState, n_steps: usize, config: &ChannelConfig) -> Result<RunRecord> {
    run_mean_responder("fp", game, x1, n_steps, config, &[], |_, m, vm| fp_step(m, vm), |_, _, _, _| {})
}

/// Regularized fictitious play `x_{n+1} = Q(v(x̄_n)/ε)`.
pub fn run_rfp(
    game: &dyn PayoffField,
    reg: &dyn Regularizer,
    eps: f64,
    x1: &SimplexState,
    n_steps: usize,
    config: &ChannelConfig,
) -> Result<RunRecord> {
    check_eps(eps)?;
    check_reg(game, reg)?;
    run_mean_responder(
        "rfp",
        game,
        x1,
        n_steps,
        config,
        &[],
        |_, _, vm| rbr_from_payoff(reg, vm, eps),
        |_, m, vm, row| row.reg_gap = Some(regularized_gap_from_payoff(reg, eps, vm, m)),
    )
}

/// Vanishingly regularized fictitious play `x_{n+1} = Q(v(x̄_n)/ε_n)`.
pub fn run_vrfp(
    game: &dyn PayoffField,
    reg: &dyn Regularizer,
    eps: &Schedule,
    x1: &SimplexState,
    n_steps: usize,
    config: &ChannelConfig,
) -> Result<RunRecord> {
    eps.validate_vanishing(false)?;
    check_reg(game, reg)?;
    run_mean_responder(
        "vrfp",
        game,
        x1,
        n_steps,
        config,
        &["eps"],
        |n, _, vm| rbr_from_payoff(reg, vm, eps.at_step(n)),
        |n, m, vm, row| {
            let e = eps.at_step(n);
            row.reg_gap = Some(regularized_gap_from_payoff(reg, e, vm, m));
            row.extra = vec![Some(e)];
        },
    )
}

/// Initial condition of dual averaging. With only `x1` given, the initial
/// score is `∇h(x1)/η_0` so that `x1 = Q(η_0 S_0)` holds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DaInit {
    #[serde(default)]
    pub s0: Option<Vec<f64>>,
    #[serde(default)]
    pub x1: Option<SimplexState>,
}

fn choice_scaled(reg: &dyn Regularizer, s: &[f64], eta: f64) -> Vec<f64> {
    let y: Vec<f64> = s.iter().map(|a| eta * a).collect();
    let mut out = vec![0.0; s.len()];
    reg.choice_into(&y, &mut out);
    out
}

fn resolve_init(reg: &dyn Regularizer, init: &DaInit, n: usize, eta0: f64) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    if let Some(s0) = &init.s0 {
        if s0.len() != n {
            return Err(PopdynError::DimensionMismatch { expected: n, got: s0.len() });
        }
        if s0.iter().any(|a| !a.is_finite()) {
            return Err(PopdynError::param("s0", "must be finite"));
        }
    }
    if let Some(x1) = &init.x1 {
        x1.check_dim(n)?;
    }
    Ok(match (&init.s0, &init.x1) {
        (None, None) => {
            let s0 = vec![0.0; n];
            let x1 = choice_scaled(reg, &s0, eta0);
            (s0, x1, true)
        }
        (Some(s0), None) => (s0.clone(), choice_scaled(reg, s0, eta0), true),
        (None, Some(x1)) => match reg.subgradient(x1.as_slice()) {
            Ok(g) => (g.iter().map(|a| a / eta0).collect(), x1.as_slice().to_vec(), true),
            Err(PopdynError::Domain { .. }) => {
                let s0 = vec![0.0; n];
                let ok = crate::simplex::dist_inf(&choice_scaled(reg, &s0, eta0), x1.as_slice()) <= CONSISTENCY_TOL;
                (s0, x1.as_slice().to_vec(), ok)
            }
            Err(e) => return Err(e),
        },
        (Some(s0), Some(x1)) => {
            let ok = crate::simplex::dist_inf(&choice_scaled(reg, s0, eta0), x1.as_slice()) <= CONSISTENCY_TOL;
            (s0.clone(), x1.as_slice().to_vec(), ok)
        }
    })
}

/// Dual averaging `S_n = S_{n-1} + v(x_n)`, `x_{n+1} = Q(η_n S_n)`.
///
/// Channels: gap and potential at `x̄_n`, `F_h(p, η_n S_n)` and discrete regret
/// per reference, the deflated energy `F_h(p*, η_n S_n)/η_n`, and `r_n`.
pub fn run_da(
    game: &dyn PayoffField,
    reg: &dyn Regularizer,
    eta: &Schedule,
    init: &DaInit,
    n_steps: usize,
    config: &ChannelConfig,
) -> Result<RunRecord> {
    eta.validate_learning_rate(false)?;
    check_reg(game, reg)?;
    let n = game.n_strategies();
    let eta0 = eta.at_step(1);
    let (s0, x1, consistent) = resolve_init(reg, init, n, eta0)?;
    check_common(game, &SimplexState::from_vec_unchecked(x1.clone()), n_steps)?;
    let (refs, energy_ref) = config.resolve(game);
    for r in &refs {
        r.point.check_dim(n)?;
    }
    energy_ref.check_dim(n)?;

    let mut rec = new_record("da", refs.clone(), Channels::with_labels(&refs, true, true, &[]));
    rec.first_state_consistent = consistent;
    rec.initial_score = Some(s0.clone());
    let mut scores = Vec::with_capacity(n_steps);
    let mut rates = Vec::with_capacity(n_steps);
    let mut regret = vec![0.0; refs.len()];
    let mut s = s0;
    let mut x = x1;
    let mut mean = x.clone();
    let mut eta_prev = eta0;
    for step in 1..=n_steps {
        let v = game.eval(&x);
        if v.iter().any(|a| !a.is_finite()) {
            rec.aborted_at = Some(step - 1);
            break;
        }
        s.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
        let eta_n = eta.at_step(step);
        let y: Vec<f64> = s.iter().map(|a| eta_n * a).collect();
        let vm = game.eval(&mean);
        let row = ChannelRow {
            gap: Some(gap_from_payoff(&vm, &mean)),
            potential: game.potential(&mean),
            fenchel: refs.iter().map(|r| Some(reg.fenchel(r.point.as_slice(), &y))).collect(),
            regret: accumulate_regret(&mut regret, &refs, &v, &x),
            energy: Some(reg.fenchel(energy_ref.as_slice(), &y) / eta_n),
            r_n: Some(1.0 / eta_n - 1.0 / eta_prev),
            ..Default::default()
        };
        rec.steps.push(step);
        rec.states.push(SimplexState::from_vec_unchecked(x.clone()));
        rec.means.push(SimplexState::from_vec_unchecked(mean.clone()));
        rec.payoffs.push(v);
        rec.channels.push(row);
        scores.push(s.clone());
        rates.push(eta_n);
        eta_prev = eta_n;
        if step == n_steps {
            break;
        }
        let mut next = vec![0.0; n];
        reg.choice_into(&y, &mut next);
        update_mean(&mut mean, &next, step);
        x = next;
    }
    rec.scores = Some(scores);
    rec.learning_rates = Some(rates);
    Ok(rec)
}

/// `Σ_{k ≤ n} ⟨v(x_k), p - x_k⟩` for every recorded `n`.
pub fn discrete_regret(record: &RunRecord, p: &SimplexState) -> Result<Vec<f64>> {
    if let Some(x) = record.states.first() {
        p.check_dim(x.dim())?;
    }
    let mut acc = 0.0;
    Ok(record
        .states
        .iter()
        .zip(&record.payoffs)
        .map(|(x, v)| {
            acc += dot(v, p.as_slice()) - dot(v, x.as_slice());
            acc
        })
        .collect())
}

struct DaView<'a> {
    scores: &'a [Vec<f64>],
    s0: &'a [f64],
    rates: &'a [f64],
}

fn da_view(record: &RunRecord) -> Result<DaView<'_>> {
    Ok(DaView {
        scores: record.scores.as_deref().ok_or(PopdynError::MissingChannel("scores"))?,
        s0: record.initial_score.as_deref().ok_or(PopdynError::MissingChannel("initial_score"))?,
        rates: record.learning_rates.as_deref().ok_or(PopdynError::MissingChannel("learning_rates"))?,
    })
}

impl DaView<'_> {
    /// `(S_{n-1}, η_{n-1})` for `n ≥ 1`, with `η_0 = η_1`.
    fn previous(&self, n: usize) -> (&[f64], f64) {
        if n == 1 {
            (self.s0, self.rates[0])
        } else {
            (&self.scores[n - 2], self.rates[n - 2])
        }
    }
}

fn deflated(reg: &dyn Regularizer, p: &[f64], s: &[f64], eta: f64) -> f64 {
    let y: Vec<f64> = s.iter().map(|a| eta * a).collect();
    reg.fenchel(p, &y) / eta
}

/// Right-hand side of the dual-averaging regret bound at every `n`:
/// `E_0 + (h(p) - min h)(1/η_n - 1/η_0) + (1/2K) Σ_{k ≤ n} η_{k-1} ‖v(x_k)‖²_*`
/// with `E_0 = F_h(p, η_0 S_0)/η_0`. For `S_0 = 0` this is
/// `(h(p) - min h)/η_n + ...`, which is at most `Ω/η_n + ...`; the returned
/// series uses `Ω` in that case.
pub fn discrete_regret_bound(record: &RunRecord, reg: &dyn Regularizer, p: &SimplexState) -> Result<Vec<f64>> {
    let da = da_view(record)?;
    if !record.first_state_consistent {
        return Err(PopdynError::param("record", "first state is not the choice of the initial score"));
    }
    p.check_dim(reg.dim())?;
    let zero_start = da.s0.iter().all(|a| *a == 0.0);
    let k = reg.modulus();
    let eta0 = da.rates[0];
    let hp = reg.value(p.as_slice()) - reg.min_value();
    let e0 = deflated(reg, p.as_slice(), da.s0, eta0);
    let mut sum = 0.0;
    Ok((1..=record.len())
        .map(|n| {
            let (_, eta_prev) = da.previous(n);
            let dn = reg.norm().dual_norm(&record.payoffs[n - 1]);
            sum += eta_prev * dn * dn / (2.0 * k);
            let eta_n = da.rates[n - 1];
            if zero_start {
                reg.omega() / eta_n + sum
            } else {
                e0 + hp * (1.0 / eta_n - 1.0 / eta0) + sum
            }
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct TemplateReport {
    /// Largest `lhs - rhs` over the checked steps (≤ 0 when the inequality holds).
    pub max_violation: f64,
    pub worst_step: usize,
    pub steps_checked: usize,
    /// Step 1 is skipped when `x_1 ≠ Q(η_0 S_0)`.
    pub first_step_checked: bool,
}

/// Evaluates, at every step, the one-step energy inequality
/// `E_n ≤ E_{n-1} + ⟨v(x_n), x_n - p⟩ + (h(p) - min h) r_n + η_{n-1} ‖v(x_n)‖²_* / (2K)`
/// with `E_n = F_h(p, η_n S_n)/η_n`, for a fixed comparator `p`.
pub fn template_inequality_check(record: &RunRecord, reg: &dyn Regularizer, p: &SimplexState) -> Result<TemplateReport> {
    let da = da_view(record)?;
    p.check_dim(reg.dim())?;
    let pv = p.as_slice();
    let k = reg.modulus();
    let hp = reg.value(pv) - reg.min_value();
    let start = if record.first_state_consistent { 1 } else { 2 };
    let mut report = TemplateReport {
        max_violation: f64::NEG_INFINITY,
        worst_step: 0,
        steps_checked: 0,
        first_step_checked: start == 1,
    };
    let mut e_prev = None;
    for n in start..=record.len() {
        let (s_prev, eta_prev) = da.previous(n);
        let eta_n = da.rates[n - 1];
        let e_before = match e_prev {
            Some(e) => e,
            None => deflated(reg, pv, s_prev, eta_prev),
        };
        let e_n = deflated(reg, pv, &da.scores[n - 1], eta_n);
        let v = &record.payoffs[n - 1];
        let x = record.states[n - 1].as_slice();
        let dn = reg.norm().dual_norm(v);
        let rhs = e_before
            + (dot(v, x) - dot(v, pv))
            + hp * (1.0 / eta_n - 1.0 / eta_prev)
            + eta_prev * dn * dn / (2.0 * k);
        let violation = e_n - rhs;
        if violation > report.max_violation {
            report.max_violation = violation;
            report.worst_step = n;
        }
        report.steps_checked += 1;
        e_prev = Some(e_n);
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct ZoneLevel {
    pub level: f64,
    /// First step at or after the burn-in with `F_h(p, η_n S_n) ≤ level`.
    pub first_entry: Option<usize>,
    /// Exits from the zone after `first_entry`.
    pub exits: usize,
    pub last_exit: Option<usize>,
    /// Entered and never left again up to the horizon.
    pub absorbed: bool,
    pub final_inside: bool,
    /// Largest one-step increase of the coupling after entry.
    pub max_increase_after_entry: Option<f64>,
    /// `max(η_n, r_n)` over the steps after entry, to compare against a smallness threshold.
    pub max_step_size_after_entry: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZoneReport {
    pub burn_in: usize,
    pub coupling: Vec<f64>,
    pub levels: Vec<ZoneLevel>,
}

impl ZoneReport {
    pub fn all_absorbed(&self) -> bool {
        self.levels.iter().all(|l| l.absorbed)
    }
}

/// Tracks `n ↦ F_h(p, η_n S_n)` against each level, ignoring entries before `burn_in`.
pub fn fenchel_zone_monitor(
    record: &RunRecord,
    reg: &dyn Regularizer,
    p: &SimplexState,
    levels: &[f64],
    burn_in: usize,
) -> Result<ZoneReport> {
    let da = da_view(record)?;
    p.check_dim(reg.dim())?;
    if levels.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(PopdynError::param("levels", "must be positive"));
    }
    let coupling: Vec<f64> = da
        .scores
        .iter()
        .zip(da.rates)
        .map(|(s, eta)| {
            let y: Vec<f64> = s.iter().map(|a| eta * a).collect();
            reg.fenchel(p.as_slice(), &y)
        })
        .collect();
    let step_size: Vec<f64> = (1..=coupling.len())
        .map(|n| {
            let (_, eta_prev) = da.previous(n);
            let eta_n = da.rates[n - 1];
            eta_n.max(1.0 / eta_n - 1.0 / eta_prev)
        })
        .collect();
    let levels = levels
        .iter()
        .map(|&level| {
            let inside = |i: usize| coupling[i] <= level;
            let first = (burn_in.max(1) - 1..coupling.len()).find(|&i| inside(i));
            let mut zone = ZoneLevel {
                level,
                first_entry: first.map(|i| i + 1),
                exits: 0,
                last_exit: None,
                absorbed: false,
                final_inside: coupling.last().is_some_and(|c| *c <= level),
                max_increase_after_entry: None,
                max_step_size_after_entry: None,
            };
            if let Some(f) = first {
                for i in f + 1..coupling.len() {
                    if inside(i - 1) && !inside(i) {
                        zone.exits += 1;
                        zone.last_exit = Some(i + 1);
                    }
                }
                zone.absorbed = zone.exits == 0;
                zone.max_increase_after_entry = coupling[f..]
                    .windows(2)
                    .map(|w| w[1] - w[0])
                    .reduce(f64::max);
                zone.max_step_size_after_entry = step_size[f..].iter().copied().reduce(f64::max);
            }
            zone
        })
        .collect();
    Ok(ZoneReport {
        burn_in,
        coupling,
        levels,
    })
}
