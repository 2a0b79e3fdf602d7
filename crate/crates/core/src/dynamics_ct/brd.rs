//! Best-response dynamics `ẋ ∈ BR(x) - x`.
//!
//! Between switches of the best reply the flow toward a fixed target `b` is
//! `x(s) = b + (x - b) e^{-s}`, so each grid step follows that closed form and
//! locates switching instants by bisection. Ties are resolved by a Filippov
//! selection (the convex combination of tied vertices that keeps the tie),
//! and states in the hull of their own best replies are left at rest.

use nalgebra::{DMatrix, DVector};

use super::{check_start, Grid, Recorder};
use crate::equilibrium::{argmax_set, gap_from_payoff, supported_on};
use crate::error::Result;
use crate::game::PayoffField;
use crate::record::{ChannelRow, Channels};
use crate::simplex::SimplexState;

/// Switches handled inside one grid step before falling back to the plain selection.
const MAX_EVENTS_PER_STEP: usize = 256;
const BISECTION_ITERS: usize = 80;

fn flow_point(z: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    let w = -(-s).exp_m1();
    z.iter().zip(b).map(|(zi, bi)| zi + (bi - zi) * w).collect()
}

fn jacobian_or_fd(game: &dyn PayoffField, z: &[f64]) -> DMatrix<f64> {
    if let Some(j) = game.jacobian(z) {
        return j;
    }
    let n = z.len();
    let h = 1e-6;
    let mut j = DMatrix::zeros(n, n);
    for c in 0..n {
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[c] += h;
        zm[c] -= h;
        let vp = game.eval(&zp);
        let vm = game.eval(&zm);
        for r in 0..n {
            j[(r, c)] = (vp[r] - vm[r]) / (2.0 * h);
        }
    }
    j
}

/// Target of the flow at `z` given the tied best replies `ties`: the first
/// subset (smallest first) whose equal-rate combination stays a best reply.
fn filippov_target(game: &dyn PayoffField, z: &[f64], ties: &[usize]) -> (Vec<f64>, usize) {
    let n = z.len();
    let vertex = |i: usize| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    };
    if ties.len() == 1 || ties.len() > 16 {
        return (vertex(ties[0]), ties[0]);
    }
    let j = jacobian_or_fd(game, z);
    let scale = j.amax().max(1.0);
    let jz = &j * DVector::from_column_slice(z);
    let k = ties.len();
    let mut masks: Vec<u32> = (1..(1u32 << k)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    for mask in masks {
        let subset: Vec<usize> = (0..k).filter(|b| mask & (1 << b) != 0).map(|b| ties[b]).collect();
        let m = subset.len();
        let w = if m == 1 {
            vertex(subset[0])
        } else {
            let mut a = DMatrix::zeros(m, m);
            let mut rhs = DVector::zeros(m);
            for c in 0..m {
                a[(0, c)] = 1.0;
            }
            rhs[0] = 1.0;
            for r in 1..m {
                for (c, &s) in subset.iter().enumerate() {
                    a[(r, c)] = j[(subset[0], s)] - j[(subset[r], s)];
                }
                rhs[r] = jz[subset[0]] - jz[subset[r]];
            }
            let Some(sol) = a.lu().solve(&rhs) else {
                continue;
            };
            if sol.iter().any(|w| !w.is_finite() || *w < -1e-12) {
                continue;
            }
            let total: f64 = sol.iter().map(|w| w.max(0.0)).sum();
            let mut w = vec![0.0; n];
            for (c, &s) in subset.iter().enumerate() {
                w[s] = sol[c].max(0.0) / total;
            }
            w
        };
        let d: Vec<f64> = w.iter().zip(z).map(|(a, b)| a - b).collect();
        let rates = &j * DVector::from_vec(d);
        let lead = rates[subset[0]];
        let keeps_tie = ties
            .iter()
            .filter(|t| !subset.contains(t))
            .all(|&t| rates[t] <= lead + 1e-12 * scale);
        if keeps_tie {
            return (w, subset[0]);
        }
    }
    (vertex(ties[0]), ties[0])
}

/// Advances `z` by `duration` along the best-response flow; returns the
/// number of switching events located.
fn advance(game: &dyn PayoffField, z: &mut Vec<f64>, duration: f64) -> usize {
    let mut remaining = duration;
    let mut events = 0;
    while remaining > 0.0 {
        let v = game.eval(z);
        let (ties, _) = argmax_set(&v);
        if supported_on(z, &ties) {
            break;
        }
        let (target, lead) = filippov_target(game, z, &ties);
        let outsiders: Vec<usize> = (0..z.len()).filter(|i| !ties.contains(i)).collect();
        let lead_margin = |s: f64| -> f64 {
            let p = flow_point(z, &target, s);
            let vs = game.eval(&p);
            outsiders
                .iter()
                .map(|&j| vs[j] - vs[lead])
                .fold(f64::NEG_INFINITY, f64::max)
        };
        if events >= MAX_EVENTS_PER_STEP || outsiders.is_empty() || lead_margin(remaining) <= 0.0 {
            *z = flow_point(z, &target, remaining);
            break;
        }
        // Affine fields make each margin monotone in s, so the sign change at
        // the end of the interval brackets the first switch.
        let (mut lo, mut hi) = (0.0, remaining);
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if lead_margin(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        *z = flow_point(z, &target, hi);
        remaining -= hi;
        events += 1;
    }
    events
}

/// Integrates `ẋ ∈ BR(x) - x` from `x0`. Channels: gap and, when the field has
/// one, potential.
pub fn integrate_brd(
    game: &dyn PayoffField,
    x0: &SimplexState,
    horizon: f64,
    dt: f64,
) -> Result<crate::record::TrajectoryRecord> {
    check_start(game, x0)?;
    let grid = Grid::new(horizon, dt)?;
    let row = |x: &[f64], v: &[f64]| ChannelRow {
        gap: Some(gap_from_payoff(v, x)),
        potential: game.potential(x),
        ..Default::default()
    };
    let mut rec = Recorder::new("brd", game, grid, x0.as_slice(), Vec::new(), Channels::default(), false);
    let mut z = x0.as_slice().to_vec();
    rec.observe(0, &z, None, row);
    for k in 1..=grid.steps {
        let events = advance(game, &mut z, grid.dt);
        rec.record.events += events;
        match SimplexState::project_drift(z) {
            Ok((s, c)) => {
                rec.note_correction(c);
                z = s.into_vec();
            }
            Err(_) => {
                rec.abort(k - 1);
                break;
            }
        }
        rec.observe(k, &z, None, row);
    }
    Ok(rec.finish())
}
