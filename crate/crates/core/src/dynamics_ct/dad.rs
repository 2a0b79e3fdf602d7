//! Dual averaging in continuous time: `ẏ = v(x)`, `x = Q(η_t y)`.

use super::{check_start, replicator_field, rk4_step, Grid, Recorder};
use crate::equilibrium::gap_from_payoff;
use crate::error::{PopdynError, Result};
use crate::game::PayoffField;
use crate::record::{ChannelConfig, ChannelRow, Channels, TrajectoryRecord};
use crate::regularizer::Regularizer;
use crate::schedule::Schedule;
use crate::simplex::SimplexState;

/// A score `y` with `Q(η y) = x`, namely `∇h(x)/η`. Needs an interior point
/// for the entropic regularizer.
pub fn score_for_state(reg: &dyn Regularizer, x: &SimplexState, eta: f64) -> Result<Vec<f64>> {
    x.check_dim(reg.dim())?;
    if !(eta.is_finite() && eta > 0.0) {
        return Err(PopdynError::param("eta", "must be positive"));
    }
    Ok(reg.subgradient(x.as_slice())?.into_iter().map(|g| g / eta).collect())
}

fn choice(reg: &dyn Regularizer, y: &[f64], eta: f64) -> Vec<f64> {
    let scaled: Vec<f64> = y.iter().map(|a| eta * a).collect();
    let mut out = vec![0.0; y.len()];
    reg.choice_into(&scaled, &mut out);
    out
}

/// Channels: gap, potential (when available), `F_h(p, η_t y_t)` and the
/// regret integral for every reference `p`, and the deflated energy
/// `F_h(p*, η_t y_t)/η_t` for the energy reference `p*`.
pub fn integrate_dad(
    game: &dyn PayoffField,
    reg: &dyn Regularizer,
    eta: &Schedule,
    y0: &[f64],
    horizon: f64,
    dt: f64,
    config: &ChannelConfig,
) -> Result<TrajectoryRecord> {
    eta.validate_learning_rate(true)?;
    let n = game.n_strategies();
    if reg.dim() != n {
        return Err(PopdynError::DimensionMismatch { expected: n, got: reg.dim() });
    }
    if y0.len() != n {
        return Err(PopdynError::DimensionMismatch { expected: n, got: y0.len() });
    }
    if y0.iter().any(|y| !y.is_finite()) {
        return Err(PopdynError::param("y0", "must be finite"));
    }
    let grid = Grid::new(horizon, dt)?;
    let (refs, energy_ref) = config.resolve(game);
    for r in &refs {
        r.point.check_dim(n)?;
    }
    energy_ref.check_dim(n)?;

    let channels = Channels::with_labels(&refs, true, true, &[]);
    let x0 = choice(reg, y0, eta.at(0.0));
    let mut rec = Recorder::new("dad", game, grid, &x0, refs.clone(), channels, true);
    let row_at = |y: &[f64], e: f64| {
        let scaled: Vec<f64> = y.iter().map(|a| e * a).collect();
        let refs = &refs;
        let energy_ref = &energy_ref;
        move |x: &[f64], v: &[f64]| ChannelRow {
            gap: Some(gap_from_payoff(v, x)),
            potential: game.potential(x),
            fenchel: refs.iter().map(|r| Some(reg.fenchel(r.point.as_slice(), &scaled))).collect(),
            energy: Some(reg.fenchel(energy_ref.as_slice(), &scaled) / e),
            ..Default::default()
        }
    };

    let mut y = y0.to_vec();
    rec.observe(0, &x0, Some(&y), row_at(&y, eta.at(0.0)));
    for k in 1..=grid.steps {
        let e = eta.at(grid.time(k - 1));
        let next = rk4_step(|s| game.eval(&choice(reg, s, e)), &y, grid.dt);
        if next.iter().any(|a| !a.is_finite()) {
            rec.abort(k - 1);
            break;
        }
        y = next;
        let e_next = eta.at(grid.time(k));
        let x = choice(reg, &y, e_next);
        rec.observe(k, &x, Some(&y), row_at(&y, e_next));
    }
    Ok(rec.finish())
}

/// Direct RK4 integration of the replicator field, for cross-checking the
/// entropic dual-averaging flow. Channels: gap and potential.
pub fn integrate_replicator(
    game: &dyn PayoffField,
    x0: &SimplexState,
    horizon: f64,
    dt: f64,
) -> Result<TrajectoryRecord> {
    check_start(game, x0)?;
    let grid = Grid::new(horizon, dt)?;
    let row = |x: &[f64], v: &[f64]| ChannelRow {
        gap: Some(gap_from_payoff(v, x)),
        potential: game.potential(x),
        ..Default::default()
    };
    let mut rec = Recorder::new("replicator", game, grid, x0.as_slice(), Vec::new(), Channels::default(), false);
    let mut z = x0.as_slice().to_vec();
    rec.observe(0, &z, None, row);
    for k in 1..=grid.steps {
        let next = rk4_step(|s| replicator_field(game, s), &z, grid.dt);
        match SimplexState::project_drift(next) {
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
