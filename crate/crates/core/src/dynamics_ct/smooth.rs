//! Regularized best-response dynamics `ẋ = Q(v(x)/ε) - x`, with a fixed or
//! vanishing weight.

use super::{check_start, rk4_step, Grid, Recorder};
use crate::equilibrium::{gap_from_payoff, rbr_from_payoff, regularized_gap_from_payoff};
use crate::error::{PopdynError, Result};
use crate::game::PayoffField;
use crate::record::{ChannelRow, Channels, TrajectoryRecord};
use crate::regularizer::Regularizer;
use crate::schedule::Schedule;
use crate::simplex::SimplexState;

fn rbr_field<'a>(game: &'a dyn PayoffField, reg: &'a dyn Regularizer, eps: f64) -> impl FnMut(&[f64]) -> Vec<f64> + 'a {
    move |x: &[f64]| {
        let r = rbr_from_payoff(reg, &game.eval(x), eps);
        r.iter().zip(x).map(|(a, b)| a - b).collect()
    }
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

/// Channels: gap, regularized gap `G_ε`, and `F - ε h` when a potential exists.
pub fn integrate_rbrd(
    game: &dyn PayoffField,
    reg: &dyn Regularizer,
    eps: f64,
    x0: &SimplexState,
    horizon: f64,
    dt: f64,
) -> Result<TrajectoryRecord> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(PopdynError::param("eps", format!("must be positive, got {eps}")));
    }
    check_start(game, x0)?;
    check_reg(game, reg)?;
    let grid = Grid::new(horizon, dt)?;
    let row = |x: &[f64], v: &[f64]| ChannelRow {
        gap: Some(gap_from_payoff(v, x)),
        reg_gap: Some(regularized_gap_from_payoff(reg, eps, v, x)),
        potential: game.potential(x).map(|f| f - eps * reg.value(x)),
        ..Default::default()
    };
    let mut rec = Recorder::new("rbrd", game, grid, x0.as_slice(), Vec::new(), Channels::default(), false);
    let mut z = x0.as_slice().to_vec();
    rec.observe(0, &z, None, row);
    for k in 1..=grid.steps {
        let next = rk4_step(rbr_field(game, reg, eps), &z, grid.dt);
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

/// Vanishing weight `ε_t`, frozen at the left end of each step.
///
/// Channels: gap, `G_{ε_t}`, `F - ε_t h` (potential case), and the energy
/// `G_{ε_t} + Ω ε_t`. The energy uses `h` rescaled to range `[0, 1]`, which
/// leaves `G` unchanged and multiplies the weight by `Ω = max h - min h`; the
/// unscaled `G_{ε_t} + ε_t` is kept as the extra channel `energy_raw`.
pub fn integrate_vbrd(
    game: &dyn PayoffField,
    reg: &dyn Regularizer,
    eps: &Schedule,
    x0: &SimplexState,
    horizon: f64,
    dt: f64,
) -> Result<TrajectoryRecord> {
    eps.validate_vanishing(true)?;
    check_start(game, x0)?;
    check_reg(game, reg)?;
    let grid = Grid::new(horizon, dt)?;
    let omega = reg.omega();
    let mut rec = Recorder::new(
        "vbrd",
        game,
        grid,
        x0.as_slice(),
        Vec::new(),
        Channels::with_labels(&[], false, false, &["energy_raw", "eps"]),
        false,
    );
    let row_at = |e: f64| {
        move |x: &[f64], v: &[f64]| {
            let rg = regularized_gap_from_payoff(reg, e, v, x);
            ChannelRow {
                gap: Some(gap_from_payoff(v, x)),
                reg_gap: Some(rg),
                potential: game.potential(x).map(|f| f - e * reg.value(x)),
                energy: Some(rg + omega * e),
                extra: vec![Some(rg + e), Some(e)],
                ..Default::default()
            }
        }
    };
    let mut z = x0.as_slice().to_vec();
    rec.observe(0, &z, None, row_at(eps.at(0.0)));
    for k in 1..=grid.steps {
        let e = eps.at(grid.time(k - 1));
        let next = rk4_step(rbr_field(game, reg, e), &z, grid.dt);
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
        rec.observe(k, &z, None, row_at(eps.at(grid.time(k))));
    }
    Ok(rec.finish())
}
