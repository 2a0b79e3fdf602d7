//! Continuous-time dynamics on a fixed grid, with Lyapunov channels.

mod brd;
mod dad;
mod smooth;

pub use brd::integrate_brd;
pub use dad::{integrate_dad, integrate_replicator, score_for_state};
pub use smooth::{integrate_rbrd, integrate_vbrd};

use serde::Serialize;

use crate::error::{PopdynError, Result};
use crate::game::PayoffField;
use crate::record::{ChannelRow, Channels, RefPoint, TimeAverage, TrajectoryRecord};
use crate::simplex::{dot, SimplexState};

/// Upper bound on recorded points per trajectory; longer runs are subsampled.
pub const MAX_RECORDED_STEPS: usize = 10_000;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Grid {
    pub dt: f64,
    pub steps: usize,
    pub stride: usize,
}

impl Grid {
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0 && dt <= 1.0) {
            return Err(PopdynError::param("dt", format!("must lie in (0, 1], got {dt}")));
        }
        if !(horizon.is_finite() && horizon >= dt) {
            return Err(PopdynError::param("horizon", format!("must be at least dt, got {horizon}")));
        }
        let steps = ((horizon / dt).round() as usize).max(1);
        Ok(Grid {
            dt,
            steps,
            stride: steps.div_ceil(MAX_RECORDED_STEPS).max(1),
        })
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn is_recorded(&self, k: usize) -> bool {
        k % self.stride == 0 || k == self.steps
    }
}

/// Accumulates the time average and regret integrals at full resolution and
/// stores channel rows at recorded steps.
pub(crate) struct Recorder<'a> {
    game: &'a dyn PayoffField,
    grid: Grid,
    avg: TimeAverage,
    regret: Vec<f64>,
    prev_integrand: Vec<f64>,
    track_regret: bool,
    pub record: TrajectoryRecord,
}

impl<'a> Recorder<'a> {
    pub fn new(
        dynamic: &'static str,
        game: &'a dyn PayoffField,
        grid: Grid,
        x0: &[f64],
        references: Vec<RefPoint>,
        channels: Channels,
        with_scores: bool,
    ) -> Self {
        let track_regret = !channels.regret.is_empty();
        let n_refs = references.len();
        Recorder {
            game,
            grid,
            avg: TimeAverage::new(x0, grid.dt),
            regret: vec![0.0; n_refs],
            prev_integrand: vec![0.0; n_refs],
            track_regret,
            record: TrajectoryRecord {
                dynamic,
                dt: grid.dt,
                stride: grid.stride,
                times: Vec::new(),
                states: Vec::new(),
                means: Vec::new(),
                payoffs: Vec::new(),
                scores: with_scores.then(Vec::new),
                references,
                channels,
                max_correction: 0.0,
                events: 0,
                aborted_at: None,
            },
        }
    }

    /// Feeds grid point `k`; `row` builds the diagnostics when `k` is recorded.
    pub fn observe(
        &mut self,
        k: usize,
        x: &[f64],
        score: Option<&[f64]>,
        row: impl FnOnce(&[f64], &[f64]) -> ChannelRow,
    ) {
        let v = self.game.eval(x);
        if k > 0 {
            self.avg.push(x);
        }
        if self.track_regret {
            for (i, r) in self.record.references.iter().enumerate() {
                let f = dot(&v, r.point.as_slice()) - dot(&v, x);
                if k > 0 {
                    self.regret[i] += 0.5 * self.grid.dt * (self.prev_integrand[i] + f);
                }
                self.prev_integrand[i] = f;
            }
        }
        if !self.grid.is_recorded(k) {
            return;
        }
        let mut row = row(x, &v);
        if self.track_regret {
            row.regret = self.regret.iter().map(|r| Some(*r)).collect();
        }
        let rec = &mut self.record;
        rec.times.push(self.grid.time(k));
        rec.states.push(SimplexState::from_vec_unchecked(x.to_vec()));
        rec.means
            .push(SimplexState::from_vec_unchecked(self.avg.mean().to_vec()));
        rec.payoffs.push(v);
        if let (Some(scores), Some(s)) = (rec.scores.as_mut(), score) {
            scores.push(s.to_vec());
        }
        rec.channels.push(row);
    }

    pub fn note_correction(&mut self, c: f64) {
        self.record.max_correction = self.record.max_correction.max(c);
    }

    pub fn abort(&mut self, last_good: usize) {
        self.record.aborted_at = Some(last_good);
    }

    pub fn finish(self) -> TrajectoryRecord {
        self.record
    }
}

/// Classical fourth-order Runge–Kutta step.
pub fn rk4_step(mut f: impl FnMut(&[f64]) -> Vec<f64>, y: &[f64], dt: f64) -> Vec<f64> {
    let shift = |base: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(a, b)| a + h * b).collect()
    };
    let k1 = f(y);
    let k2 = f(&shift(y, &k1, 0.5 * dt));
    let k3 = f(&shift(y, &k2, 0.5 * dt));
    let k4 = f(&shift(y, &k3, dt));
    y.iter()
        .enumerate()
        .map(|(i, a)| a + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// `ẋ_α = x_α (v_α(x) - ⟨v(x), x⟩)`.
pub fn replicator_rhs(game: &dyn PayoffField, x: &SimplexState) -> Result<Vec<f64>> {
    x.check_dim(game.n_strategies())?;
    Ok(replicator_field(game, x.as_slice()))
}

pub(crate) fn replicator_field(game: &dyn PayoffField, x: &[f64]) -> Vec<f64> {
    let v = game.eval(x);
    let avg = dot(&v, x);
    x.iter().zip(&v).map(|(xa, va)| xa * (va - avg)).collect()
}

/// Payoffs centered over the support of `x`, zero off the support.
pub fn projection_rhs(game: &dyn PayoffField, x: &SimplexState) -> Result<Vec<f64>> {
    x.check_dim(game.n_strategies())?;
    let v = game.eval(x.as_slice());
    let support = x.support();
    let mean = support.iter().map(|&i| v[i]).sum::<f64>() / support.len() as f64;
    let mut out = vec![0.0; v.len()];
    for i in support {
        out[i] = v[i] - mean;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct RegretSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Trapezoid error bound `(h²/12) ∫ |f''|` estimated from second differences.
    pub error_estimate: f64,
}

/// `R_p(t) = ∫_0^t ⟨v(x_s), p - x_s⟩ ds` by the trapezoid rule over the
/// recorded grid.
pub fn regret_along_trajectory(traj: &TrajectoryRecord, p: &SimplexState) -> Result<RegretSeries> {
    let n = traj.states.first().map(|s| s.dim()).unwrap_or(0);
    p.check_dim(n)?;
    let f: Vec<f64> = traj
        .states
        .iter()
        .zip(&traj.payoffs)
        .map(|(x, v)| dot(v, p.as_slice()) - dot(v, x.as_slice()))
        .collect();
    let mut values = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    for i in 0..f.len() {
        if i > 0 {
            acc += 0.5 * (traj.times[i] - traj.times[i - 1]) * (f[i] + f[i - 1]);
        }
        values.push(acc);
    }
    let mut error_estimate = 0.0;
    for i in 1..f.len().saturating_sub(1) {
        let h0 = traj.times[i] - traj.times[i - 1];
        let h1 = traj.times[i + 1] - traj.times[i];
        let h = 0.5 * (h0 + h1);
        let second = 2.0 * (h0 * f[i + 1] - (h0 + h1) * f[i] + h1 * f[i - 1]) / (h0 * h1 * (h0 + h1));
        error_estimate += h * h / 12.0 * second.abs() * h;
    }
    Ok(RegretSeries {
        times: traj.times.clone(),
        values,
        error_estimate,
    })
}

pub(crate) fn check_start(game: &dyn PayoffField, x0: &SimplexState) -> Result<()> {
    x0.check_dim(game.n_strategies())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameSpec;

    #[test]
    fn grid_shape() {
        let g = Grid::new(10.0, 1e-3).unwrap();
        assert_eq!(g.steps, 10_000);
        assert_eq!(g.stride, 1);
        let g = Grid::new(200.0, 1e-3).unwrap();
        assert_eq!(g.stride, 20);
        assert!(g.is_recorded(200_000));
        assert!(Grid::new(1.0, 0.0).is_err());
        assert!(Grid::new(1.0, 2.0).is_err());
        assert!(Grid::new(1e-4, 1e-3).is_err());
    }

    #[test]
    fn replicator_examples() {
        let rps = GameSpec::builtin("rps").build().unwrap();
        for i in 0..3 {
            let r = replicator_rhs(rps.as_ref(), &SimplexState::vertex(3, i)).unwrap();
            assert!(r.iter().all(|c| *c == 0.0));
        }
        let r = replicator_rhs(rps.as_ref(), &SimplexState::uniform(3)).unwrap();
        assert!(r.iter().all(|c| c.abs() < 1e-16));
        let x = SimplexState::new(vec![0.5, 0.3, 0.2]).unwrap();
        let r = replicator_rhs(rps.as_ref(), &x).unwrap();
        // v = (-0.1, 0.3, -0.2) and ⟨v, x⟩ = -0.05 + 0.09 - 0.04 = 0.
        let expected = [0.5 * -0.1, 0.3 * 0.3, 0.2 * -0.2];
        for (a, b) in r.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(r.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let rps = GameSpec::builtin("rps").build().unwrap();
        let x = SimplexState::new(vec![0.5, 0.3, 0.2]).unwrap();
        let v = rps.eval(x.as_slice());
        let mean = v.iter().sum::<f64>() / 3.0;
        let r = projection_rhs(rps.as_ref(), &x).unwrap();
        for (a, b) in r.iter().zip(&v) {
            assert!((a - (b - mean)).abs() < 1e-15);
        }
        let x = SimplexState::new(vec![0.5, 0.5, 0.0]).unwrap();
        let v = rps.eval(x.as_slice());
        let r = projection_rhs(rps.as_ref(), &x).unwrap();
        assert_eq!(r[2], 0.0);
        assert!((r[0] - (v[0] - v[1]) / 2.0).abs() < 1e-15);
        assert!((r[1] + (v[0] - v[1]) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rk4_is_exact_on_cubics() {
        // ẏ = 3t² written autonomously as (t, y)' = (1, 3t²).
        let y = rk4_step(|s| vec![1.0, 3.0 * s[0] * s[0]], &[0.0, 0.0], 0.5);
        assert!((y[1] - 0.125).abs() < 1e-15);
    }
}
