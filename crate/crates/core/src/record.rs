//! Trajectory containers and their diagnostic channels.

use serde::Serialize;

use crate::game::PayoffField;
use crate::simplex::SimplexState;

/// One value per recorded index; `None` marks a diagnostic that is undefined there.
pub type Series = Vec<Option<f64>>;

#[derive(Clone, Debug, Default, Serialize)]
pub struct Labeled {
    pub label: String,
    pub values: Series,
}

/// A comparator state for Fenchel and regret channels.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefPoint {
    pub label: String,
    pub point: SimplexState,
}

impl RefPoint {
    pub fn new(label: impl Into<String>, point: SimplexState) -> Self {
        RefPoint {
            label: label.into(),
            point,
        }
    }
}

/// All vertices `e0, e1, ...` plus the game's known equilibrium as `eq` when it
/// is not itself a vertex.
pub fn default_references(game: &dyn PayoffField) -> Vec<RefPoint> {
    let n = game.n_strategies();
    let mut refs: Vec<RefPoint> = (0..n)
        .map(|i| RefPoint::new(format!("e{i}"), SimplexState::vertex(n, i)))
        .collect();
    if let Some(eq) = game.known_equilibrium() {
        if refs.iter().all(|r| r.point.dist_inf(&eq) > 0.0) {
            refs.push(RefPoint::new("eq", eq));
        }
    }
    refs
}

/// Which comparators a run tracks.
#[derive(Clone, Debug, Default)]
pub struct ChannelConfig {
    /// Defaults to [`default_references`].
    pub references: Option<Vec<RefPoint>>,
    /// Base point of the deflated energy. Defaults to the known equilibrium, else uniform.
    pub energy_reference: Option<SimplexState>,
}

impl ChannelConfig {
    pub(crate) fn resolve(&self, game: &dyn PayoffField) -> (Vec<RefPoint>, SimplexState) {
        let refs = self
            .references
            .clone()
            .unwrap_or_else(|| default_references(game));
        let energy = self
            .energy_reference
            .clone()
            .or_else(|| game.known_equilibrium())
            .unwrap_or_else(|| SimplexState::uniform(game.n_strategies()));
        (refs, energy)
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Channels {
    pub gap: Series,
    pub reg_gap: Series,
    pub potential: Series,
    pub fenchel: Vec<Labeled>,
    pub regret: Vec<Labeled>,
    pub energy: Series,
    pub r_n: Series,
    /// Diagnostics outside the fixed CSV layout (summarized only).
    pub extra: Vec<Labeled>,
}

/// Values for one recorded index.
#[derive(Clone, Debug, Default)]
pub(crate) struct ChannelRow {
    pub gap: Option<f64>,
    pub reg_gap: Option<f64>,
    pub potential: Option<f64>,
    pub fenchel: Vec<Option<f64>>,
    pub regret: Vec<Option<f64>>,
    pub energy: Option<f64>,
    pub r_n: Option<f64>,
    pub extra: Vec<Option<f64>>,
}

fn finite(x: Option<f64>) -> Option<f64> {
    x.filter(|v| v.is_finite())
}

impl Channels {
    pub(crate) fn with_labels(refs: &[RefPoint], fenchel: bool, regret: bool, extra: &[&str]) -> Self {
        let lab = |l: &str| Labeled {
            label: l.to_string(),
            values: Vec::new(),
        };
        Channels {
            fenchel: if fenchel { refs.iter().map(|r| lab(&r.label)).collect() } else { Vec::new() },
            regret: if regret { refs.iter().map(|r| lab(&r.label)).collect() } else { Vec::new() },
            extra: extra.iter().map(|l| lab(l)).collect(),
            ..Default::default()
        }
    }

    pub(crate) fn push(&mut self, row: ChannelRow) {
        self.gap.push(finite(row.gap));
        self.reg_gap.push(finite(row.reg_gap));
        self.potential.push(finite(row.potential));
        self.energy.push(finite(row.energy));
        self.r_n.push(finite(row.r_n));
        for (ch, v) in self.fenchel.iter_mut().zip(row.fenchel) {
            ch.values.push(finite(v));
        }
        for (ch, v) in self.regret.iter_mut().zip(row.regret) {
            ch.values.push(finite(v));
        }
        for (ch, v) in self.extra.iter_mut().zip(row.extra) {
            ch.values.push(finite(v));
        }
    }

    pub fn fenchel(&self, label: &str) -> Option<&Series> {
        self.fenchel.iter().find(|c| c.label == label).map(|c| &c.values)
    }

    pub fn regret(&self, label: &str) -> Option<&Series> {
        self.regret.iter().find(|c| c.label == label).map(|c| &c.values)
    }

    pub fn extra(&self, label: &str) -> Option<&Series> {
        self.extra.iter().find(|c| c.label == label).map(|c| &c.values)
    }

    /// Every named series, in CSV column order followed by the extras.
    pub fn named(&self) -> Vec<(String, &Series)> {
        let mut out = vec![
            ("gap".to_string(), &self.gap),
            ("reg_gap".to_string(), &self.reg_gap),
            ("potential".to_string(), &self.potential),
        ];
        out.extend(self.fenchel.iter().map(|c| (format!("fenchel_{}", c.label), &c.values)));
        out.extend(self.regret.iter().map(|c| (format!("regret_{}", c.label), &c.values)));
        out.push(("energy".to_string(), &self.energy));
        out.push(("r_n".to_string(), &self.r_n));
        out.extend(self.extra.iter().map(|c| (c.label.clone(), &c.values)));
        out
    }
}

/// Largest increase between consecutive defined values; negative when the
/// series strictly decreases throughout.
pub fn max_increase(series: &Series) -> f64 {
    let vals: Vec<f64> = series.iter().flatten().copied().collect();
    vals.windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn last_defined(series: &Series) -> Option<f64> {
    series.iter().rev().flatten().next().copied()
}

/// Continuous-time trajectory sampled every `stride` integration steps.
#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryRecord {
    pub dynamic: &'static str,
    pub dt: f64,
    pub stride: usize,
    pub times: Vec<f64>,
    /// The integrated state. For the best-reply family this is the
    /// empirical-mean variable `x̄`; for dual averaging it is `Q(η_t y_t)`.
    pub states: Vec<SimplexState>,
    /// Running time average of `states`.
    pub means: Vec<SimplexState>,
    pub payoffs: Vec<Vec<f64>>,
    /// Score variable `y_t` (dual averaging only).
    pub scores: Option<Vec<Vec<f64>>>,
    pub references: Vec<RefPoint>,
    pub channels: Channels,
    /// Largest clamp-and-renormalize correction applied to any iterate.
    pub max_correction: f64,
    /// Best-reply switches located exactly (best-response dynamics only).
    pub events: usize,
    /// Last good integration step when a non-finite value stopped the run.
    pub aborted_at: Option<usize>,
}

/// Discrete-time run, one entry per step `n = 1..N`.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub dynamic: &'static str,
    pub steps: Vec<usize>,
    pub states: Vec<SimplexState>,
    pub means: Vec<SimplexState>,
    /// `v(x_n)`.
    pub payoffs: Vec<Vec<f64>>,
    /// `S_n` (dual averaging only).
    pub scores: Option<Vec<Vec<f64>>>,
    pub initial_score: Option<Vec<f64>>,
    /// `η_n` for `n = 1..N`; `η_0` is taken equal to `η_1`.
    pub learning_rates: Option<Vec<f64>>,
    /// Whether `x_1 = Q(η_0 S_0)`, which the first template step requires.
    pub first_state_consistent: bool,
    pub references: Vec<RefPoint>,
    pub channels: Channels,
    pub aborted_at: Option<usize>,
}

impl RunRecord {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn final_state(&self) -> &SimplexState {
        self.states.last().expect("runs have at least one step")
    }

    pub fn final_mean(&self) -> &SimplexState {
        self.means.last().expect("runs have at least one step")
    }
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> &SimplexState {
        self.states.last().expect("trajectories have at least one point")
    }

    pub fn final_mean(&self) -> &SimplexState {
        self.means.last().expect("trajectories have at least one point")
    }
}

/// Index column of a tabular view.
#[derive(Clone, Copy, Debug)]
pub enum IndexColumn<'a> {
    Time(&'a [f64]),
    Step(&'a [usize]),
}

/// Borrowed layout shared by both record kinds, used for CSV export.
pub struct TableView<'a> {
    pub index: IndexColumn<'a>,
    pub states: &'a [SimplexState],
    pub means: &'a [SimplexState],
    pub channels: &'a Channels,
}

impl TrajectoryRecord {
    pub fn table(&self) -> TableView<'_> {
        TableView {
            index: IndexColumn::Time(&self.times),
            states: &self.states,
            means: &self.means,
            channels: &self.channels,
        }
    }
}

impl RunRecord {
    pub fn table(&self) -> TableView<'_> {
        TableView {
            index: IndexColumn::Step(&self.steps),
            states: &self.states,
            means: &self.means,
            channels: &self.channels,
        }
    }
}

/// Running time average on a uniform grid with step `dt`: `x̄` equals the state
/// at the first two grid points and then follows the trapezoid rule for
/// `d x̄/dt = (x - x̄)/t`.
pub(crate) struct TimeAverage {
    mean: Vec<f64>,
    prev: Vec<f64>,
    k: usize,
    dt: f64,
}

impl TimeAverage {
    pub fn new(x0: &[f64], dt: f64) -> Self {
        TimeAverage {
            mean: x0.to_vec(),
            prev: x0.to_vec(),
            k: 0,
            dt,
        }
    }

    /// Feed the state at grid index `k + 1`.
    pub fn push(&mut self, x: &[f64]) {
        let k = self.k;
        if k == 0 {
            self.mean.copy_from_slice(x);
        } else {
            let t = k as f64 * self.dt;
            let t1 = (k + 1) as f64 * self.dt;
            for ((m, p), c) in self.mean.iter_mut().zip(&self.prev).zip(x) {
                *m = (t * *m + self.dt * 0.5 * (p + c)) / t1;
            }
        }
        self.prev.copy_from_slice(x);
        self.k += 1;
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
}

/// Recomputes the running average of a stride-1 trajectory.
pub fn recompute_time_average(states: &[SimplexState], dt: f64) -> Vec<Vec<f64>> {
    let Some(first) = states.first() else {
        return Vec::new();
    };
    let mut avg = TimeAverage::new(first.as_slice(), dt);
    let mut out = vec![avg.mean().to_vec()];
    for s in &states[1..] {
        avg.push(s.as_slice());
        out.push(avg.mean().to_vec());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_average_of_constant_is_constant() {
        let x = SimplexState::new(vec![0.2, 0.8]).unwrap();
        let states = vec![x.clone(); 50];
        for m in recompute_time_average(&states, 0.1) {
            assert!((m[0] - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn time_average_of_linear_path() {
        // The trapezoid rule is exact for linear integrands; the first
        // interval contributes dt·x(dt) because the mean starts there.
        let dt = 0.01;
        let states: Vec<SimplexState> = (0..=100)
            .map(|k| {
                let t = k as f64 * dt;
                SimplexState::new(vec![t, 1.0 - t]).unwrap()
            })
            .collect();
        let means = recompute_time_average(&states, dt);
        let last = means.last().unwrap()[0];
        let exact = 0.01 * 0.01 + (1.0 - 0.0001) / 2.0;
        assert!((last - exact).abs() < 1e-12, "{last} vs {exact}");
    }

    #[test]
    fn max_increase_skips_missing() {
        let s = vec![Some(3.0), None, Some(2.0), Some(2.5)];
        assert_eq!(max_increase(&s), 0.5);
        assert_eq!(last_defined(&s), Some(2.5));
    }
}
