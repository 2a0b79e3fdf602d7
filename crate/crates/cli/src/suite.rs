//! The invariant suite behind `popdyn check`, driven by versioned fixtures.

use std::fmt;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use popdyn_core::record::max_increase;
use popdyn_core::simplex::{dist_l2, norm_inf};
use popdyn_core::{
    brute_force_equilibria, fenchel_zone_monitor, integrate_brd, integrate_dad, integrate_rbrd,
    integrate_replicator, integrate_vbrd, projection_rhs, run_da, run_fp, run_rfp, score_for_state,
    solve_regularized_equilibrium, template_inequality_check, ChannelConfig, DaInit, Entropic,
    Euclidean, FixedPointOptions, GameSpec, PayoffField, Regularizer, RunRecord, Schedule,
    SimplexState, BUILTIN_GAMES,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{HarnessError, Result};

pub const FIXTURES: &str = include_str!("../fixtures/acceptance.json");
pub const FIXTURE_MAJOR: &str = "1";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixtures {
    pub schema_version: String,
    pub regularizer_analytics: RegularizerFixture,
    pub brd_gap_decay: GapDecayFixture,
    pub brd_potential_ascent: PotentialFixture,
    pub rbrd_lyapunov: RbrdFixture,
    pub vbrd_convergence: VbrdFixture,
    pub dad_regret: DadRegretFixture,
    pub equivalences: EquivalenceFixture,
    pub gess_continuous: GessContinuousFixture,
    pub template: TemplateFixture,
    pub gess_discrete: GessDiscreteFixture,
    pub da_time_average: DaAverageFixture,
    pub fictitious_play: FpFixture,
    pub random_matching: RandomMatchingFixture,
    pub oracle: OracleFixture,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizerFixture {
    pub seed: u64,
    pub vectors: usize,
    pub pairs: usize,
    pub min_dim: usize,
    pub max_dim: usize,
    pub score_range: f64,
    pub fd_step: f64,
    pub fd_rel_tol: f64,
    pub coupling_tol: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapDecayFixture {
    pub game: String,
    pub x0: Vec<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub factor: f64,
    pub additive: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialFixture {
    pub game: String,
    pub x0: Vec<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub slack: f64,
    pub terminal_gap: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbrdFixture {
    pub game: String,
    pub x0: Vec<f64>,
    pub eps: f64,
    pub dt: f64,
    pub horizon: f64,
    pub slack: f64,
    pub distance: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameStart {
    pub game: String,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VbrdFixture {
    pub runs: Vec<GameStart>,
    pub eps: Schedule,
    pub dt: f64,
    pub horizon: f64,
    pub terminal_gap: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DadRegretFixture {
    pub game: String,
    pub eta: f64,
    pub dt: f64,
    pub horizon: f64,
    pub slack: f64,
    /// Further runs checked against `F(p, y0)/η`, the bound for a general start.
    pub extra_runs: Vec<GameStart>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceFixture {
    pub game: String,
    pub x0: Vec<f64>,
    pub replicator_dt: f64,
    pub replicator_horizon: f64,
    pub replicator_tol: f64,
    pub euclidean_y0: Vec<f64>,
    pub euclidean_dt: f64,
    pub euclidean_horizon: f64,
    pub euclidean_tol: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GessContinuousFixture {
    pub game: String,
    pub x0: Vec<f64>,
    pub eta: Schedule,
    pub dt: f64,
    pub horizon: f64,
    pub distance: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateFixture {
    pub tol: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GessDiscreteFixture {
    pub game: String,
    pub x1: Vec<f64>,
    pub eta: Schedule,
    pub steps: usize,
    pub distance: f64,
    pub zone_level: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DaAverageFixture {
    pub game: String,
    pub x1: Vec<f64>,
    pub eta: Schedule,
    pub steps: usize,
    pub distance: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpFixture {
    pub fp_game: String,
    pub fp_x1: Vec<f64>,
    pub fp_steps: usize,
    pub fp_distance: f64,
    pub rfp_eps: f64,
    pub rfp_steps: usize,
    pub rfp_distance: f64,
    pub congestion_game: String,
    pub congestion_x1: Vec<f64>,
    pub congestion_steps: usize,
    pub congestion_gap: f64,
    pub max_seconds: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomMatchingFixture {
    pub matrix: Vec<Vec<f64>>,
    pub eps: Vec<f64>,
    pub steps: usize,
    pub tol: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleFixture {
    pub grid_step: f64,
    pub solver_eps: f64,
    /// Residual target; only agreement to within the lattice spacing matters here.
    pub solver_tol: f64,
    pub start_step: f64,
    pub coordination_clusters: usize,
}

impl Fixtures {
    pub fn parse(text: &str) -> Result<Self> {
        let fmt = |message: String| HarnessError::Format {
            what: "fixtures",
            message,
        };
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| fmt(e.to_string()))?;
        let version = raw.get("schema_version").and_then(|v| v.as_str()).unwrap_or("");
        if version.split('.').next() != Some(FIXTURE_MAJOR) {
            return Err(fmt(format!("unsupported schema_version `{version}`")));
        }
        serde_json::from_value(raw).map_err(|e| fmt(e.to_string()))
    }

    pub fn bundled() -> Self {
        Self::parse(FIXTURES).expect("bundled fixtures parse")
    }
}

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{mark}  {:<24} {:>7.2}s  {}", self.id, self.seconds, self.detail)
    }
}

/// Outcome of one criterion: pass flag and a one-line account of the numbers.
type Outcome = Result<(bool, String)>;

fn game(name: &str) -> Result<Arc<dyn PayoffField>> {
    Ok(GameSpec::builtin(name).build()?)
}

fn state(w: &[f64]) -> Result<SimplexState> {
    Ok(SimplexState::new(w.to_vec())?)
}

fn regs(n: usize) -> [Box<dyn Regularizer>; 2] {
    [Box::new(Entropic::new(n)), Box::new(Euclidean::new(n))]
}

fn last(series: &[Option<f64>]) -> f64 {
    series.iter().rev().flatten().next().copied().unwrap_or(f64::NAN)
}

fn first(series: &[Option<f64>]) -> f64 {
    series.iter().flatten().next().copied().unwrap_or(f64::NAN)
}

/// Shared discrete runs; the template criterion revisits all of them.
pub struct Suite {
    pub fixtures: Fixtures,
    gess_da: OnceLock<Result<RunRecord, String>>,
    rps_da: OnceLock<Result<RunRecord, String>>,
    matching: OnceLock<Result<Vec<(f64, RunRecord, RunRecord)>, String>>,
}

fn cached<'a, T>(cell: &'a OnceLock<Result<T, String>>, f: impl FnOnce() -> Result<T>) -> Result<&'a T> {
    cell.get_or_init(|| f().map_err(|e| e.to_string()))
        .as_ref()
        .map_err(|e| HarnessError::Format {
            what: "suite run",
            message: e.clone(),
        })
}

pub type Criterion = fn(&Suite) -> Outcome;

pub const CRITERIA: &[(&str, Criterion)] = &[
    ("regularizer-analytics", Suite::regularizer_analytics),
    ("brd-gap-decay", Suite::brd_gap_decay),
    ("brd-potential-ascent", Suite::brd_potential_ascent),
    ("rbrd-lyapunov", Suite::rbrd_lyapunov),
    ("vbrd-convergence", Suite::vbrd_convergence),
    ("dad-regret-bound", Suite::dad_regret),
    ("dynamics-equivalence", Suite::equivalences),
    ("gess-attraction-ct", Suite::gess_continuous),
    ("template-inequality", Suite::template),
    ("gess-attraction-da", Suite::gess_discrete),
    ("da-time-average", Suite::da_time_average),
    ("fictitious-play", Suite::fictitious_play),
    ("random-matching", Suite::random_matching),
    ("oracle-equivalence", Suite::oracle),
];

impl Suite {
    pub fn new(fixtures: Fixtures) -> Self {
        Suite {
            fixtures,
            gess_da: OnceLock::new(),
            rps_da: OnceLock::new(),
            matching: OnceLock::new(),
        }
    }

    pub fn run_one(&self, id: &'static str, criterion: Criterion) -> CriterionResult {
        let start = Instant::now();
        let (passed, detail) = match criterion(self) {
            Ok(out) => out,
            Err(e) => (false, format!("error: {e}")),
        };
        CriterionResult {
            id,
            passed,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    /// Runs every criterion in order, calling `report` as each finishes.
    pub fn run_all(&self, mut report: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
        CRITERIA
            .iter()
            .map(|(id, c)| {
                let r = self.run_one(id, *c);
                report(&r);
                r
            })
            .collect()
    }

    fn regularizer_analytics(&self) -> Outcome {
        let f = &self.fixtures.regularizer_analytics;
        let mut rng = ChaCha8Rng::seed_from_u64(f.seed);
        let draw_score = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let n = rng.random_range(f.min_dim..=f.max_dim);
            (0..n).map(|_| rng.random_range(-f.score_range..f.score_range)).collect()
        };
        let mut fd_worst: f64 = 0.0;
        for _ in 0..f.vectors {
            let y = draw_score(&mut rng);
            for reg in regs(y.len()) {
                let mut q = vec![0.0; y.len()];
                reg.choice_into(&y, &mut q);
                let mut err: f64 = 0.0;
                for i in 0..y.len() {
                    let (mut yp, mut ym) = (y.clone(), y.clone());
                    yp[i] += f.fd_step;
                    ym[i] -= f.fd_step;
                    let fd = (reg.conjugate(&yp) - reg.conjugate(&ym)) / (2.0 * f.fd_step);
                    err = err.max((fd - q[i]).abs());
                }
                fd_worst = fd_worst.max(err / norm_inf(&q));
            }
        }
        let mut coupling_worst: f64 = 0.0;
        for _ in 0..f.pairs {
            let y = draw_score(&mut rng);
            let p = SimplexState::sample_uniform(y.len(), &mut rng);
            for reg in regs(y.len()) {
                let mut q = vec![0.0; y.len()];
                reg.choice_into(&y, &mut q);
                let d: Vec<f64> = q.iter().zip(p.as_slice()).map(|(a, b)| a - b).collect();
                let nd = reg.norm().norm(&d);
                let coupling = reg.fenchel(p.as_slice(), &y);
                let violation = (-coupling).max(0.5 * reg.modulus() * nd * nd - coupling);
                coupling_worst = coupling_worst.max(violation);
            }
        }
        Ok((
            fd_worst <= f.fd_rel_tol && coupling_worst <= f.coupling_tol,
            format!(
                "choice vs FD conjugate gradient rel {fd_worst:.2e} (≤ {:.0e}); coupling violation {coupling_worst:.2e} (≤ {:.0e})",
                f.fd_rel_tol, f.coupling_tol
            ),
        ))
    }

    fn brd_gap_decay(&self) -> Outcome {
        let f = &self.fixtures.brd_gap_decay;
        let g = game(&f.game)?;
        let tr = integrate_brd(g.as_ref(), &state(&f.x0)?, f.horizon, f.dt)?;
        let g0 = first(&tr.channels.gap);
        let gt = last(&tr.channels.gap);
        let t = *tr.times.last().unwrap();
        let bound = g0 * (-t).exp() * f.factor + f.additive;
        Ok((gt <= bound, format!("gap(T) {gt:.3e} ≤ {bound:.3e}; {} switch events", tr.events)))
    }

    fn brd_potential_ascent(&self) -> Outcome {
        let f = &self.fixtures.brd_potential_ascent;
        let g = game(&f.game)?;
        let tr = integrate_brd(g.as_ref(), &state(&f.x0)?, f.horizon, f.dt)?;
        let neg: Vec<Option<f64>> = tr.channels.potential.iter().map(|p| p.map(|v| -v)).collect();
        let drop = max_increase(&neg).max(0.0);
        let gt = last(&tr.channels.gap);
        Ok((
            drop <= f.slack && gt <= f.terminal_gap,
            format!("largest potential drop {drop:.2e} (≤ {:.0e}); gap(T) {gt:.2e} (≤ {:.0e})", f.slack, f.terminal_gap),
        ))
    }

    fn rbrd_lyapunov(&self) -> Outcome {
        let f = &self.fixtures.rbrd_lyapunov;
        let g = game(&f.game)?;
        let n = g.n_strategies();
        let tr = integrate_rbrd(g.as_ref(), &Entropic::new(n), f.eps, &state(&f.x0)?, f.horizon, f.dt)?;
        let rise = max_increase(&tr.channels.reg_gap).max(0.0);
        let target = solve_regularized_equilibrium(g.as_ref(), &Entropic::new(n), f.eps, &SimplexState::uniform(n), &FixedPointOptions::default())?;
        let d = dist_l2(tr.final_state().as_slice(), target.point.as_slice());
        Ok((
            rise <= f.slack && d <= f.distance,
            format!("largest rise of regularized gap {rise:.2e} (≤ {:.0e}); distance to logit point {d:.2e} (≤ {:.0e})", f.slack, f.distance),
        ))
    }

    fn vbrd_convergence(&self) -> Outcome {
        let f = &self.fixtures.vbrd_convergence;
        let mut ok = true;
        let mut parts = Vec::new();
        for run in &f.runs {
            let g = game(&run.game)?;
            let n = g.n_strategies();
            let x0 = run.x0.as_deref().map(state).transpose()?.unwrap_or_else(|| SimplexState::uniform(n));
            let tr = integrate_vbrd(g.as_ref(), &Entropic::new(n), &f.eps, &x0, f.horizon, f.dt)?;
            let gt = last(&tr.channels.gap);
            ok &= gt <= f.terminal_gap;
            parts.push(format!("{} {gt:.2e}", run.game));
        }
        Ok((ok, format!("gap(T): {} (≤ {:.0e})", parts.join(", "), f.terminal_gap)))
    }

    fn dad_regret(&self) -> Outcome {
        let f = &self.fixtures.dad_regret;
        let eta = Schedule::constant(f.eta);
        let max_regret = |g: &dyn PayoffField, reg: &dyn Regularizer, y0: &[f64]| -> Result<Vec<f64>> {
            let n = g.n_strategies();
            let refs = (0..n)
                .map(|i| popdyn_core::RefPoint::new(format!("e{i}"), SimplexState::vertex(n, i)))
                .collect();
            let cc = ChannelConfig {
                references: Some(refs),
                energy_reference: None,
            };
            let tr = integrate_dad(g, reg, &eta, y0, f.horizon, f.dt, &cc)?;
            Ok(tr.channels.regret.iter().map(|c| c.values.iter().flatten().fold(f64::NEG_INFINITY, |m, v| m.max(*v))).collect())
        };
        let g = game(&f.game)?;
        let n = g.n_strategies();
        let reg = Entropic::new(n);
        let worst = max_regret(g.as_ref(), &reg, &vec![0.0; n])?.into_iter().fold(f64::NEG_INFINITY, f64::max);
        let bound = reg.omega() / f.eta + f.slack;
        let mut ok = worst <= bound;
        let mut extra_worst = f64::NEG_INFINITY;
        for run in &f.extra_runs {
            let g = game(&run.game)?;
            let n = g.n_strategies();
            let reg = Entropic::new(n);
            let y0 = match &run.x0 {
                Some(x) => score_for_state(&reg, &state(x)?, f.eta)?,
                None => vec![0.0; n],
            };
            for (i, r) in max_regret(g.as_ref(), &reg, &y0)?.into_iter().enumerate() {
                let b = reg.fenchel(SimplexState::vertex(n, i).as_slice(), &y0) / f.eta;
                extra_worst = extra_worst.max(r - b);
                ok &= r <= b + f.slack;
            }
        }
        Ok((
            ok,
            format!(
                "max vertex regret {worst:.3e} ≤ {bound:.4}; other starts exceed F(p, y0)/η by at most {extra_worst:.3e} over {} runs",
                f.extra_runs.len()
            ),
        ))
    }

    fn equivalences(&self) -> Outcome {
        let f = &self.fixtures.equivalences;
        let g = game(&f.game)?;
        let n = g.n_strategies();
        let x0 = state(&f.x0)?;
        let ent = Entropic::new(n);
        let y0 = score_for_state(&ent, &x0, 1.0)?;
        let dad = integrate_dad(g.as_ref(), &ent, &Schedule::constant(1.0), &y0, f.replicator_horizon, f.replicator_dt, &ChannelConfig::default())?;
        let rep = integrate_replicator(g.as_ref(), &x0, f.replicator_horizon, f.replicator_dt)?;
        let rep_gap = dad
            .states
            .iter()
            .zip(&rep.states)
            .map(|(a, b)| a.dist_inf(b))
            .fold(0.0, f64::max);

        let euc = Euclidean::new(n);
        let tr = integrate_dad(g.as_ref(), &euc, &Schedule::constant(1.0), &f.euclidean_y0, f.euclidean_horizon, f.euclidean_dt, &ChannelConfig::default())?;
        if tr.stride != 1 {
            return Err(HarnessError::Format {
                what: "fixtures",
                message: "euclidean comparison needs every integration step recorded".into(),
            });
        }
        let mut proj_gap: f64 = 0.0;
        let mut checked = 0;
        for k in 1..tr.states.len() - 1 {
            let s = tr.states[k].support();
            if tr.states[k - 1].support() != s || tr.states[k + 1].support() != s {
                continue;
            }
            let rhs = projection_rhs(g.as_ref(), &tr.states[k])?;
            for i in 0..n {
                let d = (tr.states[k + 1].as_slice()[i] - tr.states[k - 1].as_slice()[i]) / (2.0 * tr.dt);
                proj_gap = proj_gap.max((d - rhs[i]).abs());
            }
            checked += 1;
        }
        Ok((
            rep_gap <= f.replicator_tol && proj_gap <= f.euclidean_tol && checked > 0,
            format!(
                "entropic vs replicator sup {rep_gap:.2e} (≤ {:.0e}); euclidean vs projection {proj_gap:.2e} (≤ {:.0e}) at {checked} points",
                f.replicator_tol, f.euclidean_tol
            ),
        ))
    }

    fn gess_continuous(&self) -> Outcome {
        let f = &self.fixtures.gess_continuous;
        let g = game(&f.game)?;
        let n = g.n_strategies();
        let reg = Entropic::new(n);
        let y0 = score_for_state(&reg, &state(&f.x0)?, f.eta.at(0.0))?;
        let tr = integrate_dad(g.as_ref(), &reg, &f.eta, &y0, f.horizon, f.dt, &ChannelConfig::default())?;
        let d = dist_l2(tr.final_state().as_slice(), SimplexState::uniform(n).as_slice());
        Ok((d <= f.distance, format!("‖x_T - uniform‖ {d:.2e} (≤ {:.0e})", f.distance)))
    }

    fn gess_da(&self) -> Result<&RunRecord> {
        cached(&self.gess_da, || {
            let f = &self.fixtures.gess_discrete;
            let g = game(&f.game)?;
            let init = DaInit {
                s0: None,
                x1: Some(state(&f.x1)?),
            };
            Ok(run_da(g.as_ref(), &Entropic::new(g.n_strategies()), &f.eta, &init, f.steps, &ChannelConfig::default())?)
        })
    }

    fn rps_da(&self) -> Result<&RunRecord> {
        cached(&self.rps_da, || {
            let f = &self.fixtures.da_time_average;
            let g = game(&f.game)?;
            let init = DaInit {
                s0: None,
                x1: Some(state(&f.x1)?),
            };
            Ok(run_da(g.as_ref(), &Entropic::new(g.n_strategies()), &f.eta, &init, f.steps, &ChannelConfig::default())?)
        })
    }

    fn matching_game(&self) -> Result<Arc<dyn PayoffField>> {
        Ok(GameSpec::Matrix {
            matrix: self.fixtures.random_matching.matrix.clone(),
            offset: None,
            name: Some("matching".into()),
        }
        .build()?)
    }

    /// `(eps, dual averaging run, regularized fictitious play run)` per weight.
    fn matching_runs(&self) -> Result<&Vec<(f64, RunRecord, RunRecord)>> {
        cached(&self.matching, || {
            let f = &self.fixtures.random_matching;
            let g = self.matching_game()?;
            let n = g.n_strategies();
            let reg = Entropic::new(n);
            f.eps
                .iter()
                .map(|&eps| {
                    let eta = Schedule::power(1.0 / eps, 1.0, 0.0);
                    let da = run_da(g.as_ref(), &reg, &eta, &DaInit::default(), f.steps, &ChannelConfig::default())?;
                    let rfp = run_rfp(g.as_ref(), &reg, eps, &SimplexState::uniform(n), f.steps, &ChannelConfig::default())?;
                    Ok((eps, da, rfp))
                })
                .collect()
        })
    }

    fn template(&self) -> Outcome {
        let tol = self.fixtures.template.tol;
        let mut runs: Vec<(String, Arc<dyn PayoffField>, &RunRecord)> = vec![
            ("gess".into(), game(&self.fixtures.gess_discrete.game)?, self.gess_da()?),
            ("rps".into(), game(&self.fixtures.da_time_average.game)?, self.rps_da()?),
        ];
        for (eps, da, _) in self.matching_runs()? {
            runs.push((format!("matching eps={eps}"), self.matching_game()?, da));
        }
        let mut worst = f64::NEG_INFINITY;
        let mut ok = true;
        let mut steps = 0;
        for (label, g, rec) in &runs {
            let n = g.n_strategies();
            let reg = Entropic::new(n);
            let mut refs: Vec<SimplexState> = (0..n).map(|i| SimplexState::vertex(n, i)).collect();
            refs.push(SimplexState::uniform(n));
            for p in &refs {
                let rep = template_inequality_check(rec, &reg, p)?;
                if rep.max_violation > worst {
                    worst = rep.max_violation;
                }
                ok &= rep.max_violation <= tol && rep.first_step_checked;
                steps += rep.steps_checked;
                if !rep.first_step_checked {
                    return Ok((false, format!("{label}: first step could not be checked")));
                }
            }
        }
        Ok((ok, format!("max violation {worst:.2e} (≤ {tol:.0e}) over {} runs, {steps} step checks", runs.len())))
    }

    fn gess_discrete(&self) -> Outcome {
        let f = &self.fixtures.gess_discrete;
        let rec = self.gess_da()?;
        let n = rec.final_state().dim();
        let u = SimplexState::uniform(n);
        let d = dist_l2(rec.final_state().as_slice(), u.as_slice());
        let zone = fenchel_zone_monitor(rec, &Entropic::new(n), &u, &[f.zone_level], 0)?;
        let lvl = &zone.levels[0];
        let ok = d <= f.distance && lvl.first_entry.is_some() && lvl.exits == 0 && lvl.absorbed;
        Ok((
            ok,
            format!(
                "‖x_N - uniform‖ {d:.2e} (≤ {:.0e}); zone {:.0e} entered at n={}, exits {}",
                f.distance,
                f.zone_level,
                lvl.first_entry.map(|k| (k + 1).to_string()).unwrap_or_else(|| "never".into()),
                lvl.exits
            ),
        ))
    }

    fn da_time_average(&self) -> Outcome {
        let f = &self.fixtures.da_time_average;
        let rec = self.rps_da()?;
        let n = rec.final_mean().dim();
        let d = dist_l2(rec.final_mean().as_slice(), SimplexState::uniform(n).as_slice());
        Ok((d <= f.distance, format!("‖x̄_N - uniform‖ {d:.2e} (≤ {:.0e})", f.distance)))
    }

    fn fictitious_play(&self) -> Outcome {
        let f = &self.fixtures.fictitious_play;
        let start = Instant::now();
        let g = game(&f.fp_game)?;
        let n = g.n_strategies();
        let u = SimplexState::uniform(n);
        let fp = run_fp(g.as_ref(), &state(&f.fp_x1)?, f.fp_steps, &ChannelConfig::default())?;
        let d_fp = fp.final_mean().dist_inf(&u);
        let reg = Entropic::new(n);
        let logit = solve_regularized_equilibrium(g.as_ref(), &reg, f.rfp_eps, &u, &FixedPointOptions::default())?;
        let rfp = run_rfp(g.as_ref(), &reg, f.rfp_eps, &state(&f.fp_x1)?, f.rfp_steps, &ChannelConfig::default())?;
        let d_rfp = rfp.final_mean().dist_inf(&logit.point);
        let cg = game(&f.congestion_game)?;
        let cfp = run_fp(cg.as_ref(), &state(&f.congestion_x1)?, f.congestion_steps, &ChannelConfig::default())?;
        let gap = last(&cfp.channels.gap);
        let secs = start.elapsed().as_secs_f64();
        Ok((
            d_fp <= f.fp_distance && d_rfp <= f.rfp_distance && gap <= f.congestion_gap && secs <= f.max_seconds,
            format!(
                "FP ‖x̄_N - uniform‖∞ {d_fp:.2e} (≤ {:.0e}); RFP to logit {d_rfp:.2e} (≤ {:.0e}); congestion gap {gap:.2e} (≤ {:.0e}); {secs:.1}s",
                f.fp_distance, f.rfp_distance, f.congestion_gap
            ),
        ))
    }

    fn random_matching(&self) -> Outcome {
        let tol = self.fixtures.random_matching.tol;
        let mut worst: f64 = 0.0;
        let mut parts = Vec::new();
        for (eps, da, rfp) in self.matching_runs()? {
            let dev = da
                .states
                .iter()
                .zip(&rfp.states)
                .map(|(a, b)| a.dist_inf(b))
                .fold(0.0, f64::max);
            worst = worst.max(dev);
            parts.push(format!("eps={eps}: {dev:.1e}"));
        }
        Ok((worst <= tol, format!("per-step deviation {} (≤ {tol:.0e})", parts.join(", "))))
    }

    fn oracle(&self) -> Outcome {
        let f = &self.fixtures.oracle;
        let mut ok = true;
        let mut parts = Vec::new();
        for name in BUILTIN_GAMES {
            let g = game(name)?;
            let n = g.n_strategies();
            let oracle = brute_force_equilibria(g.as_ref(), f.grid_step)?;
            let reg = Entropic::new(n);
            let m = (1.0 / f.start_step).round() as usize;
            let mut starts = vec![SimplexState::uniform(n)];
            lattice(n, m, &mut Vec::new(), &mut starts);
            let mut solved = Vec::new();
            for s in &starts {
                match solve_with_continuation(g.as_ref(), &reg, f.solver_eps, f.solver_tol, s) {
                    Ok(p) => solved.push(p),
                    Err(e) => {
                        ok = false;
                        parts.push(format!("{name}: solver failed from {:?}: {e}", s.as_slice()));
                    }
                }
            }
            let far = solved.iter().map(|p| oracle.distance_to(p)).fold(0.0, f64::max);
            // A cluster is matched when any member lies within one spacing of a
            // solver output; its lowest-gap member can sit further out.
            let unmatched = oracle
                .clusters
                .iter()
                .filter(|c| {
                    !c.iter().any(|&i| solved.iter().any(|p| p.dist_inf(&oracle.points[i].state) <= oracle.spacing))
                })
                .count();
            ok &= far <= oracle.spacing && unmatched == 0;
            if *name == "coordination" {
                ok &= oracle.clusters.len() == f.coordination_clusters;
            }
            parts.push(format!("{name} {}/{far:.1e}", oracle.clusters.len()));
        }
        Ok((ok, format!("clusters/worst solver distance (≤ spacing): {}", parts.join(", "))))
    }
}

/// Direct damped iteration at `eps`; when that stalls, warm-started
/// continuation through `1, 0.1, ...` down to `eps`. Rotational games such
/// as RPS need the second route at small weights: near the logit point the
/// linearized iteration has eigenvalues of size `1/eps` off the real axis.
fn solve_with_continuation(g: &dyn PayoffField, reg: &dyn Regularizer, eps: f64, tol: f64, x0: &SimplexState) -> Result<SimplexState> {
    let opts = FixedPointOptions {
        tol,
        ..Default::default()
    };
    match solve_regularized_equilibrium(g, reg, eps, x0, &opts) {
        Ok(c) => return Ok(c.point),
        Err(popdyn_core::PopdynError::NonConvergence { .. }) => {}
        Err(e) => return Err(e.into()),
    }
    // The residual of a warm start grows like 1/eps, so earlier stages solve
    // proportionally tighter.
    let mut x = x0.clone();
    let mut e = 1.0_f64.max(eps);
    loop {
        let stage = FixedPointOptions {
            tol: tol * eps / e,
            ..opts.clone()
        };
        x = solve_regularized_equilibrium(g, reg, e, &x, &stage)?.point;
        if e <= eps {
            return Ok(x);
        }
        e = (e * 0.1).max(eps);
    }
}

fn lattice(n: usize, m: usize, prefix: &mut Vec<usize>, out: &mut Vec<SimplexState>) {
    let used: usize = prefix.iter().sum();
    if prefix.len() == n - 1 {
        let mut w: Vec<f64> = prefix.iter().map(|k| *k as f64 / m as f64).collect();
        w.push((m - used) as f64 / m as f64);
        out.push(SimplexState::new(w).expect("lattice point"));
        return;
    }
    for k in 0..=m - used {
        prefix.push(k);
        lattice(n, m, prefix, out);
        prefix.pop();
    }
}
