//! Single experiments: config in, `trajectory.csv` and `summary.json` out.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use popdyn_core::record::IndexColumn;
use popdyn_core::{
    integrate_brd, integrate_dad, integrate_rbrd, integrate_vbrd, run_da, run_fp, run_rfp, run_vrfp,
    score_for_state, ChannelConfig, DaInit, PayoffField, PopdynError, RefPoint, Regularizer, RunRecord,
    Schedule, SimplexState, TableView, TrajectoryRecord,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Dynamic, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::io::write_csv;
use crate::summary::{ChannelStats, RunSummary, SCHEMA_VERSION};

pub const OUTPUT_ENV: &str = "POPDYN_OUT";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.json";

pub enum Record {
    Continuous(TrajectoryRecord),
    Discrete(RunRecord),
}

impl Record {
    pub fn table(&self) -> TableView<'_> {
        match self {
            Record::Continuous(r) => r.table(),
            Record::Discrete(r) => r.table(),
        }
    }

    pub fn aborted_at(&self) -> Option<usize> {
        match self {
            Record::Continuous(r) => r.aborted_at,
            Record::Discrete(r) => r.aborted_at,
        }
    }
}

fn config_err(field: &str, e: PopdynError) -> HarnessError {
    match e {
        PopdynError::InvalidParameter { name, reason } => HarnessError::Config {
            field: name.to_string(),
            message: reason,
        },
        PopdynError::InvalidState(_)
        | PopdynError::DimensionMismatch { .. }
        | PopdynError::NonSquare { .. }
        | PopdynError::Domain { .. } => HarnessError::Config {
            field: field.to_string(),
            message: e.to_string(),
        },
        other => HarnessError::Model(other),
    }
}

fn state(field: &str, w: &[f64]) -> Result<SimplexState> {
    SimplexState::new(w.to_vec()).map_err(|e| config_err(field, e))
}

fn initial_state(cfg: &ExperimentConfig, n: usize) -> Result<SimplexState> {
    match &cfg.initial_state {
        Some(w) => {
            let x = state("initial_state", w)?;
            x.check_dim(n).map_err(|e| config_err("initial_state", e))?;
            Ok(x)
        }
        None => Ok(SimplexState::sample_uniform(n, &mut ChaCha8Rng::seed_from_u64(cfg.seed))),
    }
}

fn channel_config(cfg: &ExperimentConfig) -> Result<ChannelConfig> {
    let references = match &cfg.references {
        Some(refs) => Some(
            refs.iter()
                .map(|r| Ok(RefPoint::new(r.label.clone(), state("references", &r.point)?)))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let energy_reference = cfg.energy_reference.as_ref().map(|w| state("energy_reference", w)).transpose()?;
    Ok(ChannelConfig {
        references,
        energy_reference,
    })
}

fn constant_eps(cfg: &ExperimentConfig) -> f64 {
    match cfg.eps {
        Some(Schedule::Constant { value }) => value,
        _ => unreachable!("validated"),
    }
}

/// Runs the dynamics described by `cfg` without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<Record> {
    cfg.validate()?;
    let game = cfg.game.build().map_err(|e| config_err("game", e))?;
    let g: &dyn PayoffField = game.as_ref();
    let n = g.n_strategies();
    let reg = cfg.regularizer.map(|k| k.build(n));
    let reg_ref = || -> &dyn Regularizer { reg.as_deref().expect("validated") };
    let channels = channel_config(cfg)?;
    let wrap = |e: PopdynError| config_err("initial_state", e);
    Ok(match cfg.dynamic {
        Dynamic::Fp => Record::Discrete(run_fp(g, &initial_state(cfg, n)?, cfg.steps.unwrap(), &channels).map_err(wrap)?),
        Dynamic::Rfp => Record::Discrete(
            run_rfp(g, reg_ref(), constant_eps(cfg), &initial_state(cfg, n)?, cfg.steps.unwrap(), &channels)
                .map_err(wrap)?,
        ),
        Dynamic::Vrfp => Record::Discrete(
            run_vrfp(g, reg_ref(), cfg.eps.as_ref().unwrap(), &initial_state(cfg, n)?, cfg.steps.unwrap(), &channels)
                .map_err(wrap)?,
        ),
        Dynamic::Da => {
            let x1 = match cfg.initial_state {
                Some(_) => Some(initial_state(cfg, n)?),
                None => None,
            };
            let init = DaInit {
                s0: cfg.initial_score.clone(),
                x1,
            };
            Record::Discrete(run_da(g, reg_ref(), cfg.eta.as_ref().unwrap(), &init, cfg.steps.unwrap(), &channels).map_err(wrap)?)
        }
        Dynamic::Brd => Record::Continuous(
            integrate_brd(g, &initial_state(cfg, n)?, cfg.horizon.unwrap(), cfg.dt.unwrap()).map_err(wrap)?,
        ),
        Dynamic::Rbrd => Record::Continuous(
            integrate_rbrd(g, reg_ref(), constant_eps(cfg), &initial_state(cfg, n)?, cfg.horizon.unwrap(), cfg.dt.unwrap())
                .map_err(wrap)?,
        ),
        Dynamic::Vbrd => Record::Continuous(
            integrate_vbrd(g, reg_ref(), cfg.eps.as_ref().unwrap(), &initial_state(cfg, n)?, cfg.horizon.unwrap(), cfg.dt.unwrap())
                .map_err(wrap)?,
        ),
        Dynamic::Dad => {
            let eta = cfg.eta.as_ref().unwrap();
            let y0 = match (&cfg.initial_score, &cfg.initial_state) {
                (Some(y), _) => y.clone(),
                (None, Some(_)) => {
                    let eta0 = eta.at(0.0);
                    score_for_state(reg_ref(), &initial_state(cfg, n)?, eta0).map_err(|e| config_err("eta", e))?
                }
                (None, None) => vec![0.0; n],
            };
            Record::Continuous(
                integrate_dad(g, reg_ref(), eta, &y0, cfg.horizon.unwrap(), cfg.dt.unwrap(), &channels).map_err(|e| config_err("initial_score", e))?,
            )
        }
    })
}

/// Builds the summary of an executed record and evaluates the attached assertions.
pub fn summarize(cfg: &ExperimentConfig, record: &Record, wall_time_s: f64) -> Result<RunSummary> {
    let view = record.table();
    let rows = view.states.len();
    if rows == 0 {
        return Err(HarnessError::Format {
            what: "record",
            message: "no rows recorded".into(),
        });
    }
    let (index, terminal_index) = match view.index {
        IndexColumn::Time(t) => ("t", t[rows - 1]),
        IndexColumn::Step(s) => ("n", s[rows - 1] as f64),
    };
    let (stride, dt, events, max_correction) = match record {
        Record::Continuous(r) => (r.stride, Some(r.dt), Some(r.events), Some(r.max_correction)),
        Record::Discrete(_) => (1, None, None, None),
    };
    let channels: Vec<ChannelStats> = view
        .channels
        .named()
        .into_iter()
        .map(|(name, series)| ChannelStats::from_series(&name, series))
        .collect();
    let last = |s: &[Option<f64>]| s.last().copied().flatten();
    let mut summary = RunSummary {
        schema_version: SCHEMA_VERSION.to_string(),
        config_hash: cfg.hash(),
        dynamic: cfg.dynamic,
        game: cfg.game.build().map(|g| g.name().to_string()).unwrap_or_default(),
        index: index.to_string(),
        terminal_index,
        terminal_state: view.states[rows - 1].as_slice().to_vec(),
        terminal_mean: view.means[rows - 1].as_slice().to_vec(),
        terminal_gap: last(&view.channels.gap),
        terminal_reg_gap: last(&view.channels.reg_gap),
        rows,
        stride,
        dt,
        events,
        max_correction,
        aborted_at: record.aborted_at(),
        channels,
        wall_time_s,
        assertions: Vec::new(),
        passed: true,
    };
    summary.assertions = cfg.effective_assertions().iter().map(|a| summary.evaluate(a)).collect();
    summary.passed = summary.aborted_at.is_none() && summary.assertions.iter().all(|a| a.passed);
    Ok(summary)
}

/// `POPDYN_OUT` when set, else the working directory.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

/// Directory a run writes into: `output` under `root`, or `runs/<dynamic>-<hash prefix>`.
pub fn run_dir(cfg: &ExperimentConfig, root: &Path) -> PathBuf {
    match &cfg.output {
        Some(out) => root.join(out),
        None => root.join("runs").join(format!("{}-{}", cfg.dynamic, &cfg.hash()[..12])),
    }
}

pub fn write_run(dir: &Path, cfg: &ExperimentConfig, record: &Record, summary: &RunSummary) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(format!("creating {}", dir.display()), e))?;
    let csv_path = dir.join(TRAJECTORY_FILE);
    let file = fs::File::create(&csv_path).map_err(|e| HarnessError::io(format!("creating {}", csv_path.display()), e))?;
    write_csv(&record.table(), BufWriter::new(file)).map_err(|e| HarnessError::io(format!("writing {}", csv_path.display()), e))?;
    for (name, body) in [(SUMMARY_FILE, summary.to_json()), (CONFIG_FILE, cfg.to_json())] {
        let path = dir.join(name);
        fs::write(&path, body + "\n").map_err(|e| HarnessError::io(format!("writing {}", path.display()), e))?;
    }
    Ok(())
}

pub fn run_experiment_in(cfg: &ExperimentConfig, root: &Path) -> Result<RunSummary> {
    let start = Instant::now();
    let record = execute(cfg)?;
    let summary = summarize(cfg, &record, start.elapsed().as_secs_f64())?;
    write_run(&run_dir(cfg, root), cfg, &record, &summary)?;
    Ok(summary)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    run_experiment_in(cfg, &output_root())
}
