use std::fs;
use std::path::Path;
use std::process::Command;

use popdyn_cli::io::read_csv;
use popdyn_cli::run::{SUMMARY_FILE, TRAJECTORY_FILE};
use popdyn_cli::sweep::SWEEP_FILE;
use popdyn_cli::{run_experiment_in, run_sweep_in, ExperimentConfig, RunSummary};
use serde_json::json;

fn config(v: serde_json::Value) -> ExperimentConfig {
    ExperimentConfig::from_json(&v.to_string()).unwrap()
}

fn popdyn(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_popdyn"))
        .args(args)
        .env("POPDYN_OUT", out)
        .output()
        .unwrap()
}

fn one_of_each() -> Vec<serde_json::Value> {
    let rps = json!({"kind": "builtin", "name": "rps"});
    let cong = json!({"kind": "builtin", "name": "congestion_1_2"});
    vec![
        json!({"game": rps, "dynamic": "fp", "steps": 500, "initial_state": [0.6, 0.3, 0.1]}),
        json!({"game": rps, "dynamic": "rfp", "regularizer": "entropic", "eps": {"kind": "constant", "value": 0.5}, "steps": 300}),
        json!({"game": cong, "dynamic": "vrfp", "regularizer": "euclidean", "eps": {"kind": "power", "scale": 1.0, "exponent": 0.5}, "steps": 300, "seed": 3}),
        json!({"game": rps, "dynamic": "da", "regularizer": "entropic", "eta": {"kind": "power", "scale": 1.0, "exponent": 0.5}, "steps": 400, "initial_state": [0.5, 0.3, 0.2]}),
        json!({"game": rps, "dynamic": "brd", "horizon": 3.0, "dt": 1e-3, "initial_state": [0.6, 0.3, 0.1]}),
        json!({"game": cong, "dynamic": "rbrd", "regularizer": "entropic", "eps": {"kind": "constant", "value": 0.2}, "horizon": 5.0, "dt": 1e-2}),
        json!({"game": rps, "dynamic": "vbrd", "regularizer": "entropic", "eps": {"kind": "power", "scale": 1.0, "exponent": 1.0, "offset": 1.0}, "horizon": 5.0, "dt": 1e-2}),
        json!({"game": rps, "dynamic": "dad", "regularizer": "euclidean", "eta": {"kind": "constant", "value": 1.0}, "horizon": 150.0, "dt": 1e-3, "initial_score": [0.5, 0.0, -0.5]}),
    ]
}

#[test]
fn summaries_round_trip_through_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    for (i, v) in one_of_each().into_iter().enumerate() {
        let mut v = v;
        v["output"] = format!("run{i}").into();
        let cfg = config(v);
        let summary = run_experiment_in(&cfg, dir.path()).unwrap();
        let run = dir.path().join(format!("run{i}"));
        let table = read_csv(fs::read(run.join(TRAJECTORY_FILE)).unwrap().as_slice()).unwrap();
        assert_eq!(table.rows(), summary.rows);
        let d = summary.discrepancy_with(&table).unwrap();
        assert!(d <= 1e-9, "{}: {d}", cfg.dynamic);
        let back = RunSummary::from_json(&fs::read_to_string(run.join(SUMMARY_FILE)).unwrap()).unwrap();
        assert_eq!(back, summary);
        assert!(table.header[0] == "t" || table.header[0] == "n");
        let gap_col = table.header.iter().position(|h| h == "gap").unwrap();
        assert_eq!(gap_col, 1 + 2 * summary.terminal_state.len());
    }
}

#[test]
fn continuous_runs_cap_recorded_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = one_of_each().pop().unwrap();
    let summary = run_experiment_in(&config(cfg), dir.path()).unwrap();
    assert_eq!(summary.stride, 15);
    assert!(summary.rows <= 10_001);
    assert_eq!(summary.terminal_index, 150.0);
}

#[test]
fn identical_configs_give_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    for v in one_of_each() {
        let mut a = v.clone();
        a["output"] = "a".into();
        let mut b = v;
        b["output"] = "b".into();
        run_experiment_in(&config(a), dir.path()).unwrap();
        run_experiment_in(&config(b), dir.path()).unwrap();
        let csv_a = fs::read(dir.path().join("a").join(TRAJECTORY_FILE)).unwrap();
        let csv_b = fs::read(dir.path().join("b").join(TRAJECTORY_FILE)).unwrap();
        assert!(csv_a == csv_b);
    }
}

#[test]
fn seed_picks_the_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let base = json!({"game": {"kind": "builtin", "name": "gess"}, "dynamic": "fp", "steps": 5});
    let run = |seed: u64, out: &str| {
        let mut v = base.clone();
        v["seed"] = seed.into();
        v["output"] = out.into();
        run_experiment_in(&config(v), dir.path()).unwrap().terminal_state
    };
    assert_eq!(run(1, "a"), run(1, "b"));
    assert_ne!(run(1, "c"), run(2, "d"));
}

#[test]
fn fictitious_play_on_rps_reaches_small_gap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(json!({
        "game": {"kind": "builtin", "name": "rps"}, "dynamic": "fp", "steps": 100000,
        "initial_state": [0.6, 0.3, 0.1],
        "assertions": [{"name": "gap", "quantity": {"kind": "channel", "channel": "gap", "stat": "final"}, "max": 5e-3}]
    }));
    let s = run_experiment_in(&cfg, dir.path()).unwrap();
    assert!(s.passed, "{:?}", s.assertions);
}

#[test]
fn best_response_flow_raises_the_potential() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(json!({
        "game": {"kind": "builtin", "name": "congestion_1_2"}, "dynamic": "brd", "horizon": 50.0, "dt": 1e-3,
        "initial_state": [0.1, 0.9]
    }));
    let s = run_experiment_in(&cfg, dir.path()).unwrap();
    let p = s.channel("potential").unwrap();
    assert!(p.last.unwrap() >= p.initial.unwrap());
    assert!(p.max_decrease.unwrap() <= 1e-9);
}

// The logit point of the congestion game sits O(eps) away from equilibrium,
// so shrinking the weight lowers the terminal gap. On RPS every logit point
// is the equilibrium and the ordering reverses at this horizon.
#[test]
fn eps_sweep_orders_terminal_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let sweep_gaps = |game: &str, x1: serde_json::Value| -> Vec<f64> {
        let base = config(json!({
            "game": {"kind": "builtin", "name": game}, "dynamic": "rfp", "regularizer": "entropic",
            "eps": {"kind": "constant", "value": 1.0}, "steps": 2000, "initial_state": x1, "output": game
        }));
        let sweep = run_sweep_in(&base, "eps.value", &[1.0, 0.1, 0.01], dir.path()).unwrap();
        let root = dir.path().join(game);
        assert!(root.join(SWEEP_FILE).exists());
        for r in &sweep.runs {
            assert!(root.join(&r.directory).join(TRAJECTORY_FILE).exists());
        }
        sweep.runs.iter().map(|r| r.summary.terminal_gap.unwrap()).collect()
    };
    let gaps = sweep_gaps("congestion_1_2", json!([0.1, 0.9]));
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    let gaps = sweep_gaps("rps", json!([0.6, 0.3, 0.1]));
    assert!(gaps.windows(2).all(|w| w[1] > w[0]), "{gaps:?}");
}

#[test]
fn eta_exponent_sweep_converges_on_gess() {
    let dir = tempfile::tempdir().unwrap();
    let base = config(json!({
        "game": {"kind": "builtin", "name": "gess"}, "dynamic": "da", "regularizer": "entropic",
        "eta": {"kind": "power", "scale": 1.0, "exponent": 0.5}, "steps": 20000,
        "initial_state": [0.7, 0.2, 0.1], "output": "eta"
    }));
    let sweep = run_sweep_in(&base, "eta.exponent", &[0.25, 0.5, 0.75], dir.path()).unwrap();
    // Slower schedules leave a larger residual after the same number of steps.
    let tol = [1e-6, 1e-4, 1e-2];
    for (r, t) in sweep.runs.iter().zip(tol) {
        let x = &r.summary.terminal_state;
        let d = x.iter().map(|v| (v - 1.0 / 3.0).abs()).fold(0.0, f64::max);
        assert!(d <= t, "exponent {}: {d}", r.value);
    }
}

#[test]
fn empty_sweep_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let base = config(json!({"game": {"kind": "builtin", "name": "rps"}, "dynamic": "fp", "steps": 10, "output": "s"}));
    let sweep = run_sweep_in(&base, "steps", &[], dir.path()).unwrap();
    assert!(sweep.runs.is_empty());
    assert!(!dir.path().join("s").exists());
    assert!(run_sweep_in(&base, "no.such.path", &[1.0], dir.path()).unwrap_err().is_config());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(popdyn(&["run", "missing.json"], dir.path()).status.code(), Some(2));
    assert_eq!(popdyn(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(popdyn(&[], dir.path()).status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, json!({"game": {"kind": "builtin", "name": "rps"}, "dynamic": "fp", "regularizer": "entropic", "steps": 10}).to_string()).unwrap();
    let out = popdyn(&["run", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("regularizer"));

    let failing = dir.path().join("failing.json");
    fs::write(&failing, json!({
        "game": {"kind": "builtin", "name": "rps"}, "dynamic": "fp", "steps": 10, "initial_state": [0.6, 0.3, 0.1],
        "output": "failing",
        "assertions": [{"name": "gap", "quantity": {"kind": "channel", "channel": "gap", "stat": "final"}, "max": 1e-12}]
    }).to_string()).unwrap();
    assert_eq!(popdyn(&["run", failing.to_str().unwrap()], dir.path()).status.code(), Some(1));
    assert!(dir.path().join("failing").join(SUMMARY_FILE).exists(), "POPDYN_OUT sets the output root");

    let ok = dir.path().join("ok.json");
    fs::write(&ok, json!({"game": {"kind": "builtin", "name": "rps"}, "dynamic": "fp", "steps": 10, "output": "ok"}).to_string()).unwrap();
    assert_eq!(popdyn(&["run", ok.to_str().unwrap()], dir.path()).status.code(), Some(0));
    let out = popdyn(&["sweep", ok.to_str().unwrap(), "--axis", "steps", "--values", "5,7"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("ok").join(SWEEP_FILE).exists());
    assert_eq!(popdyn(&["sweep", ok.to_str().unwrap(), "--axis", "steps", "--values", "x"], dir.path()).status.code(), Some(2));
}

#[test]
fn informational_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = popdyn(&["list-games"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for name in popdyn_cli::core::BUILTIN_GAMES {
        assert!(text.contains(name));
    }
    assert!(text.contains("slopes [1.0, 2.0]"));
    let out = popdyn(&["version"], dir.path());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("popdyn "));
}

#[test]
fn check_passes_on_a_clean_tree() {
    let dir = tempfile::tempdir().unwrap();
    let out = popdyn(&["check"], dir.path());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), popdyn_cli::CRITERIA.len());
}
