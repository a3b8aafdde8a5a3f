//! Experiment orchestration behind the command-line tool.
//!
//! Every subcommand is a function of the settings and seed. Result files are
//! byte-identical across reruns; wall-clock timings go to `timing.log` only.

pub mod checks;
pub mod config;
pub mod io;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::games::{GameInstance, GameKind};
use crate::psro::PsroTrace;
use crate::solvers::{MetaSolver, MetaSolverParams};
use crate::train::{evaluate, held_out_games, train, TrainHistory};

pub use config::{Profile, Settings};
pub use io::{load_checkpoint, load_payoff_csv, save_checkpoint, ResultsRow, RESULTS_HEADER};

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Train,
    Eval { checkpoint: PathBuf, dims: Option<Vec<usize>> },
    Baselines,
    Sweep { dims: Option<Vec<usize>>, checkpoint: Option<PathBuf> },
    Gradcheck,
}

/// What a subcommand produced.
#[derive(Debug, Clone, Default)]
pub struct Report {
    /// Human-readable summary lines.
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
    /// False only when `gradcheck` found a failing check.
    pub passed: bool,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_CONFIG
    }
}

pub fn run(cmd: &Command, s: &Settings, exec: Execution) -> Result<Report> {
    s.experiment()?;
    fs::create_dir_all(&s.out_dir).map_err(|e| Error::io(&s.out_dir, e))?;
    let mut report = match cmd {
        Command::Train => run_train(s, exec),
        Command::Eval { checkpoint, dims } => run_eval(s, checkpoint, dims.as_deref(), exec),
        Command::Baselines => run_baselines(s, exec),
        Command::Sweep { dims, checkpoint } => run_sweep(s, dims.as_deref(), checkpoint.as_deref(), exec),
        Command::Gradcheck => run_gradcheck(s, exec),
    }?;
    report.files.sort();
    Ok(report)
}

fn write(report: &mut Report, s: &Settings, name: &str, text: &str) -> Result<()> {
    let path = s.out_dir.join(name);
    io::write_text(&path, text)?;
    report.files.push(path);
    Ok(())
}

/// Held-out games for evaluation: the loaded matrix for external games,
/// otherwise `eval_games` samples keyed by the run seed.
fn eval_games(s: &Settings, gos_dim: Option<usize>) -> Result<Vec<GameInstance>> {
    if s.game == GameKind::ExternalMatrix {
        let path = s.payoff_file.as_ref().expect("validated");
        return Ok(vec![load_payoff_csv(path)?]);
    }
    let mut game = s.game_config();
    if let Some(d) = gos_dim {
        game.gos_dim = d;
    }
    held_out_games(s.game, &game, s.seed, s.eval_games)
}

fn require_gos(s: &Settings, what: &str) -> Result<()> {
    if s.game == GameKind::Gos {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} needs game = \"gos\", got {}", s.game)))
    }
}

fn rows_for(s: &Settings, solver: &str, games: &[GameInstance], traces: &[PsroTrace]) -> Vec<ResultsRow> {
    let mut rows = Vec::new();
    for (g, tr) in games.iter().zip(traces) {
        let curve = if tr.curve.is_empty() {
            vec![tr.final_exploitability]
        } else {
            tr.curve.clone()
        };
        for (t, &v) in curve.iter().enumerate() {
            rows.push(ResultsRow {
                run_id: s.run_id.clone(),
                seed: s.seed,
                game_kind: g.kind().name().into(),
                game_seed: g.seed,
                solver: solver.into(),
                iteration: t,
                exploitability: v,
            });
        }
    }
    rows
}

fn mean_final(traces: &[PsroTrace]) -> f64 {
    traces.iter().map(|t| t.final_exploitability).sum::<f64>() / traces.len() as f64
}

#[derive(Serialize)]
struct StatsRow {
    step: usize,
    lr: f64,
    mean_exploitability: f64,
    grad_norm: f64,
}

fn history_rows(s: &Settings, solver: &str, h: &TrainHistory) -> Vec<ResultsRow> {
    let mut rows = Vec::new();
    for r in &h.records {
        for (&gs, &v) in r.game_seeds.iter().zip(&r.exploitabilities) {
            rows.push(ResultsRow {
                run_id: s.run_id.clone(),
                seed: s.seed,
                game_kind: s.game.name().into(),
                game_seed: gs,
                solver: solver.into(),
                iteration: r.step,
                exploitability: v,
            });
        }
    }
    rows
}

/// Trains, writing `checkpoint.json`, `history.csv` (one row per meta-step
/// and training game), `train_stats.csv` and the `timing.log` sidecar.
pub fn train_and_save(s: &Settings, exec: Execution, report: &mut Report) -> Result<MetaSolverParams> {
    let (params, history) = train(&s.train_config(), s.seed, exec)?;
    let solver = MetaSolver::Learned(params.clone()).label();
    write(report, s, "checkpoint.json", &io::checkpoint_json(&params))?;
    write(report, s, "history.csv", &io::csv_string(&history_rows(s, &solver, &history), RESULTS_HEADER)?)?;
    let stats: Vec<StatsRow> = history
        .records
        .iter()
        .map(|r| StatsRow {
            step: r.step,
            lr: r.lr,
            mean_exploitability: r.mean_exploitability,
            grad_norm: r.grad_norm,
        })
        .collect();
    write(report, s, "train_stats.csv", &io::csv_string(&stats, "step,lr,mean_exploitability,grad_norm")?)?;
    let timing: String = history
        .wall_seconds
        .iter()
        .enumerate()
        .map(|(i, w)| format!("meta_step {i} seconds {w:.3}\n"))
        .collect();
    // The sidecar is not a result file and is left out of the report.
    io::write_text(&s.out_dir.join("timing.log"), &timing)?;
    if let Some(last) = history.records.last() {
        report
            .lines
            .push(format!("trained {} meta-steps; last mean exploitability {:.6}", history.records.len(), last.mean_exploitability));
    } else {
        report.lines.push("no meta-steps configured; saved the initial solver".into());
    }
    Ok(params)
}

fn run_train(s: &Settings, exec: Execution) -> Result<Report> {
    let mut report = Report {
        passed: true,
        ..Report::default()
    };
    train_and_save(s, exec, &mut report)?;
    Ok(report)
}

fn run_eval(s: &Settings, checkpoint: &Path, dims: Option<&[usize]>, exec: Execution) -> Result<Report> {
    let params = load_checkpoint(checkpoint)?;
    let solver = MetaSolver::Learned(params);
    let label = solver.label();
    let psro = s.psro();
    let mut report = Report {
        passed: true,
        ..Report::default()
    };
    let targets: Vec<(Option<usize>, String)> = match dims {
        None => vec![(None, "results.csv".into())],
        Some(ds) => {
            require_gos(s, "--dims")?;
            ds.iter().map(|&d| (Some(d), format!("results_dim{d}.csv"))).collect()
        }
    };
    for (dim, file) in targets {
        let games = eval_games(s, dim)?;
        let traces = evaluate(&solver, &games, &psro, true, exec)?;
        write(&mut report, s, &file, &io::csv_string(&rows_for(s, &label, &games, &traces), RESULTS_HEADER)?)?;
        report.lines.push(format!("{file}: {label} mean final exploitability {:.6}", mean_final(&traces)));
    }
    Ok(report)
}

fn run_baselines(s: &Settings, exec: Execution) -> Result<Report> {
    let games = eval_games(s, None)?;
    let psro = s.psro();
    let mut report = Report {
        passed: true,
        ..Report::default()
    };
    let mut rows = Vec::new();
    for b in &s.baselines {
        let solver = b.solver(s.nash_fp_iterations);
        let traces = evaluate(&solver, &games, &psro, true, exec)?;
        report.lines.push(format!("{b}: mean final exploitability {:.6}", mean_final(&traces)));
        rows.extend(rows_for(s, &solver.label(), &games, &traces));
    }
    write(&mut report, s, "baselines.csv", &io::csv_string(&rows, RESULTS_HEADER)?)?;
    Ok(report)
}

#[derive(Serialize)]
struct SweepRow {
    dim: usize,
    solver: String,
    mean_final_exploitability: f64,
    std_final_exploitability: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Trains at the configured dimension (unless a checkpoint is given), then
/// evaluates the solver and every baseline at each sweep dimension.
fn run_sweep(s: &Settings, dims: Option<&[usize]>, checkpoint: Option<&Path>, exec: Execution) -> Result<Report> {
    require_gos(s, "sweep")?;
    let dims = dims.unwrap_or(&s.sweep_dims);
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::Config("sweep needs at least one positive dimension".into()));
    }
    let mut report = Report {
        passed: true,
        ..Report::default()
    };
    let params = match checkpoint {
        Some(p) => load_checkpoint(p)?,
        None => train_and_save(s, exec, &mut report)?,
    };
    let mut solvers = vec![MetaSolver::Learned(params)];
    solvers.extend(s.baselines.iter().map(|b| b.solver(s.nash_fp_iterations)));
    let psro = s.psro();
    let mut rows = Vec::new();
    for &d in dims {
        let games = eval_games(s, Some(d))?;
        for solver in &solvers {
            let finals: Vec<f64> = evaluate(solver, &games, &psro, false, exec)?
                .iter()
                .map(|t| t.final_exploitability)
                .collect();
            let (mean, std) = mean_std(&finals);
            report.lines.push(format!("dim {d} {}: {mean:.6} ± {std:.6}", solver.label()));
            rows.push(SweepRow {
                dim: d,
                solver: solver.label(),
                mean_final_exploitability: mean,
                std_final_exploitability: std,
            });
        }
    }
    write(
        &mut report,
        s,
        "sweep.csv",
        &io::csv_string(&rows, "dim,solver,mean_final_exploitability,std_final_exploitability")?,
    )?;
    Ok(report)
}

#[derive(Serialize)]
struct CheckRow {
    check: &'static str,
    instances: usize,
    statistic: f64,
    threshold: f64,
    passed: bool,
}

fn run_gradcheck(s: &Settings, exec: Execution) -> Result<Report> {
    let outcomes = vec![
        checks::direct_vs_finite_differences(5, exec)?,
        checks::implicit_vs_unrolled(3, exec)?,
        checks::es_calibration(5, exec)?.outcome,
    ];
    let mut report = Report {
        passed: outcomes.iter().all(|o| o.passed),
        lines: outcomes.iter().map(checks::CheckOutcome::line).collect(),
        files: Vec::new(),
    };
    let rows: Vec<CheckRow> = outcomes
        .iter()
        .map(|o| CheckRow {
            check: o.name,
            instances: o.instances,
            statistic: o.statistic,
            threshold: o.threshold,
            passed: o.passed,
        })
        .collect();
    write(&mut report, s, "gradcheck.csv", &io::csv_string(&rows, "check,instances,statistic,threshold,passed")?)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(dir: &Path) -> Settings {
        let mut s = Settings::defaults(Profile::Desk, GameKind::Gos);
        s.out_dir = dir.to_path_buf();
        s.gos_dim = 5;
        s.psro_iterations = 2;
        s.window_size = 2;
        s.meta_training_steps = 2;
        s.meta_batch_size = 2;
        s.es_perturbations = 2;
        s.eval_games = 2;
        s.nash_fp_iterations = 50;
        s.hidden_size = 3;
        s
    }

    #[test]
    fn train_then_eval_on_dims() {
        let dir = tempfile::tempdir().unwrap();
        let s = tiny(dir.path());
        run(&Command::Train, &s, Execution::Parallel).unwrap();
        let ck = dir.path().join("checkpoint.json");
        let r = run(
            &Command::Eval {
                checkpoint: ck,
                dims: Some(vec![6, 7]),
            },
            &s,
            Execution::Parallel,
        )
        .unwrap();
        assert_eq!(r.files.len(), 2);
        let rows = io::read_results(&dir.path().join("results_dim7.csv")).unwrap();
        assert_eq!(rows.len(), 2 * 3);
        assert!(rows.iter().all(|r| r.solver == "learned_mlp"));
    }

    #[test]
    fn eval_and_baselines_share_game_seeds() {
        let dir = tempfile::tempdir().unwrap();
        let s = tiny(dir.path());
        run(&Command::Train, &s, Execution::Sequential).unwrap();
        run(
            &Command::Eval {
                checkpoint: dir.path().join("checkpoint.json"),
                dims: None,
            },
            &s,
            Execution::Sequential,
        )
        .unwrap();
        run(&Command::Baselines, &s, Execution::Sequential).unwrap();
        let eval = io::read_results(&dir.path().join("results.csv")).unwrap();
        let base = io::read_results(&dir.path().join("baselines.csv")).unwrap();
        let seeds = |rows: &[ResultsRow]| rows.iter().map(|r| (r.game_seed, r.iteration)).collect::<Vec<_>>();
        let uniform: Vec<ResultsRow> = base.into_iter().filter(|r| r.solver == "uniform").collect();
        assert_eq!(seeds(&eval), seeds(&uniform));
    }

    #[test]
    fn sweep_requires_gos() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = tiny(dir.path());
        s.game = GameKind::Rps2d;
        let e = run(
            &Command::Sweep {
                dims: Some(vec![3]),
                checkpoint: None,
            },
            &s,
            Execution::Sequential,
        )
        .unwrap_err();
        assert_eq!(exit_code(&e), EXIT_CONFIG);
    }

    #[test]
    fn numeric_errors_map_to_exit_three() {
        assert_eq!(exit_code(&Error::NonFinite("x")), EXIT_NUMERIC);
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
    }

    #[test]
    fn sample_std_of_constant_is_zero() {
        assert_eq!(mean_std(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        assert_eq!(mean_std(&[1.0]), (1.0, 0.0));
        assert_eq!(mean_std(&[1.0, 3.0]).1, 2f64.sqrt());
    }
}
