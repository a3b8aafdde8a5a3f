//! The PSRO loop driven by an arbitrary meta-solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::games::{GameInstance, Seat};
use crate::oracles::{best_response, exploitability, exploitability_two, ExploitMode, OracleConfig};
use crate::population::{
    evaluate_meta_game, evaluate_meta_game_two, extend_meta_game, extend_meta_game_two, PayoffMatrix,
    Population, Side,
};
use crate::seed::{derive_seed, rng_from, stream};
use crate::solvers::MetaSolver;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsroConfig {
    /// Number of best responses added (T).
    pub iterations: usize,
    /// Random policies in the initial population.
    pub pool_size: usize,
    /// Oracle that expands the population.
    pub oracle: OracleConfig,
    /// Oracle that measures exploitability.
    pub exploit_oracle: OracleConfig,
    pub exploit_mode: ExploitMode,
}

impl PsroConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pool_size == 0 {
            return Err(Error::Config("initial pool size must be at least 1".into()));
        }
        self.oracle.validate()?;
        self.exploit_oracle.validate()
    }
}

/// Exploitability after each PSRO iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PsroTrace {
    /// `curve[t]` is the exploitability of `π_t` over `Φ_t`, for
    /// `t = 0..=T`; empty when only the final value was requested.
    pub curve: Vec<f64>,
    pub final_exploitability: f64,
    pub meta_game: PayoffMatrix,
}

pub(crate) fn br_seed(seed: u64, t: usize) -> u64 {
    derive_seed(&[seed, t as u64])
}

pub(crate) fn exploit_seed(seed: u64, t: usize) -> u64 {
    derive_seed(&[stream::EXPLOIT, seed, t as u64])
}

pub(crate) fn initial_pool(game: &GameInstance, side: Side, size: usize, seed: u64) -> Result<Population> {
    let salt = match side {
        Side::Single | Side::Row => 0,
        Side::Col => 1,
    };
    Population::random(game, side, size, &mut rng_from(&[stream::INIT_POOL, seed, salt]))
}

/// Runs T iterations of PSRO. With `curve` set, exploitability is measured
/// at every iteration, otherwise only at the end.
pub fn run_psro(
    game: &GameInstance,
    solver: &MetaSolver,
    cfg: &PsroConfig,
    seed: u64,
    curve: bool,
    exec: Execution,
) -> Result<PsroTrace> {
    cfg.validate()?;
    cfg.oracle.compatible_with(game.kind())?;
    if game.symmetric() {
        run_single(game, solver, cfg, seed, curve, exec)
    } else {
        run_two(game, solver, cfg, seed, curve, exec)
    }
}

fn run_single(
    game: &GameInstance,
    solver: &MetaSolver,
    cfg: &PsroConfig,
    seed: u64,
    curve: bool,
    exec: Execution,
) -> Result<PsroTrace> {
    let mut pop = initial_pool(game, Side::Single, cfg.pool_size, seed)?;
    let mut m = evaluate_meta_game(game, &pop, exec)?;
    let mut values = Vec::new();
    let exploit = |pi: &[f64], pop: &Population, t: usize| {
        exploitability(game, pi, pop, &cfg.exploit_oracle, cfg.exploit_mode, exploit_seed(seed, t))
    };
    for t in 0..cfg.iterations {
        let pi = solver.distribution(&m)?;
        if curve {
            values.push(exploit(pi.weights(), &pop, t)?);
        }
        let br = best_response(game, pi.weights(), &pop, &cfg.oracle, br_seed(seed, t), Seat::Row)?;
        pop = pop.extend(game, br)?;
        m = extend_meta_game(game, &m, &pop, exec)?;
    }
    let pi = solver.distribution(&m)?;
    let last = exploit(pi.weights(), &pop, cfg.iterations)?;
    values.push(last);
    Ok(PsroTrace {
        curve: if curve { values } else { Vec::new() },
        final_exploitability: last,
        meta_game: m,
    })
}

fn run_two(
    game: &GameInstance,
    solver: &MetaSolver,
    cfg: &PsroConfig,
    seed: u64,
    curve: bool,
    exec: Execution,
) -> Result<PsroTrace> {
    let mut rows = initial_pool(game, Side::Row, cfg.pool_size, seed)?;
    let mut cols = initial_pool(game, Side::Col, cfg.pool_size, seed)?;
    let mut m = evaluate_meta_game_two(game, &rows, &cols, exec)?;
    let mut values = Vec::new();
    let exploit = |rp: &[f64], rows: &Population, cp: &[f64], cols: &Population, t: usize| {
        exploitability_two(game, rp, rows, cp, cols, &cfg.exploit_oracle, exploit_seed(seed, t))
    };
    for t in 0..cfg.iterations {
        let row_pi = solver.distribution(&m)?;
        let col_pi = solver.distribution(&m.negated_transpose())?;
        if curve {
            values.push(exploit(row_pi.weights(), &rows, col_pi.weights(), &cols, t)?);
        }
        let s = br_seed(seed, t);
        let row_br = best_response(game, col_pi.weights(), &cols, &cfg.oracle, derive_seed(&[s, 0]), Seat::Row)?;
        let col_br = best_response(game, row_pi.weights(), &rows, &cfg.oracle, derive_seed(&[s, 1]), Seat::Col)?;
        rows = rows.extend(game, row_br)?;
        cols = cols.extend(game, col_br)?;
        m = extend_meta_game_two(game, &m, &rows, &cols, exec)?;
    }
    let row_pi = solver.distribution(&m)?;
    let col_pi = solver.distribution(&m.negated_transpose())?;
    let last = exploit(row_pi.weights(), &rows, col_pi.weights(), &cols, cfg.iterations)?;
    values.push(last);
    Ok(PsroTrace {
        curve: if curve { values } else { Vec::new() },
        final_exploitability: last,
        meta_game: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{sample_game, GameConfig, GameKind};
    use crate::oracles::OracleMethod;

    fn gos_cfg() -> PsroConfig {
        PsroConfig {
            iterations: 4,
            pool_size: 1,
            oracle: OracleConfig::gd(5, 25.0),
            exploit_oracle: OracleConfig::gd(5, 25.0),
            exploit_mode: ExploitMode::Exact,
        }
    }

    #[test]
    fn population_grows_by_one_per_iteration() {
        let game = sample_game(GameKind::Gos, &GameConfig { gos_dim: 10, ..GameConfig::default() }, 1).unwrap();
        let trace = run_psro(&game, &MetaSolver::Uniform, &gos_cfg(), 3, true, Execution::Sequential).unwrap();
        assert_eq!(trace.meta_game.rows(), 5);
        assert_eq!(trace.curve.len(), 5);
        assert_eq!(trace.curve[4], trace.final_exploitability);
        assert!(trace.meta_game.antisymmetry_error() == 0.0);
    }

    #[test]
    fn execution_modes_agree() {
        let game = sample_game(GameKind::Lotto, &GameConfig { lotto_servers: 3, ..GameConfig::default() }, 1).unwrap();
        let mut cfg = gos_cfg();
        cfg.oracle = OracleConfig::gd(3, 0.5);
        cfg.exploit_oracle = cfg.oracle;
        cfg.exploit_mode = ExploitMode::Oracle;
        let a = run_psro(&game, &MetaSolver::Nash { fp_iters: 500 }, &cfg, 2, true, Execution::Sequential).unwrap();
        let b = run_psro(&game, &MetaSolver::Nash { fp_iters: 500 }, &cfg, 2, true, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_population_imp_runs() {
        let game = sample_game(GameKind::Imp, &GameConfig::default(), 4).unwrap();
        let cfg = PsroConfig {
            iterations: 2,
            pool_size: 1,
            oracle: OracleConfig::reinforce(2, 10.0, 8),
            exploit_oracle: OracleConfig::reinforce(2, 10.0, 8),
            exploit_mode: ExploitMode::Oracle,
        };
        let trace = run_psro(&game, &MetaSolver::Uniform, &cfg, 0, false, Execution::Sequential).unwrap();
        assert_eq!(trace.meta_game.rows(), 3);
        assert!(trace.curve.is_empty());
    }

    #[test]
    fn kuhn_oracle_mismatch_is_an_error() {
        let game = sample_game(GameKind::Gos, &GameConfig { gos_dim: 4, ..GameConfig::default() }, 0).unwrap();
        let mut cfg = gos_cfg();
        cfg.oracle = OracleConfig::kuhn(OracleMethod::KuhnExact);
        assert!(run_psro(&game, &MetaSolver::Uniform, &cfg, 0, false, Execution::Sequential).is_err());
    }
}
