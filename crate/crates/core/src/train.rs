//! Outer training loop for learned meta-solvers, plus held-out evaluation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::es::{es_gradient, update_params, EsConfig, PerturbKey};
use crate::exec::Execution;
use crate::games::{sample_game, GameConfig, GameInstance, GameKind};
use crate::metagrad::{direct_meta_gradient, implicit_meta_gradient, MetaGradConfig};
use crate::psro::{run_psro, PsroConfig, PsroTrace};
use crate::real::l2_norm;
use crate::seed::{derive_seed, stream};
use crate::solvers::{init_params, Arch, MetaSolver, MetaSolverParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainerMode {
    #[default]
    Es,
    Direct,
    Implicit,
}

/// Settings that only matter for [`TrainerMode::Implicit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImplicitSettings {
    pub lambda: f64,
    pub stationarity_tol: f64,
    pub max_inner_steps: usize,
    pub max_condition: f64,
}

impl Default for ImplicitSettings {
    fn default() -> Self {
        let d = MetaGradConfig::default();
        Self {
            lambda: d.lambda,
            stationarity_tol: d.stationarity_tol,
            max_inner_steps: d.max_inner_steps,
            max_condition: d.max_condition,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub game_kind: GameKind,
    pub game: GameConfig,
    pub arch: Arch,
    pub width: usize,
    pub psro: PsroConfig,
    /// Differentiated PSRO iterations (direct and implicit modes).
    pub window: usize,
    pub mode: TrainerMode,
    pub es: EsConfig,
    pub implicit: ImplicitSettings,
    pub meta_steps: usize,
    /// Games sampled per meta-step (K).
    pub meta_batch: usize,
    pub outer_lr: f64,
    /// Multiply the learning rate by `lr_gamma` every `lr_step` meta-steps.
    pub lr_step: Option<usize>,
    pub lr_gamma: f64,
    pub clip: Option<f64>,
    /// Gradient norms above this abort training.
    pub gradient_ceiling: f64,
}

pub const DEFAULT_GRADIENT_CEILING: f64 = 1e6;

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.width == 0 {
            return bad("meta-solver width must be positive".into());
        }
        if self.meta_batch == 0 {
            return bad("meta_batch_size must be at least 1".into());
        }
        if !(self.outer_lr > 0.0 && self.outer_lr.is_finite()) {
            return bad(format!("outer_lr must be positive, got {}", self.outer_lr));
        }
        if self.lr_step == Some(0) {
            return bad("lr_schedule_step must be at least 1".into());
        }
        if !(self.lr_gamma > 0.0 && self.lr_gamma <= 1.0) {
            return bad(format!("lr_schedule_gamma must lie in (0, 1], got {}", self.lr_gamma));
        }
        if self.clip.is_some_and(|c| !(c > 0.0)) {
            return bad("gradient_clip must be positive".into());
        }
        if !(self.gradient_ceiling > 0.0) {
            return bad("gradient ceiling must be positive".into());
        }
        if self.game_kind == GameKind::ExternalMatrix {
            return bad("training needs a game distribution; external matrices are evaluation-only".into());
        }
        self.psro.validate()?;
        self.psro.oracle.compatible_with(self.game_kind)?;
        match self.mode {
            TrainerMode::Es => self.es.validate(),
            TrainerMode::Direct | TrainerMode::Implicit => {
                if !self.game_kind.is_differentiable() {
                    return Err(Error::UnsupportedKind {
                        kind: self.game_kind.name(),
                        what: "meta-gradients through the best-response oracle",
                    });
                }
                self.metagrad().validate()
            }
        }
    }

    pub fn metagrad(&self) -> MetaGradConfig {
        MetaGradConfig {
            iterations: self.psro.iterations,
            window: self.window,
            pool_size: self.psro.pool_size,
            oracle: self.psro.oracle,
            exploit_oracle: self.psro.exploit_oracle,
            lambda: self.implicit.lambda,
            stationarity_tol: self.implicit.stationarity_tol,
            max_inner_steps: self.implicit.max_inner_steps,
            max_condition: self.implicit.max_condition,
        }
    }

    pub fn lr_at(&self, step: usize) -> f64 {
        match self.lr_step {
            Some(s) => self.outer_lr * self.lr_gamma.powi((step / s) as i32),
            None => self.outer_lr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: usize,
    pub lr: f64,
    pub game_seeds: Vec<u64>,
    /// Exploitability of each training game at θ before the update.
    pub exploitabilities: Vec<f64>,
    pub mean_exploitability: f64,
    /// Norm before clipping.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub records: Vec<TrainRecord>,
    /// Seconds per meta-step, kept apart so that records stay reproducible.
    pub wall_seconds: Vec<f64>,
}

pub fn train_game_seed(run_seed: u64, step: usize, k: usize) -> u64 {
    derive_seed(&[stream::TRAIN_GAMES, run_seed, step as u64, k as u64])
}

pub fn held_out_seed(run_seed: u64, j: usize) -> u64 {
    derive_seed(&[stream::HELD_OUT, run_seed, j as u64])
}

/// Trains from a freshly initialised solver.
pub fn train(cfg: &TrainConfig, run_seed: u64, exec: Execution) -> Result<(MetaSolverParams, TrainHistory)> {
    cfg.validate()?;
    let params = init_params(cfg.arch, cfg.width, run_seed)?;
    train_from(cfg, params, run_seed, exec)
}

pub fn train_from(
    cfg: &TrainConfig,
    mut params: MetaSolverParams,
    run_seed: u64,
    exec: Execution,
) -> Result<(MetaSolverParams, TrainHistory)> {
    cfg.validate()?;
    params.validate()?;
    let mut history = TrainHistory::default();
    for step in 0..cfg.meta_steps {
        let clock = Instant::now();
        let seeds: Vec<u64> = (0..cfg.meta_batch).map(|k| train_game_seed(run_seed, step, k)).collect();
        let games = seeds
            .iter()
            .map(|&s| sample_game(cfg.game_kind, &cfg.game, s))
            .collect::<Result<Vec<_>>>()?;
        let (values, grad) = meta_gradient(cfg, &params, &games, run_seed, step, exec)?;
        let grad_norm = l2_norm(&grad);
        if !(grad_norm <= cfg.gradient_ceiling) {
            return Err(Error::GradientExplosion {
                norm: grad_norm,
                ceiling: cfg.gradient_ceiling,
            });
        }
        let lr = cfg.lr_at(step);
        params = params.with_flat(update_params(&params.flat, &grad, lr, cfg.clip)?);
        history.records.push(TrainRecord {
            step,
            lr,
            game_seeds: seeds,
            mean_exploitability: values.iter().sum::<f64>() / values.len() as f64,
            exploitabilities: values,
            grad_norm,
        });
        history.wall_seconds.push(clock.elapsed().as_secs_f64());
    }
    Ok((params, history))
}

/// Per-game exploitability at θ and the batch-averaged gradient.
fn meta_gradient(
    cfg: &TrainConfig,
    params: &MetaSolverParams,
    games: &[GameInstance],
    run_seed: u64,
    step: usize,
    exec: Execution,
) -> Result<(Vec<f64>, Vec<f64>)> {
    match cfg.mode {
        TrainerMode::Es => {
            let objective = |theta: &[f64], k: usize| {
                let solver = MetaSolver::Learned(params.with_flat(theta.to_vec()));
                let g = &games[k];
                Ok(run_psro(g, &solver, &cfg.psro, g.seed, false, Execution::Sequential)?.final_exploitability)
            };
            let key = PerturbKey {
                run_seed,
                step: step as u64,
            };
            let est = es_gradient(objective, &params.flat, games.len(), &cfg.es, key, exec)?;
            Ok((est.center, est.gradient))
        }
        TrainerMode::Direct | TrainerMode::Implicit => {
            let mg = cfg.metagrad();
            let per_game = exec.try_map(games.len(), |k| {
                let g = &games[k];
                if cfg.mode == TrainerMode::Direct {
                    direct_meta_gradient(params, g, &mg, g.seed)
                } else {
                    implicit_meta_gradient(params, g, &mg, g.seed)
                }
            })?;
            let mut grad = vec![0.0; params.flat.len()];
            for (_, g) in &per_game {
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            let k = games.len() as f64;
            grad.iter_mut().for_each(|a| *a /= k);
            Ok((per_game.into_iter().map(|(v, _)| v).collect(), grad))
        }
    }
}

/// Runs PSRO with `solver` on every game (seeded by the game's own seed) and
/// returns the traces in game order.
pub fn evaluate(
    solver: &MetaSolver,
    games: &[GameInstance],
    psro: &PsroConfig,
    curve: bool,
    exec: Execution,
) -> Result<Vec<PsroTrace>> {
    exec.try_map(games.len(), |k| {
        run_psro(&games[k], solver, psro, games[k].seed, curve, Execution::Sequential)
    })
}

/// `count` held-out games for `run_seed`, disjoint from the training stream.
pub fn held_out_games(kind: GameKind, game: &GameConfig, run_seed: u64, count: usize) -> Result<Vec<GameInstance>> {
    (0..count)
        .map(|j| sample_game(kind, game, held_out_seed(run_seed, j)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::es::ControlVariate;
    use crate::oracles::{ExploitMode, OracleConfig};

    fn tiny(mode: TrainerMode) -> TrainConfig {
        TrainConfig {
            game_kind: GameKind::Gos,
            game: GameConfig {
                gos_dim: 6,
                ..GameConfig::default()
            },
            arch: Arch::Mlp,
            width: 4,
            psro: PsroConfig {
                iterations: 3,
                pool_size: 1,
                oracle: OracleConfig::gd(2, 5.0),
                exploit_oracle: OracleConfig::gd(2, 5.0),
                exploit_mode: ExploitMode::Oracle,
            },
            window: 3,
            mode,
            es: EsConfig {
                n_perturb: 4,
                sigma: 0.1,
                antithetic: true,
                control_variate: ControlVariate::ForwardFd,
            },
            implicit: ImplicitSettings::default(),
            meta_steps: 2,
            meta_batch: 2,
            outer_lr: 0.01,
            lr_step: None,
            lr_gamma: 1.0,
            clip: Some(1.0),
            gradient_ceiling: DEFAULT_GRADIENT_CEILING,
        }
    }

    #[test]
    fn zero_meta_steps_returns_initial_params() {
        let cfg = TrainConfig {
            meta_steps: 0,
            ..tiny(TrainerMode::Es)
        };
        let (p, h) = train(&cfg, 5, Execution::Sequential).unwrap();
        assert_eq!(p, init_params(Arch::Mlp, 4, 5).unwrap());
        assert!(h.records.is_empty());
    }

    #[test]
    fn training_is_reproducible_across_execution_modes() {
        for mode in [TrainerMode::Es, TrainerMode::Direct] {
            let cfg = tiny(mode);
            let (pa, ha) = train(&cfg, 1, Execution::Sequential).unwrap();
            let (pb, hb) = train(&cfg, 1, Execution::Parallel).unwrap();
            assert_eq!(pa, pb);
            assert_eq!(ha.records, hb.records);
            assert_eq!(ha.records.len(), 2);
            assert_eq!(ha.wall_seconds.len(), 2);
        }
    }

    #[test]
    fn explosion_ceiling_aborts() {
        let cfg = TrainConfig {
            gradient_ceiling: 1e-300,
            ..tiny(TrainerMode::Direct)
        };
        assert!(matches!(train(&cfg, 0, Execution::Sequential), Err(Error::GradientExplosion { .. })));
    }

    #[test]
    fn lr_schedule_steps_down() {
        let cfg = TrainConfig {
            lr_step: Some(2),
            lr_gamma: 0.5,
            ..tiny(TrainerMode::Es)
        };
        assert_eq!(cfg.lr_at(0), 0.01);
        assert_eq!(cfg.lr_at(1), 0.01);
        assert_eq!(cfg.lr_at(2), 0.005);
        assert_eq!(cfg.lr_at(5), 0.0025);
    }

    #[test]
    fn direct_mode_rejects_non_differentiable_games() {
        let mut cfg = tiny(TrainerMode::Direct);
        cfg.game_kind = GameKind::Kuhn;
        cfg.psro.oracle = OracleConfig::kuhn(crate::oracles::OracleMethod::KuhnExact);
        assert!(cfg.validate().is_err());
        cfg.mode = TrainerMode::Es;
        cfg.psro.exploit_oracle = cfg.psro.oracle;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn training_and_held_out_games_differ() {
        assert_ne!(train_game_seed(3, 0, 0), held_out_seed(3, 0));
    }
}
