//! Meta-gradients of final exploitability with respect to meta-solver
//! parameters θ.
//!
//! The PSRO loop is re-run generically over [`Real`]: with `f64` it is a
//! plain forward evaluation, with tape variables it records everything
//! inside the differentiation window. Iterations before the window use a
//! constant copy of θ, so the members they create (and the payoffs among
//! them) enter as constants. The final meta-distribution `π_T` and the
//! exploitability best response are always differentiated.

mod fd;
mod implicit;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::games::GameInstance;
use crate::oracles::{OracleConfig, OracleInit, OracleMethod};
use crate::psro::{br_seed, exploit_seed, initial_pool};
use crate::population::Side;
use crate::real::{constants, values, Real};
use crate::solvers::{forward, MetaSolverParams};
use crate::tape::{Tape, Var};

pub use fd::{finite_diff_gradient, finite_diff_meta_gradient};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaGradConfig {
    /// PSRO iterations T.
    pub iterations: usize,
    /// Trailing iterations differentiated through; `0..=T`.
    pub window: usize,
    pub pool_size: usize,
    /// Gradient-descent oracle used to grow the population.
    pub oracle: OracleConfig,
    /// Gradient-descent oracle for the final exploitability best response.
    pub exploit_oracle: OracleConfig,
    /// Implicit mode: ridge λ added to the negated best-response Hessian.
    pub lambda: f64,
    /// Implicit mode: inner gradient norm that counts as stationary.
    pub stationarity_tol: f64,
    /// Implicit mode: step cap while seeking stationarity.
    pub max_inner_steps: usize,
    /// Implicit mode: largest accepted condition number.
    pub max_condition: f64,
}

impl Default for MetaGradConfig {
    fn default() -> Self {
        Self {
            iterations: 20,
            window: 5,
            pool_size: 1,
            oracle: OracleConfig::gd(5, 25.0),
            exploit_oracle: OracleConfig::gd(5, 25.0),
            lambda: 1e-3,
            stationarity_tol: 1e-3,
            max_inner_steps: 10_000,
            max_condition: 1e12,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GdSettings {
    pub steps: usize,
    pub lr: f64,
    pub tol: Option<f64>,
    pub init: OracleInit,
}

fn gd_settings(cfg: &OracleConfig) -> Result<GdSettings> {
    cfg.validate()?;
    match cfg.method {
        OracleMethod::GradDescent { steps, lr, grad_tol } => Ok(GdSettings {
            steps,
            lr,
            tol: grad_tol,
            init: cfg.init,
        }),
        _ => Err(Error::Config(
            "meta-gradients need gradient-descent oracles".into(),
        )),
    }
}

impl MetaGradConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window > self.iterations {
            return Err(Error::Config(format!(
                "window {} exceeds PSRO iterations {}",
                self.window, self.iterations
            )));
        }
        if self.pool_size == 0 {
            return Err(Error::Config("initial pool size must be at least 1".into()));
        }
        if !(self.lambda >= 0.0) || !(self.stationarity_tol > 0.0) || !(self.max_condition > 1.0) {
            return Err(Error::Config("implicit-mode settings out of range".into()));
        }
        gd_settings(&self.oracle)?;
        gd_settings(&self.exploit_oracle)?;
        Ok(())
    }

    /// PSRO iteration `t` (0-based) is differentiated iff it lies in the window.
    pub fn in_window(&self, t: usize) -> bool {
        t + self.window >= self.iterations
    }
}

/// How best responses are produced inside the differentiated region.
pub(crate) trait InnerSolver<R: Real> {
    fn best_response(
        &self,
        game: &GameInstance,
        init: Vec<f64>,
        pi: &[R],
        members: &[&[R]],
        gd: &GdSettings,
    ) -> Result<Vec<R>>;
}

/// Differentiates through every gradient step.
pub(crate) struct Unrolled;

impl<R: Real> InnerSolver<R> for Unrolled {
    fn best_response(
        &self,
        game: &GameInstance,
        init: Vec<f64>,
        pi: &[R],
        members: &[&[R]],
        gd: &GdSettings,
    ) -> Result<Vec<R>> {
        let mut phi: Vec<R> = constants(&init);
        for _ in 0..gd.steps {
            let g = game.aggregate_grad(&phi, pi, members)?;
            let gv = values(&g);
            ensure_finite(&gv, "best-response gradient")?;
            if gd.tol.is_some_and(|t| crate::real::l2_norm(&gv) < t) {
                break;
            }
            for (p, gi) in phi.iter_mut().zip(g) {
                *p += gi.scale(gd.lr);
            }
        }
        Ok(phi)
    }
}

fn br_init(game: &GameInstance, gd: &GdSettings, seed: u64) -> Vec<f64> {
    match gd.init {
        OracleInit::Random => game.random_policy(&mut crate::seed::rng_from(&[crate::seed::stream::BR_INIT, seed])),
        OracleInit::Zeros => vec![0.0; game.policy_dim()],
    }
}

/// Generic PSRO unroll; returns the final exploitability.
pub(crate) fn record<R: Real>(
    game: &GameInstance,
    params: &MetaSolverParams,
    theta: &[R],
    cfg: &MetaGradConfig,
    seed: u64,
    inner: &dyn InnerSolver<R>,
) -> Result<R> {
    cfg.validate()?;
    params.validate()?;
    if !game.kind().is_differentiable() {
        return Err(Error::UnsupportedKind {
            kind: game.kind().name(),
            what: "differentiable PSRO unroll",
        });
    }
    let oracle = gd_settings(&cfg.oracle)?;
    let exploit = gd_settings(&cfg.exploit_oracle)?;
    let theta_const: Vec<R> = constants(&values(theta));
    let (arch, width) = (params.arch, params.width());

    let pool = initial_pool(game, Side::Single, cfg.pool_size, seed)?;
    let mut members: Vec<Vec<R>> = pool.members().iter().map(|m| constants(m)).collect();
    let mut m: Vec<Vec<R>> = Vec::new();
    grow(game, &mut m, &members);

    for t in 0..cfg.iterations {
        let th = if cfg.in_window(t) { theta } else { &theta_const };
        let pi = forward(arch, width, th, &m);
        let refs: Vec<&[R]> = members.iter().map(Vec::as_slice).collect();
        let init = br_init(game, &oracle, br_seed(seed, t));
        let br = if cfg.in_window(t) {
            inner.best_response(game, init, &pi, &refs, &oracle)?
        } else {
            Unrolled.best_response(game, init, &pi, &refs, &oracle)?
        };
        members.push(br);
        grow(game, &mut m, &members);
    }

    let pi = forward(arch, width, theta, &m);
    let refs: Vec<&[R]> = members.iter().map(Vec::as_slice).collect();
    let init = br_init(game, &exploit, exploit_seed(seed, cfg.iterations));
    let br = inner.best_response(game, init, &pi, &refs, &exploit)?;
    let value = game.aggregate_payoff_unchecked(&br, &pi, &refs);
    ensure_finite(&[value.value()], "exploitability")?;
    Ok(value)
}

/// Adds the rows and columns for members not yet covered by `m`.
fn grow<R: Real>(game: &GameInstance, m: &mut Vec<Vec<R>>, members: &[Vec<R>]) {
    let old = m.len();
    let n = members.len();
    for (i, row) in m.iter_mut().enumerate() {
        for j in old..n {
            row.push(game.payoff_unchecked(&members[i], &members[j]));
        }
    }
    for i in old..n {
        m.push((0..n).map(|j| game.payoff_unchecked(&members[i], &members[j])).collect());
    }
}

/// A recorded PSRO unroll.
pub struct UnrolledRun {
    pub exploitability: f64,
    pub tape: Tape,
    theta_nodes: Vec<usize>,
    output: Option<usize>,
}

impl UnrolledRun {
    /// Reverse sweep from the exploitability to θ.
    pub fn gradient(&self) -> Vec<f64> {
        match self.output {
            None => vec![0.0; self.theta_nodes.len()],
            Some(out) => {
                let adj = self.tape.adjoints(out);
                self.theta_nodes.iter().map(|&i| adj[i]).collect()
            }
        }
    }
}

fn unroll_with(
    params: &MetaSolverParams,
    game: &GameInstance,
    cfg: &MetaGradConfig,
    seed: u64,
    implicit: bool,
) -> Result<UnrolledRun> {
    let tape = Tape::new();
    let (value, output, theta_nodes) = {
        let theta = tape.vars(&params.flat);
        let v: Var = if implicit {
            record(game, params, &theta, cfg, seed, &implicit::Implicit::new(&tape, cfg))?
        } else {
            record(game, params, &theta, cfg, seed, &Unrolled)?
        };
        let nodes: Vec<usize> = theta.iter().filter_map(|t| t.index()).collect();
        (v.value(), v.index(), nodes)
    };
    Ok(UnrolledRun {
        exploitability: value,
        tape,
        theta_nodes,
        output,
    })
}

/// Records the PSRO run on a tape.
pub fn unrolled_psro_forward(
    params: &MetaSolverParams,
    game: &GameInstance,
    cfg: &MetaGradConfig,
    seed: u64,
) -> Result<UnrolledRun> {
    unroll_with(params, game, cfg, seed, false)
}

/// Final exploitability of the seeded run, without a tape.
pub fn psro_objective(params: &MetaSolverParams, game: &GameInstance, cfg: &MetaGradConfig, seed: u64) -> Result<f64> {
    record(game, params, &params.flat, cfg, seed, &Unrolled)
}

/// Exploitability and its gradient by reverse mode through the unroll.
pub fn direct_meta_gradient(
    params: &MetaSolverParams,
    game: &GameInstance,
    cfg: &MetaGradConfig,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let run = unrolled_psro_forward(params, game, cfg, seed)?;
    let g = run.gradient();
    ensure_finite(&g, "meta-gradient")?;
    Ok((run.exploitability, g))
}

/// As [`direct_meta_gradient`], but each windowed best response is solved to
/// stationarity and differentiated with the implicit function theorem.
pub fn implicit_meta_gradient(
    params: &MetaSolverParams,
    game: &GameInstance,
    cfg: &MetaGradConfig,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let run = unroll_with(params, game, cfg, seed, true)?;
    let g = run.gradient();
    ensure_finite(&g, "meta-gradient")?;
    Ok((run.exploitability, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::games::{sample_game, GameConfig, GameKind};
    use crate::oracles::ExploitMode;
    use crate::psro::{run_psro, PsroConfig};
    use crate::solvers::{init_params, Arch, MetaSolver};

    fn small_cfg() -> MetaGradConfig {
        MetaGradConfig {
            iterations: 3,
            window: 3,
            oracle: OracleConfig::gd(1, 1.0),
            exploit_oracle: OracleConfig::gd(1, 1.0),
            ..MetaGradConfig::default()
        }
    }

    fn gos4(seed: u64) -> GameInstance {
        sample_game(GameKind::Gos, &GameConfig { gos_dim: 4, ..GameConfig::default() }, seed).unwrap()
    }

    #[test]
    fn tape_value_equals_plain_psro_run() {
        let game = gos4(1);
        let params = init_params(Arch::Mlp, 8, 2).unwrap();
        let cfg = small_cfg();
        let run = unrolled_psro_forward(&params, &game, &cfg, 5).unwrap();
        let plain = psro_objective(&params, &game, &cfg, 5).unwrap();
        assert_eq!(run.exploitability, plain);
        let psro = PsroConfig {
            iterations: cfg.iterations,
            pool_size: cfg.pool_size,
            oracle: cfg.oracle,
            exploit_oracle: cfg.exploit_oracle,
            exploit_mode: ExploitMode::Oracle,
        };
        let trace = run_psro(&game, &MetaSolver::Learned(params), &psro, 5, false, Execution::Sequential).unwrap();
        assert_eq!(trace.final_exploitability, plain);
    }

    #[test]
    fn single_member_distribution_ignores_theta() {
        let game = gos4(0);
        let cfg = MetaGradConfig { iterations: 0, window: 0, ..small_cfg() };
        let params = init_params(Arch::Mlp, 4, 0).unwrap();
        let (_, g) = direct_meta_gradient(&params, &game, &cfg, 0).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn window_larger_than_iterations_is_rejected() {
        let cfg = MetaGradConfig { window: 4, ..small_cfg() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn kuhn_cannot_be_unrolled() {
        let game = sample_game(GameKind::Kuhn, &GameConfig::default(), 0).unwrap();
        let params = init_params(Arch::Mlp, 4, 0).unwrap();
        assert!(matches!(
            direct_meta_gradient(&params, &game, &small_cfg(), 0),
            Err(Error::UnsupportedKind { .. })
        ));
    }
}
