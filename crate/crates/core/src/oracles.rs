//! Best-response oracles and exploitability.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::games::{GameInstance, GameKind, Seat, KUHN_INFOSTATES};
use crate::population::{aggregate_payoff_seat, check_simplex, Population, SIMPLEX_TOL};
use crate::real::l2_norm;
use crate::seed::{rng_from, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum OracleMethod {
    /// Gradient ascent on the aggregate payoff. With `grad_tol`, stops early
    /// once the gradient norm falls below it (`steps` is then a cap).
    GradDescent {
        steps: usize,
        lr: f64,
        grad_tol: Option<f64>,
    },
    /// Policy-gradient ascent from sampled trajectories (IMP only).
    Reinforce { steps: usize, lr: f64, batch: usize },
    KuhnExact,
    KuhnApproxV1,
    KuhnApproxV2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleInit {
    /// Fresh random policy drawn from the seed passed to the oracle.
    #[default]
    Random,
    Zeros,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub method: OracleMethod,
    pub init: OracleInit,
}

impl OracleConfig {
    pub fn gd(steps: usize, lr: f64) -> Self {
        Self {
            method: OracleMethod::GradDescent {
                steps,
                lr,
                grad_tol: None,
            },
            init: OracleInit::Random,
        }
    }

    pub fn reinforce(steps: usize, lr: f64, batch: usize) -> Self {
        Self {
            method: OracleMethod::Reinforce { steps, lr, batch },
            init: OracleInit::Random,
        }
    }

    pub fn kuhn(method: OracleMethod) -> Self {
        Self {
            method,
            init: OracleInit::Random,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        match self.method {
            OracleMethod::GradDescent { steps, lr, grad_tol } => {
                if steps == 0 {
                    return bad("oracle steps must be at least 1");
                }
                if !(lr >= 0.0 && lr.is_finite()) {
                    return bad("oracle learning rate must be finite and non-negative");
                }
                if grad_tol.is_some_and(|t| !(t > 0.0)) {
                    return bad("gradient tolerance must be positive");
                }
            }
            OracleMethod::Reinforce { steps, lr, batch } => {
                if steps == 0 || batch == 0 {
                    return bad("oracle steps and batch must be at least 1");
                }
                if !(lr >= 0.0 && lr.is_finite()) {
                    return bad("oracle learning rate must be finite and non-negative");
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn compatible_with(&self, kind: GameKind) -> Result<()> {
        let ok = match self.method {
            OracleMethod::GradDescent { .. } => kind.is_differentiable() || kind == GameKind::Imp,
            OracleMethod::Reinforce { .. } => kind == GameKind::Imp,
            _ => kind == GameKind::Kuhn,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::UnsupportedKind {
                kind: kind.name(),
                what: "the configured best-response oracle",
            })
        }
    }
}

/// Whether exploitability is measured with the configured oracle or
/// exactly (pure-strategy max for matrix games, exact tabular BR for Kuhn).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExploitMode {
    #[default]
    Oracle,
    Exact,
}

fn check_mixture(pi: &[f64], opponents: &Population) -> Result<()> {
    ensure_len(opponents.len(), pi.len(), "meta-distribution vs population")?;
    check_simplex(pi, SIMPLEX_TOL)
}

fn initial_policy(game: &GameInstance, init: OracleInit, seed: u64) -> Vec<f64> {
    match init {
        OracleInit::Random => game.random_policy(&mut rng_from(&[stream::BR_INIT, seed])),
        OracleInit::Zeros => vec![0.0; game.policy_dim()],
    }
}

/// Best response of a deviator in `seat` against `⟨π, Φ⟩`.
pub fn best_response(
    game: &GameInstance,
    pi: &[f64],
    opponents: &Population,
    cfg: &OracleConfig,
    seed: u64,
    seat: Seat,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    cfg.compatible_with(game.kind())?;
    check_mixture(pi, opponents)?;
    match cfg.method {
        OracleMethod::GradDescent { .. } => gd_best_response(game, pi, opponents, cfg, seed, seat),
        OracleMethod::Reinforce { .. } => reinforce_best_response(game, pi, opponents, cfg, seed, seat),
        _ => kuhn_best_response(game, pi, opponents, cfg, seed),
    }
}

/// `φ_{n+1} = φ_n + lr ∂𝔐(φ_n, ⟨π, Φ⟩)/∂φ_n`
pub fn gd_best_response(
    game: &GameInstance,
    pi: &[f64],
    opponents: &Population,
    cfg: &OracleConfig,
    seed: u64,
    seat: Seat,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let OracleMethod::GradDescent { steps, lr, grad_tol } = cfg.method else {
        return Err(Error::Config("gradient oracle called with another method".into()));
    };
    check_mixture(pi, opponents)?;
    let init = initial_policy(game, cfg.init, seed);
    Ok(gradient_ascent(game, init, pi, &opponents.refs(), seat, steps, lr, grad_tol)?.0)
}

/// Runs up to `steps` ascent steps from `init`; returns the final policy and
/// the norm of the last gradient evaluated.
#[allow(clippy::too_many_arguments)]
pub fn gradient_ascent(
    game: &GameInstance,
    mut phi: Vec<f64>,
    pi: &[f64],
    members: &[&[f64]],
    seat: Seat,
    steps: usize,
    lr: f64,
    grad_tol: Option<f64>,
) -> Result<(Vec<f64>, f64)> {
    let mut norm = f64::INFINITY;
    for _ in 0..steps {
        let g = game.aggregate_grad_f64(&phi, pi, members, seat)?;
        ensure_finite(&g, "best-response gradient")?;
        norm = l2_norm(&g);
        if grad_tol.is_some_and(|t| norm < t) {
            break;
        }
        for (p, gi) in phi.iter_mut().zip(&g) {
            *p += lr * gi;
        }
    }
    ensure_finite(&phi, "best-response policy")?;
    Ok((phi, norm))
}

/// REINFORCE with a leave-one-out mean-return baseline per opponent batch.
pub fn reinforce_best_response(
    game: &GameInstance,
    pi: &[f64],
    opponents: &Population,
    cfg: &OracleConfig,
    seed: u64,
    seat: Seat,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let OracleMethod::Reinforce { steps, lr, batch } = cfg.method else {
        return Err(Error::Config("REINFORCE oracle called with another method".into()));
    };
    check_mixture(pi, opponents)?;
    game.imp()?;
    let mut phi = initial_policy(game, cfg.init, seed);
    for step in 0..steps {
        let g = reinforce_gradient(game, &phi, pi, opponents, batch, seat, &[seed, step as u64])?;
        for (p, gi) in phi.iter_mut().zip(&g) {
            *p += lr * gi;
        }
    }
    ensure_finite(&phi, "best-response policy")?;
    Ok(phi)
}

/// Score-function estimate of `∂/∂φ Σ_k π_k E[R(τ) | φ, φ_k]`.
pub fn reinforce_gradient(
    game: &GameInstance,
    phi: &[f64],
    pi: &[f64],
    opponents: &Population,
    batch: usize,
    seat: Seat,
    seed: &[u64],
) -> Result<Vec<f64>> {
    let imp = game.imp()?;
    let mut key = vec![stream::BR_NOISE];
    key.extend_from_slice(seed);
    let mut rng = rng_from(&key);
    let sign = if seat == Seat::Row { 1.0 } else { -1.0 };
    let mut grad = vec![0.0; phi.len()];
    for (k, &w) in pi.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let opp = opponents.member(k);
        let samples: Vec<(f64, [f64; 5])> = (0..batch)
            .map(|_| {
                let traj = match seat {
                    Seat::Row => imp.rollout(phi, opp, &mut rng),
                    Seat::Col => imp.rollout(opp, phi, &mut rng),
                };
                (sign * traj.row_return(), traj.score(phi, seat))
            })
            .collect();
        let total: f64 = samples.iter().map(|s| s.0).sum();
        for (ret, score) in &samples {
            let baseline = if batch > 1 {
                (total - ret) / (batch - 1) as f64
            } else {
                0.0
            };
            let coef = w * (ret - baseline) / batch as f64;
            for (g, s) in grad.iter_mut().zip(score) {
                *g += coef * s;
            }
        }
    }
    ensure_finite(&grad, "policy-gradient estimate")?;
    Ok(grad)
}

/// Tabular Kuhn oracles built on the per-infostate greedy actions.
pub fn kuhn_best_response(
    game: &GameInstance,
    pi: &[f64],
    opponents: &Population,
    cfg: &OracleConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    check_mixture(pi, opponents)?;
    let (aggressive, _) = game.kuhn()?.greedy_actions(pi, &opponents.refs());
    let policy = match cfg.method {
        OracleMethod::KuhnExact => aggressive.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect(),
        OracleMethod::KuhnApproxV1 => aggressive.iter().map(|&a| if a { 0.75 } else { 0.25 }).collect(),
        OracleMethod::KuhnApproxV2 => {
            let mut rng = rng_from(&[stream::BR_NOISE, seed]);
            let mut noise = || -> f64 { StandardNormal.sample(&mut rng) };
            let etas: Vec<(f64, f64)> = (0..KUHN_INFOSTATES)
                .map(|_| loop {
                    let pair = (noise(), noise());
                    if (1.0 + pair.0).max(0.0) + pair.1.max(0.0) > 0.0 {
                        break pair;
                    }
                })
                .collect();
            kuhn_v2_policy(&aggressive, &etas)
        }
        _ => return Err(Error::Config("Kuhn oracle called with another method".into())),
    };
    Ok(policy)
}

/// Weights `max(1 + η₁, 0)` on the greedy action and `max(η₂, 0)` on the
/// other, normalised per infostate.
pub fn kuhn_v2_policy(aggressive: &[bool], etas: &[(f64, f64)]) -> Vec<f64> {
    aggressive
        .iter()
        .zip(etas)
        .map(|(&a, &(e1, e2))| {
            let best = (1.0 + e1).max(0.0);
            let other = e2.max(0.0);
            let p_best = best / (best + other);
            if a {
                p_best
            } else {
                1.0 - p_best
            }
        })
        .collect()
}

/// `max_φ 𝔐(φ, ⟨π, Φ⟩)` for single-population games.
pub fn exploitability(
    game: &GameInstance,
    pi: &[f64],
    pop: &Population,
    cfg: &OracleConfig,
    mode: ExploitMode,
    seed: u64,
) -> Result<f64> {
    check_mixture(pi, pop)?;
    match (mode, game.kind()) {
        (ExploitMode::Exact, GameKind::Gos | GameKind::ExternalMatrix) => {
            game.pure_strategy_max(pi, &pop.refs())
        }
        (ExploitMode::Exact, GameKind::Kuhn) => {
            let exact = OracleConfig::kuhn(OracleMethod::KuhnExact);
            let br = kuhn_best_response(game, pi, pop, &exact, seed)?;
            aggregate_payoff_seat(game, &br, pi, pop, Seat::Row)
        }
        (ExploitMode::Exact, kind) => Err(Error::UnsupportedKind {
            kind: kind.name(),
            what: "exact exploitability",
        }),
        (ExploitMode::Oracle, _) => {
            let br = best_response(game, pi, pop, cfg, seed, Seat::Row)?;
            aggregate_payoff_seat(game, &br, pi, pop, Seat::Row)
        }
    }
}

/// Sum of both players' deviation gains in a two-population game.
pub fn exploitability_two(
    game: &GameInstance,
    row_pi: &[f64],
    row_pop: &Population,
    col_pi: &[f64],
    col_pop: &Population,
    cfg: &OracleConfig,
    seed: u64,
) -> Result<f64> {
    let row_br = best_response(game, col_pi, col_pop, cfg, crate::seed::derive_seed(&[seed, 0]), Seat::Row)?;
    let col_br = best_response(game, row_pi, row_pop, cfg, crate::seed::derive_seed(&[seed, 1]), Seat::Col)?;
    Ok(aggregate_payoff_seat(game, &row_br, col_pi, col_pop, Seat::Row)?
        + aggregate_payoff_seat(game, &col_br, row_pi, row_pop, Seat::Col)?)
}
