//! Game environments, their sampling distributions and exact payoffs.
//!
//! Payoffs are always from the row player's perspective. For the single
//! population kinds (everything but [`GameKind::Imp`]) the payoff is
//! antisymmetric: `payoff(x, y) = -payoff(y, x)`.

mod imp;
mod kuhn;
mod lotto;
mod matrix;
mod rps2d;

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::real::Real;
use crate::seed::{rng_from, stream, Rng};
use crate::tape::Tape;

pub use imp::{ImpPayload, ImpState, ImpTrajectory, Seat, IMP_POLICY_DIM};
pub use kuhn::{
    infostate_label, InfostateValues, KuhnPayload, KUHN_INFOSTATES, KUHN_POLICY_DIM,
};
pub use lotto::LottoPayload;
pub use matrix::MatrixPayload;
pub use rps2d::{Rps2dPayload, RPS_MODES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    Gos,
    Lotto,
    Rps2d,
    Imp,
    Kuhn,
    ExternalMatrix,
}

impl GameKind {
    pub fn name(self) -> &'static str {
        match self {
            GameKind::Gos => "gos",
            GameKind::Lotto => "lotto",
            GameKind::Rps2d => "rps2d",
            GameKind::Imp => "imp",
            GameKind::Kuhn => "kuhn",
            GameKind::ExternalMatrix => "external_matrix",
        }
    }

    /// Single-population kinds share one policy pool.
    pub fn is_symmetric(self) -> bool {
        !matches!(self, GameKind::Imp)
    }

    /// Kinds whose payoff has an analytic row gradient usable on the tape.
    pub fn is_differentiable(self) -> bool {
        matches!(
            self,
            GameKind::Gos | GameKind::Lotto | GameKind::Rps2d | GameKind::ExternalMatrix
        )
    }
}

impl fmt::Display for GameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GameKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gos" | "games_of_skill" => Ok(GameKind::Gos),
            "lotto" | "blotto" | "differentiable_lotto" => Ok(GameKind::Lotto),
            "rps2d" | "2d_rps" | "mixture" => Ok(GameKind::Rps2d),
            "imp" | "iterated_matching_pennies" => Ok(GameKind::Imp),
            "kuhn" | "kuhn_poker" => Ok(GameKind::Kuhn),
            "external_matrix" | "matrix" => Ok(GameKind::ExternalMatrix),
            other => Err(Error::Config(format!("unknown game kind `{other}`"))),
        }
    }
}

/// Parameters of the game distributions P(G).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub gos_dim: usize,
    pub gos_sigma_w: f64,
    pub gos_sigma_s: f64,
    pub lotto_customers: usize,
    pub lotto_servers: usize,
    pub rps_bandwidth: f64,
    /// Mode centres are drawn uniformly from `[-r, r]^2`.
    pub rps_center_range: f64,
    pub imp_horizon: usize,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            gos_dim: 200,
            gos_sigma_w: 1.0,
            gos_sigma_s: 1.0,
            lotto_customers: 9,
            lotto_servers: 16,
            rps_bandwidth: 1.0,
            rps_center_range: 2.0,
            imp_horizon: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GamePayload {
    Gos(MatrixPayload),
    Lotto(LottoPayload),
    Rps2d(Rps2dPayload),
    Imp(ImpPayload),
    Kuhn(KuhnPayload),
    ExternalMatrix(MatrixPayload),
}

/// One game drawn from P(G). Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    pub payload: GamePayload,
    pub seed: u64,
}

pub fn sample_game(kind: GameKind, cfg: &GameConfig, seed: u64) -> Result<GameInstance> {
    let mut rng = rng_from(&[stream::GAME, kind as u64, seed]);
    let payload = match kind {
        GameKind::Gos => GamePayload::Gos(MatrixPayload::sample_gos(
            cfg.gos_dim,
            cfg.gos_sigma_w,
            cfg.gos_sigma_s,
            &mut rng,
        )?),
        GameKind::Lotto => GamePayload::Lotto(LottoPayload::sample(
            cfg.lotto_customers,
            cfg.lotto_servers,
            &mut rng,
        )?),
        GameKind::Rps2d => GamePayload::Rps2d(Rps2dPayload::sample(
            cfg.rps_bandwidth,
            cfg.rps_center_range,
            &mut rng,
        )?),
        GameKind::Imp => GamePayload::Imp(ImpPayload::sample(cfg.imp_horizon, &mut rng)?),
        GameKind::Kuhn => GamePayload::Kuhn(KuhnPayload),
        GameKind::ExternalMatrix => {
            return Err(Error::UnsupportedKind {
                kind: kind.name(),
                what: "sampling (load the matrix from CSV instead)",
            })
        }
    };
    Ok(GameInstance { payload, seed })
}

impl GameInstance {
    pub fn new(payload: GamePayload, seed: u64) -> Self {
        Self { payload, seed }
    }

    pub fn kind(&self) -> GameKind {
        match self.payload {
            GamePayload::Gos(_) => GameKind::Gos,
            GamePayload::Lotto(_) => GameKind::Lotto,
            GamePayload::Rps2d(_) => GameKind::Rps2d,
            GamePayload::Imp(_) => GameKind::Imp,
            GamePayload::Kuhn(_) => GameKind::Kuhn,
            GamePayload::ExternalMatrix(_) => GameKind::ExternalMatrix,
        }
    }

    pub fn symmetric(&self) -> bool {
        self.kind().is_symmetric()
    }

    pub fn policy_dim(&self) -> usize {
        match &self.payload {
            GamePayload::Gos(m) | GamePayload::ExternalMatrix(m) => m.dim,
            GamePayload::Lotto(l) => l.policy_dim(),
            GamePayload::Rps2d(_) => 2,
            GamePayload::Imp(_) => IMP_POLICY_DIM,
            GamePayload::Kuhn(_) => KUHN_POLICY_DIM,
        }
    }

    pub fn matrix(&self) -> Option<&MatrixPayload> {
        match &self.payload {
            GamePayload::Gos(m) | GamePayload::ExternalMatrix(m) => Some(m),
            _ => None,
        }
    }

    /// Checks length, finiteness and kind-specific ranges of a policy.
    pub fn check_policy(&self, policy: &[f64]) -> Result<()> {
        ensure_len(self.policy_dim(), policy.len(), "policy length")?;
        ensure_finite(policy, "policy parameters")?;
        if let GamePayload::Kuhn(_) = self.payload {
            if policy.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Config(
                    "Kuhn policy probabilities must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }

    /// Draws a fresh policy from the kind's initialisation distribution.
    pub fn random_policy(&self, rng: &mut Rng) -> Vec<f64> {
        let dim = self.policy_dim();
        match &self.payload {
            GamePayload::Kuhn(_) => (0..dim).map(|_| rng.random::<f64>()).collect(),
            _ => (0..dim).map(|_| StandardNormal.sample(rng)).collect(),
        }
    }

    /// Exact payoff 𝔐(row, col), validated.
    pub fn payoff(&self, row: &[f64], col: &[f64]) -> Result<f64> {
        self.check_policy(row)?;
        self.check_policy(col)?;
        let v = self.payoff_unchecked(row, col);
        ensure_finite(&[v], "payoff")?;
        Ok(v)
    }

    /// Payoff without validation, generic over the scalar type.
    ///
    /// Symmetric kinds evaluate `½ [m(x, y) - m(y, x)]` with `m` their
    /// (mathematically antisymmetric) formula, so antisymmetry and the zero
    /// diagonal hold exactly in floating point.
    pub fn payoff_unchecked<R: Real>(&self, row: &[R], col: &[R]) -> R {
        let skew = |f: &dyn Fn(&[R], &[R]) -> R| (f(row, col) - f(col, row)).scale(0.5);
        match &self.payload {
            GamePayload::Gos(m) | GamePayload::ExternalMatrix(m) => skew(&|x, y| m.payoff(x, y)),
            GamePayload::Lotto(l) => skew(&|x, y| l.payoff(x, y)),
            GamePayload::Rps2d(r) => skew(&|x, y| r.payoff(x, y)),
            GamePayload::Imp(i) => i.payoff(row, col),
            GamePayload::Kuhn(k) => k.payoff(row, col),
        }
    }

    /// Exact gradient of the payoff with respect to the row parameters.
    pub fn payoff_grad_row(&self, row: &[f64], col: &[f64]) -> Result<Vec<f64>> {
        self.check_policy(row)?;
        self.check_policy(col)?;
        let g = match &self.payload {
            GamePayload::Imp(i) => i.grad(row, col, Seat::Row),
            GamePayload::Kuhn(_) => {
                return Err(Error::UnsupportedKind {
                    kind: "kuhn",
                    what: "payoff gradient (tabular oracles only)",
                })
            }
            _ => self.aggregate_grad(row, &[1.0], &[col])?,
        };
        ensure_finite(&g, "payoff gradient")?;
        Ok(g)
    }

    /// `Σ_k w_k 𝔐(x, φ_k)` without validation.
    pub fn aggregate_payoff_unchecked<R: Real>(&self, x: &[R], weights: &[R], members: &[&[R]]) -> R {
        match &self.payload {
            GamePayload::Gos(m) | GamePayload::ExternalMatrix(m) => {
                m.aggregate_payoff(x, weights, members)
            }
            GamePayload::Rps2d(r) => r.aggregate_payoff(x, weights, members),
            _ => {
                let terms: Vec<R> = members
                    .iter()
                    .map(|m| self.payoff_unchecked(x, m))
                    .collect();
                R::dot(weights, &terms)
            }
        }
    }

    /// `∂/∂x Σ_k w_k 𝔐(x, φ_k)` for the differentiable kinds, generic over
    /// the scalar type so that it can itself be differentiated.
    pub fn aggregate_grad<R: Real>(
        &self,
        x: &[R],
        weights: &[R],
        members: &[&[R]],
    ) -> Result<Vec<R>> {
        match &self.payload {
            GamePayload::Gos(m) | GamePayload::ExternalMatrix(m) => {
                Ok(m.aggregate_grad(x, weights, members))
            }
            GamePayload::Rps2d(r) => Ok(r.aggregate_grad(x, weights, members)),
            GamePayload::Lotto(l) => {
                let mut acc = vec![R::zero(); x.len()];
                for (&w, m) in weights.iter().zip(members) {
                    for (a, g) in acc.iter_mut().zip(l.grad_row(x, m)) {
                        *a += w * g;
                    }
                }
                Ok(acc)
            }
            GamePayload::Imp(_) | GamePayload::Kuhn(_) => Err(Error::UnsupportedKind {
                kind: self.kind().name(),
                what: "differentiable aggregate gradient",
            }),
        }
    }

    /// Aggregate gradient for the plain `f64` path. Unlike
    /// [`aggregate_grad`](Self::aggregate_grad) this also covers the exact
    /// IMP payoff (differentiated on a scratch tape) for either seat.
    pub fn aggregate_grad_f64(
        &self,
        x: &[f64],
        weights: &[f64],
        members: &[&[f64]],
        seat: Seat,
    ) -> Result<Vec<f64>> {
        match (&self.payload, seat) {
            (GamePayload::Imp(imp), _) => {
                let mut acc = vec![0.0; x.len()];
                for (&w, m) in weights.iter().zip(members) {
                    let g = match seat {
                        Seat::Row => imp.grad(x, m, Seat::Row),
                        Seat::Col => imp.grad(m, x, Seat::Col),
                    };
                    for (a, gi) in acc.iter_mut().zip(g) {
                        *a += w * gi;
                    }
                }
                Ok(acc)
            }
            (_, Seat::Row) => self.aggregate_grad(x, weights, members),
            (_, Seat::Col) => Err(Error::UnsupportedKind {
                kind: self.kind().name(),
                what: "column-seat gradient in a single-population game",
            }),
        }
    }

    /// Hessian of `Σ_k w_k 𝔐(x, φ_k)` with respect to `x`, by reverse mode
    /// over the analytic gradient.
    pub fn aggregate_hessian(&self, x: &[f64], weights: &[f64], members: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let n = x.len();
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let tape = Tape::new();
            let xv = tape.vars(x);
            let w: Vec<_> = weights.iter().map(|&v| crate::tape::Var::constant(v)).collect();
            let mv: Vec<Vec<_>> = members
                .iter()
                .map(|m| m.iter().map(|&v| crate::tape::Var::constant(v)).collect())
                .collect();
            let mref: Vec<&[_]> = mv.iter().map(|m| m.as_slice()).collect();
            let g = self.aggregate_grad(&xv, &w, &mref)?;
            rows.push(tape.gradient(g[i], &xv));
        }
        Ok(rows)
    }

    /// Max over pure strategies of the payoff against the aggregated
    /// opponent; exact exploitability for normal-form kinds.
    pub fn pure_strategy_max(&self, weights: &[f64], members: &[&[f64]]) -> Result<f64> {
        match self.matrix() {
            Some(m) => Ok(m.pure_strategy_max(weights, members)),
            None => Err(Error::UnsupportedKind {
                kind: self.kind().name(),
                what: "pure-strategy exploitability",
            }),
        }
    }

    pub fn imp(&self) -> Result<&ImpPayload> {
        match &self.payload {
            GamePayload::Imp(i) => Ok(i),
            _ => Err(Error::UnsupportedKind {
                kind: self.kind().name(),
                what: "iterated matching pennies operation",
            }),
        }
    }

    pub fn kuhn(&self) -> Result<&KuhnPayload> {
        match &self.payload {
            GamePayload::Kuhn(k) => Ok(k),
            _ => Err(Error::UnsupportedKind {
                kind: self.kind().name(),
                what: "Kuhn poker operation",
            }),
        }
    }

    /// Samples one IMP trajectory of length H.
    pub fn imp_rollout(&self, p1: &[f64], p2: &[f64], rng: &mut Rng) -> Result<ImpTrajectory> {
        self.check_policy(p1)?;
        self.check_policy(p2)?;
        Ok(self.imp()?.rollout(p1, p2, rng))
    }
}

pub(crate) fn normal(sigma: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sigma).map_err(|e| Error::Config(format!("normal scale {sigma}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    fn all_symmetric_games() -> Vec<GameInstance> {
        let cfg = GameConfig {
            gos_dim: 6,
            lotto_servers: 3,
            lotto_customers: 4,
            ..GameConfig::default()
        };
        [GameKind::Gos, GameKind::Lotto, GameKind::Rps2d, GameKind::Kuhn]
            .into_iter()
            .map(|k| sample_game(k, &cfg, 11).unwrap())
            .collect()
    }

    #[test]
    fn sampling_is_reproducible() {
        let cfg = GameConfig {
            gos_dim: 10,
            ..GameConfig::default()
        };
        for kind in [GameKind::Gos, GameKind::Lotto, GameKind::Rps2d, GameKind::Imp] {
            assert_eq!(
                sample_game(kind, &cfg, 42).unwrap(),
                sample_game(kind, &cfg, 42).unwrap()
            );
            assert_ne!(
                sample_game(kind, &cfg, 42).unwrap(),
                sample_game(kind, &cfg, 43).unwrap()
            );
        }
    }

    #[test]
    fn external_matrix_cannot_be_sampled() {
        assert!(sample_game(GameKind::ExternalMatrix, &GameConfig::default(), 0).is_err());
    }

    #[test]
    fn non_positive_dimension_is_rejected() {
        let cfg = GameConfig {
            gos_dim: 0,
            ..GameConfig::default()
        };
        assert!(sample_game(GameKind::Gos, &cfg, 0).is_err());
    }

    #[test]
    fn symmetric_payoffs_are_antisymmetric() {
        let mut rng = rng_from(&[5]);
        for g in all_symmetric_games() {
            for _ in 0..50 {
                let x = g.random_policy(&mut rng);
                let y = g.random_policy(&mut rng);
                let s = g.payoff(&x, &y).unwrap() + g.payoff(&y, &x).unwrap();
                assert!(s.abs() < 1e-9, "{}: {s}", g.kind());
                assert!(g.payoff(&x, &x).unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn policy_length_is_checked() {
        let g = sample_game(GameKind::Rps2d, &GameConfig::default(), 1).unwrap();
        assert!(matches!(
            g.payoff(&[0.0], &[0.0, 0.0]),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            g.payoff(&[f64::NAN, 0.0], &[0.0, 0.0]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn kuhn_has_no_payoff_gradient() {
        let g = sample_game(GameKind::Kuhn, &GameConfig::default(), 0).unwrap();
        let x = vec![0.5; KUHN_POLICY_DIM];
        assert!(matches!(
            g.payoff_grad_row(&x, &x),
            Err(Error::UnsupportedKind { .. })
        ));
    }

    #[test]
    fn hessian_is_symmetric() {
        let g = sample_game(GameKind::Rps2d, &GameConfig::default(), 3).unwrap();
        let y = [0.3, -0.2];
        let h = g.aggregate_hessian(&[0.1, 0.4], &[1.0], &[&y]).unwrap();
        assert!((h[0][1] - h[1][0]).abs() < 1e-12);
    }
}
