//! Meta-solvers: maps from a meta-game payoff matrix to a distribution over
//! population members.

mod conv;
mod gru;
mod mlp;
pub mod nash;
mod params;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::population::{MetaDistribution, PayoffMatrix};
use crate::real::{softmax, Real};

pub use conv::KERNEL as CONV_KERNEL;
pub use nash::{fictitious_play, lp_nash, matrix_exploitability};
pub use params::{init_params, Arch, MetaSolverParams};

/// Default fictitious-play rounds for the Nash baseline.
pub const DEFAULT_FP_ITERS: usize = 10_000;

/// A learned network or one of the game-theoretic baselines.
#[derive(Debug, Clone, PartialEq)]
pub enum MetaSolver {
    Learned(MetaSolverParams),
    Uniform,
    Nash { fp_iters: usize },
    LastAgent,
}

impl MetaSolver {
    pub fn label(&self) -> String {
        match self {
            MetaSolver::Learned(p) => format!("learned_{}", p.arch.name()),
            MetaSolver::Uniform => "uniform".into(),
            MetaSolver::Nash { .. } => "nash".into(),
            MetaSolver::LastAgent => "last_agent".into(),
        }
    }

    pub fn distribution(&self, m: &PayoffMatrix) -> Result<MetaDistribution> {
        match self {
            MetaSolver::Learned(p) => solver_forward(p, m),
            other => baseline_distribution(other, m),
        }
    }
}

/// Baseline names accepted on the command line and in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Uniform,
    Nash,
    LastAgent,
}

impl BaselineKind {
    pub fn solver(self, fp_iters: usize) -> MetaSolver {
        match self {
            BaselineKind::Uniform => MetaSolver::Uniform,
            BaselineKind::Nash => MetaSolver::Nash { fp_iters },
            BaselineKind::LastAgent => MetaSolver::LastAgent,
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::Uniform => "uniform",
            BaselineKind::Nash => "nash",
            BaselineKind::LastAgent => "last_agent",
        })
    }
}

fn check_square(m: &PayoffMatrix) -> Result<()> {
    if !m.is_square() || m.rows() == 0 {
        return Err(Error::Matrix(format!(
            "meta-solvers need a non-empty square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    ensure_finite(m.values(), "meta-game")
}

/// `π = f_θ(M)`
pub fn solver_forward(params: &MetaSolverParams, m: &PayoffMatrix) -> Result<MetaDistribution> {
    params.validate()?;
    check_square(m)?;
    let pi = forward(params.arch, params.width(), &params.flat, &m.to_rows());
    ensure_finite(&pi, "meta-solver output")?;
    Ok(MetaDistribution::new(pi)?)
}

/// Network forward pass generic over the scalar type; `m` is square.
pub fn forward<R: Real>(arch: Arch, width: usize, theta: &[R], m: &[Vec<R>]) -> Vec<R> {
    let logits = match arch {
        Arch::Mlp => mlp::logits(width, theta, m),
        Arch::Conv1d => conv::logits(width, theta, m),
        Arch::Gru => gru::logits(width, theta, m),
    };
    softmax(&logits)
}

pub fn baseline_distribution(solver: &MetaSolver, m: &PayoffMatrix) -> Result<MetaDistribution> {
    check_square(m)?;
    let t = m.rows();
    match solver {
        MetaSolver::Uniform => Ok(MetaDistribution::uniform(t)),
        MetaSolver::LastAgent => Ok(MetaDistribution::one_hot(t, t - 1)),
        MetaSolver::Nash { fp_iters } => {
            if *fp_iters == 0 {
                return Err(Error::Config("fictitious play needs at least one round".into()));
            }
            MetaDistribution::new(fictitious_play(m, *fp_iters))
        }
        MetaSolver::Learned(p) => solver_forward(p, m),
    }
}

/// `W x + b` for a block `(W, b)`.
pub(crate) fn dense<R: Real>((w, b): (&[R], &[R]), x: &[R]) -> Vec<R> {
    let n = x.len();
    b.iter()
        .enumerate()
        .map(|(o, &bias)| R::dot(&w[o * n..(o + 1) * n], x) + bias)
        .collect()
}

pub(crate) fn relu_all<R: Real>(x: Vec<R>) -> Vec<R> {
    x.into_iter().map(Real::relu).collect()
}

/// Elementwise mean of equally sized vectors.
pub(crate) fn mean_pool<R: Real>(items: &[Vec<R>]) -> Vec<R> {
    let inv = 1.0 / items.len() as f64;
    (0..items[0].len())
        .map(|d| {
            let col: Vec<R> = items.iter().map(|v| v[d]).collect();
            R::sum(&col).scale(inv)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use rand::Rng as _;

    fn random_matrix(n: usize, seed: u64) -> PayoffMatrix {
        let mut rng = rng_from(&[seed]);
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..i {
                let v: f64 = rng.random_range(-2.0..2.0);
                rows[i][j] = v;
                rows[j][i] = -v;
            }
        }
        PayoffMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn single_member_gets_all_mass() {
        let m = PayoffMatrix::from_rows(&[vec![0.0]]).unwrap();
        for arch in [Arch::Mlp, Arch::Conv1d, Arch::Gru] {
            let p = init_params(arch, 4, 0).unwrap();
            assert_eq!(solver_forward(&p, &m).unwrap().weights(), &[1.0]);
        }
    }

    #[test]
    fn outputs_are_on_the_simplex() {
        for arch in [Arch::Mlp, Arch::Conv1d, Arch::Gru] {
            let p = init_params(arch, 6, 1).unwrap();
            for n in 1..=12 {
                let pi = solver_forward(&p, &random_matrix(n, n as u64)).unwrap();
                let s: f64 = pi.weights().iter().sum();
                assert!((s - 1.0).abs() < 1e-9);
                assert!(pi.weights().iter().all(|&w| w >= 0.0));
            }
        }
    }

    #[test]
    fn baselines() {
        let m = random_matrix(4, 0);
        assert_eq!(baseline_distribution(&MetaSolver::Uniform, &m).unwrap().weights(), &[0.25; 4]);
        let m3 = random_matrix(3, 0);
        assert_eq!(
            baseline_distribution(&MetaSolver::LastAgent, &m3).unwrap().weights(),
            &[0.0, 0.0, 1.0]
        );
        assert!(baseline_distribution(&MetaSolver::Nash { fp_iters: 0 }, &m).is_err());
    }

    #[test]
    fn non_square_is_rejected() {
        let m = PayoffMatrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        let p = init_params(Arch::Mlp, 4, 0).unwrap();
        assert!(solver_forward(&p, &m).is_err());
    }

    #[test]
    fn forward_is_pure() {
        let p = init_params(Arch::Gru, 5, 2).unwrap();
        let m = random_matrix(6, 3);
        assert_eq!(solver_forward(&p, &m).unwrap(), solver_forward(&p, &m).unwrap());
    }
}
