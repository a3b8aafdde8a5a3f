//! Normal-form games: Games of Skill and externally supplied meta-games.
//!
//! A policy is a vector of logits over pure strategies; the mixed strategy
//! is its softmax.

use rand_distr::Distribution;

use super::normal;
use crate::error::{Error, Result};
use crate::real::{softmax, Real};
use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPayload {
    pub dim: usize,
    /// Row-major `dim × dim` payoff matrix, exactly antisymmetric.
    pub matrix: Vec<f64>,
    /// Largest `|A_ij - G_ij|` removed when antisymmetrising a loaded
    /// matrix; zero for sampled games.
    pub antisymmetry_deviation: f64,
}

impl MatrixPayload {
    /// `G_ij = (W_ij - W_ji) + S_i - S_j` with `W, S` i.i.d. normal.
    pub fn sample_gos(dim: usize, sigma_w: f64, sigma_s: f64, rng: &mut Rng) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("games-of-skill dimension must be positive".into()));
        }
        let w_dist = normal(sigma_w)?;
        let s_dist = normal(sigma_s)?;
        let w: Vec<f64> = (0..dim * dim).map(|_| w_dist.sample(rng)).collect();
        let s: Vec<f64> = (0..dim).map(|_| s_dist.sample(rng)).collect();
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                if i != j {
                    matrix[i * dim + j] = (w[i * dim + j] - w[j * dim + i]) + (s[i] - s[j]);
                }
            }
        }
        // Enforce exact antisymmetry regardless of rounding in the sums above.
        for i in 0..dim {
            for j in 0..i {
                matrix[i * dim + j] = -matrix[j * dim + i];
            }
        }
        Ok(Self {
            dim,
            matrix,
            antisymmetry_deviation: 0.0,
        })
    }

    /// Projects an arbitrary square matrix onto its antisymmetric part
    /// `(A - Aᵀ) / 2`, recording the largest change.
    pub fn antisymmetrize(dim: usize, raw: &[f64]) -> Result<Self> {
        if dim == 0 || raw.len() != dim * dim {
            return Err(Error::Matrix(format!(
                "expected {dim}x{dim} entries, got {}",
                raw.len()
            )));
        }
        let mut matrix = vec![0.0; dim * dim];
        let mut deviation: f64 = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let g = 0.5 * (raw[i * dim + j] - raw[j * dim + i]);
                matrix[i * dim + j] = g;
                deviation = deviation.max((raw[i * dim + j] - g).abs());
            }
        }
        Ok(Self {
            dim,
            matrix,
            antisymmetry_deviation: deviation,
        })
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    /// `G v`
    fn apply<R: Real>(&self, v: &[R]) -> Vec<R> {
        (0..self.dim).map(|i| R::weighted_sum(self.row(i), v)).collect()
    }

    pub fn payoff<R: Real>(&self, row: &[R], col: &[R]) -> R {
        let p = softmax(row);
        let q = softmax(col);
        R::dot(&p, &self.apply(&q))
    }

    /// `Σ_k w_k softmax(φ_k)`
    fn mixture<R: Real>(&self, weights: &[R], members: &[&[R]]) -> Vec<R> {
        let mixed: Vec<Vec<R>> = members.iter().map(|m| softmax(m)).collect();
        (0..self.dim)
            .map(|i| {
                let column: Vec<R> = mixed.iter().map(|p| p[i]).collect();
                R::dot(weights, &column)
            })
            .collect()
    }

    pub fn aggregate_payoff<R: Real>(&self, x: &[R], weights: &[R], members: &[&[R]]) -> R {
        let p = softmax(x);
        R::dot(&p, &self.apply(&self.mixture(weights, members)))
    }

    /// `∂/∂x softmax(x)ᵀ G p̄ = p ⊙ (v - pᵀv)` with `v = G p̄`.
    pub fn aggregate_grad<R: Real>(&self, x: &[R], weights: &[R], members: &[&[R]]) -> Vec<R> {
        let p = softmax(x);
        let v = self.apply(&self.mixture(weights, members));
        let pv = R::dot(&p, &v);
        p.iter().zip(&v).map(|(&pi, &vi)| pi * (vi - pv)).collect()
    }

    pub fn pure_strategy_max(&self, weights: &[f64], members: &[&[f64]]) -> f64 {
        self.apply(&self.mixture(weights, members))
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    #[test]
    fn sampled_matrix_is_exactly_antisymmetric() {
        let g = MatrixPayload::sample_gos(17, 1.0, 1.0, &mut rng_from(&[1])).unwrap();
        for i in 0..17 {
            assert_eq!(g.entry(i, i), 0.0);
            for j in 0..17 {
                assert_eq!(g.entry(i, j), -g.entry(j, i));
            }
        }
    }

    #[test]
    fn antisymmetrize_reports_deviation() {
        let raw = [0.0, 1.0, -1.0, 0.0];
        assert_eq!(MatrixPayload::antisymmetrize(2, &raw).unwrap().antisymmetry_deviation, 0.0);
        let raw = [1.0, 3.0, 1.0, 0.0];
        let m = MatrixPayload::antisymmetrize(2, &raw).unwrap();
        assert_eq!(m.matrix, vec![0.0, 1.0, -1.0, 0.0]);
        assert_eq!(m.antisymmetry_deviation, 2.0);
    }

    #[test]
    fn uniform_row_gradient_is_softmax_jacobian_times_gq() {
        // Rock-paper-scissors.
        let m = MatrixPayload::antisymmetrize(3, &[0., -1., 1., 1., 0., -1., -1., 1., 0.]).unwrap();
        let col = [2.0, 0.0, -1.0];
        let g = m.aggregate_grad(&[0.0; 3], &[1.0], &[&col]);
        let q = softmax(&col);
        let v: Vec<f64> = (0..3).map(|i| (0..3).map(|j| m.entry(i, j) * q[j]).sum()).collect();
        let pv: f64 = v.iter().sum::<f64>() / 3.0;
        for i in 0..3 {
            // Jacobian of softmax at uniform: (diag(p) - p pᵀ) with p = 1/3.
            let expected = (v[i] - pv) / 3.0;
            assert!((g[i] - expected).abs() < 1e-15);
        }
    }
}
