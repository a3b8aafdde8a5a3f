//! Non-transitive mixture game on the plane.
//!
//! A policy is a point `x ∈ R²`. Its weight on mode `m` is the Gaussian
//! density `u_m(x) = N(x; μ_m, b² I)`. With `S` the cyclic 7-mode interaction
//! matrix (each mode beats the next three and loses to the previous three)
//!
//! ```text
//! M(x, y) = u(x)ᵀ S u(y) + 1ᵀ u(x) - 1ᵀ u(y)
//! ```
//!
//! The linear terms reward climbing towards any mode; the bilinear term adds
//! the cycle.

use std::f64::consts::PI;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::seed::Rng;

pub const RPS_MODES: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct Rps2dPayload {
    pub centers: [[f64; 2]; RPS_MODES],
    pub interaction: [[f64; RPS_MODES]; RPS_MODES],
    pub bandwidth: f64,
}

pub fn cyclic_interaction() -> [[f64; RPS_MODES]; RPS_MODES] {
    let mut s = [[0.0; RPS_MODES]; RPS_MODES];
    for (i, row) in s.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = match (j + RPS_MODES - i) % RPS_MODES {
                0 => 0.0,
                1..=3 => 1.0,
                _ => -1.0,
            };
        }
    }
    s
}

impl Rps2dPayload {
    pub fn new(centers: [[f64; 2]; RPS_MODES], bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Config(format!("bandwidth must be positive, got {bandwidth}")));
        }
        for i in 0..RPS_MODES {
            for j in 0..i {
                if centers[i] == centers[j] {
                    return Err(Error::Config("mode centres must be pairwise distinct".into()));
                }
            }
        }
        Ok(Self {
            centers,
            interaction: cyclic_interaction(),
            bandwidth,
        })
    }

    pub fn sample(bandwidth: f64, range: f64, rng: &mut Rng) -> Result<Self> {
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::Config(format!("centre range must be positive, got {range}")));
        }
        let mut centers = [[0.0; 2]; RPS_MODES];
        for c in &mut centers {
            *c = [rng.random_range(-range..range), rng.random_range(-range..range)];
        }
        Self::new(centers, bandwidth)
    }

    /// Mode weights `u(x)`.
    pub fn modes<R: Real>(&self, x: &[R]) -> Vec<R> {
        let b2 = self.bandwidth * self.bandwidth;
        let norm = 1.0 / (2.0 * PI * b2);
        self.centers
            .iter()
            .map(|c| {
                let dx = x[0] - R::cst(c[0]);
                let dy = x[1] - R::cst(c[1]);
                (dx * dx + dy * dy).scale(-0.5 / b2).exp().scale(norm)
            })
            .collect()
    }

    /// `S ū + W 1` for a mixture with mode weights `ū` and total weight `W`.
    fn coefficients<R: Real>(&self, mean_modes: &[R], total: R) -> Vec<R> {
        self.interaction
            .iter()
            .map(|row| R::weighted_sum(row, mean_modes) + total)
            .collect()
    }

    pub fn payoff<R: Real>(&self, row: &[R], col: &[R]) -> R {
        let uy = self.modes(col);
        let c = self.coefficients(&uy, R::cst(1.0));
        R::dot(&c, &self.modes(row)) - R::sum(&uy)
    }

    fn mixture<R: Real>(&self, weights: &[R], members: &[&[R]]) -> (Vec<R>, R, R) {
        let per_member: Vec<Vec<R>> = members.iter().map(|m| self.modes(m)).collect();
        let mean: Vec<R> = (0..RPS_MODES)
            .map(|m| {
                let col: Vec<R> = per_member.iter().map(|u| u[m]).collect();
                R::dot(weights, &col)
            })
            .collect();
        let mass: Vec<R> = per_member.iter().map(|u| R::sum(u)).collect();
        (mean, R::sum(weights), R::dot(weights, &mass))
    }

    pub fn aggregate_payoff<R: Real>(&self, x: &[R], weights: &[R], members: &[&[R]]) -> R {
        let (mean, total, mass) = self.mixture(weights, members);
        R::dot(&self.coefficients(&mean, total), &self.modes(x)) - mass
    }

    pub fn aggregate_grad<R: Real>(&self, x: &[R], weights: &[R], members: &[&[R]]) -> Vec<R> {
        let (mean, total, _) = self.mixture(weights, members);
        let c = self.coefficients(&mean, total);
        let ux = self.modes(x);
        let inv_b2 = 1.0 / (self.bandwidth * self.bandwidth);
        // ∂u_m/∂x = u_m (μ_m - x) / b²
        let w: Vec<R> = c.iter().zip(&ux).map(|(&ci, &ui)| (ci * ui).scale(inv_b2)).collect();
        (0..2)
            .map(|d| {
                let offsets: Vec<R> = self.centers.iter().map(|mu| R::cst(mu[d]) - x[d]).collect();
                R::dot(&w, &offsets)
            })
            .collect()
    }
}
