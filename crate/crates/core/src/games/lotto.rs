//! Differentiable Lotto.
//!
//! A policy holds `k` servers, laid out per server as
//! `[resource_logit, x, y]`. Resources are `softmax(logits)`. Each customer
//! is softly assigned to all `2k` servers of both players by a softmax over
//! negative squared distances, and the payoff is
//! `Σ_i Σ_j (p_j s_ij - q_j s_i(k+j))`.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::real::{softmax, Real};
use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct LottoPayload {
    pub customers: Vec<[f64; 2]>,
    pub servers: usize,
}

struct Split<R> {
    resources: Vec<R>,
    positions: Vec<[R; 2]>,
}

impl LottoPayload {
    pub fn sample(customers: usize, servers: usize, rng: &mut Rng) -> Result<Self> {
        if customers == 0 || servers == 0 {
            return Err(Error::Config(
                "lotto needs at least one customer and one server".into(),
            ));
        }
        let customers = (0..customers)
            .map(|_| [StandardNormal.sample(rng), StandardNormal.sample(rng)])
            .collect();
        Ok(Self { customers, servers })
    }

    pub fn policy_dim(&self) -> usize {
        3 * self.servers
    }

    fn split<R: Real>(&self, policy: &[R]) -> Split<R> {
        let logits: Vec<R> = policy.chunks_exact(3).map(|c| c[0]).collect();
        Split {
            resources: softmax(&logits),
            positions: policy.chunks_exact(3).map(|c| [c[1], c[2]]).collect(),
        }
    }

    /// Soft assignment of customer `c` over `[row servers, col servers]`.
    fn assignment<R: Real>(c: [f64; 2], row: &Split<R>, col: &Split<R>) -> Vec<R> {
        let neg_sq: Vec<R> = row
            .positions
            .iter()
            .chain(&col.positions)
            .map(|v| {
                let dx = R::cst(c[0]) - v[0];
                let dy = R::cst(c[1]) - v[1];
                -(dx * dx + dy * dy)
            })
            .collect();
        softmax(&neg_sq)
    }

    pub fn payoff<R: Real>(&self, row: &[R], col: &[R]) -> R {
        let x = self.split(row);
        let y = self.split(col);
        let signed: Vec<R> = x
            .resources
            .iter()
            .copied()
            .chain(y.resources.iter().map(|&q| -q))
            .collect();
        let per_customer: Vec<R> = self
            .customers
            .iter()
            .map(|&c| R::dot(&signed, &Self::assignment(c, &x, &y)))
            .collect();
        R::sum(&per_customer)
    }

    pub fn grad_row<R: Real>(&self, row: &[R], col: &[R]) -> Vec<R> {
        let k = self.servers;
        let x = self.split(row);
        let y = self.split(col);
        let signed: Vec<R> = x
            .resources
            .iter()
            .copied()
            .chain(y.resources.iter().map(|&q| -q))
            .collect();

        let mut share = vec![R::zero(); k];
        let mut pos_grad = vec![[R::zero(), R::zero()]; k];
        for &c in &self.customers {
            let s = Self::assignment(c, &x, &y);
            let m = R::dot(&signed, &s);
            for j in 0..k {
                share[j] += s[j];
                // ∂/∂v_j of -|c - v_j|^2 is 2 (c - v_j).
                let coef = s[j] * (signed[j] - m) * R::cst(2.0);
                pos_grad[j][0] += coef * (R::cst(c[0]) - x.positions[j][0]);
                pos_grad[j][1] += coef * (R::cst(c[1]) - x.positions[j][1]);
            }
        }
        let p = &x.resources;
        let pa = R::dot(p, &share);
        let mut out = Vec::with_capacity(3 * k);
        for j in 0..k {
            out.push(p[j] * (share[j] - pa));
            out.push(pos_grad[j][0]);
            out.push(pos_grad[j][1]);
        }
        out
    }
}
