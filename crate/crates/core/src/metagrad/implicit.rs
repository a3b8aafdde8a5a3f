//! Implicit-function-theorem best responses.
//!
//! At a stationary point `g(φ*, ξ) = 0` of the best-response objective, with
//! `ξ` the upstream meta-distribution and population,
//! `dφ*/dξ = (-H + λI)⁻¹ ∂g/∂ξ` where `H = ∂g/∂φ` is the (negative
//! semi-definite, at a maximum) Hessian. On the tape, `g(φ*, ξ)` is recorded
//! with `φ*` held constant; fresh leaves stand for `φ*`, and their adjoint
//! `v` is pushed back into the recorded `g` as `(-H + λI)⁻¹ v`.

use nalgebra::{DMatrix, DVector};

use super::{GdSettings, InnerSolver, MetaGradConfig};
use crate::error::{Error, Result};
use crate::games::{GameInstance, Seat};
use crate::oracles::gradient_ascent;
use crate::real::{constants, l2_norm, values};
use crate::tape::{Tape, Var};

pub(crate) struct Implicit<'t> {
    tape: &'t Tape,
    cfg: MetaGradConfig,
}

impl<'t> Implicit<'t> {
    pub(crate) fn new(tape: &'t Tape, cfg: &MetaGradConfig) -> Self {
        Self { tape, cfg: *cfg }
    }
}

/// Cholesky factor of `-H + λI`, rejecting indefinite or badly conditioned
/// systems.
pub(crate) fn regularised_system(hessian: &[Vec<f64>], lambda: f64, max_condition: f64) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = hessian.len();
    let a = DMatrix::from_fn(n, n, |i, j| {
        let sym = -0.5 * (hessian[i][j] + hessian[j][i]);
        if i == j {
            sym + lambda
        } else {
            sym
        }
    });
    let eig = a.clone().symmetric_eigenvalues();
    let min = eig.min();
    let max = eig.max();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= max_condition) {
        return Err(Error::IllConditioned { condition });
    }
    a.cholesky().ok_or(Error::IllConditioned { condition })
}

impl<'t> InnerSolver<Var<'t>> for Implicit<'t> {
    fn best_response(
        &self,
        game: &GameInstance,
        init: Vec<f64>,
        pi: &[Var<'t>],
        members: &[&[Var<'t>]],
        gd: &GdSettings,
    ) -> Result<Vec<Var<'t>>> {
        let tol = self.cfg.stationarity_tol;
        let pi_v = values(pi);
        let members_v: Vec<Vec<f64>> = members.iter().map(|m| values(m)).collect();
        let refs: Vec<&[f64]> = members_v.iter().map(Vec::as_slice).collect();

        let (phi, _) = gradient_ascent(game, init, &pi_v, &refs, Seat::Row, self.cfg.max_inner_steps, gd.lr, Some(tol))?;
        let norm = l2_norm(&game.aggregate_grad(&phi, &pi_v, &refs)?);
        if !(norm < tol) {
            return Err(Error::NotStationary { norm, threshold: tol });
        }

        let g_star = game.aggregate_grad(&constants::<Var>(&phi), pi, members)?;
        let hessian = game.aggregate_hessian(&phi, &pi_v, &refs)?;
        let chol = regularised_system(&hessian, self.cfg.lambda, self.cfg.max_condition)?;
        let map = move |v: &[f64]| chol.solve(&DVector::from_column_slice(v)).as_slice().to_vec();
        Ok(self.tape.implicit_leaves(&phi, &g_star, Box::new(map)))
    }
}
