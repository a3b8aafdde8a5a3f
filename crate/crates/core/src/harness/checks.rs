//! Gradient validation suite shared by `gradcheck` and the acceptance tests.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::es::{es_gradient, perturbation, ControlVariate, EsConfig, PerturbKey};
use crate::exec::Execution;
use crate::games::{sample_game, GameConfig, GameKind};
use crate::metagrad::{direct_meta_gradient, finite_diff_meta_gradient, implicit_meta_gradient, MetaGradConfig};
use crate::oracles::{OracleConfig, OracleInit, OracleMethod};
use crate::real::l2_norm;
use crate::seed::{derive_seed, rng_from};
use crate::solvers::{init_params, Arch, MetaSolverParams};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub instances: usize,
    /// Worst case over instances, in the units of `threshold`.
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} {}: worst {:.3e} vs threshold {} over {} instances",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.statistic,
            self.threshold,
            self.instances
        )
    }
}

/// Freshly initialised solvers have zero biases, which puts many ReLU
/// inputs exactly on the kink (the meta-game diagonal is zero). Central
/// differences straddle the kink there, so checks run at a generic point.
pub fn generic_params(arch: Arch, width: usize, seed: u64) -> Result<MetaSolverParams> {
    let p = init_params(arch, width, seed)?;
    let mut rng = rng_from(&[0x6a17, seed]);
    let flat = p.flat.iter().map(|v| v + rng.random_range(-0.05..0.05)).collect();
    Ok(p.with_flat(flat))
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l2_norm(&diff) / l2_norm(b).max(f64::MIN_POSITIVE)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (l2_norm(a) * l2_norm(b))
}

/// Screening attempts per instance before the last point is kept anyway.
const SMOOTH_ATTEMPTS: u64 = 8;

/// Finds parameters where the objective is smooth at the scale of the
/// difference step: central differences at h = 1e-4 and h = 1e-5 must agree
/// to 1e-6. A ReLU kink inside the stencil breaks that agreement and the
/// point is redrawn. The analytic gradient plays no part in the screen.
fn smooth_point(
    game: &crate::games::GameInstance,
    cfg: &MetaGradConfig,
    s: u64,
) -> Result<(MetaSolverParams, Vec<f64>)> {
    let mut last = None;
    for attempt in 0..SMOOTH_ATTEMPTS {
        let seed = if attempt == 0 { s } else { derive_seed(&[0x5300, s, attempt]) };
        let p = generic_params(Arch::Mlp, 8, seed)?;
        let coarse = finite_diff_meta_gradient(&p, game, cfg, s, 1e-4)?;
        let fine = finite_diff_meta_gradient(&p, game, cfg, s, 1e-5)?;
        if rel_err(&coarse, &fine) < 1e-6 {
            return Ok((p, coarse));
        }
        last = Some((p, coarse));
    }
    Ok(last.expect("at least one attempt"))
}

/// Direct meta-gradient against central differences (h = 1e-4) on GoS dim
/// 4, T = 3, full window, Mlp width 8, one-step GD oracle.
pub fn direct_vs_finite_differences(instances: usize, exec: Execution) -> Result<CheckOutcome> {
    let gd = OracleConfig::gd(1, 25.0);
    let cfg = MetaGradConfig {
        iterations: 3,
        window: 3,
        oracle: gd,
        exploit_oracle: gd,
        ..MetaGradConfig::default()
    };
    let game_cfg = GameConfig {
        gos_dim: 4,
        ..GameConfig::default()
    };
    let errs = exec.try_map(instances, |s| {
        let s = s as u64;
        let game = sample_game(GameKind::Gos, &game_cfg, s)?;
        let (p, fd) = smooth_point(&game, &cfg, s)?;
        let (_, g) = direct_meta_gradient(&p, &game, &cfg, s)?;
        Ok(rel_err(&g, &fd))
    })?;
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Ok(CheckOutcome {
        name: "direct meta-gradient vs finite differences (relative L2)",
        instances,
        statistic: worst,
        threshold: 1e-3,
        passed: worst < 1e-3,
    })
}

/// Implicit against fully unrolled meta-gradients on 2D-RPS with inner
/// stationarity below 1e-6; reports the smallest cosine similarity of the
/// full gradients and of their window-only parts.
pub fn implicit_vs_unrolled(instances: usize, exec: Execution) -> Result<CheckOutcome> {
    let gd = OracleConfig {
        method: OracleMethod::GradDescent {
            steps: 20_000,
            lr: 1.0,
            grad_tol: Some(1e-7),
        },
        init: OracleInit::Random,
    };
    let cfg = MetaGradConfig {
        iterations: 3,
        window: 3,
        oracle: gd,
        exploit_oracle: gd,
        lambda: 0.0,
        stationarity_tol: 1e-7,
        max_inner_steps: 20_000,
        ..MetaGradConfig::default()
    };
    // The final exploitability term is shared by both modes and dominates
    // the gradient, so the part flowing through the windowed best responses
    // (full minus window 0) is compared on its own as well.
    let detached = MetaGradConfig { window: 0, ..cfg };
    let cosines = exec.try_map(instances, |s| {
        let s = s as u64;
        let game = sample_game(GameKind::Rps2d, &GameConfig::default(), s)?;
        let p = generic_params(Arch::Mlp, 8, s)?;
        let (_, unrolled) = direct_meta_gradient(&p, &game, &cfg, s)?;
        let (_, implicit) = implicit_meta_gradient(&p, &game, &cfg, s)?;
        let (_, unrolled0) = direct_meta_gradient(&p, &game, &detached, s)?;
        let (_, implicit0) = implicit_meta_gradient(&p, &game, &detached, s)?;
        let sub = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
        let (wu, wi) = (sub(&unrolled, &unrolled0), sub(&implicit, &implicit0));
        // A vanishing gradient would make the cosine meaningless.
        if [&unrolled, &implicit, &wu, &wi].iter().any(|g| l2_norm(g) == 0.0) {
            return Ok(f64::NAN);
        }
        Ok(cosine(&unrolled, &implicit).min(cosine(&wu, &wi)))
    })?;
    let worst = cosines
        .iter()
        .map(|&c| if c.is_nan() { f64::NEG_INFINITY } else { c })
        .fold(f64::INFINITY, f64::min);
    Ok(CheckOutcome {
        name: "implicit vs unrolled meta-gradient (cosine)",
        instances,
        statistic: worst,
        threshold: 0.99,
        passed: worst >= 0.99,
    })
}

/// Result of [`es_calibration`].
#[derive(Debug, Clone, PartialEq)]
pub struct EsCalibration {
    pub outcome: CheckOutcome,
    /// Repetitions where the baseline lowered the per-sample variance.
    pub variance_reduced: usize,
}

/// Sum over coordinates of the sample variance of `c_i ε_i`.
fn contribution_variance(coefficients: &[f64], eps: &[Vec<f64>]) -> f64 {
    let n = coefficients.len() as f64;
    let dim = eps[0].len();
    (0..dim)
        .map(|d| {
            let xs: Vec<f64> = coefficients.iter().zip(eps).map(|(c, e)| c * e[d]).collect();
            let mean = xs.iter().sum::<f64>() / n;
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .sum()
}

/// ES on `F(θ) = ‖θ‖²/2` (dim 10, σ = 0.1, n = 2000, forward-difference
/// baseline) against the analytic gradient `θ`, repeated over independent
/// perturbation streams. Each repetition also compares per-sample variance
/// with the baseline-free estimator on the same perturbations.
pub fn es_calibration(repetitions: usize, exec: Execution) -> Result<EsCalibration> {
    let dim = 10;
    let f = |t: &[f64], _: usize| Ok(0.5 * t.iter().map(|x| x * x).sum::<f64>());
    let with = EsConfig {
        n_perturb: 2000,
        sigma: 0.1,
        antithetic: false,
        control_variate: ControlVariate::ForwardFd,
    };
    let without = EsConfig {
        control_variate: ControlVariate::None,
        ..with
    };
    let mut worst: f64 = 0.0;
    let mut reduced = 0;
    for r in 0..repetitions {
        let mut rng = rng_from(&[0xca1b, r as u64]);
        let theta: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let key = PerturbKey {
            run_seed: 0xca1b,
            step: r as u64,
        };
        let a = es_gradient(f, &theta, 1, &with, key, exec)?;
        let b = es_gradient(f, &theta, 1, &without, key, exec)?;
        worst = worst.max(rel_err(&a.gradient, &theta));
        let eps: Vec<Vec<f64>> = (0..with.n_perturb).map(|i| perturbation(dim, key, i)).collect();
        if contribution_variance(&a.coefficients, &eps) < contribution_variance(&b.coefficients, &eps) {
            reduced += 1;
        }
    }
    Ok(EsCalibration {
        outcome: CheckOutcome {
            name: "ES gradient on a quadratic (relative L2)",
            instances: repetitions,
            statistic: worst,
            threshold: 0.15,
            passed: worst < 0.15 && reduced == repetitions,
        },
        variance_reduced: reduced,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generic_params_move_every_bias() {
        let p = generic_params(Arch::Mlp, 4, 0).unwrap();
        let q = init_params(Arch::Mlp, 4, 0).unwrap();
        assert!(p.flat.iter().zip(&q.flat).all(|(a, b)| a != b && (a - b).abs() < 0.05));
    }

    #[test]
    fn small_suite_passes() {
        assert!(direct_vs_finite_differences(2, Execution::Parallel).unwrap().passed);
        assert!(es_calibration(2, Execution::Parallel).unwrap().outcome.passed);
    }
}
