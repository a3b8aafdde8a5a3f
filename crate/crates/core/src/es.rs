//! Evolution-strategies gradient estimates for black-box objectives.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::exec::Execution;
use crate::real::l2_norm;
use crate::seed::{rng_from, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlVariate {
    None,
    /// Subtract `F(θ)` from every perturbed evaluation.
    #[default]
    ForwardFd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsConfig {
    /// Number of sampled directions ε. Antithetic mode evaluates each twice.
    pub n_perturb: usize,
    pub sigma: f64,
    pub antithetic: bool,
    pub control_variate: ControlVariate,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self {
            n_perturb: 30,
            sigma: 0.1,
            antithetic: true,
            control_variate: ControlVariate::ForwardFd,
        }
    }
}

impl EsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_perturb == 0 {
            return Err(Error::Config("es_perturbations must be at least 1".into()));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!("es_sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Where the perturbation stream of one estimate is keyed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerturbKey {
    pub run_seed: u64,
    pub step: u64,
}

/// Direction `ε_i ~ N(0, I)`; depends only on the key and `i`.
pub fn perturbation(dim: usize, key: PerturbKey, i: usize) -> Vec<f64> {
    let mut rng = rng_from(&[stream::PERTURB, key.run_seed, key.step, i as u64]);
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Result of [`es_gradient`].
#[derive(Debug, Clone, PartialEq)]
pub struct EsEstimate {
    pub gradient: Vec<f64>,
    /// Per-game objective at the unperturbed θ.
    pub center: Vec<f64>,
    /// `c_i` with `gradient = mean_i c_i ε_i`.
    pub coefficients: Vec<f64>,
}

impl EsEstimate {
    pub fn center_mean(&self) -> f64 {
        self.center.iter().sum::<f64>() / self.center.len() as f64
    }
}

/// Estimates `∇ mean_k F_k(θ)` with Gaussian smoothing.
///
/// `objective(θ', k)` evaluates game `k`. All `(point, game)` pairs are
/// independent and run through `exec`; the reduction always walks the
/// perturbations in index order, so the estimate does not depend on the
/// execution mode.
pub fn es_gradient<F>(
    objective: F,
    theta: &[f64],
    games: usize,
    cfg: &EsConfig,
    key: PerturbKey,
    exec: Execution,
) -> Result<EsEstimate>
where
    F: Fn(&[f64], usize) -> Result<f64> + Sync + Send,
{
    cfg.validate()?;
    if games == 0 {
        return Err(Error::Config("ES needs at least one game".into()));
    }
    let dim = theta.len();
    let n = cfg.n_perturb;
    let signs: &[f64] = if cfg.antithetic { &[1.0, -1.0] } else { &[1.0] };
    let eps: Vec<Vec<f64>> = exec.map(n, |i| perturbation(dim, key, i));

    // Point 0 is θ itself, then (i, sign) pairs.
    let points = 1 + n * signs.len();
    let values = exec.try_map(points * games, |idx| {
        let (p, k) = (idx / games, idx % games);
        let v = if p == 0 {
            objective(theta, k)?
        } else {
            let (i, s) = ((p - 1) / signs.len(), signs[(p - 1) % signs.len()]);
            let shifted: Vec<f64> = theta
                .iter()
                .zip(&eps[i])
                .map(|(t, e)| t + s * cfg.sigma * e)
                .collect();
            objective(&shifted, k)?
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("ES objective"))
        }
    })?;
    let mean_at = |p: usize| values[p * games..(p + 1) * games].iter().sum::<f64>() / games as f64;

    let center: Vec<f64> = values[..games].to_vec();
    let baseline = match cfg.control_variate {
        ControlVariate::None => 0.0,
        ControlVariate::ForwardFd => mean_at(0),
    };
    let coefficients: Vec<f64> = (0..n)
        .map(|i| {
            if cfg.antithetic {
                (mean_at(1 + 2 * i) - mean_at(2 + 2 * i)) / (2.0 * cfg.sigma)
            } else {
                (mean_at(1 + i) - baseline) / cfg.sigma
            }
        })
        .collect();

    let mut gradient = vec![0.0; dim];
    for (c, e) in coefficients.iter().zip(&eps) {
        for (g, x) in gradient.iter_mut().zip(e) {
            *g += c * x;
        }
    }
    for g in &mut gradient {
        *g /= n as f64;
    }
    ensure_finite(&gradient, "ES gradient")?;
    Ok(EsEstimate {
        gradient,
        center,
        coefficients,
    })
}

/// `θ − β · clipnorm(g, clip)`.
pub fn update_params(theta: &[f64], g: &[f64], lr: f64, clip: Option<f64>) -> Result<Vec<f64>> {
    ensure_len(theta.len(), g.len(), "gradient length")?;
    ensure_finite(g, "meta-gradient")?;
    let norm = l2_norm(g);
    let scale = match clip {
        Some(c) if norm > c => c / norm,
        _ => 1.0,
    };
    Ok(theta.iter().zip(g).map(|(t, d)| t - lr * scale * d).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEY: PerturbKey = PerturbKey { run_seed: 9, step: 0 };

    fn cfg(n: usize, antithetic: bool, cv: ControlVariate) -> EsConfig {
        EsConfig {
            n_perturb: n,
            sigma: 0.1,
            antithetic,
            control_variate: cv,
        }
    }

    #[test]
    fn constant_objective_gives_zero_with_baseline() {
        let est = es_gradient(|_, _| Ok(3.5), &[1.0; 6], 2, &cfg(50, false, ControlVariate::ForwardFd), KEY, Execution::Sequential)
            .unwrap();
        assert!(est.gradient.iter().all(|&g| g == 0.0));
        assert_eq!(est.center, vec![3.5, 3.5]);
    }

    #[test]
    fn antithetic_recovers_linear_coefficients_per_pair() {
        let c = [0.5, -2.0, 1.25, 0.0];
        let f = |t: &[f64], _: usize| Ok(t.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>());
        let est = es_gradient(f, &[0.3, 0.1, -0.7, 2.0], 1, &cfg(4, true, ControlVariate::None), KEY, Execution::Sequential).unwrap();
        for (i, coef) in est.coefficients.iter().enumerate() {
            let e = perturbation(4, KEY, i);
            let exact: f64 = c.iter().zip(&e).map(|(a, b)| a * b).sum();
            assert!((coef - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn execution_modes_are_bitwise_equal() {
        let f = |t: &[f64], k: usize| Ok(t.iter().map(|x| (x * (k + 1) as f64).sin()).sum::<f64>());
        let c = cfg(40, true, ControlVariate::ForwardFd);
        let a = es_gradient(f, &[0.2; 7], 3, &c, KEY, Execution::Sequential).unwrap();
        let b = es_gradient(f, &[0.2; 7], 3, &c, KEY, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let r = es_gradient(|_, _| Ok(f64::NAN), &[0.0; 2], 1, &cfg(2, false, ControlVariate::None), KEY, Execution::Sequential);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn clipping_halves_a_gradient_twice_the_threshold() {
        let theta = [1.0, 1.0];
        let g = [3.0, 4.0];
        let out = update_params(&theta, &g, 1.0, Some(2.5)).unwrap();
        assert!((out[0] - (1.0 - 1.5)).abs() < 1e-15);
        assert!((out[1] - (1.0 - 2.0)).abs() < 1e-15);
        assert_eq!(update_params(&theta, &[0.0, 0.0], 0.01, None).unwrap(), theta.to_vec());
        assert!(update_params(&theta, &[f64::INFINITY, 0.0], 0.01, None).is_err());
    }

    #[test]
    fn invalid_configs() {
        assert!(cfg(0, true, ControlVariate::None).validate().is_err());
        assert!(EsConfig { sigma: 0.0, ..EsConfig::default() }.validate().is_err());
    }
}
