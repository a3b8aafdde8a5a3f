//! Experiment configuration.
//!
//! A config file is flat TOML with one key per hyperparameter
//! (`psro_iterations`, `window_size`, `inner_lr`, ...). Missing keys
//! take the defaults of the selected profile for the configured game kind;
//! unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::es::{ControlVariate, EsConfig};
use crate::games::{GameConfig, GameKind};
use crate::oracles::{ExploitMode, OracleConfig, OracleInit, OracleMethod};
use crate::psro::PsroConfig;
use crate::solvers::{Arch, BaselineKind, DEFAULT_FP_ITERS};
use crate::train::{ImplicitSettings, TrainConfig, TrainerMode, DEFAULT_GRADIENT_CEILING};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Full-scale hyperparameters.
    Full,
    /// Scaled down to run on a desktop in minutes.
    #[default]
    Desk,
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Profile::Full),
            "desk" => Ok(Profile::Desk),
            other => Err(Error::Config(format!("unknown profile `{other}` (expected full or desk)"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Full => "full",
            Profile::Desk => "desk",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleName {
    GradientDescent,
    Reinforce,
    TabularExact,
    TabularV1,
    TabularV2,
}

/// Every configurable key. Zero disables `gradient_clip` and
/// `lr_schedule_step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub run_id: String,
    pub seed: u64,
    pub out_dir: PathBuf,

    pub game: GameKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff_file: Option<PathBuf>,
    pub gos_dim: usize,
    pub gos_sigma_w: f64,
    pub gos_sigma_s: f64,
    pub lotto_customers: usize,
    pub lotto_servers: usize,
    pub rps_bandwidth: f64,
    pub rps_center_range: f64,
    pub imp_horizon: usize,

    pub model_type: Arch,
    pub hidden_size: usize,

    pub psro_iterations: usize,
    pub initial_pool_size: usize,
    pub window_size: usize,
    pub oracle_method: OracleName,
    pub oracle_init: OracleInit,
    pub inner_lr: f64,
    pub inner_gd_steps: usize,
    /// Inner-loop gradient norm break value; 0 runs all steps.
    pub inner_grad_break: f64,
    pub trajectories_per_update: usize,
    pub exploitability_lr: f64,
    pub exploitability_steps: usize,
    pub exploitability_mode: ExploitMode,

    pub trainer: TrainerMode,
    pub es_perturbations: usize,
    pub es_sigma: f64,
    pub es_antithetic: bool,
    pub es_control_variate: ControlVariate,
    pub outer_lr: f64,
    pub meta_training_steps: usize,
    pub meta_batch_size: usize,
    pub lr_schedule_step: usize,
    pub lr_schedule_gamma: f64,
    pub gradient_clip: f64,
    pub gradient_ceiling: f64,
    pub implicit_lambda: f64,
    pub implicit_max_inner_steps: usize,
    pub implicit_max_condition: f64,

    pub eval_games: usize,
    pub nash_fp_iterations: usize,
    pub baselines: Vec<BaselineKind>,
    pub sweep_dims: Vec<usize>,
}

impl Settings {
    /// Profile defaults for a game kind.
    pub fn defaults(profile: Profile, game: GameKind) -> Self {
        let mut s = Settings {
            run_id: "run".into(),
            seed: 0,
            out_dir: PathBuf::from("out"),
            game,
            payoff_file: None,
            gos_dim: 200,
            gos_sigma_w: 1.0,
            gos_sigma_s: 1.0,
            lotto_customers: 9,
            lotto_servers: 16,
            rps_bandwidth: 1.0,
            rps_center_range: 2.0,
            imp_horizon: 50,
            model_type: Arch::Gru,
            hidden_size: 64,
            psro_iterations: 20,
            initial_pool_size: 1,
            window_size: 5,
            oracle_method: OracleName::GradientDescent,
            oracle_init: OracleInit::Random,
            inner_lr: 25.0,
            inner_gd_steps: 5,
            inner_grad_break: 0.0,
            trajectories_per_update: 32,
            exploitability_lr: 10.0,
            exploitability_steps: 20,
            exploitability_mode: ExploitMode::Oracle,
            trainer: TrainerMode::Direct,
            es_perturbations: 30,
            es_sigma: 0.1,
            es_antithetic: true,
            es_control_variate: ControlVariate::ForwardFd,
            outer_lr: 0.01,
            meta_training_steps: 100,
            meta_batch_size: 5,
            lr_schedule_step: 0,
            lr_schedule_gamma: 1.0,
            gradient_clip: 1.0,
            gradient_ceiling: DEFAULT_GRADIENT_CEILING,
            implicit_lambda: 1e-3,
            implicit_max_inner_steps: 10_000,
            implicit_max_condition: 1e12,
            eval_games: 20,
            nash_fp_iterations: DEFAULT_FP_ITERS,
            baselines: vec![BaselineKind::Uniform, BaselineKind::Nash, BaselineKind::LastAgent],
            sweep_dims: vec![200, 250, 300],
        };
        match game {
            GameKind::Gos | GameKind::ExternalMatrix => {}
            GameKind::Lotto => {
                s.outer_lr = 0.001;
                s.inner_lr = 20.0;
                s.inner_gd_steps = 20;
                s.exploitability_lr = 20.0;
                s.exploitability_steps = 30;
            }
            GameKind::Rps2d => {
                s.model_type = Arch::Conv1d;
                s.outer_lr = 0.007;
                s.meta_training_steps = 400;
                s.meta_batch_size = 8;
                s.lr_schedule_step = 100;
                s.lr_schedule_gamma = 0.3;
                s.gradient_clip = 2.0;
                s.psro_iterations = 15;
                s.window_size = 9;
                s.inner_lr = 2.0;
                s.exploitability_lr = 2.0;
            }
            GameKind::Imp => {
                s.trainer = TrainerMode::Es;
                s.oracle_method = OracleName::Reinforce;
                s.outer_lr = 0.004;
                s.meta_training_steps = 50;
                s.meta_batch_size = 8;
                s.gradient_clip = 0.002;
                s.psro_iterations = 9;
                s.window_size = 3;
                s.inner_lr = 10.0;
                s.inner_gd_steps = 10;
                s.exploitability_lr = 10.0;
            }
            GameKind::Kuhn => {
                s.model_type = Arch::Conv1d;
                s.trainer = TrainerMode::Es;
                s.oracle_method = OracleName::TabularV1;
                s.exploitability_mode = ExploitMode::Exact;
                s.outer_lr = 0.1;
                s.lr_schedule_step = 50;
                s.lr_schedule_gamma = 0.5;
                s.gradient_clip = 0.0;
                s.psro_iterations = 15;
                s.window_size = 0;
            }
        }
        if profile == Profile::Desk {
            s.hidden_size = 16;
            s.meta_training_steps = s.meta_training_steps.div_ceil(2);
            s.es_perturbations = 16;
            s.lotto_servers = 8;
            s.imp_horizon = 25;
            if matches!(game, GameKind::Gos | GameKind::ExternalMatrix) {
                s.model_type = Arch::Mlp;
                s.trainer = TrainerMode::Es;
                s.gos_dim = 20;
                s.meta_training_steps = 100;
                s.outer_lr = 1.0;
                s.exploitability_mode = ExploitMode::Exact;
                s.sweep_dims = vec![20, 30, 50];
            }
        }
        s
    }

    /// Reads a config file on top of the profile defaults.
    pub fn load(path: &Path, profile: Profile) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, profile)
    }

    pub fn parse(text: &str, profile: Profile) -> Result<Self> {
        let file: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("config is not valid TOML: {e}")))?;
        let game = match file.get("game") {
            None => GameKind::Gos,
            Some(v) => v
                .clone()
                .try_into()
                .map_err(|e: toml::de::Error| Error::Config(format!("key `game`: {e}")))?,
        };
        let mut merged = toml::Table::try_from(Self::defaults(profile, game))
            .map_err(|e| Error::Config(format!("cannot encode defaults: {e}")))?;
        merged.extend(file);
        let s: Settings = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        s.experiment()?;
        Ok(s)
    }

    fn oracle(&self, steps: usize, lr: f64) -> OracleConfig {
        let method = match self.oracle_method {
            OracleName::GradientDescent => OracleMethod::GradDescent {
                steps,
                lr,
                grad_tol: (self.inner_grad_break > 0.0).then_some(self.inner_grad_break),
            },
            OracleName::Reinforce => OracleMethod::Reinforce {
                steps,
                lr,
                batch: self.trajectories_per_update,
            },
            OracleName::TabularExact => OracleMethod::KuhnExact,
            OracleName::TabularV1 => OracleMethod::KuhnApproxV1,
            OracleName::TabularV2 => OracleMethod::KuhnApproxV2,
        };
        OracleConfig {
            method,
            init: self.oracle_init,
        }
    }

    pub fn game_config(&self) -> GameConfig {
        GameConfig {
            gos_dim: self.gos_dim,
            gos_sigma_w: self.gos_sigma_w,
            gos_sigma_s: self.gos_sigma_s,
            lotto_customers: self.lotto_customers,
            lotto_servers: self.lotto_servers,
            rps_bandwidth: self.rps_bandwidth,
            rps_center_range: self.rps_center_range,
            imp_horizon: self.imp_horizon,
        }
    }

    pub fn psro(&self) -> PsroConfig {
        PsroConfig {
            iterations: self.psro_iterations,
            pool_size: self.initial_pool_size,
            oracle: self.oracle(self.inner_gd_steps, self.inner_lr),
            exploit_oracle: self.oracle(self.exploitability_steps, self.exploitability_lr),
            exploit_mode: self.exploitability_mode,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let positive = |v: f64| (v > 0.0).then_some(v);
        TrainConfig {
            game_kind: self.game,
            game: self.game_config(),
            arch: self.model_type,
            width: self.hidden_size,
            psro: self.psro(),
            window: self.window_size,
            mode: self.trainer,
            es: EsConfig {
                n_perturb: self.es_perturbations,
                sigma: self.es_sigma,
                antithetic: self.es_antithetic,
                control_variate: self.es_control_variate,
            },
            implicit: ImplicitSettings {
                lambda: self.implicit_lambda,
                stationarity_tol: positive(self.inner_grad_break).unwrap_or(ImplicitSettings::default().stationarity_tol),
                max_inner_steps: self.implicit_max_inner_steps,
                max_condition: self.implicit_max_condition,
            },
            meta_steps: self.meta_training_steps,
            meta_batch: self.meta_batch_size,
            outer_lr: self.outer_lr,
            lr_step: (self.lr_schedule_step > 0).then_some(self.lr_schedule_step),
            lr_gamma: self.lr_schedule_gamma,
            clip: positive(self.gradient_clip),
            gradient_ceiling: self.gradient_ceiling,
        }
    }

    /// Validates everything that does not need the file system.
    pub fn experiment(&self) -> Result<()> {
        if self.run_id.is_empty() || self.run_id.contains([',', '"', '\n']) {
            return Err(Error::Config("run_id must be non-empty and free of commas and quotes".into()));
        }
        if self.eval_games == 0 {
            return Err(Error::Config("eval_games must be at least 1".into()));
        }
        if self.nash_fp_iterations == 0 {
            return Err(Error::Config("nash_fp_iterations must be at least 1".into()));
        }
        if self.inner_grad_break < 0.0 || self.gradient_clip < 0.0 {
            return Err(Error::Config("inner_grad_break and gradient_clip must be non-negative".into()));
        }
        if self.sweep_dims.contains(&0) {
            return Err(Error::Config("sweep_dims must be positive".into()));
        }
        if (self.game == GameKind::ExternalMatrix) != self.payoff_file.is_some() {
            return Err(Error::Config("payoff_file is required for, and only valid with, game = \"external_matrix\"".into()));
        }
        let psro = self.psro();
        psro.validate()?;
        psro.oracle.compatible_with(self.game)?;
        psro.exploit_oracle.compatible_with(self.game)?;
        if self.game != GameKind::ExternalMatrix {
            self.train_config().validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_profile_defaults() {
        let s = Settings::parse("", Profile::Desk).unwrap();
        assert_eq!(s, Settings::defaults(Profile::Desk, GameKind::Gos));
        assert_eq!(s.gos_dim, 20);
    }

    #[test]
    fn full_gos_matches_the_defaults() {
        let s = Settings::parse("", Profile::Full).unwrap();
        let t = s.train_config();
        assert_eq!((t.psro.iterations, t.window, t.meta_batch), (20, 5, 5));
        assert_eq!(t.outer_lr, 0.01);
        assert_eq!(t.clip, Some(1.0));
        assert_eq!(t.psro.oracle, OracleConfig::gd(5, 25.0));
        assert_eq!(t.psro.exploit_oracle, OracleConfig::gd(20, 10.0));
    }

    #[test]
    fn game_kind_selects_defaults_and_keys_override() {
        let s = Settings::parse("game = \"rps2d\"\nwindow_size = 4\n", Profile::Full).unwrap();
        assert_eq!(s.psro_iterations, 15);
        assert_eq!(s.window_size, 4);
        assert_eq!(s.train_config().lr_step, Some(100));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = Settings::parse("psro_iteration = 3", Profile::Desk).unwrap_err();
        assert!(e.to_string().contains("psro_iteration"), "{e}");
    }

    #[test]
    fn wrong_types_and_ranges_are_rejected() {
        assert!(Settings::parse("psro_iterations = \"many\"", Profile::Desk).is_err());
        assert!(Settings::parse("es_sigma = 0.0", Profile::Desk).is_err());
        assert!(Settings::parse("game = \"chess\"", Profile::Desk).is_err());
        assert!(Settings::parse("game = \"external_matrix\"", Profile::Desk).is_err());
    }

    #[test]
    fn kuhn_defaults_are_consistent() {
        for p in [Profile::Full, Profile::Desk] {
            let s = Settings::parse("game = \"kuhn\"", p).unwrap();
            assert_eq!(s.trainer, TrainerMode::Es);
            assert_eq!(s.psro().oracle.method, OracleMethod::KuhnApproxV1);
        }
    }

    #[test]
    fn zero_disables_clip_and_schedule() {
        let s = Settings::parse("gradient_clip = 0.0\nlr_schedule_step = 0", Profile::Full).unwrap();
        let t = s.train_config();
        assert_eq!((t.clip, t.lr_step), (None, None));
    }
}
