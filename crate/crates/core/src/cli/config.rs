use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::formulas::{steps_for_time, ProductFormulaSchedule};
use crate::models::{ModelSpec, SplitHamiltonian};
use crate::variational::{LossConfig, OptimizerOptions, VariationalParameters};

pub const MAX_SITES: usize = 14;

/// One experiment, read from a TOML file. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d::n_sites")]
    pub n_sites: usize,
    #[serde(default = "d::schedule_order")]
    pub schedule_order: usize,
    #[serde(default = "d::dt")]
    pub dt: f64,
    /// Length of recorded trajectories.
    #[serde(default = "d::t_max")]
    pub t_max: f64,
    /// Trajectories keep every `record_every`-th Trotter step.
    #[serde(default = "d::record_every")]
    pub record_every: usize,
    /// Defaults to site 11 at `L = 12` and site `L − 1` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracked_sites: Option<Vec<usize>>,
    #[serde(default = "d::baseline_size")]
    pub baseline_size: usize,
    #[serde(default = "d::weight_cutoff")]
    pub weight_cutoff: f64,
    #[serde(default = "d::top_k")]
    pub top_k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default = "d::model")]
    pub model: ModelSpec,
    #[serde(default)]
    pub loss: LossSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
}

/// Initial state for `simulate`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialState {
    /// Haar-random product state drawn from the run seed.
    #[default]
    Haar,
    /// `|1010…⟩`.
    Neel,
    /// `|00…0⟩`.
    AllUp,
    XPolarized,
    Product { theta: Vec<f64>, phi: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    #[serde(default = "d::l1")]
    pub l1: f64,
    #[serde(default = "d::l2")]
    pub l2: f64,
    #[serde(default = "d::t_l")]
    pub t_l: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        Self {
            l1: d::l1(),
            l2: d::l2(),
            t_l: d::t_l(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(default = "d::iters")]
    pub iters: usize,
    #[serde(default = "d::lr0")]
    pub lr0: f64,
    #[serde(default = "d::lr_min")]
    pub lr_min: f64,
    #[serde(default = "d::restarts")]
    pub restarts: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            iters: d::iters(),
            lr0: d::lr0(),
            lr_min: d::lr_min(),
            restarts: d::restarts(),
        }
    }
}

mod d {
    use crate::models::ModelSpec;
    use crate::variational::{LossConfig, OptimizerOptions};

    pub fn n_sites() -> usize {
        8
    }
    pub fn schedule_order() -> usize {
        2
    }
    pub fn dt() -> f64 {
        0.01
    }
    pub fn t_max() -> f64 {
        10.0
    }
    pub fn record_every() -> usize {
        10
    }
    pub fn baseline_size() -> usize {
        100
    }
    pub fn weight_cutoff() -> f64 {
        1e-4
    }
    pub fn top_k() -> usize {
        20
    }
    pub fn model() -> ModelSpec {
        ModelSpec::Heisenberg { h_x: 0.5 }
    }
    pub fn l1() -> f64 {
        LossConfig::default().l1
    }
    pub fn l2() -> f64 {
        LossConfig::default().l2
    }
    pub fn t_l() -> f64 {
        LossConfig::default().t_l
    }
    pub fn iters() -> usize {
        OptimizerOptions::default().iters
    }
    pub fn lr0() -> f64 {
        OptimizerOptions::default().lr0
    }
    pub fn lr_min() -> f64 {
        OptimizerOptions::default().lr_min
    }
    pub fn restarts() -> usize {
        OptimizerOptions::default().restarts
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("every field has a default")
    }
}

/// 1-based line of the first `key = …` assignment in `source`.
fn key_line(source: &str, key: &str) -> Option<usize> {
    source.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

impl RunConfig {
    pub fn from_toml(source: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(source).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate_with_source(Some(source))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.validate_with_source(None)
    }

    fn validate_with_source(&self, source: Option<&str>) -> Result<(), CliError> {
        let fail = |key: &str, msg: String| {
            let at = source
                .and_then(|s| key_line(s, key))
                .map(|l| format!("line {l}: "))
                .unwrap_or_default();
            Err(CliError::Config(format!("{at}{key}: {msg}")))
        };
        if !(2..=MAX_SITES).contains(&self.n_sites) {
            return fail("n_sites", format!("must lie in 2..={MAX_SITES}, got {}", self.n_sites));
        }
        if let Err(e) = self.model.build(self.n_sites) {
            return fail("name", e.to_string());
        }
        if let Err(e) = ProductFormulaSchedule::for_order(self.schedule_order) {
            return fail("schedule_order", e.to_string());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return fail("dt", format!("must be positive, got {}", self.dt));
        }
        if let Err(e) = steps_for_time(self.t_max, self.dt) {
            return fail("t_max", e.to_string());
        }
        if self.record_every == 0 {
            return fail("record_every", "must be at least 1".into());
        }
        for &s in self.tracked_sites() .iter() {
            if s == 0 || s > self.n_sites {
                return fail("tracked_sites", format!("site {s} outside 1..={}", self.n_sites));
            }
        }
        if self.baseline_size == 0 {
            return fail("baseline_size", "must be at least 1".into());
        }
        if !(self.weight_cutoff > 0.0 && self.weight_cutoff < 1.0) {
            return fail("weight_cutoff", format!("must lie in (0, 1), got {}", self.weight_cutoff));
        }
        if self.top_k < 2 {
            return fail("top_k", format!("must be at least 2, got {}", self.top_k));
        }
        if let InitialState::Product { theta, phi } = &self.initial_state {
            if theta.len() != self.n_sites || phi.len() != self.n_sites {
                return fail("theta", format!("theta and phi need {} entries each", self.n_sites));
            }
        }
        let loss = self.loss_config();
        if let Err(e) = loss.validate() {
            let key = if self.loss.l1 < 0.0 || self.loss.l2 < 0.0 { "l2" } else { "t_l" };
            return fail(key, e.to_string());
        }
        if let Err(e) = self.optimizer_options().validate() {
            let key = if self.optimizer.iters == 0 { "iters" } else if self.optimizer.restarts == 0 { "restarts" } else { "lr0" };
            return fail(key, e.to_string());
        }
        Ok(())
    }

    pub fn tracked_sites(&self) -> Vec<usize> {
        match &self.tracked_sites {
            Some(s) => s.clone(),
            None if self.n_sites == 12 => vec![11],
            None => vec![self.n_sites - 1],
        }
    }

    pub fn hamiltonian(&self) -> crate::Result<SplitHamiltonian> {
        self.model.build(self.n_sites)
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            l1: self.loss.l1,
            l2: self.loss.l2,
            t_l: self.loss.t_l,
            dt: self.dt,
            schedule_order: self.schedule_order,
        }
    }

    pub fn optimizer_options(&self) -> OptimizerOptions {
        OptimizerOptions {
            iters: self.optimizer.iters,
            lr0: self.optimizer.lr0,
            lr_min: self.optimizer.lr_min,
            seed: self.seed,
            restarts: self.optimizer.restarts,
        }
    }

    pub fn n_record_steps(&self) -> usize {
        steps_for_time(self.t_max, self.dt).expect("validated")
    }

    pub fn product_parameters(&self) -> Option<VariationalParameters> {
        match &self.initial_state {
            InitialState::Product { theta, phi } => Some(VariationalParameters {
                theta: theta.clone(),
                phi: phi.clone(),
            }),
            InitialState::XPolarized => Some(VariationalParameters::x_polarized(self.n_sites)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_sites, 8);
        assert_eq!(cfg.tracked_sites(), vec![7]);
        assert_eq!(cfg.loss_config(), LossConfig::default());
    }

    #[test]
    fn tracked_site_default_at_twelve() {
        let cfg = RunConfig {
            n_sites: 12,
            ..RunConfig::default()
        };
        assert_eq!(cfg.tracked_sites(), vec![11]);
    }

    #[test]
    fn round_trip_through_toml() {
        let src = r#"
seed = 3
n_sites = 6
tracked_sites = [2, 5]
initial_state = { product = { theta = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6], phi = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0] } }

[model]
name = "stark"
j_x = 1.0
h_x = 0.8
h_y = 0.9
h_z = 4.0

[optimizer]
iters = 5
"#;
        let cfg = RunConfig::from_toml(src).unwrap();
        let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.optimizer.iters, 5);
        assert_eq!(cfg.optimizer.restarts, 8);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for src in [
            "sed = 1",
            "[model]\nname = \"pxp\"\nh_x = 1.0",
            "[optimizer]\nlearning_rate = 0.1",
            "[loss]\nl3 = 0.0",
        ] {
            let err = RunConfig::from_toml(src).unwrap_err();
            assert!(matches!(err, CliError::Config(_)), "{src}");
        }
    }

    #[test]
    fn validation_reports_line() {
        let src = "seed = 1\n\ndt = 0.01\nt_max = 0.015\n";
        let CliError::Config(msg) = RunConfig::from_toml(src).unwrap_err() else {
            panic!()
        };
        assert!(msg.starts_with("line 4: t_max"), "{msg}");
        let CliError::Config(msg) = RunConfig::from_toml("n_sites = 8\ntracked_sites = [9]").unwrap_err() else {
            panic!()
        };
        assert!(msg.starts_with("line 2"), "{msg}");
        let CliError::Config(msg) = RunConfig::from_toml("seed = 1\nn_sites = \"x\"").unwrap_err() else {
            panic!()
        };
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn bad_optimizer_and_loss_settings() {
        assert!(RunConfig::from_toml("[optimizer]\nlr0 = 1e-5").is_err());
        assert!(RunConfig::from_toml("[optimizer]\niters = 0").is_err());
        assert!(RunConfig::from_toml("[loss]\nt_l = 1.005").is_err());
        assert!(RunConfig::from_toml("schedule_order = 3").is_err());
        assert!(RunConfig::from_toml("n_sites = 2\n[model]\nname = \"pxp\"").is_err());
    }
}
