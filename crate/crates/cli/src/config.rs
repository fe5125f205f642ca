//! Experiment configuration: JSON in, validated struct out.

use std::path::PathBuf;

use nlkw_core::optimizer::{PointwiseOptions, MIN_OBJECTIVE_PATHS};
use nlkw_core::{FamilyKind, Feature, PayoffKind};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KwMethod {
    Analytic,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Pointwise,
    Parametric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub rho: f64,
    pub master_seed: u64,
    pub family: FamilyKind,
    /// Forces `family` to the printed exponential integrand.
    pub use_as_printed_family: bool,
    pub payoff: PayoffKind,
    pub kw_method: KwMethod,
    pub basis: Vec<Feature>,
    pub holdout_fraction: f64,
    pub strategy: StrategyKind,
    pub policy_features: Vec<Feature>,
    pub budget: usize,
    pub fit_paths: usize,
    pub tol_root: f64,
    pub tol_stat: f64,
    pub x_max: f64,
    pub x_max_limit: f64,
    pub eps_ladder: Vec<f64>,
    pub ladder: Vec<usize>,
    pub ladder_paths: usize,
    pub ladder_x: f64,
    pub rho_sweep: Vec<f64>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let pointwise = PointwiseOptions::default();
        Self {
            horizon: 1.0,
            n_steps: 512,
            n_paths: 100_000,
            rho: 0.5,
            master_seed: 20_240_601,
            family: FamilyKind::Exponential,
            use_as_printed_family: false,
            payoff: PayoffKind::Example,
            kw_method: KwMethod::Analytic,
            basis: vec!["w1".parse().expect("built-in feature")],
            holdout_fraction: 0.5,
            strategy: StrategyKind::Pointwise,
            policy_features: vec!["w1".parse().expect("built-in feature")],
            budget: 400,
            fit_paths: 20_000,
            tol_root: pointwise.tol_root_rel,
            tol_stat: pointwise.tol_stat,
            x_max: pointwise.x_max,
            x_max_limit: pointwise.x_max_limit,
            eps_ladder: vec![0.1, 0.05, 0.025],
            ladder: vec![64, 256, 1024],
            ladder_paths: 10_000,
            ladder_x: 1.0,
            rho_sweep: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            out_dir: PathBuf::from("results"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("config is not a JSON object: {0}")]
    Syntax(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Syntax(_) => None,
            ConfigError::UnknownKey(key) | ConfigError::Invalid { key, .. } => Some(key),
        }
    }

    fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

/// Parses a JSON object, filling absent keys with defaults.
///
/// Each key is substituted into the default document on its own so a type
/// error can be attributed to the key that caused it.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let overrides: Map<String, Value> = if text.trim().is_empty() {
        Map::new()
    } else {
        serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?
    };
    let defaults = match serde_json::to_value(ExperimentConfig::default()) {
        Ok(Value::Object(map)) => map,
        _ => unreachable!("config serializes to an object"),
    };
    let mut merged = defaults.clone();
    for (key, value) in overrides {
        if !defaults.contains_key(&key) {
            return Err(ConfigError::UnknownKey(key));
        }
        let mut probe = defaults.clone();
        probe.insert(key.clone(), value.clone());
        if let Err(e) = serde_json::from_value::<ExperimentConfig>(Value::Object(probe)) {
            return Err(ConfigError::invalid(&key, e.to_string()));
        }
        merged.insert(key, value);
    }
    let config: ExperimentConfig = serde_json::from_value(Value::Object(merged))
        .map_err(|e| ConfigError::Syntax(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn to_json(config: &ExperimentConfig) -> String {
    serde_json::to_string_pretty(config).expect("config always serializes")
}

fn positive_finite(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::invalid(
            key,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn unit_interval(key: &str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::invalid(
            key,
            format!("must lie in [0, 1], got {v}"),
        ))
    }
}

impl ExperimentConfig {
    pub fn family(&self) -> FamilyKind {
        if self.use_as_printed_family {
            FamilyKind::ExponentialAsPrinted
        } else {
            self.family
        }
    }

    pub fn pointwise_options(&self) -> PointwiseOptions {
        PointwiseOptions {
            tol_root_rel: self.tol_root,
            tol_stat: self.tol_stat,
            x_max: self.x_max,
            x_max_limit: self.x_max_limit,
            ..PointwiseOptions::default()
        }
    }

    /// Checks every constraint the numerical stages rely on.
    pub fn validate(&self) -> Result<(), ConfigError> {
        positive_finite("T", self.horizon)?;
        if self.n_steps == 0 {
            return Err(ConfigError::invalid("n_steps", "must be at least 1"));
        }
        if self.n_paths < MIN_OBJECTIVE_PATHS {
            return Err(ConfigError::invalid(
                "n_paths",
                format!(
                    "n_paths below minimum {MIN_OBJECTIVE_PATHS} (got {})",
                    self.n_paths
                ),
            ));
        }
        unit_interval("rho", self.rho)?;
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(ConfigError::invalid(
                "holdout_fraction",
                format!("must lie in [0, 1), got {}", self.holdout_fraction),
            ));
        }
        if self.kw_method == KwMethod::Regression {
            if self.basis.is_empty() {
                return Err(ConfigError::invalid(
                    "basis",
                    "regression needs at least one feature",
                ));
            }
            let fitting = self.n_paths - (self.n_paths as f64 * self.holdout_fraction) as usize;
            if fitting < 10 * self.basis.len() {
                return Err(ConfigError::invalid(
                    "basis",
                    format!(
                        "{} features need at least {} fitting paths",
                        self.basis.len(),
                        10 * self.basis.len()
                    ),
                ));
            }
        }
        if self.budget == 0 {
            return Err(ConfigError::invalid("budget", "must be at least 1"));
        }
        if self.fit_paths == 0 {
            return Err(ConfigError::invalid("fit_paths", "must be at least 1"));
        }
        positive_finite("tol_root", self.tol_root)?;
        positive_finite("tol_stat", self.tol_stat)?;
        positive_finite("x_max", self.x_max)?;
        positive_finite("x_max_limit", self.x_max_limit)?;
        if self.x_max_limit < self.x_max {
            return Err(ConfigError::invalid(
                "x_max_limit",
                "must be at least x_max",
            ));
        }
        if self.eps_ladder.is_empty() {
            return Err(ConfigError::invalid("eps_ladder", "must not be empty"));
        }
        for &eps in &self.eps_ladder {
            positive_finite("eps_ladder", eps)?;
        }
        let top = match self.ladder.iter().max() {
            Some(&top) if !self.ladder.contains(&0) => top,
            _ => return Err(ConfigError::invalid("ladder", "needs positive rungs")),
        };
        if let Some(bad) = self.ladder.iter().find(|n| top % **n != 0) {
            return Err(ConfigError::invalid(
                "ladder",
                format!("rung {bad} does not divide {top}"),
            ));
        }
        if self.ladder_paths < 2 {
            return Err(ConfigError::invalid("ladder_paths", "must be at least 2"));
        }
        if !self.ladder_x.is_finite() {
            return Err(ConfigError::invalid("ladder_x", "must be finite"));
        }
        for &rho in &self.rho_sweep {
            unit_interval("rho_sweep", rho)?;
        }
        Ok(())
    }
}
