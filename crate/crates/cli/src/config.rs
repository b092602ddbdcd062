//! Config resolution: command-line flag, then config file, then built-in default.

use std::fs;
use std::path::Path;

use cvm_core::correlation::DEFAULT_ETA;
use cvm_core::selective::{DEFAULT_SPEED_BETA, DEFAULT_SPEED_EPS};
use cvm_core::variational::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::args::ConfigArgs;
use crate::error::CliError;

/// Every key a config file may set. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub lambda: Option<f64>,
    pub iota: Option<f64>,
    pub tau: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub grad_reg: Option<f64>,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub theta: Option<f64>,
    pub speed_eps: Option<f64>,
    pub speed_beta: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn solver_config(flags: &ConfigArgs, file: &ConfigFile) -> Result<SolverConfig, CliError> {
    let d = SolverConfig::default();
    let cfg = SolverConfig {
        lambda: pick(flags.lambda, file.lambda, d.lambda),
        iota: pick(flags.iota, file.iota, d.iota),
        tau: pick(flags.tau, file.tau, d.tau),
        max_iters: pick(flags.max_iters, file.max_iters, d.max_iters),
        tol: pick(flags.tol, file.tol, d.tol),
        grad_reg: pick(flags.grad_reg, file.grad_reg, d.grad_reg),
        gamma: pick(flags.gamma, file.gamma, d.gamma),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn eta(flag: Option<f64>, file: &ConfigFile) -> Result<f64, CliError> {
    let eta = pick(flag, file.eta, DEFAULT_ETA);
    if !(0.0..=1.0).contains(&eta) {
        return Err(CliError::Validation(format!("eta {eta} outside [0, 1]")));
    }
    Ok(eta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceConfig {
    pub theta: f64,
    pub speed_eps: f64,
    pub speed_beta: f64,
}

pub fn distance_config(
    theta: Option<f64>,
    speed_eps: Option<f64>,
    speed_beta: Option<f64>,
    file: &ConfigFile,
) -> Result<DistanceConfig, CliError> {
    let cfg = DistanceConfig {
        theta: pick(theta, file.theta, 0.0),
        speed_eps: pick(speed_eps, file.speed_eps, DEFAULT_SPEED_EPS),
        speed_beta: pick(speed_beta, file.speed_beta, DEFAULT_SPEED_BETA),
    };
    if !(cfg.theta.is_finite() && cfg.theta >= 0.0) {
        return Err(CliError::Validation(format!("theta must be non-negative, got {}", cfg.theta)));
    }
    if !(cfg.speed_eps > 0.0 && cfg.speed_beta > 0.0) {
        return Err(CliError::Validation("speed_eps and speed_beta must be positive".into()));
    }
    Ok(cfg)
}
