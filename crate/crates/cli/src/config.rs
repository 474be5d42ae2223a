//! Options shared by several subcommands, settable by flag or JSON config.
//! Flags take precedence over the config file.

use std::path::Path;

use clap::Args;
use ectensor::{FitOptions, Sigma2Update};
use serde::Deserialize;

use crate::error::{usage, CliError, CliResult};

/// Contents of `--config`. Keys mirror the long flag names with underscores.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub model: Option<String>,
    #[serde(rename = "gen")]
    pub generator: Option<String>,
    pub format: Option<String>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub inner_tyler_iters: Option<usize>,
    pub nu_bounds: Option<String>,
    pub sigma2_update: Option<String>,
    pub priors: Option<String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else { return Ok(ConfigFile::default()) };
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
    }
}

/// Iteration controls for the fitting commands.
#[derive(Args, Debug, Clone, Default)]
pub struct FitFlags {
    /// Relative convergence tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Maximum outer iterations.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Inner fixed-point iterations per mode for Tyler's estimator.
    #[arg(long)]
    pub inner_tyler_iters: Option<usize>,
    /// Bounds for the degrees of freedom, as `lo,hi`.
    #[arg(long)]
    pub nu_bounds: Option<String>,
    /// `ecm`, `aecm` or `ecme`.
    #[arg(long)]
    pub sigma2_update: Option<String>,
}

impl FitFlags {
    pub fn resolve(&self, cfg: &ConfigFile, seed: Option<u64>) -> CliResult<FitOptions> {
        let mut opts = FitOptions::default();
        if let Some(t) = self.tol.or(cfg.tol) {
            opts.rel_tol = t;
        }
        if let Some(m) = self.max_iters.or(cfg.max_iters) {
            opts.max_outer_iters = m;
        }
        if let Some(m) = self.inner_tyler_iters.or(cfg.inner_tyler_iters) {
            opts.inner_tyler_iters = m;
        }
        if let Some(b) = self.nu_bounds.as_ref().or(cfg.nu_bounds.as_ref()) {
            let v = parse_list::<f64>(b, "--nu-bounds")?;
            if v.len() != 2 {
                return usage(format!("--nu-bounds needs two numbers, got {b:?}"));
            }
            opts.nu_bounds = (v[0], v[1]);
        }
        if let Some(s) = self.sigma2_update.as_ref().or(cfg.sigma2_update.as_ref()) {
            opts.sigma2_update = s.parse::<Sigma2Update>()?;
        }
        if let Some(s) = seed {
            opts.seed = s;
        }
        opts.validate()?;
        Ok(opts)
    }
}

/// Parses a comma-separated list such as `4,5,3`.
pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|v| v.trim().parse::<T>().map_err(|_| CliError::Usage(format!("{what}: cannot parse {v:?} in {s:?}"))))
        .collect()
}

pub fn require_seed(flag: Option<u64>, cfg: &ConfigFile) -> CliResult<u64> {
    match flag.or(cfg.seed) {
        Some(s) => Ok(s),
        None => usage("--seed is required for this command"),
    }
}
