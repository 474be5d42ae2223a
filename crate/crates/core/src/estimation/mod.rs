//! Maximum likelihood estimation for EC tensor-variate models.

mod adjust;
mod gsm;
mod tvn;
mod tyler;

pub use adjust::adjust;
pub use gsm::{fit_gsm, solve_nu, weights};
pub use tvn::{fit_tvn, fit_uncorrelated_ec};
pub use tyler::{angular_loglik, fit_tyler, TylerFit};

pub(crate) use adjust::adjust_with_ridge;
pub(crate) use gsm::{ecme_sigma2, nu_step};
pub(crate) use tvn::{fit_tvn_zero_mean, flip_flop_sweep};

use serde::{Deserialize, Serialize};

use crate::dist::EcParams;
use crate::error::{Error, Result};
use crate::generators::DensityGenerator;
use crate::linalg::KronFactor;
use crate::tensor::{Matrix, Tensor};

/// How `sigma2` is updated within each ECM iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sigma2Update {
    /// Once per iteration from the expected complete-data loglikelihood.
    Ecm,
    /// After every `Sigma_k` update.
    Aecm,
    /// By direct maximization of the observed loglikelihood.
    #[default]
    Ecme,
}

impl std::str::FromStr for Sigma2Update {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ecm" => Ok(Sigma2Update::Ecm),
            "aecm" => Ok(Sigma2Update::Aecm),
            "ecme" => Ok(Sigma2Update::Ecme),
            _ => Err(Error::InvalidParameter(format!("unknown sigma2 update {s:?}"))),
        }
    }
}

/// Which estimating equation is solved for the Student-t degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NuEquation {
    /// `psi((nu+m)/2)` and `log((nu+m)/2)`: the observed-data score in `nu`.
    #[default]
    NuPlusM,
    /// The literal `psi((n+m)/2)` and `log((n+m)/2)` form, for comparison.
    NPlusM,
}

/// Tuning for all iterative fits.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub rel_tol: f64,
    pub max_outer_iters: usize,
    /// Inner fixed-point iterations per mode in Tyler's algorithm.
    pub inner_tyler_iters: usize,
    pub sigma2_update: Sigma2Update,
    pub nu_bounds: (f64, f64),
    pub nu_equation: NuEquation,
    /// Reductions always run in ascending sample order; kept for configuration compatibility.
    pub deterministic: bool,
    /// Seed for randomized initializations (CP factors when no OLS start exists).
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            rel_tol: 1e-8,
            max_outer_iters: 500,
            inner_tyler_iters: 12,
            sigma2_update: Sigma2Update::Ecme,
            nu_bounds: (2.01, 1000.0),
            nu_equation: NuEquation::NuPlusM,
            deterministic: true,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter("rel_tol must be positive".into()));
        }
        if self.max_outer_iters == 0 || self.inner_tyler_iters == 0 {
            return Err(Error::InvalidParameter("iteration counts must be positive".into()));
        }
        let (lo, hi) = self.nu_bounds;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad nu bounds ({lo}, {hi})")));
        }
        Ok(())
    }

    /// The relaxed options used for initialization runs.
    pub(crate) fn lax(&self) -> FitOptions {
        FitOptions { rel_tol: 1e-3, ..self.clone() }
    }
}

/// Error law assumed by an EM-type fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorModel {
    /// A fixed generator from the normal family or a gamma scale mixture.
    Fixed { generator: DensityGenerator },
    /// Student-t with the degrees of freedom estimated, starting at `initial_nu`.
    StudentT { initial_nu: f64 },
}

impl ErrorModel {
    pub fn fixed(gen: DensityGenerator) -> Self {
        ErrorModel::Fixed { generator: gen }
    }

    pub fn estimate_nu(initial_nu: f64) -> Self {
        ErrorModel::StudentT { initial_nu }
    }

    pub fn initial_generator(&self) -> DensityGenerator {
        match *self {
            ErrorModel::Fixed { generator } => generator,
            ErrorModel::StudentT { initial_nu } => DensityGenerator::student_t(initial_nu),
        }
    }

    pub fn estimates_nu(&self) -> bool {
        matches!(self, ErrorModel::StudentT { .. })
    }

    /// Checks that the E-step weights exist for this model in dimension `m`.
    pub(crate) fn check(&self, m: usize) -> Result<()> {
        let g = self.initial_generator();
        g.validate()?;
        match g {
            DensityGenerator::Normal => Ok(()),
            _ if g.gamma_mixing(m).is_some() => Ok(()),
            _ => Err(Error::Unsupported(format!(
                "EM fitting needs a normal or gamma-scale-mixture generator, got {g}"
            ))),
        }
    }
}

/// Outcome of an iterative fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub params: EcParams,
    /// Observed-data loglikelihood after each outer iteration.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Relative change of the convergence metric after each outer iteration.
    pub deltas: Vec<f64>,
    /// True if any scatter matrix needed the ridge fallback.
    pub ridge_applied: bool,
    /// Degrees of freedom after each iteration, when estimated.
    pub nu_trace: Vec<f64>,
}

/// Serializable diagnostics of a [`FitReport`] (parameters are saved separately).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub sigma2: f64,
    pub generator: DensityGenerator,
    pub loglik: Option<f64>,
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub deltas: Vec<f64>,
    pub ridge_applied: bool,
    pub nu_trace: Vec<f64>,
}

impl FitReport {
    pub fn final_loglik(&self) -> Option<f64> {
        self.loglik_trace.last().copied()
    }

    pub fn summary(&self) -> FitSummary {
        FitSummary {
            sigma2: self.params.sigma2(),
            generator: self.params.gen(),
            loglik: self.final_loglik(),
            loglik_trace: self.loglik_trace.clone(),
            iterations: self.iterations,
            converged: self.converged,
            deltas: self.deltas.clone(),
            ridge_applied: self.ridge_applied,
            nu_trace: self.nu_trace.clone(),
        }
    }
}

/// `|M| + sigma2 prod_k |Sigma_k|_F`.
pub(crate) fn convergence_metric(center: f64, sigma2: f64, scales: &[Matrix]) -> f64 {
    center + sigma2 * scales.iter().map(|s| s.norm()).product::<f64>()
}

pub(crate) fn relative_change(new: f64, old: f64) -> f64 {
    if old == 0.0 {
        if new == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        ((new - old) / old).abs()
    }
}

/// `sum_i R_i(k) Sigma_{-k}^{-1} R_i(k)'`, accumulated in sample order.
pub(crate) fn mode_scatter(resids: &[Tensor], kf: &KronFactor, k: usize) -> Result<Matrix> {
    let mk = resids[0].shape()[k];
    let mut s = Matrix::zeros(mk, mk);
    for r in resids {
        s += kf.whiten_except(r, Some(k))?.mode_gram(k)?;
    }
    Ok(s)
}

pub(crate) fn check_samples(data: &[Tensor]) -> Result<Vec<usize>> {
    let first = data.first().ok_or_else(|| Error::InvalidParameter("no samples".into()))?;
    let shape = first.shape().to_vec();
    if let Some((i, t)) = data.iter().enumerate().find(|(_, t)| t.shape() != shape.as_slice()) {
        return Err(Error::ShapeMismatch(format!(
            "sample {i} has shape {:?}, expected {shape:?}",
            t.shape()
        )));
    }
    if data.iter().any(|t| t.data().iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidParameter("samples contain non-finite values".into()));
    }
    Ok(shape)
}

/// Sample mean in ascending sample order.
pub(crate) fn sample_mean(data: &[Tensor]) -> Tensor {
    let mut m = Tensor::zeros(data[0].shape());
    for y in data {
        m.axpy(1.0, y).expect("shapes checked");
    }
    m.scaled(1.0 / data.len() as f64)
}

pub(crate) fn identity_scales(shape: &[usize]) -> Vec<Matrix> {
    shape.iter().map(|&m| Matrix::identity(m, m)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn options_validate() {
        assert!(FitOptions::default().validate().is_ok());
        let bad = FitOptions { nu_bounds: (5.0, 2.0), ..Default::default() };
        assert!(bad.validate().is_err());
        let json = r#"{"rel_tol":1e-6,"sigma2_update":"aecm"}"#;
        let o: FitOptions = serde_json::from_str(json).unwrap();
        assert_eq!(o.sigma2_update, Sigma2Update::Aecm);
        assert_eq!(o.max_outer_iters, 500);
    }
}
