//! Tensor-on-tensor regression `Y_i = <X_i | B> + E_i` with EC errors.

mod cp;

pub use cp::{cp_als, CpCoefficient};

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dist::{Density, EcParams};
use crate::error::{Error, Result};
use crate::estimation::{
    ecme_sigma2, flip_flop_sweep, fit_tvn_zero_mean, nu_step, relative_change, weights, ErrorModel, FitOptions,
    FitReport, Sigma2Update,
};
use crate::generators::DensityGenerator;
use crate::io::{load_tensor, save_tensor};
use crate::linalg::{KronFactor, SpdFactor};
use crate::tensor::{Matrix, Tensor};

/// Coefficient parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefFormat {
    Full,
    Cp { rank: usize },
}

impl std::str::FromStr for CoefFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "full" {
            return Ok(CoefFormat::Full);
        }
        if let Some(r) = s.strip_prefix("cp:") {
            let rank: usize = r.parse().map_err(|_| Error::InvalidParameter(format!("bad CP rank {r:?}")))?;
            if rank == 0 {
                return Err(Error::InvalidParameter("CP rank must be at least 1".into()));
            }
            return Ok(CoefFormat::Cp { rank });
        }
        Err(Error::InvalidParameter(format!("unknown coefficient format {s:?} (expected full or cp:R)")))
    }
}

impl std::fmt::Display for CoefFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoefFormat::Full => write!(f, "full"),
            CoefFormat::Cp { rank } => write!(f, "cp:{rank}"),
        }
    }
}

/// Regression coefficient `B` of shape `(h_1..h_l, m_1..m_p)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Full(Tensor),
    Cp(CpCoefficient),
}

impl Coefficient {
    pub fn format(&self) -> CoefFormat {
        match self {
            Coefficient::Full(_) => CoefFormat::Full,
            Coefficient::Cp(c) => CoefFormat::Cp { rank: c.rank() },
        }
    }

    pub fn to_tensor(&self) -> Tensor {
        match self {
            Coefficient::Full(b) => b.clone(),
            Coefficient::Cp(c) => c.to_tensor(),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            Coefficient::Full(b) => b.norm(),
            Coefficient::Cp(c) => c.norm(),
        }
    }

    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Coefficient::Full(b) => x.partial_contraction(b),
            Coefficient::Cp(c) => c.predict(x),
        }
    }

    /// Number of entries estimated in `B`. The CP count ignores the scaling indeterminacy.
    pub fn num_params(&self) -> usize {
        match self {
            Coefficient::Full(b) => b.numel(),
            Coefficient::Cp(c) => {
                c.rank() * (c.covariate_shape().iter().sum::<usize>() + c.response_shape().iter().sum::<usize>())
            }
        }
    }
}

/// Fitted regression: coefficient plus zero-mean EC noise law.
#[derive(Debug, Clone)]
pub struct ToTRModel {
    pub coefficient: Coefficient,
    pub noise: EcParams,
    /// Whether the Student-t degrees of freedom were estimated.
    pub nu_estimated: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ToTRManifest {
    format: CoefFormat,
    /// `.ten` path of `B` (full format).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coefficient: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    u: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    v: Vec<String>,
    noise: String,
    nu_estimated: bool,
}

impl ToTRModel {
    pub fn new(coefficient: Coefficient, noise: EcParams, nu_estimated: bool) -> Result<Self> {
        let b_shape = match &coefficient {
            Coefficient::Full(b) => b.shape().to_vec(),
            Coefficient::Cp(c) => [c.covariate_shape(), c.response_shape()].concat(),
        };
        let p = noise.shape().len();
        if b_shape.len() <= p || b_shape[b_shape.len() - p..] != *noise.shape() {
            return Err(Error::ShapeMismatch(format!(
                "coefficient shape {b_shape:?} does not end with the response shape {:?}",
                noise.shape()
            )));
        }
        if noise.mean().data().iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidParameter("noise law must have zero mean".into()));
        }
        Ok(ToTRModel { coefficient, noise, nu_estimated })
    }

    pub fn covariate_shape(&self) -> Vec<usize> {
        match &self.coefficient {
            Coefficient::Full(b) => b.shape()[..b.order() - self.noise.shape().len()].to_vec(),
            Coefficient::Cp(c) => c.covariate_shape(),
        }
    }

    /// `<x | B>`.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape() != self.covariate_shape().as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "covariate has shape {:?}, expected {:?}",
                x.shape(),
                self.covariate_shape()
            )));
        }
        self.coefficient.predict(x)
    }

    /// Observed-data loglikelihood of `(xs, ys)`.
    pub fn loglik(&self, xs: &[Tensor], ys: &[Tensor]) -> Result<f64> {
        check_pairs(xs, ys)?;
        let dens = self.noise.density()?;
        let mut total = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            total += dens.log_pdf(&y.sub(&self.predict(x)?)?)?;
        }
        Ok(total)
    }

    /// Free parameters: coefficient entries, `m_k(m_k+1)/2 - 1` per scale
    /// matrix, one for `sigma2`, one more if `nu` was estimated.
    pub fn num_params(&self) -> usize {
        let cov: usize = self.noise.shape().iter().map(|&m| m * (m + 1) / 2 - 1).sum();
        self.coefficient.num_params() + cov + 1 + usize::from(self.nu_estimated)
    }

    /// `-2 loglik + k log n`.
    pub fn bic(&self, xs: &[Tensor], ys: &[Tensor]) -> Result<f64> {
        let ll = self.loglik(xs, ys)?;
        Ok(-2.0 * ll + self.num_params() as f64 * (xs.len() as f64).ln())
    }

    /// Writes `<stem>.json` with coefficient `.ten` files and the noise manifest alongside.
    pub fn save(&self, json_path: impl AsRef<Path>) -> Result<()> {
        let json_path = json_path.as_ref();
        let dir = json_path.parent().unwrap_or_else(|| Path::new(""));
        let stem = json_path.file_stem().and_then(|s| s.to_str()).unwrap_or("model").to_string();
        let noise_name = format!("{stem}_noise.json");
        self.noise.save(dir.join(&noise_name))?;
        let mut manifest = ToTRManifest {
            format: self.coefficient.format(),
            coefficient: None,
            u: vec![],
            v: vec![],
            noise: noise_name,
            nu_estimated: self.nu_estimated,
        };
        match &self.coefficient {
            Coefficient::Full(b) => {
                let name = format!("{stem}_coef.ten");
                save_tensor(dir.join(&name), b)?;
                manifest.coefficient = Some(name);
            }
            Coefficient::Cp(c) => {
                for (tag, mats, list) in [("u", c.u(), &mut manifest.u), ("v", c.v(), &mut manifest.v)] {
                    for (j, m) in mats.iter().enumerate() {
                        let name = format!("{stem}_{tag}{}.ten", j + 1);
                        save_tensor(dir.join(&name), &Tensor::from_matrix(m))?;
                        list.push(name);
                    }
                }
            }
        }
        std::fs::write(json_path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(json_path: impl AsRef<Path>) -> Result<Self> {
        let json_path = json_path.as_ref();
        let dir = json_path.parent().unwrap_or_else(|| Path::new(""));
        let manifest: ToTRManifest = serde_json::from_str(&std::fs::read_to_string(json_path)?)?;
        let noise = EcParams::load(dir.join(&manifest.noise))?;
        let as_matrix = |name: &String| -> Result<Matrix> {
            let t = load_tensor(dir.join(name))?;
            if t.order() != 2 {
                return Err(Error::Format(format!("{name}: CP factor must be a matrix")));
            }
            Ok(Matrix::from_column_slice(t.shape()[0], t.shape()[1], t.data()))
        };
        let coefficient = match manifest.format {
            CoefFormat::Full => {
                let name = manifest.coefficient.ok_or_else(|| Error::Format("missing coefficient path".into()))?;
                Coefficient::Full(load_tensor(dir.join(name))?)
            }
            CoefFormat::Cp { .. } => {
                let u = manifest.u.iter().map(as_matrix).collect::<Result<_>>()?;
                let v = manifest.v.iter().map(as_matrix).collect::<Result<_>>()?;
                Coefficient::Cp(CpCoefficient::new(u, v)?)
            }
        };
        ToTRModel::new(coefficient, noise, manifest.nu_estimated)
    }
}

fn check_pairs(xs: &[Tensor], ys: &[Tensor]) -> Result<(Vec<usize>, Vec<usize>)> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::InvalidParameter(format!(
            "need matching non-empty covariates and responses (got {} and {})",
            xs.len(),
            ys.len()
        )));
    }
    let hs = xs[0].shape().to_vec();
    let ms = ys[0].shape().to_vec();
    for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
        if x.shape() != hs.as_slice() || y.shape() != ms.as_slice() {
            return Err(Error::ShapeMismatch(format!("pair {i} has shapes {:?}, {:?}", x.shape(), y.shape())));
        }
        if x.data().iter().chain(y.data()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("pair {i} has non-finite values")));
        }
    }
    Ok((hs, ms))
}

/// Solves `a w = b` for SPD `a`, adding `1e-8 tr(a)/d I` when `a` is singular.
fn solve_spd_ridge(a: &Matrix, b: &Matrix) -> Result<(Matrix, bool)> {
    if let Some(f) = SpdFactor::new(a) {
        return Ok((f.solve(b), false));
    }
    let d = a.nrows();
    let tr = a.trace();
    let eps = if tr > 0.0 { 1e-8 * tr / d as f64 } else { 1e-8 };
    let f = SpdFactor::new(&(a + Matrix::identity(d, d) * eps))
        .ok_or_else(|| Error::NotPd("least-squares normal equations".into()))?;
    Ok((f.solve(b), true))
}

fn weighted_full_ls(xs: &[Tensor], ys: &[Tensor], z: &[f64], hs: &[usize], ms: &[usize]) -> Result<(Tensor, bool)> {
    let hd = xs[0].numel();
    let md = ys[0].numel();
    let mut a = Matrix::zeros(hd, hd);
    let mut rhs = Matrix::zeros(hd, md);
    for ((x, y), &zi) in xs.iter().zip(ys).zip(z) {
        let xv = x.vectorize();
        let yv = y.vectorize();
        a.ger(zi, &xv, &xv, 1.0);
        rhs.ger(zi, &xv, &yv, 1.0);
    }
    let (b, ridge) = solve_spd_ridge(&a, &rhs)?;
    let shape = [hs, ms].concat();
    Ok((Tensor::new(shape, b.as_slice().to_vec())?, ridge))
}

/// One CM pass over all CP factors for the weighted `Sigma`-metric least squares.
fn cp_pass(cp: &mut CpCoefficient, xs: &[Tensor], ys: &[Tensor], z: &[f64], kf: &KronFactor) -> Result<bool> {
    let rank = cp.rank();
    let l = cp.u().len();
    let p = cp.v().len();
    let mut ridge = false;
    let inv_cols = |cp: &CpCoefficient, k: usize| -> Matrix {
        let f = &kf.factors()[k];
        f.solve(&cp.v()[k])
    };
    let mut a: Vec<Matrix> = (0..p).map(|k| inv_cols(cp, k)).collect();
    let mut g: Vec<Matrix> = (0..p).map(|k| cp.v()[k].transpose() * &a[k]).collect();

    // Covariate-mode factors: generalized least squares of size h_j R.
    if l > 0 {
        // y_ir = <Y_i, o_k Sigma_k^{-1} v_kr>.
        let yw: Vec<Vec<f64>> = ys
            .iter()
            .map(|y| {
                (0..rank)
                    .map(|r| {
                        let cols: Vec<Vec<f64>> = a.iter().map(|m| m.column(r).iter().copied().collect()).collect();
                        let vecs: Vec<Option<&[f64]>> = cols.iter().map(|c| Some(c.as_slice())).collect();
                        y.contract_vectors(&vecs).map(|v| v[0])
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let mut gr = Matrix::from_element(rank, rank, 1.0);
        for gk in &g {
            gr.component_mul_assign(gk);
        }
        for j in 0..l {
            let hj = cp.u()[j].nrows();
            let dim = hj * rank;
            let mut lhs = Matrix::zeros(dim, dim);
            let mut rhs = Matrix::zeros(dim, 1);
            for ((x, yi), &zi) in xs.iter().zip(&yw).zip(z) {
                // x_ijr: X_i contracted with u_{j'r} on every covariate mode j' != j.
                let mut xr = Matrix::zeros(hj, rank);
                for r in 0..rank {
                    let cols: Vec<Vec<f64>> = cp.u().iter().map(|m| m.column(r).iter().copied().collect()).collect();
                    let vecs: Vec<Option<&[f64]>> =
                        cols.iter().enumerate().map(|(q, c)| if q == j { None } else { Some(c.as_slice()) }).collect();
                    xr.column_mut(r).copy_from_slice(&x.contract_vectors(&vecs)?);
                }
                for r in 0..rank {
                    let xr_r = xr.column(r);
                    for q in 0..hj {
                        rhs[(r * hj + q, 0)] += zi * yi[r] * xr_r[q];
                    }
                    for s in 0..rank {
                        let w = zi * gr[(r, s)];
                        if w != 0.0 {
                            lhs.view_mut((r * hj, s * hj), (hj, hj)).ger(w, &xr_r, &xr.column(s), 1.0);
                        }
                    }
                }
            }
            let (theta, rdg) = solve_spd_ridge(&crate::linalg::symmetrize(&lhs), &rhs)?;
            ridge |= rdg;
            let u = &mut cp.u_mut()[j];
            for r in 0..rank {
                u.column_mut(r).copy_from(&theta.rows(r * hj, hj));
            }
        }
    }

    // Response-mode factors: Sigma_k cancels from the normal equations.
    let c: Vec<Vec<f64>> = xs.iter().map(|x| cp.loadings(x)).collect::<Result<_>>()?;
    let mut cc = Matrix::zeros(rank, rank);
    for (ci, &zi) in c.iter().zip(z) {
        let v = Matrix::from_column_slice(rank, 1, ci);
        cc.ger(zi, &v.column(0), &v.column(0), 1.0);
    }
    let t: Vec<Tensor> = (0..rank)
        .map(|r| {
            let mut acc = Tensor::zeros(ys[0].shape());
            for ((y, ci), &zi) in ys.iter().zip(&c).zip(z) {
                acc.axpy(zi * ci[r], y)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    for k in 0..p {
        let mut hk = cc.clone();
        for (j, gj) in g.iter().enumerate() {
            if j != k {
                hk.component_mul_assign(gj);
            }
        }
        let mk = cp.v()[k].nrows();
        let mut rhs = Matrix::zeros(mk, rank);
        for (r, tr) in t.iter().enumerate().take(rank) {
            let cols: Vec<Vec<f64>> = a.iter().map(|m| m.column(r).iter().copied().collect()).collect();
            let vecs: Vec<Option<&[f64]>> =
                cols.iter().enumerate().map(|(q, c)| if q == k { None } else { Some(c.as_slice()) }).collect();
            rhs.column_mut(r).copy_from_slice(&tr.contract_vectors(&vecs)?);
        }
        let (vt, rdg) = solve_spd_ridge(&crate::linalg::symmetrize(&hk), &rhs.transpose())?;
        ridge |= rdg;
        cp.v_mut()[k] = vt.transpose();
        a[k] = inv_cols(cp, k);
        g[k] = cp.v()[k].transpose() * &a[k];
    }
    cp.normalize();
    Ok(ridge)
}

fn initial_coefficient(
    xs: &[Tensor],
    ys: &[Tensor],
    hs: &[usize],
    ms: &[usize],
    format: CoefFormat,
    seed: u64,
) -> Result<(Coefficient, bool)> {
    let n = xs.len();
    let hd: usize = hs.iter().product();
    let ones = vec![1.0; n];
    match format {
        CoefFormat::Full => {
            let (b, ridge) = weighted_full_ls(xs, ys, &ones, hs, ms)?;
            Ok((Coefficient::Full(b), ridge))
        }
        CoefFormat::Cp { rank } => {
            let factors = if n >= hd {
                let (b, _) = weighted_full_ls(xs, ys, &ones, hs, ms)?;
                cp_als(&b, rank, 200, 1e-10, seed)?
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                hs.iter()
                    .chain(ms)
                    .map(|&d| Matrix::from_fn(d, rank, |_, _| StandardNormal.sample(&mut rng)))
                    .collect()
            };
            let mut cp = CpCoefficient::split(factors, hs.len())?;
            cp.normalize();
            Ok((Coefficient::Cp(cp), false))
        }
    }
}

/// ECM fit of the tensor-on-tensor regression with TVN or gamma-scale-mixture
/// errors. Each iteration: E-step weights, one weighted least-squares pass
/// over the coefficient (closed form for the full format, factor by factor
/// for CP), one weighted flip-flop pass over the noise scale matrices, the
/// `sigma2` rule of `opts`, and the optional `nu` update.
pub fn fit_totr(
    xs: &[Tensor],
    ys: &[Tensor],
    format: CoefFormat,
    model: ErrorModel,
    opts: &FitOptions,
) -> Result<(ToTRModel, FitReport)> {
    opts.validate()?;
    let (hs, ms) = check_pairs(xs, ys)?;
    let m: usize = ms.iter().product();
    model.check(m)?;
    let mut gen = model.initial_generator();
    let mut mix = gen.gamma_mixing(m);
    let mut nu = match model {
        ErrorModel::StudentT { initial_nu } => initial_nu,
        ErrorModel::Fixed { .. } => f64::NAN,
    };

    let (mut coef, mut ridge) = initial_coefficient(xs, ys, &hs, &ms, format, opts.seed)?;
    let resid = |coef: &Coefficient| -> Result<Vec<Tensor>> {
        xs.iter().zip(ys).map(|(x, y)| y.sub(&coef.predict(x)?)).collect()
    };
    let init = fit_tvn_zero_mean(&resid(&coef)?, &opts.lax())?;
    ridge |= init.ridge_applied;
    let mut scales = init.params.scales().to_vec();
    let mut sigma2 = init.params.sigma2() * mix.map_or(1.0, |(a, b)| a / b);
    let metric = |coef: &Coefficient, sigma2: f64, scales: &[Matrix]| {
        coef.norm() + sigma2 * scales.iter().map(|s| s.norm()).product::<f64>()
    };
    let mut prev = metric(&coef, sigma2, &scales);
    let mut report = FitReport {
        params: init.params.clone(),
        loglik_trace: vec![],
        iterations: 0,
        converged: false,
        deltas: vec![],
        ridge_applied: ridge,
        nu_trace: vec![],
    };
    let mut kf = KronFactor::new(&scales)?;
    let mut d2: Vec<f64> = resid(&coef)?.iter().map(|r| Ok(kf.quad(r)? / sigma2)).collect::<Result<_>>()?;

    for it in 1..=opts.max_outer_iters {
        let z = match mix {
            Some((a, b)) => weights(&d2, m, a, b),
            None => vec![1.0; xs.len()],
        };
        if z.iter().any(|w| !w.is_finite()) || z.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Degenerate("E-step weights are not usable".into()));
        }
        match &mut coef {
            Coefficient::Full(b) => {
                let (nb, r) = weighted_full_ls(xs, ys, &z, &hs, &ms)?;
                *b = nb;
                report.ridge_applied |= r;
            }
            Coefficient::Cp(cp) => {
                report.ridge_applied |= cp_pass(cp, xs, ys, &z, &kf)?;
            }
        }
        let r = resid(&coef)?;
        let weighted: Vec<Tensor> = r.iter().zip(&z).map(|(e, &zi)| e.scaled(zi.sqrt())).collect();
        let (rdg, last) = flip_flop_sweep(&weighted, &mut scales, &mut sigma2, opts.sigma2_update != Sigma2Update::Ecm || mix.is_none())?;
        report.ridge_applied |= rdg;
        kf = KronFactor::new(&scales)?;
        let u: Vec<f64> = r.iter().map(|e| kf.quad(e)).collect::<Result<_>>()?;
        match opts.sigma2_update {
            Sigma2Update::Ecm => {
                if last > 0.0 {
                    sigma2 = last;
                }
            }
            Sigma2Update::Aecm => {}
            Sigma2Update::Ecme => sigma2 = ecme_sigma2(&u, m, &gen, sigma2)?,
        }
        d2 = u.iter().map(|&v| v / sigma2).collect();
        let mut nu_delta = 0.0;
        if model.estimates_nu() {
            let new_nu = nu_step(&d2, m, nu, opts);
            nu_delta = relative_change(new_nu, nu);
            nu = new_nu;
            gen = DensityGenerator::student_t(nu);
            mix = gen.gamma_mixing(m);
            report.nu_trace.push(nu);
        }
        let dens = Density::new(&Tensor::zeros(&ms), &scales, sigma2, gen)?;
        report.loglik_trace.push(d2.iter().map(|&d| dens.log_pdf_from_d2(d)).sum::<Result<f64>>()?);
        let now = metric(&coef, sigma2, &scales);
        let delta = relative_change(now, prev).max(nu_delta);
        prev = now;
        report.deltas.push(delta);
        report.iterations = it;
        if delta < opts.rel_tol {
            report.converged = true;
            break;
        }
    }
    if !report.converged {
        log::warn!("ToTR fit did not converge in {} iterations", opts.max_outer_iters);
    }
    report.params = EcParams::new(Tensor::zeros(&ms), scales, sigma2, gen)?;
    let fitted = ToTRModel::new(coef, report.params.clone(), model.estimates_nu())?;
    Ok((fitted, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor {
        Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn noiseless_full_recovers_coefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_tensor(&[2, 3, 2, 2], &mut rng);
        let xs: Vec<Tensor> = (0..30).map(|_| random_tensor(&[2, 3], &mut rng)).collect();
        let ys: Vec<Tensor> = xs.iter().map(|x| x.partial_contraction(&b).unwrap()).collect();
        let (ones, _) = weighted_full_ls(&xs, &ys, &[1.0; 30], &[2, 3], &[2, 2]).unwrap();
        assert!(ones.sub(&b).unwrap().norm() < 1e-8);
        for (x, y) in xs.iter().zip(&ys) {
            assert!(x.partial_contraction(&ones).unwrap().sub(y).unwrap().norm() < 1e-8);
        }
    }

    #[test]
    fn indicator_design_gives_group_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<Tensor> = (0..20).map(|i| Tensor::from_vector(if i % 2 == 0 { &[1.0, 0.0] } else { &[0.0, 1.0] })).collect();
        let ys: Vec<Tensor> = (0..20).map(|_| random_tensor(&[2, 2], &mut rng)).collect();
        let (model, _) = fit_totr(&xs, &ys, CoefFormat::Full, ErrorModel::fixed(DensityGenerator::Normal), &FitOptions::default()).unwrap();
        let b = model.coefficient.to_tensor();
        let mut mean0 = Tensor::zeros(&[2, 2]);
        for y in ys.iter().step_by(2) {
            mean0.axpy(0.1, y).unwrap();
        }
        let slice = b.select(0, &[0]).unwrap().reshape(vec![2, 2]).unwrap();
        assert!(slice.sub(&mean0).unwrap().norm() < 1e-12);
    }

    #[test]
    fn cp_fit_is_monotone_and_accurate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut f = |d: usize| Matrix::from_fn(d, 2, |_, _| rng.random_range(-1.0..1.0));
        let truth = CpCoefficient::new(vec![f(3), f(2)], vec![f(3), f(2)]).unwrap();
        let noise = EcParams::new(Tensor::zeros(&[3, 2]), vec![Matrix::identity(3, 3), Matrix::identity(2, 2)], 1e-4, DensityGenerator::student_t(5.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let xs: Vec<Tensor> = (0..120).map(|_| random_tensor(&[3, 2], &mut rng)).collect();
        let es = noise.sample(120, &mut rng).unwrap();
        let ys: Vec<Tensor> = xs.iter().zip(&es).map(|(x, e)| truth.predict(x).unwrap().add(e).unwrap()).collect();
        let (model, report) =
            fit_totr(&xs, &ys, CoefFormat::Cp { rank: 2 }, ErrorModel::fixed(DensityGenerator::student_t(5.0)), &FitOptions::default()).unwrap();
        for w in report.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
        }
        let bt = truth.to_tensor();
        assert!(model.coefficient.to_tensor().sub(&bt).unwrap().norm() < 0.05 * bt.norm());
        let direct = model.loglik(&xs, &ys).unwrap();
        assert!((direct - report.final_loglik().unwrap()).abs() < 1e-6 * direct.abs());
    }

    #[test]
    fn format_parsing_and_param_count() {
        assert_eq!("cp:70".parse::<CoefFormat>().unwrap(), CoefFormat::Cp { rank: 70 });
        assert!("cp:0".parse::<CoefFormat>().is_err());
        let u = [2, 3, 4].iter().map(|&d| Matrix::zeros(d, 70)).collect();
        let v = [151, 111, 3].iter().map(|&d| Matrix::zeros(d, 70)).collect();
        assert_eq!(Coefficient::Cp(CpCoefficient::new(u, v).unwrap()).num_params(), 19_180);
    }
}
