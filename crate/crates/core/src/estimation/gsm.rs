use statrs::function::gamma::digamma;

use super::{
    check_samples, convergence_metric, flip_flop_sweep, relative_change, tvn::fit_tvn_inner,
    ErrorModel, FitOptions, FitReport, NuEquation, Sigma2Update,
};
use crate::dist::{Density, EcParams};
use crate::error::{Error, Result};
use crate::generators::DensityGenerator;
use crate::linalg::KronFactor;
use crate::tensor::Tensor;

/// E-step weights `z_i = (m + a) / (D_i^2 + b)`.
pub fn weights(d2: &[f64], m: usize, a: f64, b: f64) -> Vec<f64> {
    d2.iter().map(|&d| (m as f64 + a) / (d + b)).collect()
}

fn nu_score(d2: &[f64], m: usize, nu: f64, eq: NuEquation) -> f64 {
    let mf = m as f64;
    let n = d2.len() as f64;
    let mean_term = d2
        .iter()
        .map(|&d| {
            let z = (nu + mf) / (nu + d);
            z.ln() - z
        })
        .sum::<f64>()
        / n;
    let half = match eq {
        NuEquation::NuPlusM => 0.5 * (nu + mf),
        NuEquation::NPlusM => 0.5 * (n + mf),
    };
    1.0 + mean_term - digamma(0.5 * nu) + (0.5 * nu).ln() + digamma(half) - half.ln()
}

/// Root of the degrees-of-freedom estimating equation
///
/// `1 + mean(log z_i - z_i) - psi(nu/2) + log(nu/2) + psi(c) - log(c) = 0`,
///
/// `z_i = (nu + m)/(nu + D_i^2)`, with `c = (nu+m)/2` or `(n+m)/2`, found by
/// bisection inside `bounds`. Returns the nearer bound when there is no sign change.
pub fn solve_nu(d2: &[f64], m: usize, bounds: (f64, f64), eq: NuEquation) -> f64 {
    let (mut lo, mut hi) = bounds;
    let f = |nu: f64| nu_score(d2, m, nu, eq);
    let flo = f(lo);
    if flo <= 0.0 {
        return lo;
    }
    if f(hi) >= 0.0 {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 * mid {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn t_loglik(d2: &[f64], m: usize, nu: f64) -> f64 {
    let g = DensityGenerator::student_t(nu);
    let c = match g.log_normalizer(m) {
        Ok(c) => c,
        Err(_) => return f64::NEG_INFINITY,
    };
    d2.iter().map(|&d| g.log_g_with(c, d, m).unwrap_or(f64::NEG_INFINITY)).sum()
}

/// Degrees-of-freedom update given squared distances `D^2_{sigma2 Sigma}`;
/// keeps `nu_old` if the new root lowers the loglikelihood.
pub(crate) fn nu_step(d2: &[f64], m: usize, nu_old: f64, opts: &FitOptions) -> f64 {
    let nu = solve_nu(d2, m, opts.nu_bounds, opts.nu_equation);
    if t_loglik(d2, m, nu) >= t_loglik(d2, m, nu_old) {
        nu
    } else {
        nu_old
    }
}

/// Maximizes `-(mn/2) s + sum_i log g(u_i e^{-s})` over `s = log sigma2`,
/// where `u_i = D^2_Sigma` excludes `sigma2`. The stationary point is
/// bracketed from the current value and located by bisection on the derivative.
pub(crate) fn ecme_sigma2(u: &[f64], m: usize, gen: &DensityGenerator, sigma2: f64) -> Result<f64> {
    if u.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("all squared distances are zero".into()));
    }
    let nm = (u.len() * m) as f64;
    // Derivative of the objective in s; non-increasing for the supported families.
    let grad = |s: f64| {
        let e = (-s).exp();
        -0.5 * nm - u.iter().filter(|&&d| d > 0.0).map(|&d| gen.dlog_g(d * e, m) * d * e).sum::<f64>()
    };
    let s0 = sigma2.ln();
    let (mut lo, mut hi) = (s0 - 0.5, s0 + 0.5);
    let mut guard = 0;
    while grad(lo) < 0.0 && guard < 200 {
        lo -= (hi - lo).max(0.5);
        guard += 1;
    }
    while grad(hi) > 0.0 && guard < 400 {
        hi += (hi - lo).max(0.5);
        guard += 1;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if grad(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let out = (0.5 * (lo + hi)).exp();
    if !(out > 0.0 && out.is_finite()) {
        return Err(Error::Degenerate(format!("sigma2 update gave {out}")));
    }
    Ok(out)
}

fn unit_distances(data: &[Tensor], mean: &Tensor, kf: &KronFactor) -> Result<Vec<f64>> {
    data.iter().map(|y| kf.quad(&y.sub(mean)?)).collect()
}

/// ECM / ECME maximum likelihood for gamma scale mixtures of the tensor
/// normal (Student-t and Pearson VII included), optionally estimating the
/// Student-t degrees of freedom.
///
/// Initialized from a lax TVN fit with `sigma2` scaled by `a/b`. Each
/// iteration computes weights, the weighted mean, one weighted flip-flop
/// pass over the scale matrices, the `sigma2` update chosen in `opts`, and
/// then (if requested) the `nu` update.
pub fn fit_gsm(data: &[Tensor], model: ErrorModel, opts: &FitOptions) -> Result<FitReport> {
    opts.validate()?;
    let shape = check_samples(data)?;
    let m: usize = shape.iter().product();
    model.check(m)?;
    let mut gen = model.initial_generator();
    if gen == DensityGenerator::Normal {
        return fit_tvn_inner(data, None, opts);
    }
    let (mut a, mut b) = gen.gamma_mixing(m).expect("checked");
    let init = fit_tvn_inner(data, None, &opts.lax())?;
    let mut mean = init.params.mean().clone();
    let mut scales = init.params.scales().to_vec();
    let mut sigma2 = init.params.sigma2() * a / b;
    let mut nu = if model.estimates_nu() { a } else { f64::NAN };

    let mut report = FitReport {
        params: init.params.clone(),
        loglik_trace: vec![],
        iterations: 0,
        converged: false,
        deltas: vec![],
        ridge_applied: init.ridge_applied,
        nu_trace: vec![],
    };
    let mut kf = KronFactor::new(&scales)?;
    let mut d2: Vec<f64> = unit_distances(data, &mean, &kf)?.into_iter().map(|u| u / sigma2).collect();
    let mut prev = convergence_metric(mean.norm(), sigma2, &scales);

    for it in 1..=opts.max_outer_iters {
        // E-step.
        let z = weights(&d2, m, a, b);
        let zsum: f64 = z.iter().sum();
        if !(zsum > 0.0 && zsum.is_finite()) {
            return Err(Error::Degenerate("E-step weights are not usable".into()));
        }
        // CM-1: weighted mean.
        let mut new_mean = Tensor::zeros(&shape);
        for (y, &zi) in data.iter().zip(&z) {
            new_mean.axpy(zi, y)?;
        }
        mean = new_mean.scaled(1.0 / zsum);
        // CM-2/3: scale matrices and sigma2 on weighted residuals.
        let resids: Vec<Tensor> = data
            .iter()
            .zip(&z)
            .map(|(y, &zi)| Ok(y.sub(&mean)?.scaled(zi.sqrt())))
            .collect::<Result<_>>()?;
        let (ridge, last) = flip_flop_sweep(&resids, &mut scales, &mut sigma2, opts.sigma2_update != Sigma2Update::Ecm)?;
        report.ridge_applied |= ridge;
        kf = KronFactor::new(&scales)?;
        let u = unit_distances(data, &mean, &kf)?;
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
            a = nu;
            b = nu;
            report.nu_trace.push(nu);
        }
        let dens = Density::new(&mean, &scales, sigma2, gen)?;
        let ll = d2.iter().map(|&d| dens.log_pdf_from_d2(d)).sum::<Result<f64>>()?;
        report.loglik_trace.push(ll);
        let metric = convergence_metric(mean.norm(), sigma2, &scales);
        let delta = relative_change(metric, prev).max(nu_delta);
        prev = metric;
        report.deltas.push(delta);
        report.iterations = it;
        if delta < opts.rel_tol {
            report.converged = true;
            break;
        }
    }
    if !report.converged {
        log::warn!("GSM fit did not converge in {} iterations", opts.max_outer_iters);
    }
    report.params = EcParams::new(mean, scales, sigma2, gen)?;
    Ok(report)
}
