use super::{
    adjust_with_ridge, check_samples, convergence_metric, identity_scales, mode_scatter, relative_change,
    sample_mean, FitOptions, FitReport,
};
use crate::dist::{Density, EcParams};
use crate::error::Result;
use crate::generators::DensityGenerator;
use crate::linalg::{KronFactor, SpdFactor};
use crate::tensor::{Matrix, Tensor};

/// `sum_i |R_i|^2 / (n m)`, or 1 for all-zero residuals.
pub(crate) fn initial_sigma2(resids: &[Tensor]) -> f64 {
    let n = resids.len();
    let m = resids[0].numel();
    let ss: f64 = resids.iter().map(|r| r.inner(r).expect("same shape")).sum();
    let s = ss / (n * m) as f64;
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

/// One cycle of block relaxation over `Sigma_1, ..., Sigma_p` on residuals
/// `resids`. With `update_sigma2`, `(sigma2, Sigma_k)` are maximized jointly
/// for every mode, which leaves `sigma2 = tr(S_k Sigma_k^{-1})/(nm)`. Returns `(ridge used, tr(S_p Sigma_p^{-1})/(nm))`.
pub(crate) fn flip_flop_sweep(
    resids: &[Tensor],
    scales: &mut [Matrix],
    sigma2: &mut f64,
    update_sigma2: bool,
) -> Result<(bool, f64)> {
    let n = resids.len();
    let m = resids[0].numel();
    let mut ridge = false;
    let mut last = *sigma2;
    for k in 0..scales.len() {
        let kf = KronFactor::new(scales)?;
        let s = mode_scatter(resids, &kf, k)?;
        let nu = (n * (m / scales[k].nrows())) as f64;
        if update_sigma2 && s[(0, 0)] > 0.0 {
            // Joint maximizer over (sigma2, Sigma_k): ADJUST then returns S / S(1,1).
            *sigma2 = s[(0, 0)] / nu;
        }
        let (sig, s_used, r) = adjust_with_ridge(nu, *sigma2, &s)?;
        ridge |= r;
        let f = SpdFactor::new(&sig).expect("adjust output is PD");
        last = f.solve(&s_used).trace() / (n * m) as f64;
        scales[k] = sig;
        if update_sigma2 && last > 0.0 {
            *sigma2 = last;
        }
    }
    Ok((ridge, last))
}

/// TVN fit by flip-flop; `fixed_mean` skips mean estimation (used for the
/// zero-mean angular fits).
pub(crate) fn fit_tvn_inner(data: &[Tensor], fixed_mean: Option<Tensor>, opts: &FitOptions) -> Result<FitReport> {
    opts.validate()?;
    let shape = check_samples(data)?;
    let mean = fixed_mean.unwrap_or_else(|| sample_mean(data));
    let resids: Vec<Tensor> = data.iter().map(|y| y.sub(&mean)).collect::<Result<_>>()?;
    let mut scales = identity_scales(&shape);
    let mut sigma2 = initial_sigma2(&resids);
    let center = mean.norm();
    let mut prev = convergence_metric(center, sigma2, &scales);
    let mut report = FitReport {
        params: EcParams::standard(&shape, DensityGenerator::Normal),
        loglik_trace: vec![],
        iterations: 0,
        converged: false,
        deltas: vec![],
        ridge_applied: false,
        nu_trace: vec![],
    };
    for it in 1..=opts.max_outer_iters {
        let (ridge, _) = flip_flop_sweep(&resids, &mut scales, &mut sigma2, true)?;
        report.ridge_applied |= ridge;
        let dens = Density::new(&mean, &scales, sigma2, DensityGenerator::Normal)?;
        report.loglik_trace.push(dens.loglik(data)?);
        let metric = convergence_metric(center, sigma2, &scales);
        let delta = relative_change(metric, prev);
        prev = metric;
        report.deltas.push(delta);
        report.iterations = it;
        if delta < opts.rel_tol {
            report.converged = true;
            break;
        }
    }
    if !report.converged {
        log::warn!("TVN fit did not converge in {} iterations", opts.max_outer_iters);
    }
    report.params = EcParams::new(mean, scales, sigma2, DensityGenerator::Normal)?;
    Ok(report)
}

/// TVN fit of `data` with the mean fixed at zero.
pub(crate) fn fit_tvn_zero_mean(data: &[Tensor], opts: &FitOptions) -> Result<FitReport> {
    let shape = check_samples(data)?;
    fit_tvn_inner(data, Some(Tensor::zeros(&shape)), opts)
}

/// Tensor-variate normal MLE: sample mean, then cyclic `ADJUST` updates of
/// each `Sigma_k` and `sigma2` until the relative change of
/// `|M| + sigma2 prod |Sigma_k|` drops below `rel_tol`.
pub fn fit_tvn(data: &[Tensor], opts: &FitOptions) -> Result<FitReport> {
    fit_tvn_inner(data, None, opts)
}

/// MLE under a joint EC law of uncorrelated samples: the TVN fit with
/// `sigma2` rescaled by `nm / d_g`.
pub fn fit_uncorrelated_ec(data: &[Tensor], gen: DensityGenerator, opts: &FitOptions) -> Result<FitReport> {
    gen.validate()?;
    let mut report = fit_tvn(data, opts)?;
    let n = data.len();
    let m = report.params.dim();
    let factor = (n * m) as f64 / gen.d_g(n, m)?;
    let sigma2 = report.params.sigma2() * factor;
    report.params = report.params.clone().with_sigma2(sigma2)?.with_gen(gen)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vector_case_matches_classical_mle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<Tensor> = (0..40)
            .map(|_| {
                let a: f64 = rng.random_range(-1.0..1.0);
                Tensor::from_vector(&[a + rng.random_range(-1.0..1.0), 2.0 * a, rng.random_range(0.0..3.0)])
            })
            .collect();
        let fit = fit_tvn(&data, &FitOptions::default()).unwrap();
        let n = data.len() as f64;
        let mean = sample_mean(&data);
        let mut cov = Matrix::zeros(3, 3);
        for y in &data {
            let d = y.sub(&mean).unwrap().vectorize();
            cov += &d * d.transpose();
        }
        cov /= n;
        let est = &fit.params.scales()[0] * fit.params.sigma2();
        assert!((&est - &cov).norm() < 1e-8, "{} {} {:?}", (est - cov).norm(), fit.iterations, fit.deltas);
        assert!(fit.converged);
    }

    #[test]
    fn identical_copies_are_degenerate_but_finite() {
        let t = Tensor::from_fn(&[2, 3], |i| (i[0] + i[1]) as f64);
        let data = vec![t.clone(); 5];
        let fit = fit_tvn(&data, &FitOptions::default()).unwrap();
        assert_eq!(fit.params.mean(), &t);
        assert!(fit.ridge_applied);
        assert!(fit.params.sigma2() < 1e-6);
    }

    #[test]
    fn loglik_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data: Vec<Tensor> = (0..30)
            .map(|_| Tensor::from_fn(&[3, 2, 2], |i| rng.random_range(-1.0..1.0) * (1.0 + i[0] as f64)))
            .collect();
        let fit = fit_tvn(&data, &FitOptions::default()).unwrap();
        for w in fit.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
    }

    #[test]
    fn uncorrelated_rescales_sigma2_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<Tensor> = (0..10).map(|_| Tensor::from_fn(&[2, 3], |_| rng.random_range(-1.0..1.0))).collect();
        let opts = FitOptions::default();
        let tvn = fit_tvn(&data, &opts).unwrap();
        let gen = DensityGenerator::GammaScaleMixture { a: 3.0, b: 15.0 };
        let ec = fit_uncorrelated_ec(&data, gen, &opts).unwrap();
        assert_eq!(ec.params.mean(), tvn.params.mean());
        assert_eq!(ec.params.scales(), tvn.params.scales());
        assert!((ec.params.sigma2() - 0.2 * tvn.params.sigma2()).abs() <= 1e-15 * tvn.params.sigma2());
        let normal = fit_uncorrelated_ec(&data, DensityGenerator::Normal, &opts).unwrap();
        assert_eq!(normal.params.sigma2(), tvn.params.sigma2());
    }
}
