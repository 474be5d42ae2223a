use super::{adjust, check_samples, relative_change, tvn::fit_tvn_inner, FitOptions};
use crate::error::{Error, Result};
use crate::linalg::{KronFactor, SpdFactor};
use crate::tensor::{Matrix, Tensor};

/// Result of [`fit_tyler`].
#[derive(Debug, Clone)]
pub struct TylerFit {
    /// Shape matrices with `Sigma_k(1,1) = 1`.
    pub scales: Vec<Matrix>,
    /// Robust location, when estimated.
    pub mean: Option<Tensor>,
    /// Angular loglikelihood after each outer sweep.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest relative Frobenius change of any `Sigma_k` (and of the location) per sweep.
    pub deltas: Vec<f64>,
    /// Samples skipped in the last sweep because they sit at the location.
    pub skipped_samples: usize,
}

/// `-(n/2) log|Sigma_p (x) ... (x) Sigma_1| - (m/2) sum_i log D^2_Sigma(Y_i, M)`,
/// skipping samples at zero distance.
pub fn angular_loglik(scales: &[Matrix], data: &[Tensor], mean: Option<&Tensor>) -> Result<f64> {
    let kf = KronFactor::new(scales)?;
    let m = data.first().map_or(0, Tensor::numel) as f64;
    let mut n = 0usize;
    let mut s = 0.0;
    for y in data {
        let d2 = match mean {
            Some(c) => kf.quad(&y.sub(c)?)?,
            None => kf.quad(y)?,
        };
        if d2 > 0.0 {
            s += d2.ln();
            n += 1;
        }
    }
    Ok(-0.5 * n as f64 * kf.log_det() - 0.5 * m * s)
}

fn location_step(data: &[Tensor], mean: &Tensor, kf: &KronFactor) -> Result<(Tensor, usize)> {
    let mut num = Tensor::zeros(mean.shape());
    let mut den = 0.0;
    let mut skipped = 0;
    for y in data {
        let d = kf.quad(&y.sub(mean)?)?.sqrt();
        if d > 0.0 {
            num.axpy(1.0 / d, y)?;
            den += 1.0 / d;
        } else {
            skipped += 1;
        }
    }
    if den == 0.0 {
        return Err(Error::Degenerate("every sample coincides with the location".into()));
    }
    Ok((num.scaled(1.0 / den), skipped))
}

/// Tyler's shape estimator for Kronecker-separable scatter.
///
/// Starts from a lax TVN fit (on the unit-norm data when no location is
/// estimated), then cycles over modes running `inner_tyler_iters` fixed-point
/// steps `Sigma_k <- ADJUST(n/m_k, 1, sum_i S_ik / tr(Sigma_k^{-1} S_ik))`.
/// With `estimate_location`, the location is updated by one step of
/// `M <- sum_i (X_i / D_i) / sum_i (1 / D_i)` before each sweep.
pub fn fit_tyler(data: &[Tensor], opts: &FitOptions, estimate_location: bool) -> Result<TylerFit> {
    opts.validate()?;
    let shape = check_samples(data)?;
    let m: usize = shape.iter().product();
    let (mut scales, mut mean) = if estimate_location {
        let init = fit_tvn_inner(data, None, &opts.lax())?;
        (init.params.scales().to_vec(), Some(init.params.mean().clone()))
    } else {
        let unit: Vec<Tensor> =
            data.iter().filter(|y| y.norm() > 0.0).map(|y| y.scaled(1.0 / y.norm())).collect();
        if unit.is_empty() {
            return Err(Error::Degenerate("all samples are zero".into()));
        }
        let init = fit_tvn_inner(&unit, Some(Tensor::zeros(&shape)), &opts.lax())?;
        (init.params.scales().to_vec(), None)
    };

    let mut fit = TylerFit {
        scales: vec![],
        mean: None,
        loglik_trace: vec![],
        iterations: 0,
        converged: false,
        deltas: vec![],
        skipped_samples: 0,
    };
    for it in 1..=opts.max_outer_iters {
        let mut delta: f64 = 0.0;
        let mut skipped = 0;
        if let Some(c) = mean.as_mut() {
            let kf = KronFactor::new(&scales)?;
            let (next, s) = location_step(data, c, &kf)?;
            delta = delta.max(next.sub(c)?.norm() / c.norm().max(1.0));
            *c = next;
            skipped = s;
        }
        let centered: Vec<Tensor> = match &mean {
            Some(c) => data.iter().map(|y| y.sub(c)).collect::<Result<_>>()?,
            None => data.to_vec(),
        };
        let centered: Vec<Tensor> = centered.into_iter().filter(|x| x.norm() > 0.0).collect();
        if mean.is_none() {
            skipped = data.len() - centered.len();
        }
        let n = centered.len();
        if n == 0 {
            return Err(Error::Degenerate("no sample differs from the location".into()));
        }
        for k in 0..shape.len() {
            let mk = shape[k];
            let kf = KronFactor::new(&scales)?;
            let s_ik: Vec<Matrix> =
                centered.iter().map(|x| kf.whiten_except(x, Some(k))?.mode_gram(k)).collect::<Result<_>>()?;
            let old = scales[k].clone();
            for _ in 0..opts.inner_tyler_iters {
                let f = SpdFactor::new(&scales[k]).ok_or(Error::NotPositiveDefinite { mode: k })?;
                let mut w = Matrix::zeros(mk, mk);
                for s in &s_ik {
                    let t = f.solve(s).trace();
                    if t > 0.0 {
                        w += s / t;
                    }
                }
                scales[k] = adjust(n as f64 / mk as f64, 1.0, &w).map_err(|_| Error::NotPositiveDefinite { mode: k })?;
            }
            delta = delta.max(relative_change((&scales[k] - &old).norm() + old.norm(), old.norm()));
        }
        fit.loglik_trace.push(angular_loglik(&scales, data, mean.as_ref())?);
        fit.deltas.push(delta);
        fit.iterations = it;
        fit.skipped_samples = skipped;
        if delta < opts.rel_tol {
            fit.converged = true;
            break;
        }
    }
    if fit.skipped_samples > 0 {
        log::warn!("{} samples at zero distance were skipped", fit.skipped_samples);
    }
    if !fit.converged {
        log::warn!("Tyler fit did not converge in {} sweeps (m = {m})", opts.max_outer_iters);
    }
    fit.scales = scales;
    fit.mean = mean;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::EcParams;
    use crate::generators::DensityGenerator;

    fn spd(rows: &[f64], n: usize) -> Matrix {
        Matrix::from_row_slice(n, n, rows)
    }

    /// Classical vector Tyler iteration `V <- (m/n) sum x x' / (x' V^{-1} x)`.
    fn classical_tyler(data: &[Tensor], m: usize) -> Matrix {
        let mut v = Matrix::identity(m, m);
        for _ in 0..5000 {
            let f = SpdFactor::new(&v).unwrap();
            let mut next = Matrix::zeros(m, m);
            for y in data {
                let x = y.vectorize();
                let mut w = x.as_slice().to_vec();
                f.solve_in_place(&mut w);
                next += &x * x.transpose() / crate::tensor::dot(x.as_slice(), &w);
            }
            next *= m as f64 / data.len() as f64;
            v = &next / next[(0, 0)];
        }
        v
    }

    #[test]
    fn vector_case_matches_classical_fixed_point() {
        let truth = EcParams::new(
            Tensor::zeros(&[4]),
            vec![spd(&[1.0, 0.3, 0.0, 0.1, 0.3, 2.0, 0.4, 0.0, 0.0, 0.4, 1.0, 0.2, 0.1, 0.0, 0.2, 0.5], 4)],
            1.0,
            DensityGenerator::student_t(3.0),
        )
        .unwrap();
        let data = truth.sample_seeded(500, 3).unwrap();
        let fit = fit_tyler(&data, &FitOptions { rel_tol: 1e-12, ..Default::default() }, false).unwrap();
        assert!(fit.converged);
        assert!((&fit.scales[0] - classical_tyler(&data, 4)).norm() < 1e-8);
    }

    #[test]
    fn spherical_vector_case() {
        let truth = EcParams::standard(&[4], DensityGenerator::student_t(3.0));
        let data = truth.sample_seeded(20_000, 3).unwrap();
        let fit = fit_tyler(&data, &FitOptions::default(), false).unwrap();
        assert!(fit.converged);
        assert!((&fit.scales[0] - Matrix::identity(4, 4)).norm() < 0.1, "{}", fit.scales[0]);
    }

    #[test]
    fn radial_invariance_and_monotone_angular_loglik() {
        let truth = EcParams::new(
            Tensor::zeros(&[3, 2]),
            vec![spd(&[1.0, 0.5, 0.1, 0.5, 2.0, 0.0, 0.1, 0.0, 0.8], 3), spd(&[1.0, 0.3, 0.3, 0.5], 2)],
            1.0,
            DensityGenerator::student_t(2.5),
        )
        .unwrap();
        let data = truth.sample_seeded(200, 9).unwrap();
        let scaled: Vec<Tensor> = data.iter().enumerate().map(|(i, y)| y.scaled(0.1 + (i % 17) as f64 * 3.3)).collect();
        let opts = FitOptions::default();
        let a = fit_tyler(&data, &opts, false).unwrap();
        let b = fit_tyler(&scaled, &opts, false).unwrap();
        for (x, y) in a.scales.iter().zip(&b.scales) {
            assert!((x - y).norm() < 1e-8);
            assert_eq!(x[(0, 0)], 1.0);
        }
        for w in a.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
    }

    #[test]
    fn congruence_equivariance() {
        let truth = EcParams::new(
            Tensor::zeros(&[2, 3]),
            vec![spd(&[1.0, 0.4, 0.4, 1.5], 2), Matrix::identity(3, 3)],
            1.0,
            DensityGenerator::student_t(4.0),
        )
        .unwrap();
        let data = truth.sample_seeded(150, 1).unwrap();
        let a = spd(&[2.0, 0.0, 0.0, 1.0, 1.0, 0.5, 0.0, -0.3, 1.5], 3);
        let moved: Vec<Tensor> = data.iter().map(|y| y.mode_product(&a, 1).unwrap()).collect();
        let opts = FitOptions { rel_tol: 1e-12, ..Default::default() };
        let base = fit_tyler(&data, &opts, false).unwrap();
        let fit = fit_tyler(&moved, &opts, false).unwrap();
        let expect = &a * &base.scales[1] * a.transpose();
        let expect = &expect / expect[(0, 0)];
        assert!((&fit.scales[1] - expect).norm() < 1e-6);
        assert!((&fit.scales[0] - &base.scales[0]).norm() < 1e-6);
    }

    #[test]
    fn location_estimate_is_near_center() {
        let center = Tensor::from_fn(&[2, 2], |i| 5.0 * (i[0] + 2 * i[1]) as f64);
        let truth = EcParams::standard(&[2, 2], DensityGenerator::cauchy()).with_mean(center.clone()).unwrap();
        let data = truth.sample_seeded(400, 2).unwrap();
        let fit = fit_tyler(&data, &FitOptions::default(), true).unwrap();
        assert!(fit.mean.unwrap().sub(&center).unwrap().norm() < 0.5);
    }
}
