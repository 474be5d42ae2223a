use crate::error::{Error, Result};
use crate::linalg::{symmetrize, SpdFactor};
use crate::tensor::Matrix;

/// Maximizer of `-(nu/2) log|Sigma| - tr(Sigma^{-1} S) / (2 sigma2)` subject to
/// `Sigma(1,1) = 1`.
///
/// With `B = S / sigma2` and `beta = B e_1`, the stationarity condition
/// `nu Sigma = B - (B11 - nu) sigma sigma'` (where `sigma = Sigma e_1`) is solved by
/// `Sigma = [B - ((B11 - nu) / B11^2) beta beta'] / nu`.
pub fn adjust(nu: f64, sigma2: f64, s: &Matrix) -> Result<Matrix> {
    if !(nu > 0.0 && nu.is_finite()) || !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!("adjust needs nu > 0 and sigma2 > 0 (got {nu}, {sigma2})")));
    }
    if !s.is_square() || s.nrows() == 0 {
        return Err(Error::ShapeMismatch("adjust needs a non-empty square matrix".into()));
    }
    if !(s[(0, 0)] > 0.0) {
        return Err(Error::NotPd(format!("S(1,1) = {} is not positive", s[(0, 0)])));
    }
    let b = symmetrize(s) / sigma2;
    let b11 = b[(0, 0)];
    let beta = b.column(0).into_owned();
    let kappa = (b11 - nu) / (b11 * b11);
    let mut sigma = (&b - &beta * beta.transpose() * kappa) / nu;
    sigma = symmetrize(&sigma);
    sigma[(0, 0)] = 1.0;
    if SpdFactor::new(&sigma).is_none() {
        return Err(Error::NotPd("adjusted scale matrix".into()));
    }
    Ok(sigma)
}

/// [`adjust`] with a ridge fallback for singular scatter matrices: adds
/// `1e-8 tr(S)/m I` (or `1e-8 I` when the trace vanishes). Returns the
/// (possibly ridged) scatter used and whether the ridge was needed.
pub(crate) fn adjust_with_ridge(nu: f64, sigma2: f64, s: &Matrix) -> Result<(Matrix, Matrix, bool)> {
    let s = symmetrize(s);
    if s[(0, 0)] > 0.0 && SpdFactor::new(&s).is_some() {
        if let Ok(sig) = adjust(nu, sigma2, &s) {
            return Ok((sig, s, false));
        }
    }
    let m = s.nrows();
    let tr = s.trace();
    let eps = if tr > 0.0 { 1e-8 * tr / m as f64 } else { 1e-8 };
    let ridged = &s + Matrix::identity(m, m) * eps;
    let sig = adjust(nu, sigma2, &ridged)?;
    Ok((sig, ridged, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_case() {
        let nu = 4.0;
        let sigma2 = 2.5;
        let s = Matrix::identity(3, 3) * (nu * sigma2);
        let out = adjust(nu, sigma2, &s).unwrap();
        assert!((out - Matrix::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn stationarity_residual_and_unit_corner() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 2..=6 {
            let a = Matrix::from_fn(n, n + 2, |_, _| rng.random_range(-1.0..1.0));
            let s = &a * a.transpose();
            let (nu, sigma2) = (7.0, 2.0);
            let out = adjust(nu, sigma2, &s).unwrap();
            assert_eq!(out[(0, 0)], 1.0);
            let b = &s / sigma2;
            let col = out.column(0).into_owned();
            let resid = &out * nu - &b + &col * col.transpose() * (b[(0, 0)] - nu);
            assert!(resid.norm() <= 1e-10 * b.norm().max(1.0), "residual {}", resid.norm());
        }
    }

    #[test]
    fn errors() {
        let z = Matrix::zeros(2, 2);
        assert!(adjust(1.0, 1.0, &z).is_err());
        assert!(adjust(0.0, 1.0, &Matrix::identity(2, 2)).is_err());
        let (sig, _, ridged) = adjust_with_ridge(3.0, 1.0, &z).unwrap();
        assert!(ridged);
        assert_eq!(sig[(0, 0)], 1.0);
    }
}
