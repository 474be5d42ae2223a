//! Random scale matrices for simulation studies.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen_desc, symmetrize};
use crate::tensor::Matrix;

/// Draw from the Wishart law `W_m(df, I)` as `G G'` with `G` an `m x df` Gaussian matrix.
pub fn wishart_identity<R: Rng + ?Sized>(m: usize, df: usize, rng: &mut R) -> Matrix {
    let g = Matrix::from_fn(m, df, |_, _| StandardNormal.sample(rng));
    &g * g.transpose()
}

/// Raises the small eigenvalues of an SPD matrix so its condition number is at most `max_cond`.
pub fn cap_condition_number(a: &Matrix, max_cond: f64) -> Result<Matrix> {
    if !(max_cond >= 1.0) {
        return Err(Error::InvalidParameter(format!("condition cap must be at least 1, got {max_cond}")));
    }
    let (vals, vecs) = sym_eigen_desc(a);
    let top = vals[0];
    if !(top > 0.0) {
        return Err(Error::NotPd("matrix to condition".into()));
    }
    let floor = top / max_cond;
    let clamped: Vec<f64> = vals.iter().map(|&v| v.max(floor)).collect();
    let d = Matrix::from_diagonal(&crate::tensor::Vector::from_vec(clamped));
    Ok(symmetrize(&(&vecs * d * vecs.transpose())))
}

/// Scale matrix `W / W(1,1)` with `W ~ W_m(100 m, I)` conditioned to at most 50.
pub fn random_scale_matrix<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<Matrix> {
    let w = cap_condition_number(&wishart_identity(m, 100 * m, rng), 50.0)?;
    Ok(&w / w[(0, 0)])
}
