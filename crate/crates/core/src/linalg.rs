//! Cholesky factors of SPD matrices and Kronecker-separable scale structures.

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tensor};

/// Relative tolerance on `|A - A'|` for accepting a matrix as symmetric.
const SYM_TOL: f64 = 1e-8;

/// Lower Cholesky factor `L` of an SPD matrix `A = L L'`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    l: Matrix,
    log_det: f64,
}

impl SpdFactor {
    /// Factorizes `a`. Returns `None` if `a` is not square, not symmetric, or
    /// not positive definite.
    pub fn new(a: &Matrix) -> Option<Self> {
        if !a.is_square() || a.nrows() == 0 || !is_symmetric(a) {
            return None;
        }
        if a.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let chol = Cholesky::new(a.clone())?;
        let l = chol.unpack();
        let log_det = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return None;
        }
        Some(SpdFactor { l, log_det })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `log |A|`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn lower(&self) -> &Matrix {
        &self.l
    }

    /// `v <- L^{-1} v`.
    #[allow(clippy::needless_range_loop)]
    pub fn forward_solve(&self, v: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = v[i];
            for j in 0..i {
                s -= self.l[(i, j)] * v[j];
            }
            v[i] = s / self.l[(i, i)];
        }
    }

    /// `v <- L'^{-1} v`.
    #[allow(clippy::needless_range_loop)]
    pub fn backward_solve(&self, v: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut s = v[i];
            for j in i + 1..n {
                s -= self.l[(j, i)] * v[j];
            }
            v[i] = s / self.l[(i, i)];
        }
    }

    /// `v <- A^{-1} v`.
    pub fn solve_in_place(&self, v: &mut [f64]) {
        self.forward_solve(v);
        self.backward_solve(v);
    }

    /// `A^{-1} B`.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        let mut out = b.clone();
        for mut col in out.column_iter_mut() {
            self.solve_in_place(col.as_mut_slice());
        }
        out
    }

    /// `A^{-1}`. Used where a dense inverse is genuinely needed (traces).
    pub fn inverse(&self) -> Matrix {
        self.solve(&Matrix::identity(self.dim(), self.dim()))
    }
}

pub(crate) fn is_symmetric(a: &Matrix) -> bool {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..a.nrows() {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > SYM_TOL * scale {
                return false;
            }
        }
    }
    true
}

/// `(A + A') / 2`.
pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Cached per-mode Cholesky factors of `Sigma_1, ..., Sigma_p`.
#[derive(Debug, Clone)]
pub struct KronFactor {
    factors: Vec<SpdFactor>,
}

impl KronFactor {
    /// Factorizes every scale matrix; a failure names the (0-based) mode.
    pub fn new(scales: &[Matrix]) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::ShapeMismatch("at least one scale matrix required".into()));
        }
        let factors = scales
            .iter()
            .enumerate()
            .map(|(mode, s)| SpdFactor::new(s).ok_or(Error::NotPositiveDefinite { mode }))
            .collect::<Result<Vec<_>>>()?;
        Ok(KronFactor { factors })
    }

    pub fn factors(&self) -> &[SpdFactor] {
        &self.factors
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(SpdFactor::dim).collect()
    }

    fn check_shape(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.shape().as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "tensor shape {:?} does not match scale dimensions {:?}",
                x.shape(),
                self.shape()
            )));
        }
        Ok(())
    }

    /// `log |Sigma_p (x) ... (x) Sigma_1| = sum_k m_{-k} log |Sigma_k|`.
    pub fn log_det(&self) -> f64 {
        let m: usize = self.factors.iter().map(SpdFactor::dim).product();
        self.factors.iter().map(|f| (m / f.dim()) as f64 * f.log_det()).sum()
    }

    /// `[[x; L_1^{-1}, ..., L_p^{-1}]]`, skipping mode `skip` if given.
    pub fn whiten_except(&self, x: &Tensor, skip: Option<usize>) -> Result<Tensor> {
        self.check_shape(x)?;
        let mut out = x.clone();
        for (k, f) in self.factors.iter().enumerate() {
            if Some(k) != skip {
                out.for_each_fiber(k, |v| f.forward_solve(v));
            }
        }
        Ok(out)
    }

    /// `[[x; L_1^{-1}, ..., L_p^{-1}]]`, so that `|whiten(x)|^2 = D^2_Sigma(x, 0)`.
    pub fn whiten(&self, x: &Tensor) -> Result<Tensor> {
        self.whiten_except(x, None)
    }

    /// `[[x; L_1, ..., L_p]]`.
    pub fn color(&self, x: &Tensor) -> Result<Tensor> {
        self.check_shape(x)?;
        let mut out = x.clone();
        for (k, f) in self.factors.iter().enumerate() {
            let l = f.lower();
            let n = f.dim();
            out.for_each_fiber(k, |v| {
                for i in (0..n).rev() {
                    let mut s = 0.0;
                    for j in 0..=i {
                        s += l[(i, j)] * v[j];
                    }
                    v[i] = s;
                }
            });
        }
        Ok(out)
    }

    /// `[[x; Sigma_1^{-1}, ..., Sigma_p^{-1}]]`.
    pub fn apply_inverse(&self, x: &Tensor) -> Result<Tensor> {
        self.check_shape(x)?;
        let mut out = x.clone();
        for (k, f) in self.factors.iter().enumerate() {
            out.for_each_fiber(k, |v| f.solve_in_place(v));
        }
        Ok(out)
    }

    /// `<x, [[x; Sigma^{-1}]]>`, without `sigma^2`.
    pub fn quad(&self, x: &Tensor) -> Result<f64> {
        let w = self.whiten(x)?;
        w.inner(&w)
    }

    /// `(1/sigma^2) <x - m, [[x - m; Sigma^{-1}]]>`.
    pub fn mahalanobis_sq(&self, x: &Tensor, m: &Tensor, sigma2: f64) -> Result<f64> {
        Ok(self.quad(&x.sub(m)?)? / sigma2)
    }
}

/// Squared Mahalanobis distance `(1/sigma^2) <x - m, [[x - m; Sigma_1^{-1}, ..., Sigma_p^{-1}]]>`,
/// computed by per-mode Cholesky solves.
pub fn mahalanobis_sq(x: &Tensor, m: &Tensor, scales: &[Matrix], sigma2: f64) -> Result<f64> {
    check_sigma2(sigma2)?;
    KronFactor::new(scales)?.mahalanobis_sq(x, m, sigma2)
}

/// `log |sigma^2 Sigma_p (x) ... (x) Sigma_1| = m log sigma^2 + sum_k m_{-k} log |Sigma_k|`.
pub fn kron_logdet(scales: &[Matrix], sigma2: f64) -> Result<f64> {
    check_sigma2(sigma2)?;
    let kf = KronFactor::new(scales)?;
    let m: usize = kf.shape().iter().product();
    Ok(m as f64 * sigma2.ln() + kf.log_det())
}

pub(crate) fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {sigma2}")));
    }
    Ok(())
}

/// Symmetric eigendecomposition with eigenvalues sorted in decreasing order.
pub fn sym_eigen_desc(a: &Matrix) -> (Vec<f64>, Matrix) {
    let eig = symmetrize(a).symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = Matrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}
