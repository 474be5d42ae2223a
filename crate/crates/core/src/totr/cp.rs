use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::sym_eigen_desc;
use crate::tensor::{Matrix, Tensor};

/// CP (CANDECOMP/PARAFAC) coefficient
/// `B = sum_r u_{1r} o ... o u_{lr} o v_{1r} o ... o v_{pr}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpCoefficient {
    u: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl CpCoefficient {
    /// Covariate-mode factors `u` (`h_j x R`) and response-mode factors `v` (`m_k x R`).
    pub fn new(u: Vec<Matrix>, v: Vec<Matrix>) -> Result<Self> {
        if u.is_empty() || v.is_empty() {
            return Err(Error::InvalidParameter("CP coefficient needs covariate and response factors".into()));
        }
        let r = u[0].ncols();
        if r == 0 {
            return Err(Error::InvalidParameter("CP rank must be at least 1".into()));
        }
        for f in u.iter().chain(&v) {
            if f.ncols() != r || f.nrows() == 0 {
                return Err(Error::ShapeMismatch("all CP factors need the same number of columns".into()));
            }
            if f.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("CP factors must be finite".into()));
            }
        }
        Ok(CpCoefficient { u, v })
    }

    pub fn rank(&self) -> usize {
        self.u[0].ncols()
    }

    pub fn u(&self) -> &[Matrix] {
        &self.u
    }

    pub fn v(&self) -> &[Matrix] {
        &self.v
    }

    pub fn covariate_shape(&self) -> Vec<usize> {
        self.u.iter().map(|m| m.nrows()).collect()
    }

    pub fn response_shape(&self) -> Vec<usize> {
        self.v.iter().map(|m| m.nrows()).collect()
    }

    pub(crate) fn u_mut(&mut self) -> &mut [Matrix] {
        &mut self.u
    }

    pub(crate) fn v_mut(&mut self) -> &mut [Matrix] {
        &mut self.v
    }

    /// The full coefficient tensor of shape `(h_1..h_l, m_1..m_p)`.
    pub fn to_tensor(&self) -> Tensor {
        let mut shape = self.covariate_shape();
        shape.extend(self.response_shape());
        let mut out = Tensor::zeros(&shape);
        for r in 0..self.rank() {
            let cols: Vec<Vec<f64>> = self.u.iter().chain(&self.v).map(|f| f.column(r).iter().copied().collect()).collect();
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            out.axpy(1.0, &Tensor::outer_vectors(&refs)).expect("same shape");
        }
        out
    }

    /// `c_r = <x, u_{1r} o ... o u_{lr}>` for each component.
    pub fn loadings(&self, x: &Tensor) -> Result<Vec<f64>> {
        if x.shape() != self.covariate_shape().as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "covariate has shape {:?}, expected {:?}",
                x.shape(),
                self.covariate_shape()
            )));
        }
        (0..self.rank())
            .map(|r| {
                let cols: Vec<Vec<f64>> = self.u.iter().map(|f| f.column(r).iter().copied().collect()).collect();
                let vecs: Vec<Option<&[f64]>> = cols.iter().map(|c| Some(c.as_slice())).collect();
                Ok(x.contract_vectors(&vecs)?[0])
            })
            .collect()
    }

    /// `sum_r c_r v_{1r} o ... o v_{pr}` for given loadings.
    pub(crate) fn response_from_loadings(&self, c: &[f64]) -> Tensor {
        let mut out = Tensor::zeros(&self.response_shape());
        for (r, &cr) in c.iter().enumerate() {
            if cr == 0.0 {
                continue;
            }
            let cols: Vec<Vec<f64>> = self.v.iter().map(|f| f.column(r).iter().copied().collect()).collect();
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            out.axpy(cr, &Tensor::outer_vectors(&refs)).expect("same shape");
        }
        out
    }

    /// `<x | B>` without forming `B`.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.response_from_loadings(&self.loadings(x)?))
    }

    /// Frobenius norm of `B` from the factor Gram matrices.
    pub fn norm(&self) -> f64 {
        let r = self.rank();
        let mut g = Matrix::from_element(r, r, 1.0);
        for f in self.u.iter().chain(&self.v) {
            g.component_mul_assign(&(f.transpose() * f));
        }
        g.sum().max(0.0).sqrt()
    }

    /// Rescales every column to unit norm except in the last response factor,
    /// which absorbs the magnitudes. `B` is unchanged.
    pub fn normalize(&mut self) {
        let last = self.v.len() - 1;
        for r in 0..self.rank() {
            let mut scale = 1.0;
            for f in self.u.iter_mut().chain(self.v[..last].iter_mut()) {
                let n = f.column(r).norm();
                if n > 0.0 {
                    f.column_mut(r).unscale_mut(n);
                    scale *= n;
                }
            }
            self.v[last].column_mut(r).scale_mut(scale);
        }
    }

    pub(crate) fn split(factors: Vec<Matrix>, l: usize) -> Result<Self> {
        let mut u = factors;
        let v = u.split_off(l);
        CpCoefficient::new(u, v)
    }
}

/// `T_(k)` times the Khatri-Rao product of the other factors, column by column.
fn mttkrp(t: &Tensor, factors: &[Matrix], k: usize) -> Result<Matrix> {
    let r = factors[0].ncols();
    let mut out = Matrix::zeros(t.shape()[k], r);
    for c in 0..r {
        let cols: Vec<Vec<f64>> = factors.iter().map(|f| f.column(c).iter().copied().collect()).collect();
        let vecs: Vec<Option<&[f64]>> =
            cols.iter().enumerate().map(|(j, v)| if j == k { None } else { Some(v.as_slice()) }).collect();
        out.column_mut(c).copy_from_slice(&t.contract_vectors(&vecs)?);
    }
    Ok(out)
}

/// Rank-`rank` CP approximation of `t` by alternating least squares, started
/// from the leading eigenvectors of each mode Gram matrix (columns beyond a
/// mode's dimension are seeded Gaussian). Returns one factor per mode.
pub fn cp_als(t: &Tensor, rank: usize, max_iters: usize, tol: f64, seed: u64) -> Result<Vec<Matrix>> {
    if rank == 0 {
        return Err(Error::InvalidParameter("CP rank must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut factors = Vec::with_capacity(t.order());
    for k in 0..t.order() {
        let dim = t.shape()[k];
        let (_, vecs) = sym_eigen_desc(&t.mode_gram(k)?);
        factors.push(Matrix::from_fn(dim, rank, |i, c| {
            if c < dim {
                vecs[(i, c)]
            } else {
                StandardNormal.sample(&mut rng)
            }
        }));
    }
    let tnorm = t.norm();
    if tnorm == 0.0 {
        return Ok(factors.into_iter().map(|f| f * 0.0).collect());
    }
    let mut prev_err = f64::INFINITY;
    for _ in 0..max_iters {
        for k in 0..t.order() {
            let mut gram = Matrix::from_element(rank, rank, 1.0);
            for (j, f) in factors.iter().enumerate() {
                if j != k {
                    gram.component_mul_assign(&(f.transpose() * f));
                }
            }
            let rhs = mttkrp(t, &factors, k)?;
            let eps = 1e-12 * gram.norm();
            let pinv = gram.pseudo_inverse(eps).map_err(|e| Error::Degenerate(e.into()))?;
            factors[k] = rhs * pinv;
        }
        let cp = CpCoefficient { u: factors[..1].to_vec(), v: factors[1..].to_vec() };
        let err = t.sub(&cp.to_tensor())?.norm() / tnorm;
        if (prev_err - err).abs() <= tol * err.max(1e-300) || err < 1e-14 {
            break;
        }
        prev_err = err;
    }
    Ok(factors)
}
