//! Dense tensors and the reshaping/product algebra.
//!
//! Elements are stored with the first index varying fastest: element
//! `(i_1, ..., i_p)` (0-based here) lives at flat offset
//! `sum_k i_k * prod_{q<k} m_q`. The flat buffer is therefore the
//! vectorization of the tensor, and the `k`-th canonical matricization is a
//! pure reshape of it. Matrices are `nalgebra::DMatrix<f64>`, which uses the
//! same column-major (first index fastest) convention.
//!
//! Modes are 0-based in this API: mode `k` here is mode `k + 1` in the usual
//! 1-based notation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense real matrix, column-major.
pub type Matrix = DMatrix<f64>;
/// Dense real column vector.
pub type Vector = DVector<f64>;

/// A dense p-way array of `f64` with first-index-fastest layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::ShapeMismatch("tensor order must be at least 1".into()));
        }
        if shape.contains(&0) {
            return Err(Error::ShapeMismatch(format!("zero-sized mode in shape {shape:?}")));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {numel} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        assert!(!shape.is_empty() && shape.iter().all(|&m| m > 0), "invalid shape {shape:?}");
        Tensor { shape: shape.to_vec(), data: vec![value; shape.iter().product()] }
    }

    /// Builds a tensor by evaluating `f` at every (0-based) multi-index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut t = Self::zeros(shape);
        let mut idx = vec![0usize; shape.len()];
        for v in t.data.iter_mut() {
            *v = f(&idx);
            increment(&mut idx, shape);
        }
        t
    }

    /// A 2-way tensor holding the entries of `m`.
    pub fn from_matrix(m: &Matrix) -> Self {
        Tensor { shape: vec![m.nrows(), m.ncols()], data: m.as_slice().to_vec() }
    }

    /// An order-1 tensor holding `v`.
    pub fn from_vector(v: &[f64]) -> Self {
        assert!(!v.is_empty());
        Tensor { shape: vec![v.len()], data: v.to_vec() }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    /// Total number of elements `m = prod m_k`.
    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Reinterprets the buffer with a new shape of equal element count.
    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Tensor::new(shape, self.data)
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        let mut stride = 1;
        for (&i, &m) in idx.iter().zip(&self.shape) {
            debug_assert!(i < m);
            off += i * stride;
            stride *= m;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    /// `vec(X)`: the flat data in layout order.
    pub fn vectorize(&self) -> Vector {
        Vector::from_column_slice(&self.data)
    }

    fn check_mode(&self, k: usize) -> Result<()> {
        if k >= self.order() {
            return Err(Error::ModeOutOfRange { mode: k, order: self.order() });
        }
        Ok(())
    }

    /// Splits the layout around mode `k` into (left, m_k, right) extents.
    fn mode_extents(&self, k: usize) -> (usize, usize, usize) {
        let left: usize = self.shape[..k].iter().product();
        let right: usize = self.shape[k + 1..].iter().product();
        (left, self.shape[k], right)
    }

    /// Mode-`k` matricization `X_(k)`, an `m_k x m_{-k}` matrix whose columns
    /// run over the remaining indices with the lowest mode fastest.
    pub fn mode_matricize(&self, k: usize) -> Result<Matrix> {
        self.check_mode(k)?;
        let (left, mid, right) = self.mode_extents(k);
        let cols = left * right;
        let mut out = Matrix::zeros(mid, cols);
        for r in 0..right {
            for i in 0..mid {
                let src = left * (i + mid * r);
                for l in 0..left {
                    out[(i, l + left * r)] = self.data[src + l];
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`Tensor::mode_matricize`].
    pub fn fold_mode(mat: &Matrix, shape: &[usize], k: usize) -> Result<Self> {
        let mut t = Tensor::zeros(shape);
        t.check_mode(k)?;
        let (left, mid, right) = t.mode_extents(k);
        if mat.nrows() != mid || mat.ncols() != left * right {
            return Err(Error::ShapeMismatch(format!(
                "cannot fold a {}x{} matrix into shape {shape:?} along mode {k}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        for r in 0..right {
            for i in 0..mid {
                let dst = left * (i + mid * r);
                for l in 0..left {
                    t.data[dst + l] = mat[(i, l + left * r)];
                }
            }
        }
        Ok(t)
    }

    /// Canonical matricization `X_<split>`: rows run over the first `split`
    /// modes, columns over the rest. `split == order` gives `vec(X)` as a
    /// single column.
    pub fn canonical_matricize(&self, split: usize) -> Result<Matrix> {
        if split == 0 || split > self.order() {
            return Err(Error::ModeOutOfRange { mode: split, order: self.order() });
        }
        let rows: usize = self.shape[..split].iter().product();
        let cols = self.numel() / rows;
        Ok(Matrix::from_column_slice(rows, cols, &self.data))
    }

    /// Calls `f` on every mode-`k` fiber, in place.
    pub(crate) fn for_each_fiber(&mut self, k: usize, mut f: impl FnMut(&mut [f64])) {
        let (left, mid, right) = self.mode_extents(k);
        if left == 1 {
            for chunk in self.data.chunks_exact_mut(mid) {
                f(chunk);
            }
            return;
        }
        let mut buf = vec![0.0; mid];
        for r in 0..right {
            for l in 0..left {
                let base = l + left * mid * r;
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = self.data[base + left * i];
                }
                f(&mut buf);
                for (i, b) in buf.iter().enumerate() {
                    self.data[base + left * i] = *b;
                }
            }
        }
    }

    /// Mode-`k` product `X x_k A`: replaces `m_k` by `A.nrows()`.
    pub fn mode_product(&self, a: &Matrix, k: usize) -> Result<Tensor> {
        self.check_mode(k)?;
        let (left, mid, right) = self.mode_extents(k);
        if a.ncols() != mid {
            return Err(Error::ShapeMismatch(format!(
                "mode-{k} product needs {mid} columns, matrix is {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let rows = a.nrows();
        let mut shape = self.shape.clone();
        shape[k] = rows;
        let mut out = vec![0.0; left * rows * right];
        for r in 0..right {
            for i in 0..mid {
                let src = left * (i + mid * r);
                let xs = &self.data[src..src + left];
                for j in 0..rows {
                    let aji = a[(j, i)];
                    if aji == 0.0 {
                        continue;
                    }
                    let dst = left * (j + rows * r);
                    for (o, &x) in out[dst..dst + left].iter_mut().zip(xs) {
                        *o += aji * x;
                    }
                }
            }
        }
        Ok(Tensor { shape, data: out })
    }

    /// Tucker product `[[X; A_1, ..., A_p]]`.
    pub fn tucker(&self, mats: &[Matrix]) -> Result<Tensor> {
        if mats.len() != self.order() {
            return Err(Error::ShapeMismatch(format!(
                "Tucker product needs {} matrices, got {}",
                self.order(),
                mats.len()
            )));
        }
        let mut out = self.clone();
        for (k, a) in mats.iter().enumerate() {
            out = out.mode_product(a, k)?;
        }
        Ok(out)
    }

    /// Tucker product that skips modes whose matrix is `None`.
    pub fn tucker_partial(&self, mats: &[Option<&Matrix>]) -> Result<Tensor> {
        if mats.len() != self.order() {
            return Err(Error::ShapeMismatch("one optional matrix per mode required".into()));
        }
        let mut out = self.clone();
        for (k, a) in mats.iter().enumerate() {
            if let Some(a) = a {
                out = out.mode_product(a, k)?;
            }
        }
        Ok(out)
    }

    /// Contracts mode `k` with `vecs[k]` wherever given; returns the entries
    /// of the remaining modes in first-index-fastest order.
    pub fn contract_vectors(&self, vecs: &[Option<&[f64]>]) -> Result<Vec<f64>> {
        if vecs.len() != self.order() {
            return Err(Error::ShapeMismatch("one optional vector per mode required".into()));
        }
        let mut out = self.clone();
        for (k, v) in vecs.iter().enumerate() {
            if let Some(v) = v {
                out = out.mode_product(&Matrix::from_row_slice(1, v.len(), v), k)?;
            }
        }
        Ok(out.data)
    }

    fn check_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(())
    }

    /// `<X, Y> = vec(X)' vec(Y)`.
    pub fn inner(&self, other: &Tensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(dot(&self.data, &other.data))
    }

    /// Partial contraction `<X | B>` for `B` of shape `(m_1..m_p, h_1..h_q)`.
    pub fn partial_contraction(&self, b: &Tensor) -> Result<Tensor> {
        let p = self.order();
        if b.order() <= p || b.shape[..p] != self.shape[..] {
            return Err(Error::ShapeMismatch(format!(
                "leading modes of {:?} must equal {:?} with at least one trailing mode",
                b.shape, self.shape
            )));
        }
        let m = self.numel();
        let out_shape = b.shape[p..].to_vec();
        let data = b.data.chunks_exact(m).map(|col| dot(col, &self.data)).collect();
        Ok(Tensor { shape: out_shape, data })
    }

    /// Outer product `X o Y`, of shape `(m_1..m_p, n_1..n_q)`.
    pub fn outer(&self, other: &Tensor) -> Tensor {
        let mut shape = self.shape.clone();
        shape.extend_from_slice(&other.shape);
        let mut data = Vec::with_capacity(self.numel() * other.numel());
        for &y in &other.data {
            data.extend(self.data.iter().map(|&x| x * y));
        }
        Tensor { shape, data }
    }

    /// Outer product of vectors `z_1 o ... o z_p`.
    pub fn outer_vectors(vs: &[&[f64]]) -> Tensor {
        assert!(!vs.is_empty());
        let mut t = Tensor::from_vector(vs[0]);
        for v in &vs[1..] {
            t = t.outer(&Tensor::from_vector(v));
        }
        t
    }

    /// Sub-tensor keeping `indices` (0-based, in the given order) along mode `k`.
    pub fn select(&self, k: usize, indices: &[usize]) -> Result<Tensor> {
        self.check_mode(k)?;
        if indices.is_empty() {
            return Err(Error::InvalidParameter(format!("empty index set for mode {k}")));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.shape[k]) {
            return Err(Error::InvalidParameter(format!(
                "index {bad} out of range for mode {k} of size {}",
                self.shape[k]
            )));
        }
        let (left, mid, right) = self.mode_extents(k);
        let mut shape = self.shape.clone();
        shape[k] = indices.len();
        let mut data = Vec::with_capacity(left * indices.len() * right);
        for r in 0..right {
            for &i in indices {
                let src = left * (i + mid * r);
                data.extend_from_slice(&self.data[src..src + left]);
            }
        }
        Ok(Tensor { shape, data })
    }

    pub fn norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn scaled(&self, c: f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|x| x * c).collect() }
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Tensor { shape: self.shape.clone(), data })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Tensor { shape: self.shape.clone(), data })
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Tensor) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        Ok(())
    }

    /// Gram matrix of the mode-`k` matricization, `X_(k) X_(k)'`.
    pub fn mode_gram(&self, k: usize) -> Result<Matrix> {
        self.check_mode(k)?;
        let (left, mid, right) = self.mode_extents(k);
        let mut g = Matrix::zeros(mid, mid);
        for r in 0..right {
            let block = &self.data[left * mid * r..left * mid * (r + 1)];
            for a in 0..mid {
                let xa = &block[left * a..left * (a + 1)];
                for b in 0..=a {
                    let xb = &block[left * b..left * (b + 1)];
                    g[(a, b)] += dot(xa, xb);
                }
            }
        }
        for a in 0..mid {
            for b in 0..a {
                g[(b, a)] = g[(a, b)];
            }
        }
        Ok(g)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Advances a multi-index in first-index-fastest order.
pub(crate) fn increment(idx: &mut [usize], shape: &[usize]) {
    for (i, &m) in idx.iter_mut().zip(shape) {
        *i += 1;
        if *i < m {
            return;
        }
        *i = 0;
    }
}

/// Kronecker product `A_p (x) ... (x) A_1` of `mats = [A_1, ..., A_p]`.
pub fn kron_reversed(mats: &[Matrix]) -> Matrix {
    let mut out = Matrix::from_element(1, 1, 1.0);
    for a in mats {
        out = a.kronecker(&out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_tensor(shape: &[usize]) -> Tensor {
        let n: usize = shape.iter().product();
        Tensor::new(shape.to_vec(), (1..=n).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn vectorize_matrix_is_column_major() {
        let mut x = Tensor::zeros(&[2, 2]);
        x.set(&[0, 0], 1.0);
        x.set(&[1, 0], 2.0);
        x.set(&[0, 1], 3.0);
        x.set(&[1, 1], 4.0);
        assert_eq!(x.vectorize().as_slice(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn vectorize_three_way_by_formula() {
        let x = Tensor::from_fn(&[2, 2, 2], |i| (1 + i[0] + 2 * i[1] + 4 * i[2]) as f64);
        assert_eq!(x.vectorize().as_slice(), &[1., 2., 3., 4., 5., 6., 7., 8.]);
    }

    #[test]
    fn mode_matricize_of_matrix() {
        let x = seq_tensor(&[2, 3]);
        let m = Matrix::from_column_slice(2, 3, x.data());
        assert_eq!(x.mode_matricize(0).unwrap(), m);
        assert_eq!(x.mode_matricize(1).unwrap(), m.transpose());
    }

    #[test]
    fn mode_three_rows() {
        let x = seq_tensor(&[2, 2, 2]);
        let m = x.mode_matricize(2).unwrap();
        assert_eq!(m.nrows(), 2);
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), vec![1., 2., 3., 4.]);
        assert_eq!(m.row(1).iter().copied().collect::<Vec<_>>(), vec![5., 6., 7., 8.]);
    }

    #[test]
    fn fold_inverts_matricize() {
        let x = seq_tensor(&[2, 3, 4]);
        for k in 0..3 {
            let m = x.mode_matricize(k).unwrap();
            assert_eq!(Tensor::fold_mode(&m, x.shape(), k).unwrap(), x);
        }
    }

    #[test]
    fn canonical_reshape() {
        let x = seq_tensor(&[2, 2, 2]);
        let c = x.canonical_matricize(2).unwrap();
        assert_eq!((c.nrows(), c.ncols()), (4, 2));
        assert_eq!(c.column(0).as_slice(), &[1., 2., 3., 4.]);
        assert_eq!(c.column(1).as_slice(), &[5., 6., 7., 8.]);
        assert!(x.canonical_matricize(0).is_err());
        assert_eq!(x.canonical_matricize(3).unwrap().ncols(), 1);
    }

    #[test]
    fn mode_errors() {
        let x = seq_tensor(&[2, 3]);
        assert!(matches!(x.mode_matricize(2), Err(Error::ModeOutOfRange { .. })));
        assert!(x.mode_product(&Matrix::identity(3, 3), 0).is_err());
    }

    #[test]
    fn summation_matrix_gives_column_sums() {
        let x = seq_tensor(&[2, 2]);
        let ones = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let y = x.mode_product(&ones, 0).unwrap();
        assert_eq!(y.shape(), &[1, 2]);
        assert_eq!(y.data(), &[3.0, 7.0]);
    }

    #[test]
    fn tucker_of_basis_tensor() {
        let mut x = Tensor::zeros(&[2, 2]);
        x.set(&[0, 0], 1.0);
        let two = Matrix::identity(2, 2) * 2.0;
        let y = x.tucker(&[two.clone(), two]).unwrap();
        assert_eq!(y.data(), &[4.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn inner_of_ones() {
        let a = Tensor::filled(&[2, 2], 1.0);
        assert_eq!(a.inner(&a).unwrap(), 4.0);
        assert!(a.inner(&Tensor::zeros(&[4])).is_err());
    }

    #[test]
    fn contraction_with_basis_extracts_slice() {
        let b = seq_tensor(&[2, 3, 4]);
        let mut e = Tensor::zeros(&[2, 3]);
        e.set(&[0, 0], 1.0);
        let r = b.partial_contraction_of(&e);
        let expected: Vec<f64> = (0..4).map(|j| b.get(&[0, 0, j])).collect();
        assert_eq!(r.data(), &expected[..]);
    }

    impl Tensor {
        fn partial_contraction_of(&self, x: &Tensor) -> Tensor {
            x.partial_contraction(self).unwrap()
        }
    }

    #[test]
    fn outer_of_scalars_and_basis() {
        let a = Tensor::from_vector(&[3.0]);
        let b = Tensor::from_vector(&[4.0]);
        assert_eq!(a.outer(&b).data(), &[12.0]);
        let mut e = Tensor::zeros(&[2, 2]);
        e.set(&[1, 0], 1.0);
        let ee = e.outer(&e);
        assert_eq!(ee.shape(), &[2, 2, 2, 2]);
        assert_eq!(ee.sum(), 1.0);
        assert_eq!(ee.get(&[1, 0, 1, 0]), 1.0);
    }

    #[test]
    fn select_and_gram() {
        let x = seq_tensor(&[2, 3]);
        let s = x.select(1, &[2, 0]).unwrap();
        assert_eq!(s.data(), &[5., 6., 1., 2.]);
        let g = x.mode_gram(0).unwrap();
        let m = x.mode_matricize(0).unwrap();
        assert_eq!(g, &m * m.transpose());
        assert!(x.select(0, &[]).is_err());
    }

    #[test]
    fn constructor_validates() {
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::new(vec![], vec![]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_err());
    }
}
