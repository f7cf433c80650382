//! Minimal dense tensor type with row-major storage.
//!
//! Contractions are lowered to a single matrix product after permuting the
//! contracted axes to the inner positions, so every network contraction in the
//! crate goes through faer's GEMM kernels.

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};
use num_complex::Complex64 as C64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![ZERO; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<C64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor data length does not match shape {shape:?}"
        );
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let mut t = Self::zeros(shape);
        let mut idx = vec![0usize; shape.len()];
        for value in t.data.iter_mut() {
            *value = f(&idx);
            increment(&mut idx, shape);
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: C64) {
        let k = self.offset(idx);
        self.data[k] = value;
    }

    pub fn reshape(mut self, shape: &[usize]) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            self.data.len(),
            "cannot reshape {:?} into {shape:?}",
            self.shape
        );
        self.shape = shape.to_vec();
        self
    }

    /// Axis `k` of the result is axis `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Tensor {
        assert_eq!(perm.len(), self.rank());
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return self.clone();
        }
        let src_strides = strides(&self.shape);
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let gather: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
        let mut out = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; new_shape.len()];
        let mut src = 0usize;
        for _ in 0..self.data.len() {
            out.push(self.data[src]);
            // odometer increment tracking the source offset
            for ax in (0..new_shape.len()).rev() {
                idx[ax] += 1;
                src += gather[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                src -= gather[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        Tensor {
            shape: new_shape,
            data: out,
        }
    }

    pub fn conj(&self) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&mut self, factor: C64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// View as a row-major `rows x cols` matrix.
    pub fn as_mat(&self, rows: usize, cols: usize) -> MatRef<'_, C64> {
        assert_eq!(rows * cols, self.data.len());
        MatRef::from_row_major_slice(&self.data, rows, cols)
    }

    pub fn from_mat(shape: &[usize], m: MatRef<'_, C64>) -> Tensor {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Tensor::from_vec(shape, data)
    }
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

fn increment(idx: &mut [usize], shape: &[usize]) {
    for ax in (0..shape.len()).rev() {
        idx[ax] += 1;
        if idx[ax] < shape[ax] {
            return;
        }
        idx[ax] = 0;
    }
}

/// Row-major product `a (m x k) * b (k x n)`.
pub(crate) fn matmul_rm(a: &[C64], m: usize, k: usize, b: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![ZERO; m * n];
    if m == 0 || n == 0 {
        return out;
    }
    let lhs = MatRef::from_row_major_slice(a, m, k);
    let rhs = MatRef::from_row_major_slice(b, k, n);
    let dst = MatMut::from_row_major_slice_mut(&mut out, m, n);
    matmul(dst, Accum::Replace, lhs, rhs, ONE, Par::Seq);
    out
}

/// Contracts axes `axes_a` of `a` against `axes_b` of `b` pairwise. The result
/// carries the free axes of `a` in order followed by the free axes of `b`.
pub fn tensordot(a: &Tensor, axes_a: &[usize], b: &Tensor, axes_b: &[usize]) -> Tensor {
    assert_eq!(axes_a.len(), axes_b.len());
    for (&i, &j) in axes_a.iter().zip(axes_b) {
        assert_eq!(
            a.shape[i], b.shape[j],
            "contracted axes differ: {:?}[{i}] vs {:?}[{j}]",
            a.shape, b.shape
        );
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|k| !axes_a.contains(k)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|k| !axes_b.contains(k)).collect();

    let perm_a: Vec<usize> = free_a.iter().chain(axes_a).copied().collect();
    let perm_b: Vec<usize> = axes_b.iter().chain(&free_b).copied().collect();
    let at = a.permute(&perm_a);
    let bt = b.permute(&perm_b);

    let m: usize = free_a.iter().map(|&k| a.shape[k]).product();
    let inner: usize = axes_a.iter().map(|&k| a.shape[k]).product();
    let n: usize = free_b.iter().map(|&k| b.shape[k]).product();

    let data = matmul_rm(&at.data, m, inner, &bt.data, n);
    let shape: Vec<usize> = free_a
        .iter()
        .map(|&k| a.shape[k])
        .chain(free_b.iter().map(|&k| b.shape[k]))
        .collect();
    Tensor::from_vec(&shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn permute_matches_index_map() {
        let t = Tensor::from_fn(&[2, 3, 4], |i| c((i[0] * 100 + i[1] * 10 + i[2]) as f64));
        let p = t.permute(&[2, 0, 1]);
        assert_eq!(p.shape(), &[4, 2, 3]);
        for a in 0..2 {
            for b in 0..3 {
                for k in 0..4 {
                    assert_eq!(p.get(&[k, a, b]), t.get(&[a, b, k]));
                }
            }
        }
    }

    #[test]
    fn tensordot_against_loops() {
        let a = Tensor::from_fn(&[2, 3, 4], |i| C64::new(i[0] as f64 - i[2] as f64, i[1] as f64));
        let b = Tensor::from_fn(&[4, 5, 2], |i| C64::new((i[0] * i[1]) as f64, -(i[2] as f64)));
        // contract a[x, y, k] b[k, z, x] -> r[y, z]
        let r = tensordot(&a, &[0, 2], &b, &[2, 0]);
        assert_eq!(r.shape(), &[3, 5]);
        for y in 0..3 {
            for z in 0..5 {
                let mut s = ZERO;
                for x in 0..2 {
                    for k in 0..4 {
                        s += a.get(&[x, y, k]) * b.get(&[k, z, x]);
                    }
                }
                assert!((r.get(&[y, z]) - s).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn outer_product_when_no_axes() {
        let a = Tensor::from_vec(&[2], vec![c(1.0), c(2.0)]);
        let b = Tensor::from_vec(&[3], vec![c(1.0), c(0.0), c(-1.0)]);
        let r = tensordot(&a, &[], &b, &[]);
        assert_eq!(r.shape(), &[2, 3]);
        assert_eq!(r.get(&[1, 2]), c(-2.0));
    }
}
