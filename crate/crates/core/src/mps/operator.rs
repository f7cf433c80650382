use faer::Mat;
use num_complex::Complex64 as C64;

use super::env::{sandwich, Environment2};
use super::MatrixProductState;
use crate::error::{Error, Result};
use crate::model::{DenseOperator, DEFAULT_DENSE_CAP};
use crate::tensor::{tensordot, Tensor, ONE, ZERO};

/// Site tensors have shape `(left bond, out, in, right bond)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixProductOperator {
    tensors: Vec<Tensor>,
    local_dim: usize,
}

impl MatrixProductOperator {
    pub fn from_tensors(tensors: Vec<Tensor>) -> Result<Self> {
        let Some(first) = tensors.first() else {
            return Err(Error::ShapeMismatch("empty MPO".into()));
        };
        let d = first.shape()[1];
        let mut prev = 1usize;
        for (k, t) in tensors.iter().enumerate() {
            let s = t.shape();
            if s.len() != 4 || s[0] != prev || s[1] != d || s[2] != d {
                return Err(Error::ShapeMismatch(format!(
                    "MPO site {k} has shape {s:?}, expected ({prev}, {d}, {d}, _)"
                )));
            }
            prev = s[3];
        }
        if prev != 1 {
            return Err(Error::ShapeMismatch(format!(
                "MPO right boundary bond has dimension {prev}"
            )));
        }
        Ok(Self { tensors, local_dim: d })
    }

    pub fn identity(length: usize, local_dim: usize) -> Self {
        let t = Tensor::from_fn(&[1, local_dim, local_dim, 1], |i| if i[1] == i[2] { ONE } else { ZERO });
        Self {
            tensors: vec![t; length],
            local_dim,
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensor(&self, site: usize) -> &Tensor {
        &self.tensors[site]
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        std::iter::once(1)
            .chain(self.tensors.iter().map(|t| t.shape()[3]))
            .collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Hermitian conjugate: conjugate entries and swap the physical legs.
    pub fn adjoint(&self) -> Self {
        Self {
            tensors: self.tensors.iter().map(|t| t.conj().permute(&[0, 2, 1, 3])).collect(),
            local_dim: self.local_dim,
        }
    }

    /// Operator product `self * other` with bond dimension `w_self * w_other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() || self.local_dim != other.local_dim {
            return Err(Error::ShapeMismatch("MPO product of incompatible chains".into()));
        }
        let tensors = self
            .tensors
            .iter()
            .zip(&other.tensors)
            .map(|(a, b)| {
                // a[w1, s, u, w1'] b[w2, u, t, w2'] -> (w1, s, w1', w2, t, w2')
                let p = tensordot(a, &[2], b, &[1]).permute(&[0, 3, 1, 4, 2, 5]);
                let s = p.shape().to_vec();
                p.reshape(&[s[0] * s[1], s[2], s[3], s[4] * s[5]])
            })
            .collect();
        Self::from_tensors(tensors)
    }

    /// Exact application to a state; bond dimensions multiply.
    pub fn apply(&self, psi: &MatrixProductState) -> Result<MatrixProductState> {
        if self.len() != psi.len() || self.local_dim != psi.local_dim() {
            return Err(Error::ShapeMismatch("MPO and MPS chains differ".into()));
        }
        let tensors = self
            .tensors
            .iter()
            .zip(psi.tensors())
            .map(|(w, a)| {
                // w[wl, s, t, wr] a[al, t, ar] -> (wl, al, s, wr, ar)
                let p = tensordot(w, &[2], a, &[1]).permute(&[0, 3, 1, 2, 4]);
                let s = p.shape().to_vec();
                p.reshape(&[s[0] * s[1], s[2], s[3] * s[4]])
            })
            .collect();
        MatrixProductState::from_tensors(tensors)
    }

    pub fn to_dense(&self) -> Result<DenseOperator> {
        self.to_dense_capped(DEFAULT_DENSE_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<DenseOperator> {
        let d = self.local_dim;
        let dim = d
            .checked_pow(self.len() as u32)
            .ok_or(Error::DimensionCap { dim: usize::MAX, cap })?;
        if dim > cap {
            return Err(Error::DimensionCap { dim, cap });
        }
        // acc[out, in, w] accumulated over sites
        let mut acc = Tensor::from_vec(&[1, 1, 1], vec![ONE]);
        for t in &self.tensors {
            let x = tensordot(&acc, &[2], t, &[0]); // (o, i, s, t, w')
            let x = x.permute(&[0, 2, 1, 3, 4]);
            let s = x.shape().to_vec();
            acc = x.reshape(&[s[0] * s[1], s[2] * s[3], s[4]]);
        }
        let data = acc.into_data();
        let entries = Mat::<C64>::from_fn(dim, dim, |i, j| data[i * dim + j]);
        Ok(DenseOperator { dim, entries })
    }
}

fn check(o: &MatrixProductOperator, psi: &MatrixProductState) -> Result<()> {
    if o.len() != psi.len() || o.local_dim() != psi.local_dim() {
        return Err(Error::ShapeMismatch(format!(
            "operator on {} sites (d={}) vs state on {} sites (d={})",
            o.len(),
            o.local_dim(),
            psi.len(),
            psi.local_dim()
        )));
    }
    Ok(())
}

/// `<psi|O|psi> / <psi|psi>` without discarding the imaginary part.
pub fn expectation_complex(o: &MatrixProductOperator, psi: &MatrixProductState) -> Result<C64> {
    check(o, psi)?;
    let norm2 = super::overlap_unchecked(psi, psi).re;
    Ok(sandwich(psi, o, psi) / norm2)
}

/// Real part of `<psi|O|psi> / <psi|psi>` for Hermitian `O`.
pub fn expectation(o: &MatrixProductOperator, psi: &MatrixProductState) -> Result<f64> {
    let e = expectation_complex(o, psi)?;
    debug_assert!(
        e.im.abs() <= 1e-10 * e.re.abs().max(1.0),
        "expectation of a Hermitian operator has imaginary part {}",
        e.im
    );
    Ok(e.re)
}

/// `<O^2> - <O>^2` before clamping.
pub fn energy_variance_raw(o: &MatrixProductOperator, psi: &MatrixProductState) -> Result<f64> {
    check(o, psi)?;
    let norm2 = super::overlap_unchecked(psi, psi).re;
    let mean = sandwich(psi, o, psi).re / norm2;
    let second = Environment2::contract(psi, o, o, psi).re / norm2;
    Ok(second - mean * mean)
}

/// `<O^2> - <O>^2`, contracting two MPO layers; clamped at zero.
pub fn energy_variance(o: &MatrixProductOperator, psi: &MatrixProductState) -> Result<f64> {
    Ok(energy_variance_raw(o, psi)?.max(0.0))
}
