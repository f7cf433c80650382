//! Open-boundary matrix product states and operators.
//!
//! Site tensors of a state have shape `(left bond, physical, right bond)`; the
//! outermost bonds have dimension 1, which absorbs the boundary vectors. A state
//! may carry an orthogonality center `c`: every tensor left of `c` is a left
//! isometry and every tensor right of `c` a right isometry.

mod env;
pub mod io;
mod operator;

pub use env::{Environment, Environment2};
pub use operator::{energy_variance, energy_variance_raw, expectation, expectation_complex, MatrixProductOperator};

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::entanglement::TwoSiteDensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{thin_qr, thin_svd};
use crate::model::DEFAULT_DENSE_CAP;
use crate::tensor::{tensordot, Tensor, ONE, ZERO};

/// Default relative singular-value cutoff used by truncating operations.
pub const DEFAULT_SVD_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixProductState {
    tensors: Vec<Tensor>,
    local_dim: usize,
    max_bond: usize,
    center: Option<usize>,
}

impl MatrixProductState {
    pub fn from_tensors(tensors: Vec<Tensor>) -> Result<Self> {
        let Some(first) = tensors.first() else {
            return Err(Error::ShapeMismatch("empty MPS".into()));
        };
        let d = first.shape()[1];
        let mut prev = 1usize;
        for (k, t) in tensors.iter().enumerate() {
            let s = t.shape();
            if s.len() != 3 || s[0] != prev || s[1] != d {
                return Err(Error::ShapeMismatch(format!(
                    "site {k} has shape {s:?}, expected ({prev}, {d}, _)"
                )));
            }
            prev = s[2];
        }
        if prev != 1 {
            return Err(Error::ShapeMismatch(format!(
                "right boundary bond has dimension {prev}"
            )));
        }
        let max_bond = tensors.iter().map(|t| t.shape()[2]).max().unwrap_or(1);
        Ok(Self {
            tensors,
            local_dim: d,
            max_bond,
            center: None,
        })
    }

    /// Product state from one local vector per site.
    pub fn product(locals: &[Vec<C64>]) -> Result<Self> {
        let tensors = locals
            .iter()
            .map(|v| Tensor::from_vec(&[1, v.len(), 1], v.clone()))
            .collect();
        Self::from_tensors(tensors)
    }

    /// Computational basis state `|s_0 s_1 ...>`.
    pub fn basis_state(config: &[usize], local_dim: usize) -> Result<Self> {
        let locals: Vec<Vec<C64>> = config
            .iter()
            .map(|&s| {
                let mut v = vec![ZERO; local_dim];
                v[s] = ONE;
                v
            })
            .collect();
        Self::product(&locals)
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

    pub fn max_bond(&self) -> usize {
        self.max_bond
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensor(&self, site: usize) -> &Tensor {
        &self.tensors[site]
    }

    /// Replaces one site tensor; the orthogonality center is kept only when the
    /// replaced site is the center itself.
    pub fn set_tensor(&mut self, site: usize, t: Tensor) {
        assert_eq!(t.shape(), self.tensors[site].shape());
        self.tensors[site] = t;
        if self.center != Some(site) {
            self.center = None;
        }
    }

    /// Bond dimensions from the left boundary to the right boundary (L + 1 entries).
    pub fn bond_dims(&self) -> Vec<usize> {
        std::iter::once(1)
            .chain(self.tensors.iter().map(|t| t.shape()[2]))
            .collect()
    }

    fn refresh_max_bond(&mut self) {
        self.max_bond = self.bond_dims().into_iter().max().unwrap_or(1);
    }

    pub fn norm(&self) -> f64 {
        match self.center {
            Some(c) => self.tensors[c].norm(),
            None => overlap_unchecked(self, self).re.max(0.0).sqrt(),
        }
    }

    pub fn scale(&mut self, factor: C64) {
        let site = self.center.unwrap_or(0);
        self.tensors[site].scale(factor);
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.scale(C64::new(1.0 / n, 0.0));
        }
    }

    /// Moves the orthogonality center by one site, carrying the gauge matrix
    /// into the neighbour. Requires the state to be centered at `from`.
    pub(crate) fn shift_center(&mut self, from: usize, to_right: bool) {
        debug_assert_eq!(self.center, Some(from));
        if to_right {
            left_orthonormalize(&mut self.tensors, from);
            self.center = Some(from + 1);
        } else {
            right_orthonormalize(&mut self.tensors, from);
            self.center = Some(from - 1);
        }
        self.refresh_max_bond();
    }
}

/// QR on site `k` viewed as `(dl*d) x dr`; R is absorbed into site `k + 1`.
fn left_orthonormalize(tensors: &mut [Tensor], k: usize) {
    let s = tensors[k].shape().to_vec();
    let (q, r) = thin_qr(tensors[k].as_mat(s[0] * s[1], s[2]));
    let kdim = q.ncols();
    tensors[k] = Tensor::from_mat(&[s[0], s[1], kdim], q.as_ref());
    let r = Tensor::from_mat(&[kdim, s[2]], r.as_ref());
    tensors[k + 1] = tensordot(&r, &[1], &tensors[k + 1], &[0]);
}

/// LQ on site `k` viewed as `dl x (d*dr)`; L is absorbed into site `k - 1`.
fn right_orthonormalize(tensors: &mut [Tensor], k: usize) {
    let s = tensors[k].shape().to_vec();
    let m = tensors[k].as_mat(s[0], s[1] * s[2]);
    let (q, r) = thin_qr(m.adjoint().to_owned().as_ref());
    let kdim = q.ncols();
    // m = r^H q^H
    let qh = q.adjoint().to_owned();
    tensors[k] = Tensor::from_mat(&[kdim, s[1], s[2]], qh.as_ref());
    let rh = Tensor::from_mat(&[s[0], kdim], r.adjoint().to_owned().as_ref());
    tensors[k - 1] = tensordot(&tensors[k - 1], &[2], &rh, &[0]);
}

/// Random state with i.i.d. complex Gaussian entries, bond dimensions capped at
/// `min(D, d^k, d^(L-k))`, right-canonicalized (center 0) and normalized.
pub fn random_mps(length: usize, local_dim: usize, bond: usize, seed: u64) -> MatrixProductState {
    assert!(bond >= 1 && length >= 1 && local_dim >= 1);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let bonds: Vec<usize> = (0..=length)
        .map(|k| {
            let left = local_dim.checked_pow(k as u32).unwrap_or(usize::MAX);
            let right = local_dim.checked_pow((length - k) as u32).unwrap_or(usize::MAX);
            bond.min(left).min(right)
        })
        .collect();
    let tensors = (0..length)
        .map(|k| {
            Tensor::from_fn(&[bonds[k], local_dim, bonds[k + 1]], |_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re, im)
            })
        })
        .collect();
    let psi = MatrixProductState::from_tensors(tensors).expect("consistent bonds");
    let mut psi = canonicalize(&psi, 0);
    psi.normalize();
    psi
}

/// Mixed-canonical form with orthogonality center at `center`. The state (and
/// its norm) is unchanged up to rounding.
pub fn canonicalize(psi: &MatrixProductState, center: usize) -> MatrixProductState {
    assert!(
        center < psi.len(),
        "center {center} outside chain of length {}",
        psi.len()
    );
    let mut tensors = psi.tensors.clone();
    for k in 0..center {
        left_orthonormalize(&mut tensors, k);
    }
    for k in (center + 1..tensors.len()).rev() {
        right_orthonormalize(&mut tensors, k);
    }
    let mut out = MatrixProductState::from_tensors(tensors).expect("gauge moves keep bonds consistent");
    out.center = Some(center);
    out
}

/// Largest deviation of the isometry conditions around the declared center.
pub fn isometry_residual(psi: &MatrixProductState) -> f64 {
    let Some(c) = psi.center else {
        return f64::INFINITY;
    };
    let mut worst = 0.0f64;
    for (k, t) in psi.tensors.iter().enumerate() {
        let s = t.shape();
        let gram = if k < c {
            let m = t.as_mat(s[0] * s[1], s[2]);
            m.adjoint() * m
        } else if k > c {
            let m = t.as_mat(s[0], s[1] * s[2]);
            m * m.adjoint()
        } else {
            continue;
        };
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((gram[(i, j)] - target).norm());
            }
        }
    }
    worst
}

fn check_compatible(a: &MatrixProductState, b: &MatrixProductState) -> Result<()> {
    if a.len() != b.len() || a.local_dim != b.local_dim {
        return Err(Error::ShapeMismatch(format!(
            "states of length {} (d={}) and {} (d={})",
            a.len(),
            a.local_dim,
            b.len(),
            b.local_dim
        )));
    }
    Ok(())
}

fn overlap_unchecked(phi: &MatrixProductState, psi: &MatrixProductState) -> C64 {
    let mut env = Tensor::from_vec(&[1, 1], vec![ONE]);
    for (a, b) in phi.tensors.iter().zip(&psi.tensors) {
        // env[a', a] psi[a, s, b] -> (a', s, b)
        let t = tensordot(&env, &[1], b, &[0]);
        env = tensordot(&a.conj(), &[0, 1], &t, &[0, 1]);
    }
    env.data()[0]
}

/// `<phi|psi>` by left-to-right transfer contraction.
pub fn overlap(phi: &MatrixProductState, psi: &MatrixProductState) -> Result<C64> {
    check_compatible(phi, psi)?;
    Ok(overlap_unchecked(phi, psi))
}

pub fn mps_to_dense(psi: &MatrixProductState) -> Result<Vec<C64>> {
    mps_to_dense_capped(psi, DEFAULT_DENSE_CAP)
}

pub fn mps_to_dense_capped(psi: &MatrixProductState, cap: usize) -> Result<Vec<C64>> {
    let dim = psi
        .local_dim
        .checked_pow(psi.len() as u32)
        .ok_or(Error::DimensionCap { dim: usize::MAX, cap })?;
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    let mut acc = Tensor::from_vec(&[1, 1], vec![ONE]);
    for t in &psi.tensors {
        let next = tensordot(&acc, &[1], t, &[0]);
        let s = next.shape().to_vec();
        acc = next.reshape(&[s[0] * s[1], s[2]]);
    }
    Ok(acc.into_data())
}

/// Exact (up to `svd_tol` and `max_bond`) MPS of a dense vector by successive
/// SVDs; the result is left-canonical with center at the last site.
pub fn dense_to_mps(state: &[C64], local_dim: usize, max_bond: usize, svd_tol: f64) -> Result<MatrixProductState> {
    let length = chain_length(state.len(), local_dim)?;
    let mut tensors = Vec::with_capacity(length);
    let mut rest = Tensor::from_vec(&[1, state.len()], state.to_vec());
    let mut left = 1usize;
    for _ in 0..length - 1 {
        let cols = rest.len() / (left * local_dim);
        let svd = thin_svd(rest.as_mat(left * local_dim, cols))?;
        let keep = kept_count(&svd.s, max_bond, svd_tol);
        let u = svd.u.as_ref().subcols(0, keep);
        tensors.push(Tensor::from_mat(&[left, local_dim, keep], u));
        let sv = Mat::<C64>::from_fn(keep, cols, |i, j| svd.v[(j, i)].conj() * svd.s[i]);
        rest = Tensor::from_mat(&[keep, cols], sv.as_ref());
        left = keep;
    }
    tensors.push(rest.reshape(&[left, local_dim, 1]));
    let mut psi = MatrixProductState::from_tensors(tensors)?;
    psi.center = Some(length - 1);
    Ok(psi)
}

pub(crate) fn chain_length(dim: usize, local_dim: usize) -> Result<usize> {
    if local_dim < 2 {
        return Err(Error::ShapeMismatch(format!("local dimension {local_dim}")));
    }
    let mut n = 1usize;
    let mut len = 0usize;
    while n < dim {
        n *= local_dim;
        len += 1;
    }
    if n != dim || len == 0 {
        return Err(Error::ShapeMismatch(format!(
            "vector of length {dim} is not a power of {local_dim}"
        )));
    }
    Ok(len)
}

fn kept_count(s: &[f64], max_bond: usize, svd_tol: f64) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    let above = s.iter().take_while(|&&x| x > svd_tol * smax).count();
    above.min(max_bond).max(1)
}

/// Result of a truncating sweep.
#[derive(Clone, Debug)]
pub struct Compression {
    pub state: MatrixProductState,
    /// Discarded squared singular values at each bond, in units of the input norm.
    pub discarded: Vec<f64>,
}

impl Compression {
    pub fn total_discarded(&self) -> f64 {
        self.discarded.iter().sum()
    }
}

/// Truncates every bond to at most `max_bond`, dropping singular values below
/// `svd_tol * s_max`. The output is normalized and left-canonical (center at
/// the last site). With the input normalized, `1 - |<in|out>|^2` equals the sum
/// of the reported discarded weights.
pub fn compress(psi: &MatrixProductState, max_bond: usize, svd_tol: f64) -> Result<Compression> {
    assert!(max_bond >= 1);
    let mut work = canonicalize(psi, 0);
    work.normalize();
    let length = work.len();
    let mut discarded = Vec::with_capacity(length.saturating_sub(1));
    for k in 0..length - 1 {
        let s = work.tensors[k].shape().to_vec();
        let svd = thin_svd(work.tensors[k].as_mat(s[0] * s[1], s[2]))?;
        let keep = kept_count(&svd.s, max_bond, svd_tol);
        discarded.push(svd.s[keep..].iter().map(|x| x * x).sum());
        work.tensors[k] = Tensor::from_mat(&[s[0], s[1], keep], svd.u.as_ref().subcols(0, keep));
        let sv = Mat::<C64>::from_fn(keep, s[2], |i, j| svd.v[(j, i)].conj() * svd.s[i]);
        let sv = Tensor::from_mat(&[keep, s[2]], sv.as_ref());
        work.tensors[k + 1] = tensordot(&sv, &[1], &work.tensors[k + 1], &[0]);
    }
    work.center = Some(length - 1);
    work.refresh_max_bond();
    work.normalize();
    Ok(Compression { state: work, discarded })
}

/// Two-site reduced density matrix of sites `(i, j)`, factor order i then j.
pub fn two_site_rdm_mps(psi: &MatrixProductState, i: usize, j: usize) -> Result<TwoSiteDensityMatrix> {
    let mut out = two_site_rdms(psi, &[(i, j)])?;
    Ok(out.pop().expect("one pair requested"))
}

/// Reduced density matrices for many pairs, sharing the left environments.
pub fn two_site_rdms(psi: &MatrixProductState, pairs: &[(usize, usize)]) -> Result<Vec<TwoSiteDensityMatrix>> {
    let length = psi.len();
    for &(i, j) in pairs {
        for site in [i, j] {
            if site >= length {
                return Err(Error::SiteOutOfRange { site, length });
            }
        }
        if i == j {
            return Err(Error::SameSite(i));
        }
    }
    let d = psi.local_dim;
    let work = canonicalize(psi, 0);
    let norm2 = work.tensors[0].norm_sqr();
    // left environments E_k[a', a] of sites 0..k
    let mut lefts = Vec::with_capacity(length);
    let mut env = Tensor::from_vec(&[1, 1], vec![ONE]);
    for t in &work.tensors {
        lefts.push(env.clone());
        let x = tensordot(&env, &[1], t, &[0]);
        env = tensordot(&t.conj(), &[0, 1], &x, &[0, 1]);
    }

    let mut results: Vec<Option<TwoSiteDensityMatrix>> = vec![None; pairs.len()];
    let mut by_left: Vec<Vec<(usize, usize, bool)>> = vec![Vec::new(); length];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let (lo, hi, swapped) = if i < j { (i, j, false) } else { (j, i, true) };
        by_left[lo].push((k, hi, swapped));
    }
    for (lo, wanted) in by_left.iter_mut().enumerate() {
        if wanted.is_empty() {
            continue;
        }
        wanted.sort_by_key(|w| w.1);
        let a = &work.tensors[lo];
        // T[s, s', b, b'] = sum E[a', a] A[a, s, b] conj(A[a', s', b'])
        let x = tensordot(&lefts[lo], &[1], a, &[0]); // (a', s, b)
        let mut t = tensordot(&x, &[0], &a.conj(), &[0]).permute(&[0, 2, 1, 3]); // (s, s', b, b') from (s, b, s', b')
        let mut site = lo + 1;
        for &(k, hi, swapped) in wanted.iter() {
            while site < hi {
                let m = &work.tensors[site];
                let y = tensordot(&t, &[2], m, &[0]); // (s, s', b', t, c)
                t = tensordot(&y, &[2, 3], &m.conj(), &[0, 1]); // (s, s', c, c')
                site += 1;
            }
            let m = &work.tensors[hi];
            let y = tensordot(&t, &[2], m, &[0]); // (s, s', b', u, c)
            let r = tensordot(&y, &[2, 4], &m.conj(), &[0, 2]); // (s, s', u, u')
                                                                // rho[(s u), (s' u')]
            let r = r.permute(&[0, 2, 1, 3]);
            let mut rho = Mat::<C64>::from_fn(d * d, d * d, |p, q| r.data()[p * d * d + q] / norm2);
            if swapped {
                rho = swap_factors(rho.as_ref(), d);
            }
            results[k] = Some(TwoSiteDensityMatrix::new_unchecked(d, rho, pairs[k]));
        }
    }
    Ok(results.into_iter().map(|r| r.expect("every pair computed")).collect())
}

pub(crate) fn swap_factors(rho: faer::MatRef<'_, C64>, d: usize) -> Mat<C64> {
    Mat::<C64>::from_fn(d * d, d * d, |p, q| {
        let (a, b) = (p / d, p % d);
        let (c, e) = (q / d, q % d);
        rho[(b * d + a, e * d + c)]
    })
}
