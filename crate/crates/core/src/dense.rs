//! Full exact diagonalization and mid-spectrum selection.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::entanglement::TwoSiteDensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::eigh;
use crate::model::{DenseOperator, LocalSpin, SiteOperators};
use crate::mps::{chain_length, swap_factors};

/// Deviation from Hermiticity tolerated by [`full_spectrum`], relative to the
/// largest matrix entry.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub energy: f64,
    pub vector: Vec<C64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    MiddleByIndex,
}

#[derive(Clone, Debug)]
pub struct SpectrumSlice {
    pub pairs: Vec<EigenPair>,
    /// Positions of the selected pairs in the full sorted spectrum.
    pub indices: Vec<usize>,
    pub selection: Selection,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Groups basis states into the connected components of the matrix's
/// nonzero pattern. The Hamiltonian is exactly block diagonal in these
/// components (they are the magnetization sectors for the Heisenberg chains),
/// so each block can be diagonalized on its own.
fn blocks(h: &Mat<C64>) -> Vec<Vec<usize>> {
    let n = h.nrows();
    let mut ds = DisjointSet::new(n);
    for j in 0..n {
        for i in 0..j {
            if h[(i, j)] != C64::new(0.0, 0.0) || h[(j, i)] != C64::new(0.0, 0.0) {
                ds.union(i, j);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = ds.find(i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Complete orthonormal eigenbasis sorted by energy.
pub fn full_spectrum(h: &DenseOperator) -> Result<Vec<EigenPair>> {
    let m = &h.entries;
    let scale = (0..h.dim)
        .flat_map(|j| (0..h.dim).map(move |i| (i, j)))
        .map(|(i, j)| m[(i, j)].norm())
        .fold(1.0f64, f64::max);
    let deviation = h.hermitian_deviation();
    if deviation > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { deviation });
    }
    let mut pairs = Vec::with_capacity(h.dim);
    for group in blocks(m) {
        let k = group.len();
        let sub = Mat::<C64>::from_fn(k, k, |a, b| m[(group[a], group[b])]);
        let (vals, vecs) = eigh(sub.as_ref())?;
        for (c, &energy) in vals.iter().enumerate() {
            let mut vector = vec![C64::new(0.0, 0.0); h.dim];
            for (a, &row) in group.iter().enumerate() {
                vector[row] = vecs[(a, c)];
            }
            pairs.push(EigenPair { energy, vector });
        }
    }
    // stable: equal energies keep block order, which is deterministic
    pairs.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(pairs)
}

/// First index of the `k` states centred on index `n / 2`.
pub fn middle_start(n: usize, k: usize) -> usize {
    (n / 2).saturating_sub(k / 2).min(n - k)
}

/// The `k` states whose sorted indices are centred on `N / 2`.
pub fn mid_spectrum_selection(pairs: &[EigenPair], k: usize) -> Result<SpectrumSlice> {
    let n = pairs.len();
    if k > n {
        return Err(Error::SelectionTooLarge {
            requested: k,
            available: n,
        });
    }
    let start = middle_start(n, k);
    Ok(SpectrumSlice {
        pairs: pairs[start..start + k].to_vec(),
        indices: (start..start + k).collect(),
        selection: Selection::MiddleByIndex,
    })
}

/// Total magnetization (sum of the local S^z eigenvalues, Pauli units for
/// spin-1/2) of a basis index.
pub fn basis_magnetization(index: usize, spin: LocalSpin, length: usize) -> i64 {
    let ops = SiteOperators::new(spin);
    let d = spin.local_dim();
    let mut rem = index;
    let mut total = 0.0;
    for _ in 0..length {
        total += ops.diag_sz(rem % d);
        rem /= d;
    }
    total.round() as i64
}

/// Magnetization sector of a vector, if its support lies in a single sector.
pub fn vector_sector(vector: &[C64], spin: LocalSpin, tol: f64) -> Result<Option<i64>> {
    let length = chain_length(vector.len(), spin.local_dim())?;
    let mut sector = None;
    for (i, z) in vector.iter().enumerate() {
        if z.norm() > tol {
            let m = basis_magnetization(i, spin, length);
            match sector {
                None => sector = Some(m),
                Some(s) if s != m => return Ok(None),
                _ => {}
            }
        }
    }
    Ok(sector)
}

/// Keeps only eigenpairs confined to the given magnetization sector.
pub fn filter_sector(pairs: Vec<EigenPair>, spin: LocalSpin, sector: i64) -> Result<Vec<EigenPair>> {
    let mut out = Vec::new();
    for p in pairs {
        if vector_sector(&p.vector, spin, 1e-12)? == Some(sector) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Two-site reduced density matrix of a dense state, factor order `i` then `j`.
pub fn dense_reduced_density_matrix(
    state: &[C64],
    local_dim: usize,
    i: usize,
    j: usize,
) -> Result<TwoSiteDensityMatrix> {
    let mut out = dense_reduced_density_matrices(state, local_dim, &[(i, j)])?;
    Ok(out.pop().expect("one pair requested"))
}

pub fn dense_reduced_density_matrices(
    state: &[C64],
    local_dim: usize,
    pairs: &[(usize, usize)],
) -> Result<Vec<TwoSiteDensityMatrix>> {
    let d = local_dim;
    let length = chain_length(state.len(), d)?;
    let norm2: f64 = state.iter().map(|z| z.norm_sqr()).sum();
    let mut out = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        for site in [i, j] {
            if site >= length {
                return Err(Error::SiteOutOfRange { site, length });
            }
        }
        if i == j {
            return Err(Error::SameSite(i));
        }
        let (lo, hi) = (i.min(j), i.max(j));
        // index = ((l * d + s) * mid + m) * d + u) * right + r
        let right = d.pow((length - 1 - hi) as u32);
        let mid = d.pow((hi - lo - 1) as u32);
        let left = d.pow(lo as u32);
        let mut rho = Mat::<C64>::zeros(d * d, d * d);
        let idx = |l: usize, s: usize, m: usize, u: usize, r: usize| ((((l * d + s) * mid + m) * d + u) * right) + r;
        for l in 0..left {
            for m in 0..mid {
                for r in 0..right {
                    for s in 0..d {
                        for u in 0..d {
                            let a = state[idx(l, s, m, u, r)];
                            if a == C64::new(0.0, 0.0) {
                                continue;
                            }
                            for s2 in 0..d {
                                for u2 in 0..d {
                                    let b = state[idx(l, s2, m, u2, r)];
                                    rho[(s * d + u, s2 * d + u2)] += a * b.conj();
                                }
                            }
                        }
                    }
                }
            }
        }
        for z in rho.as_mut().col_iter_mut().flat_map(|c| c.iter_mut()) {
            *z /= norm2;
        }
        if i > j {
            rho = swap_factors(rho.as_ref(), d);
        }
        out.push(TwoSiteDensityMatrix::new_unchecked(d, rho, (i, j)));
    }
    Ok(out)
}
