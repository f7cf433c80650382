//! Two-site entanglement measures, their chain totals and distance profiles,
//! geometric entanglement and participation ratios.

mod geometric;

pub use geometric::{
    geometric_entanglement_dense, geometric_entanglement_mps, GeometricEntanglement, GeometricOptions,
};

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dense::dense_reduced_density_matrices;
use crate::error::{Error, Result};
use crate::linalg::{eigh, eigvalsh, hermitian_deviation, thin_svd};
use crate::mps::{two_site_rdms, MatrixProductState};

/// Tolerance used when validating density matrices.
pub const DENSITY_TOL: f64 = 1e-10;
/// Window within which negative eigenvalues of rho are treated as zero when
/// forming the spectrum of rho * rho~.
pub const CLAMP_WINDOW: f64 = 1e-12;

/// Relative eigenvalue threshold defining the numerical support of `rho`.
pub const SUPPORT_CUTOFF: f64 = 1e-14;

/// Reduced state of sites `(i, j)`; rows and columns are indexed by
/// `s_i * d + s_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoSiteDensityMatrix {
    local_dim: usize,
    entries: Mat<C64>,
    sites: (usize, usize),
}

impl TwoSiteDensityMatrix {
    /// Validates Hermiticity, unit trace and positivity to [`DENSITY_TOL`].
    pub fn new(local_dim: usize, entries: Mat<C64>, sites: (usize, usize)) -> Result<Self> {
        let n = local_dim * local_dim;
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix for local dimension {local_dim}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let rho = Self::new_unchecked(local_dim, entries, sites);
        let dev = hermitian_deviation(rho.entries.as_ref());
        if dev > DENSITY_TOL {
            return Err(Error::InvalidState(format!("Hermitian deviation {dev:e}")));
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let min = eigvalsh(rho.entries.as_ref())?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min < -DENSITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(rho)
    }

    pub(crate) fn new_unchecked(local_dim: usize, entries: Mat<C64>, sites: (usize, usize)) -> Self {
        Self {
            local_dim,
            entries,
            sites,
        }
    }

    /// Projector onto a normalized two-site pure state.
    pub fn pure(local_dim: usize, amplitudes: &[C64], sites: (usize, usize)) -> Result<Self> {
        let n = local_dim * local_dim;
        if amplitudes.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} amplitudes for local dimension {local_dim}",
                amplitudes.len()
            )));
        }
        let norm2: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        let m = Mat::<C64>::from_fn(n, n, |i, j| amplitudes[i] * amplitudes[j].conj() / norm2);
        Self::new(local_dim, m, sites)
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn entries(&self) -> &Mat<C64> {
        &self.entries
    }

    pub fn sites(&self) -> (usize, usize) {
        self.sites
    }

    pub fn trace(&self) -> f64 {
        (0..self.entries.nrows()).map(|i| self.entries[(i, i)].re).sum()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigvalsh(self.entries.as_ref())
    }

    fn require_qubits(&self) -> Result<()> {
        if self.local_dim != 2 {
            return Err(Error::LocalDimension {
                expected: 2,
                found: self.local_dim,
            });
        }
        Ok(())
    }
}

fn sigma_y_pair() -> Mat<C64> {
    // sigma^y (x) sigma^y in the basis |00>, |01>, |10>, |11>
    let mut m = Mat::<C64>::zeros(4, 4);
    m[(0, 3)] = C64::new(-1.0, 0.0);
    m[(3, 0)] = C64::new(-1.0, 0.0);
    m[(1, 2)] = C64::new(1.0, 0.0);
    m[(2, 1)] = C64::new(1.0, 0.0);
    m
}

/// `(sigma^y (x) sigma^y) rho^* (sigma^y (x) sigma^y)`.
pub fn spin_flip(rho: &TwoSiteDensityMatrix) -> Result<TwoSiteDensityMatrix> {
    rho.require_qubits()?;
    let yy = sigma_y_pair();
    let conj = rho.entries.conjugate().to_owned();
    let flipped = &yy * &conj * &yy;
    Ok(TwoSiteDensityMatrix::new_unchecked(2, flipped, rho.sites))
}

/// Eigenvalues of `rho * spin_flip(rho)`, sorted in decreasing order.
///
/// With `rho = V V^H` built from the eigenvectors of `rho` scaled by the
/// square roots of their eigenvalues, these are the squared singular values
/// of the complex symmetric matrix `V^T (sigma^y (x) sigma^y) V`. Eigenvalues
/// of `rho` below `SUPPORT_CUTOFF` are dropped from `V`; square roots of
/// rounding-level eigenvalues would otherwise leak `~1e-8` into the result.
/// An eigenvalue of `rho` below `-CLAMP_WINDOW` is an error.
pub fn concurrence_spectrum(rho: &TwoSiteDensityMatrix) -> Result<[f64; 4]> {
    rho.require_qubits()?;
    let (vals, vecs) = eigh(rho.entries.as_ref())?;
    if let Some(&low) = vals.iter().find(|&&v| v < -CLAMP_WINDOW) {
        return Err(Error::InvalidState(format!("rho has eigenvalue {low:e}")));
    }
    let cutoff = SUPPORT_CUTOFF * rho.trace().abs().max(f64::MIN_POSITIVE);
    let support: Vec<usize> = (0..4).filter(|&k| vals[k] > cutoff).collect();
    let mut out = [0.0; 4];
    if support.is_empty() {
        return Ok(out);
    }
    let v = Mat::<C64>::from_fn(4, support.len(), |i, k| vecs[(i, support[k])] * vals[support[k]].sqrt());
    let tau = v.transpose() * sigma_y_pair() * &v;
    let svd = thin_svd(tau.as_ref())?;
    for (o, s) in out.iter_mut().zip(&svd.s) {
        *o = s * s;
    }
    Ok(out)
}

/// Two-qubit concurrence `max(0, sqrt(l1) - sqrt(l2) - sqrt(l3) - sqrt(l4))`.
pub fn concurrence(rho: &TwoSiteDensityMatrix) -> Result<f64> {
    let l = concurrence_spectrum(rho)?;
    let c = l[0].sqrt() - l[1].sqrt() - l[2].sqrt() - l[3].sqrt();
    Ok(c.max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Transposes the indices of one tensor factor.
pub fn partial_transpose(rho: &TwoSiteDensityMatrix, subsystem: Subsystem) -> Mat<C64> {
    let d = rho.local_dim;
    Mat::<C64>::from_fn(d * d, d * d, |p, q| {
        let (a, b) = (p / d, p % d);
        let (c, e) = (q / d, q % d);
        match subsystem {
            Subsystem::First => rho.entries[(c * d + b, a * d + e)],
            Subsystem::Second => rho.entries[(a * d + e, c * d + b)],
        }
    })
}

fn negativity_of(rho: &TwoSiteDensityMatrix, subsystem: Subsystem) -> Result<f64> {
    let pt = partial_transpose(rho, subsystem);
    let vals = eigvalsh(pt.as_ref())?;
    Ok(vals.iter().map(|&l| (l.abs() - l) / 2.0).sum())
}

/// Sum of the magnitudes of the negative eigenvalues of the partial transpose.
pub fn negativity(rho: &TwoSiteDensityMatrix) -> Result<f64> {
    let n = negativity_of(rho, Subsystem::First)?;
    debug_assert!(
        (n - negativity_of(rho, Subsystem::Second)?).abs() <= 1e-10,
        "negativity depends on the transposed factor"
    );
    Ok(n)
}

/// Negativity computed with both partial transposes, for consistency checks.
pub fn negativity_both(rho: &TwoSiteDensityMatrix) -> Result<(f64, f64)> {
    Ok((
        negativity_of(rho, Subsystem::First)?,
        negativity_of(rho, Subsystem::Second)?,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Concurrence,
    Negativity,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::Concurrence => "concurrence",
            Measure::Negativity => "negativity",
        }
    }

    pub fn evaluate(self, rho: &TwoSiteDensityMatrix) -> Result<f64> {
        match self {
            Measure::Concurrence => concurrence(rho),
            Measure::Negativity => negativity(rho),
        }
    }
}

/// Sum of a measure over the nearest-neighbour pairs of an open chain.
pub fn total_nn(measure: Measure, rdms: &[TwoSiteDensityMatrix]) -> Result<f64> {
    let mut total = 0.0;
    for rho in rdms {
        let (i, j) = rho.sites;
        if i.abs_diff(j) != 1 {
            return Err(Error::InvalidSpec(format!("pair ({i}, {j}) is not nearest-neighbour")));
        }
        total += measure.evaluate(rho)?;
    }
    Ok(total)
}

pub fn nearest_neighbour_pairs(length: usize) -> Vec<(usize, usize)> {
    (0..length.saturating_sub(1)).map(|i| (i, i + 1)).collect()
}

/// Pairs `(i, i + d)` for `d = 1..=L/2`.
pub fn profile_pairs(length: usize) -> Vec<(usize, usize)> {
    (1..=length / 2)
        .flat_map(|d| (0..length - d).map(move |i| (i, i + d)))
        .collect()
}

/// A state in either representation, for routines that only need two-site
/// marginals.
#[derive(Clone, Copy, Debug)]
pub enum StateRef<'a> {
    Dense { amplitudes: &'a [C64], local_dim: usize },
    Mps(&'a MatrixProductState),
}

impl StateRef<'_> {
    pub fn length(&self) -> Result<usize> {
        match self {
            StateRef::Dense { amplitudes, local_dim } => crate::mps::chain_length(amplitudes.len(), *local_dim),
            StateRef::Mps(psi) => Ok(psi.len()),
        }
    }

    pub fn local_dim(&self) -> usize {
        match self {
            StateRef::Dense { local_dim, .. } => *local_dim,
            StateRef::Mps(psi) => psi.local_dim(),
        }
    }

    pub fn rdms(&self, pairs: &[(usize, usize)]) -> Result<Vec<TwoSiteDensityMatrix>> {
        match self {
            StateRef::Dense { amplitudes, local_dim } => dense_reduced_density_matrices(amplitudes, *local_dim, pairs),
            StateRef::Mps(psi) => two_site_rdms(psi, pairs),
        }
    }
}

/// Mean of a pair measure as a function of site separation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementProfile {
    pub length: usize,
    pub measure: Measure,
    pub distances: Vec<usize>,
    pub means: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Running sums behind an [`EntanglementProfile`]; mergeable across workers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileAccumulator {
    pub length: usize,
    pub measure: Measure,
    pub sums: Vec<f64>,
    pub counts: Vec<usize>,
}

impl ProfileAccumulator {
    pub fn new(length: usize, measure: Measure) -> Self {
        let n = length / 2;
        Self {
            length,
            measure,
            sums: vec![0.0; n],
            counts: vec![0; n],
        }
    }

    /// Adds every pair with separation up to `L/2` of one state.
    pub fn add_state(&mut self, state: StateRef<'_>) -> Result<()> {
        let pairs = profile_pairs(self.length);
        let rdms = state.rdms(&pairs)?;
        self.add_rdms(&rdms)
    }

    pub fn add_rdms(&mut self, rdms: &[TwoSiteDensityMatrix]) -> Result<()> {
        for rho in rdms {
            let (i, j) = rho.sites;
            let d = i.abs_diff(j);
            if d == 0 || d > self.sums.len() {
                continue;
            }
            self.sums[d - 1] += self.measure.evaluate(rho)?;
            self.counts[d - 1] += 1;
        }
        Ok(())
    }

    pub fn add_value(&mut self, distance: usize, value: f64) {
        self.sums[distance - 1] += value;
        self.counts[distance - 1] += 1;
    }

    pub fn merge(&mut self, other: &ProfileAccumulator) {
        assert_eq!((self.length, self.measure), (other.length, other.measure));
        for k in 0..self.sums.len() {
            self.sums[k] += other.sums[k];
            self.counts[k] += other.counts[k];
        }
    }

    pub fn finish(&self) -> EntanglementProfile {
        EntanglementProfile {
            length: self.length,
            measure: self.measure,
            distances: (1..=self.sums.len()).collect(),
            means: self
                .sums
                .iter()
                .zip(&self.counts)
                .map(|(&s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
                .collect(),
            counts: self.counts.clone(),
        }
    }
}

/// Disorder- and pair-averaged measure for separations `1..=L/2`.
pub fn pair_profile(states: &[StateRef<'_>], measure: Measure) -> Result<EntanglementProfile> {
    let Some(first) = states.first() else {
        return Err(Error::InsufficientData("empty ensemble".into()));
    };
    let length = first.length()?;
    let mut acc = ProfileAccumulator::new(length, measure);
    for s in states {
        if s.length()? != length {
            return Err(Error::ShapeMismatch("ensemble mixes chain lengths".into()));
        }
        acc.add_state(*s)?;
    }
    Ok(acc.finish())
}

/// Least-squares line through `(d, ln mean)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// `-1 / slope`.
    pub xi: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
    /// Distances left out because their mean was at or below `FIT_FLOOR`.
    pub excluded: Vec<usize>,
}

/// Profile means at or below this are round-off and left out of the decay fit.
pub const FIT_FLOOR: f64 = 1e-12;

pub fn fit_entanglement_length(profile: &EntanglementProfile) -> Result<DecayFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = Vec::new();
    for (&d, &m) in profile.distances.iter().zip(&profile.means) {
        if m > FIT_FLOOR && m.is_finite() {
            xs.push(d as f64);
            ys.push(m.ln());
        } else {
            excluded.push(d);
        }
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "{n} distances with positive mean, need at least 3"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let slope_stderr = if n > 2 {
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    let r_squared = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Ok(DecayFit {
        slope,
        intercept,
        xi: -1.0 / slope,
        slope_stderr,
        r_squared,
        excluded,
    })
}

/// Participation ratio `(sum |c|^2)^2 / sum |c|^4`, optionally divided by the
/// Hilbert space dimension.
pub fn npr(state: &[C64], normalize_by_dim: bool) -> f64 {
    let (s2, s4) = state.iter().fold((0.0, 0.0), |(a, b), z| {
        let p = z.norm_sqr();
        (a + p, b + p * p)
    });
    let p = s2 * s2 / s4;
    if normalize_by_dim {
        p / state.len() as f64
    } else {
        p
    }
}
