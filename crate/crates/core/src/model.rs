//! Random-field Heisenberg chains with open boundaries.
//!
//! ```text
//! H = sum_i 1/2 (S^x_i S^x_{i+1} + S^y_i S^y_{i+1} + S^z_i S^z_{i+1}) + sum_i h_i S^z_i
//! ```
//!
//! For spin-1/2 chains the site operators are the Pauli matrices themselves
//! (not sigma/2); for spin-1 chains they are the usual spin-1 matrices. Both
//! families are built densely and as a bond-dimension-5 MPO.

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mps::MatrixProductOperator;
use crate::tensor::Tensor;

/// Default refusal threshold for dense builds (basis states).
pub const DEFAULT_DENSE_CAP: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LocalSpin {
    Half,
    One,
}

impl LocalSpin {
    pub fn local_dim(self) -> usize {
        match self {
            LocalSpin::Half => 2,
            LocalSpin::One => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LocalSpin::Half => "half",
            LocalSpin::One => "one",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "half" | "1/2" | "spin-1/2" | "spin_half" => Some(LocalSpin::Half),
            "one" | "1" | "spin-1" | "spin_one" => Some(LocalSpin::One),
            _ => None,
        }
    }
}

/// Support of the uniform on-site field distribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldDistribution {
    /// h_i uniform on [-W, W]
    #[default]
    Symmetric,
    /// h_i uniform on [0, W]
    Positive,
}

impl FieldDistribution {
    pub fn name(self) -> &'static str {
        match self {
            FieldDistribution::Symmetric => "symmetric",
            FieldDistribution::Positive => "positive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "symmetric" => Some(FieldDistribution::Symmetric),
            "positive" => Some(FieldDistribution::Positive),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub length: usize,
    pub local_spin: LocalSpin,
    pub disorder: f64,
    pub fields: FieldDistribution,
    pub seed: u64,
}

impl ChainSpec {
    pub fn new(length: usize, local_spin: LocalSpin, disorder: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            length,
            local_spin,
            disorder,
            fields: FieldDistribution::Symmetric,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_fields(mut self, fields: FieldDistribution) -> Self {
        self.fields = fields;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(Error::InvalidSpec(format!(
                "chain length must be at least 2, got {}",
                self.length
            )));
        }
        if !(self.disorder >= 0.0 && self.disorder.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "disorder strength must be finite and nonnegative, got {}",
                self.disorder
            )));
        }
        Ok(())
    }

    pub fn local_dim(&self) -> usize {
        self.local_spin.local_dim()
    }

    /// d^L, or `None` on overflow.
    pub fn hilbert_dim(&self) -> Option<usize> {
        (self.local_dim()).checked_pow(self.length as u32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub spec: ChainSpec,
    pub fields: Vec<f64>,
}

impl DisorderRealization {
    /// A realization with explicitly given fields (fixtures, replays).
    pub fn with_fields(spec: ChainSpec, fields: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if fields.len() != spec.length {
            return Err(Error::InvalidSpec(format!(
                "expected {} fields, got {}",
                spec.length,
                fields.len()
            )));
        }
        Ok(Self { spec, fields })
    }

    pub fn length(&self) -> usize {
        self.spec.length
    }

    pub fn local_dim(&self) -> usize {
        self.spec.local_dim()
    }
}

/// Uniform variate in [0, 1) for `(seed, site)`.
///
/// ChaCha20 is a counter-mode generator: the value for a site is read by
/// jumping to word `2 * site` of the keystream, so no sequential state is
/// shared between sites or realizations.
pub fn counter_uniform(seed: u64, stream: u64, index: u64) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(2 * index as u128);
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn sample_disorder(spec: &ChainSpec) -> DisorderRealization {
    let w = spec.disorder;
    let fields = (0..spec.length)
        .map(|site| {
            let u = counter_uniform(spec.seed, 0, site as u64);
            match spec.fields {
                FieldDistribution::Symmetric => w * (2.0 * u - 1.0),
                FieldDistribution::Positive => w * u,
            }
        })
        .collect();
    DisorderRealization {
        spec: spec.clone(),
        fields,
    }
}

/// Real-valued single-site operators (S^z, S^+, S^-) in the basis ordered by
/// decreasing magnetization. For spin-1/2 these are sigma^z and sigma^x +- i sigma^y.
pub struct SiteOperators {
    pub dim: usize,
    pub sz: Vec<f64>,
    pub splus: Vec<f64>,
    pub sminus: Vec<f64>,
}

impl SiteOperators {
    pub fn new(spin: LocalSpin) -> Self {
        match spin {
            LocalSpin::Half => Self {
                dim: 2,
                sz: vec![1.0, 0.0, 0.0, -1.0],
                splus: vec![0.0, 2.0, 0.0, 0.0],
                sminus: vec![0.0, 0.0, 2.0, 0.0],
            },
            LocalSpin::One => {
                let r = std::f64::consts::SQRT_2;
                Self {
                    dim: 3,
                    sz: vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0],
                    splus: vec![0.0, r, 0.0, 0.0, 0.0, r, 0.0, 0.0, 0.0],
                    sminus: vec![0.0, 0.0, 0.0, r, 0.0, 0.0, 0.0, r, 0.0],
                }
            }
        }
    }

    pub fn diag_sz(&self, s: usize) -> f64 {
        self.sz[s * self.dim + s]
    }
}

/// Dense complex operator on the full chain Hilbert space.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub dim: usize,
    pub entries: Mat<C64>,
}

impl DenseOperator {
    pub fn hermitian_deviation(&self) -> f64 {
        crate::linalg::hermitian_deviation(self.entries.as_ref())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.entries[(i, i)]).sum()
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.entries[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut m = 0.0f64;
        for j in 0..self.dim {
            for i in 0..self.dim {
                m = m.max((self.entries[(i, j)] - other.entries[(i, j)]).norm());
            }
        }
        m
    }
}

pub fn build_dense_hamiltonian(r: &DisorderRealization) -> Result<DenseOperator> {
    build_dense_hamiltonian_capped(r, DEFAULT_DENSE_CAP)
}

pub fn build_dense_hamiltonian_capped(r: &DisorderRealization, cap: usize) -> Result<DenseOperator> {
    let len = r.length();
    let d = r.local_dim();
    let dim = match r.spec.hilbert_dim() {
        Some(n) if n <= cap => n,
        Some(n) => return Err(Error::DimensionCap { dim: n, cap }),
        None => return Err(Error::DimensionCap { dim: usize::MAX, cap }),
    };
    let ops = SiteOperators::new(r.spec.local_spin);
    let mut h = Mat::<C64>::zeros(dim, dim);

    // place value of site k in the basis index; site 0 is most significant
    let place: Vec<usize> = (0..len).map(|k| d.pow((len - 1 - k) as u32)).collect();
    let mut digits = vec![0usize; len];
    for col in 0..dim {
        let mut rem = col;
        for k in 0..len {
            digits[k] = rem / place[k];
            rem %= place[k];
        }
        let mut diag = 0.0;
        for k in 0..len {
            diag += r.fields[k] * ops.diag_sz(digits[k]);
        }
        for k in 0..len - 1 {
            let (a, b) = (digits[k], digits[k + 1]);
            diag += 0.5 * ops.diag_sz(a) * ops.diag_sz(b);
            // 1/4 (S+_k S-_{k+1} + S-_k S+_{k+1})
            for a2 in 0..d {
                for b2 in 0..d {
                    let amp = 0.25
                        * (ops.splus[a2 * d + a] * ops.sminus[b2 * d + b]
                            + ops.sminus[a2 * d + a] * ops.splus[b2 * d + b]);
                    if amp != 0.0 {
                        let row = col + (a2 * place[k] + b2 * place[k + 1]) - (a * place[k] + b * place[k + 1]);
                        h[(row, col)] += C64::new(amp, 0.0);
                    }
                }
            }
        }
        h[(col, col)] += C64::new(diag, 0.0);
    }
    Ok(DenseOperator { dim, entries: h })
}

fn local_term_mpo(r: &DisorderRealization, shift: f64) -> MatrixProductOperator {
    let len = r.length();
    let d = r.local_dim();
    let ops = SiteOperators::new(r.spec.local_spin);
    const W: usize = 5;
    let real = |x: f64| C64::new(x, 0.0);

    // bulk tensor, upper triangular in the bond indices:
    // [ I  S+  S-  Sz  h Sz ]
    // [ 0  0   0   0  S-/4  ]
    // [ 0  0   0   0  S+/4  ]
    // [ 0  0   0   0  Sz/2  ]
    // [ 0  0   0   0  I     ]
    let bulk = |site: usize| {
        let mut t = Tensor::zeros(&[W, d, d, W]);
        let mut put = |wl: usize, wr: usize, op: &[f64], coef: f64| {
            for s in 0..d {
                for sp in 0..d {
                    let v = coef * op[s * d + sp];
                    if v != 0.0 {
                        let k = t.offset(&[wl, s, sp, wr]);
                        t.data_mut()[k] += real(v);
                    }
                }
            }
        };
        let id: Vec<f64> = (0..d * d).map(|k| if k % (d + 1) == 0 { 1.0 } else { 0.0 }).collect();
        put(0, 0, &id, 1.0);
        put(0, 1, &ops.splus, 1.0);
        put(0, 2, &ops.sminus, 1.0);
        put(0, 3, &ops.sz, 1.0);
        put(0, 4, &ops.sz, r.fields[site]);
        if site == 0 && shift != 0.0 {
            put(0, 4, &id, -shift);
        }
        put(1, 4, &ops.sminus, 0.25);
        put(2, 4, &ops.splus, 0.25);
        put(3, 4, &ops.sz, 0.5);
        put(4, 4, &id, 1.0);
        t
    };

    let mut tensors = Vec::with_capacity(len);
    for site in 0..len {
        let t = bulk(site);
        let t = if site == 0 {
            // first row: contract with v_left = e_0
            let mut e = Tensor::zeros(&[1, d, d, W]);
            for s in 0..d {
                for sp in 0..d {
                    for wr in 0..W {
                        e.set(&[0, s, sp, wr], t.get(&[0, s, sp, wr]));
                    }
                }
            }
            e
        } else {
            t
        };
        let t = if site == len - 1 {
            // last column: contract with v_right = e_4
            let wl = t.shape()[0];
            let mut e = Tensor::zeros(&[wl, d, d, 1]);
            for a in 0..wl {
                for s in 0..d {
                    for sp in 0..d {
                        e.set(&[a, s, sp, 0], t.get(&[a, s, sp, W - 1]));
                    }
                }
            }
            e
        } else {
            t
        };
        tensors.push(t);
    }
    debug_assert!(tensors.iter().all(|t| t.data().iter().all(|z| z.im == 0.0)));
    MatrixProductOperator::from_tensors(tensors).expect("Heisenberg MPO bonds are consistent")
}

pub fn build_hamiltonian_mpo(r: &DisorderRealization) -> MatrixProductOperator {
    local_term_mpo(r, 0.0)
}

/// MPO for `H - lambda * I`.
pub fn build_shifted_mpo(r: &DisorderRealization, lambda: f64) -> MatrixProductOperator {
    local_term_mpo(r, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(len: usize, spin: LocalSpin, w: f64, seed: u64) -> ChainSpec {
        ChainSpec::new(len, spin, w, seed).unwrap()
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(ChainSpec::new(1, LocalSpin::Half, 1.0, 0).is_err());
        assert!(ChainSpec::new(4, LocalSpin::Half, -1.0, 0).is_err());
        assert!(ChainSpec::new(4, LocalSpin::Half, f64::NAN, 0).is_err());
    }

    #[test]
    fn zero_disorder_gives_zero_fields() {
        let r = sample_disorder(&spec(9, LocalSpin::Half, 0.0, 3));
        assert!(r.fields.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn sampling_is_reproducible() {
        let s = spec(12, LocalSpin::Half, 6.0, 42);
        assert_eq!(sample_disorder(&s).fields, sample_disorder(&s).fields);
        let other = sample_disorder(&spec(12, LocalSpin::Half, 6.0, 43));
        assert_ne!(sample_disorder(&s).fields, other.fields);
    }

    #[test]
    fn site_values_do_not_depend_on_chain_length() {
        let short = sample_disorder(&spec(4, LocalSpin::Half, 2.0, 9));
        let long = sample_disorder(&spec(10, LocalSpin::Half, 2.0, 9));
        assert_eq!(&long.fields[..4], &short.fields[..]);
    }

    #[test]
    fn positive_mode_stays_in_support() {
        let s = spec(50, LocalSpin::One, 3.0, 1).with_fields(FieldDistribution::Positive);
        let r = sample_disorder(&s);
        assert!(r.fields.iter().all(|&h| (0.0..=3.0).contains(&h)));
    }

    #[test]
    fn symmetric_mean_within_three_sigma() {
        // uniform(-6, 6): variance 12, so the mean of n samples has sigma sqrt(12 / n)
        let n_real = 10_000 / 16 + 1;
        let mut sum = 0.0;
        let mut n = 0usize;
        for seed in 0..n_real as u64 {
            let r = sample_disorder(&spec(16, LocalSpin::Half, 6.0, seed));
            for h in r.fields {
                assert!((-6.0..=6.0).contains(&h));
                sum += h;
                n += 1;
            }
        }
        let mean = sum / n as f64;
        let sigma = (12.0 / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma, "mean {mean}, sigma {sigma}");
    }

    #[test]
    fn dense_cap_is_enforced() {
        let r = sample_disorder(&spec(10, LocalSpin::Half, 1.0, 0));
        assert!(matches!(
            build_dense_hamiltonian_capped(&r, 512),
            Err(Error::DimensionCap { dim: 1024, cap: 512 })
        ));
        assert!(build_dense_hamiltonian_capped(&r, 1024).is_ok());
    }

    #[test]
    fn dense_is_hermitian_and_traceless() {
        for (len, spin) in [(6, LocalSpin::Half), (4, LocalSpin::One)] {
            let r = sample_disorder(&spec(len, spin, 3.0, 11));
            let h = build_dense_hamiltonian(&r).unwrap();
            assert!(h.hermitian_deviation() <= 1e-12);
            assert!(h.trace().norm() < 1e-10);
        }
    }
}
