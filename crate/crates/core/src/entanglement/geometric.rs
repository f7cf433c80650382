//! Largest overlap with a product state, found by alternating single-site
//! maximization from random product starts.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mps::{chain_length, MatrixProductState};
use crate::tensor::{Tensor, ONE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricOptions {
    pub restarts: usize,
    /// Convergence threshold on the change of the squared overlap per sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
    /// Logarithm base for the entropy; `e` by default.
    pub log_base: f64,
}

impl Default for GeometricOptions {
    fn default() -> Self {
        Self {
            restarts: 200,
            tol: 1e-10,
            max_sweeps: 500,
            seed: 0x9e37_79b9,
            log_base: std::f64::consts::E,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometricEntanglement {
    /// Squared overlap with the closest product state.
    pub lambda: f64,
    /// `-log(lambda)` in the configured base.
    pub entropy: f64,
    /// Whether the restart that produced `lambda` met the tolerance.
    pub converged: bool,
    /// The maximizing product state, one normalized vector per site.
    pub product: Vec<Vec<C64>>,
}

fn finish(lambda: f64, converged: bool, product: Vec<Vec<C64>>, opts: &GeometricOptions) -> GeometricEntanglement {
    let lambda = lambda.clamp(0.0, 1.0);
    let entropy = (-lambda.ln() / opts.log_base.ln()).max(0.0);
    GeometricEntanglement {
        lambda,
        entropy,
        converged,
        product,
    }
}

fn random_local(rng: &mut ChaCha20Rng, d: usize) -> Vec<C64> {
    let mut v: Vec<C64> = (0..d)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        })
        .collect();
    normalize(&mut v);
    v
}

fn normalize(v: &mut [C64]) -> f64 {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        for z in v.iter_mut() {
            *z /= n;
        }
    }
    n
}

/// Contracts every site except `site` of `state` with `conj(u_k)`; the result
/// is the environment vector whose norm is the best achievable overlap when
/// only site `site` is varied.
fn dense_environment(state: &[C64], d: usize, length: usize, locals: &[Vec<C64>], site: usize) -> Vec<C64> {
    // contract sites to the right of `site`, last site first
    let mut cur: Vec<C64> = state.to_vec();
    for k in (site + 1..length).rev() {
        let u = &locals[k];
        cur = cur
            .chunks_exact(d)
            .map(|c| c.iter().zip(u).map(|(a, b)| b.conj() * a).sum())
            .collect();
    }
    // cur has shape (d^site, d); contract the left sites from the front
    for u in locals.iter().take(site) {
        let stride = cur.len() / d;
        let mut next = vec![C64::new(0.0, 0.0); stride];
        for (s, coef) in u.iter().enumerate() {
            let c = coef.conj();
            for (n, x) in next.iter_mut().zip(&cur[s * stride..(s + 1) * stride]) {
                *n += c * x;
            }
        }
        cur = next;
    }
    cur
}

/// Alternating optimization on a dense state vector; every site update sets
/// the local vector to the normalized environment.
pub fn geometric_entanglement_dense(
    state: &[C64],
    local_dim: usize,
    opts: &GeometricOptions,
) -> Result<GeometricEntanglement> {
    let length = chain_length(state.len(), local_dim)?;
    let norm2: f64 = state.iter().map(|z| z.norm_sqr()).sum();
    if norm2 <= 0.0 {
        return Err(Error::InvalidState("zero vector".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let mut best = (-1.0, false, Vec::new());
    for _ in 0..opts.restarts.max(1) {
        let mut locals: Vec<Vec<C64>> = (0..length).map(|_| random_local(&mut rng, local_dim)).collect();
        let mut prev = 0.0;
        let mut lambda = 0.0;
        let mut converged = false;
        for _ in 0..opts.max_sweeps {
            for site in 0..length {
                let mut env = dense_environment(state, local_dim, length, &locals, site);
                let n = normalize(&mut env);
                if n > 0.0 {
                    locals[site] = env;
                }
                lambda = n * n / norm2;
            }
            if (lambda - prev).abs() < opts.tol {
                converged = true;
                break;
            }
            prev = lambda;
        }
        if lambda > best.0 {
            best = (lambda, converged, locals);
        }
    }
    Ok(finish(best.0, best.1, best.2, opts))
}

/// Transfer vector of sites left of `k`: `L[b] = sum conj(u) A ... ` with the
/// ket bond index `b`.
fn push_left(env: &[C64], a: &Tensor, u: &[C64]) -> Vec<C64> {
    let s = a.shape();
    let (dl, d, dr) = (s[0], s[1], s[2]);
    let mut out = vec![C64::new(0.0, 0.0); dr];
    let data = a.data();
    for l in 0..dl {
        if env[l] == C64::new(0.0, 0.0) {
            continue;
        }
        for p in 0..d {
            let c = env[l] * u[p].conj();
            let row = &data[(l * d + p) * dr..(l * d + p + 1) * dr];
            for (o, x) in out.iter_mut().zip(row) {
                *o += c * x;
            }
        }
    }
    out
}

fn push_right(env: &[C64], a: &Tensor, u: &[C64]) -> Vec<C64> {
    let s = a.shape();
    let (dl, d, dr) = (s[0], s[1], s[2]);
    let data = a.data();
    (0..dl)
        .map(|l| {
            let mut acc = C64::new(0.0, 0.0);
            for p in 0..d {
                let row = &data[(l * d + p) * dr..(l * d + p + 1) * dr];
                let dot: C64 = row.iter().zip(env).map(|(x, e)| x * e).sum();
                acc += u[p].conj() * dot;
            }
            acc
        })
        .collect()
}

fn local_env(left: &[C64], a: &Tensor, right: &[C64]) -> Vec<C64> {
    let s = a.shape();
    let (dl, d, dr) = (s[0], s[1], s[2]);
    let data = a.data();
    let mut out = vec![C64::new(0.0, 0.0); d];
    for l in 0..dl {
        for (p, o) in out.iter_mut().enumerate() {
            let row = &data[(l * d + p) * dr..(l * d + p + 1) * dr];
            let dot: C64 = row.iter().zip(right).map(|(x, e)| x * e).sum();
            *o += left[l] * dot;
        }
    }
    out
}

/// Bond-dimension-1 variational optimizer on an MPS. Left and right transfer
/// vectors are cached so that one sweep costs `O(L d D^2)`.
pub fn geometric_entanglement_mps(psi: &MatrixProductState, opts: &GeometricOptions) -> Result<GeometricEntanglement> {
    let length = psi.len();
    let d = psi.local_dim();
    let norm2 = {
        let n = psi.norm();
        n * n
    };
    if norm2 <= 0.0 {
        return Err(Error::InvalidState("zero state".into()));
    }
    let tensors = psi.tensors();
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed ^ 0x5bd1_e995);
    let mut best = (-1.0, false, Vec::new());
    let one = vec![ONE];
    for _ in 0..opts.restarts.max(1) {
        let mut locals: Vec<Vec<C64>> = (0..length).map(|_| random_local(&mut rng, d)).collect();
        // rights[k] covers sites k+1..L
        let mut rights: Vec<Vec<C64>> = vec![Vec::new(); length];
        rights[length - 1] = one.clone();
        for k in (0..length - 1).rev() {
            rights[k] = push_right(&rights[k + 1], &tensors[k + 1], &locals[k + 1]);
        }
        let mut lefts: Vec<Vec<C64>> = vec![Vec::new(); length];
        lefts[0] = one.clone();
        let mut prev = 0.0;
        let mut lambda = 0.0;
        let mut converged = false;
        for _ in 0..opts.max_sweeps {
            for k in 0..length {
                let mut env = local_env(&lefts[k], &tensors[k], &rights[k]);
                let n = normalize(&mut env);
                if n > 0.0 {
                    locals[k] = env;
                }
                lambda = n * n / norm2;
                if k + 1 < length {
                    lefts[k + 1] = push_left(&lefts[k], &tensors[k], &locals[k]);
                }
            }
            for k in (0..length).rev() {
                let mut env = local_env(&lefts[k], &tensors[k], &rights[k]);
                let n = normalize(&mut env);
                if n > 0.0 {
                    locals[k] = env;
                }
                lambda = n * n / norm2;
                if k > 0 {
                    rights[k - 1] = push_right(&rights[k], &tensors[k], &locals[k]);
                }
            }
            if (lambda - prev).abs() < opts.tol {
                converged = true;
                break;
            }
            prev = lambda;
        }
        if lambda > best.0 {
            best = (lambda, converged, locals);
        }
    }
    Ok(finish(best.0, best.1, best.2, opts))
}

/// Overlap `<product|psi>` through the tensor network, for checks.
#[cfg(test)]
pub(crate) fn product_overlap(psi: &MatrixProductState, locals: &[Vec<C64>]) -> C64 {
    use crate::tensor::tensordot;
    let mut env = Tensor::from_vec(&[1], vec![ONE]);
    for (a, u) in psi.tensors().iter().zip(locals) {
        let uc = Tensor::from_vec(&[u.len()], u.iter().map(|z| z.conj()).collect());
        let x = tensordot(&env, &[0], a, &[0]);
        env = tensordot(&uc, &[0], &x, &[0]);
    }
    env.data()[0]
}
