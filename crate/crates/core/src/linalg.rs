//! Thin wrappers over faer decompositions used across the crate.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Largest |A - A^H| entry.
pub fn hermitian_deviation(a: MatRef<'_, C64>) -> f64 {
    let n = a.nrows();
    let mut dev = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

fn is_real(a: MatRef<'_, C64>) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].im == 0.0))
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending, eigenvectors
/// in the columns. Real symmetric input takes the (much faster) real path.
pub fn eigh(a: MatRef<'_, C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    if is_real(a) {
        let re = Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)].re);
        let evd = re
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Linalg(format!("{e:?}")))?;
        let vals = (0..n).map(|k| evd.S()[k]).collect();
        let u = evd.U();
        let vecs = Mat::<C64>::from_fn(n, n, |i, j| C64::new(u[(i, j)], 0.0));
        Ok((vals, vecs))
    } else {
        let evd = a
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Linalg(format!("{e:?}")))?;
        let vals = (0..n).map(|k| evd.S()[k].re).collect();
        Ok((vals, evd.U().to_owned()))
    }
}

pub fn eigvalsh(a: MatRef<'_, C64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    if is_real(a) {
        let n = a.nrows();
        let re = Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)].re);
        re.self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Linalg(format!("{e:?}")))
    } else {
        a.self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Linalg(format!("{e:?}")))
    }
}

/// Thin QR: `a = q r` with `q` of shape `m x k`, `k = min(m, n)`.
pub fn thin_qr(a: MatRef<'_, C64>) -> (Mat<C64>, Mat<C64>) {
    let qr = a.qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R().to_owned();
    (q, r)
}

pub struct ThinSvd {
    pub u: Mat<C64>,
    pub s: Vec<f64>,
    pub v: Mat<C64>,
}

/// Thin SVD `a = u diag(s) v^H`, singular values nonincreasing.
pub fn thin_svd(a: MatRef<'_, C64>) -> Result<ThinSvd> {
    let k = a.nrows().min(a.ncols());
    if k == 0 {
        return Ok(ThinSvd {
            u: Mat::zeros(a.nrows(), 0),
            s: Vec::new(),
            v: Mat::zeros(a.ncols(), 0),
        });
    }
    let svd = a.thin_svd().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let s = (0..k).map(|i| svd.S()[i].re).collect();
    Ok(ThinSvd {
        u: svd.U().to_owned(),
        s,
        v: svd.V().to_owned(),
    })
}

/// Solves the Hermitian positive semi-definite system `n x = b`. A ridge of
/// `ridge_scale * trace(n) / dim` is always added to the diagonal; returns the
/// solution and whether the plain Cholesky factorization failed.
pub fn solve_hpsd(n: MatRef<'_, C64>, b: &[C64], ridge_scale: f64) -> Result<(Vec<C64>, bool)> {
    let dim = n.nrows();
    let trace: f64 = (0..dim).map(|i| n[(i, i)].re).sum();
    let ridge = ridge_scale * (trace / dim as f64).max(f64::MIN_POSITIVE);
    let mut reg = n.to_owned();
    for i in 0..dim {
        reg[(i, i)] += C64::new(ridge, 0.0);
    }
    let rhs = Mat::<C64>::from_fn(dim, 1, |i, _| b[i]);
    match reg.llt(Side::Lower) {
        Ok(llt) => {
            let x = llt.solve(&rhs);
            Ok(((0..dim).map(|i| x[(i, 0)]).collect(), false))
        }
        Err(_) => {
            // indefinite after rounding: fall back to a pivoted LDL^H solve
            let lblt = reg.lblt(Side::Lower);
            let x = lblt.solve(&rhs);
            let sol: Vec<C64> = (0..dim).map(|i| x[(i, 0)]).collect();
            if sol.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Linalg("singular local normal equations".into()));
            }
            Ok((sol, true))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_real_and_complex_paths_agree() {
        let a = Mat::<C64>::from_fn(4, 4, |i, j| {
            C64::new(((i + 1) * (j + 1)) as f64 + if i == j { i as f64 } else { 0.0 }, 0.0)
        });
        let (vals, vecs) = eigh(a.as_ref()).unwrap();
        // add a tiny anti-symmetric imaginary part to force the complex path
        let b = Mat::<C64>::from_fn(4, 4, |i, j| {
            let im = if i < j {
                1e-300
            } else if i > j {
                -1e-300
            } else {
                0.0
            };
            a[(i, j)] + C64::new(0.0, im)
        });
        let (vals_c, _) = eigh(b.as_ref()).unwrap();
        for (x, y) in vals.iter().zip(&vals_c) {
            assert!((x - y).abs() < 1e-10);
        }
        let av = &a * &vecs;
        for k in 0..4 {
            for i in 0..4 {
                assert!((av[(i, k)] - vecs[(i, k)] * vals[k]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn thin_svd_reconstructs() {
        let a = Mat::<C64>::from_fn(3, 5, |i, j| C64::new((i * j) as f64 + 1.0, i as f64 - j as f64));
        let svd = thin_svd(a.as_ref()).unwrap();
        assert_eq!(svd.s.len(), 3);
        let us = Mat::<C64>::from_fn(3, 3, |i, j| svd.u[(i, j)] * svd.s[j]);
        let rec = &us * svd.v.adjoint();
        for i in 0..3 {
            for j in 0..5 {
                assert!((rec[(i, j)] - a[(i, j)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn hpsd_solve_recovers_solution() {
        let m = Mat::<C64>::from_fn(3, 3, |i, j| C64::new(if i == j { 4.0 } else { 1.0 }, 0.0));
        let x_true = [C64::new(1.0, 2.0), C64::new(-1.0, 0.0), C64::new(0.5, 0.5)];
        let b: Vec<C64> = (0..3).map(|i| (0..3).map(|j| m[(i, j)] * x_true[j]).sum()).collect();
        let (x, fallback) = solve_hpsd(m.as_ref(), &b, 1e-14).unwrap();
        assert!(!fallback);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).norm() < 1e-10);
        }
    }
}
