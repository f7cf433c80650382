//! Quick analytic self-checks behind the `validate` subcommand.

use num_complex::Complex64 as C64;

use crate::dense::full_spectrum;
use crate::entanglement::{
    concurrence, geometric_entanglement_dense, geometric_entanglement_mps, negativity, GeometricOptions,
    TwoSiteDensityMatrix,
};
use crate::error::Result;
use crate::model::{
    build_dense_hamiltonian, build_hamiltonian_mpo, build_shifted_mpo, sample_disorder, ChainSpec, LocalSpin,
};
use crate::mps::{dense_to_mps, mps_to_dense};
use crate::scaling::{collapse_quality, collapse_transform, CollapseParams, ScalingCurve};
use crate::simps::{simps_solve, SimpsConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct FixtureCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> FixtureCheck {
    match f() {
        Ok((passed, detail)) => FixtureCheck { name, passed, detail },
        Err(e) => FixtureCheck {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn werner(p: f64) -> Result<TwoSiteDensityMatrix> {
    let h = 0.5;
    let m = faer::Mat::<C64>::from_fn(4, 4, |i, j| {
        let bell = if (i == 0 || i == 3) && (j == 0 || j == 3) {
            h
        } else {
            0.0
        };
        c(p * bell + if i == j { (1.0 - p) / 4.0 } else { 0.0 })
    });
    TwoSiteDensityMatrix::new(2, m, (0, 1))
}

fn three_qubit(amps: &[(usize, f64)]) -> Vec<C64> {
    let mut v = vec![c(0.0); 8];
    for &(i, a) in amps {
        v[i] = c(a);
    }
    v
}

pub fn validate_fixtures() -> Vec<FixtureCheck> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![
        check("bell state: C = 1, N = 1/2", || {
            let rho = TwoSiteDensityMatrix::pure(2, &[c(s), c(0.0), c(0.0), c(s)], (0, 1))?;
            let (cc, n) = (concurrence(&rho)?, negativity(&rho)?);
            Ok((
                (cc - 1.0).abs() < 1e-10 && (n - 0.5).abs() < 1e-10,
                format!("C = {cc}, N = {n}"),
            ))
        }),
        check("product state: C = N = 0", || {
            let rho = TwoSiteDensityMatrix::pure(2, &[c(s), c(s), c(0.0), c(0.0)], (0, 1))?;
            let (cc, n) = (concurrence(&rho)?, negativity(&rho)?);
            Ok((cc.abs() < 1e-10 && n.abs() < 1e-10, format!("C = {cc}, N = {n}")))
        }),
        check("werner p = 0.5: C = 0.25, N = 0.125", || {
            let rho = werner(0.5)?;
            let (cc, n) = (concurrence(&rho)?, negativity(&rho)?);
            Ok((
                (cc - 0.25).abs() < 1e-10 && (n - 0.125).abs() < 1e-10,
                format!("C = {cc}, N = {n}"),
            ))
        }),
        check("GHZ and W overlaps 1/2 and 4/9", || {
            let opts = GeometricOptions {
                restarts: 20,
                ..GeometricOptions::default()
            };
            let t = 1.0 / 3f64.sqrt();
            let ghz = three_qubit(&[(0, s), (7, s)]);
            let w = three_qubit(&[(1, t), (2, t), (4, t)]);
            let a = geometric_entanglement_dense(&ghz, 2, &opts)?.lambda;
            let b = geometric_entanglement_mps(&dense_to_mps(&w, 2, 4, 0.0)?, &opts)?.lambda;
            Ok((
                (a - 0.5).abs() < 1e-8 && (b - 4.0 / 9.0).abs() < 1e-8,
                format!("GHZ {a}, W {b}"),
            ))
        }),
        check("MPO equals dense Hamiltonian", || {
            let mut worst = 0.0f64;
            for (len, spin) in [(6, LocalSpin::Half), (4, LocalSpin::One)] {
                let r = sample_disorder(&ChainSpec::new(len, spin, 3.0, 5)?);
                let from_mpo = build_hamiltonian_mpo(&r).to_dense()?;
                worst = worst.max(from_mpo.max_abs_diff(&build_dense_hamiltonian(&r)?));
            }
            Ok((worst < 1e-12, format!("max deviation {worst:e}")))
        }),
        check("ED eigenpairs at L = 8", || {
            let r = sample_disorder(&ChainSpec::new(8, LocalSpin::Half, 2.0, 9)?);
            let h = build_dense_hamiltonian(&r)?;
            let spectrum = full_spectrum(&h)?;
            let mut worst = 0.0f64;
            for p in spectrum.iter().step_by(17) {
                let hv = h.apply(&p.vector);
                let res: f64 = hv
                    .iter()
                    .zip(&p.vector)
                    .map(|(a, b)| (a - b * p.energy).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(res);
            }
            Ok((worst < 1e-10, format!("max residual {worst:e}")))
        }),
        check("exact collapse scores zero", || {
            let curves: Vec<ScalingCurve> = [8usize, 12]
                .iter()
                .map(|&l| {
                    let lf = l as f64;
                    ScalingCurve {
                        length: l,
                        points: (0..11)
                            .map(|k| {
                                let x = -1.0 + 0.2 * k as f64;
                                (3.0 + x * lf.powf(-0.5), lf * x.tanh())
                            })
                            .collect(),
                    }
                })
                .collect();
            let q = collapse_quality(&collapse_transform(&curves, &CollapseParams::new(1.0, 0.5, 3.0, 1)?))?;
            Ok((q.abs() < 1e-10, format!("quality {q:e}")))
        }),
        check("SIMPS reproduces an ED eigenstate at L = 6", || {
            let r = sample_disorder(&ChainSpec::new(6, LocalSpin::Half, 4.0, 2)?);
            let spectrum = full_spectrum(&build_dense_hamiltonian(&r)?)?;
            let target = &spectrum[32];
            let cfg = SimpsConfig {
                bond_dim: 8,
                ..SimpsConfig::default()
            };
            let (psi, report) = simps_solve(
                &build_shifted_mpo(&r, target.energy + 1e-3),
                &build_hamiltonian_mpo(&r),
                &cfg,
            )?;
            let v = mps_to_dense(&psi)?;
            let f: f64 = v
                .iter()
                .zip(&target.vector)
                .map(|(a, b)| a.conj() * b)
                .sum::<C64>()
                .norm_sqr();
            Ok((
                report.accepted && f > 0.99,
                format!("accepted {}, fidelity {f:.6}", report.accepted),
            ))
        }),
    ]
}
