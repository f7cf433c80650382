use approx::assert_abs_diff_eq;

use super::*;
use crate::dense::full_spectrum;
use crate::model::{build_dense_hamiltonian, build_hamiltonian_mpo, build_shifted_mpo, sample_disorder, LocalSpin};
use crate::mps::{dense_to_mps, mps_to_dense};

fn realization(length: usize, w: f64, seed: u64) -> crate::model::DisorderRealization {
    sample_disorder(&ChainSpec::new(length, LocalSpin::Half, w, seed).unwrap())
}

fn fidelity(psi: &MatrixProductState, v: &[C64]) -> f64 {
    let d = mps_to_dense(psi).unwrap();
    let ov: C64 = d.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
    let n2: f64 = d.iter().map(|z| z.norm_sqr()).sum();
    ov.norm_sqr() / n2
}

#[test]
fn config_validation() {
    assert!(SimpsConfig::default().validate().is_ok());
    let bad = SimpsConfig {
        eps3: 0.0,
        ..SimpsConfig::default()
    };
    assert!(matches!(bad.validate(), Err(Error::Config(_))));
    let bad = SimpsConfig {
        bond_dim: 0,
        ..SimpsConfig::default()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn identity_operator_returns_target() {
    let target = random_mps(6, 2, 4, 1);
    let guess = random_mps(6, 2, 4, 2);
    let o = MatrixProductOperator::identity(6, 2);
    let cfg = SimpsConfig::default();
    let res = inner_sweep(&o, &target, &guess, &cfg).unwrap();
    assert_eq!(res.sweeps, 1);
    assert!(res.converged);
    assert_abs_diff_eq!(res.delta1, 1.0, epsilon = 1e-10);
    let ov = overlap(&target, &res.state).unwrap().norm() / target.norm();
    assert_abs_diff_eq!(ov, 1.0, epsilon = 1e-10);
}

#[test]
fn inner_sweep_matches_dense_linear_solve() {
    let r = realization(6, 3.0, 11);
    let lambda = 0.37;
    let o = build_shifted_mpo(&r, lambda);
    let target = random_mps(6, 2, 8, 5);
    let cfg = SimpsConfig {
        eps1: 1e-14,
        eps2: 1e-16,
        max_sweeps: 200,
        ..SimpsConfig::default()
    };
    let res = inner_sweep(&o, &target, &target, &cfg).unwrap();

    let h = build_dense_hamiltonian(&r).unwrap();
    let n = h.dim;
    let a = faer::Mat::<C64>::from_fn(n, n, |i, j| {
        h.entries[(i, j)]
            - if i == j {
                C64::new(lambda, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
    });
    let rhs_vec = mps_to_dense(&target).unwrap();
    let rhs = faer::Mat::<C64>::from_fn(n, 1, |i, _| rhs_vec[i]);
    let x = faer::linalg::solvers::Solve::solve(&a.partial_piv_lu(), &rhs);
    let xv: Vec<C64> = (0..n).map(|i| x[(i, 0)]).collect();
    let xn: f64 = xv.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let xv: Vec<C64> = xv.iter().map(|z| z / xn).collect();
    assert!(fidelity(&res.state, &xv).sqrt() > 1.0 - 1e-8);
    assert_abs_diff_eq!(res.state.norm(), 1.0, epsilon = 1e-10);
}

#[test]
fn bond_starved_solve_stalls() {
    let target = random_mps(8, 2, 8, 21);
    let guess = random_mps(8, 2, 2, 22);
    let o = MatrixProductOperator::identity(8, 2);
    let cfg = SimpsConfig {
        max_sweeps: 500,
        ..SimpsConfig::default()
    };
    let res = inner_sweep(&o, &target, &guess, &cfg).unwrap();
    assert!(res.stalled);
    assert!(!res.converged);
    assert!(res.delta1 < 1.0 - 1e-3);
    assert!(res.state.max_bond() <= 2);
}

#[test]
fn eigenstate_is_a_fixed_point() {
    let r = realization(6, 4.0, 3);
    let h = build_hamiltonian_mpo(&r);
    let spectrum = full_spectrum(&build_dense_hamiltonian(&r).unwrap()).unwrap();
    let pair = &spectrum[31];
    let psi = dense_to_mps(&pair.vector, 2, 8, 0.0).unwrap();
    let check = check_outer_convergence(&psi, &psi, &h, &SimpsConfig::default()).unwrap();
    assert_abs_diff_eq!(check.delta3, 0.0, epsilon = 1e-14);
    assert!(check.delta4 < 1e-10);
    assert_abs_diff_eq!(check.delta5.norm(), 1.0, epsilon = 1e-12);
    assert!(check.accepted);

    let o = build_shifted_mpo(&r, pair.energy + 0.05);
    let cfg = SimpsConfig {
        bond_dim: 8,
        ..SimpsConfig::default()
    };
    let (out, report) = simps_solve_from(&o, &h, &psi, &cfg).unwrap();
    assert!(report.accepted);
    assert!(report.outer_iterations <= 2);
    assert!(report.records[0].delta3 < 1e-9);
    assert!(fidelity(&out, &pair.vector) > 1.0 - 1e-8);
}

#[test]
fn superposition_is_rejected_by_variance() {
    let r = realization(4, 2.0, 8);
    let h = build_hamiltonian_mpo(&r);
    let spectrum = full_spectrum(&build_dense_hamiltonian(&r).unwrap()).unwrap();
    let (e1, e2) = (&spectrum[5], &spectrum[9]);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v: Vec<C64> = e1.vector.iter().zip(&e2.vector).map(|(a, b)| (a + b) * s).collect();
    let psi = dense_to_mps(&v, 2, 4, 0.0).unwrap();
    let cfg = SimpsConfig::default();
    let check = check_outer_convergence(&psi, &psi, &h, &cfg).unwrap();
    assert_abs_diff_eq!(check.delta3, 0.0, epsilon = 1e-14);
    assert_abs_diff_eq!(check.delta5.norm(), 1.0, epsilon = 1e-12);
    let want = (e1.energy - e2.energy).powi(2) / 4.0;
    assert_abs_diff_eq!(check.delta4, want, epsilon = 1e-10);
    assert!(check.delta4 >= cfg.eps4);
    assert!(!check.accepted);

    let up = MatrixProductState::basis_state(&[0, 0, 0, 0], 2).unwrap();
    let down = MatrixProductState::basis_state(&[1, 1, 1, 1], 2).unwrap();
    let check = check_outer_convergence(&up, &down, &h, &cfg).unwrap();
    assert_abs_diff_eq!(check.delta5.norm(), 0.0, epsilon = 1e-15);
    assert!(!check.accepted);
}

#[test]
fn finds_mid_spectrum_eigenstate() {
    let r = realization(8, 6.0, 42);
    let h = build_hamiltonian_mpo(&r);
    let spectrum = full_spectrum(&build_dense_hamiltonian(&r).unwrap()).unwrap();
    let pair = &spectrum[128];
    // at exactly lambda = E the null direction of O drops out of the least
    // squares step and the iteration settles on the next-nearest state
    let o = build_shifted_mpo(&r, pair.energy + 1e-6);
    let cfg = SimpsConfig {
        bond_dim: 16,
        seed: 7,
        ..SimpsConfig::default()
    };
    let (psi, report) = simps_solve(&o, &h, &cfg).unwrap();
    assert!(report.accepted, "{:?}", report.rejection_reason);
    assert!(fidelity(&psi, &pair.vector) > 0.99);
    assert!(report.final_record().unwrap().delta4 < 1e-7);
    assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-10);
    let line = report.to_json_line();
    assert!(!line.contains('\n'));
    let back: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert_eq!(back["accepted"], true);
}

#[test]
fn far_target_finds_ground_state() {
    let r = realization(8, 6.0, 42);
    let h = build_hamiltonian_mpo(&r);
    let spectrum = full_spectrum(&build_dense_hamiltonian(&r).unwrap()).unwrap();
    let o = build_shifted_mpo(&r, spectrum[0].energy - 10.0);
    let cfg = SimpsConfig {
        bond_dim: 16,
        max_outer: 2000,
        seed: 3,
        ..SimpsConfig::default()
    };
    let (psi, report) = simps_solve(&o, &h, &cfg).unwrap();
    assert!(fidelity(&psi, &spectrum[0].vector) > 0.99, "{report:?}");
    assert_abs_diff_eq!(
        report.final_record().unwrap().energy,
        spectrum[0].energy,
        epsilon = 1e-4
    );
}

#[test]
fn target_band() {
    let spec = ChainSpec::new(8, LocalSpin::Half, 6.0, 1).unwrap();
    assert_eq!(choose_targets(&spec, 1, 99, 0.0), vec![0.0]);
    let a = choose_targets(&spec, 20, 5, 0.1);
    assert_eq!(a, choose_targets(&spec, 20, 5, 0.1));
    assert_ne!(a, choose_targets(&spec, 20, 6, 0.1));
    let half = 0.5 * 6.0 * 8f64.sqrt() * 0.1;
    assert!(a.iter().all(|l| l.abs() <= half));
    for seed in 0..100 {
        let spec = ChainSpec::new(8, LocalSpin::Half, 6.0, seed).unwrap();
        let spectrum = full_spectrum(&build_dense_hamiltonian(&sample_disorder(&spec)).unwrap()).unwrap();
        let (lo, hi) = (spectrum[0].energy, spectrum[255].energy);
        for l in choose_targets(&spec, 10, seed, 0.1) {
            assert!(lo <= l && l <= hi);
        }
    }
}
