//! Shift-and-invert eigensolver on matrix product states.
//!
//! The eigenstate of `H` closest to a target `lambda` is the dominant
//! eigenvector of `(H - lambda)^-1`. Each power step `phi -> O^-1 phi`, with
//! `O = H - lambda`, is carried out at fixed bond dimension by minimizing
//! `|O x - phi|^2` one site at a time.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_hpsd;
use crate::model::{counter_uniform, ChainSpec};
use crate::mps::{
    canonicalize, energy_variance, expectation, overlap, random_mps, Environment, MatrixProductOperator,
    MatrixProductState,
};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimpsConfig {
    pub bond_dim: usize,
    /// Inner sweeps stop once `1 - delta1 < eps1`.
    pub eps1: f64,
    /// Inner sweeps count as stalled once `delta1` improves by less than this.
    pub eps2: f64,
    /// Threshold on the relative energy change between power steps.
    pub eps3: f64,
    /// Threshold on the energy variance.
    pub eps4: f64,
    /// Threshold on `1 - |<phi_n|phi_n+1>|`.
    pub eps5: f64,
    /// Stalled inner solves below this `delta1` count towards rejection.
    pub delta1_floor: f64,
    pub max_outer: usize,
    pub max_sweeps: usize,
    /// Seed of the random initial state.
    pub seed: u64,
    /// Ridge added to the local normal equations, relative to their mean
    /// diagonal.
    pub ridge: f64,
}

impl Default for SimpsConfig {
    fn default() -> Self {
        Self {
            bond_dim: 30,
            eps1: 1e-6,
            eps2: 1e-8,
            eps3: 1e-9,
            eps4: 1e-7,
            eps5: 1e-8,
            delta1_floor: 0.8,
            max_outer: 60,
            max_sweeps: 4,
            seed: 0,
            ridge: 1e-12,
        }
    }
}

/// Consecutive stalled outer steps below the floor that abort a solve.
pub const MAX_LOW_STALLS: usize = 3;

impl SimpsConfig {
    pub fn validate(&self) -> Result<()> {
        let tols = [
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("eps3", self.eps3),
            ("eps4", self.eps4),
            ("eps5", self.eps5),
        ];
        for (name, v) in tols {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.bond_dim == 0 {
            return Err(Error::Config("bond_dim must be at least 1".into()));
        }
        if self.max_outer == 0 || self.max_sweeps == 0 {
            return Err(Error::Config("max_outer and max_sweeps must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.delta1_floor) {
            return Err(Error::Config(format!(
                "delta1_floor must lie in [0, 1], got {}",
                self.delta1_floor
            )));
        }
        Ok(())
    }
}

/// One power step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub delta1: f64,
    pub sweeps: usize,
    pub stalled: bool,
    pub energy: f64,
    pub delta3: f64,
    pub delta4: f64,
    /// Modulus of the overlap between consecutive states.
    pub delta5: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub lambda: Option<f64>,
    pub outer_iterations: usize,
    pub records: Vec<OuterRecord>,
    pub accepted: bool,
    pub rejection_reason: Option<String>,
    /// Local solves where Cholesky failed and the pivoted fallback was used.
    pub solver_fallbacks: usize,
}

impl ConvergenceReport {
    pub fn final_record(&self) -> Option<&OuterRecord> {
        self.records.last()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Operators for `min |O x - phi|`: `O^dagger` for the right-hand side and the
/// product `O^dagger O` for the normal equations.
#[derive(Clone, Debug)]
pub struct ShiftInvertProblem {
    adjoint: MatrixProductOperator,
    normal: MatrixProductOperator,
}

impl ShiftInvertProblem {
    pub fn new(o: &MatrixProductOperator) -> Result<Self> {
        let adjoint = o.adjoint();
        let normal = adjoint.compose(o)?;
        Ok(Self { adjoint, normal })
    }
}

#[derive(Clone, Debug)]
pub struct InnerSweepResult {
    /// Normalized approximation of `O^-1 target`, centered at site 0.
    pub state: MatrixProductState,
    /// `|<target|O x>| / |O x|` after the last local solve.
    pub delta1: f64,
    pub sweeps: usize,
    pub stalled: bool,
    pub converged: bool,
    pub fallbacks: usize,
}

struct Sweeper<'a> {
    problem: &'a ShiftInvertProblem,
    target: &'a MatrixProductState,
    x: MatrixProductState,
    normal_env: Environment,
    rhs_env: Environment,
    ridge: f64,
    fallbacks: usize,
}

impl Sweeper<'_> {
    /// Solves the local normal equations at `site` and returns the cosine
    /// between `O x` and the target.
    fn solve(&mut self, site: usize) -> Result<f64> {
        let (n, nmat) = self.normal_env.local_matrix(site, self.problem.normal.tensor(site));
        let b = self
            .rhs_env
            .local_vector(site, self.problem.adjoint.tensor(site), self.target.tensor(site));
        let shape = self.x.tensor(site).shape().to_vec();
        debug_assert_eq!(b.shape(), shape.as_slice());
        let nref = faer::MatRef::from_row_major_slice(&nmat, n, n);
        let (sol, fallback) = solve_hpsd(nref, b.data(), self.ridge)?;
        self.fallbacks += usize::from(fallback);
        let bx: C64 = b.data().iter().zip(&sol).map(|(p, q)| p.conj() * q).sum();
        let nx = crate::tensor::matmul_rm(&nmat, n, n, &sol, 1);
        let xnx: f64 = sol.iter().zip(&nx).map(|(p, q)| (p.conj() * q).re).sum();
        let delta1 = if xnx > 0.0 { bx.norm() / xnx.sqrt() } else { 0.0 };
        let mut t = Tensor::from_vec(&shape, sol);
        let norm = t.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Linalg(format!("local solution has norm {norm}")));
        }
        t.scale(C64::new(1.0 / norm, 0.0));
        self.x.set_tensor(site, t);
        Ok(delta1.min(1.0))
    }

    fn move_right(&mut self, site: usize) {
        self.x.shift_center(site, true);
        self.normal_env
            .update_left(site, &self.x, &self.problem.normal, &self.x);
        self.rhs_env
            .update_left(site, &self.x, &self.problem.adjoint, self.target);
    }

    fn move_left(&mut self, site: usize) {
        self.x.shift_center(site, false);
        self.normal_env
            .update_right(site, &self.x, &self.problem.normal, &self.x);
        self.rhs_env
            .update_right(site, &self.x, &self.problem.adjoint, self.target);
    }
}

/// Approximates `O^-1 target` (normalized) by alternating single-site
/// least-squares updates, starting from `guess`. A sweep runs left to right
/// and back.
pub fn inner_sweep(
    o: &MatrixProductOperator,
    target: &MatrixProductState,
    guess: &MatrixProductState,
    cfg: &SimpsConfig,
) -> Result<InnerSweepResult> {
    let problem = ShiftInvertProblem::new(o)?;
    inner_sweep_with(&problem, target, guess, cfg)
}

pub fn inner_sweep_with(
    problem: &ShiftInvertProblem,
    target: &MatrixProductState,
    guess: &MatrixProductState,
    cfg: &SimpsConfig,
) -> Result<InnerSweepResult> {
    let length = guess.len();
    if target.len() != length || problem.normal.len() != length {
        return Err(Error::ShapeMismatch("operator, target and guess lengths differ".into()));
    }
    let mut x = canonicalize(guess, 0);
    x.normalize();
    let normal_env = Environment::new(&x, &problem.normal, &x, 0);
    let rhs_env = Environment::new(&x, &problem.adjoint, target, 0);
    let mut sw = Sweeper {
        problem,
        target,
        x,
        normal_env,
        rhs_env,
        ridge: cfg.ridge,
        fallbacks: 0,
    };

    let mut prev: Option<f64> = None;
    let mut delta1 = 0.0;
    let mut sweeps = 0;
    let mut stalled = false;
    let mut converged = false;
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        for site in 0..length - 1 {
            sw.solve(site)?;
            sw.move_right(site);
        }
        for site in (1..length).rev() {
            delta1 = sw.solve(site)?;
            sw.move_left(site);
        }
        if 1.0 - delta1 < cfg.eps1 {
            converged = true;
            break;
        }
        if let Some(p) = prev {
            if delta1 - p < cfg.eps2 {
                stalled = true;
                break;
            }
        }
        prev = Some(delta1);
    }
    let mut state = sw.x;
    state.normalize();
    Ok(InnerSweepResult {
        state,
        delta1,
        sweeps,
        stalled,
        converged,
        fallbacks: sw.fallbacks,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuterCheck {
    pub delta3: f64,
    pub delta4: f64,
    pub delta5: C64,
    pub energy: f64,
    pub accepted: bool,
}

/// Relative energy change, energy variance of `next` and overlap of the two
/// (normalized) states; the step is accepted when all three meet their
/// thresholds.
pub fn check_outer_convergence(
    prev: &MatrixProductState,
    next: &MatrixProductState,
    h: &MatrixProductOperator,
    cfg: &SimpsConfig,
) -> Result<OuterCheck> {
    let e_prev = expectation(h, prev)?;
    let e_next = expectation(h, next)?;
    let diff = (e_prev - e_next).abs();
    let delta3 = if e_prev.abs() < 1e-12 {
        diff
    } else {
        diff / e_prev.abs()
    };
    let delta4 = energy_variance(h, next)?;
    let delta5 = overlap(prev, next)? / (prev.norm() * next.norm());
    let accepted = delta3 < cfg.eps3 && delta4 < cfg.eps4 && 1.0 - delta5.norm() < cfg.eps5;
    Ok(OuterCheck {
        delta3,
        delta4,
        delta5,
        energy: e_next,
        accepted,
    })
}

/// Runs the power iteration from a random initial state drawn from `cfg.seed`.
pub fn simps_solve(
    o: &MatrixProductOperator,
    h: &MatrixProductOperator,
    cfg: &SimpsConfig,
) -> Result<(MatrixProductState, ConvergenceReport)> {
    let init = random_mps(h.len(), h.local_dim(), cfg.bond_dim, cfg.seed);
    simps_solve_from(o, h, &init, cfg)
}

/// Runs the power iteration from a given initial state.
pub fn simps_solve_from(
    o: &MatrixProductOperator,
    h: &MatrixProductOperator,
    init: &MatrixProductState,
    cfg: &SimpsConfig,
) -> Result<(MatrixProductState, ConvergenceReport)> {
    cfg.validate()?;
    let problem = ShiftInvertProblem::new(o)?;
    let mut phi = canonicalize(init, 0);
    phi.normalize();
    let mut report = ConvergenceReport {
        lambda: None,
        outer_iterations: 0,
        records: Vec::new(),
        accepted: false,
        rejection_reason: None,
        solver_fallbacks: 0,
    };
    let mut low_stalls = 0;
    for _ in 0..cfg.max_outer {
        let inner = inner_sweep_with(&problem, &phi, &phi, cfg)?;
        report.solver_fallbacks += inner.fallbacks;
        let check = check_outer_convergence(&phi, &inner.state, h, cfg)?;
        report.outer_iterations += 1;
        report.records.push(OuterRecord {
            delta1: inner.delta1,
            sweeps: inner.sweeps,
            stalled: inner.stalled,
            energy: check.energy,
            delta3: check.delta3,
            delta4: check.delta4,
            delta5: check.delta5.norm(),
        });
        phi = inner.state;
        if check.accepted {
            report.accepted = true;
            return Ok((phi, report));
        }
        if inner.stalled && inner.delta1 < cfg.delta1_floor {
            low_stalls += 1;
            if low_stalls >= MAX_LOW_STALLS {
                report.rejection_reason = Some(format!(
                    "inner solve stalled below delta1 = {} in {MAX_LOW_STALLS} consecutive steps",
                    cfg.delta1_floor
                ));
                return Ok((phi, report));
            }
        } else {
            low_stalls = 0;
        }
    }
    report.rejection_reason = Some(format!("not converged after {} outer iterations", cfg.max_outer));
    Ok((phi, report))
}

/// Target energies drawn uniformly from `[-w, w]` with
/// `w = 0.5 * W * sqrt(L) * band_fraction`, centred on the (zero) mean energy.
pub fn choose_targets(spec: &ChainSpec, n_targets: usize, seed: u64, band_fraction: f64) -> Vec<f64> {
    let half_width = 0.5 * spec.disorder * (spec.length as f64).sqrt() * band_fraction;
    (0..n_targets)
        .map(|k| half_width * (2.0 * counter_uniform(seed, 1, k as u64) - 1.0))
        .collect()
}

#[cfg(test)]
mod tests;
