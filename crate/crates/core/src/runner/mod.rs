//! Ensemble runner: samples disorder realizations over a list of W values,
//! obtains mid-spectrum eigenstates by ED or SIMPS, evaluates the indicators
//! and aggregates them into per-W curves.
//!
//! Seeds: the realization seed for W index `w` and realization index `r` is
//! `mix(mix(mix(master) ^ w) ^ r)` with `mix` the SplitMix64 finalizer; the
//! SIMPS start state for target `k` uses `mix(realization_seed ^ mix(k + 1))`.

mod config;
mod ge_hist;
mod output;
mod validate;

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{parse_config_text, parse_w_list, IndicatorToggles, Method, RunConfig, CONFIG_KEYS};
pub use ge_hist::{ge_hist, ks_statistic, GeHistogram, HistogramBin};
pub use output::{
    read_records_csv, write_histogram_csv, write_profiles_csv, write_records_csv, PROFILE_HEADER, RECORD_HEADER,
};
pub use validate::{validate_fixtures, FixtureCheck};

use crate::dense::{full_spectrum, mid_spectrum_selection};
use crate::entanglement::{
    geometric_entanglement_mps, npr, profile_pairs, DecayFit, EntanglementProfile, Measure, ProfileAccumulator,
    StateRef, TwoSiteDensityMatrix,
};
use crate::error::{Error, Result};
use crate::model::{
    build_dense_hamiltonian_capped, build_hamiltonian_mpo, build_shifted_mpo, sample_disorder, ChainSpec,
    DisorderRealization, LocalSpin,
};
use crate::mps::{dense_to_mps, MatrixProductState};
use crate::scaling::{CurvePoint, DisorderCurve, Indicator};
use crate::simps::{choose_targets, simps_solve, SimpsConfig};

/// SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn realization_seed(master: u64, w_index: usize, realization: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ w_index as u64) ^ realization as u64)
}

fn target_seed(realization_seed: u64, target: usize) -> u64 {
    splitmix64(realization_seed ^ splitmix64(target as u64 + 1))
}

/// Relative singular-value cutoff when converting ED vectors to MPS for the
/// geometric-entanglement optimizer.
const GE_SVD_TOL: f64 = 1e-12;

/// One eigenstate with its scalar indicators. Indicators are empty when not
/// requested, not defined for the model, or when a SIMPS state was rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenstateRecord {
    pub seed: u64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "L")]
    pub length: usize,
    pub model: String,
    pub method: String,
    /// Position in the ED spectrum, or `t{k}:{lambda}` for SIMPS targets.
    pub state_id: String,
    pub energy: f64,
    pub variance: f64,
    pub c_tot: Option<f64>,
    pub n_tot: Option<f64>,
    pub s_g: Option<f64>,
    /// Participation ratio divided by the Hilbert-space dimension; ED only.
    pub npr: Option<f64>,
    pub accepted: bool,
}

/// Everything produced by one `(W, realization)` task; also the checkpoint
/// unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskOutput {
    pub w_index: usize,
    pub realization: usize,
    pub seed: u64,
    pub records: Vec<EigenstateRecord>,
    pub profiles: Vec<ProfileAccumulator>,
    pub logs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WProfile {
    pub length: usize,
    pub w: f64,
    pub profile: EntanglementProfile,
    /// Missing when fewer than three distances have a positive mean.
    pub fit: Option<DecayFit>,
}

#[derive(Clone, Debug)]
pub struct EnsembleOutput {
    pub records: Vec<EigenstateRecord>,
    pub curves: Vec<DisorderCurve>,
    pub profiles: Vec<WProfile>,
    pub rejected: usize,
    pub logs: Vec<String>,
}

impl EnsembleOutput {
    pub fn curve(&self, indicator: Indicator) -> Option<&DisorderCurve> {
        self.curves.iter().find(|c| c.indicator == indicator)
    }

    pub fn profile(&self, w: f64, measure: Measure) -> Option<&WProfile> {
        self.profiles.iter().find(|p| p.w == w && p.profile.measure == measure)
    }
}

struct StateIndicators {
    c_tot: Option<f64>,
    n_tot: Option<f64>,
    s_g: Option<f64>,
}

fn uses_ed(cfg: &RunConfig, spec: &ChainSpec) -> bool {
    match cfg.method {
        Method::Ed => true,
        Method::Simps => false,
        Method::Auto => spec.hilbert_dim().is_some_and(|d| d <= cfg.dense_cap),
    }
}

fn pair_measures(cfg: &RunConfig) -> Vec<Measure> {
    let mut m = Vec::new();
    if cfg.indicators.concurrence && cfg.model == LocalSpin::Half {
        m.push(Measure::Concurrence);
    }
    if cfg.indicators.negativity {
        m.push(Measure::Negativity);
    }
    m
}

struct Evaluator<'a> {
    cfg: &'a RunConfig,
    measures: Vec<Measure>,
    pairs: Vec<(usize, usize)>,
    profiles: Vec<ProfileAccumulator>,
}

impl<'a> Evaluator<'a> {
    fn new(cfg: &'a RunConfig) -> Self {
        let measures = pair_measures(cfg);
        let l = cfg.length;
        let pairs = if cfg.indicators.profiles {
            profile_pairs(l)
        } else {
            (0..l - 1).map(|i| (i, i + 1)).collect()
        };
        let profiles = if cfg.indicators.profiles {
            measures.iter().map(|&m| ProfileAccumulator::new(l, m)).collect()
        } else {
            Vec::new()
        };
        Self {
            cfg,
            measures,
            pairs,
            profiles,
        }
    }

    fn evaluate(
        &mut self,
        state: StateRef<'_>,
        mps: impl FnOnce() -> Result<MatrixProductState>,
    ) -> Result<StateIndicators> {
        let mut out = StateIndicators {
            c_tot: None,
            n_tot: None,
            s_g: None,
        };
        if !self.measures.is_empty() {
            let rdms = state.rdms(&self.pairs)?;
            let nn: Vec<&TwoSiteDensityMatrix> = rdms.iter().filter(|r| r.sites().1 == r.sites().0 + 1).collect();
            for (k, &m) in self.measures.iter().enumerate() {
                let mut total = 0.0;
                for r in &nn {
                    total += m.evaluate(r)?;
                }
                match m {
                    Measure::Concurrence => out.c_tot = Some(total),
                    Measure::Negativity => out.n_tot = Some(total),
                }
                if let Some(acc) = self.profiles.get_mut(k) {
                    for r in &rdms {
                        acc.add_value(r.sites().1 - r.sites().0, m.evaluate(r)?);
                    }
                }
            }
        }
        if self.cfg.indicators.geometric {
            let psi = mps()?;
            out.s_g = Some(geometric_entanglement_mps(&psi, &self.cfg.geometric)?.entropy);
        }
        Ok(out)
    }
}

fn base_record(cfg: &RunConfig, r: &DisorderRealization, method: &str, state_id: String) -> EigenstateRecord {
    EigenstateRecord {
        seed: r.spec.seed,
        w: r.spec.disorder,
        length: cfg.length,
        model: cfg.model.name().to_string(),
        method: method.to_string(),
        state_id,
        energy: 0.0,
        variance: 0.0,
        c_tot: None,
        n_tot: None,
        s_g: None,
        npr: None,
        accepted: true,
    }
}

fn run_ed(cfg: &RunConfig, r: &DisorderRealization, eval: &mut Evaluator<'_>) -> Result<Vec<EigenstateRecord>> {
    let h = build_dense_hamiltonian_capped(r, cfg.dense_cap)?;
    let spectrum = full_spectrum(&h)?;
    let slice = mid_spectrum_selection(&spectrum, cfg.n_states)?;
    let d = r.local_dim();
    let n = h.dim;
    let k = slice.pairs.len();
    let vecs = Mat::<C64>::from_fn(n, k, |i, j| slice.pairs[j].vector[i]);
    let hv = &h.entries * &vecs;
    let mut records = Vec::with_capacity(k);
    for (j, (pair, &index)) in slice.pairs.iter().zip(&slice.indices).enumerate() {
        let e = C64::new(pair.energy, 0.0);
        let variance: f64 = (0..n).map(|i| (hv[(i, j)] - e * vecs[(i, j)]).norm_sqr()).sum();
        let state = StateRef::Dense {
            amplitudes: &pair.vector,
            local_dim: d,
        };
        let ind = eval.evaluate(state, || dense_to_mps(&pair.vector, d, usize::MAX, GE_SVD_TOL))?;
        let mut rec = base_record(cfg, r, "ed", index.to_string());
        rec.energy = pair.energy;
        rec.variance = variance;
        rec.c_tot = ind.c_tot;
        rec.n_tot = ind.n_tot;
        rec.s_g = ind.s_g;
        rec.npr = cfg.indicators.npr.then(|| npr(&pair.vector, true));
        records.push(rec);
    }
    Ok(records)
}

fn run_simps(
    cfg: &RunConfig,
    r: &DisorderRealization,
    w_index: usize,
    realization: usize,
    eval: &mut Evaluator<'_>,
    logs: &mut Vec<String>,
) -> Result<Vec<EigenstateRecord>> {
    let h = build_hamiltonian_mpo(r);
    let targets = choose_targets(&r.spec, cfg.n_states, r.spec.seed, cfg.target_band);
    let mut records = Vec::with_capacity(targets.len());
    for (k, &lambda) in targets.iter().enumerate() {
        let o = build_shifted_mpo(r, lambda);
        let scfg = SimpsConfig {
            seed: target_seed(r.spec.seed, k),
            ..cfg.simps.clone()
        };
        let (psi, mut report) = simps_solve(&o, &h, &scfg)?;
        report.lambda = Some(lambda);
        if cfg.verbose {
            let line = serde_json::json!({
                "W": r.spec.disorder,
                "w_index": w_index,
                "realization": realization,
                "target": k,
                "report": report,
            });
            logs.push(line.to_string());
        }
        let mut rec = base_record(cfg, r, "simps", format!("t{k}:{lambda:.6}"));
        if let Some(last) = report.final_record() {
            rec.energy = last.energy;
            rec.variance = last.delta4;
        }
        rec.accepted = report.accepted;
        if report.accepted {
            let ind = eval.evaluate(StateRef::Mps(&psi), || Ok(psi.clone()))?;
            rec.c_tot = ind.c_tot;
            rec.n_tot = ind.n_tot;
            rec.s_g = ind.s_g;
        }
        records.push(rec);
    }
    Ok(records)
}

/// Runs one `(W, realization)` task.
pub fn run_task(cfg: &RunConfig, w_index: usize, realization: usize) -> Result<TaskOutput> {
    let seed = realization_seed(cfg.seed, w_index, realization);
    let spec = ChainSpec::new(cfg.length, cfg.model, cfg.w_list[w_index], seed)?.with_fields(cfg.field_distribution);
    let r = sample_disorder(&spec);
    let mut eval = Evaluator::new(cfg);
    let mut logs = Vec::new();
    let records = if uses_ed(cfg, &spec) {
        run_ed(cfg, &r, &mut eval)?
    } else {
        run_simps(cfg, &r, w_index, realization, &mut eval, &mut logs)?
    };
    Ok(TaskOutput {
        w_index,
        realization,
        seed,
        records,
        profiles: eval.profiles,
        logs,
    })
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn indicator_value(rec: &EigenstateRecord, ind: Indicator) -> Option<f64> {
    let per_site = (rec.length.max(2) - 1) as f64;
    match ind {
        Indicator::CTot => rec.c_tot,
        Indicator::NTot => rec.n_tot,
        Indicator::CAvgNn => rec.c_tot.map(|c| c / per_site),
        Indicator::NAvgNn => rec.n_tot.map(|n| n / per_site),
        Indicator::SG => rec.s_g,
        Indicator::Npr => rec.npr,
    }
}

/// Per-indicator curves over W from the accepted records. Indicators with no
/// values are skipped, as are W points without any value.
pub fn aggregate_curves(records: &[EigenstateRecord], length: usize, w_list: &[f64]) -> Result<Vec<DisorderCurve>> {
    let mut curves = Vec::new();
    for ind in Indicator::ALL {
        let mut points = Vec::new();
        for &w in w_list {
            let vals: Vec<f64> = records
                .iter()
                .filter(|r| r.accepted && r.w == w && r.length == length)
                .filter_map(|r| indicator_value(r, ind))
                .collect();
            if vals.is_empty() {
                continue;
            }
            let (mean, stderr) = mean_stderr(&vals);
            points.push(CurvePoint {
                w,
                mean,
                stderr,
                n: vals.len(),
            });
        }
        if !points.is_empty() {
            curves.push(DisorderCurve::new(length, ind, points)?);
        }
    }
    Ok(curves)
}

fn aggregate_profiles(cfg: &RunConfig, tasks: &[TaskOutput]) -> Vec<WProfile> {
    let mut out = Vec::new();
    if !cfg.indicators.profiles {
        return out;
    }
    for (wi, &w) in cfg.w_list.iter().enumerate() {
        for (k, &m) in pair_measures(cfg).iter().enumerate() {
            let mut acc = ProfileAccumulator::new(cfg.length, m);
            for t in tasks.iter().filter(|t| t.w_index == wi) {
                if let Some(p) = t.profiles.get(k) {
                    acc.merge(p);
                }
            }
            let profile = acc.finish();
            let fit = crate::entanglement::fit_entanglement_length(&profile).ok();
            out.push(WProfile {
                length: cfg.length,
                w,
                profile,
                fit,
            });
        }
    }
    out
}

fn assemble(cfg: &RunConfig, mut tasks: Vec<TaskOutput>) -> Result<EnsembleOutput> {
    tasks.sort_by_key(|t| (t.w_index, t.realization));
    let records: Vec<EigenstateRecord> = tasks.iter().flat_map(|t| t.records.iter().cloned()).collect();
    let rejected = records.iter().filter(|r| !r.accepted).count();
    let curves = aggregate_curves(&records, cfg.length, &cfg.w_list)?;
    let profiles = aggregate_profiles(cfg, &tasks);
    let logs = tasks.iter().flat_map(|t| t.logs.iter().cloned()).collect();
    Ok(EnsembleOutput {
        records,
        curves,
        profiles,
        rejected,
        logs,
    })
}

fn task_list(cfg: &RunConfig) -> Vec<(usize, usize)> {
    (0..cfg.w_list.len())
        .flat_map(|w| (0..cfg.n_realizations).map(move |r| (w, r)))
        .collect()
}

fn task_name(w_index: usize, realization: usize) -> String {
    format!("w{w_index}_r{realization}")
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    faer::set_global_parallelism(faer::Par::Seq);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Runs the ensemble in memory, without touching the file system.
pub fn run_ensemble_in_memory(cfg: &RunConfig) -> Result<EnsembleOutput> {
    cfg.validate()?;
    let tasks = task_list(cfg);
    let outputs = with_pool(cfg.workers, || {
        tasks
            .par_iter()
            .map(|&(w, r)| run_task(cfg, w, r))
            .collect::<Result<Vec<_>>>()
    })??;
    assemble(cfg, outputs)
}

#[derive(Serialize, Deserialize)]
struct RunStamp {
    fingerprint: String,
}

/// Runs the ensemble. With an output directory, each finished task is
/// checkpointed under `tasks/` and listed in `manifest.txt`; a rerun with the
/// same configuration skips listed tasks. Writes `records.csv`, `curves.csv`,
/// `profiles.csv` (when enabled), `convergence.jsonl` (when verbose) and
/// `config.txt`.
pub fn run_ensemble(cfg: &RunConfig) -> Result<EnsembleOutput> {
    let Some(dir) = cfg.out_dir.clone() else {
        return run_ensemble_in_memory(cfg);
    };
    cfg.validate()?;
    let task_dir = dir.join("tasks");
    fs::create_dir_all(&task_dir)?;
    check_stamp(&dir, cfg)?;

    let manifest_path = dir.join("manifest.txt");
    let done: BTreeSet<String> = match fs::read_to_string(&manifest_path) {
        Ok(text) => text
            .lines()
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeSet::new(),
        Err(e) => return Err(e.into()),
    };
    let mut outputs = Vec::new();
    let mut pending = Vec::new();
    for (w, r) in task_list(cfg) {
        let name = task_name(w, r);
        if done.contains(&name) {
            let path = task_dir.join(format!("{name}.json"));
            let text = fs::read_to_string(&path).map_err(|source| Error::File { path, source })?;
            outputs.push(serde_json::from_str::<TaskOutput>(&text)?);
        } else {
            pending.push((w, r));
        }
    }

    let manifest = Mutex::new(fs::OpenOptions::new().create(true).append(true).open(&manifest_path)?);
    let fresh = with_pool(cfg.workers, || {
        pending
            .par_iter()
            .map(|&(w, r)| {
                let out = run_task(cfg, w, r)?;
                let name = task_name(w, r);
                let tmp = task_dir.join(format!("{name}.json.tmp"));
                fs::write(&tmp, serde_json::to_string(&out)?)?;
                fs::rename(&tmp, task_dir.join(format!("{name}.json")))?;
                let mut m = manifest.lock().expect("manifest lock");
                writeln!(m, "{name}")?;
                m.flush()?;
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    outputs.extend(fresh);
    let result = assemble(cfg, outputs)?;
    write_outputs(&dir, cfg, &result)?;
    Ok(result)
}

fn check_stamp(dir: &Path, cfg: &RunConfig) -> Result<()> {
    let path = dir.join("run.json");
    let fingerprint = cfg.fingerprint();
    match fs::read_to_string(&path) {
        Ok(text) => {
            let stamp: RunStamp = serde_json::from_str(&text)?;
            if stamp.fingerprint != fingerprint {
                return Err(Error::Config(format!(
                    "{} holds checkpoints of a different configuration; use a fresh out_dir",
                    dir.display()
                )));
            }
            Ok(())
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            fs::write(&path, serde_json::to_string_pretty(&RunStamp { fingerprint })?)?;
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

fn write_outputs(dir: &Path, cfg: &RunConfig, result: &EnsembleOutput) -> Result<()> {
    write_records_csv(fs::File::create(dir.join("records.csv"))?, &result.records)?;
    crate::scaling::write_curves_csv(fs::File::create(dir.join("curves.csv"))?, &result.curves)?;
    if cfg.indicators.profiles {
        write_profiles_csv(fs::File::create(dir.join("profiles.csv"))?, &result.profiles)?;
    }
    if cfg.verbose {
        let mut f = std::io::BufWriter::new(fs::File::create(dir.join("convergence.jsonl"))?);
        for line in &result.logs {
            writeln!(f, "{line}")?;
        }
        f.flush()?;
    }
    fs::write(dir.join("config.txt"), cfg.to_text())?;
    Ok(())
}

/// Runs the ensemble with distance profiles switched on and returns them.
pub fn emit_profiles(cfg: &RunConfig) -> Result<Vec<WProfile>> {
    let mut cfg = cfg.clone();
    cfg.indicators.profiles = true;
    Ok(run_ensemble(&cfg)?.profiles)
}

#[cfg(test)]
mod tests;
