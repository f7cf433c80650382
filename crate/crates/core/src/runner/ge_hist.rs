//! Geometric-entanglement distributions of ED and SIMPS eigenstates drawn
//! from the same disorder realizations.

use std::fs;

use super::{run_ensemble_in_memory, write_histogram_csv, write_records_csv, Method, RunConfig};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub ed: usize,
    pub simps: usize,
}

#[derive(Clone, Debug)]
pub struct GeHistogram {
    /// Two-sample Kolmogorov-Smirnov statistic.
    pub ks: f64,
    pub ed: Vec<f64>,
    pub simps: Vec<f64>,
    pub simps_rejected: usize,
    pub bins: Vec<HistogramBin>,
}

/// `sup |F_a - F_b|` over the pooled sample.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData(
            "KS statistic needs two nonempty samples".into(),
        ));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

fn histogram(ed: &[f64], simps: &[f64], n_bins: usize) -> Vec<HistogramBin> {
    let hi = ed.iter().chain(simps).copied().fold(0.0f64, f64::max);
    let width = if hi > 0.0 { hi / n_bins as f64 } else { 1.0 };
    let mut bins: Vec<HistogramBin> = (0..n_bins)
        .map(|k| HistogramBin {
            lo: k as f64 * width,
            hi: (k + 1) as f64 * width,
            ed: 0,
            simps: 0,
        })
        .collect();
    let slot = |x: f64| ((x / width) as usize).min(n_bins - 1);
    for &x in ed {
        bins[slot(x)].ed += 1;
    }
    for &x in simps {
        bins[slot(x)].simps += 1;
    }
    bins
}

/// Runs the configuration once with ED (over `ed_realizations` realizations,
/// defaulting to the configured count) and once with SIMPS, and compares the
/// S_G values of the accepted states. Other indicators are switched off.
/// With an output directory, writes `ge_hist.csv`, `records_ed.csv` and
/// `records_simps.csv`.
pub fn ge_hist(cfg: &RunConfig, ed_realizations: Option<usize>, n_bins: usize) -> Result<GeHistogram> {
    if n_bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let mut base = cfg.clone();
    base.indicators.concurrence = false;
    base.indicators.negativity = false;
    base.indicators.npr = false;
    base.indicators.profiles = false;
    base.indicators.geometric = true;
    base.out_dir = None;

    let ed_cfg = RunConfig {
        method: Method::Ed,
        n_realizations: ed_realizations.unwrap_or(cfg.n_realizations),
        ..base.clone()
    };
    let simps_cfg = RunConfig {
        method: Method::Simps,
        ..base
    };
    let ed_run = run_ensemble_in_memory(&ed_cfg)?;
    let simps_run = run_ensemble_in_memory(&simps_cfg)?;
    let ed: Vec<f64> = ed_run.records.iter().filter_map(|r| r.s_g).collect();
    let simps: Vec<f64> = simps_run
        .records
        .iter()
        .filter(|r| r.accepted)
        .filter_map(|r| r.s_g)
        .collect();
    let ks = ks_statistic(&ed, &simps)?;
    let bins = histogram(&ed, &simps, n_bins);
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir)?;
        write_histogram_csv(fs::File::create(dir.join("ge_hist.csv"))?, &bins)?;
        write_records_csv(fs::File::create(dir.join("records_ed.csv"))?, &ed_run.records)?;
        write_records_csv(fs::File::create(dir.join("records_simps.csv"))?, &simps_run.records)?;
    }
    Ok(GeHistogram {
        ks,
        ed,
        simps,
        simps_rejected: simps_run.rejected,
        bins,
    })
}
