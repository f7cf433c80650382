//! Polynomial smoothing of indicator curves and finite-size scaling collapse.

use std::path::Path;

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Indicator {
    #[serde(rename = "C_avg_nn")]
    CAvgNn,
    #[serde(rename = "N_avg_nn")]
    NAvgNn,
    #[serde(rename = "S_G")]
    SG,
    #[serde(rename = "C_tot")]
    CTot,
    #[serde(rename = "N_tot")]
    NTot,
    #[serde(rename = "NPR")]
    Npr,
}

impl Indicator {
    pub const ALL: [Indicator; 6] = [
        Indicator::CAvgNn,
        Indicator::NAvgNn,
        Indicator::SG,
        Indicator::CTot,
        Indicator::NTot,
        Indicator::Npr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Indicator::CAvgNn => "C_avg_nn",
            Indicator::NAvgNn => "N_avg_nn",
            Indicator::SG => "S_G",
            Indicator::CTot => "C_tot",
            Indicator::NTot => "N_tot",
            Indicator::Npr => "NPR",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|i| i.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub w: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Ensemble means of one indicator against disorder strength at fixed `L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderCurve {
    pub length: usize,
    pub indicator: Indicator,
    pub points: Vec<CurvePoint>,
}

impl DisorderCurve {
    pub fn new(length: usize, indicator: Indicator, points: Vec<CurvePoint>) -> Result<Self> {
        if points.windows(2).any(|p| !(p[1].w > p[0].w)) {
            return Err(Error::InvalidSpec("curve W values must be strictly increasing".into()));
        }
        if points.iter().any(|p| p.n == 0) {
            return Err(Error::InvalidSpec("curve point with zero samples".into()));
        }
        Ok(Self {
            length,
            indicator,
            points,
        })
    }

    pub fn ws(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.w).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }
}

/// Least-squares polynomial, stored in the variable `t = (W - center) / half_range`
/// so that the data range maps to `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    /// Coefficients of `t^0, t^1, ...`.
    pub coefficients: Vec<f64>,
    pub center: f64,
    pub half_range: f64,
    pub degree: usize,
    /// `SSR / (n - m - 1)` for every candidate degree `m = 0..=m_max`.
    pub ratios: Vec<f64>,
    /// Degree selected on a random 80 % subset of the points.
    pub subset_degree: Option<usize>,
    /// Whether the subset degree is within one of `degree`.
    pub stable: bool,
    pub w_min: f64,
    pub w_max: f64,
}

impl PolyFit {
    fn t(&self, w: f64) -> f64 {
        (w - self.center) / self.half_range
    }

    pub fn eval(&self, w: f64) -> f64 {
        horner(&self.coefficients, self.t(w))
    }

    /// `d^order p / dW^order` evaluated analytically.
    pub fn derivative(&self, order: usize, w: f64) -> f64 {
        let dc = differentiate(&self.coefficients, order);
        horner(&dc, self.t(w)) / self.half_range.powi(order as i32)
    }

    /// Coefficients of `W^0, W^1, ...` in the original variable.
    pub fn coefficients_in_w(&self) -> Vec<f64> {
        // p(W) = sum_k c_k ((W - c) / h)^k, expanded binomially
        let n = self.coefficients.len();
        let mut out = vec![0.0; n];
        for (k, &ck) in self.coefficients.iter().enumerate() {
            let scale = ck / self.half_range.powi(k as i32);
            let mut binom = 1.0;
            for j in 0..=k {
                // term C(k, j) W^j (-c)^(k-j)
                out[j] += scale * binom * (-self.center).powi((k - j) as i32);
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
        }
        out
    }
}

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &x| acc * t + x)
}

fn differentiate(c: &[f64], order: usize) -> Vec<f64> {
    let mut c = c.to_vec();
    for _ in 0..order {
        if c.len() <= 1 {
            return vec![0.0];
        }
        c = c.iter().enumerate().skip(1).map(|(k, &x)| k as f64 * x).collect();
    }
    c
}

/// Least-squares coefficients (in `t`) and residual sum of squares.
fn lstsq(ts: &[f64], ys: &[f64], degree: usize) -> (Vec<f64>, f64) {
    let n = ts.len();
    let a = Mat::<f64>::from_fn(n, degree + 1, |i, k| ts[i].powi(k as i32));
    let rhs = Mat::<f64>::from_fn(n, 1, |i, _| ys[i]);
    let sol = a.qr().solve_lstsq(&rhs);
    let coef: Vec<f64> = (0..=degree).map(|k| sol[(k, 0)]).collect();
    let ssr = ts.iter().zip(ys).map(|(&t, &y)| (y - horner(&coef, t)).powi(2)).sum();
    (coef, ssr)
}

fn rescale(ws: &[f64]) -> (f64, f64, Vec<f64>) {
    let lo = ws.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let center = 0.5 * (lo + hi);
    let half = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
    let ts = ws.iter().map(|w| (w - center) / half).collect();
    (center, half, ts)
}

/// Degree choice: the smallest `m` whose ratio `SSR / (n - m - 1)` is within
/// 1 % of the minimum over `0..=m_max`. Ratios are floored at
/// `(1e-12 * rms(y))^2` so that exact fits tie instead of competing on
/// rounding noise.
fn select_degree(ts: &[f64], ys: &[f64], m_max: usize) -> (usize, Vec<f64>) {
    let n = ts.len();
    let rms = (ys.iter().map(|y| y * y).sum::<f64>() / n as f64).sqrt();
    let floor = (1e-12 * rms).powi(2).max(f64::MIN_POSITIVE);
    let ratios: Vec<f64> = (0..=m_max)
        .map(|m| {
            let (_, ssr) = lstsq(ts, ys, m);
            (ssr / (n - m - 1) as f64).max(floor)
        })
        .collect();
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let m = ratios
        .iter()
        .position(|&r| r <= min * 1.01)
        .expect("minimum is attained");
    (m, ratios)
}

/// Fits a polynomial of data-selected degree `m <= m_max`; needs at least
/// `m_max + 2` points. The choice is cross-checked on a random 80 % subset
/// drawn from `seed`.
pub fn fit_polynomial_select_degree(curve: &DisorderCurve, m_max: usize, seed: u64) -> Result<PolyFit> {
    let ws = curve.ws();
    let ys = curve.means();
    fit_points_select_degree(&ws, &ys, m_max, seed)
}

pub fn fit_points_select_degree(ws: &[f64], ys: &[f64], m_max: usize, seed: u64) -> Result<PolyFit> {
    let n = ws.len();
    if n < m_max + 2 {
        return Err(Error::InsufficientData(format!(
            "{n} points cannot support degrees up to {m_max}"
        )));
    }
    let (center, half_range, ts) = rescale(ws);
    let (degree, ratios) = select_degree(&ts, ys, m_max);
    let (coefficients, _) = lstsq(&ts, ys, degree);

    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let keep = ((n as f64) * 0.8).round() as usize;
    let subset_degree = if keep >= 2 {
        let mut chosen = idx[..keep].to_vec();
        chosen.sort_unstable();
        let sub_t: Vec<f64> = chosen.iter().map(|&i| ts[i]).collect();
        let sub_y: Vec<f64> = chosen.iter().map(|&i| ys[i]).collect();
        let sub_max = m_max.min(keep - 2);
        Some(select_degree(&sub_t, &sub_y, sub_max).0)
    } else {
        None
    };
    let stable = subset_degree.is_none_or(|m| m.abs_diff(degree) <= 1);
    Ok(PolyFit {
        coefficients,
        center,
        half_range,
        degree,
        ratios,
        subset_degree,
        stable,
        w_min: ws.iter().copied().fold(f64::INFINITY, f64::min),
        w_max: ws.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Fit of a fixed degree, without selection.
pub fn fit_polynomial(ws: &[f64], ys: &[f64], degree: usize) -> Result<PolyFit> {
    if ws.len() < degree + 1 {
        return Err(Error::InsufficientData(format!(
            "{} points for degree {degree}",
            ws.len()
        )));
    }
    let (center, half_range, ts) = rescale(ws);
    let (coefficients, ssr) = lstsq(&ts, ys, degree);
    let dof = ws.len().saturating_sub(degree + 1).max(1);
    Ok(PolyFit {
        coefficients,
        center,
        half_range,
        degree,
        ratios: vec![ssr / dof as f64],
        subset_degree: None,
        stable: true,
        w_min: ws.iter().copied().fold(f64::INFINITY, f64::min),
        w_max: ws.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Analytic derivative of the fit on `w_grid`. With `exclude_endpoints`,
/// grid points at or beyond the ends of the fitted data are dropped.
pub fn derivative_curve(fit: &PolyFit, order: usize, w_grid: &[f64], exclude_endpoints: bool) -> Vec<(f64, f64)> {
    w_grid
        .iter()
        .filter(|&&w| !exclude_endpoints || (w > fit.w_min && w < fit.w_max))
        .map(|&w| (w, fit.derivative(order, w)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseParams {
    pub a: f64,
    pub b: f64,
    pub wc: f64,
    pub derivative_order: usize,
}

impl CollapseParams {
    pub fn new(a: f64, b: f64, wc: f64, derivative_order: usize) -> Result<Self> {
        if !(1..=2).contains(&derivative_order) {
            return Err(Error::InvalidSpec(format!(
                "derivative order must be 1 or 2, got {derivative_order}"
            )));
        }
        Ok(Self {
            a,
            b,
            wc,
            derivative_order,
        })
    }
}

/// Points `(W, value)` or, after transformation, `(x, y)` for one chain length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingCurve {
    pub length: usize,
    pub points: Vec<(f64, f64)>,
}

/// `x = L^b (W - W_c)`, `y = L^-a * value`.
pub fn collapse_transform(curves: &[ScalingCurve], params: &CollapseParams) -> Vec<ScalingCurve> {
    curves
        .iter()
        .map(|c| {
            let l = c.length as f64;
            let (sx, sy) = (l.powf(params.b), l.powf(-params.a));
            ScalingCurve {
                length: c.length,
                points: c.points.iter().map(|&(w, v)| (sx * (w - params.wc), sy * v)).collect(),
            }
        })
        .collect()
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let k = points.partition_point(|p| p.0 < x);
    if k == 0 {
        return points[0].1;
    }
    if k == points.len() {
        return points[k - 1].1;
    }
    let (x0, y0) = points[k - 1];
    let (x1, y1) = points[k];
    if x1 == x {
        return y1;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Mean across-curve variance of `y` on the common `x` range, divided by the
/// variance of all interpolated values; 0 means a perfect collapse.
///
/// The grid is the union of the curves' own `x` values inside the overlap,
/// and curves are interpolated linearly between their points.
pub fn collapse_quality(curves: &[ScalingCurve]) -> Result<f64> {
    if curves.is_empty() || curves.iter().any(|c| c.points.is_empty()) {
        return Err(Error::InsufficientData("collapse needs nonempty curves".into()));
    }
    let sorted: Vec<Vec<(f64, f64)>> = curves
        .iter()
        .map(|c| {
            let mut p = c.points.clone();
            p.sort_by(|a, b| a.0.total_cmp(&b.0));
            p
        })
        .collect();
    if sorted.len() == 1 {
        return Ok(0.0);
    }
    let lo = sorted.iter().map(|p| p[0].0).fold(f64::NEG_INFINITY, f64::max);
    let hi = sorted.iter().map(|p| p[p.len() - 1].0).fold(f64::INFINITY, f64::min);
    if !(lo <= hi) {
        return Err(Error::NoOverlap);
    }
    let mut grid: Vec<f64> = sorted
        .iter()
        .flat_map(|p| p.iter().map(|q| q.0))
        .filter(|&x| x >= lo && x <= hi)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    if grid.is_empty() {
        return Err(Error::NoOverlap);
    }
    let mut all = Vec::with_capacity(grid.len() * sorted.len());
    let mut across = 0.0;
    for &x in &grid {
        let ys: Vec<f64> = sorted.iter().map(|p| interpolate(p, x)).collect();
        across += sample_variance(&ys);
        all.extend(ys);
    }
    across /= grid.len() as f64;
    let total = if all.len() > 1 { sample_variance(&all) } else { 0.0 };
    if total <= 0.0 {
        return Ok(0.0);
    }
    Ok(across / total)
}

/// Inclusive arithmetic range `start, start + step, ..., stop`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl ParamRange {
    pub fn single(v: f64) -> Self {
        Self {
            start: v,
            stop: v,
            step: 1.0,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.stop < self.start || !(self.step > 0.0) {
            return Vec::new();
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }

    /// Parses `start:stop:step` or a single value.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number `{x}` in range `{s}`")))
        };
        match parts.as_slice() {
            [v] => Ok(Self::single(num(v)?)),
            [a, b, c] => {
                let r = Self {
                    start: num(a)?,
                    stop: num(b)?,
                    step: num(c)?,
                };
                if !(r.step > 0.0) {
                    return Err(Error::Config(format!("range `{s}` needs a positive step")));
                }
                Ok(r)
            }
            _ => Err(Error::Config(format!("range `{s}` is not start:stop:step"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseGrid {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub wc: Vec<f64>,
}

impl CollapseGrid {
    pub fn from_ranges(a: ParamRange, b: ParamRange, wc: ParamRange) -> Self {
        Self {
            a: a.values(),
            b: b.values(),
            wc: wc.values(),
        }
    }

    /// Parses `a=lo:hi:step,b=...,wc=...`.
    pub fn parse(s: &str) -> Result<Self> {
        let (mut a, mut b, mut wc) = (None, None, None);
        for item in s.split(',').filter(|x| !x.trim().is_empty()) {
            let (key, val) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("grid entry `{item}` is not key=range")))?;
            let range = ParamRange::parse(val)?;
            match key.trim() {
                "a" => a = Some(range),
                "b" => b = Some(range),
                "wc" | "w_c" | "Wc" => wc = Some(range),
                other => return Err(Error::UnknownKey(other.to_string())),
            }
        }
        let need = |r: Option<ParamRange>, k: &str| r.ok_or_else(|| Error::Config(format!("grid is missing `{k}`")));
        Ok(Self::from_ranges(need(a, "a")?, need(b, "b")?, need(wc, "wc")?))
    }

    pub fn len(&self) -> usize {
        self.a.len() * self.b.len() * self.wc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedCollapse {
    pub params: CollapseParams,
    pub quality: f64,
}

/// Evaluates the collapse quality at every grid point and ranks them, best
/// first. Ties go to the smaller `|a| + |b|`. Grid points without a common
/// x-range are dropped.
pub fn grid_search_collapse(
    curves: &[ScalingCurve],
    grid: &CollapseGrid,
    derivative_order: usize,
) -> Result<Vec<RankedCollapse>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut points = Vec::with_capacity(grid.len());
    for &a in &grid.a {
        for &b in &grid.b {
            for &wc in &grid.wc {
                points.push(CollapseParams::new(a, b, wc, derivative_order)?);
            }
        }
    }
    let evaluated: Vec<Option<RankedCollapse>> = points
        .par_iter()
        .map(|p| match collapse_quality(&collapse_transform(curves, p)) {
            Ok(q) => Ok(Some(RankedCollapse { params: *p, quality: q })),
            Err(Error::NoOverlap) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let mut ranked: Vec<RankedCollapse> = evaluated.into_iter().flatten().collect();
    if ranked.is_empty() {
        return Err(Error::NoOverlap);
    }
    ranked.sort_by(|x, y| {
        x.quality
            .total_cmp(&y.quality)
            .then((x.params.a.abs() + x.params.b.abs()).total_cmp(&(y.params.a.abs() + y.params.b.abs())))
            .then(x.params.a.total_cmp(&y.params.a))
            .then(x.params.b.total_cmp(&y.params.b))
            .then(x.params.wc.total_cmp(&y.params.wc))
    });
    Ok(ranked)
}

/// Smooths each curve with a degree-selected polynomial and differentiates
/// it on the curve's own W values, endpoints excluded.
pub fn derivative_curves(curves: &[DisorderCurve], order: usize, m_max: usize, seed: u64) -> Result<Vec<ScalingCurve>> {
    curves
        .iter()
        .map(|c| {
            let m = m_max.min(c.points.len().saturating_sub(2));
            let fit = fit_polynomial_select_degree(c, m, seed)?;
            Ok(ScalingCurve {
                length: c.length,
                points: derivative_curve(&fit, order, &c.ws(), true),
            })
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveRow {
    #[serde(rename = "L")]
    length: usize,
    indicator: Indicator,
    #[serde(rename = "W")]
    w: f64,
    mean: f64,
    stderr: f64,
    n: usize,
}

pub fn write_curves_csv<W: std::io::Write>(out: W, curves: &[DisorderCurve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in curves {
        for p in &c.points {
            w.serialize(CurveRow {
                length: c.length,
                indicator: c.indicator,
                w: p.w,
                mean: p.mean,
                stderr: p.stderr,
                n: p.n,
            })?;
        }
    }
    if curves.iter().all(|c| c.points.is_empty()) {
        w.write_record(["L", "indicator", "W", "mean", "stderr", "n"])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads curves written by [`write_curves_csv`], grouped by `(L, indicator)`
/// and sorted by W.
pub fn read_curves_csv<R: std::io::Read>(input: R) -> Result<Vec<DisorderCurve>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut groups: std::collections::BTreeMap<(usize, Indicator), Vec<CurvePoint>> = Default::default();
    for row in rdr.deserialize() {
        let row: CurveRow = row?;
        groups.entry((row.length, row.indicator)).or_default().push(CurvePoint {
            w: row.w,
            mean: row.mean,
            stderr: row.stderr,
            n: row.n,
        });
    }
    groups
        .into_iter()
        .map(|((length, indicator), mut points)| {
            points.sort_by(|a, b| a.w.total_cmp(&b.w));
            DisorderCurve::new(length, indicator, points)
        })
        .collect()
}

pub fn load_curves(path: &Path) -> Result<Vec<DisorderCurve>> {
    let file = std::fs::File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    read_curves_csv(file)
}

#[cfg(test)]
mod tests;
