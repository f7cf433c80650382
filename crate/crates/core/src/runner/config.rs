//! Run configuration: a flat `key = value` text format, with every key also
//! settable from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::entanglement::GeometricOptions;
use crate::error::{Error, Result};
use crate::model::{FieldDistribution, LocalSpin, DEFAULT_DENSE_CAP};
use crate::simps::SimpsConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ed,
    Simps,
    /// ED when the Hilbert space fits under the dense cap, SIMPS otherwise.
    Auto,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ed => "ed",
            Method::Simps => "simps",
            Method::Auto => "auto",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ed" => Some(Method::Ed),
            "simps" => Some(Method::Simps),
            "auto" => Some(Method::Auto),
            _ => None,
        }
    }
}

/// Which indicators to evaluate per state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndicatorToggles {
    pub concurrence: bool,
    pub negativity: bool,
    pub geometric: bool,
    pub npr: bool,
    /// Distance profiles of the pair measures, aggregated per W.
    pub profiles: bool,
}

impl Default for IndicatorToggles {
    fn default() -> Self {
        Self {
            concurrence: true,
            negativity: true,
            geometric: true,
            npr: true,
            profiles: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: LocalSpin,
    pub length: usize,
    pub field_distribution: FieldDistribution,
    /// Disorder strengths, strictly increasing.
    pub w_list: Vec<f64>,
    pub n_realizations: usize,
    /// States per realization: the ED mid-spectrum slice size or the number
    /// of SIMPS targets.
    pub n_states: usize,
    pub method: Method,
    pub dense_cap: usize,
    pub simps: SimpsConfig,
    /// Half-width of the SIMPS target band as a fraction of `0.5 W sqrt(L)`.
    pub target_band: f64,
    pub geometric: GeometricOptions,
    pub indicators: IndicatorToggles,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    pub workers: usize,
    pub verbose: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: LocalSpin::Half,
            length: 8,
            field_distribution: FieldDistribution::Symmetric,
            w_list: vec![1.0, 6.0],
            n_realizations: 50,
            n_states: 10,
            method: Method::Auto,
            dense_cap: DEFAULT_DENSE_CAP,
            simps: SimpsConfig::default(),
            target_band: 0.1,
            geometric: GeometricOptions::default(),
            indicators: IndicatorToggles::default(),
            out_dir: None,
            seed: 1,
            workers: 1,
            verbose: false,
        }
    }
}

/// Every accepted key, in the order used for canonical output.
pub const CONFIG_KEYS: &[&str] = &[
    "model",
    "length",
    "field_distribution",
    "w_list",
    "n_realizations",
    "n_states",
    "method",
    "dense_cap",
    "bond_dim",
    "eps1",
    "eps2",
    "eps3",
    "eps4",
    "eps5",
    "delta1_floor",
    "max_outer",
    "max_sweeps",
    "target_band",
    "ge_restarts",
    "ge_tol",
    "ge_max_sweeps",
    "log_base",
    "concurrence",
    "negativity",
    "geometric",
    "npr",
    "profiles",
    "out_dir",
    "seed",
    "workers",
    "verbose",
];

/// Keys that do not change record content and are left out of the
/// checkpoint fingerprint.
const SCHEDULING_KEYS: &[&str] = &["out_dir", "workers", "verbose"];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected a boolean, got `{value}`"))),
    }
}

/// `1, 2.5, 6` or `start:stop:step` (inclusive).
pub fn parse_w_list(value: &str) -> Result<Vec<f64>> {
    let value = value.trim();
    if value.contains(':') {
        let range = crate::scaling::ParamRange::parse(value)?;
        let ws = range.values();
        if ws.is_empty() {
            return Err(Error::Config(format!("w_list range `{value}` is empty")));
        }
        return Ok(ws);
    }
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num("w_list", s))
        .collect()
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Splits config text into `(key, value)` pairs. Blank lines and `#`
/// comments are skipped.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        match key.as_str() {
            "model" => {
                self.model = LocalSpin::parse(value).ok_or_else(|| Error::Config(format!("unknown model `{value}`")))?
            }
            "length" => self.length = parse_num(&key, value)?,
            "field_distribution" => {
                self.field_distribution = FieldDistribution::parse(value)
                    .ok_or_else(|| Error::Config(format!("unknown field distribution `{value}`")))?
            }
            "w_list" => self.w_list = parse_w_list(value)?,
            "n_realizations" => self.n_realizations = parse_num(&key, value)?,
            "n_states" => self.n_states = parse_num(&key, value)?,
            "method" => {
                self.method = Method::parse(value).ok_or_else(|| Error::Config(format!("unknown method `{value}`")))?
            }
            "dense_cap" => self.dense_cap = parse_num(&key, value)?,
            "bond_dim" => self.simps.bond_dim = parse_num(&key, value)?,
            "eps1" => self.simps.eps1 = parse_num(&key, value)?,
            "eps2" => self.simps.eps2 = parse_num(&key, value)?,
            "eps3" => self.simps.eps3 = parse_num(&key, value)?,
            "eps4" => self.simps.eps4 = parse_num(&key, value)?,
            "eps5" => self.simps.eps5 = parse_num(&key, value)?,
            "delta1_floor" => self.simps.delta1_floor = parse_num(&key, value)?,
            "max_outer" => self.simps.max_outer = parse_num(&key, value)?,
            "max_sweeps" => self.simps.max_sweeps = parse_num(&key, value)?,
            "target_band" => self.target_band = parse_num(&key, value)?,
            "ge_restarts" => self.geometric.restarts = parse_num(&key, value)?,
            "ge_tol" => self.geometric.tol = parse_num(&key, value)?,
            "ge_max_sweeps" => self.geometric.max_sweeps = parse_num(&key, value)?,
            "log_base" => {
                self.geometric.log_base = match value.trim() {
                    "e" => std::f64::consts::E,
                    v => parse_num(&key, v)?,
                }
            }
            "concurrence" => self.indicators.concurrence = parse_bool(&key, value)?,
            "negativity" => self.indicators.negativity = parse_bool(&key, value)?,
            "geometric" => self.indicators.geometric = parse_bool(&key, value)?,
            "npr" => self.indicators.npr = parse_bool(&key, value)?,
            "profiles" => self.indicators.profiles = parse_bool(&key, value)?,
            "out_dir" => {
                self.out_dir = match value.trim() {
                    "" => None,
                    v => Some(PathBuf::from(v)),
                }
            }
            "seed" => self.seed = parse_num(&key, value)?,
            "workers" => self.workers = parse_num(&key, value)?,
            "verbose" => self.verbose = parse_bool(&key, value)?,
            _ => return Err(Error::UnknownKey(key)),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let v = match key {
            "model" => self.model.name().to_string(),
            "length" => self.length.to_string(),
            "field_distribution" => self.field_distribution.name().to_string(),
            "w_list" => self.w_list.iter().map(|w| fmt_f64(*w)).collect::<Vec<_>>().join(","),
            "n_realizations" => self.n_realizations.to_string(),
            "n_states" => self.n_states.to_string(),
            "method" => self.method.name().to_string(),
            "dense_cap" => self.dense_cap.to_string(),
            "bond_dim" => self.simps.bond_dim.to_string(),
            "eps1" => fmt_f64(self.simps.eps1),
            "eps2" => fmt_f64(self.simps.eps2),
            "eps3" => fmt_f64(self.simps.eps3),
            "eps4" => fmt_f64(self.simps.eps4),
            "eps5" => fmt_f64(self.simps.eps5),
            "delta1_floor" => fmt_f64(self.simps.delta1_floor),
            "max_outer" => self.simps.max_outer.to_string(),
            "max_sweeps" => self.simps.max_sweeps.to_string(),
            "target_band" => fmt_f64(self.target_band),
            "ge_restarts" => self.geometric.restarts.to_string(),
            "ge_tol" => fmt_f64(self.geometric.tol),
            "ge_max_sweeps" => self.geometric.max_sweeps.to_string(),
            "log_base" => fmt_f64(self.geometric.log_base),
            "concurrence" => self.indicators.concurrence.to_string(),
            "negativity" => self.indicators.negativity.to_string(),
            "geometric" => self.indicators.geometric.to_string(),
            "npr" => self.indicators.npr.to_string(),
            "profiles" => self.indicators.profiles.to_string(),
            "out_dir" => self
                .out_dir
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            "seed" => self.seed.to_string(),
            "workers" => self.workers.to_string(),
            "verbose" => self.verbose.to_string(),
            _ => return None,
        };
        Some(v)
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let pairs = parse_config_text(text)?;
        Self::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }

    /// Applies `--key value` / `--key=value` pairs; hyphens in keys map to
    /// underscores. A bare `--flag` followed by another flag (or nothing)
    /// sets a boolean key to true.
    pub fn apply_overrides(&mut self, args: &[String]) -> Result<()> {
        let mut i = 0;
        while i < args.len() {
            let arg = &args[i];
            let Some(stripped) = arg.strip_prefix("--") else {
                return Err(Error::Config(format!("expected `--key value`, got `{arg}`")));
            };
            let (key, value) = match stripped.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => match args.get(i + 1) {
                    Some(v) if !v.starts_with("--") => {
                        i += 1;
                        (stripped.to_string(), v.clone())
                    }
                    _ => (stripped.to_string(), "true".to_string()),
                },
            };
            self.set(&key, &value)?;
            i += 1;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(Error::Config(format!("length must be at least 2, got {}", self.length)));
        }
        if self.n_realizations == 0 {
            return Err(Error::Config("n_realizations must be at least 1".into()));
        }
        if self.n_states == 0 {
            return Err(Error::Config("n_states must be at least 1".into()));
        }
        if self.w_list.is_empty() {
            return Err(Error::Config("w_list is empty".into()));
        }
        if self.w_list.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("w_list entries must be finite and nonnegative".into()));
        }
        if self.w_list.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Config("w_list must be strictly increasing".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if !(self.target_band >= 0.0 && self.target_band.is_finite()) {
            return Err(Error::Config(format!(
                "target_band must be nonnegative, got {}",
                self.target_band
            )));
        }
        if self.geometric.restarts == 0 || self.geometric.max_sweeps == 0 {
            return Err(Error::Config("ge_restarts and ge_max_sweeps must be positive".into()));
        }
        if !(self.geometric.tol > 0.0) {
            return Err(Error::Config("ge_tol must be positive".into()));
        }
        let b = self.geometric.log_base;
        if !(b > 0.0 && b.is_finite() && b != 1.0) {
            return Err(Error::Config(format!("log_base must be positive and not 1, got {b}")));
        }
        self.simps.validate()
    }

    /// Canonical `key = value` lines for every key.
    pub fn to_text(&self) -> String {
        CONFIG_KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", self.get(k).unwrap_or_default()))
            .collect()
    }

    /// Canonical text of the keys that determine record content.
    pub fn fingerprint(&self) -> String {
        CONFIG_KEYS
            .iter()
            .filter(|k| !SCHEDULING_KEYS.contains(k))
            .map(|k| format!("{k}={}", self.get(k).unwrap_or_default()))
            .collect::<Vec<_>>()
            .join(";")
    }
}
