//! Flat `key = value` run configuration.
//!
//! Precedence is built-in defaults, then the config file, then command-line
//! flags. Blank lines and `#` comments are ignored.
//!
//! | key | meaning |
//! |-----|---------|
//! | `model` | `two-level`, `two-level-exp`, `three-level-case1`, `three-level-case2` |
//! | `k` | smoothing scale, expanded to the model's standard pattern |
//! | `k1`, `k2`, `k3` | per-coupling smoothing (three-level models) |
//! | `n` | smoothing order |
//! | `E0`..`E3` | energies: `E0, E1` for two-level, `E1, E2, E3` for three-level |
//! | `prefactor` | `midpoint-normalized` or `as-printed` |
//! | `tmin`, `tmax`, `ppd` | log-spaced `T` grid |
//! | `tau0`, `samples`, `averaging` | typical-error window (`averaging` is `rms` or `mean`) |
//! | `rtol`, `atol` | integrator tolerances |
//! | `s_start`, `s_end` | scaled-time window |
//! | `workers` | worker threads, 0 for all cores |
//! | `out`, `format` | output path and `csv` or `json` |
//! | `cache`, `cache_dir` | result cache switch and location |

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamiltonian::{ModelKind, ModelSpec};
use crate::metrics::Averaging;
use crate::schedule::Prefactor;
use crate::sweep::{SweepConfig, TGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },

    #[error("`{key}` does not apply to model {model}")]
    NotApplicable { key: String, model: ModelKind },

    #[error("cannot read {path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

fn parse_prefactor(s: &str) -> std::result::Result<Prefactor, String> {
    match s {
        "as-printed" => Ok(Prefactor::AsPrinted),
        "midpoint-normalized" => Ok(Prefactor::MidpointNormalized),
        other => Err(format!(
            "unknown prefactor `{other}` (expected as-printed or midpoint-normalized)"
        )),
    }
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(format!("`{other}` is not a boolean")),
    }
}

/// Every setting as an optional override.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub model: Option<ModelKind>,
    pub k: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub k3: Option<f64>,
    pub n: Option<u32>,
    pub energies: [Option<f64>; 4],
    pub prefactor: Option<Prefactor>,
    pub tmin: Option<f64>,
    pub tmax: Option<f64>,
    pub ppd: Option<u32>,
    pub tau0: Option<f64>,
    pub samples: Option<usize>,
    pub averaging: Option<Averaging>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub s_start: Option<f64>,
    pub s_end: Option<f64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub cache: Option<bool>,
    pub cache_dir: Option<PathBuf>,
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: raw.to_string(),
        reason: e.to_string(),
    })
}

fn with<T>(key: &str, raw: &str, f: fn(&str) -> std::result::Result<T, String>) -> Result<T> {
    f(raw).map_err(|reason| ConfigError::BadValue {
        key: key.to_string(),
        value: raw.to_string(),
        reason,
    })
}

impl Overrides {
    pub fn parse(text: &str) -> Result<Self> {
        let mut o = Overrides::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, val)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                });
            };
            let (key, val) = (key.trim(), val.trim());
            if !o.set(key, val)? {
                return Err(ConfigError::UnknownKey {
                    line: i + 1,
                    key: key.to_string(),
                });
            }
        }
        Ok(o)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Set one key; returns `false` for unknown keys.
    pub fn set(&mut self, key: &str, v: &str) -> Result<bool> {
        match key {
            "model" => self.model = Some(value(key, v)?),
            "k" => self.k = Some(value(key, v)?),
            "k1" => self.k1 = Some(value(key, v)?),
            "k2" => self.k2 = Some(value(key, v)?),
            "k3" => self.k3 = Some(value(key, v)?),
            "n" => self.n = Some(value(key, v)?),
            "E0" => self.energies[0] = Some(value(key, v)?),
            "E1" => self.energies[1] = Some(value(key, v)?),
            "E2" => self.energies[2] = Some(value(key, v)?),
            "E3" => self.energies[3] = Some(value(key, v)?),
            "prefactor" => self.prefactor = Some(with(key, v, parse_prefactor)?),
            "tmin" => self.tmin = Some(value(key, v)?),
            "tmax" => self.tmax = Some(value(key, v)?),
            "ppd" => self.ppd = Some(value(key, v)?),
            "tau0" => self.tau0 = Some(value(key, v)?),
            "samples" => self.samples = Some(value(key, v)?),
            "averaging" => self.averaging = Some(value(key, v)?),
            "rtol" => self.rtol = Some(value(key, v)?),
            "atol" => self.atol = Some(value(key, v)?),
            "s_start" => self.s_start = Some(value(key, v)?),
            "s_end" => self.s_end = Some(value(key, v)?),
            "workers" => self.workers = Some(value(key, v)?),
            "out" => self.out = Some(PathBuf::from(v)),
            "format" => self.format = Some(value(key, v)?),
            "cache" => self.cache = Some(with(key, v, parse_bool)?),
            "cache_dir" => self.cache_dir = Some(PathBuf::from(v)),
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(self, other: Overrides) -> Overrides {
        fn pick<T>(a: Option<T>, b: Option<T>) -> Option<T> {
            b.or(a)
        }
        let mut energies = self.energies;
        for (e, o) in energies.iter_mut().zip(other.energies) {
            *e = o.or(*e);
        }
        Overrides {
            model: pick(self.model, other.model),
            k: pick(self.k, other.k),
            k1: pick(self.k1, other.k1),
            k2: pick(self.k2, other.k2),
            k3: pick(self.k3, other.k3),
            n: pick(self.n, other.n),
            energies,
            prefactor: pick(self.prefactor, other.prefactor),
            tmin: pick(self.tmin, other.tmin),
            tmax: pick(self.tmax, other.tmax),
            ppd: pick(self.ppd, other.ppd),
            tau0: pick(self.tau0, other.tau0),
            samples: pick(self.samples, other.samples),
            averaging: pick(self.averaging, other.averaging),
            rtol: pick(self.rtol, other.rtol),
            atol: pick(self.atol, other.atol),
            s_start: pick(self.s_start, other.s_start),
            s_end: pick(self.s_end, other.s_end),
            workers: pick(self.workers, other.workers),
            out: pick(self.out, other.out),
            format: pick(self.format, other.format),
            cache: pick(self.cache, other.cache),
            cache_dir: pick(self.cache_dir, other.cache_dir),
        }
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let model = self.model.unwrap_or(ModelKind::TwoLevel);
        let mut spec = ModelSpec::new(model, self.k.unwrap_or(1e-3));
        let not_for = |key: &str| ConfigError::NotApplicable {
            key: key.to_string(),
            model,
        };
        if model.is_three_level() {
            for (slot, v) in [self.k1, self.k2, self.k3].into_iter().enumerate() {
                if let Some(v) = v {
                    spec.k[slot] = v;
                }
            }
            if self.energies[0].is_some() {
                return Err(not_for("E0"));
            }
            for (slot, v) in self.energies[1..].iter().enumerate() {
                if let Some(v) = v {
                    spec.energies[slot] = *v;
                }
            }
        } else {
            if let Some(k1) = self.k1 {
                spec.k[0] = k1;
            }
            if self.k2.is_some() {
                return Err(not_for("k2"));
            }
            if self.k3.is_some() {
                return Err(not_for("k3"));
            }
            if self.energies[2].is_some() {
                return Err(not_for("E2"));
            }
            if self.energies[3].is_some() {
                return Err(not_for("E3"));
            }
            for (slot, v) in self.energies[..2].iter().enumerate() {
                if let Some(v) = v {
                    spec.energies[slot] = *v;
                }
            }
        }
        if let Some(n) = self.n {
            spec.order = n;
        }
        if let Some(p) = self.prefactor {
            spec.prefactor = p;
        }
        Ok(spec)
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let spec = self.model_spec()?;
        let mut cfg = SweepConfig::new(spec);
        let grid = TGrid::default();
        cfg.grid = TGrid {
            t_min: self.tmin.unwrap_or(grid.t_min),
            t_max: self.tmax.unwrap_or(grid.t_max),
            points_per_decade: self.ppd.unwrap_or(grid.points_per_decade),
        };
        if let Some(v) = self.tau0 {
            cfg.typical.tau0 = v;
        }
        if let Some(v) = self.samples {
            cfg.typical.samples = v;
        }
        if let Some(v) = self.averaging {
            cfg.typical.averaging = v;
        }
        if let Some(v) = self.rtol {
            cfg.rtol = v;
        }
        if let Some(v) = self.atol {
            cfg.atol = v;
        }
        if self.s_start.is_some() || self.s_end.is_some() {
            let (a, b) = cfg.window();
            cfg.window = Some((self.s_start.unwrap_or(a), self.s_end.unwrap_or(b)));
        }
        cfg.workers = self.workers.unwrap_or(0);
        Ok(cfg)
    }
}
