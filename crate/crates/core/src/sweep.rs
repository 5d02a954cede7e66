//! Parameter sweeps over the total evolution time, with on-disk caching and
//! CSV/JSON output.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::evolution::EvolutionConfig;
use crate::hamiltonian::{build, HamiltonianError, ModelKind, ModelSpec};
use crate::metrics::{
    self, local_scaling_exponent, reference_scaling_estimate, switching_estimate, MetricsError,
    ReferenceEstimate, SwitchingEstimate, TypicalErrorConfig,
};
use crate::schedule::Prefactor;

/// Bumped whenever the cached record layout or the numerics change.
pub const CACHE_SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 10] = [
    "T",
    "eps",
    "eps_bar_T",
    "eps_bar_1",
    "eps_bar_2",
    "ratio1",
    "ratio2",
    "epsT2",
    "slope",
    "norm_drift",
];

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),

    #[error(transparent)]
    Metrics(#[from] MetricsError),

    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: io::Error },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

pub type Result<T> = std::result::Result<T, SweepError>;

/// Log-spaced grid that contains both end points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub points_per_decade: u32,
}

impl Default for TGrid {
    fn default() -> Self {
        Self {
            t_min: 10.0,
            t_max: 3e4,
            points_per_decade: 8,
        }
    }
}

impl TGrid {
    /// Grid values. The number of intervals is `ppd * log10(t_max/t_min)`
    /// rounded up, so the spacing is at most `1/ppd` decade.
    pub fn points(&self) -> Vec<f64> {
        if self.t_max == self.t_min {
            return vec![self.t_min];
        }
        let decades = (self.t_max / self.t_min).log10();
        let intervals = (decades * self.points_per_decade as f64 - 1e-9)
            .ceil()
            .max(1.0) as usize;
        let (lo, hi) = (self.t_min.ln(), self.t_max.ln());
        (0..=intervals)
            .map(|i| match i {
                0 => self.t_min,
                i if i == intervals => self.t_max,
                i => (lo + (hi - lo) * i as f64 / intervals as f64).exp(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub model: ModelSpec,
    pub grid: TGrid,
    pub typical: TypicalErrorConfig,
    pub rtol: f64,
    pub atol: f64,
    /// Scaled-time window; `None` uses the model default.
    pub window: Option<(f64, f64)>,
    /// 0 means one worker per available core.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self::new(ModelSpec::two_level(1e-3))
    }
}

impl SweepConfig {
    pub fn new(model: ModelSpec) -> Self {
        let evo = EvolutionConfig::default();
        Self {
            model,
            grid: TGrid::default(),
            typical: TypicalErrorConfig::default(),
            rtol: evo.rtol,
            atol: evo.atol,
            window: None,
            workers: 0,
        }
    }

    pub fn with_grid(mut self, t_min: f64, t_max: f64, points_per_decade: u32) -> Self {
        self.grid = TGrid {
            t_min,
            t_max,
            points_per_decade,
        };
        self
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
            .unwrap_or_else(|| self.model.model.default_window())
    }

    pub fn evolution(&self, total_time: f64) -> EvolutionConfig {
        let (s_start, s_end) = self.window();
        EvolutionConfig {
            total_time,
            rtol: self.rtol,
            atol: self.atol,
            s_start,
            s_end,
            ..EvolutionConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(g.t_min > 0.0 && g.t_min <= g.t_max && g.t_max.is_finite()) {
            return Err(SweepError::InvalidConfig(format!(
                "T range [{}, {}] is empty or not positive",
                g.t_min, g.t_max
            )));
        }
        if g.points_per_decade == 0 {
            return Err(SweepError::InvalidConfig(
                "points per decade must be positive".into(),
            ));
        }
        self.validate_times(&[g.t_min])
    }

    /// Checks everything except the grid, for the given evaluation times.
    pub fn validate_times(&self, times: &[f64]) -> Result<()> {
        let bad = |m: String| Err(SweepError::InvalidConfig(m));
        self.model.validate()?;
        let floor = 10.0 * self.typical.tau0.sqrt();
        for &t in times {
            if !(t >= floor && t.is_finite()) {
                return bad(format!("T = {t} must be at least 10 sqrt(tau0) = {floor}"));
            }
            self.typical.sample_times(t)?;
            if let Err(e) = self.evolution(t).validate() {
                return bad(e.to_string());
            }
        }
        Ok(())
    }
}

/// One row of a sweep. Fields that could not be computed are `None` and
/// come out as empty CSV cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub t: f64,
    pub eps: Option<f64>,
    pub eps_bar_t: Option<f64>,
    pub eps_bar_1: f64,
    pub eps_bar_2: f64,
    pub ratio1: Option<f64>,
    pub ratio2: Option<f64>,
    pub eps_t2: Option<f64>,
    pub slope: Option<f64>,
    pub norm_drift: Option<f64>,
    pub error: Option<String>,
}

impl SweepRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Switching estimates the sweep compares against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimates {
    /// First order, from the unsmoothed path.
    pub first: SwitchingEstimate,
    /// Second order, from the path itself.
    pub second: SwitchingEstimate,
    /// Closed-form references for smoothed rational models.
    pub reference: Option<ReferenceEstimate>,
}

impl Estimates {
    pub fn for_model(spec: &ModelSpec) -> Result<Self> {
        let path = build(spec)?;
        let base = build(&spec.base())?;
        let smoothed = spec.model != ModelKind::TwoLevelExp && spec.k[0] > 0.0;
        Ok(Self {
            first: switching_estimate(&base, 1)?,
            second: switching_estimate(&path, 2)?,
            reference: if smoothed {
                Some(reference_scaling_estimate(&base, spec.k[0], spec.order)?)
            } else {
                None
            },
        })
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()?)
}

/// Sweep over the configured grid.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    run_points(cfg, &cfg.grid.points())
}

/// Sweep over explicit `T` values. Output is sorted by `T`.
pub fn run_points(cfg: &SweepConfig, times: &[f64]) -> Result<Vec<SweepRecord>> {
    cfg.validate_times(times)?;
    let path = build(&cfg.model)?;
    let est = Estimates::for_model(&cfg.model)?;

    let mut times = times.to_vec();
    times.sort_by(f64::total_cmp);
    times.dedup();

    // One job per evolution: the single shot at T followed by the window samples.
    let mut jobs = Vec::new();
    for (idx, &t) in times.iter().enumerate() {
        jobs.push((idx, t));
        if let Ok(samples) = cfg.typical.sample_times(t) {
            jobs.extend(samples.into_iter().map(|tp| (idx, tp)));
        }
    }
    let shots: Vec<(usize, std::result::Result<metrics::Shot, MetricsError>)> = pool(cfg.workers)?
        .install(|| {
            jobs.par_iter()
                .map(|&(idx, tp)| (idx, metrics::single_shot(&path, &cfg.evolution(tp))))
                .collect()
        });

    let mut records: Vec<SweepRecord> = times
        .iter()
        .map(|&t| SweepRecord {
            t,
            eps: None,
            eps_bar_t: None,
            eps_bar_1: est.first.eps_bar(t),
            eps_bar_2: est.second.eps_bar(t),
            ratio1: None,
            ratio2: None,
            eps_t2: None,
            slope: None,
            norm_drift: None,
            error: None,
        })
        .collect();

    let mut cursor = 0;
    for (idx, rec) in records.iter_mut().enumerate() {
        let end = shots[cursor..]
            .iter()
            .position(|(i, _)| *i != idx)
            .map_or(shots.len(), |p| cursor + p);
        let group = &shots[cursor..end];
        cursor = end;
        fill_record(rec, group, &cfg.typical);
    }

    let fitted: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.eps_bar_t.map(|e| (r.t, e)))
        .collect();
    for rec in records.iter_mut().filter(|r| r.eps_bar_t.is_some()) {
        rec.slope = local_scaling_exponent(&fitted, rec.t).ok();
    }
    Ok(records)
}

fn fill_record(
    rec: &mut SweepRecord,
    group: &[(usize, std::result::Result<metrics::Shot, MetricsError>)],
    typical: &TypicalErrorConfig,
) {
    if let Err(e) = typical.sample_times(rec.t) {
        rec.error = Some(e.to_string());
        return;
    }
    let mut drift: f64 = 0.0;
    let mut values = Vec::with_capacity(group.len());
    for (_, shot) in group {
        match shot {
            Ok(s) => {
                drift = drift.max(s.norm_drift);
                values.push(s.eps);
            }
            Err(e) => {
                rec.error = Some(e.to_string());
                return;
            }
        }
    }
    let eps_bar = typical.reduce(&values[1..]);
    rec.eps = Some(values[0]);
    rec.eps_bar_t = Some(eps_bar);
    rec.norm_drift = Some(drift);
    rec.eps_t2 = Some(eps_bar * rec.t * rec.t);
    if eps_bar > 0.0 {
        rec.ratio1 = Some(rec.eps_bar_1 / eps_bar);
        rec.ratio2 = Some(rec.eps_bar_2 / eps_bar);
    }
}

/// Replace `-0.0` by `0.0` everywhere so equal configs serialize identically.
fn normalize(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.as_f64() == Some(0.0) && n.to_string().starts_with('-') {
                *v = json!(0.0);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(normalize),
        Value::Object(map) => map.values_mut().for_each(normalize),
        _ => {}
    }
}

/// Canonical JSON of everything that affects the records. Object keys come
/// out sorted because `serde_json::Map` is ordered.
pub fn canonical_json(cfg: &SweepConfig) -> String {
    let mut v = serde_json::to_value(cfg).expect("config is serializable");
    normalize(&mut v);
    v.to_string()
}

pub fn cache_key(cfg: &SweepConfig) -> String {
    format!("{:x}", Sha256::digest(canonical_json(cfg).as_bytes()))
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    schema_version: u32,
    key: String,
    config: SweepConfig,
    records: Vec<SweepRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Miss,
    Disabled,
}

pub fn cache_path(dir: &Path, cfg: &SweepConfig) -> PathBuf {
    dir.join(format!("{}.json", cache_key(cfg)))
}

/// Records from the cache when a matching entry exists, otherwise a fresh
/// sweep that is then stored. Unreadable or outdated entries are recomputed.
pub fn load_or_run(
    cfg: &SweepConfig,
    cache_dir: Option<&Path>,
) -> Result<(Vec<SweepRecord>, CacheStatus)> {
    let Some(dir) = cache_dir else {
        return Ok((run_sweep(cfg)?, CacheStatus::Disabled));
    };
    let file = cache_path(dir, cfg);
    let key = cache_key(cfg);
    if let Ok(text) = fs::read_to_string(&file) {
        if let Ok(entry) = serde_json::from_str::<CacheEntry>(&text) {
            if entry.schema_version == CACHE_SCHEMA_VERSION && entry.key == key {
                return Ok((entry.records, CacheStatus::Hit));
            }
        }
    }
    let records = run_sweep(cfg)?;
    let entry = CacheEntry {
        schema_version: CACHE_SCHEMA_VERSION,
        key,
        config: cfg.clone(),
        records,
    };
    let out_err = |source| SweepError::Output {
        path: file.clone(),
        source,
    };
    fs::create_dir_all(dir).map_err(out_err)?;
    fs::write(&file, serde_json::to_string(&entry)?).map_err(out_err)?;
    Ok((entry.records, CacheStatus::Miss))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            cell(Some(r.t)),
            cell(r.eps),
            cell(r.eps_bar_t),
            cell(Some(r.eps_bar_1)),
            cell(Some(r.eps_bar_2)),
            cell(r.ratio1),
            cell(r.ratio2),
            cell(r.eps_t2),
            cell(r.slope),
            cell(r.norm_drift),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Caveats attached to JSON output when reference curves are present.
pub fn reference_notes(prefactor: Prefactor) -> Vec<String> {
    let mut notes = vec![
        "eps_bar_1 uses the unsmoothed (k = 0) path; eps_bar_2 uses the path itself".to_string(),
        "approximate reference: sqrt(n!/k^n) * sqrt(sum_j |<j|H0'|g>|^2 / gap^(2(n+1))) / T^n; \
         the sum is read with squared magnitudes"
            .to_string(),
        "derivative-based reference assumes H^(n+1)(0) = n! H0'(0) / k^n; a direct series expansion \
         of g^n H0 g^n gives (n+1)! H0'(0) / (k^n (1+k)^n), so the exact estimate exceeds it by about \
         (n+1)/(1+k)^n"
            .to_string(),
    ];
    if prefactor == Prefactor::MidpointNormalized {
        notes.push(
            "schedule prefactor (1+2k)^(2n) multiplies the exact estimate as well".to_string(),
        );
    }
    notes
}

pub fn report_json(cfg: &SweepConfig, records: &[SweepRecord]) -> Result<Value> {
    let est = Estimates::for_model(&cfg.model)?;
    let notes = if est.reference.is_some() {
        reference_notes(cfg.model.prefactor)
    } else {
        Vec::new()
    };
    Ok(json!({
        "schema_version": CACHE_SCHEMA_VERSION,
        "config": cfg,
        "cache_key": cache_key(cfg),
        "estimates": est,
        "notes": notes,
        "records": records,
    }))
}

pub fn write_json<W: Write>(cfg: &SweepConfig, records: &[SweepRecord], mut out: W) -> Result<()> {
    let v = report_json(cfg, records)?;
    serde_json::to_writer_pretty(&mut out, &v)?;
    out.write_all(b"\n").map_err(|source| SweepError::Output {
        path: PathBuf::from("<output>"),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic() -> SweepRecord {
        SweepRecord {
            t: 100.0,
            eps: Some(0.01),
            eps_bar_t: Some(0.0141),
            eps_bar_1: 0.01414213562373095,
            eps_bar_2: 2.8e-4,
            ratio1: Some(1.003),
            ratio2: Some(0.02),
            eps_t2: Some(141.0),
            slope: None,
            norm_drift: Some(1e-12),
            error: None,
        }
    }

    #[test]
    fn grid_contains_both_ends() {
        let pts = TGrid::default().points();
        assert_eq!(pts[0], 10.0);
        assert_eq!(*pts.last().unwrap(), 3e4);
        assert_eq!(pts.len(), 29);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        let decade = TGrid {
            t_min: 10.0,
            t_max: 100.0,
            points_per_decade: 4,
        };
        let pts = decade.points();
        assert_eq!(pts.len(), 5);
        assert!((pts[2] - 10f64.powf(1.5)).abs() < 1e-9);
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            format!("{}\n", CSV_HEADER.join(","))
        );
    }

    #[test]
    fn csv_row_follows_header_order() {
        let mut buf = Vec::new();
        write_csv(&[synthetic()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row = text.lines().nth(1).unwrap();
        assert_eq!(
            row,
            "100.0,0.01,0.0141,0.01414213562373095,0.00028,1.003,0.02,141.0,,1e-12"
        );
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let parsed: Vec<String> = rd
            .records()
            .next()
            .unwrap()
            .unwrap()
            .iter()
            .map(String::from)
            .collect();
        assert_eq!(parsed[3].parse::<f64>().unwrap(), synthetic().eps_bar_1);
    }

    #[test]
    fn cache_keys() {
        let a = SweepConfig::new(ModelSpec::two_level(1e-3));
        assert_eq!(cache_key(&a), cache_key(&a.clone()));
        let b = SweepConfig::new(ModelSpec::two_level(1e-4));
        assert_ne!(cache_key(&a), cache_key(&b));
        let more_workers = SweepConfig {
            workers: 7,
            ..a.clone()
        };
        assert_eq!(cache_key(&a), cache_key(&more_workers));
        let neg_zero = SweepConfig::new(ModelSpec::two_level(-0.0));
        assert_eq!(
            cache_key(&neg_zero),
            cache_key(&SweepConfig::new(ModelSpec::two_level(0.0)))
        );
    }

    #[test]
    fn config_validation() {
        let ok = SweepConfig::new(ModelSpec::two_level(0.0));
        assert!(ok.validate().is_ok());
        let low = ok.clone().with_grid(5.0, 100.0, 4);
        assert!(matches!(low.validate(), Err(SweepError::InvalidConfig(_))));
        let reversed = ok.clone().with_grid(100.0, 50.0, 4);
        assert!(reversed.validate().is_err());
        let bad_model = SweepConfig::new(ModelSpec::two_level(-1.0));
        assert!(bad_model.validate().is_err());
    }

    #[test]
    fn sweep_pipeline_matches_leading_order() {
        let cfg = SweepConfig::new(ModelSpec::two_level(0.0)).with_grid(100.0, 100.0, 8);
        let recs = run_sweep(&cfg).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        let scaled = r.eps_bar_t.unwrap() * r.t;
        assert!(
            (scaled / std::f64::consts::SQRT_2 - 1.0).abs() < 0.15,
            "{scaled}"
        );
        assert!(r.norm_drift.unwrap() < 1e-9);
        assert!(r.eps.unwrap() >= 0.0 && r.eps.unwrap() <= 1.0);
    }

    #[test]
    fn small_t_favours_first_order() {
        let cfg = SweepConfig::new(ModelSpec::two_level(1e-3)).with_grid(20.0, 60.0, 4);
        for r in run_sweep(&cfg).unwrap() {
            let d1 = (r.ratio1.unwrap() - 1.0).abs();
            let d2 = (r.ratio2.unwrap() - 1.0).abs();
            assert!(d1 < d2, "T = {}: {d1} vs {d2}", r.t);
        }
    }

    #[test]
    fn parallel_and_serial_agree_bitwise() {
        let base = SweepConfig::new(ModelSpec::three_level_case2(1e-2)).with_grid(10.0, 100.0, 3);
        let serial = run_sweep(&SweepConfig {
            workers: 1,
            ..base.clone()
        })
        .unwrap();
        let parallel = run_sweep(&SweepConfig {
            workers: 4,
            ..base.clone()
        })
        .unwrap();
        assert_eq!(serial, parallel);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_csv(&serial, &mut a).unwrap();
        write_csv(&run_sweep(&base).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        assert!(serial
            .iter()
            .all(|r| r.slope.is_none() || r.slope.unwrap().is_finite()));
    }
}
