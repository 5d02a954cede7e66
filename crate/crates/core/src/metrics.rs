//! Error measures and switching-theorem estimates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::{self, EvolutionConfig, EvolutionError};
use crate::hamiltonian::{HamiltonianError, HamiltonianPath};
use crate::linalg::{self, hermitian_eigensystem, LinalgError, QuantumState};
use crate::schedule::Endpoint;

/// Gaps below this are treated as a level crossing.
pub const SINGULAR_GAP: f64 = 1e-12;

/// Relative slack applied to the `sqrt(2)` bound.
pub const BOUND_SLACK: f64 = 0.02;

/// Centered points used by [`local_scaling_exponent`].
pub const SLOPE_POINTS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("typical-error window [T - sqrt(T tau0), T + sqrt(T tau0)] is not positive at T = {t}, tau0 = {tau0}")]
    WindowNotPositive { t: f64, tau0: f64 },

    #[error("typical error needs at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("tau0 = {0} must be positive")]
    BadTau0(f64),

    #[error("gap to level {level} at s = {s} is {gap:e}; switching estimate is singular")]
    SingularGap { level: usize, s: f64, gap: f64 },

    #[error("need {need} points on both sides of T = {t} for a slope fit, have {have}")]
    InsufficientPoints { t: f64, need: usize, have: usize },

    #[error(transparent)]
    Evolution(#[from] EvolutionError),

    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),

    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Norm of the part of `psi` orthogonal to `target`.
///
/// Computed from the projected-out vector rather than `1 - |<g|psi>|^2`,
/// which loses all digits once the error drops below about `1e-8`.
pub fn true_error(psi: &QuantumState, target: &QuantumState) -> Result<f64> {
    let a = linalg::overlap(target, psi)?;
    let residual: f64 = psi
        .amplitudes()
        .iter()
        .zip(target.amplitudes())
        .map(|(p, g)| (p - g * a).norm_sqr())
        .sum();
    Ok(residual.sqrt().min(1.0))
}

/// How samples inside the window are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    /// Plain mean of `eps(T')`.
    Mean,
    /// Square root of the mean of `eps(T')^2`.
    #[default]
    Rms,
}

impl std::str::FromStr for Averaging {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mean" => Ok(Averaging::Mean),
            "rms" => Ok(Averaging::Rms),
            other => Err(format!(
                "unknown averaging `{other}` (expected mean or rms)"
            )),
        }
    }
}

impl std::fmt::Display for Averaging {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Averaging::Mean => "mean",
            Averaging::Rms => "rms",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypicalErrorConfig {
    pub tau0: f64,
    pub samples: usize,
    pub averaging: Averaging,
}

impl Default for TypicalErrorConfig {
    fn default() -> Self {
        Self {
            tau0: 1.0,
            samples: 64,
            averaging: Averaging::default(),
        }
    }
}

impl TypicalErrorConfig {
    pub const MIN_SAMPLES: usize = 16;

    pub fn half_width(&self, t: f64) -> f64 {
        (t * self.tau0).sqrt()
    }

    /// Midpoints of `samples` equal cells covering the window around `t`.
    pub fn sample_times(&self, t: f64) -> Result<Vec<f64>> {
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return Err(MetricsError::BadTau0(self.tau0));
        }
        if self.samples < Self::MIN_SAMPLES {
            return Err(MetricsError::TooFewSamples {
                min: Self::MIN_SAMPLES,
                got: self.samples,
            });
        }
        let w = self.half_width(t);
        if t.is_nan() || t <= w {
            return Err(MetricsError::WindowNotPositive { t, tau0: self.tau0 });
        }
        let cell = 2.0 * w / self.samples as f64;
        Ok((0..self.samples)
            .map(|i| t - w + (i as f64 + 0.5) * cell)
            .collect())
    }

    /// Combine window samples into one number.
    pub fn reduce(&self, values: &[f64]) -> f64 {
        let n = values.len() as f64;
        match self.averaging {
            Averaging::Mean => values.iter().sum::<f64>() / n,
            Averaging::Rms => (values.iter().map(|v| v * v).sum::<f64>() / n).sqrt(),
        }
    }
}

/// Window average of `eps` around `t`. Samples are evaluated in order and
/// the first failure is returned.
pub fn typical_error<F, E>(
    mut eps: F,
    t: f64,
    cfg: &TypicalErrorConfig,
) -> std::result::Result<f64, E>
where
    F: FnMut(f64) -> std::result::Result<f64, E>,
    E: From<MetricsError>,
{
    let times = cfg.sample_times(t)?;
    let mut values = Vec::with_capacity(times.len());
    for tp in times {
        values.push(eps(tp)?);
    }
    Ok(cfg.reduce(&values))
}

/// Error of one evolution from the ground state of `H(s_start)` to the
/// ground state of `H(s_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    pub eps: f64,
    pub norm_drift: f64,
    pub steps: usize,
}

pub fn single_shot(path: &HamiltonianPath, cfg: &EvolutionConfig) -> Result<Shot> {
    let (res, target) = evolution::evolve_from_ground(path, cfg)?;
    Ok(Shot {
        eps: true_error(&res.final_state, &target)?,
        norm_drift: res.norm_drift,
        steps: res.steps_taken,
    })
}

/// Typical error of a path together with the worst norm drift seen in the window.
pub fn path_typical_error(
    path: &HamiltonianPath,
    base: &EvolutionConfig,
    t: f64,
    cfg: &TypicalErrorConfig,
) -> Result<(f64, f64)> {
    let mut drift: f64 = 0.0;
    let value = typical_error(
        |tp| -> Result<f64> {
            let shot = single_shot(
                path,
                &EvolutionConfig {
                    total_time: tp,
                    ..*base
                },
            )?;
            drift = drift.max(shot.norm_drift);
            Ok(shot.eps)
        },
        t,
        cfg,
    )?;
    Ok((value, drift))
}

/// One summand of the switching estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelTerm {
    pub endpoint: Endpoint,
    pub level: usize,
    pub matrix_element: Complex64,
    pub gap: f64,
    /// `|<j|H^(n)|g>| / gap^(n+1)`.
    pub term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingEstimate {
    pub order: u32,
    pub b_start: f64,
    pub b_end: f64,
    pub b: f64,
    pub terms: Vec<LevelTerm>,
}

impl SwitchingEstimate {
    /// `b / T^n`.
    pub fn eps_bar(&self, t: f64) -> f64 {
        self.b / t.powi(self.order as i32)
    }
}

/// Endpoint contributions `sum_j |<j|M|g>|^2 / gap_j^(2 p)` for `M = H^(order)`.
fn endpoint_sum(
    path: &HamiltonianPath,
    endpoint: Endpoint,
    order: u32,
    gap_power: i32,
    terms: &mut Vec<LevelTerm>,
) -> Result<f64> {
    let s = endpoint.s();
    let es = hermitian_eigensystem(&path.evaluate(s)?)?;
    let deriv = path.endpoint_hamiltonian_deriv(endpoint, order)?;
    let g = es.ground();
    let hg = QuantumState::new(linalg::apply(&deriv, g)?);
    let mut sum = 0.0;
    for (level, v) in es.eigenvectors.iter().enumerate().skip(1) {
        let gap = es.gap(level);
        if gap.abs() < SINGULAR_GAP {
            return Err(MetricsError::SingularGap { level, s, gap });
        }
        let element = linalg::overlap(v, &hg)?;
        let term = element.norm() / gap.powi(gap_power);
        terms.push(LevelTerm {
            endpoint,
            level,
            matrix_element: element,
            gap,
            term,
        });
        sum += term * term;
    }
    Ok(sum)
}

/// Switching-theorem coefficient built from the `n`-th endpoint derivatives.
pub fn switching_estimate(path: &HamiltonianPath, order: u32) -> Result<SwitchingEstimate> {
    let mut terms = Vec::new();
    let p = order as i32 + 1;
    let b_start = endpoint_sum(path, Endpoint::Start, order, p, &mut terms)?.sqrt();
    let b_end = endpoint_sum(path, Endpoint::End, order, p, &mut terms)?.sqrt();
    Ok(SwitchingEstimate {
        order,
        b_start,
        b_end,
        b: b_start.hypot(b_end),
        terms,
    })
}

/// Closed-form estimates for `g^n H0 g^n` that use only the first
/// derivative of the unsmoothed path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEstimate {
    pub order: u32,
    pub k: f64,
    /// `sqrt(n!/k^n) * sqrt(sum |<j|H0'|g>|^2 / gap^(2(n+1)))`, curve `/ T^n`.
    pub approximate_coefficient: f64,
    pub approximate_power: u32,
    /// Uses `H^(n+1) = n! H0' / k^n` inside the full estimate, curve `/ T^(n+1)`.
    pub derivative_coefficient: f64,
    pub derivative_power: u32,
}

impl ReferenceEstimate {
    pub fn approximate(&self, t: f64) -> f64 {
        self.approximate_coefficient / t.powi(self.approximate_power as i32)
    }

    pub fn derivative_based(&self, t: f64) -> f64 {
        self.derivative_coefficient / t.powi(self.derivative_power as i32)
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Reference curves for the smoothed path from the base path `H0`.
pub fn reference_scaling_estimate(
    base: &HamiltonianPath,
    k: f64,
    order: u32,
) -> Result<ReferenceEstimate> {
    let mut scratch = Vec::new();
    let n = order as i32;
    let mut approx = 0.0;
    let mut deriv = 0.0;
    for endpoint in [Endpoint::Start, Endpoint::End] {
        approx += endpoint_sum(base, endpoint, 1, n + 1, &mut scratch)?;
        deriv += endpoint_sum(base, endpoint, 1, n + 2, &mut scratch)?;
    }
    let scale = factorial(order) / k.powi(n);
    Ok(ReferenceEstimate {
        order,
        k,
        approximate_coefficient: scale.sqrt() * approx.sqrt(),
        approximate_power: order,
        derivative_coefficient: scale * deriv.sqrt(),
        derivative_power: order + 1,
    })
}

/// Least-squares slope of `log y` against `log T` over the
/// [`SLOPE_POINTS`] grid points centered on the one closest to `t`.
///
/// `points` must be sorted by `T`; non-positive or non-finite values are skipped.
pub fn local_scaling_exponent(points: &[(f64, f64)], t: f64) -> Result<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    let half = SLOPE_POINTS / 2;
    let insufficient = || MetricsError::InsufficientPoints {
        t,
        need: SLOPE_POINTS,
        have: usable.len(),
    };
    let lt = t.ln();
    let center = usable
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 .0 - lt).abs().total_cmp(&(b.1 .0 - lt).abs()))
        .map(|(i, _)| i)
        .ok_or_else(insufficient)?;
    if center < half || center + half >= usable.len() {
        return Err(insufficient());
    }
    Ok(fit_slope(&usable[center - half..=center + half]))
}

/// Least-squares slope through points already in log-log coordinates.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// `eps <= sqrt(2) * eps_bar`, with [`BOUND_SLACK`].
pub fn sqrt2_bound_check(eps: f64, eps_bar: f64) -> bool {
    eps <= std::f64::consts::SQRT_2 * eps_bar * (1.0 + BOUND_SLACK)
}

/// `T` where `b1 / T` and `b2 / T^2` meet.
pub fn estimate_crossing(b1: f64, b2: f64) -> Option<f64> {
    (b1 > 0.0 && b2 > 0.0).then(|| b2 / b1)
}

/// First grid `T` from which `ratio` stays inside `[lo, hi]` up to the end of the grid.
pub fn settling_time(points: &[(f64, f64)], lo: f64, hi: f64) -> Option<f64> {
    let mut start = None;
    for &(t, r) in points {
        if r.is_finite() && (lo..=hi).contains(&r) {
            start.get_or_insert(t);
        } else {
            start = None;
        }
    }
    start
}
