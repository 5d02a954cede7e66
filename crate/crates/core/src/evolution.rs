//! Time-dependent Schrodinger equation on scaled time.
//!
//! Integrates `i dpsi/ds = T H(s) psi` over `[s_start, s_end]` with an
//! adaptive Dormand-Prince 5(4) pair and a PI step-size controller.
//!
//! The integration runs in a frame that follows the instantaneous ground
//! energy: it solves `i dphi/ds = T (H(s) - E_g(s)) phi` and restores the
//! accumulated phase `exp(-i T int E_g ds)` at the end. A real scalar shift
//! does not change any transition probability, but the dominant ground
//! component then barely rotates, so the explicit scheme's amplitude error
//! on it (which would otherwise show up as norm drift at large `T`) stays
//! negligible.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamiltonian::{HamiltonianError, HamiltonianPath};
use crate::linalg::{
    hermitian_eigensystem, lowest_eigenvalue, ComplexMatrix, LinalgError, QuantumState,
};

/// Largest accepted `| ||psi_final|| - 1 |` before a run is declared untrusted.
pub const NORM_DRIFT_FAILURE: f64 = 1e-6;

/// Initial states must be normalized to this accuracy.
pub const INITIAL_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),

    #[error("initial state has norm {0}, expected 1")]
    NotNormalized(f64),

    #[error("state dimension {state} does not match Hamiltonian dimension {hamiltonian}")]
    DimensionMismatch { state: usize, hamiltonian: usize },

    #[error("step budget of {max_steps} exhausted at s = {s_reached} ({rejected} rejected steps)")]
    MaxStepsExceeded {
        max_steps: usize,
        s_reached: f64,
        rejected: usize,
    },

    #[error("step size underflow at s = {s} (h = {h:e})")]
    StepSizeUnderflow { s: f64, h: f64 },

    #[error("norm drift {drift:e} exceeds {NORM_DRIFT_FAILURE:e} after {steps} steps")]
    NormDrift { drift: f64, steps: usize },

    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),

    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, EvolutionError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    /// Total evolution time in inverse energy units.
    pub total_time: f64,
    pub rtol: f64,
    pub atol: f64,
    pub s_start: f64,
    pub s_end: f64,
    pub max_steps: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            total_time: 1.0,
            rtol: 1e-10,
            atol: 1e-12,
            s_start: 0.0,
            s_end: 1.0,
            max_steps: 50_000_000,
        }
    }
}

impl EvolutionConfig {
    pub fn with_time(total_time: f64) -> Self {
        Self {
            total_time,
            ..Self::default()
        }
    }

    pub fn window(mut self, s_start: f64, s_end: f64) -> Self {
        self.s_start = s_start;
        self.s_end = s_end;
        self
    }

    pub fn tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(EvolutionError::InvalidConfig(msg));
        if !(self.total_time >= 0.0 && self.total_time.is_finite()) {
            return bad(format!("T = {} must be finite and >= 0", self.total_time));
        }
        if !(0.0 <= self.s_start && self.s_start < self.s_end && self.s_end <= 1.0) {
            return bad(format!(
                "window [{}, {}] must satisfy 0 <= s_start < s_end <= 1",
                self.s_start, self.s_end
            ));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad(format!(
                "rtol = {}, atol = {} must be positive",
                self.rtol, self.atol
            ));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub final_state: QuantumState,
    pub norm_drift: f64,
    pub steps_taken: usize,
    pub rejected_steps: usize,
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI controller (Gustafsson), exponents for a 5th order error estimate.
const SAFETY: f64 = 0.9;
const PI_ALPHA: f64 = 0.7 / 5.0;
const PI_BETA: f64 = 0.4 / 5.0;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// `f(s, y) = -i T (H(s) - E_g(s)) y`, with a reusable matrix buffer.
struct Rhs<'a> {
    path: &'a HamiltonianPath,
    total_time: f64,
    h: ComplexMatrix,
}

impl Rhs<'_> {
    /// Writes `f(s, y)` into `out` and returns the shift `E_g(s)` used.
    #[inline]
    fn eval(&mut self, s: f64, y: &[Complex64], out: &mut [Complex64]) -> f64 {
        self.path.evaluate_into(s, &mut self.h);
        let shift = lowest_eigenvalue(&self.h);
        self.h.apply_into(y, out);
        let scale = Complex64::new(0.0, -self.total_time);
        for (o, yi) in out.iter_mut().zip(y) {
            *o = scale * (*o - yi * shift);
        }
        shift
    }
}

/// Largest spread of the spectrum at either end of the window.
fn max_endpoint_gap(path: &HamiltonianPath, cfg: &EvolutionConfig) -> Result<f64> {
    let mut gap: f64 = 0.0;
    for s in [cfg.s_start, cfg.s_end] {
        let es = hermitian_eigensystem(&path.evaluate(s)?)?;
        gap = gap.max(es.eigenvalues[es.eigenvalues.len() - 1] - es.eigenvalues[0]);
    }
    Ok(gap)
}

/// Propagate `psi0` along `path` over the configured window.
pub fn evolve(
    path: &HamiltonianPath,
    cfg: &EvolutionConfig,
    psi0: &QuantumState,
) -> Result<EvolutionResult> {
    cfg.validate()?;
    let n = path.dim();
    if psi0.dim() != n {
        return Err(EvolutionError::DimensionMismatch {
            state: psi0.dim(),
            hamiltonian: n,
        });
    }
    let norm0 = psi0.norm();
    if (norm0 - 1.0).abs() > INITIAL_NORM_TOL {
        return Err(EvolutionError::NotNormalized(norm0));
    }
    if cfg.total_time == 0.0 {
        return Ok(EvolutionResult {
            final_state: psi0.clone(),
            norm_drift: (norm0 - 1.0).abs(),
            steps_taken: 0,
            rejected_steps: 0,
        });
    }

    let span = cfg.s_end - cfg.s_start;

    let gap = max_endpoint_gap(path, cfg)?;
    let mut h = if gap > 0.0 {
        1e-3 * (2.0 * PI / (cfg.total_time * gap)).min(1.0)
    } else {
        1e-3
    };
    h = h.min(span);
    let h_min = 1e-14 * span;

    let mut rhs = Rhs {
        path,
        total_time: cfg.total_time,
        h: ComplexMatrix::zeros(n),
    };

    let zero = Complex64::new(0.0, 0.0);
    let mut y: Vec<Complex64> = psi0.amplitudes().to_vec();
    let mut y_new = vec![zero; n];
    let mut tmp = vec![zero; n];
    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut k5 = vec![zero; n];
    let mut k6 = vec![zero; n];
    let mut k7 = vec![zero; n];

    let mut s = cfg.s_start;
    let mut c1 = rhs.eval(s, &y, &mut k1);
    // Integral of E_g over the accepted steps, with the same 5th order weights.
    let mut phase_integral = 0.0;

    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut err_prev: f64 = 1e-4;
    let mut last_rejected = false;

    while s < cfg.s_end {
        if accepted + rejected >= cfg.max_steps {
            return Err(EvolutionError::MaxStepsExceeded {
                max_steps: cfg.max_steps,
                s_reached: s,
                rejected,
            });
        }
        let last = s + h >= cfg.s_end;
        if last {
            h = cfg.s_end - s;
        }

        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (h * A21);
        }
        rhs.eval(s + C2 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        let c3 = rhs.eval(s + C3 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        let c4 = rhs.eval(s + C4 * h, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        let c5 = rhs.eval(s + C5 * h, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] =
                y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        let s_next = if last { cfg.s_end } else { s + h };
        let c6 = rhs.eval(s_next, &tmp, &mut k6);
        for i in 0..n {
            y_new[i] =
                y[i] + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * h;
        }
        let c7 = rhs.eval(s_next, &y_new, &mut k7);

        let mut err_sq = 0.0;
        for i in 0..n {
            let e =
                (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let sc = cfg.atol + cfg.rtol * y[i].norm().max(y_new[i].norm());
            err_sq += e.norm_sqr() / (sc * sc);
        }
        let err = (err_sq / n as f64).sqrt();

        if err <= 1.0 {
            phase_integral += h * (A71 * c1 + A73 * c3 + A74 * c4 + A75 * c5 + A76 * c6);
            c1 = c7;
            s = s_next;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            accepted += 1;

            let mut factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                SAFETY * err.powf(-PI_ALPHA) * err_prev.powf(PI_BETA)
            };
            factor = factor.clamp(MIN_FACTOR, MAX_FACTOR);
            if last_rejected {
                factor = factor.min(1.0);
            }
            err_prev = err.max(1e-4);
            last_rejected = false;
            h *= factor;
        } else {
            rejected += 1;
            last_rejected = true;
            h *= (SAFETY * err.powf(-0.2)).max(MIN_FACTOR);
        }
        if s < cfg.s_end && h < h_min {
            return Err(EvolutionError::StepSizeUnderflow { s, h });
        }
    }

    // Undo the rotating frame.
    let phase = Complex64::from_polar(1.0, -cfg.total_time * phase_integral);
    let final_state = QuantumState::new(y.into_iter().map(|z| z * phase).collect());
    let norm_drift = (final_state.norm() - 1.0).abs();
    if norm_drift > NORM_DRIFT_FAILURE {
        return Err(EvolutionError::NormDrift {
            drift: norm_drift,
            steps: accepted,
        });
    }
    Ok(EvolutionResult {
        final_state,
        norm_drift,
        steps_taken: accepted,
        rejected_steps: rejected,
    })
}

/// Ground state of `H(s)`.
pub fn ground_state(path: &HamiltonianPath, s: f64) -> Result<QuantumState> {
    Ok(hermitian_eigensystem(&path.evaluate(s)?)?.ground().clone())
}

/// Evolve from the ground state at `s_start` and return the result together
/// with the target ground state at `s_end`.
pub fn evolve_from_ground(
    path: &HamiltonianPath,
    cfg: &EvolutionConfig,
) -> Result<(EvolutionResult, QuantumState)> {
    cfg.validate()?;
    let psi0 = ground_state(path, cfg.s_start)?;
    let target = ground_state(path, cfg.s_end)?;
    Ok((evolve(path, cfg, &psi0)?, target))
}
