//! End-to-end property checks on the simulator, each reported as pass/fail
//! with the numbers behind the verdict.

use std::cell::OnceCell;
use std::f64::consts::SQRT_2;
use std::fmt;
use std::time::Instant;

use crate::evolution::{ground_state, EvolutionConfig};
use crate::hamiltonian::{build, ModelSpec};
use crate::linalg::{hermitian_eigensystem, overlap};
use crate::metrics::{
    self, settling_time, single_shot, sqrt2_bound_check, switching_estimate, true_error,
    TypicalErrorConfig,
};
use crate::oracle;
use crate::sweep::{run_points, run_sweep, SweepConfig, SweepRecord, TGrid};

/// Band in which `eps_bar_2 / eps_bar_T` counts as converged.
pub const RATIO_BAND: (f64, f64) = (0.8, 1.25);

/// Tolerances for the essential-singularity sweep, whose error falls below
/// `1e-12` inside the grid.
pub const EXP_RTOL: f64 = 1e-13;
pub const EXP_ATOL: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {} {} {}: {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn outcome(id: u32, name: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome {
        id,
        name,
        passed,
        detail,
    }
}

fn failed(id: u32, name: &'static str, err: impl fmt::Display) -> Outcome {
    outcome(id, name, false, format!("error: {err}"))
}

/// Shared sweeps, computed on first use.
pub struct Checker {
    workers: usize,
    two_level_k3: OnceCell<Result<Vec<SweepRecord>, String>>,
    two_level_k2: OnceCell<Result<Vec<SweepRecord>, String>>,
    exponential: OnceCell<Result<Vec<SweepRecord>, String>>,
    drift: std::cell::Cell<f64>,
}

impl Checker {
    pub fn new(workers: usize) -> Self {
        Self {
            workers,
            two_level_k3: OnceCell::new(),
            two_level_k2: OnceCell::new(),
            exponential: OnceCell::new(),
            drift: std::cell::Cell::new(0.0),
        }
    }

    fn config(&self, spec: ModelSpec) -> SweepConfig {
        SweepConfig {
            workers: self.workers,
            ..SweepConfig::new(spec)
        }
    }

    fn track(&self, records: &[SweepRecord]) {
        for r in records {
            if let Some(d) = r.norm_drift {
                self.drift.set(self.drift.get().max(d));
            }
        }
    }

    fn sweep<'a>(
        &self,
        cell: &'a OnceCell<Result<Vec<SweepRecord>, String>>,
        cfg: impl FnOnce() -> SweepConfig,
    ) -> Result<&'a [SweepRecord], String> {
        let res = cell.get_or_init(|| {
            let recs = run_sweep(&cfg()).map_err(|e| e.to_string())?;
            if let Some(bad) = recs.iter().find(|r| !r.ok()) {
                return Err(format!(
                    "T = {}: {}",
                    bad.t,
                    bad.error.as_deref().unwrap_or("")
                ));
            }
            self.track(&recs);
            Ok(recs)
        });
        res.as_ref().map(|v| v.as_slice()).map_err(Clone::clone)
    }

    fn points(&self, spec: ModelSpec, times: &[f64]) -> Result<Vec<SweepRecord>, String> {
        let recs = run_points(&self.config(spec), times).map_err(|e| e.to_string())?;
        if let Some(bad) = recs.iter().find(|r| !r.ok()) {
            return Err(format!(
                "T = {}: {}",
                bad.t,
                bad.error.as_deref().unwrap_or("")
            ));
        }
        self.track(&recs);
        Ok(recs)
    }

    fn k3_sweep(&self) -> Result<&[SweepRecord], String> {
        self.sweep(&self.two_level_k3, || {
            self.config(ModelSpec::two_level(1e-3))
        })
    }

    fn k2_sweep(&self) -> Result<&[SweepRecord], String> {
        self.sweep(&self.two_level_k2, || {
            self.config(ModelSpec::two_level(1e-2))
        })
    }

    fn exp_sweep(&self) -> Result<&[SweepRecord], String> {
        self.sweep(&self.exponential, || SweepConfig {
            rtol: EXP_RTOL,
            atol: EXP_ATOL,
            ..self.config(ModelSpec::two_level_exp(1e-2))
        })
    }

    pub fn run(&self, id: u32) -> Option<Outcome> {
        Some(match id {
            1 => self.analytic_estimates(),
            2 => self.leading_order_scaling(),
            3 => self.crossover(),
            4 => self.crossover_scaling(),
            5 => self.three_level_cases(),
            6 => self.exponential_model(),
            7 => self.sqrt2_bound(),
            8 => self.numerics_hygiene(),
            _ => return None,
        })
    }

    pub fn run_all(&self) -> Vec<Outcome> {
        (1..=8).filter_map(|id| self.run(id)).collect()
    }

    fn analytic_estimates(&self) -> Outcome {
        const NAME: &str = "analytic switching estimates";
        let get = |spec: ModelSpec| {
            build(&spec).map_err(|e| e.to_string()).and_then(|p| {
                switching_estimate(&p, 1)
                    .map(|e| e.b)
                    .map_err(|e| e.to_string())
            })
        };
        let (two, case1, case2) = match (
            get(ModelSpec::two_level(0.0)),
            get(ModelSpec::three_level_case1(0.0)),
            get(ModelSpec::three_level_case2(1e-3)),
        ) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            (a, b, c) => return failed(1, NAME, format!("{:?}", [a.err(), b.err(), c.err()])),
        };
        let want1 = 34f64.sqrt() / 4.0;
        let passed = (two - SQRT_2).abs() < 1e-12 && (case1 - want1).abs() < 1e-12 && case2 == 0.0;
        outcome(
            1,
            NAME,
            passed,
            format!(
                "two-level b1 = {two:.15} (|diff| {:.1e}), case 1 b1 = {case1:.15} (|diff| {:.1e}), case 2 b1 = {case2:e}",
                (two - SQRT_2).abs(),
                (case1 - want1).abs()
            ),
        )
    }

    fn leading_order_scaling(&self) -> Outcome {
        const NAME: &str = "leading-order 1/T scaling at k = 0";
        let start = Instant::now();
        let recs = match self.points(ModelSpec::two_level(0.0), &[200.0, 500.0, 1000.0]) {
            Ok(r) => r,
            Err(e) => return failed(2, NAME, e),
        };
        let elapsed = start.elapsed().as_secs_f64();
        let (lo, hi) = (SQRT_2 * 0.95, SQRT_2 * 1.05);
        let scaled: Vec<f64> = recs
            .iter()
            .map(|r| r.eps_bar_t.unwrap_or(f64::NAN) * r.t)
            .collect();
        let passed = scaled.iter().all(|v| (lo..=hi).contains(v)) && elapsed < 60.0;
        let list: Vec<String> = recs
            .iter()
            .zip(&scaled)
            .map(|(r, v)| format!("T={}: {v:.4}", r.t))
            .collect();
        outcome(
            2,
            NAME,
            passed,
            format!(
                "eps_bar*T in [{lo:.4}, {hi:.4}]: {}; {elapsed:.1}s",
                list.join(", ")
            ),
        )
    }

    fn crossover(&self) -> Outcome {
        const NAME: &str = "crossover from first to second order at k = 1e-3";
        let recs = match self.points(ModelSpec::two_level(1e-3), &[50.0, 3e4]) {
            Ok(r) => r,
            Err(e) => return failed(3, NAME, e),
        };
        let dev = |r: Option<f64>| (r.unwrap_or(f64::NAN) - 1.0).abs();
        let (small, large) = (&recs[0], &recs[1]);
        let (s1, s2) = (dev(small.ratio1), dev(small.ratio2));
        let (l1, l2) = (dev(large.ratio1), dev(large.ratio2));
        let passed = s1 < s2 && l2 < 0.25 && l1 > 0.5;
        outcome(
            3,
            NAME,
            passed,
            format!(
                "T=50: |r1-1| = {s1:.3} < |r2-1| = {s2:.3}; T=3e4: |r2-1| = {l2:.4} < 0.25, |r1-1| = {l1:.2} > 0.5"
            ),
        )
    }

    fn crossing(records: &[SweepRecord]) -> Option<f64> {
        let pts: Vec<(f64, f64)> = records
            .iter()
            .map(|r| (r.t, r.ratio2.unwrap_or(f64::NAN)))
            .collect();
        settling_time(&pts, RATIO_BAND.0, RATIO_BAND.1)
    }

    fn crossover_scaling(&self) -> Outcome {
        const NAME: &str = "crossover time scales like 1/k";
        let (a, b) = match (self.k3_sweep(), self.k2_sweep()) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return failed(4, NAME, e),
        };
        match (Self::crossing(a), Self::crossing(b)) {
            (Some(t3), Some(t2)) => {
                let r = t3 / t2;
                outcome(
                    4,
                    NAME,
                    (5.0..=20.0).contains(&r),
                    format!(
                        "T_cross(1e-3) = {t3:.1}, T_cross(1e-2) = {t2:.1}, ratio {r:.2} in [5, 20]"
                    ),
                )
            }
            (t3, t2) => outcome(
                4,
                NAME,
                false,
                format!("ratio never settles: {t3:?}, {t2:?}"),
            ),
        }
    }

    fn three_level_cases(&self) -> Outcome {
        const NAME: &str = "three-level cases agree at large T";
        let grid = TGrid::default().points();
        let top = &grid[grid.len() - 3..];
        let (c1, c2) = match (
            self.points(ModelSpec::three_level_case1(1e-3), top),
            self.points(ModelSpec::three_level_case2(1e-3), top),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return failed(5, NAME, e),
        };
        let mut worst: f64 = 0.0;
        let mut parts = Vec::new();
        for (a, b) in c1.iter().zip(&c2) {
            let (x, y) = (
                a.eps_bar_t.unwrap_or(f64::NAN),
                b.eps_bar_t.unwrap_or(f64::NAN),
            );
            let rel = (x / y).max(y / x) - 1.0;
            worst = worst.max(if rel.is_nan() { f64::INFINITY } else { rel });
            parts.push(format!("T={:.0}: {x:.4e} vs {y:.4e}", a.t));
        }
        outcome(
            5,
            NAME,
            worst < 0.25,
            format!("{}; worst relative gap {worst:.3} < 0.25", parts.join(", ")),
        )
    }

    fn exponential_model(&self) -> Outcome {
        const NAME: &str = "essential-singularity model decays faster than a power";
        let recs = match self.exp_sweep() {
            Ok(r) => r,
            Err(e) => return failed(6, NAME, e),
        };
        let sloped: Vec<(f64, f64)> = recs
            .iter()
            .filter_map(|r| r.slope.map(|s| (r.t, s)))
            .collect();
        let Some(&(t_last, s_last)) = sloped.last() else {
            return outcome(6, NAME, false, "no slope could be fitted".into());
        };
        let near = |t: f64| {
            sloped
                .iter()
                .min_by(|a, b| {
                    (a.0.ln() - t.ln())
                        .abs()
                        .total_cmp(&(b.0.ln() - t.ln()).abs())
                })
                .copied()
                .unwrap()
        };
        let decades = [near(t_last / 100.0), near(t_last / 10.0), (t_last, s_last)];
        let monotone = decades[0].1 > decades[1].1 && decades[1].1 > decades[2].1;

        let mut worst: f64 = 0.0;
        for r in recs.iter().filter(|r| r.t <= 50.0) {
            let dev = (r.eps_bar_t.unwrap_or(f64::NAN) / r.eps_bar_1 - 1.0).abs();
            worst = worst.max(if dev.is_nan() { f64::INFINITY } else { dev });
        }
        let passed = s_last < -3.0 && monotone && worst < 0.3;
        let list: Vec<String> = decades
            .iter()
            .map(|(t, s)| format!("{s:.2} at T={t:.0}"))
            .collect();
        outcome(
            6,
            NAME,
            passed,
            format!(
                "slopes {}; last < -3 and decreasing: {}; small-T deviation from sqrt(2)/T: {worst:.3} < 0.3",
                list.join(", "),
                s_last < -3.0 && monotone
            ),
        )
    }

    fn sqrt2_bound(&self) -> Outcome {
        const NAME: &str = "eps <= sqrt(2) * eps_bar beyond the crossover";
        let recs = match self.k3_sweep() {
            Ok(r) => r,
            Err(e) => return failed(7, NAME, e),
        };
        let Some(t_cross) = Self::crossing(recs) else {
            return outcome(7, NAME, false, "no crossover in the sweep".into());
        };
        let tail: Vec<&SweepRecord> = recs.iter().filter(|r| r.t >= t_cross).collect();
        let worst = tail
            .iter()
            .map(|r| r.eps.unwrap_or(f64::NAN) / r.eps_bar_t.unwrap_or(f64::NAN))
            .fold(0.0, f64::max);
        let passed = tail
            .iter()
            .all(|r| sqrt2_bound_check(r.eps.unwrap_or(f64::NAN), r.eps_bar_t.unwrap_or(f64::NAN)));
        outcome(
            7,
            NAME,
            passed,
            format!(
                "{} points with T >= {t_cross:.0}; largest eps/eps_bar = {worst:.3} (limit {:.3})",
                tail.len(),
                SQRT_2 * (1.0 + metrics::BOUND_SLACK)
            ),
        )
    }

    fn numerics_hygiene(&self) -> Outcome {
        const NAME: &str = "numerics hygiene";
        let mut notes = Vec::new();
        let mut passed = true;

        // Make sure the shared sweeps contributed their drift.
        for s in [
            self.k3_sweep().err(),
            self.k2_sweep().err(),
            self.exp_sweep().err(),
        ]
        .into_iter()
        .flatten()
        {
            passed = false;
            notes.push(format!("sweep failed: {s}"));
        }
        let drift = self.drift.get();
        passed &= drift < 1e-9;
        notes.push(format!("max norm drift {drift:.1e}"));

        match rk4_gap() {
            Ok(gap) => {
                passed &= gap < 1e-8;
                notes.push(format!("RK4 oracle |d eps| = {gap:.1e} at T=50"));
            }
            Err(e) => {
                passed = false;
                notes.push(format!("RK4 oracle: {e}"));
            }
        }

        match eigen_gap() {
            Ok(gap) => {
                passed &= gap < 1e-12;
                notes.push(format!("2x2 eigensolver vs closed form {gap:.1e}"));
            }
            Err(e) => {
                passed = false;
                notes.push(format!("eigensolver: {e}"));
            }
        }

        match tau0_gap(self.workers) {
            Ok(gap) => {
                passed &= gap < 0.02;
                notes.push(format!("tau0 0.5 vs 2 at T=1e3: {:.2}%", 100.0 * gap));
            }
            Err(e) => {
                passed = false;
                notes.push(format!("tau0 comparison: {e}"));
            }
        }
        outcome(8, NAME, passed, notes.join("; "))
    }
}

fn rk4_gap() -> Result<f64, String> {
    let path = build(&ModelSpec::two_level(0.0)).map_err(|e| e.to_string())?;
    let t = 50.0;
    let adaptive = single_shot(&path, &EvolutionConfig::with_time(t)).map_err(|e| e.to_string())?;
    let psi0 = ground_state(&path, 0.0).map_err(|e| e.to_string())?;
    let target = ground_state(&path, 1.0).map_err(|e| e.to_string())?;
    let fixed = oracle::rk4_evolve(&path, t, (0.0, 1.0), 1e-5, &psi0);
    let eps = true_error(&fixed, &target).map_err(|e| e.to_string())?;
    Ok((adaptive.eps - eps).abs())
}

fn eigen_gap() -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for spec in [
        ModelSpec::two_level(0.0),
        ModelSpec::two_level(1e-3),
        ModelSpec::two_level_exp(1e-2),
    ] {
        let path = build(&spec).map_err(|e| e.to_string())?;
        for i in 0..=100 {
            let h = path.evaluate(i as f64 / 100.0).map_err(|e| e.to_string())?;
            let es = hermitian_eigensystem(&h).map_err(|e| e.to_string())?;
            let closed = oracle::eigenvalues_2x2(&h);
            for (a, b) in es.eigenvalues.iter().zip(closed) {
                worst = worst.max((a - b).abs());
            }
            let g = oracle::ground_state_2x2(&h);
            let fidelity = overlap(es.ground(), &g).map_err(|e| e.to_string())?.norm();
            worst = worst.max((1.0 - fidelity).abs());
        }
    }
    Ok(worst)
}

fn tau0_gap(workers: usize) -> Result<f64, String> {
    let mut values = Vec::new();
    for tau0 in [0.5, 2.0] {
        let cfg = SweepConfig {
            typical: TypicalErrorConfig {
                tau0,
                ..TypicalErrorConfig::default()
            },
            workers,
            ..SweepConfig::new(ModelSpec::two_level(0.0))
        };
        let recs = run_points(&cfg, &[1e3]).map_err(|e| e.to_string())?;
        values.push(recs[0].eps_bar_t.ok_or("typical error missing")?);
    }
    Ok((values[0] / values[1] - 1.0).abs())
}
