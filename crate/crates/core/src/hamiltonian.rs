//! Time-dependent Hamiltonians `H(s)` built from a constant diagonal plus
//! real symmetric couplings, each carrying its own schedule.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::ComplexMatrix;
use crate::schedule::{Endpoint, Prefactor, Schedule, ScheduleError};

/// Evolution window used for the essential-singularity model, where the
/// Hamiltonian is numerically ill-defined right at the endpoints.
pub const EXP_MODEL_CLIP: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamiltonianError {
    #[error("unknown model `{0}` (expected two-level, two-level-exp, three-level-case1, three-level-case2)")]
    UnknownModel(String),

    #[error("negative smoothing parameter k = {0}")]
    NegativeK(f64),

    #[error("model {model} expects {expected} {what}, got {got}")]
    WrongArity {
        model: ModelKind,
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

pub type Result<T> = std::result::Result<T, HamiltonianError>;

/// One off-diagonal entry `H[i][j] = H[j][i] = amplitude * schedule(s)`, `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub amplitude: f64,
    pub schedule: Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianPath {
    diagonal: Vec<f64>,
    couplings: Vec<Coupling>,
}

impl HamiltonianPath {
    pub fn new(diagonal: Vec<f64>, couplings: Vec<Coupling>) -> Self {
        for c in &couplings {
            assert!(
                c.i < c.j && c.j < diagonal.len(),
                "coupling ({}, {}) out of range",
                c.i,
                c.j
            );
        }
        Self {
            diagonal,
            couplings,
        }
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn evaluate(&self, s: f64) -> Result<ComplexMatrix> {
        check_domain(s)?;
        let mut m = ComplexMatrix::zeros(self.dim());
        self.evaluate_into(s, &mut m);
        Ok(m)
    }

    /// Fill `out` with `H(s)`. No domain check; used in the integrator hot loop.
    #[inline]
    pub fn evaluate_into(&self, s: f64, out: &mut ComplexMatrix) {
        for (i, &d) in self.diagonal.iter().enumerate() {
            out[(i, i)] = Complex64::new(d, 0.0);
        }
        for c in &self.couplings {
            let v = Complex64::new(c.amplitude * c.schedule.value_unchecked(s), 0.0);
            out[(c.i, c.j)] = v;
            out[(c.j, c.i)] = v;
        }
    }

    /// `H'(s)`; the diagonal is constant and contributes nothing.
    pub fn evaluate_deriv(&self, s: f64) -> Result<ComplexMatrix> {
        check_domain(s)?;
        let mut m = ComplexMatrix::zeros(self.dim());
        for c in &self.couplings {
            let v = Complex64::new(c.amplitude * c.schedule.jet(s).d1, 0.0);
            m[(c.i, c.j)] = v;
            m[(c.j, c.i)] = v;
        }
        Ok(m)
    }

    /// `H^(m)` at an endpoint. Order 0 is `H` itself.
    pub fn endpoint_hamiltonian_deriv(
        &self,
        endpoint: Endpoint,
        order: u32,
    ) -> Result<ComplexMatrix> {
        if order == 0 {
            return self.evaluate(endpoint.s());
        }
        let mut m = ComplexMatrix::zeros(self.dim());
        for c in &self.couplings {
            let v = Complex64::new(
                c.amplitude * c.schedule.endpoint_deriv(endpoint, order)?,
                0.0,
            );
            m[(c.i, c.j)] = v;
            m[(c.j, c.i)] = v;
        }
        Ok(m)
    }

    /// Multiply every coupling schedule by `g(s;k)^n g(1-s;k)^n`.
    /// The diagonal is left alone.
    pub fn apply_g_transform(&self, k: f64, order: u32) -> Result<HamiltonianPath> {
        if order == 0 {
            return Ok(self.clone());
        }
        let left = Schedule::g_power(k, order, false)?;
        let right = Schedule::g_power(k, order, true)?;
        let couplings = self
            .couplings
            .iter()
            .map(|c| Coupling {
                schedule: Schedule::product(vec![left.clone(), c.schedule.clone(), right.clone()]),
                ..c.clone()
            })
            .collect();
        Ok(HamiltonianPath::new(self.diagonal.clone(), couplings))
    }

    /// Same path with `shift` added to every diagonal entry.
    pub fn shifted(&self, shift: f64) -> HamiltonianPath {
        HamiltonianPath::new(
            self.diagonal.iter().map(|d| d + shift).collect(),
            self.couplings.clone(),
        )
    }
}

fn check_domain(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(ScheduleError::OutOfDomain(s).into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    TwoLevel,
    TwoLevelExp,
    ThreeLevelCase1,
    ThreeLevelCase2,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::TwoLevel,
        ModelKind::TwoLevelExp,
        ModelKind::ThreeLevelCase1,
        ModelKind::ThreeLevelCase2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::TwoLevel => "two-level",
            ModelKind::TwoLevelExp => "two-level-exp",
            ModelKind::ThreeLevelCase1 => "three-level-case1",
            ModelKind::ThreeLevelCase2 => "three-level-case2",
        }
    }

    pub fn is_three_level(self) -> bool {
        matches!(
            self,
            ModelKind::ThreeLevelCase1 | ModelKind::ThreeLevelCase2
        )
    }

    /// Default scaled-time window for evolution.
    pub fn default_window(self) -> (f64, f64) {
        match self {
            ModelKind::TwoLevelExp => (EXP_MODEL_CLIP, 1.0 - EXP_MODEL_CLIP),
            _ => (0.0, 1.0),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = HamiltonianError;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| HamiltonianError::UnknownModel(s.to_string()))
    }
}

/// Parameters of one builtin model.
///
/// Two-level models take `k = [k]` and `energies = [E0, E1]`; three-level
/// models take `k = [k1, k2, k3]` and `energies = [E1, E2, E3]` (the
/// diagonal is fixed at `(1, 2, 3)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: ModelKind,
    pub k: Vec<f64>,
    pub energies: Vec<f64>,
    pub order: u32,
    pub prefactor: Prefactor,
}

impl ModelSpec {
    /// The model's standard parameter set for a single smoothing scale `k`.
    pub fn new(model: ModelKind, k: f64) -> Self {
        let (ks, energies) = match model {
            ModelKind::TwoLevel | ModelKind::TwoLevelExp => (vec![k], vec![1.0, 1.0]),
            ModelKind::ThreeLevelCase1 => (vec![k, k, k], vec![1.0, 1.0, 1.0]),
            ModelKind::ThreeLevelCase2 => (vec![k, 0.0, 0.0], vec![1.0, 0.0, 1.0]),
        };
        Self {
            model,
            k: ks,
            energies,
            order: 1,
            prefactor: Prefactor::default(),
        }
    }

    pub fn two_level(k: f64) -> Self {
        Self::new(ModelKind::TwoLevel, k)
    }

    pub fn two_level_exp(k: f64) -> Self {
        Self::new(ModelKind::TwoLevelExp, k)
    }

    pub fn three_level_case1(k: f64) -> Self {
        Self::new(ModelKind::ThreeLevelCase1, k)
    }

    pub fn three_level_case2(k: f64) -> Self {
        Self::new(ModelKind::ThreeLevelCase2, k)
    }

    /// The unsmoothed path (`k = 0` everywhere), the reference for first-order estimates.
    pub fn base(&self) -> Self {
        Self {
            k: vec![0.0; self.k.len()],
            ..self.clone()
        }
    }

    pub fn with_energies(mut self, energies: Vec<f64>) -> Self {
        self.energies = energies;
        self
    }

    pub fn with_k(mut self, k: Vec<f64>) -> Self {
        self.k = k;
        self
    }

    pub fn with_order(mut self, order: u32) -> Self {
        self.order = order;
        self
    }

    pub fn with_prefactor(mut self, prefactor: Prefactor) -> Self {
        self.prefactor = prefactor;
        self
    }

    fn expected_arity(&self) -> usize {
        if self.model.is_three_level() {
            3
        } else {
            2
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k_arity = if self.model.is_three_level() { 3 } else { 1 };
        if self.k.len() != k_arity {
            return Err(HamiltonianError::WrongArity {
                model: self.model,
                what: "smoothing parameters",
                expected: k_arity,
                got: self.k.len(),
            });
        }
        if self.energies.len() != self.expected_arity() {
            return Err(HamiltonianError::WrongArity {
                model: self.model,
                what: "energies",
                expected: self.expected_arity(),
                got: self.energies.len(),
            });
        }
        if let Some(&k) = self.k.iter().find(|k| !(**k >= 0.0 && k.is_finite())) {
            return Err(HamiltonianError::NegativeK(k));
        }
        Ok(())
    }

    fn smoothed(&self, k: f64) -> Result<Schedule> {
        Ok(Schedule::rational(k, self.order, self.prefactor)?)
    }
}

/// Assemble the Hamiltonian path of a builtin model.
pub fn build(spec: &ModelSpec) -> Result<HamiltonianPath> {
    spec.validate()?;
    let e = &spec.energies;
    let path = match spec.model {
        ModelKind::TwoLevel => HamiltonianPath::new(
            vec![0.0, e[0]],
            vec![Coupling {
                i: 0,
                j: 1,
                amplitude: e[1],
                schedule: spec.smoothed(spec.k[0])?,
            }],
        ),
        ModelKind::TwoLevelExp => HamiltonianPath::new(
            vec![0.0, e[0]],
            vec![Coupling {
                i: 0,
                j: 1,
                amplitude: e[1],
                schedule: Schedule::exponential(spec.k[0])?,
            }],
        ),
        ModelKind::ThreeLevelCase1 | ModelKind::ThreeLevelCase2 => {
            let pairs = [(0, 1), (0, 2), (1, 2)];
            let couplings = pairs
                .iter()
                .enumerate()
                .map(|(idx, &(i, j))| {
                    Ok(Coupling {
                        i,
                        j,
                        amplitude: e[idx],
                        schedule: spec.smoothed(spec.k[idx])?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            HamiltonianPath::new(vec![1.0, 2.0, 3.0], couplings)
        }
    };
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexMatrix;

    fn real(m: &ComplexMatrix) -> Vec<Vec<f64>> {
        (0..m.dim())
            .map(|i| (0..m.dim()).map(|j| m[(i, j)].re).collect())
            .collect()
    }

    fn all_specs() -> Vec<ModelSpec> {
        let mut v = Vec::new();
        for model in ModelKind::ALL {
            for k in [0.0, 1e-4, 1e-3, 1e-2] {
                v.push(ModelSpec::new(model, k));
            }
        }
        v
    }

    #[test]
    fn two_level_midpoint() {
        let h0 = build(&ModelSpec::two_level(0.0)).unwrap();
        assert_eq!(
            real(&h0.evaluate(0.5).unwrap()),
            vec![vec![0.0, 0.25], vec![0.25, 1.0]]
        );
        let hk = build(&ModelSpec::two_level(1e-3)).unwrap();
        assert_eq!(hk.evaluate(0.5).unwrap()[(0, 1)].re, 0.25);
    }

    #[test]
    fn three_level_case2_endpoint_is_diagonal() {
        let h = build(&ModelSpec::three_level_case2(1e-3)).unwrap();
        assert_eq!(
            h.evaluate(0.0).unwrap(),
            ComplexMatrix::from_diagonal(&[1.0, 2.0, 3.0])
        );
    }

    #[test]
    fn endpoint_derivatives() {
        let h0 = build(&ModelSpec::two_level(0.0)).unwrap();
        let swap = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(h0.evaluate_deriv(0.0).unwrap(), swap);
        assert_eq!(
            h0.endpoint_hamiltonian_deriv(Endpoint::Start, 1).unwrap(),
            swap
        );

        let k = 1e-3;
        let hk = build(&ModelSpec::two_level(k)).unwrap();
        assert_eq!(
            hk.endpoint_hamiltonian_deriv(Endpoint::Start, 1).unwrap(),
            ComplexMatrix::zeros(2)
        );
        let d2 = hk.endpoint_hamiltonian_deriv(Endpoint::Start, 2).unwrap();
        let c = 2.0 * (1.0 + 2.0 * k) * (1.0 + 2.0 * k) / (k * (1.0 + k));
        assert_eq!(d2[(0, 0)].re, 0.0);
        assert_eq!(d2[(1, 1)].re, 0.0);
        assert!((d2[(0, 1)].re - c).abs() < 1e-12 * c);
        assert_eq!(d2[(0, 1)], d2[(1, 0)]);
    }

    #[test]
    fn case1_derivative_at_end_matches_central_difference() {
        let k = 1e-3;
        let path = build(&ModelSpec::three_level_case1(k)).unwrap();
        let d = path.evaluate_deriv(1.0).unwrap();
        let sch = Schedule::rational(k, 1, Prefactor::default()).unwrap();
        let expected = sch.deriv1(1.0).unwrap();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert_eq!(d[(i, j)].re, expected);
        }
        // Interior check against a central difference of evaluate().
        let h = 1e-6;
        for &s in &[0.05, 0.5, 0.95] {
            let d = path.evaluate_deriv(s).unwrap();
            let hp = path.evaluate(s + h).unwrap();
            let hm = path.evaluate(s - h).unwrap();
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let fd = (hp[(i, j)].re - hm[(i, j)].re) / (2.0 * h);
                assert!((fd - d[(i, j)].re).abs() < 1e-7, "s={s} ({i},{j})");
            }
        }
    }

    #[test]
    fn builtins_are_hermitian_with_diagonal_endpoints() {
        for spec in all_specs() {
            let path = build(&spec).unwrap();
            for i in 0..=100 {
                let s = i as f64 / 100.0;
                let m = path.evaluate(s).unwrap();
                m.check_hermitian().unwrap();
            }
            // The exponential model is only diagonal in the k -> 0 limit at
            // the clipped window edges; at s = 0, 1 every builtin is diagonal.
            assert!(path.evaluate(0.0).unwrap().is_diagonal(0.0), "{spec:?}");
            assert!(path.evaluate(1.0).unwrap().is_diagonal(0.0), "{spec:?}");
            assert_eq!(
                path.evaluate(0.0).unwrap(),
                ComplexMatrix::from_diagonal(path.diagonal())
            );
        }
    }

    #[test]
    fn k_zero_reproduces_unsmoothed_path_bitwise() {
        for model in ModelKind::ALL {
            let spec = ModelSpec::new(model, 0.0);
            let a = build(&spec).unwrap();
            let b = build(&ModelSpec::new(model, 3e-3).base()).unwrap();
            for i in 0..=100 {
                let s = i as f64 / 100.0;
                let m = a.evaluate(s).unwrap();
                assert_eq!(m, b.evaluate(s).unwrap());
                for c in a.couplings() {
                    assert_eq!(m[(c.i, c.j)].re, c.amplitude * s * (1.0 - s));
                }
            }
        }
    }

    #[test]
    fn two_level_models_are_reflection_symmetric() {
        for model in [ModelKind::TwoLevel, ModelKind::TwoLevelExp] {
            for k in [0.0, 1e-3, 1e-2] {
                let path = build(&ModelSpec::new(model, k)).unwrap();
                for i in 0..=100 {
                    let s = i as f64 / 100.0;
                    let a = path.evaluate(s).unwrap();
                    let b = path.evaluate(1.0 - s).unwrap();
                    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                        assert!((x - y).norm() <= 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn g_transform() {
        let base = build(&ModelSpec::two_level(0.0)).unwrap();
        assert_eq!(base.apply_g_transform(1e-2, 0).unwrap(), base);

        let tiny = base.apply_g_transform(1e-12, 1).unwrap();
        for &s in &[0.1, 0.5, 0.9] {
            let a = tiny.evaluate(s).unwrap()[(0, 1)].re;
            let b = base.evaluate(s).unwrap()[(0, 1)].re;
            assert!((a - b).abs() < 1e-10);
        }

        let k = 1e-2;
        let smoothed = base.apply_g_transform(k, 1).unwrap();
        let d1 = smoothed
            .endpoint_hamiltonian_deriv(Endpoint::Start, 1)
            .unwrap();
        assert_eq!(d1[(0, 1)].re, 0.0);
        let d2 = smoothed
            .endpoint_hamiltonian_deriv(Endpoint::Start, 2)
            .unwrap();
        let series = 2.0 / (k * (1.0 + k));
        assert!((d2[(0, 1)].re - series).abs() < 1e-12 * series);
        // Diagonal untouched.
        assert_eq!(smoothed.diagonal(), base.diagonal());
    }

    #[test]
    fn errors() {
        assert!(matches!(
            "four-level".parse::<ModelKind>(),
            Err(HamiltonianError::UnknownModel(_))
        ));
        assert!(matches!(
            build(&ModelSpec::two_level(-1e-3)),
            Err(HamiltonianError::NegativeK(_))
        ));
        assert!(matches!(
            build(&ModelSpec::two_level(1e-3).with_k(vec![1e-3, 1e-3])),
            Err(HamiltonianError::WrongArity { .. })
        ));
        let path = build(&ModelSpec::two_level(0.0)).unwrap();
        assert!(path.evaluate(1.01).is_err());
        assert!(path.endpoint_hamiltonian_deriv(Endpoint::Start, 9).is_err());
        for m in ModelKind::ALL {
            assert_eq!(m.name().parse::<ModelKind>().unwrap(), m);
        }
    }
}
