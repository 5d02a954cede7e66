//! Small dense complex linear algebra.
//!
//! Everything here is sized for the few-level models the simulator runs
//! (dimension 2 or 3, anything up to ~8 works fine). Matrices are stored
//! row-major in a flat `Vec`.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute Hermiticity tolerance, scaled by `max(1, largest |entry|)`.
pub const HERMITIAN_TOL: f64 = 1e-14;

const JACOBI_MAX_SWEEPS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("matrix is not Hermitian: |H[{i}][{j}] - conj(H[{j}][{i}])| = {deviation:e}")]
    NotHermitian { i: usize, j: usize, deviation: f64 },

    #[error("Jacobi iteration did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("zero-dimensional matrix")]
    Empty,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense square complex matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Build from real rows. Panics if the rows are ragged or not square.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "row {i} has wrong length");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = Complex64::new(v, 0.0);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "row {i} has wrong length");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self[(i, j)].norm() <= tol))
    }

    /// Worst Hermiticity violation as `(i, j, |H_ij - conj(H_ji)|)`.
    pub fn hermitian_deviation(&self) -> (usize, usize, f64) {
        let mut worst = (0, 0, 0.0);
        for i in 0..self.dim {
            for j in i..self.dim {
                let d = (self[(i, j)] - self[(j, i)].conj()).norm();
                if d > worst.2 {
                    worst = (i, j, d);
                }
            }
        }
        worst
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let (i, j, deviation) = self.hermitian_deviation();
        if deviation > HERMITIAN_TOL * self.max_abs().max(1.0) {
            return Err(LinalgError::NotHermitian { i, j, deviation });
        }
        Ok(())
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(LinalgError::DimensionMismatch(self.dim, other.dim));
        }
        let n = self.dim;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                for j in 0..n {
                    m[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(m)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(LinalgError::DimensionMismatch(self.dim, other.dim));
        }
        Ok(Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// `y = self * x` into a caller-provided buffer, no allocation.
    #[inline]
    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.dim;
        for (i, yi) in y.iter_mut().enumerate().take(n) {
            let row = &self.data[i * n..(i + 1) * n];
            *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.6e}{:+.6e}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// Complex amplitude vector of a pure state.
///
/// Normalization is not enforced on construction; evolution tracks norm
/// drift instead of silently renormalizing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumState {
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    pub fn new(amplitudes: Vec<Complex64>) -> Self {
        Self { amplitudes }
    }

    pub fn from_real(amplitudes: &[f64]) -> Self {
        Self::new(amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// Computational basis vector `|index>`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        v[index] = Complex64::new(1.0, 0.0);
        Self::new(v)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self::new(self.amplitudes.iter().map(|z| z / n).collect())
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self::new(self.amplitudes.iter().map(|z| z * factor).collect())
    }
}

/// Matrix-vector product `H psi`.
pub fn apply(h: &ComplexMatrix, psi: &QuantumState) -> Result<Vec<Complex64>> {
    if h.dim() != psi.dim() {
        return Err(LinalgError::DimensionMismatch(h.dim(), psi.dim()));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); h.dim()];
    h.apply_into(psi.amplitudes(), &mut out);
    Ok(out)
}

/// Inner product `<a|b>`, conjugate-linear in `a`.
pub fn overlap(a: &QuantumState, b: &QuantumState) -> Result<Complex64> {
    if a.dim() != b.dim() {
        return Err(LinalgError::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(inner(a.amplitudes(), b.amplitudes()))
}

#[inline]
pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Sorted, orthonormal, phase-fixed eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigensystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<QuantumState>,
}

impl Eigensystem {
    pub fn ground(&self) -> &QuantumState {
        &self.eigenvectors[0]
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `E_j - E_0`.
    pub fn gap(&self, j: usize) -> f64 {
        self.eigenvalues[j] - self.eigenvalues[0]
    }
}

/// Eigen-decomposition of a Hermitian matrix.
///
/// Eigenvalues come back ascending. Each eigenvector is rotated so that its
/// largest-modulus component (lowest index on ties) is real and non-negative,
/// which makes the result a pure function of the input. Degenerate
/// eigenvalues are ordered by the index of that largest component.
///
/// The 2x2 case uses the closed form; larger matrices use cyclic Jacobi
/// rotations.
pub fn hermitian_eigensystem(h: &ComplexMatrix) -> Result<Eigensystem> {
    let n = h.dim();
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    h.check_hermitian()?;

    let (values, vectors) = if n == 1 {
        (vec![h[(0, 0)].re], vec![vec![Complex64::new(1.0, 0.0)]])
    } else if n == 2 {
        closed_form_2x2(h)
    } else {
        jacobi(h)?
    };

    let mut pairs: Vec<(f64, usize, Vec<Complex64>)> = values
        .into_iter()
        .zip(vectors)
        .map(|(lambda, v)| {
            let (lead, v) = fix_phase(v);
            (lambda, lead, v)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    Ok(Eigensystem {
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
        eigenvectors: pairs.into_iter().map(|p| QuantumState::new(p.2)).collect(),
    })
}

/// Smallest eigenvalue of a Hermitian matrix without eigenvectors.
///
/// Closed forms for dimension up to 3 (quadratic formula, trigonometric
/// cubic solution); larger matrices fall back to Jacobi. The input is not
/// checked for hermiticity.
pub fn lowest_eigenvalue(h: &ComplexMatrix) -> f64 {
    match h.dim() {
        1 => h[(0, 0)].re,
        2 => {
            let a = h[(0, 0)].re;
            let d = h[(1, 1)].re;
            0.5 * (a + d) - (0.5 * (a - d)).hypot(h[(0, 1)].norm())
        }
        3 => {
            let q = (h[(0, 0)].re + h[(1, 1)].re + h[(2, 2)].re) / 3.0;
            let off = h[(0, 1)].norm_sqr() + h[(0, 2)].norm_sqr() + h[(1, 2)].norm_sqr();
            let diag: f64 = (0..3).map(|i| (h[(i, i)].re - q).powi(2)).sum();
            let p = ((diag + 2.0 * off) / 6.0).sqrt();
            if p == 0.0 {
                return q;
            }
            let b = |i: usize, j: usize| {
                let z = h[(i, j)] / p;
                if i == j {
                    z - q / p
                } else {
                    z
                }
            };
            let det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1))
                - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
                + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
            let phi = (0.5 * det.re).clamp(-1.0, 1.0).acos() / 3.0;
            q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos()
        }
        _ => jacobi(h)
            .map(|(values, _)| values.into_iter().fold(f64::INFINITY, f64::min))
            .unwrap_or(f64::NAN),
    }
}

fn closed_form_2x2(h: &ComplexMatrix) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    let a = h[(0, 0)].re;
    let d = h[(1, 1)].re;
    let b = 0.5 * (h[(0, 1)] + h[(1, 0)].conj());
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let radius = half.hypot(b.norm());

    if b.norm() == 0.0 {
        let e0 = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let e1 = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        return (vec![a, d], vec![e0, e1]);
    }

    let lo = mean - radius;
    let hi = mean + radius;
    let vector = |lambda: f64| -> Vec<Complex64> {
        // Two equivalent null vectors of (H - lambda); keep the better conditioned one.
        let u = [b, Complex64::new(lambda - a, 0.0)];
        let w = [Complex64::new(lambda - d, 0.0), b.conj()];
        let nu = (u[0].norm_sqr() + u[1].norm_sqr()).sqrt();
        let nw = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
        if nu >= nw {
            vec![u[0] / nu, u[1] / nu]
        } else {
            vec![w[0] / nw, w[1] / nw]
        }
    };
    (vec![lo, hi], vec![vector(lo), vector(hi)])
}

fn jacobi(h: &ComplexMatrix) -> Result<(Vec<f64>, Vec<Vec<Complex64>>)> {
    let n = h.dim();
    let mut a = h.clone();
    // Work on the exactly Hermitian part.
    for i in 0..n {
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let z = 0.5 * (a[(i, j)] + a[(j, i)].conj());
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
        }
    }
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let threshold = (f64::EPSILON * scale).powi(2);

    let off_norm = |a: &ComplexMatrix| -> f64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)].norm_sqr();
            }
        }
        off
    };

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_norm(&a) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let phase = apq / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // G = [[c, s], [-s conj(e), c conj(e)]] in the (p, q) plane.
                let g_qp = -s * phase.conj();
                let g_qq = c * phase.conj();

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c + akq * g_qp;
                    a[(k, q)] = akp * s + akq * g_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c + aqk * g_qp.conj();
                    a[(q, k)] = apk * s + aqk * g_qq.conj();
                }
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c + vkq * g_qp;
                    v[(k, q)] = vkp * s + vkq * g_qq;
                }
            }
        }
    }
    if !converged && off_norm(&a) > threshold {
        return Err(LinalgError::NoConvergence(JACOBI_MAX_SWEEPS));
    }

    let values = (0..n).map(|i| a[(i, i)].re).collect();
    let vectors = (0..n)
        .map(|j| (0..n).map(|k| v[(k, j)]).collect())
        .collect();
    Ok((values, vectors))
}

/// Rotate `v` so its largest component is real and non-negative.
/// Returns the index of that component alongside the rotated vector.
fn fix_phase(v: Vec<Complex64>) -> (usize, Vec<Complex64>) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    // Near-ties resolve to the lowest index so the choice survives rounding.
    let lead = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-10))
        .unwrap_or(0);
    let z = v[lead];
    if z.norm() == 0.0 {
        return (lead, v);
    }
    let rot = z.conj() / z.norm();
    let mut out: Vec<Complex64> = v.into_iter().map(|x| x * rot).collect();
    out[lead] = Complex64::new(out[lead].norm(), 0.0);
    (lead, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn residual(h: &ComplexMatrix, es: &Eigensystem) -> f64 {
        es.eigenvalues
            .iter()
            .zip(&es.eigenvectors)
            .map(|(&lambda, v)| {
                let hv = apply(h, v).unwrap();
                hv.iter()
                    .zip(v.amplitudes())
                    .map(|(a, b)| (a - b * lambda).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn diagonal_two_by_two() {
        let h = ComplexMatrix::from_real_rows(&[&[0.0, 0.0], &[0.0, 1.0]]);
        let es = hermitian_eigensystem(&h).unwrap();
        assert_eq!(es.eigenvalues, vec![0.0, 1.0]);
        assert_eq!(es.ground(), &QuantumState::from_real(&[1.0, 0.0]));
    }

    #[test]
    fn diagonal_three_by_three() {
        let h = ComplexMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        let es = hermitian_eigensystem(&h).unwrap();
        assert_eq!(es.eigenvalues, vec![1.0, 2.0, 3.0]);
        for j in 0..3 {
            assert_eq!(es.eigenvectors[j], QuantumState::basis(3, j));
        }
    }

    #[test]
    fn two_level_midpoint_matches_quadratic_formula() {
        let h = ComplexMatrix::from_real_rows(&[&[0.0, 0.25], &[0.25, 1.0]]);
        let es = hermitian_eigensystem(&h).unwrap();
        let disc = (1.0_f64 + 4.0 * 0.25 * 0.25).sqrt();
        assert!((es.eigenvalues[0] - (1.0 - disc) / 2.0).abs() < 1e-15);
        assert!((es.eigenvalues[1] - (1.0 + disc) / 2.0).abs() < 1e-15);
        assert!((es.eigenvalues[0] - (0.5 - 0.5590169943749474)).abs() < 1e-15);
        assert!(residual(&h, &es) < 1e-15);
    }

    #[test]
    fn rejects_non_hermitian_and_names_the_entry() {
        let h = ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)],
            vec![c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)],
            vec![c(0.4, 0.0), c(0.0, 0.0), c(3.0, 0.0)],
        ]);
        match hermitian_eigensystem(&h) {
            Err(LinalgError::NotHermitian { i, j, deviation }) => {
                assert_eq!((i, j), (0, 2));
                assert!((deviation - 0.1).abs() < 1e-12);
            }
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn apply_examples() {
        let psi = QuantumState::new(vec![c(0.6, 0.1), c(-0.2, 0.7)]);
        assert_eq!(
            apply(&ComplexMatrix::identity(2), &psi).unwrap(),
            psi.amplitudes()
        );

        let diag = ComplexMatrix::from_diagonal(&[0.0, 1.0]);
        let out = apply(&diag, &QuantumState::from_real(&[1.0, 0.0])).unwrap();
        assert_eq!(out, vec![c(0.0, 0.0), c(0.0, 0.0)]);

        let swap = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let out = apply(&swap, &QuantumState::from_real(&[1.0, 0.0])).unwrap();
        assert_eq!(out, vec![c(0.0, 0.0), c(1.0, 0.0)]);

        assert!(matches!(
            apply(&ComplexMatrix::identity(3), &psi),
            Err(LinalgError::DimensionMismatch(3, 2))
        ));
    }

    #[test]
    fn overlap_examples() {
        let e0 = QuantumState::basis(2, 0);
        let e1 = QuantumState::basis(2, 1);
        assert_eq!(overlap(&e0, &e0).unwrap(), c(1.0, 0.0));
        assert_eq!(overlap(&e0, &e1).unwrap(), c(0.0, 0.0));

        let r = std::f64::consts::FRAC_1_SQRT_2;
        let a = QuantumState::new(vec![c(0.5, 0.5), c(0.0, r)]);
        let b = QuantumState::new(vec![c(r, 0.0), c(0.5, -0.5)]);
        // conj(a0) b0 + conj(a1) b1 = (0.5 - 0.5i) r + (-r i)(0.5 - 0.5i)
        let expected = c(0.5 * r, -0.5 * r) + c(0.0, -r) * c(0.5, -0.5);
        let got = overlap(&a, &b).unwrap();
        assert!((got - expected).norm() < 1e-15);
        assert!(
            (got - c(0.0, -std::f64::consts::SQRT_2 / 2.0)).norm() < 1e-15,
            "got {got}"
        );
        // conjugate symmetry
        assert!((overlap(&b, &a).unwrap() - got.conj()).norm() < 1e-15);
    }

    #[test]
    fn phase_convention_makes_largest_component_real() {
        let h = ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(0.3, 0.4), c(0.0, -0.2)],
            vec![c(0.3, -0.4), c(2.0, 0.0), c(0.1, 0.1)],
            vec![c(0.0, 0.2), c(0.1, -0.1), c(3.0, 0.0)],
        ]);
        let es = hermitian_eigensystem(&h).unwrap();
        for v in &es.eigenvectors {
            let lead = v
                .amplitudes()
                .iter()
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                .unwrap();
            assert_eq!(lead.im, 0.0);
            assert!(lead.re >= 0.0);
        }
        assert!(residual(&h, &es) < 1e-12 * h.frobenius_norm());
    }

    fn hermitian_of_dim(n: usize) -> impl Strategy<Value = ComplexMatrix> {
        proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), n * n).prop_map(move |raw| {
            let mut m = ComplexMatrix::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    let (re, im) = raw[i * n + j];
                    m[(i, j)] = c(re, im);
                }
            }
            m.add(&m.adjoint()).unwrap().scaled(0.5)
        })
    }

    fn hermitian_strategy(max_dim: usize) -> impl Strategy<Value = ComplexMatrix> {
        (1..=max_dim).prop_flat_map(hermitian_of_dim)
    }

    fn hermitian_pair(max_dim: usize) -> impl Strategy<Value = (ComplexMatrix, ComplexMatrix)> {
        (1..=max_dim).prop_flat_map(|n| (hermitian_of_dim(n), hermitian_of_dim(n)))
    }

    proptest! {
        #[test]
        fn lowest_eigenvalue_matches_full_solve(h in hermitian_strategy(5)) {
            let full = hermitian_eigensystem(&h).unwrap().ground_energy();
            prop_assert!((lowest_eigenvalue(&h) - full).abs() < 1e-12 * h.frobenius_norm().max(1.0));
        }

        #[test]
        fn reconstructs_random_hermitian(h in hermitian_strategy(8)) {
            let es = hermitian_eigensystem(&h).unwrap();
            let n = h.dim();
            let mut rebuilt = ComplexMatrix::zeros(n);
            for (lambda, v) in es.eigenvalues.iter().zip(&es.eigenvectors) {
                let a = v.amplitudes();
                for i in 0..n {
                    for j in 0..n {
                        rebuilt[(i, j)] += a[i] * a[j].conj() * *lambda;
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    prop_assert!((rebuilt[(i, j)] - h[(i, j)]).norm() < 1e-11);
                }
            }
            for w in es.eigenvalues.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            for i in 0..n {
                for j in 0..n {
                    let ip = overlap(&es.eigenvectors[i], &es.eigenvectors[j]).unwrap();
                    let delta = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((ip - c(delta, 0.0)).norm() < 1e-12);
                }
            }
            prop_assert!(residual(&h, &es) <= 1e-12 * h.frobenius_norm().max(1.0));
        }

        #[test]
        fn eigenvalues_survive_unitary_conjugation((h, g) in hermitian_pair(6)) {
            // A unitary from the eigenvectors of an unrelated Hermitian matrix.
            let basis = hermitian_eigensystem(&g).unwrap();
            let n = g.dim();
            let mut u = ComplexMatrix::zeros(n);
            for (j, v) in basis.eigenvectors.iter().enumerate() {
                for i in 0..n {
                    u[(i, j)] = v.amplitudes()[i];
                }
            }
            let rotated = u.matmul(&h).unwrap().matmul(&u.adjoint()).unwrap();
            let sym = rotated.add(&rotated.adjoint()).unwrap().scaled(0.5);
            let a = hermitian_eigensystem(&h).unwrap();
            let b = hermitian_eigensystem(&sym).unwrap();
            for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                prop_assert!((x - y).abs() < 1e-12 * h.frobenius_norm().max(1.0));
            }
        }

        #[test]
        fn eigensystem_is_a_pure_function(h in hermitian_strategy(5)) {
            let a = hermitian_eigensystem(&h).unwrap();
            let b = hermitian_eigensystem(&h).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
