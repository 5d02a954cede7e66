//! Independent reference implementations used to cross-check the main
//! numerics: a fixed-step classical Runge-Kutta propagator and the closed
//! form of a 2x2 Hermitian eigenproblem.

use num_complex::Complex64;

use crate::hamiltonian::HamiltonianPath;
use crate::linalg::{ComplexMatrix, QuantumState};

/// Classical RK4 on `i dpsi/ds = T H(s) psi` with a fixed step no larger than `step`.
pub fn rk4_evolve(
    path: &HamiltonianPath,
    total_time: f64,
    window: (f64, f64),
    step: f64,
    psi0: &QuantumState,
) -> QuantumState {
    let (s0, s1) = window;
    let n = psi0.dim();
    let steps = ((s1 - s0) / step).ceil().max(1.0) as usize;
    let h = (s1 - s0) / steps as f64;
    let mut m = ComplexMatrix::zeros(n);
    let zero = Complex64::new(0.0, 0.0);
    let minus_i_t = Complex64::new(0.0, -total_time);

    let mut f = |s: f64, y: &[Complex64], out: &mut Vec<Complex64>| {
        path.evaluate_into(s, &mut m);
        m.apply_into(y, out);
        for o in out.iter_mut() {
            *o *= minus_i_t;
        }
    };

    let mut y = psi0.amplitudes().to_vec();
    let (mut k1, mut k2, mut k3, mut k4) =
        (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
    let mut tmp = vec![zero; n];
    for i in 0..steps {
        let s = s0 + i as f64 * h;
        f(s, &y, &mut k1);
        for j in 0..n {
            tmp[j] = y[j] + k1[j] * (0.5 * h);
        }
        f(s + 0.5 * h, &tmp, &mut k2);
        for j in 0..n {
            tmp[j] = y[j] + k2[j] * (0.5 * h);
        }
        f(s + 0.5 * h, &tmp, &mut k3);
        for j in 0..n {
            tmp[j] = y[j] + k3[j] * h;
        }
        f(s + h, &tmp, &mut k4);
        for j in 0..n {
            y[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (h / 6.0);
        }
    }
    QuantumState::new(y)
}

/// Eigenvalues of `[[a, b], [conj(b), d]]` in ascending order, from the quadratic formula.
pub fn eigenvalues_2x2(h: &ComplexMatrix) -> [f64; 2] {
    assert_eq!(h.dim(), 2);
    let a = h[(0, 0)].re;
    let d = h[(1, 1)].re;
    let b = h[(0, 1)].norm();
    let mean = 0.5 * (a + d);
    let half = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    [mean - half, mean + half]
}

/// Ground-state vector of a 2x2 Hermitian matrix, normalized, with an
/// arbitrary global phase.
pub fn ground_state_2x2(h: &ComplexMatrix) -> QuantumState {
    let [lo, _] = eigenvalues_2x2(h);
    let b = h[(0, 1)];
    if b.norm() == 0.0 {
        let i = if h[(0, 0)].re <= h[(1, 1)].re { 0 } else { 1 };
        return QuantumState::basis(2, i);
    }
    // (H - lo) v = 0 with v = (b, lo - a).
    let v = [b, Complex64::new(lo - h[(0, 0)].re, 0.0)];
    let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    QuantumState::new(vec![v[0] / norm, v[1] / norm])
}
