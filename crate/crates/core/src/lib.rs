//! Numerical experiments on adiabatic state preparation.
//!
//! The crate integrates `i dpsi/ds = T H(s) psi` for small model
//! Hamiltonians, measures the preparation error as a function of the total
//! evolution time `T`, and compares it with the leading-order
//! switching-theorem estimates built from endpoint derivatives of `H`.

pub mod check;
pub mod config;
pub mod evolution;
pub mod hamiltonian;
pub mod linalg;
pub mod metrics;
pub mod oracle;
pub mod schedule;
pub mod sweep;

pub use num_complex::Complex64;
