//! Scalar schedule functions on scaled time `s in [0, 1]`.
//!
//! Every schedule carries an analytic value, first and second derivative.
//! Higher endpoint derivatives (orders 3 to 6) fall back to Richardson
//! extrapolated one-sided differences of the analytic second derivative.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Highest endpoint derivative order supported by [`Schedule::endpoint_deriv`].
pub const MAX_ENDPOINT_ORDER: u32 = 6;

/// Base relative step of the endpoint finite-difference ladder. The ladder is
/// `{1, 1/2, 1/4} * FD_BASE_STEP * max(k, FD_MIN_SCALE)`.
pub const FD_BASE_STEP: f64 = 1e-2;
pub const FD_MIN_SCALE: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("scaled time {0} outside [0, 1]")]
    OutOfDomain(f64),

    #[error("endpoint derivative of order {0} unsupported (max {MAX_ENDPOINT_ORDER})")]
    UnsupportedOrder(u32),

    #[error("negative smoothing parameter k = {0}")]
    NegativeK(f64),
}

pub type Result<T> = std::result::Result<T, ScheduleError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Endpoint {
    Start,
    End,
}

impl Endpoint {
    pub fn s(self) -> f64 {
        match self {
            Endpoint::Start => 0.0,
            Endpoint::End => 1.0,
        }
    }
}

/// Constant in front of the rational smoothing family.
///
/// `AsPrinted` is `(1 + 2k)^(-2n)`; `MidpointNormalized` is `(1 + 2k)^(2n)`,
/// the one that makes `f(1/2; k) = f0(1/2)` hold exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prefactor {
    AsPrinted,
    #[default]
    MidpointNormalized,
}

impl Prefactor {
    pub fn value(self, k: f64, order: u32) -> f64 {
        let base = (1.0 + 2.0 * k).powi(2 * order as i32);
        match self {
            Prefactor::AsPrinted => 1.0 / base,
            Prefactor::MidpointNormalized => base,
        }
    }
}

/// Value and first two derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub const ONE: Jet = Jet {
        value: 1.0,
        d1: 0.0,
        d2: 0.0,
    };

    fn mul(self, o: Jet) -> Jet {
        Jet {
            value: self.value * o.value,
            d1: self.d1 * o.value + self.value * o.d1,
            d2: self.d2 * o.value + 2.0 * self.d1 * o.d1 + self.value * o.d2,
        }
    }

    fn scale(self, c: f64) -> Jet {
        Jet {
            value: c * self.value,
            d1: c * self.d1,
            d2: c * self.d2,
        }
    }

    /// Jet of `s -> u(1 - s)` given the jet of `u` at `1 - s`.
    fn mirror(self) -> Jet {
        Jet {
            value: self.value,
            d1: -self.d1,
            d2: self.d2,
        }
    }
}

/// A schedule of scaled time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Schedule {
    Constant {
        c: f64,
    },
    /// `s (1 - s)`.
    F0,
    /// `C * g(s;k)^n * s(1-s) * g(1-s;k)^n`.
    Rational {
        k: f64,
        order: u32,
        prefactor: Prefactor,
    },
    /// `s(1-s) exp(-k / (s(1-s)))`, zero at both endpoints.
    Exponential {
        k: f64,
    },
    /// `g(s;k)^n` with `g(s;k) = s / (s + k)`, or `g(1-s;k)^n` when mirrored.
    GPower {
        k: f64,
        order: u32,
        mirrored: bool,
    },
    Product {
        factors: Vec<Schedule>,
    },
}

impl Schedule {
    pub fn constant(c: f64) -> Self {
        Schedule::Constant { c }
    }

    /// The rational smoothing family. `k = 0` or `order = 0` is exactly `F0`.
    pub fn rational(k: f64, order: u32, prefactor: Prefactor) -> Result<Self> {
        check_k(k)?;
        if k == 0.0 || order == 0 {
            return Ok(Schedule::F0);
        }
        Ok(Schedule::Rational {
            k,
            order,
            prefactor,
        })
    }

    /// The essential-singularity family. `k = 0` is exactly `F0`.
    pub fn exponential(k: f64) -> Result<Self> {
        check_k(k)?;
        if k == 0.0 {
            return Ok(Schedule::F0);
        }
        Ok(Schedule::Exponential { k })
    }

    pub fn g_power(k: f64, order: u32, mirrored: bool) -> Result<Self> {
        check_k(k)?;
        Ok(Schedule::GPower { k, order, mirrored })
    }

    pub fn product(factors: Vec<Schedule>) -> Self {
        Schedule::Product { factors }
    }

    pub fn value(&self, s: f64) -> Result<f64> {
        check_domain(s)?;
        Ok(self.jet(s).value)
    }

    pub fn deriv1(&self, s: f64) -> Result<f64> {
        check_domain(s)?;
        Ok(self.jet(s).d1)
    }

    pub fn deriv2(&self, s: f64) -> Result<f64> {
        check_domain(s)?;
        Ok(self.jet(s).d2)
    }

    /// Value and derivatives without the domain check. Callers guarantee
    /// `s in [0, 1]`.
    pub fn jet(&self, s: f64) -> Jet {
        match self {
            Schedule::Constant { c } => Jet {
                value: *c,
                d1: 0.0,
                d2: 0.0,
            },
            Schedule::F0 => f0_jet(s),
            Schedule::Rational {
                k,
                order,
                prefactor,
            } => {
                // Midpoint normalization folds (1 + 2k) into every g factor, so
                // each factor is exactly 1 at s = 1/2.
                let (lift, outer) = match prefactor {
                    Prefactor::MidpointNormalized => (1.0 + 2.0 * k, 1.0),
                    Prefactor::AsPrinted => (1.0, prefactor.value(*k, *order)),
                };
                let left = scaled_g_power_jet(s, *k, *order, lift);
                let right = scaled_g_power_jet(1.0 - s, *k, *order, lift).mirror();
                left.mul(f0_jet(s)).mul(right).scale(outer)
            }
            Schedule::Exponential { k } => exponential_jet(s, *k),
            Schedule::GPower { k, order, mirrored } => {
                if *mirrored {
                    g_power_jet(1.0 - s, *k, *order).mirror()
                } else {
                    g_power_jet(s, *k, *order)
                }
            }
            Schedule::Product { factors } => {
                factors.iter().fold(Jet::ONE, |acc, f| acc.mul(f.jet(s)))
            }
        }
    }

    /// Value only, without the domain check. Cheaper than [`Schedule::jet`]
    /// for the integrator hot loop.
    #[inline]
    pub fn value_unchecked(&self, s: f64) -> f64 {
        match self {
            Schedule::Constant { c } => *c,
            Schedule::F0 => s * (1.0 - s),
            Schedule::Rational {
                k,
                order,
                prefactor,
            } => {
                let (lift, outer) = match prefactor {
                    Prefactor::MidpointNormalized => (1.0 + 2.0 * k, 1.0),
                    Prefactor::AsPrinted => (1.0, prefactor.value(*k, *order)),
                };
                let g = ((lift * s) / (s + k)) * ((lift * (1.0 - s)) / (1.0 - s + k));
                let smooth = if *order == 1 {
                    g
                } else {
                    g.powi(*order as i32)
                };
                outer * (smooth * (s * (1.0 - s)))
            }
            Schedule::Exponential { k } => {
                let u = s * (1.0 - s);
                if u <= 0.0 {
                    0.0
                } else {
                    u * (-k / u).exp()
                }
            }
            _ => self.jet(s).value,
        }
    }

    /// True when every derivative vanishes at both endpoints.
    pub fn is_flat_at_endpoints(&self) -> bool {
        match self {
            Schedule::Exponential { k } => *k > 0.0,
            Schedule::Product { factors } => factors.iter().any(Schedule::is_flat_at_endpoints),
            _ => false,
        }
    }

    /// Smallest positive smoothing parameter involved, if any.
    pub fn smallest_k(&self) -> Option<f64> {
        match self {
            Schedule::Rational { k, .. }
            | Schedule::Exponential { k }
            | Schedule::GPower { k, .. } => (*k > 0.0).then_some(*k),
            Schedule::Product { factors } => factors
                .iter()
                .filter_map(Schedule::smallest_k)
                .min_by(f64::total_cmp),
            _ => None,
        }
    }

    /// `m`-th derivative at an endpoint.
    ///
    /// Orders 0 to 2 are analytic. Orders 3 to 6 difference the analytic
    /// second derivative one-sidedly on the steps
    /// `h, h/2, h/4` with `h = FD_BASE_STEP * max(k, FD_MIN_SCALE)` and combine
    /// them with two rounds of Richardson extrapolation (error `O(h^3)`).
    pub fn endpoint_deriv(&self, endpoint: Endpoint, order: u32) -> Result<f64> {
        if order > MAX_ENDPOINT_ORDER {
            return Err(ScheduleError::UnsupportedOrder(order));
        }
        if self.is_flat_at_endpoints() {
            return Ok(0.0);
        }
        let s = endpoint.s();
        let jet = self.jet(s);
        match order {
            0 => Ok(jet.value),
            1 => Ok(jet.d1),
            2 => Ok(jet.d2),
            m => {
                let p = m - 2;
                let h = FD_BASE_STEP * self.smallest_k().unwrap_or(1.0).max(FD_MIN_SCALE);
                let d = |step: f64| self.one_sided_difference(endpoint, p, step);
                let (d0, d1, d2) = (d(h), d(h / 2.0), d(h / 4.0));
                let r0 = 2.0 * d1 - d0;
                let r1 = 2.0 * d2 - d1;
                Ok((4.0 * r1 - r0) / 3.0)
            }
        }
    }

    /// `p`-th forward (at `Start`) or backward (at `End`) difference of the
    /// second derivative, divided by `h^p`.
    fn one_sided_difference(&self, endpoint: Endpoint, p: u32, h: f64) -> f64 {
        let mut acc = 0.0;
        let mut binom = 1.0;
        for i in 0..=p {
            if i > 0 {
                binom *= (p - i + 1) as f64 / i as f64;
            }
            let (s, sign) = match endpoint {
                Endpoint::Start => (
                    i as f64 * h,
                    if (p - i).is_multiple_of(2) { 1.0 } else { -1.0 },
                ),
                Endpoint::End => (1.0 - i as f64 * h, if i % 2 == 0 { 1.0 } else { -1.0 }),
            };
            acc += sign * binom * self.jet(s).d2;
        }
        acc / h.powi(p as i32)
    }

    pub fn describe(&self) -> String {
        match self {
            Schedule::Constant { c } => format!("{c}"),
            Schedule::F0 => "f0".into(),
            Schedule::Rational {
                k,
                order,
                prefactor,
            } => format!("rational(k={k}, n={order}, {prefactor:?})"),
            Schedule::Exponential { k } => format!("exponential(k={k})"),
            Schedule::GPower { k, order, mirrored } => {
                format!(
                    "g{}(k={k})^{order}",
                    if *mirrored { "(1-s)" } else { "(s)" }
                )
            }
            Schedule::Product { factors } => factors
                .iter()
                .map(Schedule::describe)
                .collect::<Vec<_>>()
                .join(" * "),
        }
    }
}

fn check_domain(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(ScheduleError::OutOfDomain(s))
    }
}

fn check_k(k: f64) -> Result<()> {
    if k >= 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(ScheduleError::NegativeK(k))
    }
}

#[inline]
fn f0_jet(s: f64) -> Jet {
    Jet {
        value: s * (1.0 - s),
        d1: 1.0 - 2.0 * s,
        d2: -2.0,
    }
}

/// Jet of `(x / (x + k))^n` in the variable `x`.
#[inline]
fn g_power_jet(x: f64, k: f64, order: u32) -> Jet {
    scaled_g_power_jet(x, k, order, 1.0)
}

/// Jet of `(lift * x / (x + k))^n`.
#[inline]
fn scaled_g_power_jet(x: f64, k: f64, order: u32, lift: f64) -> Jet {
    if k == 0.0 || order == 0 {
        return Jet::ONE;
    }
    let den = x + k;
    let g = Jet {
        value: (lift * x) / den,
        d1: lift * k / (den * den),
        d2: -2.0 * lift * k / (den * den * den),
    };
    (1..order).fold(g, |acc, _| acc.mul(g))
}

#[inline]
fn exponential_jet(s: f64, k: f64) -> Jet {
    let u = s * (1.0 - s);
    if u <= 0.0 {
        return Jet {
            value: 0.0,
            d1: 0.0,
            d2: 0.0,
        };
    }
    let e = (-k / u).exp();
    if e == 0.0 {
        return Jet {
            value: 0.0,
            d1: 0.0,
            d2: 0.0,
        };
    }
    let du = 1.0 - 2.0 * s;
    let r = k / u;
    Jet {
        value: u * e,
        d1: du * e * (1.0 + r),
        d2: -2.0 * e * (1.0 + r) + du * du * e * r * r / u,
    }
}
