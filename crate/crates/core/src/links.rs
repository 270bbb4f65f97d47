//! Link kernels for the paired comparison model `P(i beats j) = μ(βᵢ − βⱼ)`.
//!
//! Two closed-form families are provided: the logistic kernel (Bradley–Terry)
//! and the standard normal kernel (Thurstone, unit scale). User-supplied
//! kernels go through [`CustomLink::register`], which checks symmetry and
//! monotonicity before the kernel can be used anywhere in the inference stack.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use libm::erfc;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;
use thiserror::Error;

/// `1/√(2π)`.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("unknown link `{0}` (expected `logistic` or `probit`)")]
    UnknownLink(String),
    #[error("radius must be non-negative, got {0}")]
    NegativeRadius(f64),
    #[error("custom link `{name}` violates symmetry at x = {x}: mu(x) + mu(-x) - 1 = {gap:e}")]
    Asymmetric { name: String, x: f64, gap: f64 },
    #[error("custom link `{name}` is not strictly increasing at x = {x} (mu'(x) = {slope:e})")]
    NotIncreasing { name: String, x: f64, slope: f64 },
    #[error("custom link `{name}` leaves [0, 1] at x = {x}")]
    OutOfRange { name: String, x: f64 },
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-provided symmetric link that passed registration checks.
#[derive(Clone)]
pub struct CustomLink {
    name: String,
    mu: RealFn,
    mu_prime: RealFn,
    mu_double_prime: RealFn,
}

impl fmt::Debug for CustomLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLink")
            .field("name", &self.name)
            .finish()
    }
}

/// Symmetry tolerance applied when registering a custom link.
const REGISTRATION_SYMMETRY_TOL: f64 = 1e-10;
/// Half-width of the registration grid.
const REGISTRATION_RANGE: f64 = 10.0;
const REGISTRATION_POINTS: usize = 2001;

impl CustomLink {
    /// Validates and wraps a kernel given as `μ`, `μ′`, `μ″`.
    ///
    /// The kernel is probed on a grid over `[-10, 10]`: it must stay in
    /// `[0, 1]`, satisfy `μ(x) + μ(−x) = 1`, and have `μ′ > 0`.
    pub fn register<M, D1, D2>(
        name: impl Into<String>,
        mu: M,
        mu_prime: D1,
        mu_double_prime: D2,
    ) -> Result<LinkModel, LinkError>
    where
        M: Fn(f64) -> f64 + Send + Sync + 'static,
        D1: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let name = name.into();
        let step = 2.0 * REGISTRATION_RANGE / (REGISTRATION_POINTS - 1) as f64;
        for k in 0..REGISTRATION_POINTS {
            let x = -REGISTRATION_RANGE + k as f64 * step;
            let m = mu(x);
            if !(0.0..=1.0).contains(&m) {
                return Err(LinkError::OutOfRange { name, x });
            }
            let gap = m + mu(-x) - 1.0;
            if gap.abs() > REGISTRATION_SYMMETRY_TOL {
                return Err(LinkError::Asymmetric { name, x, gap });
            }
            let slope = mu_prime(x);
            if !(slope > 0.0) {
                return Err(LinkError::NotIncreasing { name, x, slope });
            }
        }
        Ok(LinkModel::Custom(CustomLink {
            name,
            mu: Arc::new(mu),
            mu_prime: Arc::new(mu_prime),
            mu_double_prime: Arc::new(mu_double_prime),
        }))
    }
}

/// A link kernel `μ` with its first two derivatives and inverse.
#[derive(Clone, Debug)]
pub enum LinkModel {
    Logistic,
    Probit,
    Custom(CustomLink),
}

impl LinkModel {
    pub fn name(&self) -> &str {
        match self {
            LinkModel::Logistic => "logistic",
            LinkModel::Probit => "probit",
            LinkModel::Custom(c) => &c.name,
        }
    }

    /// Win probability for a merit difference `x`.
    #[inline]
    pub fn mu(&self, x: f64) -> f64 {
        match self {
            LinkModel::Logistic => logistic(x),
            LinkModel::Probit => normal_cdf(x),
            LinkModel::Custom(c) => (c.mu)(x),
        }
    }

    #[inline]
    pub fn mu_prime(&self, x: f64) -> f64 {
        match self {
            LinkModel::Logistic => {
                let e = (-x.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            LinkModel::Probit => normal_pdf(x),
            LinkModel::Custom(c) => (c.mu_prime)(x),
        }
    }

    #[inline]
    pub fn mu_double_prime(&self, x: f64) -> f64 {
        match self {
            // e^x(1 - e^x)/(1 + e^x)^3 = -μ'(x) tanh(x/2)
            LinkModel::Logistic => -self.mu_prime(x) * (0.5 * x).tanh(),
            LinkModel::Probit => -x * normal_pdf(x),
            LinkModel::Custom(c) => (c.mu_double_prime)(x),
        }
    }

    /// Inverse of `μ` on `(0, 1)`. Returns `±∞` at the endpoints and NaN
    /// outside `[0, 1]`.
    pub fn mu_inverse(&self, p: f64) -> f64 {
        if !(0.0..=1.0).contains(&p) {
            return f64::NAN;
        }
        if p == 0.0 {
            return f64::NEG_INFINITY;
        }
        if p == 1.0 {
            return f64::INFINITY;
        }
        match self {
            LinkModel::Logistic => p.ln() - (-p).ln_1p(),
            LinkModel::Probit => normal_quantile(p),
            LinkModel::Custom(c) => bisect_inverse(&*c.mu, p),
        }
    }

    /// Derivative bounds `b0 ≤ |μ′| ≤ b1`, `|μ″| ≤ b2` for merit differences
    /// `|x| ≤ 2·radius`.
    pub fn derivative_bounds(&self, radius: f64) -> Result<DerivativeBounds, LinkError> {
        if !(radius >= 0.0) {
            return Err(LinkError::NegativeRadius(radius));
        }
        let bounds = match self {
            LinkModel::Logistic => DerivativeBounds {
                b0: self.mu_prime(2.0 * radius),
                b1: 0.25,
                b2: 0.25,
                interval_radius: radius,
            },
            LinkModel::Probit => DerivativeBounds {
                b0: normal_pdf(2.0 * radius),
                b1: INV_SQRT_2PI,
                b2: (-0.5f64).exp() * INV_SQRT_2PI,
                interval_radius: radius,
            },
            LinkModel::Custom(_) => self.grid_bounds(radius),
        };
        Ok(bounds)
    }

    /// Dense grid search, widened by the grid spacing times a slope estimate
    /// so that off-grid points still respect the bounds.
    fn grid_bounds(&self, radius: f64) -> DerivativeBounds {
        const POINTS: usize = 20_001;
        let half = 2.0 * radius;
        let h = if half > 0.0 {
            2.0 * half / (POINTS - 1) as f64
        } else {
            0.0
        };
        let count = if half > 0.0 { POINTS } else { 1 };
        let (mut lo, mut hi, mut curv) = (f64::INFINITY, 0.0f64, 0.0f64);
        let mut third = 0.0f64;
        let mut prev_dd: Option<f64> = None;
        for k in 0..count {
            let x = -half + k as f64 * h;
            let d1 = self.mu_prime(x).abs();
            let d2 = self.mu_double_prime(x);
            lo = lo.min(d1);
            hi = hi.max(d1);
            curv = curv.max(d2.abs());
            if let Some(p) = prev_dd {
                third = third.max((d2 - p).abs());
            }
            prev_dd = Some(d2);
        }
        let pad1 = 0.5 * h * curv;
        let b0 = if lo - pad1 > 0.0 { lo - pad1 } else { 0.5 * lo };
        DerivativeBounds {
            b0,
            b1: hi + pad1,
            b2: curv + third,
            interval_radius: radius,
        }
    }
}

impl FromStr for LinkModel {
    type Err = LinkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logistic" | "logit" | "bradley-terry" => Ok(LinkModel::Logistic),
            "probit" | "normal" | "thurstone" => Ok(LinkModel::Probit),
            other => Err(LinkError::UnknownLink(other.to_string())),
        }
    }
}

impl fmt::Display for LinkModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Interval bounds on `|μ′|` and `|μ″|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBounds {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub interval_radius: f64,
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal quantile. The upper tail is evaluated through `1 − p`
/// (exact for `p > 1/2`) and one Newton step polishes the result.
pub fn normal_quantile(p: f64) -> f64 {
    if !(p > 0.0 && p < 1.0) {
        return match p {
            0.0 => f64::NEG_INFINITY,
            1.0 => f64::INFINITY,
            _ => f64::NAN,
        };
    }
    let (x, upper) = if p > 0.5 {
        (SQRT_2 * erfc_inv(2.0 * (1.0 - p)), true)
    } else {
        (-SQRT_2 * erfc_inv(2.0 * p), false)
    };
    let dens = normal_pdf(x);
    if dens <= 0.0 || !x.is_finite() {
        return x;
    }
    // Residual in the tail where it carries full relative precision.
    let resid = if upper {
        (1.0 - p) - 0.5 * erfc(x / SQRT_2)
    } else {
        normal_cdf(x) - p
    };
    x - resid / dens
}

/// Geometric bracket expansion followed by bisection to `1e-12`.
fn bisect_inverse(mu: &dyn Fn(f64) -> f64, p: f64) -> f64 {
    let mut lo = -1.0;
    let mut hi = 1.0;
    while mu(lo) > p && lo > -1e6 {
        lo *= 2.0;
    }
    while mu(hi) < p && hi < 1e6 {
        hi *= 2.0;
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if mu(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Maximum of `|x φ(x)|`, attained at `|x| = 1`.
pub fn probit_curvature_max() -> f64 {
    (-0.5f64).exp() / (2.0 * PI).sqrt()
}
