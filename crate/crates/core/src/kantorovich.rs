//! Newton–Kantorovich constants for the moment system.
//!
//! With `K` a Lipschitz constant of `V(β₀)⁻¹V(·)` and `η = ‖V(β₀)⁻¹H(β₀)‖∞`,
//! the condition `h = Kη ≤ 1/2` certifies that the Newton iterates from `β₀`
//! converge, stay within `t* = 2η/(1 + √(1 − 2h))` of `β₀`, and satisfy
//! `‖β̂ − β_k‖∞ ≤ 2^{1−k}(2h)^{2^k − 1}η` for `k ≥ 1`.

use serde::{Deserialize, Serialize};

use crate::estimator::{FitError, MomentSystem};
use crate::inference::{approx_inverse, approx_inverse_error_bound};
use crate::linalg::{inf_norm, Cholesky};

/// Where the `‖V⁻¹ − S‖_max` term in `K` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproxErrorSource {
    /// Random-design bound with `T` and `p` read off the data.
    DesignBound,
    /// Exact `‖V⁻¹ − S‖_max` at `β₀` (used when the bound is undefined).
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KantorovichReport {
    pub k: f64,
    pub eta: f64,
    pub h: f64,
    /// `None` when `h > 1/2`.
    pub t_star: Option<f64>,
    pub certified: bool,
    pub approx_error: f64,
    pub approx_error_source: ApproxErrorSource,
}

impl KantorovichReport {
    pub fn from_constants(k: f64, eta: f64) -> Self {
        Self::with_source(k, eta, f64::NAN, ApproxErrorSource::Exact)
    }

    fn with_source(
        k: f64,
        eta: f64,
        approx_error: f64,
        approx_error_source: ApproxErrorSource,
    ) -> Self {
        let h = if eta == 0.0 { 0.0 } else { k * eta };
        let certified = h <= 0.5;
        let t_star = certified.then(|| 2.0 * eta / (1.0 + (1.0 - 2.0 * h).max(0.0).sqrt()));
        Self {
            k,
            eta,
            h,
            t_star,
            certified,
            approx_error,
            approx_error_source,
        }
    }

    /// A priori bound on `‖β̂ − β_k‖∞` after `k` Newton steps; `None` when
    /// the condition is not certified.
    pub fn error_bound_at(&self, k: u32) -> Option<f64> {
        if !self.certified {
            return None;
        }
        if k == 0 {
            return self.t_star;
        }
        if self.eta == 0.0 {
            return Some(0.0);
        }
        let exponent = 2f64.powi(k as i32) - 1.0;
        Some(2f64.powi(1 - k as i32) * (2.0 * self.h).powf(exponent) * self.eta)
    }
}

/// Constants at `beta0` for merits confined to `‖β‖∞ ≤ radius`.
///
/// `K = (2/(b0·t_min) + n·E)·4·b2·t_max`, where `E` bounds `‖V⁻¹ − S‖_max`:
/// the random-design bound evaluated with `T = max t_ij` and `p` the share
/// of compared pairs, or the exact value when `n < 2`.
pub fn kantorovich_diagnostics(
    system: &MomentSystem,
    beta0: &[f64],
    radius: f64,
) -> Result<KantorovichReport, FitError> {
    let jac = system.jacobian(beta0)?;
    let h = system.residual(beta0)?;
    let chol = Cholesky::factor(&jac.v).map_err(|e| FitError::SingularJacobian {
        iteration: 0,
        row: e.row,
    })?;
    let eta = inf_norm(&chol.solve(&h));

    let bounds = system
        .link()
        .derivative_bounds(radius)
        .map_err(|e| FitError::Link(e.to_string()))?;
    let data = system.data();
    let n = system.n_free();
    let t_min = data.totals().iter().copied().min().unwrap_or(0) as f64;
    let t_max = data.totals().iter().copied().max().unwrap_or(0) as f64;

    let n_subjects = data.n_subjects();
    let pairs = (n_subjects * (n_subjects - 1) / 2) as f64;
    let compared = system.edges().len() as f64;
    let trials = system.edges().iter().fold(0.0f64, |m, e| m.max(e.2));
    let p = compared / pairs;

    let (approx_error, source) = match approx_inverse_error_bound(n, trials as u32, p, &bounds) {
        Ok(b) => (b, ApproxErrorSource::DesignBound),
        Err(_) => {
            let s = approx_inverse(&jac).map_err(|_| FitError::SingularJacobian {
                iteration: 0,
                row: 0,
            })?;
            (chol.inverse().max_abs_diff(&s), ApproxErrorSource::Exact)
        }
    };

    let k = (2.0 / (bounds.b0 * t_min) + n as f64 * approx_error) * 4.0 * bounds.b2 * t_max;
    Ok(KantorovichReport::with_source(k, eta, approx_error, source))
}
