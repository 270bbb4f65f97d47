//! Variance estimation for the moment estimator.
//!
//! `V⁻¹` has no closed form, so it is replaced by the diagonal-plus-constant
//! matrix `S` with `s_ij = δ_ij/v_ii + 1/v_00`. With `U` the conditional
//! covariance of the scores given the graph, the plug-in covariance of `β̂`
//! has entries `σ_ij = δ_ij·u_ii/v_ii² + u_00/v_00²`, evaluated at `β̂`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{FitError, JacobianView, MomentSystem};
use crate::graph::ComparisonData;
use crate::linalg::{Cholesky, DenseMatrix};
use crate::links::{normal_quantile, DerivativeBounds, LinkModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("subject {0} has no comparisons (zero Jacobian diagonal)")]
    ZeroDiagonal(usize),
    #[error("pair needs two distinct subjects, got ({0}, {0})")]
    SameSubject(usize),
    #[error("subject {0} is out of range")]
    SubjectOutOfRange(usize),
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("variance of pair ({i}, {j}) is zero; the interval is degenerate")]
    DegenerateVariance { i: usize, j: usize },
    #[error("approximation bound needs {0}")]
    InvalidDesign(&'static str),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// `S` with `s_ij = δ_ij/v_ii + 1/v_00` over the free subjects.
pub fn approx_inverse(v: &JacobianView) -> Result<DenseMatrix, InferenceError> {
    if !(v.v_00 > 0.0) {
        return Err(InferenceError::ZeroDiagonal(v.baseline));
    }
    let n = v.dim();
    let diag = v.v.diagonal();
    if let Some(p) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(InferenceError::ZeroDiagonal(v.free[p]));
    }
    let c = 1.0 / v.v_00;
    Ok(DenseMatrix::from_fn(n, |i, j| {
        if i == j {
            1.0 / diag[i] + c
        } else {
            c
        }
    }))
}

/// Random-design bound `12·T·b1² / (b0³·n(n−1)·p³)` on `‖V⁻¹ − S‖_max`.
pub fn approx_inverse_error_bound(
    n: usize,
    trials: u32,
    p: f64,
    bounds: &DerivativeBounds,
) -> Result<f64, InferenceError> {
    if n < 2 {
        return Err(InferenceError::InvalidDesign("at least 2 free subjects"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(InferenceError::InvalidDesign(
            "a comparison probability in (0, 1]",
        ));
    }
    if trials == 0 {
        return Err(InferenceError::InvalidDesign("a positive number of trials"));
    }
    let n = n as f64;
    Ok(12.0 * f64::from(trials) * bounds.b1 * bounds.b1
        / (bounds.b0.powi(3) * n * (n - 1.0) * p.powi(3)))
}

/// Fixed-design analogue `2·T²·b1²·ρ_max / (b0³·τ³·n²)` with
/// `ρ_max = t_max / n`.
pub fn fixed_design_error_bound(
    n: usize,
    trials: u32,
    tau: f64,
    t_max: u64,
    bounds: &DerivativeBounds,
) -> Result<f64, InferenceError> {
    if n == 0 {
        return Err(InferenceError::InvalidDesign("at least 1 free subject"));
    }
    if !(tau > 0.0) {
        return Err(InferenceError::InvalidDesign(
            "a positive common-neighbour ratio",
        ));
    }
    let n = n as f64;
    let t = f64::from(trials);
    let rho_max = t_max as f64 / n;
    Ok(2.0 * t * t * bounds.b1 * bounds.b1 * rho_max / (bounds.b0.powi(3) * tau.powi(3) * n * n))
}

/// `u_ii = Σ_j t_ij·μ(π̂_ij)·(1 − μ(π̂_ij))` for every subject.
pub fn conditional_variance(data: &ComparisonData, beta_hat: &[f64], link: &LinkModel) -> Vec<f64> {
    let n = data.n_subjects();
    let mut u = vec![0.0; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let t = data.t().get(i, j);
            if t == 0 {
                continue;
            }
            let x = beta_hat[i] - beta_hat[j];
            let w = f64::from(t) * link.mu(x) * link.mu(-x);
            u[i] += w;
            u[j] += w;
        }
    }
    u
}

/// Plug-in covariance summary at a fitted merit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub beta_hat: Vec<f64>,
    pub jacobian: JacobianView,
    /// `v_kk` for all subjects; the baseline entry is `v_00`.
    pub v_diag: Vec<f64>,
    /// `u_kk` for all subjects.
    pub u_diag: Vec<f64>,
    /// `√(u_kk/v_kk² + u_00/v_00²)` for all subjects. For a free subject
    /// this is `√σ_kk`, the standard error of `β̂_k − β̂_baseline`.
    pub se: Vec<f64>,
}

impl CovarianceReport {
    pub fn new(system: &MomentSystem, beta_hat: &[f64]) -> Result<Self, InferenceError> {
        let jacobian = system.jacobian(beta_hat)?;
        let v_diag = jacobian.full_diagonal();
        let u_diag = conditional_variance(system.data(), beta_hat, system.link());
        let b = system.baseline();
        let base = if v_diag[b] > 0.0 {
            u_diag[b] / (v_diag[b] * v_diag[b])
        } else {
            f64::INFINITY
        };
        let se = v_diag
            .iter()
            .zip(&u_diag)
            .map(|(&v, &u)| {
                if v > 0.0 {
                    (u / (v * v) + base).sqrt()
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        Ok(Self {
            beta_hat: beta_hat.to_vec(),
            jacobian,
            v_diag,
            u_diag,
            se,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.v_diag.len()
    }

    pub fn baseline(&self) -> usize {
        self.jacobian.baseline
    }

    fn check(&self, i: usize) -> Result<(), InferenceError> {
        if i >= self.n_subjects() {
            Err(InferenceError::SubjectOutOfRange(i))
        } else {
            Ok(())
        }
    }

    fn ratio(&self, k: usize) -> Result<f64, InferenceError> {
        let v = self.v_diag[k];
        if !(v > 0.0) {
            return Err(InferenceError::ZeroDiagonal(k));
        }
        Ok(self.u_diag[k] / (v * v))
    }

    /// `σ_ij = δ_ij·u_ii/v_ii² + u_00/v_00²` for two free subjects.
    pub fn sigma(&self, i: usize, j: usize) -> Result<f64, InferenceError> {
        self.check(i)?;
        self.check(j)?;
        let b = self.baseline();
        for s in [i, j] {
            if s == b {
                return Err(InferenceError::SubjectOutOfRange(s));
            }
        }
        let common = self.ratio(b)?;
        Ok(if i == j {
            self.ratio(i)? + common
        } else {
            common
        })
    }

    /// `Σ` restricted to the given free subjects.
    pub fn sigma_matrix(&self, subjects: &[usize]) -> Result<DenseMatrix, InferenceError> {
        let k = subjects.len();
        let mut m = DenseMatrix::zeros(k);
        for (a, &i) in subjects.iter().enumerate() {
            for (b, &j) in subjects.iter().enumerate() {
                m[(a, b)] = self.sigma(i, j)?;
            }
        }
        Ok(m)
    }

    pub fn approx_inverse(&self) -> Result<DenseMatrix, InferenceError> {
        approx_inverse(&self.jacobian)
    }
}

/// Variance of `β̂_i − β̂_j`: `u_ii/v_ii² + u_jj/v_jj²`, where the baseline
/// contributes `u_00/v_00²`.
pub fn pair_variance(report: &CovarianceReport, i: usize, j: usize) -> Result<f64, InferenceError> {
    report.check(i)?;
    report.check(j)?;
    if i == j {
        return Err(InferenceError::SameSubject(i));
    }
    Ok(report.ratio(i)? + report.ratio(j)?)
}

/// Two-sided Wald interval for `β_i − β_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    /// False when the standard error is zero and the interval collapses.
    pub valid: bool,
}

impl Interval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

pub fn normal_multiplier(level: f64) -> Result<f64, InferenceError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(InferenceError::InvalidLevel(level));
    }
    Ok(normal_quantile(0.5 * (1.0 + level)))
}

pub fn confidence_interval(
    report: &CovarianceReport,
    i: usize,
    j: usize,
    level: f64,
) -> Result<Interval, InferenceError> {
    let z = normal_multiplier(level)?;
    let var = pair_variance(report, i, j)?;
    let estimate = report.beta_hat[i] - report.beta_hat[j];
    let half = z * var.sqrt();
    Ok(Interval {
        estimate,
        lower: estimate - half,
        upper: estimate + half,
        level,
        valid: var > 0.0 && half.is_finite(),
    })
}

/// `(β̂_i − β̂_j − d) / √Var(β̂_i − β̂_j)`.
pub fn z_statistic(
    report: &CovarianceReport,
    i: usize,
    j: usize,
    true_difference: f64,
) -> Result<f64, InferenceError> {
    let var = pair_variance(report, i, j)?;
    if !(var > 0.0) {
        return Err(InferenceError::DegenerateVariance { i, j });
    }
    Ok((report.beta_hat[i] - report.beta_hat[j] - true_difference) / var.sqrt())
}

/// Sandwich `V⁻¹ U V⁻¹` over the free subjects with the exact inverse and
/// the full score covariance (`U_ij = −t_ij p_ij(1 − p_ij)` off the diagonal).
pub fn exact_covariance(
    system: &MomentSystem,
    beta_hat: &[f64],
) -> Result<DenseMatrix, InferenceError> {
    let jac = system.jacobian(beta_hat)?;
    let chol = Cholesky::factor(&jac.v).map_err(|e| {
        InferenceError::Fit(FitError::SingularJacobian {
            iteration: 0,
            row: e.row,
        })
    })?;
    let inv = chol.inverse();
    let free = system.free_subjects();
    let link = system.link();
    let t = system.data().t();
    let u_full = conditional_variance(system.data(), beta_hat, link);
    let u = DenseMatrix::from_fn(free.len(), |a, b| {
        let (i, j) = (free[a], free[b]);
        if a == b {
            u_full[i]
        } else {
            let x = beta_hat[i] - beta_hat[j];
            -f64::from(t.get(i, j)) * link.mu(x) * link.mu(-x)
        }
    });
    Ok(inv.mul(&u).mul(&inv))
}
