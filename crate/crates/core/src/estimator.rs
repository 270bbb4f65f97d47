//! Moment estimation: the score-matching system `H(β) = 0`, its Jacobian,
//! and a damped Newton solver with the baseline merit pinned to zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{is_connected, strong_connectivity, ComparisonData};
use crate::kantorovich::{kantorovich_diagnostics, KantorovichReport};
use crate::linalg::{inf_norm, Cholesky, DenseMatrix};
use crate::links::LinkModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("comparison graph is disconnected: merits of different components are not comparable")]
    NotConnected,
    #[error("expected a vector of length {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("baseline index {0} is out of range")]
    BaselineOutOfRange(usize),
    #[error("merit of baseline subject {baseline} must be 0, got {value}")]
    BaselineNotPinned { baseline: usize, value: f64 },
    #[error("Newton iteration diverged after {iterations} iterations ({reason}); the estimate does not exist for these data")]
    Diverged {
        iterations: usize,
        residual_inf_norm: f64,
        reason: DivergenceReason,
    },
    #[error("Jacobian is not positive definite at iteration {iteration} (pivot row {row})")]
    SingularJacobian { iteration: usize, row: usize },
    #[error("link error: {0}")]
    Link(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DivergenceReason {
    /// Merits left the `‖β‖∞ ≤ bound` box.
    MeritsUnbounded,
    MaxIterations,
    /// No step length in the halving sequence reduced `‖H‖∞`.
    LineSearchFailed,
}

impl std::fmt::Display for DivergenceReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DivergenceReason::MeritsUnbounded => "merits exceeded the divergence bound",
            DivergenceReason::MaxIterations => "iteration limit reached",
            DivergenceReason::LineSearchFailed => "step halving could not reduce the residual",
        })
    }
}

/// Moment equations `H_i(β) = Σ_j t_ij μ(β_i − β_j) − a_i` over the free
/// (non-baseline) subjects.
#[derive(Debug, Clone)]
pub struct MomentSystem {
    data: ComparisonData,
    link: LinkModel,
    baseline: usize,
    scores: Vec<f64>,
    /// Pairs `(i, j, t_ij)` with `i < j` and `t_ij > 0`.
    edges: Vec<(usize, usize, f64)>,
    /// Free position of every subject, `None` for the baseline.
    position: Vec<Option<usize>>,
    free: Vec<usize>,
}

impl MomentSystem {
    /// Baseline subject 0, scores taken from the win counts.
    pub fn new(data: ComparisonData, link: LinkModel) -> Self {
        let scores = data.wins().iter().map(|&w| w as f64).collect();
        let n = data.n_subjects();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let t = data.t().get(i, j);
                if t > 0 {
                    edges.push((i, j, f64::from(t)));
                }
            }
        }
        let mut sys = Self {
            data,
            link,
            baseline: 0,
            scores,
            edges,
            position: Vec::new(),
            free: Vec::new(),
        };
        sys.index_free();
        sys
    }

    pub fn with_baseline(mut self, baseline: usize) -> Result<Self, FitError> {
        if baseline >= self.n_subjects() {
            return Err(FitError::BaselineOutOfRange(baseline));
        }
        self.baseline = baseline;
        self.index_free();
        Ok(self)
    }

    /// Replaces the observed scores, e.g. by expected scores under known
    /// merits.
    pub fn with_scores(mut self, scores: Vec<f64>) -> Result<Self, FitError> {
        if scores.len() != self.n_subjects() {
            return Err(FitError::DimensionMismatch {
                expected: self.n_subjects(),
                found: scores.len(),
            });
        }
        self.scores = scores;
        Ok(self)
    }

    fn index_free(&mut self) {
        let n = self.n_subjects();
        self.free = (0..n).filter(|&i| i != self.baseline).collect();
        self.position = vec![None; n];
        for (k, &i) in self.free.iter().enumerate() {
            self.position[i] = Some(k);
        }
    }

    pub fn data(&self) -> &ComparisonData {
        &self.data
    }

    pub fn link(&self) -> &LinkModel {
        &self.link
    }

    pub fn baseline(&self) -> usize {
        self.baseline
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn n_subjects(&self) -> usize {
        self.data.n_subjects()
    }

    /// Dimension of the free parameter, `n`.
    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Subject index of each free coordinate.
    pub fn free_subjects(&self) -> &[usize] {
        &self.free
    }

    pub fn free_position(&self, subject: usize) -> Option<usize> {
        self.position[subject]
    }

    pub(crate) fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    fn check_beta(&self, beta: &[f64]) -> Result<(), FitError> {
        if beta.len() != self.n_subjects() {
            return Err(FitError::DimensionMismatch {
                expected: self.n_subjects(),
                found: beta.len(),
            });
        }
        let value = beta[self.baseline];
        if value != 0.0 {
            return Err(FitError::BaselineNotPinned {
                baseline: self.baseline,
                value,
            });
        }
        Ok(())
    }

    /// `H_i(β)` for every subject, baseline included. These sum to zero.
    pub fn full_residual(&self, beta: &[f64]) -> Result<Vec<f64>, FitError> {
        self.check_beta(beta)?;
        Ok(self.full_residual_unchecked(beta))
    }

    fn full_residual_unchecked(&self, beta: &[f64]) -> Vec<f64> {
        let mut h: Vec<f64> = self.scores.iter().map(|s| -s).collect();
        for &(i, j, t) in &self.edges {
            let m = self.link.mu(beta[i] - beta[j]);
            h[i] += t * m;
            h[j] += t * (1.0 - m);
        }
        h
    }

    /// `H(β)` restricted to the free subjects.
    pub fn residual(&self, beta: &[f64]) -> Result<Vec<f64>, FitError> {
        self.check_beta(beta)?;
        Ok(self.free_residual_unchecked(beta))
    }

    fn free_residual_unchecked(&self, beta: &[f64]) -> Vec<f64> {
        let full = self.full_residual_unchecked(beta);
        self.free.iter().map(|&i| full[i]).collect()
    }

    /// Jacobian `V = ∂H/∂β` over the free subjects, plus the baseline row
    /// `v_{i0}` and `v_00`.
    pub fn jacobian(&self, beta: &[f64]) -> Result<JacobianView, FitError> {
        self.check_beta(beta)?;
        Ok(self.jacobian_unchecked(beta))
    }

    fn jacobian_unchecked(&self, beta: &[f64]) -> JacobianView {
        let n = self.n_free();
        let mut v = DenseMatrix::zeros(n);
        let mut v_row0 = vec![0.0; n];
        let mut v_00 = 0.0;
        for &(i, j, t) in &self.edges {
            let w = t * self.link.mu_prime(beta[i] - beta[j]);
            match (self.position[i], self.position[j]) {
                (Some(pi), Some(pj)) => {
                    v[(pi, pj)] -= w;
                    v[(pj, pi)] -= w;
                    v[(pi, pi)] += w;
                    v[(pj, pj)] += w;
                }
                (Some(p), None) | (None, Some(p)) => {
                    v_row0[p] -= w;
                    v[(p, p)] += w;
                    v_00 += w;
                }
                (None, None) => unreachable!("an edge joins two distinct subjects"),
            }
        }
        JacobianView {
            v,
            v_row0,
            v_00,
            baseline: self.baseline,
            free: self.free.clone(),
        }
    }

    /// Expected scores `Σ_j t_ij μ(β_i − β_j)` under merits `beta`.
    pub fn expected_scores(&self, beta: &[f64]) -> Vec<f64> {
        let mut e = vec![0.0; self.n_subjects()];
        for &(i, j, t) in &self.edges {
            let m = self.link.mu(beta[i] - beta[j]);
            e[i] += t * m;
            e[j] += t * (1.0 - m);
        }
        e
    }

    /// Embeds free coordinates into a full merit vector with the baseline
    /// at zero.
    pub fn embed(&self, free_beta: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_subjects()];
        for (&i, &b) in self.free.iter().zip(free_beta) {
            full[i] = b;
        }
        full
    }
}

/// Jacobian of the moment system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianView {
    /// `n × n` matrix over the free subjects.
    pub v: DenseMatrix,
    /// `v_{i0} = −t_{0i} μ′(π_{0i})` per free subject.
    pub v_row0: Vec<f64>,
    /// `v_00 = Σ_j t_{0j} μ′(π_{0j})`.
    pub v_00: f64,
    pub baseline: usize,
    pub free: Vec<usize>,
}

impl JacobianView {
    pub fn dim(&self) -> usize {
        self.v.dim()
    }

    /// Diagonal entry for any subject; the baseline maps to `v_00`.
    pub fn diag_of(&self, subject: usize) -> f64 {
        if subject == self.baseline {
            self.v_00
        } else {
            let p = self
                .free
                .iter()
                .position(|&s| s == subject)
                .expect("subject index out of range");
            self.v[(p, p)]
        }
    }

    /// `v_kk` for all subjects in subject order.
    pub fn full_diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.free.len() + 1];
        d[self.baseline] = self.v_00;
        for (p, &s) in self.free.iter().enumerate() {
            d[s] = self.v[(p, p)];
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Absolute tolerance on `‖H(β̂)‖∞`; `None` uses `1e-10·max(1, t_max)`.
    pub tolerance: Option<f64>,
    pub max_iterations: usize,
    /// Full starting vector (baseline entry 0); `None` starts at zero.
    pub initial: Option<Vec<f64>>,
    /// Halve the Newton step while it increases `‖H‖∞`.
    pub damping: bool,
    pub max_halvings: u32,
    /// `‖β‖∞` beyond which the iteration is declared divergent.
    pub divergence_bound: f64,
    /// Attach Kantorovich constants at the starting point to the result.
    pub kantorovich: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            tolerance: None,
            max_iterations: 100,
            initial: None,
            damping: true,
            max_halvings: 30,
            divergence_bound: 1e3,
            kantorovich: true,
        }
    }
}

impl FitConfig {
    /// Configuration for Monte Carlo use: no diagnostics attached.
    pub fn fast() -> Self {
        Self {
            kantorovich: false,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual_inf_norm: f64,
    pub step_inf_norm: f64,
    pub halvings: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Merits for all subjects, baseline entry exactly 0.
    pub beta_hat: Vec<f64>,
    pub residual_inf_norm: f64,
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Whether the win digraph is strongly connected. When false the
    /// estimate cannot exist; a converged result then reflects numerical
    /// saturation of `μ` rather than a genuine root.
    pub strongly_connected: bool,
    pub trace: Vec<IterationRecord>,
    pub kantorovich: Option<KantorovichReport>,
}

impl FitResult {
    /// True when the solve converged and the necessary existence condition
    /// holds.
    pub fn exists(&self) -> bool {
        self.converged && self.strongly_connected
    }
}

pub fn default_tolerance(data: &ComparisonData) -> f64 {
    let t_max = data.totals().iter().copied().max().unwrap_or(0) as f64;
    1e-10 * t_max.max(1.0)
}

/// Solves the moment equations by Newton's method from `config.initial`
/// (zero by default).
pub fn fit(system: &MomentSystem, config: &FitConfig) -> Result<FitResult, FitError> {
    let data = system.data();
    if !is_connected(data.t()) {
        return Err(FitError::NotConnected);
    }
    let strongly_connected = strong_connectivity(data.a());
    let tol = config.tolerance.unwrap_or_else(|| default_tolerance(data));

    let start = match &config.initial {
        Some(init) => {
            system.check_beta(init)?;
            init.clone()
        }
        None => vec![0.0; system.n_subjects()],
    };
    let mut beta = start.clone();
    let mut h = system.free_residual_unchecked(&beta);
    let mut norm = inf_norm(&h);
    let mut trace = vec![IterationRecord {
        iteration: 0,
        residual_inf_norm: norm,
        step_inf_norm: 0.0,
        halvings: 0,
    }];

    let mut iterations = 0;
    while norm > tol {
        if iterations >= config.max_iterations {
            return Err(FitError::Diverged {
                iterations,
                residual_inf_norm: norm,
                reason: DivergenceReason::MaxIterations,
            });
        }
        let jac = system.jacobian_unchecked(&beta);
        let chol = Cholesky::factor(&jac.v).map_err(|e| FitError::SingularJacobian {
            iteration: iterations,
            row: e.row,
        })?;
        let step = chol.solve(&h);
        if step.iter().any(|s| !s.is_finite()) {
            return Err(FitError::SingularJacobian {
                iteration: iterations,
                row: 0,
            });
        }

        let mut scale = 1.0;
        let mut halvings = 0;
        let (cand, cand_h, cand_norm) = loop {
            let mut cand = beta.clone();
            for (&s, d) in system.free.iter().zip(&step) {
                cand[s] -= scale * d;
            }
            let ch = system.free_residual_unchecked(&cand);
            let cn = inf_norm(&ch);
            if !config.damping || cn <= norm {
                break (cand, ch, cn);
            }
            if halvings >= config.max_halvings {
                return Err(FitError::Diverged {
                    iterations: iterations + 1,
                    residual_inf_norm: norm,
                    reason: DivergenceReason::LineSearchFailed,
                });
            }
            scale *= 0.5;
            halvings += 1;
        };

        iterations += 1;
        beta = cand;
        h = cand_h;
        norm = cand_norm;
        trace.push(IterationRecord {
            iteration: iterations,
            residual_inf_norm: norm,
            step_inf_norm: scale * inf_norm(&step),
            halvings,
        });
        if !norm.is_finite() || inf_norm(&beta) > config.divergence_bound {
            return Err(FitError::Diverged {
                iterations,
                residual_inf_norm: norm,
                reason: DivergenceReason::MeritsUnbounded,
            });
        }
    }

    let kantorovich = if config.kantorovich {
        let radius = inf_norm(&start).max(inf_norm(&beta));
        kantorovich_diagnostics(system, &start, radius).ok()
    } else {
        None
    };

    Ok(FitResult {
        beta_hat: beta,
        residual_inf_norm: norm,
        tolerance: tol,
        iterations,
        converged: true,
        strongly_connected,
        trace,
        kantorovich,
    })
}
