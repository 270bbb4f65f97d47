//! Fitted rankings with standard errors, graph diagnostics and solver status.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::estimator::{fit, FitConfig, FitError, MomentSystem};
use crate::graph::{diagnostics, GraphDiagnostics};
use crate::inference::{confidence_interval, pair_variance, CovarianceReport, InferenceError};
use crate::kantorovich::KantorovichReport;
use crate::links::{normal_cdf, LinkModel};

use super::ingest::LabeledData;

/// Merits closer than this are reported as tied.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRow {
    pub rank: usize,
    pub label: String,
    pub beta_hat: f64,
    pub wins: u64,
    pub comparisons: u64,
    pub pct: f64,
    /// Standard error of `β̂_i − β̂_baseline`.
    pub se: f64,
    /// Shares its merit with a neighbour in the ordering.
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStatus {
    pub iterations: usize,
    pub residual_inf_norm: f64,
    pub tolerance: f64,
    pub kantorovich: Option<KantorovichReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub link: String,
    pub baseline: String,
    /// Sorted by `β̂` descending, then label.
    pub rows: Vec<SubjectRow>,
    pub diagnostics: GraphDiagnostics,
    pub solver: SolverStatus,
    #[serde(skip)]
    covariance: Option<CovarianceReport>,
    #[serde(skip)]
    labels: Vec<String>,
}

/// Why a dataset could not be fitted.
#[derive(Debug, thiserror::Error)]
pub enum RankError {
    #[error("the comparison graph is disconnected; every subject must be linked to the baseline by a chain of comparisons")]
    Disconnected,
    #[error(
        "the win digraph is not strongly connected ({components} components): some group of subjects never lost \
         to the rest, so their merits are unbounded and the estimate does not exist"
    )]
    NotStronglyConnected { components: usize },
    #[error(transparent)]
    Fit(FitError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("unknown subject `{0}`")]
    UnknownSubject(String),
}

/// Wald comparison of two subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub first: String,
    pub second: String,
    pub difference: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    /// `difference / se` for the null of equal merits.
    pub z: f64,
    pub p_value: f64,
}

impl RankReport {
    pub fn row(&self, label: &str) -> Option<&SubjectRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned text table with three decimals.
    pub fn to_table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .max()
            .unwrap_or(5)
            .max(7);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>4}  {:<width$}  {:>7}  {:>5}  {:>6}  {:>6}",
            "rank", "subject", "merit", "wins", "pct", "se"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>4}  {:<width$}  {:>7.3}  {:>5}  {:>6.3}  {:>6.3}{}",
                r.rank,
                r.label,
                r.beta_hat,
                r.wins,
                r.pct,
                r.se,
                if r.tied { "  (tie)" } else { "" }
            );
        }
        let d = &self.diagnostics;
        let _ = writeln!(
            out,
            "\nlink: {}   baseline: {}   subjects: {}",
            self.link,
            self.baseline,
            self.rows.len()
        );
        let _ = writeln!(
            out,
            "graph: connected={} strongly_connected={} t_min={} t_max={} tau={:.4}",
            d.t_graph_connected, d.win_digraph_strongly_connected, d.t_min, d.t_max, d.tau
        );
        let s = &self.solver;
        let _ = write!(
            out,
            "solver: {} iterations, residual {:.2e} (tolerance {:.1e})",
            s.iterations, s.residual_inf_norm, s.tolerance
        );
        match &s.kantorovich {
            Some(k) if k.certified => {
                let _ = writeln!(out, ", Kantorovich certified (h = {:.3})", k.h);
            }
            Some(k) => {
                let _ = writeln!(out, ", Kantorovich condition not met (h = {:.3e})", k.h);
            }
            None => out.push('\n'),
        }
        out
    }

    /// Interval and z-test for `β_first − β_second`.
    pub fn pairwise(
        &self,
        first: &str,
        second: &str,
        level: f64,
    ) -> Result<PairwiseTest, RankError> {
        let cov = self
            .covariance
            .as_ref()
            .expect("report built by fit_ranking");
        let index = |l: &str| {
            self.labels
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| RankError::UnknownSubject(l.to_string()))
        };
        let (i, j) = (index(first)?, index(second)?);
        let ci = confidence_interval(cov, i, j, level)?;
        let se = pair_variance(cov, i, j)?.sqrt();
        let z = ci.estimate / se;
        Ok(PairwiseTest {
            first: first.into(),
            second: second.into(),
            difference: ci.estimate,
            se,
            lower: ci.lower,
            upper: ci.upper,
            level,
            z,
            p_value: 2.0 * normal_cdf(-z.abs()),
        })
    }
}

/// Fits the data and assembles the ranking.
pub fn fit_ranking(
    data: &LabeledData,
    link: &LinkModel,
    config: &FitConfig,
) -> Result<RankReport, RankError> {
    let diag = diagnostics(&data.data);
    let system = MomentSystem::new(data.data.clone(), link.clone());
    let result = fit(&system, config).map_err(|e| match e {
        FitError::NotConnected => RankError::Disconnected,
        _ if !diag.win_digraph_strongly_connected => RankError::NotStronglyConnected {
            components: diag.win_components,
        },
        other => RankError::Fit(other),
    })?;
    if !result.strongly_connected {
        return Err(RankError::NotStronglyConnected {
            components: diag.win_components,
        });
    }
    let cov = CovarianceReport::new(&system, &result.beta_hat)?;

    let mut order: Vec<usize> = (0..data.labels.len()).collect();
    order.sort_by(|&x, &y| {
        result.beta_hat[y]
            .total_cmp(&result.beta_hat[x])
            .then_with(|| data.labels[x].cmp(&data.labels[y]))
    });
    let beta = &result.beta_hat;
    let rows = order
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let near = |other: Option<&usize>| {
                other.is_some_and(|&o| (beta[o] - beta[i]).abs() <= TIE_TOLERANCE)
            };
            SubjectRow {
                rank: k + 1,
                label: data.labels[i].clone(),
                beta_hat: beta[i],
                wins: data.data.wins()[i],
                comparisons: data.data.totals()[i],
                pct: data.pct(i),
                se: cov.se[i],
                tied: near(k.checked_sub(1).and_then(|p| order.get(p))) || near(order.get(k + 1)),
            }
        })
        .collect();

    Ok(RankReport {
        link: link.name().to_string(),
        baseline: data.baseline_label().to_string(),
        rows,
        diagnostics: diag,
        solver: SolverStatus {
            iterations: result.iterations,
            residual_inf_norm: result.residual_inf_norm,
            tolerance: result.tolerance,
            kantorovich: result.kantorovich,
        },
        covariance: Some(cov),
        labels: data.labels.clone(),
    })
}
