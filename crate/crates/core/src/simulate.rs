//! Monte Carlo harness for strong-connectivity failure, interval coverage
//! and estimation error under Erdős–Rényi designs with linear merits.
//!
//! Replication `r` of a cell draws everything from the child seed
//! `child_seed(master_seed, r)`. Outcomes are collected in replication order
//! and aggregated sequentially, so a report does not depend on how many
//! worker threads ran the replications.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{fit, FitConfig, MomentSystem};
use crate::graph::{linear_merits, sample_instance, strong_connectivity, GraphError};
use crate::inference::{confidence_interval, z_statistic, CovarianceReport};
use crate::linalg::inf_norm;
use crate::links::LinkModel;
use crate::rng::{child_seed, rng_from_seed};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error(
        "unknown p rule `{0}` (expected half, two-thirds, quarter, linear or a number in (0, 1])"
    )]
    UnknownRule(String),
    #[error("p rule {rule} gives p = {p} for n = {n}, outside (0, 1]")]
    InvalidProbability { rule: String, n: usize, p: f64 },
    #[error("replication count must be positive")]
    ZeroReplications,
    #[error("number of trials per pair must be positive")]
    ZeroTrials,
    #[error("need n >= 2, got {0}")]
    TooFewSubjects(usize),
    #[error("pair ({i}, {j}) is not a pair of distinct subjects in 0..={n}")]
    InvalidPair { i: usize, j: usize, n: usize },
    #[error("unknown merit slope `{0}` (expected log or unit)")]
    UnknownSlope(String),
    #[error("n values must be strictly increasing")]
    UnsortedSizes,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Comparison probability as a function of `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PRule {
    /// `(ln n / n)^{1/2}`
    Half,
    /// `(ln n / n)^{2/3}`
    TwoThirds,
    /// `(ln n / n)^{1/4}`
    Quarter,
    /// `ln n / n`
    Linear,
    Explicit(f64),
}

impl PRule {
    pub fn resolve(&self, n: usize) -> Result<f64, SimulationError> {
        let base = (n as f64).ln() / n as f64;
        let p = match *self {
            PRule::Half => base.sqrt(),
            PRule::TwoThirds => base.powf(2.0 / 3.0),
            PRule::Quarter => base.powf(0.25),
            PRule::Linear => base,
            PRule::Explicit(p) => p,
        };
        if p > 0.0 && p <= 1.0 {
            Ok(p)
        } else {
            Err(SimulationError::InvalidProbability {
                rule: self.to_string(),
                n,
                p,
            })
        }
    }

    /// Label used in printed tables.
    pub fn label(&self) -> String {
        match self {
            PRule::Half => "(log n/n)^{1/2}".into(),
            PRule::TwoThirds => "(log n/n)^{2/3}".into(),
            PRule::Quarter => "(log n/n)^{1/4}".into(),
            PRule::Linear => "log n/n".into(),
            PRule::Explicit(p) => format!("{p}"),
        }
    }
}

impl fmt::Display for PRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PRule::Half => f.write_str("half"),
            PRule::TwoThirds => f.write_str("two-thirds"),
            PRule::Quarter => f.write_str("quarter"),
            PRule::Linear => f.write_str("linear"),
            PRule::Explicit(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for PRule {
    type Err = SimulationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "half" | "1/2" => Ok(PRule::Half),
            "two-thirds" | "two_thirds" | "2/3" => Ok(PRule::TwoThirds),
            "quarter" | "1/4" => Ok(PRule::Quarter),
            "linear" | "1" => Ok(PRule::Linear),
            other => match other.parse::<f64>() {
                Ok(p) if p > 0.0 && p <= 1.0 => Ok(PRule::Explicit(p)),
                _ => Err(SimulationError::UnknownRule(s.to_string())),
            },
        }
    }
}

/// Slope of the linear merits `β_i = i·slope`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeritSlope {
    /// `c·ln(n)/n`, so `‖β*‖∞ = c·ln n` grows with `n`.
    #[default]
    LogScaled,
    /// `c/n`, so `‖β*‖∞ = c`.
    Unit,
}

impl FromStr for MeritSlope {
    type Err = SimulationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "log" | "log-scaled" => Ok(MeritSlope::LogScaled),
            "unit" => Ok(MeritSlope::Unit),
            _ => Err(SimulationError::UnknownSlope(s.to_string())),
        }
    }
}

/// How replications are scheduled. Results are identical either way.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

/// One cell of a simulation table. Subjects are `0..=n` with linear merits
/// (slope set by [`MeritSlope`]) and subject 0 as baseline.
#[derive(Debug, Clone)]
pub struct SimulationCell {
    pub n: usize,
    pub trials: u32,
    pub p_rule: PRule,
    pub c: f64,
    pub pairs: Vec<(usize, usize)>,
    pub replications: usize,
    pub master_seed: u64,
    pub link: LinkModel,
    pub slope: MeritSlope,
    pub execution: Execution,
}

impl SimulationCell {
    pub fn new(n: usize, p_rule: PRule, c: f64, replications: usize, master_seed: u64) -> Self {
        Self {
            n,
            trials: 1,
            p_rule,
            c,
            pairs: Vec::new(),
            replications,
            master_seed,
            link: LinkModel::Probit,
            slope: MeritSlope::default(),
            execution: Execution::default(),
        }
    }

    pub fn with_pairs(mut self, pairs: Vec<(usize, usize)>) -> Self {
        self.pairs = pairs;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn n_subjects(&self) -> usize {
        self.n + 1
    }

    /// Checks the cell and returns the resolved comparison probability.
    pub fn validate(&self) -> Result<f64, SimulationError> {
        if self.n < 2 {
            return Err(SimulationError::TooFewSubjects(self.n));
        }
        if self.trials == 0 {
            return Err(SimulationError::ZeroTrials);
        }
        if self.replications == 0 {
            return Err(SimulationError::ZeroReplications);
        }
        for &(i, j) in &self.pairs {
            if i == j || i > self.n || j > self.n {
                return Err(SimulationError::InvalidPair { i, j, n: self.n });
            }
        }
        if !(self.c >= 0.0) {
            return Err(GraphError::NegativeCoefficient(self.c).into());
        }
        self.p_rule.resolve(self.n)
    }

    pub fn with_slope(mut self, slope: MeritSlope) -> Self {
        self.slope = slope;
        self
    }

    pub fn merits(&self) -> Result<Vec<f64>, SimulationError> {
        let c = match self.slope {
            MeritSlope::LogScaled => self.c,
            MeritSlope::Unit => self.c / (self.n as f64).ln(),
        };
        Ok(linear_merits(self.n_subjects(), c)?)
    }
}

/// Per-pair interval summary over the successful fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub i: usize,
    pub j: usize,
    /// Replications where an interval was computed.
    pub evaluated: usize,
    pub covered: usize,
    pub coverage: f64,
    pub mean_length: f64,
    pub z_mean: f64,
    pub z_variance: f64,
}

/// Distribution summary of `‖β̂ − β*‖∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub count: usize,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

impl ErrorSummary {
    fn from_values(mut v: Vec<f64>) -> Option<Self> {
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len();
        let median = if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        };
        Some(Self {
            count: m,
            median,
            mean: compensated_sum(v.iter().copied()) / m as f64,
            max: v[m - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Connectivity,
    Coverage,
}

/// Output of one simulation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub study: StudyKind,
    pub n: usize,
    pub trials: u32,
    pub p_rule: String,
    pub p: f64,
    pub c: f64,
    pub slope: MeritSlope,
    pub link: String,
    pub replications: usize,
    pub master_seed: u64,
    pub level: Option<f64>,
    /// Share of replications whose win digraph is not strongly connected.
    pub connectivity_fail_rate: f64,
    /// Share of replications where the estimate does not exist; `None` for
    /// connectivity-only studies.
    pub fit_fail_rate: Option<f64>,
    pub pairs: Vec<PairSummary>,
    pub max_abs_error: Option<ErrorSummary>,
}

impl SimulationReport {
    fn header(cell: &SimulationCell, p: f64, study: StudyKind, level: Option<f64>) -> Self {
        Self {
            study,
            n: cell.n,
            trials: cell.trials,
            p_rule: cell.p_rule.to_string(),
            p,
            c: cell.c,
            slope: cell.slope,
            link: cell.link.name().to_string(),
            replications: cell.replications,
            master_seed: cell.master_seed,
            level,
            connectivity_fail_rate: 0.0,
            fit_fail_rate: None,
            pairs: Vec::new(),
            max_abs_error: None,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    /// Monte Carlo standard error of a rate near `rate`.
    pub fn binomial_se(rate: f64, replications: usize) -> f64 {
        (rate * (1.0 - rate) / replications as f64).sqrt()
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Runs `task(r)` for `r in 0..count` and returns the results in order.
pub fn replicate<T, F>(count: usize, execution: Execution, task: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..count as u64).into_par_iter().map(task).collect()
        }
        _ => (0..count as u64).map(task).collect(),
    }
}

/// Fraction of replications whose sampled win digraph is not strongly
/// connected.
pub fn run_connectivity_study(cell: &SimulationCell) -> Result<SimulationReport, SimulationError> {
    let p = cell.validate()?;
    let beta = cell.merits()?;
    let failures = replicate(cell.replications, cell.execution, |r| {
        let mut rng = rng_from_seed(child_seed(cell.master_seed, r));
        let data = sample_instance(
            &mut rng,
            cell.n_subjects(),
            cell.trials,
            p,
            &beta,
            &cell.link,
        )
        .expect("validated cell");
        !strong_connectivity(data.a())
    });
    let mut report = SimulationReport::header(cell, p, StudyKind::Connectivity, None);
    report.connectivity_fail_rate =
        rate(failures.iter().filter(|&&f| f).count(), cell.replications);
    Ok(report)
}

struct PairOutcome {
    covered: bool,
    length: f64,
    z: Option<f64>,
}

enum Replication {
    /// Win digraph not strongly connected; the estimate cannot exist.
    NotStronglyConnected,
    /// Connected design but the solver failed.
    FitFailed,
    Fitted {
        error: f64,
        pairs: Vec<Option<PairOutcome>>,
    },
}

/// Coverage and length of `level` intervals for the cell's pairs.
///
/// A replication fails when the win digraph is not strongly connected or
/// the solver errors; failures count towards `fit_fail_rate` and are
/// excluded from coverage.
pub fn run_coverage_study(
    cell: &SimulationCell,
    level: f64,
) -> Result<SimulationReport, SimulationError> {
    let p = cell.validate()?;
    crate::inference::normal_multiplier(level).map_err(|_| {
        SimulationError::InvalidProbability {
            rule: "level".into(),
            n: cell.n,
            p: level,
        }
    })?;
    let beta = cell.merits()?;
    let config = FitConfig::fast();

    let outcomes = replicate(cell.replications, cell.execution, |r| {
        let mut rng = rng_from_seed(child_seed(cell.master_seed, r));
        let data = sample_instance(
            &mut rng,
            cell.n_subjects(),
            cell.trials,
            p,
            &beta,
            &cell.link,
        )
        .expect("validated cell");
        if !strong_connectivity(data.a()) {
            return Replication::NotStronglyConnected;
        }
        let system = MomentSystem::new(data, cell.link.clone());
        let Ok(result) = fit(&system, &config) else {
            return Replication::FitFailed;
        };
        let Ok(cov) = CovarianceReport::new(&system, &result.beta_hat) else {
            return Replication::FitFailed;
        };
        let error = inf_norm(
            &result
                .beta_hat
                .iter()
                .zip(&beta)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        let pairs = cell
            .pairs
            .iter()
            .map(|&(i, j)| {
                let ci = confidence_interval(&cov, i, j, level).ok()?;
                let truth = beta[i] - beta[j];
                Some(PairOutcome {
                    covered: ci.valid && ci.contains(truth),
                    length: ci.length(),
                    z: z_statistic(&cov, i, j, truth).ok(),
                })
            })
            .collect();
        Replication::Fitted { error, pairs }
    });

    let mut not_strong = 0;
    let mut failed = 0;
    let mut errors = Vec::with_capacity(outcomes.len());
    for o in &outcomes {
        match o {
            Replication::NotStronglyConnected => not_strong += 1,
            Replication::FitFailed => failed += 1,
            Replication::Fitted { error, .. } => errors.push(*error),
        }
    }

    let pairs = cell
        .pairs
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let done: Vec<&PairOutcome> = outcomes
                .iter()
                .filter_map(|o| match o {
                    Replication::Fitted { pairs, .. } => pairs[k].as_ref(),
                    _ => None,
                })
                .collect();
            let covered = done.iter().filter(|o| o.covered).count();
            let zs: Vec<f64> = done.iter().filter_map(|o| o.z).collect();
            let z_mean = mean(&zs);
            let z_variance = if zs.len() > 1 {
                compensated_sum(zs.iter().map(|z| (z - z_mean) * (z - z_mean)))
                    / (zs.len() - 1) as f64
            } else {
                f64::NAN
            };
            PairSummary {
                i,
                j,
                evaluated: done.len(),
                covered,
                coverage: if done.is_empty() {
                    f64::NAN
                } else {
                    rate(covered, done.len())
                },
                mean_length: mean(&done.iter().map(|o| o.length).collect::<Vec<_>>()),
                z_mean,
                z_variance,
            }
        })
        .collect();

    let mut report = SimulationReport::header(cell, p, StudyKind::Coverage, Some(level));
    report.connectivity_fail_rate = rate(not_strong, cell.replications);
    report.fit_fail_rate = Some(rate(not_strong + failed, cell.replications));
    report.pairs = pairs;
    report.max_abs_error = ErrorSummary::from_values(errors);
    Ok(report)
}

/// Estimation error at one `n` of a consistency study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyPoint {
    pub n: usize,
    pub p: f64,
    pub replications: usize,
    pub fit_fail_rate: f64,
    pub error: Option<ErrorSummary>,
    /// Share of replications with `max_i |a_i − E a_i| > √(2·t_max·ln n)`.
    pub score_deviation_rate: f64,
}

/// Median `‖β̂ − β*‖∞` for each `n` under a fixed sparsity rule.
pub fn run_consistency_study(
    n_list: &[usize],
    p_rule: PRule,
    c: f64,
    replications: usize,
    seed: u64,
) -> Result<Vec<ConsistencyPoint>, SimulationError> {
    run_consistency_study_with(
        n_list,
        p_rule,
        c,
        replications,
        seed,
        &LinkModel::Probit,
        MeritSlope::default(),
        Execution::default(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn run_consistency_study_with(
    n_list: &[usize],
    p_rule: PRule,
    c: f64,
    replications: usize,
    seed: u64,
    link: &LinkModel,
    slope: MeritSlope,
    execution: Execution,
) -> Result<Vec<ConsistencyPoint>, SimulationError> {
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SimulationError::UnsortedSizes);
    }
    let config = FitConfig::fast();
    n_list
        .iter()
        .map(|&n| {
            let mut cell =
                SimulationCell::new(n, p_rule, c, replications, child_seed(seed, n as u64));
            cell.link = link.clone();
            cell.slope = slope;
            let p = cell.validate()?;
            let beta = cell.merits()?;
            let outcomes = replicate(replications, execution, |r| {
                let mut rng = rng_from_seed(child_seed(cell.master_seed, r));
                let data = sample_instance(&mut rng, cell.n_subjects(), 1, p, &beta, link)
                    .expect("validated cell");
                let strong = strong_connectivity(data.a());
                let system = MomentSystem::new(data, link.clone());
                let expected = system.expected_scores(&beta);
                let t_max = system.data().totals().iter().copied().max().unwrap_or(0) as f64;
                let threshold = (2.0 * t_max * (n as f64).ln()).sqrt();
                let deviation = system
                    .data()
                    .wins()
                    .iter()
                    .zip(&expected)
                    .map(|(&a, e)| (a as f64 - e).abs())
                    .fold(0.0, f64::max);
                let error = if strong {
                    fit(&system, &config).ok().map(|r| {
                        r.beta_hat
                            .iter()
                            .zip(&beta)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max)
                    })
                } else {
                    None
                };
                (error, deviation > threshold)
            });
            let exceed = outcomes.iter().filter(|o| o.1).count();
            let errors: Vec<f64> = outcomes.iter().filter_map(|o| o.0).collect();
            Ok(ConsistencyPoint {
                n,
                p,
                replications,
                fit_fail_rate: rate(replications - errors.len(), replications),
                error: ErrorSummary::from_values(errors),
                score_deviation_rate: rate(exceed, replications),
            })
        })
        .collect()
}

fn rate(k: usize, m: usize) -> f64 {
    k as f64 / m as f64
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        compensated_sum(v.iter().copied()) / v.len() as f64
    }
}

/// Cells of the connectivity table: three rules by `n ∈ {100, 500, 1000}`
/// at `c = 0.4`, `T = 1`.
pub fn table1_preset(replications: usize, seed: u64) -> Vec<SimulationCell> {
    let mut cells = Vec::new();
    for (r, rule) in [PRule::Half, PRule::TwoThirds, PRule::Linear]
        .into_iter()
        .enumerate()
    {
        for (k, n) in [100, 500, 1000].into_iter().enumerate() {
            cells.push(SimulationCell::new(
                n,
                rule,
                0.4,
                replications,
                child_seed(seed, (r * 3 + k) as u64),
            ));
        }
    }
    cells
}

/// Pairs reported for size `n`: the bottom, middle and top neighbours.
pub fn table2_pairs(n: usize) -> Vec<(usize, usize)> {
    vec![(1, 2), (n / 2 - 1, n / 2), (n - 1, n)]
}

/// Cells of the coverage table: two rules, `n ∈ {100, 200}` and three `c`
/// columns per rule.
pub fn table2_preset(replications: usize, seed: u64) -> Vec<SimulationCell> {
    let blocks = [
        (PRule::Quarter, [0.2, 0.5, 0.8]),
        (PRule::Half, [0.2, 0.4, 0.6]),
    ];
    let mut cells = Vec::new();
    let mut index = 0u64;
    for (rule, cs) in blocks {
        for n in [100, 200] {
            for c in cs {
                cells.push(
                    SimulationCell::new(n, rule, c, replications, child_seed(seed, index))
                        .with_pairs(table2_pairs(n)),
                );
                index += 1;
            }
        }
    }
    cells
}

/// Text table of connectivity failure percentages, rules by rows and `n`
/// by columns.
pub fn format_connectivity_table(reports: &[SimulationReport]) -> String {
    let mut ns: Vec<usize> = reports.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut rules: Vec<&str> = Vec::new();
    for r in reports {
        if !rules.contains(&r.p_rule.as_str()) {
            rules.push(&r.p_rule);
        }
    }
    let mut out = String::new();
    let _ = write!(out, "{:<18}", "p");
    for n in &ns {
        let _ = write!(out, "{:>10}", format!("n={n}"));
    }
    out.push('\n');
    for rule in rules {
        let label = rule
            .parse::<PRule>()
            .map(|r| r.label())
            .unwrap_or_else(|_| rule.to_string());
        let _ = write!(out, "{label:<18}");
        for n in &ns {
            match reports.iter().find(|r| r.n == *n && r.p_rule == rule) {
                Some(r) => {
                    let _ = write!(
                        out,
                        "{:>10}",
                        format!("{:.1}", 100.0 * r.connectivity_fail_rate)
                    );
                }
                None => {
                    let _ = write!(out, "{:>10}", "-");
                }
            }
        }
        out.push('\n');
    }
    out.push_str("values are fail frequencies (x100%)\n");
    out
}

/// Text table of `coverage / length / fail` entries grouped by rule and `n`.
pub fn format_coverage_table(reports: &[SimulationReport]) -> String {
    let mut out = String::new();
    let mut rules: Vec<&str> = Vec::new();
    for r in reports {
        if !rules.contains(&r.p_rule.as_str()) {
            rules.push(&r.p_rule);
        }
    }
    for rule in rules {
        let block: Vec<&SimulationReport> = reports.iter().filter(|r| r.p_rule == rule).collect();
        let label = rule
            .parse::<PRule>()
            .map(|r| r.label())
            .unwrap_or_else(|_| rule.to_string());
        let _ = writeln!(out, "p = {label}");
        let mut cs: Vec<f64> = block.iter().map(|r| r.c).collect();
        cs.sort_by(f64::total_cmp);
        cs.dedup();
        let mut ns: Vec<usize> = block.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        let _ = write!(out, "{:<6}{:<12}", "n", "pair");
        for c in &cs {
            let _ = write!(out, "{:>22}", format!("c={c}"));
        }
        out.push('\n');
        for n in ns {
            let row: Vec<&&SimulationReport> = block.iter().filter(|r| r.n == n).collect();
            let pairs: Vec<(usize, usize)> = row
                .first()
                .map(|r| r.pairs.iter().map(|s| (s.i, s.j)).collect())
                .unwrap_or_default();
            for (k, (i, j)) in pairs.into_iter().enumerate() {
                let n_label = if k == 0 { n.to_string() } else { String::new() };
                let _ = write!(out, "{:<6}{:<12}", n_label, format!("({i},{j})"));
                for c in &cs {
                    let cell = row.iter().find(|r| r.c == *c).and_then(|r| {
                        r.pairs
                            .iter()
                            .find(|s| s.i == i && s.j == j)
                            .map(|s| (s, r.fit_fail_rate.unwrap_or(0.0)))
                    });
                    let text = match cell {
                        Some((s, fail)) => format!(
                            "{:.2} / {:.2} / {:.2}",
                            100.0 * s.coverage,
                            s.mean_length,
                            100.0 * fail
                        ),
                        None => "-".into(),
                    };
                    let _ = write!(out, "{text:>22}");
                }
                out.push('\n');
            }
        }
        out.push('\n');
    }
    if let Some(r) = reports.first() {
        let _ = writeln!(
            out,
            "coverage (x100%) / mean interval length / fail (x100%); {} replications per cell, \
             Monte Carlo s.e. of a 95% coverage is about {:.2} points",
            r.replications,
            100.0 * SimulationReport::binomial_se(0.95, r.replications)
        );
    }
    out
}
