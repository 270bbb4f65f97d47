//! Comparison graphs: count matrices, Erdős–Rényi sampling, outcome sampling
//! under a link, and connectivity / sparsity diagnostics.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::links::LinkModel;
use crate::rng::{rng_from_seed, SimRng};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GraphError {
    #[error("need at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("number of trials per pair must be positive")]
    ZeroTrials,
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("comparison counts are not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("wins at ({i}, {j}) do not add up to the comparison count")]
    WinsMismatch { i: usize, j: usize },
    #[error("diagonal entry {0} must be zero")]
    NonZeroDiagonal(usize),
    #[error("merit coefficient must be non-negative, got {0}")]
    NegativeCoefficient(f64),
}

/// Square matrix of non-negative integer counts, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountMatrix {
    dim: usize,
    data: Vec<u32>,
}

impl CountMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0; dim * dim],
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> u32) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    /// Complete design: every unordered pair compared `count` times.
    pub fn complete(dim: usize, count: u32) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 0 } else { count })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        self.data[i * self.dim + j] = v;
    }

    /// Sets `(i, j)` and `(j, i)`.
    pub fn set_pair(&mut self, i: usize, j: usize, v: u32) {
        self.set(i, j, v);
        self.set(j, i, v);
    }

    pub fn add(&mut self, i: usize, j: usize, v: u32) {
        self.data[i * self.dim + j] += v;
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.dim)
            .map(|i| self.row(i).iter().map(|&v| u64::from(v)).sum())
            .collect()
    }

    /// Relabels subjects: entry `(perm[i], perm[j])` of the result equals
    /// entry `(i, j)` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.dim);
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.set(perm[i], perm[j], self.get(i, j));
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// Comparison counts `t`, win counts `a`, and cached per-subject totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonData {
    t: CountMatrix,
    a: CountMatrix,
    wins: Vec<u64>,
    totals: Vec<u64>,
}

impl ComparisonData {
    /// Validates `t_ij = t_ji`, `a_ij + a_ji = t_ij`, and zero diagonals.
    pub fn new(t: CountMatrix, a: CountMatrix) -> Result<Self, GraphError> {
        let n = t.dim();
        if a.dim() != n {
            return Err(GraphError::DimensionMismatch {
                expected: n,
                found: a.dim(),
            });
        }
        if n < 2 {
            return Err(GraphError::TooFewSubjects(n));
        }
        for i in 0..n {
            if t.get(i, i) != 0 || a.get(i, i) != 0 {
                return Err(GraphError::NonZeroDiagonal(i));
            }
            for j in 0..i {
                if t.get(i, j) != t.get(j, i) {
                    return Err(GraphError::NotSymmetric { i, j });
                }
                if u64::from(a.get(i, j)) + u64::from(a.get(j, i)) != u64::from(t.get(i, j)) {
                    return Err(GraphError::WinsMismatch { i, j });
                }
            }
        }
        let wins = a.row_sums();
        let totals = t.row_sums();
        Ok(Self { t, a, wins, totals })
    }

    /// Builds the data from wins alone, with `t = a + aᵀ`.
    pub fn from_wins(a: CountMatrix) -> Result<Self, GraphError> {
        let n = a.dim();
        let t = CountMatrix::from_fn(n, |i, j| a.get(i, j) + a.get(j, i));
        Self::new(t, a)
    }

    /// Number of subjects, `n + 1`.
    pub fn n_subjects(&self) -> usize {
        self.t.dim()
    }

    pub fn t(&self) -> &CountMatrix {
        &self.t
    }

    pub fn a(&self) -> &CountMatrix {
        &self.a
    }

    /// Scores `a_i = Σ_j a_ij`.
    pub fn wins(&self) -> &[u64] {
        &self.wins
    }

    /// Totals `t_i = Σ_j t_ij`.
    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::new(self.t.permuted(perm), self.a.permuted(perm))
            .expect("relabeling preserves validity")
    }
}

/// Connectivity and sparsity summary of a comparison dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDiagnostics {
    pub t_graph_connected: bool,
    pub win_digraph_strongly_connected: bool,
    /// Number of strongly connected components of the win digraph.
    pub win_components: usize,
    pub t_min: u64,
    pub t_max: u64,
    pub min_common_neighbors: usize,
    pub tau: f64,
}

fn check_probability(p: f64) -> Result<(), GraphError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(GraphError::InvalidProbability(p))
    }
}

/// Erdős–Rényi design: each unordered pair gets an independent `Bin(trials, p)`
/// count, mirrored. Pairs are drawn in row-major order over `i < j`.
pub fn sample_er_graph(
    n_subjects: usize,
    trials: u32,
    p: f64,
    seed: u64,
) -> Result<CountMatrix, GraphError> {
    sample_er_graph_with(&mut rng_from_seed(seed), n_subjects, trials, p)
}

pub fn sample_er_graph_with<R: Rng + ?Sized>(
    rng: &mut R,
    n_subjects: usize,
    trials: u32,
    p: f64,
) -> Result<CountMatrix, GraphError> {
    if n_subjects < 2 {
        return Err(GraphError::TooFewSubjects(n_subjects));
    }
    check_probability(p)?;
    if trials == 0 {
        return Err(GraphError::ZeroTrials);
    }
    let mut t = CountMatrix::zeros(n_subjects);
    if trials == 1 {
        for i in 0..n_subjects {
            for j in (i + 1)..n_subjects {
                if rng.random_bool(p) {
                    t.set_pair(i, j, 1);
                }
            }
        }
    } else {
        let dist =
            Binomial::new(u64::from(trials), p).map_err(|_| GraphError::InvalidProbability(p))?;
        for i in 0..n_subjects {
            for j in (i + 1)..n_subjects {
                let k = dist.sample(rng) as u32;
                t.set_pair(i, j, k);
            }
        }
    }
    Ok(t)
}

/// Draws `a_ij ~ Bin(t_ij, μ(βᵢ − βⱼ))` for `i < j` in row-major order and
/// sets `a_ji = t_ij − a_ij`.
pub fn sample_outcomes(
    t: &CountMatrix,
    beta: &[f64],
    link: &LinkModel,
    seed: u64,
) -> Result<ComparisonData, GraphError> {
    sample_outcomes_with(&mut rng_from_seed(seed), t, beta, link)
}

pub fn sample_outcomes_with<R: Rng + ?Sized>(
    rng: &mut R,
    t: &CountMatrix,
    beta: &[f64],
    link: &LinkModel,
) -> Result<ComparisonData, GraphError> {
    let n = t.dim();
    if beta.len() != n {
        return Err(GraphError::DimensionMismatch {
            expected: n,
            found: beta.len(),
        });
    }
    let mut a = CountMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let tij = t.get(i, j);
            if tij == 0 {
                continue;
            }
            let p = link.mu(beta[i] - beta[j]).clamp(0.0, 1.0);
            let wins = if tij == 1 {
                u32::from(rng.random_bool(p))
            } else {
                Binomial::new(u64::from(tij), p)
                    .map_err(|_| GraphError::InvalidProbability(p))?
                    .sample(rng) as u32
            };
            a.set(i, j, wins);
            a.set(j, i, tij - wins);
        }
    }
    ComparisonData::new(t.clone(), a)
}

/// Convenience used by the simulation harness: one child stream for the
/// graph, then outcomes from the same stream.
pub fn sample_instance(
    rng: &mut SimRng,
    n_subjects: usize,
    trials: u32,
    p: f64,
    beta: &[f64],
    link: &LinkModel,
) -> Result<ComparisonData, GraphError> {
    let t = sample_er_graph_with(rng, n_subjects, trials, p)?;
    sample_outcomes_with(rng, &t, beta, link)
}

/// Strongly connected components of the digraph with an edge `i → j`
/// whenever `adj[i][j] > 0` (iterative Tarjan).
pub fn strongly_connected_components(adj: &CountMatrix) -> Vec<Vec<usize>> {
    let n = adj.dim();
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| adj.get(i, j) > 0).collect())
        .collect();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::with_capacity(n);
    let mut components = Vec::new();
    let mut next = 0usize;
    // (vertex, position in its successor list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(top) = call.last_mut() {
            let v = top.0;
            if let Some(&w) = succ[v].get(top.1) {
                top.1 += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                components.push(comp);
            }
        }
    }
    components
}

/// True iff the win digraph (edge `i → j` when `a_ij > 0`) is strongly
/// connected.
pub fn strong_connectivity(a: &CountMatrix) -> bool {
    a.dim() > 0 && strongly_connected_components(a).len() == 1
}

/// Connectedness of the undirected graph with an edge where `t_ij > 0`.
pub fn is_connected(t: &CountMatrix) -> bool {
    let n = t.dim();
    if n == 0 {
        return false;
    }
    let mut seen = vec![false; n];
    let mut queue = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = queue.pop() {
        for (w, &c) in t.row(v).iter().enumerate() {
            if c > 0 && !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push(w);
            }
        }
    }
    count == n
}

/// `min_{i<j} #{k : t_ik > 0, t_jk > 0}` computed with row bitsets.
pub fn min_common_neighbors(t: &CountMatrix) -> usize {
    let n = t.dim();
    if n < 2 {
        return 0;
    }
    let words = n.div_ceil(64);
    let bits: Vec<Vec<u64>> = (0..n)
        .map(|i| {
            let mut row = vec![0u64; words];
            for (k, &c) in t.row(i).iter().enumerate() {
                if c > 0 {
                    row[k / 64] |= 1 << (k % 64);
                }
            }
            row
        })
        .collect();
    let mut best = usize::MAX;
    for i in 0..n {
        for j in (i + 1)..n {
            let common: u32 = bits[i]
                .iter()
                .zip(&bits[j])
                .map(|(x, y)| (x & y).count_ones())
                .sum();
            best = best.min(common as usize);
            if best == 0 {
                return 0;
            }
        }
    }
    best
}

pub fn diagnostics(data: &ComparisonData) -> GraphDiagnostics {
    let n = data.n_subjects();
    let components = strongly_connected_components(data.a()).len();
    let mcn = min_common_neighbors(data.t());
    GraphDiagnostics {
        t_graph_connected: is_connected(data.t()),
        win_digraph_strongly_connected: components == 1,
        win_components: components,
        t_min: data.totals().iter().copied().min().unwrap_or(0),
        t_max: data.totals().iter().copied().max().unwrap_or(0),
        min_common_neighbors: mcn,
        tau: mcn as f64 / n as f64,
    }
}

/// Linear merits `β_i = i·c·ln(n)/n`, `i = 0..n`, with `n = n_subjects − 1`.
pub fn linear_merits(n_subjects: usize, c: f64) -> Result<Vec<f64>, GraphError> {
    if n_subjects < 2 {
        return Err(GraphError::TooFewSubjects(n_subjects));
    }
    if !(c >= 0.0) {
        return Err(GraphError::NegativeCoefficient(c));
    }
    let n = (n_subjects - 1) as f64;
    let slope = c * n.ln() / n;
    Ok((0..n_subjects).map(|i| i as f64 * slope).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wins_from_edges(n: usize, edges: &[(usize, usize, u32)]) -> ComparisonData {
        let mut a = CountMatrix::zeros(n);
        for &(w, l, k) in edges {
            a.add(w, l, k);
        }
        ComparisonData::from_wins(a).unwrap()
    }

    #[test]
    fn er_degenerate_probabilities() {
        let full = sample_er_graph(3, 5, 1.0, 11).unwrap();
        assert_eq!(full, CountMatrix::complete(3, 5));
        let empty = sample_er_graph(3, 5, 0.0, 11).unwrap();
        assert_eq!(empty, CountMatrix::zeros(3));
    }

    #[test]
    fn er_mean_and_replay() {
        let t = sample_er_graph(100, 1, 0.3, 2024).unwrap();
        let off: u64 = t.row_sums().iter().sum::<u64>() / 2;
        let mean = off as f64 / 4950.0;
        assert!((mean - 0.3).abs() < 0.02, "mean {mean}");
        assert_eq!(t, sample_er_graph(100, 1, 0.3, 2024).unwrap());
        assert!(t.is_symmetric());
    }

    #[test]
    fn er_rejects_bad_input() {
        assert_eq!(
            sample_er_graph(3, 1, 1.5, 0),
            Err(GraphError::InvalidProbability(1.5))
        );
        assert_eq!(sample_er_graph(3, 0, 0.5, 0), Err(GraphError::ZeroTrials));
        assert_eq!(
            sample_er_graph(1, 1, 0.5, 0),
            Err(GraphError::TooFewSubjects(1))
        );
    }

    #[test]
    fn outcomes_respect_structure() {
        let t = CountMatrix::from_fn(3, |i, j| if i == j || (i + j == 3) { 0 } else { 4 });
        let d = sample_outcomes(&t, &[0.0, 0.5, -0.5], &LinkModel::Probit, 3).unwrap();
        assert_eq!(d.a().get(1, 2), 0);
        assert_eq!(d.a().get(2, 1), 0);
        assert_eq!(d.a().get(0, 1) + d.a().get(1, 0), 4);
        assert!(sample_outcomes(&t, &[0.0, 1.0], &LinkModel::Probit, 3).is_err());
    }

    #[test]
    fn outcomes_saturate_for_huge_gap() {
        let t = CountMatrix::complete(2, 4);
        for seed in 0..50 {
            let d = sample_outcomes(&t, &[0.0, -50.0], &LinkModel::Logistic, seed).unwrap();
            assert_eq!(d.a().get(0, 1), 4);
        }
    }

    #[test]
    fn outcome_mean_matches_binomial() {
        let t = CountMatrix::complete(2, 10);
        let mut rng = rng_from_seed(99);
        let reps = 100_000;
        let total: u64 = (0..reps)
            .map(|_| {
                u64::from(
                    sample_outcomes_with(&mut rng, &t, &[0.0, 0.0], &LinkModel::Logistic)
                        .unwrap()
                        .a()
                        .get(0, 1),
                )
            })
            .sum();
        let mean = total as f64 / reps as f64;
        assert!((mean - 5.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn validation_catches_broken_identities() {
        let mut t = CountMatrix::complete(2, 2);
        let a = CountMatrix::from_fn(2, |i, j| if i != j { 1 } else { 0 });
        assert!(ComparisonData::new(t.clone(), a.clone()).is_ok());
        t.set(0, 1, 3);
        assert_eq!(
            ComparisonData::new(t, a.clone()),
            Err(GraphError::NotSymmetric { i: 1, j: 0 })
        );
        let t = CountMatrix::complete(2, 3);
        assert_eq!(
            ComparisonData::new(t, a),
            Err(GraphError::WinsMismatch { i: 1, j: 0 })
        );
    }

    #[test]
    fn cycle_is_strongly_connected() {
        let d = wins_from_edges(3, &[(0, 1, 1), (1, 2, 1), (2, 0, 1)]);
        assert!(strong_connectivity(d.a()));
    }

    #[test]
    fn unbeaten_subject_breaks_strong_connectivity() {
        let d = wins_from_edges(
            4,
            &[
                (0, 1, 2),
                (0, 2, 1),
                (0, 3, 1),
                (1, 2, 1),
                (2, 1, 1),
                (2, 3, 1),
                (3, 2, 1),
                (1, 3, 1),
                (3, 1, 1),
            ],
        );
        assert!(!strong_connectivity(d.a()));
        let comps = strongly_connected_components(d.a());
        assert_eq!(comps.len(), 2);
    }

    #[test]
    fn balanced_complete_is_strongly_connected() {
        let a = CountMatrix::complete(5, 1);
        let d = ComparisonData::from_wins(a).unwrap();
        assert!(strong_connectivity(d.a()));
    }

    #[test]
    fn complete_graph_diagnostics() {
        let t = sample_er_graph(4, 1, 1.0, 0).unwrap();
        let d = sample_outcomes(&t, &[0.0; 4], &LinkModel::Logistic, 1).unwrap();
        let g = diagnostics(&d);
        assert_eq!(g.min_common_neighbors, 2);
        assert_eq!(g.tau, 0.5);
        assert!(g.t_graph_connected);
        assert_eq!((g.t_min, g.t_max), (3, 3));
    }

    #[test]
    fn star_graph_diagnostics() {
        // Hub 0 beats every leaf once.
        let d = wins_from_edges(5, &[(0, 1, 1), (0, 2, 1), (0, 3, 1), (0, 4, 1)]);
        let g = diagnostics(&d);
        assert_eq!(g.min_common_neighbors, 0);
        assert!(!g.win_digraph_strongly_connected);
        assert!(g.t_graph_connected);
        assert_eq!(g.tau, 0.0);
    }

    #[test]
    fn linear_merit_values() {
        let b = linear_merits(101, 0.5).unwrap();
        assert_eq!(b[0], 0.0);
        assert!((b[100] - 0.5 * 100f64.ln()).abs() < 1e-12);
        assert!((b[100] - std::f64::consts::LN_10).abs() < 1e-9);
        assert!((b[1] - 0.023_025_850_93).abs() < 1e-11);
        assert!(linear_merits(7, 0.0).unwrap().iter().all(|&v| v == 0.0));
        assert!(linear_merits(7, -1.0).is_err());
    }
}
