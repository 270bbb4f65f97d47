//! Independent reference solvers used by the integration tests.

#![allow(dead_code)]

use pcmoment::graph::{ComparisonData, CountMatrix};
use pcmoment::links::LinkModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const BRACKET: f64 = 50.0;
const BISECTIONS: usize = 64;

/// Residual of subject `i` under full merits `beta`.
fn residual(data: &ComparisonData, link: &LinkModel, beta: &[f64], i: usize) -> f64 {
    let n = data.n_subjects();
    let mut s = -(data.wins()[i] as f64);
    for j in 0..n {
        let t = data.t().get(i, j);
        if t > 0 {
            s += f64::from(t) * link.mu(beta[i] - beta[j]);
        }
    }
    s
}

/// Root of the moment equations with subject 0 pinned at zero, found by
/// nested bisection on `[-50, 50]`: the innermost subjects are solved
/// first for each trial value of the outer ones. Each reduced equation is
/// increasing in its own coordinate, so plain bisection applies.
pub fn nested_bisection(data: &ComparisonData, link: &LinkModel) -> Vec<f64> {
    let n = data.n_subjects();
    let mut beta = vec![0.0; n];
    solve_from(data, link, &mut beta, 1);
    beta
}

fn solve_from(data: &ComparisonData, link: &LinkModel, beta: &mut [f64], k: usize) {
    if k >= beta.len() {
        return;
    }
    let (mut lo, mut hi) = (-BRACKET, BRACKET);
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (lo + hi);
        beta[k] = mid;
        solve_from(data, link, beta, k + 1);
        if residual(data, link, beta, k) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    beta[k] = 0.5 * (lo + hi);
    solve_from(data, link, beta, k + 1);
}

/// Bradley–Terry maximum likelihood by the minorization–maximization
/// update `γ_i ← W_i / Σ_j n_ij/(γ_i + γ_j)`, returned as `ln γ_i − ln γ_0`.
pub fn bradley_terry_mm(data: &ComparisonData, tol: f64, max_iter: usize) -> Vec<f64> {
    let n = data.n_subjects();
    let mut gamma = vec![1.0f64; n];
    for _ in 0..max_iter {
        let mut next = vec![0.0; n];
        for i in 0..n {
            let mut denom = 0.0;
            for j in 0..n {
                let t = data.t().get(i, j);
                if t > 0 {
                    denom += f64::from(t) / (gamma[i] + gamma[j]);
                }
            }
            next[i] = data.wins()[i] as f64 / denom;
        }
        let g0 = next[0];
        let mut change = 0.0f64;
        for i in 0..n {
            next[i] /= g0;
            change = change.max((next[i].ln() - gamma[i].ln()).abs());
        }
        gamma = next;
        if change < tol {
            break;
        }
    }
    gamma.iter().map(|g| g.ln()).collect()
}

/// Random comparison data with `n_subjects`, pair counts in `0..=t_max` and
/// outcomes under merits drawn from `[-1, 1]`. The test oracle draws from
/// its own generator, independent of the library's sampler.
pub fn random_instance(seed: u64, n_subjects: usize, t_max: u32, density: f64) -> ComparisonData {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let beta: Vec<f64> = (0..n_subjects)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let mut a = CountMatrix::zeros(n_subjects);
    for i in 0..n_subjects {
        for j in (i + 1)..n_subjects {
            if !rng.random_bool(density) {
                continue;
            }
            let t = rng.random_range(1..=t_max);
            let p = 1.0 / (1.0 + (beta[j] - beta[i]).exp());
            let w = (0..t).filter(|_| rng.random_bool(p)).count() as u32;
            a.set(i, j, w);
            a.set(j, i, t - w);
        }
    }
    ComparisonData::from_wins(a).unwrap()
}

pub fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Labelled reference values for the bundled 2018 season: merit, wins and
/// standard error at three decimals, with the Arizona Cardinals as
/// baseline under the probit link.
pub const NFL_2018_REFERENCE: [(&str, f64, u64, f64); 32] = [
    ("New England Patriots", 1.452, 11, 0.519),
    ("New York Jets", 0.338, 4, 0.530),
    ("Miami Dolphins", 0.718, 7, 0.509),
    ("Buffalo Bills", 0.673, 6, 0.514),
    ("Baltimore Ravens", 1.382, 10, 0.514),
    ("Cincinnati Bengals", 0.769, 6, 0.514),
    ("Pittsburgh Steelers", 1.337, 9, 0.52),
    ("Cleveland Browns", 0.968, 7, 0.519),
    ("Indianapolis Colts", 1.244, 10, 0.512),
    ("Houston Texans", 1.430, 11, 0.516),
    ("Tennessee Titans", 1.205, 9, 0.51),
    ("Jacksonville Jaguars", 0.591, 5, 0.517),
    ("Kansas City Chiefs", 1.762, 12, 0.537),
    ("Denver Broncos", 0.713, 6, 0.523),
    ("Oakland Raiders", 0.365, 4, 0.537),
    ("Los Angeles Chargers", 1.748, 12, 0.536),
    ("Dallas Cowboys", 1.284, 10, 0.512),
    ("Philadelphia Eagles", 1.193, 9, 0.511),
    ("New York Giants", 0.423, 5, 0.514),
    ("Washington Redskins", 0.756, 7, 0.511),
    ("Chicago Bears", 1.494, 12, 0.532),
    ("Green Bay Packers", 0.595, 6, 0.522),
    ("Minnesota Vikings", 1.059, 8, 0.523),
    ("Detroit Lions", 0.579, 6, 0.516),
    ("New Orleans Saints", 1.908, 13, 0.544),
    ("Atlanta Falcons", 0.767, 7, 0.512),
    ("Carolina Panthers", 0.840, 7, 0.511),
    ("Tampa Bay Buccaneers", 0.506, 5, 0.52),
    ("Los Angeles Rams", 1.963, 13, 0.559),
    ("San Francisco 49ers", 0.166, 4, 0.54),
    ("Seattle Seahawks", 1.305, 10, 0.525),
    ("Arizona Cardinals", 0.0, 3, 0.555),
];

pub fn data_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

/// Whether the printed value `printed` agrees with `value` within `tol`
/// after rounding `value` to the printed number of decimals.
pub fn matches_printed(value: f64, printed: f64, decimals: i32, tol: f64) -> bool {
    let scale = 10f64.powi(decimals);
    ((value * scale).round() / scale - printed).abs() <= tol + 1e-12
}
