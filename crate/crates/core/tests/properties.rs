//! Property tests over random links, designs and merits.

mod common;

use pcmoment::cli::{
    export_games, ingest_path, ingest_records, read_games, BaselineChoice, IngestOptions, TiePolicy,
};
use pcmoment::estimator::{fit, FitConfig, MomentSystem};
use pcmoment::graph::{
    is_connected, sample_instance, strong_connectivity, ComparisonData, CountMatrix,
};
use pcmoment::inference::{
    conditional_variance, confidence_interval, pair_variance, z_statistic, CovarianceReport,
};
use pcmoment::linalg::Cholesky;
use pcmoment::links::LinkModel;
use pcmoment::rng::{child_seed, rng_from_seed};
use pcmoment::simulate::{run_consistency_study, PRule};
use proptest::prelude::*;

use common::{max_abs_diff, random_instance};

fn link_strategy() -> impl Strategy<Value = LinkModel> {
    prop_oneof![Just(LinkModel::Logistic), Just(LinkModel::Probit)]
}

/// Merits with the baseline entry pinned at zero.
fn pinned(mut beta: Vec<f64>) -> Vec<f64> {
    beta[0] = 0.0;
    beta
}

fn fitted(data: ComparisonData, link: LinkModel) -> Option<(MomentSystem, Vec<f64>)> {
    if !strong_connectivity(data.a()) {
        return None;
    }
    let system = MomentSystem::new(data, link);
    let result = fit(&system, &FitConfig::fast()).ok()?;
    result.exists().then_some((system, result.beta_hat))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn link_is_symmetric(link in link_strategy(), x in -30.0f64..30.0) {
        prop_assert!((link.mu(x) + link.mu(-x) - 1.0).abs() <= 1e-14);
        prop_assert!((link.mu_prime(x) - link.mu_prime(-x)).abs() <= 1e-15);
        prop_assert!((link.mu_double_prime(x) + link.mu_double_prime(-x)).abs() <= 1e-15);
        prop_assert!(link.mu_prime(x) >= 0.0);
    }

    #[test]
    fn link_derivatives_match_differences(link in link_strategy(), x in -6.0f64..6.0) {
        let h = 1e-5;
        let d1 = (link.mu(x + h) - link.mu(x - h)) / (2.0 * h);
        let d2 = (link.mu_prime(x + h) - link.mu_prime(x - h)) / (2.0 * h);
        prop_assert!((d1 - link.mu_prime(x)).abs() <= 1e-8);
        prop_assert!((d2 - link.mu_double_prime(x)).abs() <= 1e-8);
    }

    #[test]
    fn link_inverse_round_trips(link in link_strategy(), x in -5.0f64..5.0) {
        prop_assert!((link.mu_inverse(link.mu(x)) - x).abs() <= 1e-7 * (1.0 + x.abs()));
    }

    #[test]
    fn counts_are_consistent(seed in any::<u64>(), n in 2usize..12, t_max in 1u32..5, density in 0.1f64..1.0) {
        let data = random_instance(seed, n, t_max, density);
        let wins: u64 = data.wins().iter().sum();
        let totals: u64 = data.totals().iter().sum();
        prop_assert_eq!(2 * wins, totals);
        for i in 0..n {
            let losses: u64 = (0..n).map(|j| u64::from(data.a().get(j, i))).sum();
            prop_assert_eq!(data.wins()[i] + losses, data.totals()[i]);
        }
    }

    #[test]
    fn residuals_sum_to_zero(
        link in link_strategy(),
        seed in any::<u64>(),
        n in 2usize..10,
        beta in prop::collection::vec(-3.0f64..3.0, 10),
    ) {
        let data = random_instance(seed, n, 3, 0.6);
        let system = MomentSystem::new(data, link);
        let h = system.full_residual(&pinned(beta[..n].to_vec())).unwrap();
        let scale: f64 = system.data().totals().iter().sum::<u64>() as f64;
        prop_assert!(h.iter().sum::<f64>().abs() <= 1e-12 * (1.0 + scale));
    }

    #[test]
    fn jacobian_is_positive_definite_on_connected_designs(
        link in link_strategy(),
        seed in any::<u64>(),
        n in 2usize..10,
        beta in prop::collection::vec(-3.0f64..3.0, 10),
    ) {
        let data = random_instance(seed, n, 3, 0.5);
        prop_assume!(is_connected(data.t()));
        let system = MomentSystem::new(data, link);
        let jac = system.jacobian(&pinned(beta[..n].to_vec())).unwrap();
        prop_assert!(jac.v.is_symmetric(1e-12));
        prop_assert!(Cholesky::factor(&jac.v).is_ok());
    }

    #[test]
    fn logistic_score_variance_equals_jacobian_diagonal(
        seed in any::<u64>(),
        n in 2usize..10,
        beta in prop::collection::vec(-3.0f64..3.0, 10),
    ) {
        let data = random_instance(seed, n, 4, 0.7);
        let beta = pinned(beta[..n].to_vec());
        let system = MomentSystem::new(data, LinkModel::Logistic);
        let v = system.jacobian(&beta).unwrap().full_diagonal();
        let u = conditional_variance(system.data(), &beta, &LinkModel::Logistic);
        prop_assert!(max_abs_diff(&u, &v) <= 1e-12 * (1.0 + v.iter().cloned().fold(0.0, f64::max)));
    }

    #[test]
    fn fit_solves_the_moment_equations(link in link_strategy(), seed in any::<u64>(), n in 2usize..9) {
        let data = random_instance(seed, n, 4, 0.8);
        let fitted = fitted(data, link);
        prop_assume!(fitted.is_some());
        let (system, beta) = fitted.unwrap();
        prop_assert_eq!(beta[0], 0.0);
        let h = system.full_residual(&beta).unwrap();
        let t_max = *system.data().totals().iter().max().unwrap() as f64;
        prop_assert!(h.iter().all(|r| r.abs() <= 1e-9 * t_max.max(1.0)));
    }

    #[test]
    fn changing_the_baseline_shifts_merits(link in link_strategy(), seed in any::<u64>(), n in 3usize..9, pick in 1usize..9) {
        let data = random_instance(seed, n, 4, 0.8);
        let fitted = fitted(data.clone(), link.clone());
        prop_assume!(fitted.is_some());
        let (_, beta) = fitted.unwrap();
        let baseline = pick % n;
        let other = MomentSystem::new(data, link).with_baseline(baseline).unwrap();
        let shifted = fit(&other, &FitConfig::fast()).unwrap().beta_hat;
        let expected: Vec<f64> = beta.iter().map(|b| b - beta[baseline]).collect();
        prop_assert!(max_abs_diff(&shifted, &expected) <= 1e-8);
    }

    #[test]
    fn relabelling_permutes_merits(link in link_strategy(), seed in any::<u64>(), n in 3usize..9, rotate in 1usize..8) {
        let data = random_instance(seed, n, 4, 0.8);
        let fitted = fitted(data.clone(), link.clone());
        prop_assume!(fitted.is_some());
        let (_, beta) = fitted.unwrap();
        // Keep subject 0 in place and rotate the rest.
        let perm: Vec<usize> = std::iter::once(0).chain((0..n - 1).map(|k| 1 + (k + rotate) % (n - 1))).collect();
        let moved = data.permuted(&perm);
        let (_, beta_moved) = fitted_or_panic(moved, link);
        for (old, &new) in perm.iter().enumerate() {
            prop_assert!((beta_moved[new] - beta[old]).abs() <= 1e-8);
        }
    }

    #[test]
    fn pair_inference_is_antisymmetric(link in link_strategy(), seed in any::<u64>(), n in 3usize..9, d in -2.0f64..2.0) {
        let data = random_instance(seed, n, 4, 0.8);
        let fitted = fitted(data, link);
        prop_assume!(fitted.is_some());
        let (system, beta) = fitted.unwrap();
        let report = CovarianceReport::new(&system, &beta).unwrap();
        let (i, j) = (1, n - 1);
        let v_ij = pair_variance(&report, i, j).unwrap();
        prop_assert!(v_ij > 0.0);
        prop_assert_eq!(v_ij, pair_variance(&report, j, i).unwrap());
        let z_ij = z_statistic(&report, i, j, d).unwrap();
        let z_ji = z_statistic(&report, j, i, -d).unwrap();
        prop_assert!((z_ij + z_ji).abs() <= 1e-12 * (1.0 + z_ij.abs()));
        let ci = confidence_interval(&report, i, j, 0.95).unwrap();
        let cj = confidence_interval(&report, j, i, 0.95).unwrap();
        prop_assert!((ci.lower + cj.upper).abs() <= 1e-12 && (ci.upper + cj.lower).abs() <= 1e-12);
        prop_assert!(ci.contains(ci.estimate));
        prop_assert!(report.sigma(i, j).unwrap() >= 0.0);
    }

    #[test]
    fn more_comparisons_shrink_logistic_variance(
        seed in any::<u64>(),
        n in 3usize..9,
        beta in prop::collection::vec(-2.0f64..2.0, 9),
        extra in 1u32..4,
    ) {
        let data = random_instance(seed, n, 3, 0.7);
        prop_assume!(is_connected(data.t()));
        let beta = pinned(beta[..n].to_vec());
        // Subject 1 plays `extra` more games against the last subject, split evenly enough to stay valid.
        let mut a = data.a().clone();
        a.add(1, n - 1, extra);
        let denser = ComparisonData::from_wins(a).unwrap();
        let sparse = CovarianceReport::new(&MomentSystem::new(data, LinkModel::Logistic), &beta).unwrap();
        let dense = CovarianceReport::new(&MomentSystem::new(denser, LinkModel::Logistic), &beta).unwrap();
        prop_assert!(dense.sigma(1, 1).unwrap() < sparse.sigma(1, 1).unwrap());
    }

    #[test]
    fn export_then_ingest_round_trips(seed in any::<u64>(), n in 2usize..10) {
        let data = random_instance(seed, n, 3, 0.7);
        let labels: Vec<String> = (0..n).map(|i| format!("S{i:02}")).collect();
        let labeled = pcmoment::cli::LabeledData { labels: labels.clone(), data: data.clone(), dropped_ties: vec![0; n] };
        let mut buffer = Vec::new();
        export_games(&labeled, &mut buffer).unwrap();
        let options = IngestOptions { tie_policy: TiePolicy::Drop, baseline: BaselineChoice::FewestWins };
        let records = read_games(buffer.as_slice()).unwrap();
        prop_assume!(!records.is_empty());
        let back = ingest_records(&records, &options).unwrap();
        // Subjects with no games do not appear in the export.
        for (k, label) in back.labels.iter().enumerate() {
            let i = labels.iter().position(|l| l == label).unwrap();
            for (m, other) in back.labels.iter().enumerate() {
                let j = labels.iter().position(|l| l == other).unwrap();
                prop_assert_eq!(back.data.a().get(k, m), data.a().get(i, j));
            }
        }
    }

    #[test]
    fn sampling_is_reproducible(seed in any::<u64>(), r in 0u64..1000, n in 2usize..20, p in 0.05f64..1.0) {
        let beta: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let draw = || {
            let mut rng = rng_from_seed(child_seed(seed, r));
            sample_instance(&mut rng, n, 2, p, &beta, &LinkModel::Probit).unwrap()
        };
        prop_assert_eq!(draw(), draw());
    }
}

fn fitted_or_panic(data: ComparisonData, link: LinkModel) -> (MomentSystem, Vec<f64>) {
    fitted(data, link).expect("relabelled data keeps its estimate")
}

#[test]
fn unbeaten_subject_has_no_estimate() {
    let mut a = CountMatrix::zeros(3);
    a.set(0, 1, 1);
    a.set(1, 0, 1);
    a.set(2, 0, 2);
    a.set(2, 1, 1);
    let data = ComparisonData::from_wins(a).unwrap();
    assert!(!strong_connectivity(data.a()));
    assert!(fitted(data, LinkModel::Probit).is_none());
}

#[test]
fn score_deviation_rate_stays_below_five_over_n() {
    let points = run_consistency_study(&[50, 100], PRule::Half, 0.4, 200, 7).unwrap();
    for p in points {
        assert!(
            p.score_deviation_rate <= 5.0 / p.n as f64,
            "n = {}: deviation rate {}",
            p.n,
            p.score_deviation_rate
        );
    }
}

#[test]
fn bundled_season_ingests() {
    let options = IngestOptions::default();
    let data = ingest_path(&common::data_path("nfl2018_games.csv"), &options).unwrap();
    assert_eq!(data.labels.len(), 32);
    assert_eq!(data.baseline_label(), "Arizona Cardinals");
}
