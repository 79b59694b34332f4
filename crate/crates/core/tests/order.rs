mod common;

use common::*;
use hmmob::exec::Exec;
use hmmob::hmm::{all_permutations, stationary_distribution, HmmParams};
use hmmob::order::{
    merged_count_from, merged_state_count, posterior_order, threshold_schedule, RateKind, ScheduleOptions,
    ThresholdSchedule,
};
use hmmob::priors::{EmissionPrior, RowPrior, TransitionPrior};
use hmmob::sampler::{run_chain, PosteriorModel, SamplerConfig};
use proptest::prelude::*;

fn theta_strategy(k: usize) -> impl Strategy<Value = HmmParams> {
    let rows = prop::collection::vec(prop::collection::vec(0.001f64..1.0, k), k);
    let gammas = prop::collection::vec(prop::sample::select(vec![-2.0, -0.05, 0.0, 0.02, 1.0, 3.0]), k);
    (rows, gammas).prop_map(move |(rows, gammas)| {
        let rows = rows
            .into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.into_iter().map(|v| v / s).collect()
            })
            .collect();
        HmmParams::new(gauss(), rows, gammas).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn order_between_one_and_k(theta in (1usize..=4).prop_flat_map(theta_strategy), u in 0.001f64..0.6, v in 0.0001f64..0.5) {
        let c = merged_state_count(&theta, u, v).unwrap();
        prop_assert!(c.order >= 1 && c.order <= theta.k());
    }

    #[test]
    fn relabeling_leaves_order_unchanged(theta in (1usize..=3).prop_flat_map(theta_strategy), u in 0.001f64..0.6, v in 0.0001f64..0.5) {
        let base = merged_state_count(&theta, u, v).unwrap();
        for perm in all_permutations(theta.k()) {
            prop_assert_eq!(merged_state_count(&theta.permute(&perm).unwrap(), u, v).unwrap(), base);
        }
    }

    #[test]
    fn larger_v_never_adds_classes(theta in (1usize..=4).prop_flat_map(theta_strategy), u in 0.001f64..0.6, v in 0.0001f64..0.5, dv in 0.0f64..1.0) {
        let a = merged_state_count(&theta, u, v).unwrap();
        let b = merged_state_count(&theta, u, v + dv).unwrap();
        prop_assert!(b.order <= a.order);
    }

    #[test]
    fn larger_u_never_keeps_more(theta in (1usize..=4).prop_flat_map(theta_strategy), u in 0.001f64..0.6, du in 0.0f64..0.5, v in 0.0001f64..0.5) {
        let a = merged_state_count(&theta, u, v).unwrap();
        let b = merged_state_count(&theta, u + du, v).unwrap();
        prop_assert!(b.kept <= a.kept);
    }

    #[test]
    fn split_copies_count_once(p in 0.05f64..0.95, q in 0.05f64..0.95, k in 2usize..=4) {
        let theta0 = HmmParams::two_state(gauss(), p, q, -2.0, 2.0).unwrap();
        let mu0 = stationary_distribution(&theta0).unwrap().mu;
        let copies = (k - 1) as f64;
        // thresholds under which the copies stay kept and the true states stay apart
        let u = 0.9 * mu0[0].min(mu0[1] / copies);
        let v = 0.9 * mu0[0].min(mu0[1] / copies) * 16.0;
        let dup = theta0.duplicate_last_state(k).unwrap();
        prop_assert_eq!(merged_state_count(&dup, u, v).unwrap().order, 2);
    }
}

#[test]
fn separated_truth_is_recovered() {
    let theta0 = HmmParams::new(
        gauss(),
        vec![vec![0.7, 0.2, 0.1], vec![0.2, 0.6, 0.2], vec![0.3, 0.3, 0.4]],
        vec![-3.0, 0.0, 3.0],
    )
    .unwrap();
    let mu = stationary_distribution(&theta0).unwrap().mu;
    let min_w = mu.iter().copied().fold(f64::INFINITY, f64::min);
    let min_sep = (0..3)
        .flat_map(|j| (0..3).filter(move |&i| i != j).map(move |i| (i, j)))
        .map(|(i, j)| mu[j] * (theta0.gamma(j) - theta0.gamma(i)).powi(2))
        .fold(f64::INFINITY, f64::min);
    let c = merged_state_count(&theta0, 0.5 * min_w, 0.5 * min_sep).unwrap();
    assert_eq!(c.order, 3);
}

#[test]
fn hand_built_mixture_of_orders() {
    let merged = HmmParams::two_state(gauss(), 0.5, 0.5, 0.0, 0.0).unwrap();
    let apart = HmmParams::two_state(gauss(), 0.5, 0.5, -2.0, 2.0).unwrap();
    assert_eq!(merge(&merged), 1);
    assert_eq!(merge(&apart), 2);
    let schedule = fixed_schedule();
    let mut samples = vec![merged; 70];
    samples.extend(vec![apart; 30]);
    let op = hmmob::order::posterior_order_of(&samples, &schedule, Exec::Parallel).unwrap();
    assert_eq!(op.mode, 1);
    assert!((op.prob(1) - 0.7).abs() < 1e-12 && (op.prob(2) - 0.3).abs() < 1e-12);
    let total: f64 = op.pmf.values().sum();
    assert!((total - 1.0).abs() < 1e-12);
}

fn fixed_schedule() -> ThresholdSchedule {
    let mut s = ThresholdSchedule::new(1000, RateKind::Exponential, ScheduleOptions::default()).unwrap();
    s.u_n = 0.1;
    s.v_n = 0.01;
    s
}

fn merge(theta: &HmmParams) -> usize {
    merged_state_count(theta, 0.1, 0.01).unwrap().order
}

#[test]
fn relabeled_trace_gives_same_order_posterior() {
    let truth = HmmParams::two_state(gauss(), 0.2, 0.3, -1.5, 1.5).unwrap();
    let y = hmmob::hmm::simulate(&truth, 150, 3).unwrap().y;
    let model = PosteriorModel::new(3, gauss(), RowPrior::symmetric_dirichlet(3, 4.0), EmissionPrior::default_for(gauss()));
    let cfg = SamplerConfig {
        n_iter: 300,
        burn_in: 100,
        seed: 8,
        ..SamplerConfig::default()
    };
    let trace = run_chain(&y, &model, &cfg).unwrap();
    let schedule = threshold_schedule(150, 3, 1, &TransitionPrior::shared(3, RowPrior::symmetric_dirichlet(3, 10.0))).unwrap();
    let base = posterior_order(&trace, &schedule, Exec::Sequential).unwrap();
    for perm in all_permutations(3) {
        let relabeled = trace.permuted(&perm).unwrap();
        assert_eq!(posterior_order(&relabeled, &schedule, Exec::Parallel).unwrap(), base);
    }
}

#[test]
fn rate_condition_gate() {
    let weak = TransitionPrior::shared(2, RowPrior::dirichlet(vec![2.0, 2.0]));
    let err = threshold_schedule(1000, 2, 1, &weak).unwrap_err();
    assert!(matches!(err, hmmob::Error::RateCondition { .. }));
    let ok = TransitionPrior::shared(2, RowPrior::dirichlet(vec![2.005, 2.005]));
    let s = threshold_schedule(1000, 2, 1, &ok).unwrap();
    assert!(s.w_n > 0.0);
    assert!(threshold_schedule(7, 2, 1, &TransitionPrior::shared(2, RowPrior::exponential(1.0))).is_err());
}

#[test]
fn emptied_all_maps_to_one() {
    let c = merged_count_from(&[0.3, 0.3, 0.4], &[0.0, 1.0, 2.0], 0.5, 0.1);
    assert!(c.emptied_all);
    assert_eq!(c.order, 1);
}

#[test]
fn order_posterior_json_round_trip() {
    let theta = HmmParams::two_state(gauss(), 0.5, 0.5, -2.0, 2.0).unwrap();
    let op = hmmob::order::posterior_order_of(&[theta], &fixed_schedule(), Exec::Sequential).unwrap();
    let text = serde_json::to_string(&op).unwrap();
    assert!(text.contains("\"pmf\":{\"2\":1.0}"));
    assert!(text.contains("\"emptied_all_count\":0"));
    let back: hmmob::order::OrderPosterior = serde_json::from_str(&text).unwrap();
    assert_eq!(back, op);
}
