use majlab::probe::{
    estimate_probability, mc_tau, quantile, trial_seed, EstimateConfig, McSummary, ProbMethod,
    Target,
};
use majlab::stability::{ExtensionDecider, Options, StabilityKind};
use majlab::{OpinionVector, RootedTree};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn quantiles_are_monotone_and_bounded(mut xs in prop::collection::vec(-1e6f64..1e6, 1..200)) {
        xs.sort_by(f64::total_cmp);
        let qs: Vec<f64> = [0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0].iter().map(|&p| quantile(&xs, p)).collect();
        prop_assert!(qs.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(qs[0], xs[0]);
        prop_assert_eq!(qs[6], xs[xs.len() - 1]);
    }

    #[test]
    fn summaries_recompute_from_taus(seed: u64, trials in 1u64..120) {
        let s = mc_tau(2, 5, trials, seed).unwrap();
        prop_assert_eq!(s.taus.len() as u64, trials);
        prop_assert!(s.taus.iter().all(|&t| t <= 2 * 5 - 3));
        let again = McSummary::from_taus(2, 5, seed, s.seeds.clone(), s.taus.clone());
        prop_assert_eq!(serde_json::to_string(&again).unwrap(), serde_json::to_string(&s).unwrap());
        prop_assert_eq!(s.histogram.values().sum::<u64>(), trials);
    }

    #[test]
    fn trial_seeds_do_not_collide(master: u64) {
        let mut seen: Vec<u64> = (0..512).map(|i| trial_seed(master, i)).collect();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), 512);
    }
}

#[test]
fn monte_carlo_is_within_four_sigma_of_exact() {
    let exact = EstimateConfig {
        method: ProbMethod::Exact,
        ..EstimateConfig::default()
    };
    let mc = EstimateConfig {
        method: ProbMethod::MonteCarlo,
        trials: 20_000,
        seed: 3,
        ..EstimateConfig::default()
    };
    for (target, h) in [(Target::WeakZero, 3), (Target::Strong(0), 2), (Target::Strong(3), 2)] {
        let e = estimate_probability(target, h, &exact).unwrap();
        let m = estimate_probability(target, h, &mc).unwrap();
        assert_eq!(e.denominator, Some(e.trials));
        assert!(e.trials.is_power_of_two());
        assert!((e.value - m.value).abs() <= 4.0 * m.sigma() + 1e-12, "{target:?}: {} vs {}", e.value, m.value);
    }
}

#[test]
fn both_opinions_are_equally_likely_for_strong_stability() {
    let host = RootedTree::perfect(2, 3).unwrap();
    for t in 0..4 {
        let d = ExtensionDecider::new(&host, 1, StabilityKind::Strong(t), Options::default()).unwrap();
        let m = d.subtree().len();
        let (mut all, mut minus) = (0u32, 0u32);
        for i in 0..1u64 << m {
            let local = OpinionVector::from_index(m, i);
            all += d.holds(&local).unwrap() as u32;
            minus += d.holds_with_value(&local, false).unwrap() as u32;
        }
        assert_eq!(2 * minus, all, "t = {t}");
    }
}

#[test]
fn strong_one_dominates_half_the_weak_square() {
    let cfg = EstimateConfig::default();
    for h in 1..=2 {
        let s1 = estimate_probability(Target::Strong(1), h, &cfg).unwrap().value;
        let w = estimate_probability(Target::WeakZero, h - 1, &cfg).unwrap().value;
        assert!(s1 >= 0.5 * w * w, "h = {h}: {s1} < {}", 0.5 * w * w);
    }
}

#[test]
fn sibling_weak_events_are_independent() {
    // subjects 4 and 5 are siblings of height 2 in the height-4 tree
    let host = RootedTree::perfect(2, 4).unwrap();
    let a = majlab::stability::DrivenSubtree::new(&host, 4);
    let b = majlab::stability::DrivenSubtree::new(&host, 5);
    let trials = 40_000u64;
    let (mut na, mut nb, mut nab) = (0f64, 0f64, 0f64);
    for i in 0..trials {
        let x = OpinionVector::random(host.n(), &mut majlab::probe::trial_rng(77, i));
        let ea = a.weakly_stable(&a.restrict(&x)).unwrap();
        let eb = b.weakly_stable(&b.restrict(&x)).unwrap();
        na += ea as u8 as f64;
        nb += eb as u8 as f64;
        nab += (ea && eb) as u8 as f64;
    }
    let n = trials as f64;
    let (pa, pb, pab) = (na / n, nb / n, nab / n);
    let sigma = (pab * (1.0 - pab) / n).sqrt();
    assert!((pab - pa * pb).abs() <= 4.0 * sigma, "{pab} vs {}", pa * pb);
}

#[test]
fn le_t_estimates() {
    let plus = majlab::probe::le_t_positive_check(2, 2, true, 4_000, 1).unwrap();
    let minus = majlab::probe::le_t_positive_check(2, 2, false, 4_000, 2).unwrap();
    assert!(plus.value > 0.0);
    let slack = 4.0 * (plus.sigma().powi(2) + minus.sigma().powi(2)).sqrt();
    assert!((plus.value - minus.value).abs() <= slack);
    let later = majlab::probe::le_t_positive_check(2, 4, true, 4_000, 3).unwrap();
    assert!(plus.value >= later.value - 4.0 * (plus.sigma() + later.sigma()));
    let k4 = majlab::probe::le_t_positive_check(4, 2, true, 300, 4).unwrap();
    assert!(k4.value > 0.0);
}
