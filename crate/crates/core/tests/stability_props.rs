use majlab::gen::random_binary_tree;
use majlab::stability::{
    decide, is_weakly_t_stable, weak_definitions, Method, Options, StabilityKind, Strategy,
    DEFAULT_EXTENSION_BUDGET,
};
use majlab::{OpinionVector, RootedTree};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random binary-rooted tree, an initial vector and a non-root vertex.
fn instance(internal: usize, seed: u64, inner: bool) -> (RootedTree, OpinionVector, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tree = random_binary_tree(4 + 2 * internal, &mut rng).unwrap();
    let x0 = OpinionVector::random(tree.n(), &mut rng);
    let pool: Vec<usize> = (1..tree.n()).filter(|&v| !inner || !tree.is_leaf(v)).collect();
    let v = pool[rng.gen_range(0..pool.len())];
    (tree, x0, v)
}

fn with(strategy: Strategy) -> Options {
    Options {
        budget: DEFAULT_EXTENSION_BUDGET,
        strategy,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weak_definitions_agree(internal in 0usize..6, seed: u64, t in 0usize..5) {
        let (tree, x0, v) = instance(internal, seed, false);
        let verdict = is_weakly_t_stable(&tree, &x0, v, t).unwrap();
        let k = majlab::Kernel::for_tree(&tree);
        let state = (0..t).fold(x0.clone(), |x, _| k.step(&x).unwrap());
        let (some, every) = weak_definitions(&tree, &state, v, 9, 1 << 20).unwrap();
        prop_assert_eq!(verdict.verdict, some);
        prop_assert_eq!(verdict.verdict, every);
        prop_assert!(verdict.replay(&tree, &x0).unwrap());
    }

    #[test]
    fn engines_agree_on_strong_stability(internal in 1usize..7, seed: u64, t in 0usize..5) {
        let (tree, x0, v) = instance(internal, seed, true);
        let kind = StabilityKind::Strong(t);
        let brute = decide(&tree, &x0, v, kind, with(Strategy::BruteForce)).unwrap();
        let window = decide(&tree, &x0, v, kind, with(Strategy::Window)).unwrap();
        prop_assert_eq!(brute.method, Method::BruteForce);
        prop_assert_eq!(window.method, Method::Window);
        prop_assert_eq!(brute.verdict, window.verdict);
        prop_assert!(brute.replay(&tree, &x0).unwrap());
        prop_assert!(window.replay(&tree, &x0).unwrap());
    }

    #[test]
    fn engines_agree_on_one_closeness(internal in 1usize..7, seed: u64) {
        let (tree, x0, v) = instance(internal, seed, true);
        let kind = StabilityKind::OneClose;
        let brute = decide(&tree, &x0, v, kind, with(Strategy::BruteForce)).unwrap();
        let window = decide(&tree, &x0, v, kind, with(Strategy::Window)).unwrap();
        prop_assert_eq!(brute.verdict, window.verdict);
        prop_assert!(window.replay(&tree, &x0).unwrap());
    }

    #[test]
    fn engines_agree_on_le_t(internal in 1usize..7, seed: u64, t in 2usize..6) {
        let (tree, x0, v) = instance(internal, seed, false);
        let kind = StabilityKind::LeT(t);
        let brute = decide(&tree, &x0, v, kind, with(Strategy::BruteForce)).unwrap();
        let window = decide(&tree, &x0, v, kind, with(Strategy::Window)).unwrap();
        prop_assert_eq!(brute.verdict, window.verdict);
        prop_assert!(brute.replay(&tree, &x0).unwrap());
    }

    #[test]
    fn strong_stability_implies_plain_stability(internal in 1usize..7, seed: u64, t in 0usize..5) {
        let (tree, x0, v) = instance(internal, seed, true);
        let verdict = decide(&tree, &x0, v, StabilityKind::Strong(t), Options::default()).unwrap();
        if verdict.verdict {
            prop_assert!(majlab::dynamics::is_t_stable(tree.graph(), &x0, v, t).unwrap());
        }
    }

    #[test]
    fn verdicts_are_invariant_under_negation(internal in 1usize..7, seed: u64, t in 0usize..4) {
        let (tree, x0, v) = instance(internal, seed, true);
        for kind in [StabilityKind::Weak(t), StabilityKind::Strong(t), StabilityKind::OneClose] {
            let a = decide(&tree, &x0, v, kind, Options::default()).unwrap();
            let b = decide(&tree, &x0.negated(), v, kind, Options::default()).unwrap();
            prop_assert_eq!(a.verdict, b.verdict, "{:?}", kind);
        }
    }
}
