use majlab::dynamics::{stabilise_with, Kernel};
use majlab::gen::{random_binary_tree, random_odd_tree};
use majlab::io::{load_opinions, load_tree, tree_to_string};
use majlab::lanes::{pack, unpack, LaneKernel};
use majlab::{stabilise_tree, OpinionVector, RootedTree};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(pairs: usize, seed: u64) -> (RootedTree, OpinionVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tree = random_odd_tree(2 * pairs, &mut rng).unwrap();
    let x0 = OpinionVector::random(tree.n(), &mut rng);
    (tree, x0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn period_two_within_the_bound(pairs in 1usize..40, seed: u64) {
        let (tree, x0) = instance(pairs, seed);
        let k = Kernel::for_tree(&tree);
        let r = stabilise_with(&k, &x0, true).unwrap();
        prop_assert!(r.tau <= tree.graph().stabilisation_bound());
        let h = r.history.unwrap();
        let mut x = h[h.len() - 1].clone();
        for _ in 0..4 {
            let y = k.step(&x).unwrap();
            let z = k.step(&y).unwrap();
            prop_assert_eq!(&z, &x);
            x = y;
        }
    }

    #[test]
    fn negation_mirrors_the_trajectory(pairs in 1usize..40, seed: u64) {
        let (tree, x0) = instance(pairs, seed);
        let a = stabilise_tree(&tree, &x0).unwrap();
        let b = stabilise_tree(&tree, &x0.negated()).unwrap();
        prop_assert_eq!(a.tau, b.tau);
        prop_assert_eq!(a.stable_even.negated(), b.stable_even);
        prop_assert_eq!(a.stable_odd.negated(), b.stable_odd);
    }

    #[test]
    fn repeated_runs_agree(pairs in 1usize..40, seed: u64) {
        let (tree, x0) = instance(pairs, seed);
        let a = stabilise_tree(&tree, &x0).unwrap();
        let b = stabilise_tree(&tree, &x0).unwrap();
        prop_assert_eq!(a.tau, b.tau);
        prop_assert_eq!(a.first_flip, b.first_flip);
        prop_assert_eq!(a.stable_odd, b.stable_odd);
    }

    #[test]
    fn lane_engine_matches_scalar_steps(pairs in 1usize..30, seed: u64, lanes in 1usize..=64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_odd_tree(2 * pairs, &mut rng).unwrap();
        let states: Vec<OpinionVector> =
            (0..lanes).map(|_| OpinionVector::random(tree.n(), &mut rng)).collect();
        let (words, _) = pack(&states);
        let lk = LaneKernel::new(tree.graph());
        let k = Kernel::for_tree(&tree);
        let mut next = vec![0u64; words.len()];
        lk.step_into(&words, &mut next);
        for (j, s) in states.iter().enumerate() {
            prop_assert_eq!(unpack(&next, j), k.step(s).unwrap());
        }
    }

    #[test]
    fn tree_files_round_trip(pairs in 1usize..40, seed: u64) {
        let (tree, x0) = instance(pairs, seed);
        let text = tree_to_string(&tree);
        let back = load_tree(text.as_bytes()).unwrap();
        prop_assert_eq!(back.root(), tree.root());
        prop_assert_eq!(back.edges(), tree.edges());
        let line = format!("{x0}\n");
        prop_assert_eq!(load_opinions(line.as_bytes(), tree.n()).unwrap(), x0);
    }

    #[test]
    fn binary_trees_stay_binary(internal in 0usize..30, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_binary_tree(4 + 2 * internal, &mut rng).unwrap();
        prop_assert!(t.check_binary_rooted().is_ok());
        prop_assert!((0..t.n()).all(|v| t.degree(v) == 1 || t.degree(v) == 3));
    }
}
