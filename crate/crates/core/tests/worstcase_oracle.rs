use majlab::dynamics::{stabilise_with, Kernel};
use majlab::gen::{odd_trees, random_odd_tree};
use majlab::worstcase::{brute_force_tau, worst_case_tau, worst_case_witness};
use majlab::RootedTree;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check_witness(tree: &RootedTree) {
    let r = worst_case_tau(tree).unwrap();
    let w = worst_case_witness(tree, &r.argmax).unwrap();
    assert_eq!(Some(&w), r.witness.as_ref());
    let k = Kernel::for_tree(tree);
    let res = stabilise_with(&k, &w, true).unwrap();
    assert_eq!(res.tau, r.tau, "witness tau on {tree:?}");
    let hist = res.history.as_ref().unwrap();
    for (i, &v) in r.argmax.vertices.iter().enumerate() {
        let i = i + 1;
        for t in 0..=i {
            assert!(hist[t].get(v), "x_{t}(v_{i}) should be +1");
        }
        assert!(!hist[i + 1].get(v), "x_{}(v_{i}) should be -1", i + 1);
    }
}

#[test]
fn formula_matches_brute_force_on_all_small_trees() {
    let mut total = 0;
    for n in [6, 8, 10, 12] {
        for t in odd_trees(n).unwrap() {
            let bf = brute_force_tau(t.graph(), 24).unwrap();
            assert_eq!(worst_case_tau(&t).unwrap().tau, bf.tau, "{t:?}");
            check_witness(&t);
            total += 1;
        }
    }
    assert_eq!(total, 2 + 3 + 7 + 13);
}

#[test]
fn formula_matches_brute_force_on_random_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for i in 0..60 {
        let n = 6 + 2 * (i % 8);
        let t = random_odd_tree(n, &mut rng).unwrap();
        let bf = brute_force_tau(t.graph(), 24).unwrap();
        let wc = worst_case_tau(&t).unwrap();
        assert_eq!(wc.tau, bf.tau);
        assert!(wc.tau < t.graph().stabilisation_bound());
        check_witness(&t);
    }
}

#[test]
fn perfect_trees_follow_the_closed_form() {
    for k in [2, 4] {
        for h in 2..=5 {
            let t = RootedTree::perfect(k, h).unwrap();
            assert_eq!(worst_case_tau(&t).unwrap().tau, 2 * h - 3);
            assert_eq!(t.diameter(), 2 * h);
        }
    }
    let t = RootedTree::perfect(2, 3).unwrap();
    check_witness(&t);
}
