use cohcsp::corpus::{permuted, random_digraph, random_graph, random_regular_graph, rng};
use cohcsp::equivalence::{
    ck_equiv, ck_fixpoint_from, cotest_filter, el_preorder, lk_equiv, lk_fixpoint_from, wl_oracle, z_equiv,
};
use cohcsp::presheaf::{build_base, dagger};
use cohcsp::structures::{brute_force, MapKind, Mode, Structure};
use proptest::prelude::*;
use rand::Rng;

/// Graph pairs biased towards equivalent ones: permuted copies, same
/// degree sequences, and independent samples.
fn graph_pair(seed: u64, max: usize) -> (Structure, Structure) {
    let mut r = rng(seed);
    let n = r.random_range(2..=max);
    match r.random_range(0..3) {
        0 => {
            let g = random_graph(&mut r, n, 0.5);
            let h = permuted(&mut r, &g);
            (g, h)
        }
        1 => {
            let d = r.random_range(1..n.max(2));
            match (random_regular_graph(&mut r, n, d), random_regular_graph(&mut r, n, d)) {
                (Some(g), Some(h)) => (g, h),
                _ => (random_graph(&mut r, n, 0.4), random_graph(&mut r, n, 0.4)),
            }
        }
        _ => (random_graph(&mut r, n, 0.4), random_graph(&mut r, n, 0.4)),
    }
}

fn digraph(seed: u64, n: usize) -> Structure {
    let mut r = rng(seed);
    random_digraph(&mut r, n, 0.4, true)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn soundness_sandwich(seed in any::<u64>(), k in 2usize..=3) {
        let (a, b) = graph_pair(seed, 5);
        let iso = !brute_force(&a, &b, MapKind::Iso).unwrap().is_empty();
        let z = z_equiv(&a, &b, k).unwrap();
        let ck = ck_equiv(&a, &b, k).unwrap();
        let lk = lk_equiv(&a, &b, k).unwrap();
        let el = el_preorder(&a, &b, k).unwrap() && el_preorder(&b, &a, k).unwrap();
        prop_assert!(!iso || z);
        prop_assert!(!z || ck);
        prop_assert!(!ck || lk);
        prop_assert!(!lk || el);
    }

    #[test]
    fn counting_matches_colour_refinement(seed in any::<u64>()) {
        let (a, b) = graph_pair(seed, 7);
        prop_assert_eq!(ck_equiv(&a, &b, 2).unwrap(), wl_oracle(&a, &b).unwrap());
    }

    #[test]
    fn dagger_symmetry(seed in any::<u64>()) {
        let n = rng(seed).random_range(2..=4);
        let a = digraph(seed, n);
        let b = digraph(seed ^ 1, n);
        prop_assert_eq!(lk_equiv(&a, &b, 2).unwrap(), lk_equiv(&b, &a, 2).unwrap());
        prop_assert_eq!(z_equiv(&a, &b, 2).unwrap(), z_equiv(&b, &a, 2).unwrap());
        let base = build_base(&a, &b, 2, Mode::Iso).unwrap();
        let x = lk_fixpoint_from(&base, false).unwrap().result;
        let y = lk_fixpoint_from(&base, true).unwrap().result;
        prop_assert_eq!(&x, &y);
        let back = lk_fixpoint_from(&build_base(&b, &a, 2, Mode::Iso).unwrap(), false).unwrap().result;
        prop_assert_eq!(dagger(&x).unwrap(), back);
    }

    #[test]
    fn cotest_fixpoint_is_stable(seed in any::<u64>()) {
        let (a, b) = graph_pair(seed, 6);
        let base = build_base(&a, &b, 2, Mode::Iso).unwrap();
        prop_assert!(cotest_filter(&base).is_subfamily_of(&base));
        let fix = ck_fixpoint_from(&base).unwrap().result;
        prop_assert_eq!(cotest_filter(&fix), fix);
    }

    #[test]
    fn reflexivity(seed in any::<u64>()) {
        let n = rng(seed).random_range(1..=5);
        let a = digraph(seed, n);
        for k in [2, 3] {
            prop_assert!(el_preorder(&a, &a, k).unwrap());
            prop_assert!(lk_equiv(&a, &a, k).unwrap());
            prop_assert!(ck_equiv(&a, &a, k).unwrap());
            prop_assert!(z_equiv(&a, &a, k).unwrap());
        }
        prop_assert!(wl_oracle(&a, &a).unwrap());
    }
}
