use cohcsp::corpus::{random_digraph, rng};
use cohcsp::presheaf::{
    build_base, coflasquify, compatible_families, compose, dagger, extend_compatible_family, global_section_maps,
    global_sections, is_closed, is_flasque, PresheafFamily,
};
use cohcsp::structures::{brute_force, MapKind, Mode, Structure};
use proptest::prelude::*;
use rand::Rng;

fn pair(seed: u64, max: usize) -> (Structure, Structure) {
    let mut r = rng(seed);
    let n = r.random_range(1..=max);
    let m = r.random_range(1..=max);
    let da = r.random_range(0.2..0.7);
    let db = r.random_range(0.2..0.8);
    (random_digraph(&mut r, n, da, true), random_digraph(&mut r, m, db, true))
}

/// Closure of a random subset of the top-level sections.
fn random_closed_subfamily(f: &PresheafFamily, seed: u64) -> PresheafFamily {
    let mut r = rng(seed);
    let poset = f.poset().clone();
    let keep: Vec<(usize, Vec<u32>)> = poset
        .maximal()
        .iter()
        .flat_map(|&c| f.sections(c).iter().map(move |v| (c, v.clone())))
        .filter(|_| r.random_bool(0.6))
        .collect();
    let mut sub = f.cleared();
    for (c, v) in keep {
        let s = f.section(c, &v);
        for ctx in poset.contexts() {
            if ctx.iter().all(|e| s.context().contains(e)) {
                sub.insert(&s.restrict(ctx).unwrap()).unwrap();
            }
        }
    }
    sub
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coflasquify_is_idempotent_flasque_and_closed(seed in any::<u64>(), k in 2usize..=3) {
        let (a, b) = pair(seed, 4);
        let s = coflasquify(&build_base(&a, &b, k, Mode::Hom).unwrap());
        prop_assert!(is_flasque(&s));
        prop_assert!(is_closed(&s));
        prop_assert_eq!(coflasquify(&s), s);
    }

    #[test]
    fn local_inconsistency_is_global(seed in any::<u64>(), k in 2usize..=3) {
        let (a, b) = pair(seed, 4);
        let s = coflasquify(&build_base(&a, &b, k, Mode::Hom).unwrap());
        let hole = (1..s.poset().len()).any(|c| s.sections(c).is_empty());
        if hole {
            prop_assert!(s.is_empty());
        }
    }

    #[test]
    fn global_sections_are_homomorphisms(seed in any::<u64>(), k in 2usize..=3) {
        let (a, b) = pair(seed, 5);
        let s = coflasquify(&build_base(&a, &b, k, Mode::Hom).unwrap());
        prop_assert_eq!(global_section_maps(&s).unwrap(), brute_force(&a, &b, MapKind::Hom).unwrap());
        let fams = compatible_families(&s).unwrap();
        let gs = global_sections(&s).unwrap();
        prop_assert_eq!(fams.len(), gs.len());
        for (fam, g) in fams.iter().zip(&gs) {
            let ext = extend_compatible_family(&s, fam);
            prop_assert_eq!(ext.as_ref(), Some(g));
            prop_assert_eq!(&g.compatible_family(s.poset()), fam);
        }
    }

    #[test]
    fn composition_is_associative_and_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let sizes: Vec<usize> = (0..4).map(|_| r.random_range(1..=3)).collect();
        let s: Vec<Structure> = sizes.iter().map(|&n| random_digraph(&mut r, n, 0.5, true)).collect();
        let f = |i: usize| coflasquify(&build_base(&s[i], &s[i + 1], 2, Mode::Hom).unwrap());
        let (x, y, z) = (f(0), f(1), f(2));
        let left = compose(&compose(&x, &y).unwrap(), &z).unwrap();
        let right = compose(&x, &compose(&y, &z).unwrap()).unwrap();
        prop_assert_eq!(left.all_sections(), right.all_sections());
        let sub = random_closed_subfamily(&x, seed ^ 1);
        prop_assert!(compose(&sub, &y).unwrap().is_subfamily_of(&compose(&x, &y).unwrap()));
        let suby = random_closed_subfamily(&y, seed ^ 2);
        prop_assert!(compose(&x, &suby).unwrap().is_subfamily_of(&compose(&x, &y).unwrap()));
        let xy = compose(&x, &y).unwrap();
        prop_assert!(is_flasque(&xy));
    }

    #[test]
    fn dagger_is_an_involution(seed in any::<u64>()) {
        let (a, b) = pair(seed, 4);
        let i = build_base(&a, &b, 2, Mode::Iso).unwrap();
        let (di, ba) = (dagger(&i).unwrap(), build_base(&b, &a, 2, Mode::Iso).unwrap());
        prop_assert_eq!(di.all_sections(), ba.all_sections());
        let s = coflasquify(&i);
        prop_assert_eq!(dagger(&dagger(&s).unwrap()).unwrap(), s);
    }

    #[test]
    fn restriction_is_functorial(seed in any::<u64>()) {
        let (a, b) = pair(seed, 4);
        let h = build_base(&a, &b, 3, Mode::Hom).unwrap();
        for (c, v) in h.iter().take(40) {
            let s = h.section(c, v);
            let ctx = s.context().to_vec();
            if ctx.len() < 2 { continue; }
            let mid: Vec<u32> = ctx[1..].to_vec();
            let low: Vec<u32> = ctx[2..].to_vec();
            prop_assert_eq!(s.restrict(&mid).unwrap().restrict(&low).unwrap(), s.restrict(&low).unwrap());
            prop_assert_eq!(s.restrict(&ctx).unwrap(), s.clone());
        }
    }
}
