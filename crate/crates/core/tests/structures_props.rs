use std::collections::BTreeSet;

use cohcsp::cohomology::extract_theories;
use cohcsp::corpus::{random_linear_system, rng};
use cohcsp::presheaf::{build_base, coflasquify};
use cohcsp::structures::{
    brute_force, check_section, linear_instance, parse_structure, MapKind, Mode, RelationSymbol, Section, Structure,
    Vocabulary,
};
use proptest::prelude::*;
use rand::Rng;

fn vocabulary() -> Vocabulary {
    Vocabulary::new(vec![
        RelationSymbol { name: "P".into(), arity: 1 },
        RelationSymbol { name: "E".into(), arity: 2 },
        RelationSymbol { name: "T".into(), arity: 3 },
    ])
    .unwrap()
}

fn random_structure(r: &mut impl Rng, n: usize) -> Structure {
    let vocab = vocabulary();
    let relations = vocab
        .relations()
        .iter()
        .map(|sym| {
            let total = n.pow(sym.arity as u32);
            (0..total)
                .filter(|_| r.random_bool(0.35))
                .map(|code| (0..sym.arity).map(|i| ((code / n.pow(i as u32)) % n) as u32).collect())
                .collect()
        })
        .collect();
    let universe = (0..n).map(|i| format!("v{i}")).collect();
    Structure::new(vocab, universe, relations).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn brute_force_is_definitional(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (n, m) = (r.random_range(1..=4), r.random_range(1..=3));
        let a = random_structure(&mut r, n);
        let b = random_structure(&mut r, m);
        let ctx: Vec<u32> = (0..n as u32).collect();
        let homs: BTreeSet<Vec<u32>> = brute_force(&a, &b, MapKind::Hom).unwrap().into_iter().collect();
        let total = m.pow(n as u32);
        for code in 0..total {
            let f: Vec<u32> = (0..n).map(|i| ((code / m.pow(i as u32)) % m) as u32).collect();
            let s = Section::new(ctx.clone(), f.clone()).unwrap();
            prop_assert_eq!(homs.contains(&f), check_section(&a, &b, &s, Mode::Hom));
        }
        let isos = brute_force(&a, &b, MapKind::Iso).unwrap();
        let embeds: BTreeSet<Vec<u32>> = brute_force(&a, &b, MapKind::Embed).unwrap().into_iter().collect();
        for f in &isos {
            prop_assert!(embeds.contains(f));
        }
        for f in &embeds {
            prop_assert!(homs.contains(f));
        }
    }

    #[test]
    fn induced_substructure_is_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=6);
        let s = random_structure(&mut r, n);
        let outer: BTreeSet<u32> = (0..n as u32).filter(|_| r.random_bool(0.7)).collect();
        let inner: BTreeSet<u32> = outer.iter().copied().filter(|_| r.random_bool(0.6)).collect();
        let mid = s.induced_substructure(&outer).unwrap();
        let rank: BTreeSet<u32> = inner
            .iter()
            .map(|e| outer.iter().position(|x| x == e).unwrap() as u32)
            .collect();
        prop_assert_eq!(s.induced_substructure(&inner).unwrap(), mid.induced_substructure(&rank).unwrap());
    }

    #[test]
    fn serialize_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(0..=5);
        let s = random_structure(&mut r, n);
        let text = s.serialize();
        let back = parse_structure(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.serialize(), text);
    }

    #[test]
    fn instance_theory_characterises_homomorphisms(seed in any::<u64>(), p in prop::sample::select(vec![2u32, 3])) {
        let mut r = rng(seed);
        let eqs = random_linear_system(&mut r, p, 4, 4, 2);
        let (a, t) = linear_instance(p, &eqs).unwrap();
        let b = t.template_structure();
        let sbar = coflasquify(&build_base(&a, &b, 2, Mode::Hom).unwrap());
        let theories = extract_theories(&a, &t, &sbar).unwrap();
        let homs: BTreeSet<Vec<u32>> = brute_force(&a, &b, MapKind::Hom).unwrap().into_iter().collect();
        let n = a.size();
        let value = |f: &[u32], v: u32| b.name(f[v as usize]).parse::<u64>().unwrap();
        for code in 0..(p as usize).pow(n as u32) {
            let f: Vec<u32> = (0..n).map(|i| ((code / (p as usize).pow(i as u32)) % p as usize) as u32).collect();
            let sat = theories.instance.equations.iter().all(|e| e.holds(|v| value(&f, v), p));
            prop_assert_eq!(sat, homs.contains(&f));
        }
    }
}
