//! Seeded random fixtures: digraphs, graphs, regular graphs, permuted
//! copies, linear systems over `Z_p`, and small integer systems.
//!
//! Every generator takes an explicit RNG so corpora are reproducible from a
//! single seed.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::structures::{graph, LinearEquation, Structure, Vocabulary};

pub type CorpusRng = ChaCha8Rng;

pub fn rng(seed: u64) -> CorpusRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Directed graph (relation `E`) on `0..n`; each ordered pair, loops
/// included, is an edge with probability `density`.
pub fn random_digraph(rng: &mut CorpusRng, n: usize, density: f64, loops: bool) -> Structure {
    let mut edges = BTreeSet::new();
    for u in 0..n as u32 {
        for v in 0..n as u32 {
            if (u != v || loops) && rng.random_bool(density) {
                edges.insert(vec![u, v]);
            }
        }
    }
    let universe = (0..n).map(|i| i.to_string()).collect();
    Structure::new(Vocabulary::graph(), universe, vec![edges]).expect("generated digraph is valid")
}

/// Undirected simple graph, `G(n, density)`.
pub fn random_graph(rng: &mut CorpusRng, n: usize, density: f64) -> Structure {
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            if rng.random_bool(density) {
                edges.push((u, v));
            }
        }
    }
    graph(n, &edges).expect("edges are in range")
}

/// Uniform-ish `d`-regular simple graph by the pairing model with restarts;
/// `None` when `n·d` is odd or `d ≥ n`.
pub fn random_regular_graph(rng: &mut CorpusRng, n: usize, d: usize) -> Option<Structure> {
    if (n * d) % 2 == 1 || d >= n.max(1) {
        return None;
    }
    'attempt: for _ in 0..1000 {
        let mut stubs: Vec<u32> = (0..n as u32).flat_map(|v| std::iter::repeat_n(v, d)).collect();
        stubs.shuffle(rng);
        let mut edges = BTreeSet::new();
        for pair in stubs.chunks(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u == v || !edges.insert((u, v)) {
                continue 'attempt;
            }
        }
        let edges: Vec<(u32, u32)> = edges.into_iter().collect();
        return Some(graph(n, &edges).expect("edges are in range"));
    }
    None
}

/// An isomorphic copy with the same element names, relations moved along a
/// random permutation.
pub fn permuted(rng: &mut CorpusRng, s: &Structure) -> Structure {
    let mut perm: Vec<u32> = (0..s.size() as u32).collect();
    perm.shuffle(rng);
    let relations = (0..s.vocabulary().len())
        .map(|r| {
            s.relation(r)
                .iter()
                .map(|t| t.iter().map(|&e| perm[e as usize]).collect())
                .collect()
        })
        .collect();
    Structure::new(s.vocabulary().clone(), s.universe().to_vec(), relations).expect("permutation preserves validity")
}

/// Random equations over `Z_p` in variables `x0..x{vars-1}`: arity in
/// `1..=max_arity`, coefficients in `1..p`, constants in `0..p`.
pub fn random_linear_system(
    rng: &mut CorpusRng,
    p: u32,
    vars: usize,
    equations: usize,
    max_arity: usize,
) -> Vec<LinearEquation> {
    let names: Vec<String> = (0..vars).map(|i| format!("x{i}")).collect();
    (0..equations)
        .map(|_| {
            let arity = rng.random_range(1..=max_arity.min(vars));
            let mut pool: Vec<usize> = (0..vars).collect();
            pool.shuffle(rng);
            let chosen = &pool[..arity];
            LinearEquation {
                vars: chosen.iter().map(|&i| names[i].clone()).collect(),
                coeffs: (0..arity).map(|_| rng.random_range(1..p)).collect(),
                constant: rng.random_range(0..p),
            }
        })
        .collect()
}

/// Like [`random_linear_system`], but constants are computed from a random
/// planted assignment, so the system is satisfiable.
pub fn planted_linear_system(
    rng: &mut CorpusRng,
    p: u32,
    vars: usize,
    equations: usize,
    max_arity: usize,
) -> Vec<LinearEquation> {
    let plant: Vec<u32> = (0..vars).map(|_| rng.random_range(0..p)).collect();
    let mut eqs = random_linear_system(rng, p, vars, equations, max_arity);
    for e in eqs.iter_mut() {
        let sum: u32 = e
            .vars
            .iter()
            .zip(&e.coeffs)
            .map(|(v, c)| c * plant[v[1..].parse::<usize>().expect("generated name")])
            .sum();
        e.constant = sum % p;
    }
    eqs
}

/// Dense integer system with entries in `lo..=hi`.
pub fn random_int_system(rng: &mut CorpusRng, rows: usize, cols: usize, lo: i64, hi: i64) -> (Vec<Vec<i64>>, Vec<i64>) {
    let m = (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(lo..=hi)).collect())
        .collect();
    let b = (0..rows).map(|_| rng.random_range(lo..=hi)).collect();
    (m, b)
}
