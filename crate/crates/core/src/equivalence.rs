//! Logical equivalence of structures through partial-isomorphism strategies.
//!
//! All deciders start from `I_k(A, B)` and shrink it to a greatest fixpoint:
//!
//! | relation              | operator                                          |
//! |-----------------------|---------------------------------------------------|
//! | existential preorder  | `S ↦ S^◇`                                          |
//! | k-variable equivalence| `S ↦ (((S^◇)†)^◇)†`                                 |
//! | counting equivalence  | `S ↦ (S^#)^◇`, `#` the bijection (cotest) filter   |
//! | cohomological         | counting fixpoint of `S^{ch†ch†}`                  |
//!
//! [`wl_oracle`] is an independent colour-refinement check used to validate
//! the counting decider at `k = 2`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cohomology::cohomological_reduction;
use crate::error::{Error, Result};
use crate::fixpoint::{greatest_fixpoint, Coflasquify, FixpointReport, FnOperator};
use crate::presheaf::{build_base_arc, coflasquify, dagger, PresheafFamily};
use crate::structures::{Mode, Structure};

/// Which equivalence to decide.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Logic {
    El,
    Lk,
    Ck,
    Z,
}

fn iso_base(a: &Structure, b: &Structure, k: usize) -> Result<PresheafFamily> {
    build_base_arc(Arc::new(a.clone()), Arc::new(b.clone()), k, Mode::Iso)
}

/// `A ⇛ B` in existential k-variable logic: `I_k^◇ ≠ ∅`.
pub fn el_preorder(a: &Structure, b: &Structure, k: usize) -> Result<bool> {
    Ok(!coflasquify(&iso_base(a, b, k)?).is_empty())
}

/// One lk round: coflasquify on the A side, then on the B side (or the
/// reverse).
fn lk_round(s: &PresheafFamily, b_side_first: bool) -> Result<PresheafFamily> {
    if b_side_first {
        Ok(coflasquify(&dagger(&coflasquify(&dagger(s)?))?))
    } else {
        dagger(&coflasquify(&dagger(&coflasquify(s))?))
    }
}

/// Greatest `S ⊆ base` with `S` and `S†` both flasque.
pub fn lk_fixpoint_from(base: &PresheafFamily, b_side_first: bool) -> Result<FixpointReport> {
    let op = FnOperator::new(
        if b_side_first { "lk (B side first)" } else { "lk" },
        move |s: &PresheafFamily| lk_round(s, b_side_first),
    );
    greatest_fixpoint(base, &op)
}

/// `A ≡^{L^k} B`.
pub fn lk_equiv(a: &Structure, b: &Structure, k: usize) -> Result<bool> {
    Ok(!lk_fixpoint_from(&iso_base(a, b, k)?, false)?.result.is_empty())
}

/// A bipartite graph between `0..left` and `0..right`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteGraph {
    right: usize,
    adj: Vec<Vec<u32>>,
}

impl BipartiteGraph {
    pub fn new(left: usize, right: usize) -> Self {
        Self {
            right,
            adj: vec![Vec::new(); left],
        }
    }

    pub fn add_edge(&mut self, a: u32, b: u32) {
        assert!((b as usize) < self.right, "right vertex out of range");
        let row = &mut self.adj[a as usize];
        if let Err(pos) = row.binary_search(&b) {
            row.insert(pos, b);
        }
    }

    pub fn left(&self) -> usize {
        self.adj.len()
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(a, bs)| bs.iter().map(move |&b| (a as u32, b)))
    }

    /// Maximum matching by augmenting paths, as `left vertex -> right vertex`.
    pub fn maximum_matching(&self) -> Vec<Option<u32>> {
        let mut match_right: Vec<Option<u32>> = vec![None; self.right];
        let mut match_left: Vec<Option<u32>> = vec![None; self.left()];
        for a in 0..self.left() {
            let mut seen = vec![false; self.right];
            self.augment(a, &mut seen, &mut match_left, &mut match_right);
        }
        match_left
    }

    fn augment(
        &self,
        a: usize,
        seen: &mut [bool],
        match_left: &mut [Option<u32>],
        match_right: &mut [Option<u32>],
    ) -> bool {
        for &b in &self.adj[a] {
            if seen[b as usize] {
                continue;
            }
            seen[b as usize] = true;
            let free = match match_right[b as usize] {
                None => true,
                Some(other) => self.augment(other as usize, seen, match_left, match_right),
            };
            if free {
                match_right[b as usize] = Some(a as u32);
                match_left[a] = Some(b);
                return true;
            }
        }
        false
    }

    /// A perfect matching as a bijection `left -> right`, when one exists.
    pub fn perfect_matching(&self) -> Option<Vec<u32>> {
        if self.left() != self.right {
            return None;
        }
        self.maximum_matching().into_iter().collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "left": self.left(),
            "right": self.right,
            "edges": self.edges().map(|(a, b)| [a, b]).collect::<Vec<_>>(),
        })
    }
}

/// Edges `(a, b)` such that `s` extends to a section of `S(C ∪ {a})` sending
/// `a` to `b`.
pub fn cotest_graph(f: &PresheafFamily, c: usize, s: &[u32]) -> BipartiteGraph {
    let poset = f.poset();
    let ctx = poset.context(c);
    let mut g = BipartiteGraph::new(f.source().size(), f.target().size());
    for a in 0..poset.universe_size() as u32 {
        match ctx.binary_search(&a) {
            Ok(i) => g.add_edge(a, s[i]),
            Err(pos) => {
                let Some(d) = poset.extend(c, a) else { continue };
                for t in f.sections(d) {
                    if t[..pos] == s[..pos] && t[pos + 1..] == s[pos..] {
                        g.add_edge(a, t[pos]);
                    }
                }
            }
        }
    }
    g
}

/// The bijection condition for `s ∈ S(C)`, `|C| < k`.
pub fn cotest(f: &PresheafFamily, c: usize, s: &[u32]) -> bool {
    f.source().size() == f.target().size() && cotest_graph(f, c, s).perfect_matching().is_some()
}

/// `S^#`: drops sections at contexts below size `k` that fail the cotest.
pub fn cotest_filter(f: &PresheafFamily) -> PresheafFamily {
    let poset = f.poset().clone();
    let k = poset.k();
    f.filter(|c, s| poset.context(c).len() >= k || cotest(f, c, s))
}

/// Greatest fixpoint of `S ↦ (S^#)^◇` below `base^◇`.
pub fn ck_fixpoint_from(base: &PresheafFamily) -> Result<FixpointReport> {
    let op = FnOperator::new("cotest ; coflasquify", |s: &PresheafFamily| Ok(coflasquify(&cotest_filter(s))));
    greatest_fixpoint(&coflasquify(base), &op)
}

/// `A ≡^{C^k} B`.
pub fn ck_equiv(a: &Structure, b: &Structure, k: usize) -> Result<bool> {
    Ok(!ck_fixpoint_from(&iso_base(a, b, k)?)?.result.is_empty())
}

/// `S^{ch†ch†}`.
pub fn sym_cohomological_reduction(f: &PresheafFamily) -> Result<PresheafFamily> {
    let once = cohomological_reduction(f)?;
    let there = dagger(&once)?;
    let twice = cohomological_reduction(&there)?;
    dagger(&twice)
}

/// Greatest fixpoint of alternating counting fixpoints and symmetrised
/// cohomological reduction.
pub fn z_fixpoint_from(base: &PresheafFamily) -> Result<FixpointReport> {
    let start = ck_fixpoint_from(base)?.result;
    let op = FnOperator::new("sym-reduction ; counting fixpoint", |s: &PresheafFamily| {
        Ok(ck_fixpoint_from(&sym_cohomological_reduction(s)?)?.result)
    });
    greatest_fixpoint(&start, &op)
}

/// `A ≡_Z B`.
pub fn z_equiv(a: &Structure, b: &Structure, k: usize) -> Result<bool> {
    Ok(!z_fixpoint_from(&iso_base(a, b, k)?)?.result.is_empty())
}

/// The fixpoint behind each relation, starting from `I_k(A, B)`.
pub fn equivalence_fixpoint(a: &Structure, b: &Structure, k: usize, logic: Logic) -> Result<FixpointReport> {
    let base = iso_base(a, b, k)?;
    match logic {
        Logic::El => greatest_fixpoint(&base, &Coflasquify),
        Logic::Lk => lk_fixpoint_from(&base, false),
        Logic::Ck => ck_fixpoint_from(&base),
        Logic::Z => z_fixpoint_from(&base),
    }
}

/// Stable colours of one structure after joint refinement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coloring {
    pub colors: Vec<usize>,
    pub rounds: usize,
}

impl Coloring {
    /// Colour histogram.
    pub fn histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for &c in &self.colors {
            *h.entry(c).or_default() += 1;
        }
        h
    }
}

fn require_binary(s: &Structure) -> Result<()> {
    match s.vocabulary().relations().iter().find(|r| r.arity > 2) {
        Some(r) => Err(Error::NonBinaryVocabulary(r.name.clone())),
        None => Ok(()),
    }
}

/// Atomic type of the pair `(x, y)`: for every relation, which of the
/// tuples over `{x, y}` it contains.
fn atomic_type(s: &Structure, x: u32, y: u32) -> Vec<bool> {
    let mut out = Vec::new();
    for (r, sym) in s.vocabulary().relations().iter().enumerate() {
        match sym.arity {
            1 => {
                out.push(s.holds(r, &[x]));
                out.push(s.holds(r, &[y]));
            }
            _ => {
                out.push(s.holds(r, &[x, x]));
                out.push(s.holds(r, &[x, y]));
                out.push(s.holds(r, &[y, x]));
                out.push(s.holds(r, &[y, y]));
            }
        }
    }
    out
}

/// Colour refinement run jointly on `A ⊎ B`.
pub fn color_refinement(a: &Structure, b: &Structure) -> Result<(Coloring, Coloring)> {
    require_binary(a)?;
    require_binary(b)?;
    if a.vocabulary() != b.vocabulary() {
        return Err(Error::UniverseMismatch("structures have different vocabularies".into()));
    }
    let parts = [a, b];
    let elements: Vec<(usize, u32)> = parts
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.size() as u32).map(move |x| (i, x)))
        .collect();

    let canon = |sigs: Vec<Vec<u64>>| -> Vec<usize> {
        let mut sorted = sigs.clone();
        sorted.sort();
        sorted.dedup();
        sigs.iter().map(|s| sorted.binary_search(s).expect("present")).collect()
    };
    // type ids shared across both structures
    let mut type_ids: BTreeMap<Vec<bool>, u64> = BTreeMap::new();
    let mut type_of = |s: &Structure, x: u32, y: u32| -> u64 {
        let t = atomic_type(s, x, y);
        let next = type_ids.len() as u64;
        *type_ids.entry(t).or_insert(next)
    };
    let loops: Vec<u64> = elements.iter().map(|&(i, x)| type_of(parts[i], x, x)).collect();
    let pair_types: Vec<Vec<(u32, u64)>> = elements
        .iter()
        .map(|&(i, x)| {
            (0..parts[i].size() as u32)
                .filter(|&y| y != x)
                .map(|y| (y, type_of(parts[i], x, y)))
                .collect()
        })
        .collect();
    let offset = [0usize, a.size()];

    let mut colors = canon(loops.iter().map(|&t| vec![t]).collect());
    let mut classes = colors.iter().collect::<std::collections::BTreeSet<_>>().len();
    let mut rounds = 0;
    loop {
        let sigs: Vec<Vec<u64>> = elements
            .iter()
            .enumerate()
            .map(|(idx, &(i, _))| {
                let mut neigh: Vec<(u64, u64)> = pair_types[idx]
                    .iter()
                    .map(|&(y, t)| (t, colors[offset[i] + y as usize] as u64))
                    .collect();
                neigh.sort_unstable();
                let mut sig = vec![colors[idx] as u64];
                for (t, c) in neigh {
                    sig.push(t);
                    sig.push(c);
                }
                sig
            })
            .collect();
        let next = canon(sigs);
        let next_classes = next.iter().collect::<std::collections::BTreeSet<_>>().len();
        rounds += 1;
        colors = next;
        if next_classes == classes {
            break;
        }
        classes = next_classes;
    }
    let split = a.size();
    Ok((
        Coloring {
            colors: colors[..split].to_vec(),
            rounds,
        },
        Coloring {
            colors: colors[split..].to_vec(),
            rounds,
        },
    ))
}

/// 1-dimensional Weisfeiler-Leman equivalence.
pub fn wl_oracle(a: &Structure, b: &Structure) -> Result<bool> {
    let (ca, cb) = color_refinement(a, b)?;
    Ok(ca.histogram() == cb.histogram())
}
