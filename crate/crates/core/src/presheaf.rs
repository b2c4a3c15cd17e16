//! Presheaves over the poset of contexts `S_k(A)`.
//!
//! A [`PresheafFamily`] assigns a set of sections to every context of size at
//! most `k`; it may or may not be closed under restriction or flasque. The
//! local-consistency machinery here is the pair of filters
//! [`up_step`] (forth condition) and [`down_step`] (restriction closure),
//! iterated by [`coflasquify`] to the largest flasque subpresheaf.
//!
//! Storage is one sorted set of value vectors per context, with values
//! aligned to the sorted context. Contexts are indexed in lexicographic
//! order of their sorted element arrays, so `∅` is always context 0.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::exec;
use crate::structures::{check_values, restrict_values, Mode, Section, Structure};

/// All subsets of `{0..n}` of size at most `k`, with precomputed
/// one-element extension and deletion links.
#[derive(Debug)]
pub struct ContextPoset {
    n: usize,
    k: usize,
    contexts: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
    // extend[c][a]: index of c ∪ {a}; c itself when a ∈ c; None when |c| = k
    extend: Vec<Vec<Option<usize>>>,
    // drops[c][i]: index of c minus its i-th element
    drops: Vec<Vec<usize>>,
    maximal: Vec<usize>,
}

impl PartialEq for ContextPoset {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.k == other.k
    }
}

impl Eq for ContextPoset {}

pub(crate) fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

impl ContextPoset {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        let count: u128 = (0..=k.min(n)).map(|r| binomial(n, r)).sum();
        exec::check_budget("contexts", count)?;

        let mut contexts: Vec<Vec<u32>> = Vec::with_capacity(count as usize);
        let mut stack: Vec<u32> = Vec::new();
        fn rec(n: u32, k: usize, start: u32, stack: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            out.push(stack.clone());
            if stack.len() == k {
                return;
            }
            for e in start..n {
                stack.push(e);
                rec(n, k, e + 1, stack, out);
                stack.pop();
            }
        }
        rec(n as u32, k, 0, &mut stack, &mut contexts);
        // pre-order DFS of increasing sequences is already lexicographic
        debug_assert!(contexts.windows(2).all(|w| w[0] < w[1]));

        let index: HashMap<Vec<u32>, usize> = contexts
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        let extend = contexts
            .iter()
            .enumerate()
            .map(|(ci, c)| {
                (0..n as u32)
                    .map(|a| match c.binary_search(&a) {
                        Ok(_) => Some(ci),
                        Err(_) if c.len() == k => None,
                        Err(pos) => {
                            let mut d = c.clone();
                            d.insert(pos, a);
                            Some(index[&d])
                        }
                    })
                    .collect()
            })
            .collect();
        let drops = contexts
            .iter()
            .map(|c| {
                (0..c.len())
                    .map(|i| {
                        let mut d = c.clone();
                        d.remove(i);
                        index[&d]
                    })
                    .collect()
            })
            .collect();
        let top = k.min(n);
        let maximal = contexts
            .iter()
            .enumerate()
            .filter(|(_, c)| c.len() == top)
            .map(|(i, _)| i)
            .collect();
        Ok(Self {
            n,
            k,
            contexts,
            index,
            extend,
            drops,
            maximal,
        })
    }

    pub fn universe_size(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn context(&self, c: usize) -> &[u32] {
        &self.contexts[c]
    }

    pub fn contexts(&self) -> &[Vec<u32>] {
        &self.contexts
    }

    pub fn index_of(&self, context: &[u32]) -> Option<usize> {
        self.index.get(context).copied()
    }

    /// Index of `context ∪ {a}` (the context itself when `a` is already in it).
    pub fn extend(&self, c: usize, a: u32) -> Option<usize> {
        self.extend[c][a as usize]
    }

    /// Index of the context with its `i`-th element removed.
    pub fn remove_at(&self, c: usize, i: usize) -> usize {
        self.drops[c][i]
    }

    /// `M_k(A)`: the k-element contexts, or the whole universe when `|A| < k`.
    pub fn maximal(&self) -> &[usize] {
        &self.maximal
    }

    pub fn is_maximal(&self, c: usize) -> bool {
        self.contexts[c].len() == self.k.min(self.n)
    }
}

/// A family of sections indexed by the contexts of a [`ContextPoset`].
#[derive(Clone)]
pub struct PresheafFamily {
    source: Arc<Structure>,
    target: Arc<Structure>,
    poset: Arc<ContextPoset>,
    mode: Mode,
    sections: Vec<BTreeSet<Vec<u32>>>,
}

impl PartialEq for PresheafFamily {
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode
            && self.poset == other.poset
            && self.sections == other.sections
            && (Arc::ptr_eq(&self.source, &other.source) || self.source == other.source)
            && (Arc::ptr_eq(&self.target, &other.target) || self.target == other.target)
    }
}

impl Eq for PresheafFamily {}

impl fmt::Debug for PresheafFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (c, set) in self.sections.iter().enumerate() {
            if !set.is_empty() {
                m.entry(&self.poset.contexts[c], set);
            }
        }
        m.finish()
    }
}

/// The presheaf of partial homomorphisms (`hom`) or partial isomorphisms
/// (`iso`) from `a` to `b` over contexts of size at most `k`.
pub fn build_base(a: &Structure, b: &Structure, k: usize, mode: Mode) -> Result<PresheafFamily> {
    build_base_arc(Arc::new(a.clone()), Arc::new(b.clone()), k, mode)
}

pub fn build_base_arc(a: Arc<Structure>, b: Arc<Structure>, k: usize, mode: Mode) -> Result<PresheafFamily> {
    let width = a.vocabulary().width();
    if k < width {
        return Err(Error::WidthTooSmall { k, width });
    }
    if a.vocabulary() != b.vocabulary() {
        return Err(Error::UniverseMismatch("structures have different vocabularies".into()));
    }
    exec::check_budget(
        "base presheaf",
        exec::saturating_pow(a.size(), k).saturating_mul(exec::saturating_pow(b.size(), k)),
    )?;
    let poset = Arc::new(ContextPoset::new(a.size(), k)?);
    let m = b.size() as u32;

    // contexts are grown one element at a time: sections of C are the valid
    // one-point extensions of sections of C minus its largest element
    let mut sections: Vec<BTreeSet<Vec<u32>>> = vec![BTreeSet::new(); poset.len()];
    sections[0].insert(Vec::new());
    let mut by_size: Vec<Vec<usize>> = vec![Vec::new(); k.min(a.size()) + 1];
    for (c, ctx) in poset.contexts.iter().enumerate() {
        by_size[ctx.len()].push(c);
    }
    for level in by_size.iter().skip(1) {
        let computed = exec::map_slice(level, |&c| {
            let ctx = &poset.contexts[c];
            let parent = poset.remove_at(c, ctx.len() - 1);
            let mut out = BTreeSet::new();
            for s in &sections[parent] {
                for v in 0..m {
                    let mut vals = s.clone();
                    vals.push(v);
                    if check_values(&a, &b, ctx, &vals, mode) {
                        out.insert(vals);
                    }
                }
            }
            out
        });
        for (&c, set) in level.iter().zip(computed) {
            sections[c] = set;
        }
    }
    Ok(PresheafFamily {
        source: a,
        target: b,
        poset,
        mode,
        sections,
    })
}

impl PresheafFamily {
    /// A family with no sections anywhere.
    pub fn empty(a: Arc<Structure>, b: Arc<Structure>, poset: Arc<ContextPoset>, mode: Mode) -> Self {
        let sections = vec![BTreeSet::new(); poset.len()];
        Self {
            source: a,
            target: b,
            poset,
            mode,
            sections,
        }
    }

    /// A family holding exactly the given sections, each validated against
    /// `mode`. Nothing is added at `∅` implicitly.
    pub fn from_sections(
        a: &Structure,
        b: &Structure,
        k: usize,
        mode: Mode,
        sections: impl IntoIterator<Item = Section>,
    ) -> Result<Self> {
        let poset = Arc::new(ContextPoset::new(a.size(), k)?);
        let mut fam = Self::empty(Arc::new(a.clone()), Arc::new(b.clone()), poset, mode);
        for s in sections {
            fam.insert(&s)?;
        }
        Ok(fam)
    }

    /// `{h|_C : h in maps, C in S_k(A)}` for total maps `h: A -> B`.
    pub fn from_total_maps(a: &Structure, b: &Structure, k: usize, mode: Mode, maps: &[Vec<u32>]) -> Result<Self> {
        let poset = Arc::new(ContextPoset::new(a.size(), k)?);
        let mut fam = Self::empty(Arc::new(a.clone()), Arc::new(b.clone()), poset, mode);
        for h in maps {
            if h.len() != a.size() {
                return Err(Error::DimensionMismatch(format!(
                    "map of length {} on a universe of size {}",
                    h.len(),
                    a.size()
                )));
            }
            for c in 0..fam.poset.len() {
                let vals: Vec<u32> = fam.poset.contexts[c].iter().map(|&e| h[e as usize]).collect();
                if !check_values(&fam.source, &fam.target, &fam.poset.contexts[c], &vals, mode) {
                    return Err(Error::InvalidParameter(format!(
                        "map {h:?} is not a partial {mode} on {:?}",
                        fam.poset.contexts[c]
                    )));
                }
                fam.sections[c].insert(vals);
            }
        }
        Ok(fam)
    }

    pub(crate) fn with_sections(&self, sections: Vec<BTreeSet<Vec<u32>>>) -> Self {
        debug_assert_eq!(sections.len(), self.poset.len());
        Self {
            source: self.source.clone(),
            target: self.target.clone(),
            poset: self.poset.clone(),
            mode: self.mode,
            sections,
        }
    }

    pub fn cleared(&self) -> Self {
        self.with_sections(vec![BTreeSet::new(); self.poset.len()])
    }

    pub fn source(&self) -> &Arc<Structure> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Structure> {
        &self.target
    }

    pub fn poset(&self) -> &Arc<ContextPoset> {
        &self.poset
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn k(&self) -> usize {
        self.poset.k
    }

    pub fn sections(&self, c: usize) -> &BTreeSet<Vec<u32>> {
        &self.sections[c]
    }

    pub fn all_sections(&self) -> &[BTreeSet<Vec<u32>>] {
        &self.sections
    }

    pub fn contains(&self, c: usize, values: &[u32]) -> bool {
        self.sections[c].contains(values)
    }

    pub fn contains_section(&self, s: &Section) -> bool {
        self.poset
            .index_of(s.context())
            .is_some_and(|c| self.sections[c].contains(s.values()))
    }

    pub fn section(&self, c: usize, values: &[u32]) -> Section {
        Section::new(self.poset.contexts[c].clone(), values.to_vec()).expect("contexts are sorted")
    }

    /// Adds a section after validating it.
    pub fn insert(&mut self, s: &Section) -> Result<bool> {
        let c = self.poset.index_of(s.context()).ok_or_else(|| {
            Error::InvalidParameter(format!("{:?} is not a context of size <= {}", s.context(), self.poset.k))
        })?;
        if s.values().iter().any(|&v| v as usize >= self.target.size())
            || !check_values(&self.source, &self.target, s.context(), s.values(), self.mode)
        {
            return Err(Error::InvalidParameter(format!(
                "{:?} -> {:?} is not a partial {}",
                s.context(),
                s.values(),
                self.mode
            )));
        }
        Ok(self.sections[c].insert(s.values().to_vec()))
    }

    pub fn remove(&mut self, s: &Section) -> bool {
        match self.poset.index_of(s.context()) {
            Some(c) => self.sections[c].remove(s.values()),
            None => false,
        }
    }

    /// `|S| = Σ_C |S(C)|`.
    pub fn total_sections(&self) -> usize {
        self.sections.iter().map(BTreeSet::len).sum()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.sections.iter().map(BTreeSet::len).collect()
    }

    /// True when no context carries a section.
    pub fn is_empty(&self) -> bool {
        self.sections.iter().all(BTreeSet::is_empty)
    }

    pub fn is_subfamily_of(&self, other: &Self) -> bool {
        self.poset == other.poset && self.sections.iter().zip(&other.sections).all(|(x, y)| x.is_subset(y))
    }

    /// Pointwise union; both families must live on the same poset.
    pub fn union(&self, other: &Self) -> Self {
        debug_assert!(self.poset == other.poset);
        self.with_sections(
            self.sections
                .iter()
                .zip(&other.sections)
                .map(|(x, y)| x.union(y).cloned().collect())
                .collect(),
        )
    }

    /// Iterates `(context index, values)` in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Vec<u32>)> + '_ {
        self.sections
            .iter()
            .enumerate()
            .flat_map(|(c, set)| set.iter().map(move |v| (c, v)))
    }

    /// Keeps the sections accepted by `keep`, evaluated against `self`.
    pub fn filter<F>(&self, keep: F) -> Self
    where
        F: Fn(usize, &[u32]) -> bool + Sync + Send,
    {
        let sections = exec::map_range(self.poset.len(), |c| {
            self.sections[c]
                .iter()
                .filter(|v| keep(c, v))
                .cloned()
                .collect()
        });
        self.with_sections(sections)
    }

    /// Order-independent fingerprint of the section sets.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.poset.n.hash(&mut h);
        self.poset.k.hash(&mut h);
        self.sections.hash(&mut h);
        h.finish()
    }

    /// Dump document: contexts (as JSON-encoded element-name arrays) mapped to
    /// their value arrays, plus `k`, `mode` and the producing round count.
    pub fn to_dump_json(&self, rounds: usize) -> Value {
        let mut map = Map::new();
        for (c, set) in self.sections.iter().enumerate() {
            let names: Vec<&str> = self.poset.contexts[c].iter().map(|&e| self.source.name(e)).collect();
            let key = serde_json::to_string(&names).expect("strings serialize");
            let rows: Vec<Value> = set
                .iter()
                .map(|vals| Value::from(vals.iter().map(|&v| self.target.name(v)).collect::<Vec<_>>()))
                .collect();
            map.insert(key, Value::Array(rows));
        }
        json!({
            "k": self.poset.k,
            "mode": self.mode.to_string(),
            "rounds": rounds,
            "total_sections": self.total_sections(),
            "sections": map,
        })
    }
}

/// Values of a section at `d = c ∪ {a}` with `a` removed; `pos` is the index
/// of `a` within `d`.
fn without(vals: &[u32], pos: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(vals.len() - 1);
    out.extend_from_slice(&vals[..pos]);
    out.extend_from_slice(&vals[pos + 1..]);
    out
}

/// Restrictions of `S(c ∪ {a})` to `c`, for every `a ∉ c`. Empty when `|c| = k`.
fn extension_projections(f: &PresheafFamily, c: usize) -> Vec<HashSet<Vec<u32>>> {
    let poset = &f.poset;
    let ctx = &poset.contexts[c];
    if ctx.len() >= poset.k {
        return Vec::new();
    }
    (0..poset.n as u32)
        .filter(|a| ctx.binary_search(a).is_err())
        .map(|a| {
            let d = poset.extend(c, a).expect("|c| < k");
            let pos = poset.contexts[d].binary_search(&a).expect("a ∈ d");
            f.sections[d].iter().map(|v| without(v, pos)).collect()
        })
        .collect()
}

/// `S↑`: drops every section (at contexts of size < k) lacking, for some
/// element `a`, an extension in `S(C ∪ {a})`.
pub fn up_step(f: &PresheafFamily) -> PresheafFamily {
    let sections = exec::map_range(f.poset.len(), |c| {
        if f.poset.contexts[c].len() >= f.poset.k || f.sections[c].is_empty() {
            return f.sections[c].clone();
        }
        let projections = extension_projections(f, c);
        f.sections[c]
            .iter()
            .filter(|s| projections.iter().all(|p| p.contains(*s)))
            .cloned()
            .collect()
    });
    f.with_sections(sections)
}

/// `S↓`: drops every section one of whose one-point restrictions is absent.
pub fn down_step(f: &PresheafFamily) -> PresheafFamily {
    let sections = exec::map_range(f.poset.len(), |c| {
        let width = f.poset.contexts[c].len();
        f.sections[c]
            .iter()
            .filter(|s| (0..width).all(|i| f.sections[f.poset.remove_at(c, i)].contains(&without(s, i))))
            .cloned()
            .collect()
    });
    f.with_sections(sections)
}

/// Largest flasque, restriction-closed subfamily, with the number of
/// up/down rounds that removed at least one section.
pub fn coflasquify_counted(f: &PresheafFamily) -> (PresheafFamily, usize) {
    let mut current = f.clone();
    let mut count = current.total_sections();
    let mut rounds = 0;
    loop {
        let next = down_step(&up_step(&current));
        let next_count = next.total_sections();
        if next_count == count {
            return (current, rounds);
        }
        rounds += 1;
        current = next;
        count = next_count;
    }
}

/// `S^◇`: the largest flasque subpresheaf below `f`.
pub fn coflasquify(f: &PresheafFamily) -> PresheafFamily {
    coflasquify_counted(f).0
}

/// Every section extends along every one-point enlargement of its context.
pub fn is_flasque(f: &PresheafFamily) -> bool {
    (0..f.poset.len()).all(|c| {
        if f.sections[c].is_empty() {
            return true;
        }
        let projections = extension_projections(f, c);
        f.sections[c].iter().all(|s| projections.iter().all(|p| p.contains(s)))
    })
}

/// Every one-point restriction of every section is present.
pub fn is_closed(f: &PresheafFamily) -> bool {
    (0..f.poset.len()).all(|c| {
        let width = f.poset.contexts[c].len();
        f.sections[c]
            .iter()
            .all(|s| (0..width).all(|i| f.sections[f.poset.remove_at(c, i)].contains(&without(s, i))))
    })
}

pub fn restrict(s: &Section, sub: &[u32]) -> Result<Section> {
    s.restrict(sub)
}

/// A choice of one section per context, compatible with restriction.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct GlobalSection {
    assignment: Vec<Vec<u32>>,
}

impl GlobalSection {
    /// Values at context index `c`.
    pub fn at(&self, c: usize) -> &[u32] {
        &self.assignment[c]
    }

    /// The induced total map `a ↦ h_{a}(a)`.
    pub fn total_map(&self, poset: &ContextPoset) -> Vec<u32> {
        (0..poset.n as u32)
            .map(|a| {
                let c = poset.index_of(&[a]).expect("singletons are contexts");
                self.assignment[c][0]
            })
            .collect()
    }

    /// Restriction to the maximal contexts.
    pub fn compatible_family(&self, poset: &ContextPoset) -> Vec<Vec<u32>> {
        poset.maximal.iter().map(|&c| self.assignment[c].clone()).collect()
    }
}

/// Sorted positions of `inter` within the sorted context `ctx`.
fn positions(ctx: &[u32], inter: &[u32]) -> Vec<usize> {
    inter.iter().map(|e| ctx.binary_search(e).expect("subset")).collect()
}

/// Enumerates the k-compatible families over `M_k(A)`: one section per
/// maximal context, agreeing pairwise on intersections.
pub fn compatible_families(f: &PresheafFamily) -> Result<Vec<Vec<Vec<u32>>>> {
    let poset = &f.poset;
    let maxes = &poset.maximal;
    // overlap[i] lists (j, positions in i, positions in j) for j < i
    let overlap: Vec<Vec<(usize, Vec<usize>, Vec<usize>)>> = maxes
        .iter()
        .enumerate()
        .map(|(i, &ci)| {
            (0..i)
                .map(|j| {
                    let cj = maxes[j];
                    let a = &poset.contexts[ci];
                    let b = &poset.contexts[cj];
                    let inter: Vec<u32> = a.iter().filter(|e| b.binary_search(e).is_ok()).copied().collect();
                    (j, positions(a, &inter), positions(b, &inter))
                })
                .collect()
        })
        .collect();
    let options: Vec<Vec<&Vec<u32>>> = maxes.iter().map(|&c| f.sections[c].iter().collect()).collect();

    let budget = exec::budget() as u128;
    let mut visited: u128 = 0;
    let mut out = Vec::new();
    let mut chosen: Vec<&Vec<u32>> = Vec::with_capacity(maxes.len());
    let mut cursor: Vec<usize> = vec![0; maxes.len()];
    let mut depth = 0usize;
    if maxes.is_empty() {
        return Ok(out);
    }
    loop {
        if cursor[depth] >= options[depth].len() {
            if depth == 0 {
                return Ok(out);
            }
            cursor[depth] = 0;
            depth -= 1;
            chosen.pop();
            cursor[depth] += 1;
            continue;
        }
        visited += 1;
        if visited > budget {
            return Err(Error::BudgetExceeded {
                what: "compatible-family search",
                needed: visited,
                budget: budget as u64,
            });
        }
        let cand = options[depth][cursor[depth]];
        let ok = overlap[depth]
            .iter()
            .all(|(j, pi, pj)| pi.iter().zip(pj).all(|(&x, &y)| cand[x] == chosen[*j][y]));
        if !ok {
            cursor[depth] += 1;
            continue;
        }
        if depth + 1 == maxes.len() {
            let mut fam: Vec<Vec<u32>> = chosen.iter().map(|v| (*v).clone()).collect();
            fam.push(cand.clone());
            out.push(fam);
            cursor[depth] += 1;
        } else {
            chosen.push(cand);
            depth += 1;
        }
    }
}

/// Extends a compatible family over `M_k(A)` to every context by
/// restriction. `None` when some restriction is missing from `f`.
pub fn extend_compatible_family(f: &PresheafFamily, family: &[Vec<u32>]) -> Option<GlobalSection> {
    let poset = &f.poset;
    if family.len() != poset.maximal.len() {
        return None;
    }
    let mut assignment = Vec::with_capacity(poset.len());
    for (c, ctx) in poset.contexts.iter().enumerate() {
        let (mi, &m) = poset
            .maximal
            .iter()
            .enumerate()
            .find(|(_, &m)| ctx.iter().all(|e| poset.contexts[m].binary_search(e).is_ok()))?;
        let vals = restrict_values(&poset.contexts[m], &family[mi], ctx)?;
        if !f.sections[c].contains(&vals) {
            return None;
        }
        assignment.push(vals);
    }
    Some(GlobalSection { assignment })
}

/// Global sections of `f`, in lexicographic order of their compatible
/// families.
pub fn global_sections(f: &PresheafFamily) -> Result<Vec<GlobalSection>> {
    Ok(compatible_families(f)?
        .iter()
        .filter_map(|fam| extend_compatible_family(f, fam))
        .collect())
}

/// Total maps induced by the global sections of `f`.
pub fn global_section_maps(f: &PresheafFamily) -> Result<Vec<Vec<u32>>> {
    Ok(global_sections(f)?.iter().map(|g| g.total_map(&f.poset)).collect())
}

/// `T ∘ S (U) = { t ∘ s | s ∈ S(U), t ∈ T(im s) }`.
pub fn compose(s: &PresheafFamily, t: &PresheafFamily) -> Result<PresheafFamily> {
    if s.poset.k != t.poset.k {
        return Err(Error::InvalidParameter(format!("k differs: {} vs {}", s.poset.k, t.poset.k)));
    }
    if !(Arc::ptr_eq(&s.target, &t.source) || *s.target == *t.source) {
        return Err(Error::UniverseMismatch(
            "target of the first strategy is not the source of the second".into(),
        ));
    }
    let mode = if s.mode == Mode::Iso && t.mode == Mode::Iso {
        Mode::Iso
    } else {
        Mode::Hom
    };
    let sections = exec::map_range(s.poset.len(), |c| {
        let mut out = BTreeSet::new();
        for vals in &s.sections[c] {
            let mut image = vals.clone();
            image.sort_unstable();
            image.dedup();
            let d = t.poset.index_of(&image).expect("|im s| <= |U| <= k");
            for tv in &t.sections[d] {
                let composite: Vec<u32> = vals
                    .iter()
                    .map(|v| tv[image.binary_search(v).expect("v ∈ im s")])
                    .collect();
                out.insert(composite);
            }
        }
        out
    });
    Ok(PresheafFamily {
        source: s.source.clone(),
        target: t.target.clone(),
        poset: s.poset.clone(),
        mode,
        sections,
    })
}

/// `S†(D) = { t | t⁻¹ ∈ S(im t) }`, a family over `S_k(B)`.
pub fn dagger(s: &PresheafFamily) -> Result<PresheafFamily> {
    if s.mode != Mode::Iso {
        return Err(Error::ModeMismatch { expected: "iso" });
    }
    let poset = if s.poset.n == s.target.size() {
        s.poset.clone()
    } else {
        Arc::new(ContextPoset::new(s.target.size(), s.poset.k)?)
    };
    let mut sections = vec![BTreeSet::new(); poset.len()];
    for (c, vals) in s.iter() {
        let ctx = &s.poset.contexts[c];
        let mut pairs: Vec<(u32, u32)> = vals.iter().copied().zip(ctx.iter().copied()).collect();
        pairs.sort_unstable();
        let (image, inverse): (Vec<u32>, Vec<u32>) = pairs.into_iter().unzip();
        let d = poset.index_of(&image).expect("partial isomorphisms are injective");
        sections[d].insert(inverse);
    }
    Ok(PresheafFamily {
        source: s.target.clone(),
        target: s.source.clone(),
        poset,
        mode: Mode::Iso,
        sections,
    })
}

/// The identity strategy on `a`: `S(C) = {id_C}`.
pub fn identity_strategy(a: &Structure, k: usize) -> Result<PresheafFamily> {
    let arc = Arc::new(a.clone());
    let poset = Arc::new(ContextPoset::new(a.size(), k)?);
    let sections = poset.contexts.iter().map(|c| BTreeSet::from([c.clone()])).collect();
    Ok(PresheafFamily {
        source: arc.clone(),
        target: arc,
        poset,
        mode: Mode::Iso,
        sections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::{brute_force, clique, cycle, disjoint_union, MapKind};

    fn k2() -> Structure {
        clique(2).unwrap()
    }
    fn k3() -> Structure {
        clique(3).unwrap()
    }
    fn sec(pairs: &[(u32, u32)]) -> Section {
        Section::from_pairs(pairs).unwrap()
    }

    #[test]
    fn poset_shape() {
        let p = ContextPoset::new(4, 2).unwrap();
        assert_eq!(p.len(), 1 + 4 + 6);
        assert_eq!(p.maximal().len(), 6);
        assert_eq!(p.context(0), &[] as &[u32]);
        let small = ContextPoset::new(2, 3).unwrap();
        assert_eq!(small.maximal().len(), 1);
        assert_eq!(small.context(small.maximal()[0]), &[0, 1]);
        assert!(ContextPoset::new(3, 0).is_err());
    }

    #[test]
    fn base_presheaf_counts() {
        let h = build_base(&k3(), &k2(), 2, Mode::Hom).unwrap();
        let p = h.poset().clone();
        for c in 0..p.len() {
            let want = match p.context(c).len() {
                0 => 1,
                1 => 2,
                _ => 2,
            };
            assert_eq!(h.sections(c).len(), want, "context {:?}", p.context(c));
        }
        let h3 = build_base(&k3(), &k2(), 3, Mode::Hom).unwrap();
        let top = h3.poset().index_of(&[0, 1, 2]).unwrap();
        assert!(h3.sections(top).is_empty());

        let i = build_base(&k2(), &k2(), 2, Mode::Iso).unwrap();
        let pair = i.poset().index_of(&[0, 1]).unwrap();
        let got: Vec<_> = i.sections(pair).iter().cloned().collect();
        assert_eq!(got, vec![vec![0, 1], vec![1, 0]]);

        assert!(matches!(
            build_base(&k3(), &k2(), 1, Mode::Hom),
            Err(Error::WidthTooSmall { k: 1, width: 2 })
        ));
        assert!(is_closed(&h));
    }

    #[test]
    fn up_and_down_steps() {
        let h2 = build_base(&k3(), &k2(), 2, Mode::Hom).unwrap();
        assert!(is_flasque(&h2));
        assert_eq!(up_step(&h2), h2);
        assert_eq!(down_step(&up_step(&h2)), h2);

        // the top level of H_3(K3,K2) is empty, so every pair section dies
        let h3 = build_base(&k3(), &k2(), 3, Mode::Hom).unwrap();
        let up = up_step(&h3);
        for c in 0..up.poset().len() {
            if up.poset().context(c).len() == 2 {
                assert!(up.sections(c).is_empty());
            }
        }

        // sections at singletons only, nothing at pairs
        let only_singletons = PresheafFamily::from_sections(
            &k3(),
            &k2(),
            2,
            Mode::Hom,
            [sec(&[(0, 0)]), sec(&[(1, 1)]), sec(&[(2, 0)])],
        )
        .unwrap();
        assert!(!is_flasque(&only_singletons));
        assert!(up_step(&only_singletons).is_empty());

        let missing = PresheafFamily::from_sections(&k3(), &k2(), 2, Mode::Hom, [sec(&[(0, 0), (1, 1)]), sec(&[(1, 1)]), Section::empty()])
            .unwrap();
        let down = down_step(&missing);
        assert!(!down.contains_section(&sec(&[(0, 0), (1, 1)])));
        assert!(down.contains_section(&sec(&[(1, 1)])));
    }

    #[test]
    fn coflasquification_examples() {
        let h2 = build_base(&k3(), &k2(), 2, Mode::Hom).unwrap();
        let (s, rounds) = coflasquify_counted(&h2);
        assert_eq!(s, h2);
        assert_eq!(rounds, 0);
        assert!(!s.is_empty());

        let h3 = build_base(&k3(), &k2(), 3, Mode::Hom).unwrap();
        let (s3, rounds3) = coflasquify_counted(&h3);
        assert!(s3.is_empty());
        assert!(rounds3 <= h3.total_sections());

        let e = h2.cleared();
        assert_eq!(coflasquify(&e), e);
        assert_eq!(coflasquify(&s3), s3);
    }

    #[test]
    fn global_sections_match_oracle() {
        let s = coflasquify(&build_base(&k2(), &k2(), 2, Mode::Hom).unwrap());
        let maps = global_section_maps(&s).unwrap();
        assert_eq!(maps, brute_force(&k2(), &k2(), MapKind::Hom).unwrap());

        let s = coflasquify(&build_base(&k3(), &k2(), 2, Mode::Hom).unwrap());
        assert!(!s.is_empty());
        assert!(global_sections(&s).unwrap().is_empty());
        assert!(global_sections(&s.cleared()).unwrap().is_empty());
    }

    #[test]
    fn compatible_family_round_trip() {
        let c6 = cycle(6).unwrap();
        let s = coflasquify(&build_base(&c6, &k2(), 2, Mode::Hom).unwrap());
        let gs = global_sections(&s).unwrap();
        assert_eq!(gs.len(), 2);
        for g in &gs {
            let fam = g.compatible_family(s.poset());
            assert_eq!(extend_compatible_family(&s, &fam).as_ref(), Some(g));
        }
    }

    #[test]
    fn composition() {
        let h = coflasquify(&build_base(&k3(), &k2(), 2, Mode::Hom).unwrap());
        let id = identity_strategy(&k3(), 2).unwrap();
        let composed = compose(&id, &h).unwrap();
        assert_eq!(composed.all_sections(), h.all_sections());

        let k3k3 = coflasquify(&build_base(&k3(), &k3(), 2, Mode::Hom).unwrap());
        let both = compose(&k3k3, &h).unwrap();
        assert!(!both.is_empty());
        assert!(is_flasque(&both));
        assert!(is_closed(&both));

        assert!(compose(&k3k3, &h.cleared()).unwrap().is_empty());
        assert!(matches!(compose(&h, &k3k3), Err(Error::UniverseMismatch(_))));
    }

    #[test]
    fn dagger_examples() {
        let c6 = cycle(6).unwrap();
        let two_c3 = disjoint_union(&cycle(3).unwrap(), &cycle(3).unwrap()).unwrap();
        let i_ab = build_base(&c6, &two_c3, 2, Mode::Iso).unwrap();
        let i_ba = build_base(&two_c3, &c6, 2, Mode::Iso).unwrap();
        assert_eq!(dagger(&i_ab).unwrap().all_sections(), i_ba.all_sections());

        let s = coflasquify(&i_ab);
        let back = dagger(&dagger(&s).unwrap()).unwrap();
        assert_eq!(back, s);

        let e = s.cleared();
        assert!(dagger(&e).unwrap().is_empty());

        let hom = build_base(&k2(), &k2(), 2, Mode::Hom).unwrap();
        assert!(matches!(dagger(&hom), Err(Error::ModeMismatch { .. })));

        let i_k3_k2 = build_base(&k3(), &k2(), 2, Mode::Iso).unwrap();
        let d = dagger(&i_k3_k2).unwrap();
        assert_eq!(d.poset().universe_size(), 2);
        assert_eq!(d.all_sections(), build_base(&k2(), &k3(), 2, Mode::Iso).unwrap().all_sections());
    }

    #[test]
    fn dump_lists_contexts_by_name() {
        let h = build_base(&k2(), &k2(), 2, Mode::Hom).unwrap();
        let doc = h.to_dump_json(0);
        assert_eq!(doc["k"], 2);
        assert_eq!(doc["mode"], "hom");
        assert_eq!(doc["sections"]["[\"0\",\"1\"]"], json!([["0", "1"], ["1", "0"]]));
        assert_eq!(doc["sections"]["[]"], json!([[]]));
    }
}
