//! Finite relational vocabularies and structures, sections, linear templates,
//! the brute-force homomorphism oracle and fixture generators.
//!
//! Elements are named by strings in documents and re-indexed densely
//! (`u32`, in document order) once parsed. All tuples are stored as ordered
//! index tuples; undirected graphs carry both orientations of each edge.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::exec;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationSymbol {
    pub name: String,
    pub arity: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Vocabulary {
    relations: Vec<RelationSymbol>,
}

impl Vocabulary {
    pub fn new(relations: Vec<RelationSymbol>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for rel in &relations {
            if rel.arity == 0 {
                return Err(Error::InvalidArity {
                    name: rel.name.clone(),
                    arity: 0,
                });
            }
            if !seen.insert(rel.name.as_str()) {
                return Err(Error::DuplicateRelation(rel.name.clone()));
            }
        }
        Ok(Self { relations })
    }

    /// Single binary relation `E`.
    pub fn graph() -> Self {
        Self {
            relations: vec![RelationSymbol {
                name: "E".into(),
                arity: 2,
            }],
        }
    }

    pub fn relations(&self) -> &[RelationSymbol] {
        &self.relations
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r.name == name)
    }

    /// Maximum arity; 1 for the empty vocabulary.
    pub fn width(&self) -> usize {
        self.relations.iter().map(|r| r.arity).max().unwrap_or(1).max(1)
    }
}

/// Whether sections are partial homomorphisms or partial isomorphisms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Hom,
    Iso,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Hom => "hom",
            Mode::Iso => "iso",
        })
    }
}

/// What the brute-force oracle enumerates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Hom,
    Embed,
    Iso,
}

pub type Tuple = Vec<u32>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Structure {
    vocabulary: Vocabulary,
    universe: Vec<String>,
    index: HashMap<String, u32>,
    relations: Vec<BTreeSet<Tuple>>,
}

impl Structure {
    /// Builds a structure from index tuples, validating every invariant.
    pub fn new(
        vocabulary: Vocabulary,
        universe: Vec<String>,
        relations: Vec<BTreeSet<Tuple>>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(universe.len());
        for (i, name) in universe.iter().enumerate() {
            if index.insert(name.clone(), i as u32).is_some() {
                return Err(Error::DuplicateElement {
                    element: name.clone(),
                    location: format!("universe[{i}]"),
                });
            }
        }
        if relations.len() != vocabulary.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} relation interpretations for {} symbols",
                relations.len(),
                vocabulary.len()
            )));
        }
        for (sym, tuples) in vocabulary.relations().iter().zip(&relations) {
            for (j, t) in tuples.iter().enumerate() {
                if t.len() != sym.arity {
                    return Err(Error::ArityMismatch {
                        location: format!("relations.{}[{j}]", sym.name),
                        expected: sym.arity,
                        found: t.len(),
                    });
                }
                if let Some(&bad) = t.iter().find(|&&e| e as usize >= universe.len()) {
                    return Err(Error::UnknownElement {
                        element: format!("#{bad}"),
                        location: format!("relations.{}[{j}]", sym.name),
                    });
                }
            }
        }
        Ok(Self {
            vocabulary,
            universe,
            index,
            relations,
        })
    }

    /// Builds a structure from named tuples.
    pub fn from_named(
        vocabulary: Vocabulary,
        universe: Vec<String>,
        named: &BTreeMap<String, Vec<Vec<String>>>,
    ) -> Result<Self> {
        let index: HashMap<&str, u32> = universe
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i as u32))
            .collect();
        let mut relations = vec![BTreeSet::new(); vocabulary.len()];
        for (name, tuples) in named {
            let r = vocabulary
                .index_of(name)
                .ok_or_else(|| Error::UnknownRelation(name.clone()))?;
            for (j, t) in tuples.iter().enumerate() {
                let mut row = Vec::with_capacity(t.len());
                for e in t {
                    let i = index.get(e.as_str()).ok_or_else(|| Error::UnknownElement {
                        element: e.clone(),
                        location: format!("relations.{name}[{j}]"),
                    })?;
                    row.push(*i);
                }
                relations[r].insert(row);
            }
        }
        Self::new(vocabulary, universe, relations)
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn size(&self) -> usize {
        self.universe.len()
    }

    pub fn universe(&self) -> &[String] {
        &self.universe
    }

    pub fn name(&self, e: u32) -> &str {
        &self.universe[e as usize]
    }

    pub fn element(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn relation(&self, r: usize) -> &BTreeSet<Tuple> {
        &self.relations[r]
    }

    pub fn holds(&self, r: usize, tuple: &[u32]) -> bool {
        self.relations[r].contains(tuple)
    }

    pub fn tuple_count(&self) -> usize {
        self.relations.iter().map(BTreeSet::len).sum()
    }

    /// The substructure induced on `subset`; element order follows `self`.
    pub fn induced_substructure(&self, subset: &BTreeSet<u32>) -> Result<Structure> {
        if let Some(&bad) = subset.iter().find(|&&e| e as usize >= self.size()) {
            return Err(Error::UnknownElement {
                element: format!("#{bad}"),
                location: "subset".into(),
            });
        }
        let remap: HashMap<u32, u32> = subset
            .iter()
            .enumerate()
            .map(|(i, &e)| (e, i as u32))
            .collect();
        let universe = subset.iter().map(|&e| self.universe[e as usize].clone()).collect();
        let relations = self
            .relations
            .iter()
            .map(|tuples| {
                tuples
                    .iter()
                    .filter_map(|t| t.iter().map(|e| remap.get(e).copied()).collect::<Option<Vec<_>>>())
                    .collect()
            })
            .collect();
        Structure::new(self.vocabulary.clone(), universe, relations)
    }

    /// Same as [`Structure::induced_substructure`], with elements by name.
    pub fn induced_by_names(&self, names: &[&str]) -> Result<Structure> {
        let mut subset = BTreeSet::new();
        for n in names {
            subset.insert(self.element(n).ok_or_else(|| Error::UnknownElement {
                element: n.to_string(),
                location: "subset".into(),
            })?);
        }
        self.induced_substructure(&subset)
    }

    /// Canonical JSON document.
    pub fn to_json(&self) -> Value {
        let vocabulary: Vec<Value> = self
            .vocabulary
            .relations()
            .iter()
            .map(|r| json!({"name": r.name, "arity": r.arity}))
            .collect();
        let mut relations = Map::new();
        for (sym, tuples) in self.vocabulary.relations().iter().zip(&self.relations) {
            let rows: Vec<Value> = tuples
                .iter()
                .map(|t| Value::from(t.iter().map(|&e| self.name(e)).collect::<Vec<_>>()))
                .collect();
            relations.insert(sym.name.clone(), Value::Array(rows));
        }
        json!({
            "vocabulary": vocabulary,
            "universe": self.universe,
            "relations": relations,
        })
    }

    pub fn serialize(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("structure documents always serialize")
    }
}

fn malformed(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Malformed {
        location: location.into(),
        message: message.into(),
    }
}

fn parse_value(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| {
        malformed(format!("line {} column {}", e.line(), e.column()), e.to_string())
    })
}

fn structure_from_value(doc: &Value) -> Result<Structure> {
    let obj = doc
        .as_object()
        .ok_or_else(|| malformed("$", "expected an object"))?;
    let vocab_v = obj
        .get("vocabulary")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("$.vocabulary", "expected an array"))?;
    let mut symbols = Vec::with_capacity(vocab_v.len());
    for (i, v) in vocab_v.iter().enumerate() {
        let sym: RelationSymbol = serde_json::from_value(v.clone())
            .map_err(|e| malformed(format!("$.vocabulary[{i}]"), e.to_string()))?;
        symbols.push(sym);
    }
    let vocabulary = Vocabulary::new(symbols)?;

    let universe_v = obj
        .get("universe")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("$.universe", "expected an array"))?;
    let mut universe = Vec::with_capacity(universe_v.len());
    for (i, v) in universe_v.iter().enumerate() {
        let name = v
            .as_str()
            .ok_or_else(|| malformed(format!("$.universe[{i}]"), "expected a string"))?;
        if universe.iter().any(|u: &String| u == name) {
            return Err(Error::DuplicateElement {
                element: name.into(),
                location: format!("$.universe[{i}]"),
            });
        }
        universe.push(name.to_string());
    }
    let index: HashMap<&str, u32> = universe
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i as u32))
        .collect();

    let mut relations = vec![BTreeSet::new(); vocabulary.len()];
    if let Some(rel_v) = obj.get("relations") {
        let rel_obj = rel_v
            .as_object()
            .ok_or_else(|| malformed("$.relations", "expected an object"))?;
        for (name, tuples_v) in rel_obj {
            let r = vocabulary
                .index_of(name)
                .ok_or_else(|| Error::UnknownRelation(name.clone()))?;
            let arity = vocabulary.relations()[r].arity;
            let tuples = tuples_v
                .as_array()
                .ok_or_else(|| malformed(format!("$.relations.{name}"), "expected an array"))?;
            for (j, t) in tuples.iter().enumerate() {
                let loc = format!("$.relations.{name}[{j}]");
                let items = t
                    .as_array()
                    .ok_or_else(|| malformed(loc.clone(), "expected an array"))?;
                if items.len() != arity {
                    return Err(Error::ArityMismatch {
                        location: loc,
                        expected: arity,
                        found: items.len(),
                    });
                }
                let mut row = Vec::with_capacity(arity);
                for item in items {
                    let e = item
                        .as_str()
                        .ok_or_else(|| malformed(loc.clone(), "expected element names"))?;
                    let idx = index.get(e).ok_or_else(|| Error::UnknownElement {
                        element: e.into(),
                        location: loc.clone(),
                    })?;
                    row.push(*idx);
                }
                relations[r].insert(row);
            }
        }
    }
    Structure::new(vocabulary, universe, relations)
}

/// Parses the JSON structure format.
pub fn parse_structure(text: &str) -> Result<Structure> {
    structure_from_value(&parse_value(text)?)
}

/// A partial map from a context of A (sorted, distinct) into B.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Section {
    context: Vec<u32>,
    values: Vec<u32>,
}

impl Section {
    pub fn new(context: Vec<u32>, values: Vec<u32>) -> Result<Self> {
        if context.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "context of size {} with {} values",
                context.len(),
                values.len()
            )));
        }
        if context.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "context {context:?} is not sorted and distinct"
            )));
        }
        Ok(Self { context, values })
    }

    /// From `(element, value)` pairs in any order.
    pub fn from_pairs(pairs: &[(u32, u32)]) -> Result<Self> {
        let mut sorted = pairs.to_vec();
        sorted.sort_unstable();
        let (context, values) = sorted.into_iter().unzip();
        Self::new(context, values)
    }

    pub fn empty() -> Self {
        Self {
            context: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn context(&self) -> &[u32] {
        &self.context
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn get(&self, a: u32) -> Option<u32> {
        self.context
            .binary_search(&a)
            .ok()
            .map(|i| self.values[i])
    }

    pub fn restrict(&self, sub: &[u32]) -> Result<Section> {
        let values = restrict_values(&self.context, &self.values, sub).ok_or_else(|| {
            Error::NotASubset {
                sub: sub.to_vec(),
                context: self.context.clone(),
            }
        })?;
        Ok(Section {
            context: sub.to_vec(),
            values,
        })
    }
}

/// Values of the restriction of `(context, values)` to the sorted `sub`, or
/// `None` when `sub` is not contained in `context`.
pub fn restrict_values(context: &[u32], values: &[u32], sub: &[u32]) -> Option<Vec<u32>> {
    let mut out = Vec::with_capacity(sub.len());
    let mut i = 0;
    for &e in sub {
        while i < context.len() && context[i] < e {
            i += 1;
        }
        if i == context.len() || context[i] != e {
            return None;
        }
        out.push(values[i]);
    }
    Some(out)
}

/// Does the partial map `context -> values` respect `mode`?
///
/// `hom`: every tuple of A inside the context maps into B.
/// `iso`: additionally injective, and tuples of images lie in B only when
/// the preimage tuple lies in A.
pub fn check_values(a: &Structure, b: &Structure, context: &[u32], values: &[u32], mode: Mode) -> bool {
    let lookup = |e: u32| context.binary_search(&e).ok().map(|i| values[i]);
    match mode {
        Mode::Hom => {
            for r in 0..a.vocabulary.len() {
                for t in a.relation(r) {
                    let image: Option<Vec<u32>> = t.iter().map(|&e| lookup(e)).collect();
                    if let Some(image) = image {
                        if !b.holds(r, &image) {
                            return false;
                        }
                    }
                }
            }
            true
        }
        Mode::Iso => {
            let mut seen: Vec<u32> = values.to_vec();
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return false;
            }
            let n = context.len();
            for (r, sym) in a.vocabulary.relations().iter().enumerate() {
                if n == 0 {
                    break;
                }
                let mut pos = vec![0usize; sym.arity];
                let mut pre = vec![0u32; sym.arity];
                let mut img = vec![0u32; sym.arity];
                loop {
                    for (j, &p) in pos.iter().enumerate() {
                        pre[j] = context[p];
                        img[j] = values[p];
                    }
                    if a.holds(r, &pre) != b.holds(r, &img) {
                        return false;
                    }
                    let mut j = 0;
                    while j < pos.len() {
                        pos[j] += 1;
                        if pos[j] < n {
                            break;
                        }
                        pos[j] = 0;
                        j += 1;
                    }
                    if j == pos.len() {
                        break;
                    }
                }
            }
            true
        }
    }
}

pub fn check_section(a: &Structure, b: &Structure, s: &Section, mode: Mode) -> bool {
    debug_assert!(s.context.iter().all(|&e| (e as usize) < a.size()));
    debug_assert!(s.values.iter().all(|&e| (e as usize) < b.size()));
    check_values(a, b, &s.context, &s.values, mode)
}

/// Enumerates every total map `A -> B` (as value vectors indexed by A's
/// elements) of the given kind, in lexicographic order.
///
/// Exhaustive on purpose: this is the oracle the deciders are checked
/// against, so it does no pruning.
pub fn brute_force(a: &Structure, b: &Structure, kind: MapKind) -> Result<Vec<Vec<u32>>> {
    brute_force_within(a, b, kind, exec::budget())
}

/// [`brute_force`] with an explicit candidate budget.
pub fn brute_force_within(a: &Structure, b: &Structure, kind: MapKind, budget: u64) -> Result<Vec<Vec<u32>>> {
    let n = a.size();
    let m = b.size();
    let candidates = match kind {
        MapKind::Hom => exec::saturating_pow(m, n),
        MapKind::Embed | MapKind::Iso => (0..n).fold(1u128, |acc, i| acc.saturating_mul(m.saturating_sub(i) as u128)),
    };
    exec::check_budget_within("brute-force maps", candidates, budget)?;
    if kind == MapKind::Iso && n != m {
        return Ok(Vec::new());
    }
    if n == 0 {
        return Ok(vec![Vec::new()]);
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let context: Vec<u32> = (0..n as u32).collect();
    let mode = match kind {
        MapKind::Hom => Mode::Hom,
        MapKind::Embed | MapKind::Iso => Mode::Iso,
    };
    if kind != MapKind::Hom {
        let chunks = exec::map_range(m, |first| {
            let mut found = Vec::new();
            let mut map = vec![first as u32];
            let mut used = vec![false; m];
            used[first] = true;
            injective_extend(a, b, &context, &mut map, &mut used, &mut found);
            found
        });
        return Ok(chunks.into_iter().flatten().collect());
    }
    let chunks = exec::map_range(m, |first| {
        let mut found = Vec::new();
        let mut map = vec![0u32; n];
        map[0] = first as u32;
        loop {
            if check_values(a, b, &context, &map, mode) {
                found.push(map.clone());
            }
            // odometer over positions 1..n, last position fastest
            let mut j = n - 1;
            loop {
                if j == 0 {
                    return found;
                }
                map[j] += 1;
                if (map[j] as usize) < m {
                    break;
                }
                map[j] = 0;
                j -= 1;
            }
        }
    });
    Ok(chunks.into_iter().flatten().collect())
}

// Every injective completion of `map`, checked only once total.
fn injective_extend(
    a: &Structure,
    b: &Structure,
    context: &[u32],
    map: &mut Vec<u32>,
    used: &mut [bool],
    found: &mut Vec<Vec<u32>>,
) {
    if map.len() == context.len() {
        if check_values(a, b, context, map, Mode::Iso) {
            found.push(map.clone());
        }
        return;
    }
    for v in 0..used.len() {
        if !used[v] {
            used[v] = true;
            map.push(v as u32);
            injective_extend(a, b, context, map, used, found);
            map.pop();
            used[v] = false;
        }
    }
}

fn graph_structure(universe: Vec<String>, edges: impl IntoIterator<Item = (u32, u32)>) -> Structure {
    let mut tuples = BTreeSet::new();
    for (u, v) in edges {
        tuples.insert(vec![u, v]);
        tuples.insert(vec![v, u]);
    }
    Structure::new(Vocabulary::graph(), universe, vec![tuples]).expect("generated graph is valid")
}

fn numbered(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Undirected simple graph on `0..n` with symmetric edge relation `E`.
pub fn graph(n: usize, edges: &[(u32, u32)]) -> Result<Structure> {
    if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u as usize >= n || v as usize >= n) {
        return Err(Error::InvalidParameter(format!("edge ({u},{v}) outside 0..{n}")));
    }
    Ok(graph_structure(numbered(n), edges.iter().copied()))
}

pub fn clique(n: usize) -> Result<Structure> {
    if n == 0 {
        return Err(Error::InvalidParameter("clique size must be at least 1".into()));
    }
    let n32 = n as u32;
    Ok(graph_structure(
        numbered(n),
        (0..n32).flat_map(|u| (u + 1..n32).map(move |v| (u, v))),
    ))
}

/// Cycle on `n` vertices; `n = 1` is a loop and `n = 2` a single edge.
pub fn cycle(n: usize) -> Result<Structure> {
    if n == 0 {
        return Err(Error::InvalidParameter("cycle length must be at least 1".into()));
    }
    let n32 = n as u32;
    Ok(graph_structure(numbered(n), (0..n32).map(|i| (i, (i + 1) % n32))))
}

pub fn path(n: usize) -> Result<Structure> {
    if n == 0 {
        return Err(Error::InvalidParameter("path length must be at least 1".into()));
    }
    let n32 = n as u32;
    Ok(graph_structure(numbered(n), (1..n32).map(|i| (i - 1, i))))
}

/// Disjoint union; elements are renamed `0.x` (left) and `1.x` (right).
pub fn disjoint_union(s: &Structure, t: &Structure) -> Result<Structure> {
    if s.vocabulary != t.vocabulary {
        return Err(Error::InvalidParameter(
            "disjoint union needs a common vocabulary".into(),
        ));
    }
    let offset = s.size() as u32;
    let universe = s
        .universe
        .iter()
        .map(|n| format!("0.{n}"))
        .chain(t.universe.iter().map(|n| format!("1.{n}")))
        .collect();
    let relations = s
        .relations
        .iter()
        .zip(&t.relations)
        .map(|(x, y)| {
            x.iter()
                .cloned()
                .chain(y.iter().map(|tu| tu.iter().map(|e| e + offset).collect()))
                .collect()
        })
        .collect();
    Structure::new(s.vocabulary.clone(), universe, relations)
}

pub fn is_prime(p: u64) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

/// One affine relation `sum coeffs[i] * x_i = constant (mod p)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinearRelation {
    pub name: String,
    pub coeffs: Vec<u32>,
    pub constant: u32,
}

/// A template whose universe is `Z_p` (elements named `"0"`..`"p-1"`) and
/// whose relations are affine equations over it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearTemplate {
    modulus: u32,
    relations: Vec<LinearRelation>,
}

impl LinearTemplate {
    pub fn new(modulus: u32, relations: Vec<LinearRelation>) -> Result<Self> {
        if !is_prime(modulus as u64) {
            return Err(Error::NotPrime(modulus as u64));
        }
        let mut seen = BTreeSet::new();
        for rel in &relations {
            if rel.coeffs.is_empty() {
                return Err(Error::InvalidArity {
                    name: rel.name.clone(),
                    arity: 0,
                });
            }
            if rel.coeffs.iter().any(|&c| c >= modulus) || rel.constant >= modulus {
                return Err(Error::InvalidParameter(format!(
                    "relation `{}` has coefficients outside Z_{modulus}",
                    rel.name
                )));
            }
            if !seen.insert(rel.name.clone()) {
                return Err(Error::DuplicateRelation(rel.name.clone()));
            }
        }
        Ok(Self { modulus, relations })
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn relations(&self) -> &[LinearRelation] {
        &self.relations
    }

    pub fn relation(&self, name: &str) -> Option<&LinearRelation> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::new(
            self.relations
                .iter()
                .map(|r| RelationSymbol {
                    name: r.name.clone(),
                    arity: r.coeffs.len(),
                })
                .collect(),
        )
        .expect("template relations were validated")
    }

    /// The structure on `Z_p` interpreting each relation as its solution set.
    pub fn template_structure(&self) -> Structure {
        let p = self.modulus;
        let relations = self
            .relations
            .iter()
            .map(|rel| {
                let n = rel.coeffs.len();
                let mut out = BTreeSet::new();
                let mut r = vec![0u32; n];
                loop {
                    let sum: u64 = rel
                        .coeffs
                        .iter()
                        .zip(&r)
                        .map(|(&a, &x)| a as u64 * x as u64)
                        .sum();
                    if sum % p as u64 == rel.constant as u64 {
                        out.insert(r.clone());
                    }
                    let mut j = n;
                    loop {
                        if j == 0 {
                            return out;
                        }
                        j -= 1;
                        r[j] += 1;
                        if r[j] < p {
                            break;
                        }
                        r[j] = 0;
                    }
                }
            })
            .collect();
        Structure::new(self.vocabulary(), numbered(p as usize), relations)
            .expect("template structure is valid")
    }

    /// JSON document: the template structure plus `modulus` and `linear`.
    pub fn to_json(&self) -> Value {
        let mut doc = self.template_structure().to_json();
        let mut linear = Map::new();
        for rel in &self.relations {
            linear.insert(
                rel.name.clone(),
                json!({"coeffs": rel.coeffs, "const": rel.constant}),
            );
        }
        let obj = doc.as_object_mut().expect("structure documents are objects");
        obj.insert("modulus".into(), json!(self.modulus));
        obj.insert("linear".into(), Value::Object(linear));
        doc
    }
}

/// Canonical relation name for the equation `coeffs . x = constant`.
pub fn linear_relation_name(coeffs: &[u32], constant: u32) -> String {
    let cs: Vec<String> = coeffs.iter().map(u32::to_string).collect();
    format!("E({};{constant})", cs.join(","))
}

/// Parses a linear template document. Relations listed under `relations`
/// must coincide with the solution sets implied by `linear`; omitted ones
/// are filled in.
pub fn parse_linear_template(text: &str) -> Result<LinearTemplate> {
    let doc = parse_value(text)?;
    let obj = doc
        .as_object()
        .ok_or_else(|| malformed("$", "expected an object"))?;
    let modulus = obj
        .get("modulus")
        .and_then(Value::as_u64)
        .ok_or_else(|| malformed("$.modulus", "expected a positive integer"))?;
    let linear = obj
        .get("linear")
        .and_then(Value::as_object)
        .ok_or_else(|| malformed("$.linear", "expected an object"))?;
    let vocab_v = obj
        .get("vocabulary")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("$.vocabulary", "expected an array"))?;
    let mut relations = Vec::new();
    for (i, v) in vocab_v.iter().enumerate() {
        let sym: RelationSymbol = serde_json::from_value(v.clone())
            .map_err(|e| malformed(format!("$.vocabulary[{i}]"), e.to_string()))?;
        let eq = linear
            .get(&sym.name)
            .ok_or_else(|| malformed(format!("$.linear.{}", sym.name), "missing equation"))?;
        let loc = format!("$.linear.{}", sym.name);
        let coeffs: Vec<u32> = eq
            .get("coeffs")
            .and_then(Value::as_array)
            .ok_or_else(|| malformed(loc.clone(), "expected `coeffs` array"))?
            .iter()
            .map(|c| c.as_u64().map(|c| c as u32))
            .collect::<Option<_>>()
            .ok_or_else(|| malformed(loc.clone(), "coefficients must be non-negative integers"))?;
        let constant = eq
            .get("const")
            .and_then(Value::as_u64)
            .ok_or_else(|| malformed(loc.clone(), "expected `const`"))? as u32;
        if coeffs.len() != sym.arity {
            return Err(Error::ArityMismatch {
                location: loc,
                expected: sym.arity,
                found: coeffs.len(),
            });
        }
        relations.push(LinearRelation {
            name: sym.name,
            coeffs,
            constant,
        });
    }
    if let Some(extra) = linear.keys().find(|k| !relations.iter().any(|r| &r.name == *k)) {
        return Err(Error::UnknownRelation(extra.clone()));
    }
    let template = LinearTemplate::new(modulus as u32, relations)?;

    let expected = template.template_structure();
    if let Some(u) = obj.get("universe") {
        let names: Option<Vec<&str>> = u.as_array().and_then(|a| a.iter().map(Value::as_str).collect());
        let names = names.ok_or_else(|| malformed("$.universe", "expected an array of strings"))?;
        if names.iter().map(|s| s.to_string()).collect::<Vec<_>>() != expected.universe {
            return Err(malformed(
                "$.universe",
                format!("linear template universe must be \"0\"..\"{}\" in order", modulus - 1),
            ));
        }
    }
    if obj.contains_key("relations") {
        let mut filled = doc.clone();
        let fobj = filled.as_object_mut().expect("checked above");
        fobj.insert("universe".into(), json!(expected.universe));
        let given = structure_from_value(&filled)?;
        let rels = obj["relations"].as_object().expect("parsed above");
        for (r, sym) in expected.vocabulary.relations().iter().enumerate() {
            if rels.contains_key(&sym.name) && given.relation(r) != expected.relation(r) {
                return Err(malformed(
                    format!("$.relations.{}", sym.name),
                    "tuples disagree with the declared equation",
                ));
            }
        }
    }
    Ok(template)
}

/// An equation of a linear instance, over named variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearEquation {
    pub vars: Vec<String>,
    pub coeffs: Vec<u32>,
    pub constant: u32,
}

impl LinearEquation {
    pub fn new(vars: &[&str], coeffs: &[u32], constant: u32) -> Self {
        Self {
            vars: vars.iter().map(|s| s.to_string()).collect(),
            coeffs: coeffs.to_vec(),
            constant,
        }
    }
}

/// Encodes a system of equations over `Z_p` as an instance structure plus
/// the matching template: one relation per distinct (coefficients, constant)
/// shape, one tuple per equation. Variables appear in first-use order.
pub fn linear_instance(p: u32, equations: &[LinearEquation]) -> Result<(Structure, LinearTemplate)> {
    if !is_prime(p as u64) {
        return Err(Error::NotPrime(p as u64));
    }
    let mut universe: Vec<String> = Vec::new();
    let mut rels: Vec<LinearRelation> = Vec::new();
    let mut named: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
    for (i, eq) in equations.iter().enumerate() {
        if eq.vars.is_empty() || eq.vars.len() != eq.coeffs.len() {
            return Err(Error::InvalidParameter(format!(
                "equation {i}: {} variables, {} coefficients",
                eq.vars.len(),
                eq.coeffs.len()
            )));
        }
        let distinct: BTreeSet<&String> = eq.vars.iter().collect();
        if distinct.len() != eq.vars.len() {
            return Err(Error::InvalidParameter(format!("equation {i}: repeated variable")));
        }
        if eq.coeffs.iter().any(|&c| c >= p) || eq.constant >= p {
            return Err(Error::InvalidParameter(format!(
                "equation {i}: coefficients must be reduced mod {p}"
            )));
        }
        for v in &eq.vars {
            if !universe.contains(v) {
                universe.push(v.clone());
            }
        }
        let name = linear_relation_name(&eq.coeffs, eq.constant);
        if !rels.iter().any(|r| r.name == name) {
            rels.push(LinearRelation {
                name: name.clone(),
                coeffs: eq.coeffs.clone(),
                constant: eq.constant,
            });
        }
        named.entry(name).or_default().push(eq.vars.clone());
    }
    let template = LinearTemplate::new(p, rels)?;
    let instance = Structure::from_named(template.vocabulary(), universe, &named)?;
    Ok((instance, template))
}

/// Fixture kinds understood by [`generate`].
#[derive(Clone, Debug)]
pub enum GenerateKind {
    Clique(usize),
    Cycle(usize),
    Path(usize),
    DisjointUnion(Box<Structure>, Box<Structure>),
    LinearInstance(u32, Vec<LinearEquation>),
}

/// Builds a fixture. Linear instances discard the template; use
/// [`linear_instance`] to keep it.
pub fn generate(kind: GenerateKind) -> Result<Structure> {
    match kind {
        GenerateKind::Clique(n) => clique(n),
        GenerateKind::Cycle(n) => cycle(n),
        GenerateKind::Path(n) => path(n),
        GenerateKind::DisjointUnion(s, t) => disjoint_union(&s, &t),
        GenerateKind::LinearInstance(p, eqs) => linear_instance(p, &eqs).map(|(a, _)| a),
    }
}
