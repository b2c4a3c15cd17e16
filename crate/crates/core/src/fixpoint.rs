//! Greatest fixpoints of deflationary operators on the lattice of
//! subfamilies of a presheaf family.
//!
//! [`greatest_fixpoint`] iterates `S₀ ⊇ J S₀ ⊇ J² S₀ ⊇ …` and stops at the
//! first repeat. Every round is checked to be shrinking; an operator that
//! adds a section is a hard error naming that section.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::presheaf::{self, PresheafFamily};

/// A shrinking (and, for the lattice-theoretic reading, monotone) operator on
/// presheaf families. Monotonicity is property-tested, not enforced.
pub trait DeflationaryOperator: Sync {
    fn name(&self) -> &str;
    fn apply(&self, f: &PresheafFamily) -> Result<PresheafFamily>;
}

/// Which contexts a local predicate filters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    AllContexts,
    /// Contexts of size `< k` only.
    BelowTop,
    MaximalOnly,
}

/// One trace line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub round: usize,
    pub total_sections: usize,
    pub per_context_counts: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct FixpointReport {
    pub result: PresheafFamily,
    /// Number of operator applications, including the final confirming one.
    pub rounds: usize,
    /// `[|S₀|, |J S₀|, …]`; strictly decreasing until the last, repeated value.
    pub trace: Vec<usize>,
    pub records: Vec<TraceRecord>,
}

impl FixpointReport {
    /// Writes the records as JSON lines.
    pub fn write_trace(&self, out: &mut dyn Write) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut *out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn record(round: usize, f: &PresheafFamily) -> TraceRecord {
    TraceRecord {
        round,
        total_sections: f.total_sections(),
        per_context_counts: f.counts(),
    }
}

/// Verifies `next ⊆ current`, reporting the first new section.
pub fn check_shrinking(operator: &str, current: &PresheafFamily, next: &PresheafFamily) -> Result<()> {
    if current.poset() != next.poset() {
        return Err(Error::UniverseMismatch(format!(
            "operator `{operator}` changed the context poset"
        )));
    }
    for c in 0..current.poset().len() {
        if let Some(v) = next.sections(c).difference(current.sections(c)).next() {
            return Err(Error::NotShrinking {
                operator: operator.to_string(),
                context: current.poset().context(c).to_vec(),
                values: v.clone(),
            });
        }
    }
    Ok(())
}

/// Iterates `j` from `initial` until a family repeats.
pub fn greatest_fixpoint(initial: &PresheafFamily, j: &dyn DeflationaryOperator) -> Result<FixpointReport> {
    let mut current = initial.clone();
    let mut trace = vec![current.total_sections()];
    let mut records = vec![record(0, &current)];
    let mut rounds = 0;
    loop {
        let next = j.apply(&current)?;
        rounds += 1;
        check_shrinking(j.name(), &current, &next)?;
        let total = next.total_sections();
        trace.push(total);
        records.push(record(rounds, &next));
        if total == current.total_sections() {
            return Ok(FixpointReport {
                result: current,
                rounds,
                trace,
                records,
            });
        }
        current = next;
    }
}

/// An operator backed by a closure.
pub struct FnOperator<F> {
    name: String,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&PresheafFamily) -> Result<PresheafFamily> + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self { name: name.into(), f }
    }
}

impl<F> DeflationaryOperator for FnOperator<F>
where
    F: Fn(&PresheafFamily) -> Result<PresheafFamily> + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn apply(&self, f: &PresheafFamily) -> Result<PresheafFamily> {
        (self.f)(f)
    }
}

/// `J_φ(S)(C) = { s ∈ S(C) | φ(S, C, s) }` on in-scope contexts.
pub struct LocalPredicate<P> {
    name: String,
    scope: Scope,
    predicate: P,
}

impl<P> DeflationaryOperator for LocalPredicate<P>
where
    P: Fn(&PresheafFamily, usize, &[u32]) -> bool + Sync + Send,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn apply(&self, f: &PresheafFamily) -> Result<PresheafFamily> {
        let poset = f.poset().clone();
        let top = poset.k();
        Ok(f.filter(|c, s| {
            let in_scope = match self.scope {
                Scope::AllContexts => true,
                Scope::BelowTop => poset.context(c).len() < top,
                Scope::MaximalOnly => poset.is_maximal(c),
            };
            !in_scope || (self.predicate)(f, c, s)
        }))
    }
}

pub fn from_local_predicate<P>(name: impl Into<String>, scope: Scope, predicate: P) -> LocalPredicate<P>
where
    P: Fn(&PresheafFamily, usize, &[u32]) -> bool + Sync + Send,
{
    LocalPredicate {
        name: name.into(),
        scope,
        predicate,
    }
}

/// `S ↦ (S↑)↓`.
pub struct UpDown;

impl DeflationaryOperator for UpDown {
    fn name(&self) -> &str {
        "up-down"
    }

    fn apply(&self, f: &PresheafFamily) -> Result<PresheafFamily> {
        Ok(presheaf::down_step(&presheaf::up_step(f)))
    }
}

/// `S ↦ S^◇`.
pub struct Coflasquify;

impl DeflationaryOperator for Coflasquify {
    fn name(&self) -> &str {
        "coflasquify"
    }

    fn apply(&self, f: &PresheafFamily) -> Result<PresheafFamily> {
        Ok(presheaf::coflasquify(f))
    }
}

/// Applies each operator in turn; a fixpoint of the sequence is a common
/// fixpoint when every part is shrinking.
pub struct Sequence<'a> {
    name: String,
    parts: Vec<&'a dyn DeflationaryOperator>,
}

impl<'a> Sequence<'a> {
    pub fn new(parts: Vec<&'a dyn DeflationaryOperator>) -> Self {
        let name = parts.iter().map(|p| p.name()).collect::<Vec<_>>().join(" ; ");
        Self { name, parts }
    }
}

impl DeflationaryOperator for Sequence<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn apply(&self, f: &PresheafFamily) -> Result<PresheafFamily> {
        let mut current = f.clone();
        for p in &self.parts {
            let next = p.apply(&current)?;
            check_shrinking(p.name(), &current, &next)?;
            current = next;
        }
        Ok(current)
    }
}

/// `φ(S, C, s)`: `s` extends to every one-point enlargement of `C` within `S`.
pub fn has_all_extensions(f: &PresheafFamily, c: usize, s: &[u32]) -> bool {
    let poset = f.poset();
    let ctx = poset.context(c);
    (0..poset.universe_size() as u32)
        .filter(|a| ctx.binary_search(a).is_err())
        .all(|a| match poset.extend(c, a) {
            None => true,
            Some(d) => {
                let pos = poset.context(d).binary_search(&a).expect("a ∈ d");
                f.sections(d).iter().any(|t| {
                    t[..pos] == s[..pos] && t[pos + 1..] == s[pos..]
                })
            }
        })
}
