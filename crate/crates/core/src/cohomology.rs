//! The Z-compatible extension test (Ztest), cohomological reduction, and
//! the deciders built on it.
//!
//! A section `s ∈ S(C₀)` at a maximal context passes the Ztest when there is
//! a family `α_C ∈ Z[S(C)]`, one per maximal context, whose marginals agree
//! on every pairwise overlap and with `α_{C₀} = 1·s`. [`build_ztest_system`]
//! writes this out as an integer linear system, one variable per (maximal
//! context, section) pair.
//!
//! [`ZtestOracle`] answers every Ztest of a restriction-closed family at
//! once. Marginals compose, and any two k-sets are joined by a chain of
//! single-element swaps that keeps their intersection, so for closed
//! families it suffices to impose agreement across (k-1)-element overlaps.
//! The oracle computes the integer kernel of that smaller system once, and
//! per maximal context tests `e_s` against the projected kernel lattice.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exec;
use crate::fixpoint::{greatest_fixpoint, DeflationaryOperator, FixpointReport, FnOperator};
use crate::presheaf::{build_base_arc, coflasquify, is_closed, PresheafFamily};
use crate::structures::{LinearTemplate, Mode, Structure};
use crate::zlin::{integer_kernel, solve_integer, solve_mod_p, Lattice, SparseIntMatrix};

/// The integer system of a single Ztest.
#[derive(Clone, Debug)]
pub struct ZtestSystem {
    /// Column `j` is the coefficient of `(context index, section values)`.
    pub columns: Vec<(usize, Vec<u32>)>,
    pub matrix: SparseIntMatrix,
    pub rhs: Vec<BigInt>,
    pub anchor: (usize, Vec<u32>),
    pub compatibility_rows: usize,
}

impl ZtestSystem {
    /// Sidecar for a matrix dump: column index to (context, section) by name.
    pub fn index_json(&self, f: &PresheafFamily) -> Value {
        let poset = f.poset();
        let cols: Vec<Value> = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, (c, vals))| {
                json!({
                    "column": j + 1,
                    "context": poset.context(*c).iter().map(|&e| f.source().name(e)).collect::<Vec<_>>(),
                    "section": vals.iter().map(|&v| f.target().name(v)).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "rows": self.matrix.rows(),
            "compatibility_rows": self.compatibility_rows,
            "columns": cols,
        })
    }
}

fn check_anchor(f: &PresheafFamily, c0: usize, s: &[u32]) -> Result<()> {
    let poset = f.poset();
    if c0 >= poset.len() || !poset.is_maximal(c0) {
        return Err(Error::NotMaximal(poset.contexts().get(c0).cloned().unwrap_or_default()));
    }
    if !f.contains(c0, s) {
        return Err(Error::SectionNotPresent {
            context: poset.context(c0).to_vec(),
            values: s.to_vec(),
        });
    }
    Ok(())
}

/// Positions, within the sorted context `ctx`, of the elements of `sub`.
fn positions_in(ctx: &[u32], sub: &[u32]) -> Vec<usize> {
    sub.iter().map(|e| ctx.binary_search(e).expect("subset")).collect()
}

/// The system whose integer solvability is the Ztest of `s ∈ S(C₀)`.
pub fn build_ztest_system(f: &PresheafFamily, c0: usize, s: &[u32]) -> Result<ZtestSystem> {
    check_anchor(f, c0, s)?;
    let poset = f.poset();
    let maxes = poset.maximal();
    let mut columns = Vec::new();
    let mut offsets = Vec::with_capacity(maxes.len() + 1);
    for &c in maxes {
        offsets.push(columns.len());
        columns.extend(f.sections(c).iter().map(|v| (c, v.clone())));
    }
    offsets.push(columns.len());
    let mut matrix = SparseIntMatrix::new(0, columns.len());
    let mut rhs = Vec::new();

    for i in 0..maxes.len() {
        for j in i + 1..maxes.len() {
            let (ci, cj) = (poset.context(maxes[i]), poset.context(maxes[j]));
            let inter: Vec<u32> = ci.iter().filter(|e| cj.binary_search(e).is_ok()).copied().collect();
            let d = poset.index_of(&inter).expect("overlaps are contexts");
            let (pi, pj) = (positions_in(ci, &inter), positions_in(cj, &inter));
            let project = |vals: &Vec<u32>, pos: &[usize]| pos.iter().map(|&p| vals[p]).collect::<Vec<u32>>();
            for r in f.sections(d) {
                let mut row: Vec<(usize, BigInt)> = Vec::new();
                for (t, vals) in f.sections(maxes[i]).iter().enumerate() {
                    if project(vals, &pi) == *r {
                        row.push((offsets[i] + t, BigInt::one()));
                    }
                }
                for (t, vals) in f.sections(maxes[j]).iter().enumerate() {
                    if project(vals, &pj) == *r {
                        row.push((offsets[j] + t, -BigInt::one()));
                    }
                }
                matrix.push_row(row);
                rhs.push(BigInt::zero());
            }
        }
    }
    let compatibility_rows = matrix.rows();
    let k0 = maxes.binary_search(&c0).expect("maximal");
    for (t, vals) in f.sections(c0).iter().enumerate() {
        matrix.push_row([(offsets[k0] + t, BigInt::one())]);
        rhs.push(if vals == s { BigInt::one() } else { BigInt::zero() });
    }
    Ok(ZtestSystem {
        columns,
        matrix,
        rhs,
        anchor: (c0, s.to_vec()),
        compatibility_rows,
    })
}

/// Ztest by solving the full system.
pub fn ztest(f: &PresheafFamily, c0: usize, s: &[u32]) -> Result<bool> {
    let sys = build_ztest_system(f, c0, s)?;
    Ok(solve_integer(&sys.matrix, &sys.rhs)?.is_solvable())
}

/// Ztest verdicts for every section at every maximal context of a
/// restriction-closed family.
#[derive(Clone, Debug)]
pub struct ZtestOracle {
    fingerprint: u64,
    maximal: Vec<usize>,
    verdicts: Vec<Vec<bool>>,
    kernel_rank: usize,
}

impl ZtestOracle {
    pub fn new(f: &PresheafFamily) -> Result<Self> {
        if !is_closed(f) {
            return Err(Error::InvalidParameter(
                "the batched Ztest needs a restriction-closed family".into(),
            ));
        }
        let poset = f.poset();
        let maxes: Vec<usize> = poset.maximal().to_vec();
        let k = poset.k();
        let mut offsets = Vec::with_capacity(maxes.len() + 1);
        let mut nvars = 0;
        for &c in &maxes {
            offsets.push(nvars);
            nvars += f.sections(c).len();
        }
        offsets.push(nvars);
        exec::check_budget("Ztest variables", nvars as u128)?;

        let mut matrix = SparseIntMatrix::new(0, nvars);
        if poset.universe_size() > k {
            let max_pos: HashMap<usize, usize> = maxes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
            // for each maximal context and element position: sections grouped by restriction
            let grouped: Vec<Vec<HashMap<Vec<u32>, Vec<usize>>>> = exec::map_range(maxes.len(), |i| {
                let c = maxes[i];
                (0..k)
                    .map(|p| {
                        let mut g: HashMap<Vec<u32>, Vec<usize>> = HashMap::new();
                        for (t, vals) in f.sections(c).iter().enumerate() {
                            let mut r = vals.clone();
                            r.remove(p);
                            g.entry(r).or_default().push(offsets[i] + t);
                        }
                        g
                    })
                    .collect()
            });
            for d in 0..poset.len() {
                let dctx = poset.context(d);
                if dctx.len() + 1 != k {
                    continue;
                }
                // maximal contexts D ∪ {a}, with the position of a
                let around: Vec<(usize, usize)> = (0..poset.universe_size() as u32)
                    .filter(|a| dctx.binary_search(a).is_err())
                    .map(|a| {
                        let c = poset.extend(d, a).expect("|D| < k");
                        let p = poset.context(c).binary_search(&a).expect("a ∈ c");
                        (max_pos[&c], p)
                    })
                    .collect();
                let Some(&(first, fp)) = around.first() else { continue };
                for &(other, op) in &around[1..] {
                    for r in f.sections(d) {
                        let mut row: Vec<(usize, BigInt)> = Vec::new();
                        if let Some(vars) = grouped[first][fp].get(r) {
                            row.extend(vars.iter().map(|&v| (v, BigInt::one())));
                        }
                        if let Some(vars) = grouped[other][op].get(r) {
                            row.extend(vars.iter().map(|&v| (v, -BigInt::one())));
                        }
                        if !row.is_empty() {
                            matrix.push_row(row);
                        }
                    }
                }
            }
        }

        let kernel = integer_kernel(&matrix);
        let mut owner = vec![0usize; nvars];
        for i in 0..maxes.len() {
            owner[offsets[i]..offsets[i + 1]].fill(i);
        }
        // projected generators per maximal context
        let mut generators: Vec<Vec<Vec<BigInt>>> = vec![Vec::new(); maxes.len()];
        for v in &kernel {
            let mut touched: BTreeSet<usize> = BTreeSet::new();
            for (j, x) in v.iter().enumerate() {
                if !x.is_zero() {
                    touched.insert(owner[j]);
                }
            }
            for i in touched {
                generators[i].push(v[offsets[i]..offsets[i + 1]].to_vec());
            }
        }
        let verdicts = exec::map_range(maxes.len(), |i| {
            let dim = offsets[i + 1] - offsets[i];
            let lattice = Lattice::new(dim, &generators[i]);
            (0..dim)
                .map(|t| {
                    let mut e = vec![BigInt::zero(); dim];
                    e[t] = BigInt::one();
                    lattice.contains(&e)
                })
                .collect()
        });
        Ok(Self {
            fingerprint: f.fingerprint(),
            maximal: maxes,
            verdicts,
            kernel_rank: kernel.len(),
        })
    }

    /// Fingerprint of the family the verdicts belong to.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn kernel_rank(&self) -> usize {
        self.kernel_rank
    }

    /// Verdict for the `t`-th section (in stored order) of maximal context `c`.
    pub fn verdict(&self, c: usize, t: usize) -> Option<bool> {
        let i = self.maximal.binary_search(&c).ok()?;
        self.verdicts[i].get(t).copied()
    }

    pub fn test(&self, f: &PresheafFamily, c: usize, s: &[u32]) -> Result<bool> {
        check_anchor(f, c, s)?;
        let t = f.sections(c).iter().position(|v| v == s).expect("present");
        Ok(self.verdict(c, t).expect("maximal"))
    }
}

/// `S^ch`: keeps the sections at maximal contexts that pass the Ztest.
pub fn cohomological_reduction(f: &PresheafFamily) -> Result<PresheafFamily> {
    let poset = f.poset().clone();
    if is_closed(f) {
        let oracle = ZtestOracle::new(f)?;
        let mut sections = f.all_sections().to_vec();
        for &c in poset.maximal() {
            sections[c] = f
                .sections(c)
                .iter()
                .enumerate()
                .filter(|(t, _)| oracle.verdict(c, *t).expect("maximal"))
                .map(|(_, v)| v.clone())
                .collect();
        }
        return Ok(f.with_sections(sections));
    }
    let verdicts: Vec<Result<Vec<bool>>> = exec::map_slice(poset.maximal(), |&c| {
        f.sections(c).iter().map(|v| ztest(f, c, v)).collect()
    });
    let mut sections = f.all_sections().to_vec();
    for (&c, verdict) in poset.maximal().iter().zip(verdicts) {
        let verdict = verdict?;
        sections[c] = f
            .sections(c)
            .iter()
            .zip(verdict)
            .filter(|(_, keep)| *keep)
            .map(|(v, _)| v.clone())
            .collect();
    }
    Ok(f.with_sections(sections))
}

/// Outcome of the cohomological consistency iteration.
#[derive(Clone, Debug)]
pub struct CohReport {
    pub verdict: bool,
    /// `S̄ = H_k^◇`.
    pub initial: PresheafFamily,
    /// `S^{(1)}` when one-step, the fixpoint `S*` otherwise.
    pub result: PresheafFamily,
    pub report: FixpointReport,
}

/// Decides `A →_Z^k B` (or the one-step relation `A →_Z^{k,1} B`).
pub fn coh_k_consistency(a: &Structure, b: &Structure, k: usize, one_step: bool) -> Result<CohReport> {
    let base = build_base_arc(Arc::new(a.clone()), Arc::new(b.clone()), k, Mode::Hom)?;
    coh_k_consistency_from(&base, one_step)
}

/// Same as [`coh_k_consistency`], starting from a prebuilt base family.
pub fn coh_k_consistency_from(base: &PresheafFamily, one_step: bool) -> Result<CohReport> {
    let initial = coflasquify(base);
    let step = FnOperator::new("cohomological-reduction ; coflasquify", |s: &PresheafFamily| {
        Ok(coflasquify(&cohomological_reduction(s)?))
    });
    let report = if one_step {
        let once = FnOperator::new("one-step", |s: &PresheafFamily| {
            if s == &initial {
                DeflationaryOperator::apply(&step, s)
            } else {
                Ok(s.clone())
            }
        });
        greatest_fixpoint(&initial, &once)?
    } else {
        greatest_fixpoint(&initial, &step)?
    };
    let result = report.result.clone();
    Ok(CohReport {
        verdict: !result.is_empty(),
        initial,
        result,
        report,
    })
}

/// Cohomological strong contextuality: every maximal section fails the Ztest.
pub fn csc_check(f: &PresheafFamily) -> Result<bool> {
    let reduced = cohomological_reduction(f)?;
    Ok(f.poset().maximal().iter().all(|&c| reduced.sections(c).is_empty()))
}

/// `Σ coeffs_i · x_{vars_i} = constant` over `Z_p`. Variables are sorted
/// and distinct, coefficients non-zero, and the leading coefficient is 1
/// (or the equation is `0 = 1`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Equation {
    pub vars: Vec<u32>,
    pub coeffs: Vec<u32>,
    pub constant: u32,
}

fn inverse_mod(a: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    let (mut base, mut exp) = (a % p, p - 2);
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    acc
}

impl Equation {
    /// Canonical form: repeated variables merged, zero terms dropped,
    /// scaled to a monic leading coefficient. `None` for `0 = 0`.
    pub fn normalized(terms: &[(u32, u32)], constant: u32, p: u32) -> Option<Self> {
        let p64 = p as u64;
        let mut merged: std::collections::BTreeMap<u32, u64> = std::collections::BTreeMap::new();
        for &(v, c) in terms {
            *merged.entry(v).or_default() += c as u64;
        }
        let (vars, coeffs): (Vec<u32>, Vec<u64>) = merged
            .into_iter()
            .map(|(v, c)| (v, c % p64))
            .filter(|(_, c)| *c != 0)
            .unzip();
        let constant = constant as u64 % p64;
        if vars.is_empty() {
            return (constant != 0).then(|| Self {
                vars,
                coeffs: Vec::new(),
                constant: 1,
            });
        }
        let inv = inverse_mod(coeffs[0], p64);
        Some(Self {
            vars,
            coeffs: coeffs.iter().map(|c| (c * inv % p64) as u32).collect(),
            constant: (constant * inv % p64) as u32,
        })
    }

    /// Whether the assignment (indexed by variable) satisfies the equation.
    pub fn holds(&self, value: impl Fn(u32) -> u64, p: u32) -> bool {
        let p = p as u64;
        let lhs = self
            .vars
            .iter()
            .zip(&self.coeffs)
            .fold(0u64, |acc, (&v, &c)| (acc + c as u64 * (value(v) % p)) % p);
        lhs == self.constant as u64
    }
}

/// A set of linear equations over `Z_p` in variables `0..variables`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquationTheory {
    pub modulus: u32,
    pub variables: usize,
    pub equations: BTreeSet<Equation>,
}

impl EquationTheory {
    pub fn new(modulus: u32, variables: usize) -> Self {
        Self {
            modulus,
            variables,
            equations: BTreeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.equations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.equations.is_subset(&other.equations)
    }

    /// Equations rendered with element names, e.g. `"1*x + 1*y = 1"`.
    pub fn to_json(&self, a: &Structure) -> Value {
        Value::Array(
            self.equations
                .iter()
                .map(|e| {
                    let lhs: Vec<String> = e
                        .vars
                        .iter()
                        .zip(&e.coeffs)
                        .map(|(&v, c)| format!("{c}*{}", a.name(v)))
                        .collect();
                    let lhs = if lhs.is_empty() { "0".to_string() } else { lhs.join(" + ") };
                    Value::from(format!("{lhs} = {}", e.constant))
                })
                .collect(),
        )
    }
}

/// `T_A`, `T_S`, and the maximal contexts where `S̄` is empty (on which every
/// candidate equation holds vacuously).
#[derive(Clone, Debug)]
pub struct Theories {
    pub instance: EquationTheory,
    pub sections: EquationTheory,
    pub vacuous_contexts: Vec<Vec<u32>>,
}

/// Numeric value of each template element.
fn template_values(t: &LinearTemplate, b: &Structure) -> Result<Vec<u64>> {
    (0..b.size() as u32)
        .map(|v| {
            b.name(v)
                .parse::<u64>()
                .ok()
                .filter(|x| *x < t.modulus() as u64)
                .ok_or_else(|| Error::UniverseMismatch(format!("`{}` is not an element of Z_{}", b.name(v), t.modulus())))
        })
        .collect()
}

/// The instance theory `T_A` (one equation per tuple) and the section theory
/// `T_S` (equations over at most `n` variables of a maximal context that
/// every section of `S̄` there satisfies, unioned over contexts).
pub fn extract_theories(a: &Structure, t: &LinearTemplate, sbar: &PresheafFamily) -> Result<Theories> {
    let p = t.modulus();
    let vocab = a.vocabulary();
    let n = vocab.width();
    let k = sbar.k();
    if k < n {
        return Err(Error::WidthTooSmall { k, width: n });
    }
    let values = template_values(t, sbar.target())?;

    let mut instance = EquationTheory::new(p, a.size());
    for (r, sym) in vocab.relations().iter().enumerate() {
        let rel = t
            .relation(&sym.name)
            .ok_or_else(|| Error::UnknownRelation(sym.name.clone()))?;
        for tuple in a.relation(r) {
            let terms: Vec<(u32, u32)> = tuple.iter().copied().zip(rel.coeffs.iter().copied()).collect();
            if let Some(e) = Equation::normalized(&terms, rel.constant, p) {
                instance.equations.insert(e);
            }
        }
    }

    let poset = sbar.poset().clone();
    let per_context = crate::presheaf::binomial(k, n);
    exec::check_budget(
        "candidate equations",
        exec::saturating_pow(p as usize, n + 1).saturating_mul(per_context),
    )?;
    let found: Vec<(BTreeSet<Equation>, bool)> = exec::map_slice(poset.maximal(), |&c| {
        let ctx = poset.context(c);
        let sections = sbar.sections(c);
        let mut out = BTreeSet::new();
        for cand in candidate_equations(ctx, n, p) {
            let ok = sections.iter().all(|vals| {
                cand.holds(
                    |v| values[vals[ctx.binary_search(&v).expect("v ∈ ctx")] as usize],
                    p,
                )
            });
            if ok {
                out.insert(cand);
            }
        }
        (out, sections.is_empty())
    });
    let mut sections = EquationTheory::new(p, a.size());
    let mut vacuous_contexts = Vec::new();
    for (&c, (eqs, vacuous)) in poset.maximal().iter().zip(found) {
        sections.equations.extend(eqs);
        if vacuous {
            vacuous_contexts.push(poset.context(c).to_vec());
        }
    }
    Ok(Theories {
        instance,
        sections,
        vacuous_contexts,
    })
}

/// Canonical equations over at most `n` variables of `ctx`, plus `0 = 1`.
fn candidate_equations(ctx: &[u32], n: usize, p: u32) -> Vec<Equation> {
    let mut out = vec![Equation {
        vars: Vec::new(),
        coeffs: Vec::new(),
        constant: 1,
    }];
    let mut subset: Vec<usize> = Vec::new();
    fn subsets(len: usize, n: usize, start: usize, cur: &mut Vec<usize>, acc: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            acc.push(cur.clone());
        }
        if cur.len() == n {
            return;
        }
        for i in start..len {
            cur.push(i);
            subsets(len, n, i + 1, cur, acc);
            cur.pop();
        }
    }
    let mut all = Vec::new();
    subsets(ctx.len(), n, 0, &mut subset, &mut all);
    for sub in all {
        let vars: Vec<u32> = sub.iter().map(|&i| ctx[i]).collect();
        // leading coefficient 1, the rest in 1..p
        let tail = sub.len() - 1;
        let mut coeffs = vec![1u32; sub.len()];
        loop {
            for b in 0..p {
                out.push(Equation {
                    vars: vars.clone(),
                    coeffs: coeffs.clone(),
                    constant: b,
                });
            }
            // odometer over coeffs[1..]
            let mut i = tail;
            loop {
                if i == 0 {
                    break;
                }
                if coeffs[i] + 1 < p {
                    coeffs[i] += 1;
                    break;
                }
                coeffs[i] = 1;
                i -= 1;
            }
            if i == 0 {
                break;
            }
        }
    }
    out
}

/// All-versus-Nothing: no assignment satisfies the theory.
pub fn avn_check(theory: &EquationTheory) -> Result<bool> {
    let p = theory.modulus as u64;
    let rows: Vec<Vec<u64>> = theory
        .equations
        .iter()
        .map(|e| {
            let mut row = vec![0u64; theory.variables];
            for (&v, &c) in e.vars.iter().zip(&e.coeffs) {
                row[v as usize] = c as u64;
            }
            row
        })
        .collect();
    let b: Vec<u64> = theory.equations.iter().map(|e| e.constant as u64).collect();
    Ok(!solve_mod_p(&rows, &b, theory.variables, p)?.is_solvable())
}
