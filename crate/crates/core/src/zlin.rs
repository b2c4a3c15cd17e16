//! Exact linear algebra over Z and over prime fields Z_p.
//!
//! Integer solving runs in three stages:
//!
//! 1. sparse elimination on `±1` pivots, which preserves the integer
//!    solution set exactly and removes most of a Ztest system;
//! 2. a fraction-free rational consistency check on what remains;
//! 3. a column Hermite normal form of the residual, followed by forward
//!    substitution with divisibility checks.
//!
//! Every witness is substituted back into the original system before it is
//! returned.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::structures::is_prime;

/// Sparse integer matrix, row-major, no stored zeros.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SparseIntMatrix {
    rows: Vec<BTreeMap<usize, BigInt>>,
    cols: usize,
}

impl SparseIntMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows: vec![BTreeMap::new(); rows],
            cols,
        }
    }

    pub fn from_dense(rows: &[Vec<i64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::new(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged dense matrix");
            for (c, &v) in row.iter().enumerate() {
                m.set(r, c, BigInt::from(v));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(BTreeMap::len).sum()
    }

    /// Appends a row given as `(column, value)` pairs; repeated columns add up.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, BigInt)>) -> usize {
        let mut row: BTreeMap<usize, BigInt> = BTreeMap::new();
        for (c, v) in entries {
            assert!(c < self.cols, "column {c} out of range");
            *row.entry(c).or_default() += v;
        }
        row.retain(|_, v| !v.is_zero());
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn set(&mut self, r: usize, c: usize, v: BigInt) {
        assert!(c < self.cols, "column {c} out of range");
        if v.is_zero() {
            self.rows[r].remove(&c);
        } else {
            self.rows[r].insert(c, v);
        }
    }

    pub fn get(&self, r: usize, c: usize) -> BigInt {
        self.rows[r].get(&c).cloned().unwrap_or_default()
    }

    pub fn row(&self, r: usize) -> &BTreeMap<usize, BigInt> {
        &self.rows[r]
    }

    /// `(row, col, value)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &BigInt)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |(&c, v)| (r, c, v)))
    }

    pub fn to_dense(&self) -> Vec<Vec<BigInt>> {
        self.rows
            .iter()
            .map(|row| {
                let mut out = vec![BigInt::zero(); self.cols];
                for (&c, v) in row {
                    out[c] = v.clone();
                }
                out
            })
            .collect()
    }

    pub fn mul_vec(&self, x: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(x.len(), self.cols);
        self.rows
            .iter()
            .map(|row| row.iter().map(|(&c, v)| v * &x[c]).sum())
            .collect()
    }

    /// MatrixMarket coordinate format, 1-based indices.
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::from("%%MatrixMarket matrix coordinate integer general\n");
        let _ = writeln!(out, "{} {} {}", self.rows(), self.cols, self.nnz());
        for (r, c, v) in self.entries() {
            let _ = writeln!(out, "{} {} {}", r + 1, c + 1, v);
        }
        out
    }
}

pub type DenseMatrix = Vec<Vec<BigInt>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Infeasibility {
    /// No rational solution.
    Rational,
    /// Rational solutions exist, integer ones do not.
    Lattice,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveResult {
    Solvable(Vec<BigInt>),
    Unsolvable(Infeasibility),
}

impl SolveResult {
    pub fn is_solvable(&self) -> bool {
        matches!(self, SolveResult::Solvable(_))
    }

    pub fn witness(&self) -> Option<&[BigInt]> {
        match self {
            SolveResult::Solvable(x) => Some(x),
            SolveResult::Unsolvable(_) => None,
        }
    }
}

/// Column-style Hermite normal form `H = M·U`.
#[derive(Clone, Debug)]
pub struct Hnf {
    pub h: DenseMatrix,
    /// Unimodular, present when requested.
    pub u: Option<DenseMatrix>,
    /// `(row, column)` of each pivot; pivot columns are `0..rank`.
    pub pivots: Vec<(usize, usize)>,
}

impl Hnf {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Solves `H z = b` by forward substitution, non-pivot columns set to 0.
    pub fn forward_solve(&self, b: &[BigInt]) -> Option<Vec<BigInt>> {
        let ncols = self.h.first().map_or_else(|| self.u.as_ref().map_or(0, Vec::len), Vec::len);
        let mut z = vec![BigInt::zero(); ncols];
        let mut next = 0;
        for (i, row) in self.h.iter().enumerate() {
            let determined = next;
            let mut rest = b[i].clone();
            for j in 0..determined {
                if !row[j].is_zero() {
                    rest -= &row[j] * &z[j];
                }
            }
            if next < self.pivots.len() && self.pivots[next].0 == i {
                let p = &row[next];
                let (q, r) = rest.div_rem(p);
                if !r.is_zero() {
                    return None;
                }
                z[next] = q;
                next += 1;
            } else if !rest.is_zero() {
                return None;
            }
        }
        Some(z)
    }
}

fn column_combine(m: &mut DenseMatrix, i: usize, j: usize, coeffs: [&BigInt; 4]) {
    // (col_i, col_j) <- (a col_i + b col_j, c col_i + d col_j)
    let [a, b, c, d] = coeffs;
    for row in m.iter_mut() {
        let (x, y) = (&row[i], &row[j]);
        if x.is_zero() && y.is_zero() {
            continue;
        }
        let nx = a * x + b * y;
        let ny = c * x + d * y;
        row[i] = nx;
        row[j] = ny;
    }
}

fn column_axpy(m: &mut DenseMatrix, dst: usize, src: usize, factor: &BigInt) {
    // col_dst -= factor * col_src
    for row in m.iter_mut() {
        if !row[src].is_zero() {
            let delta = factor * &row[src];
            row[dst] -= delta;
        }
    }
}

fn column_swap(m: &mut DenseMatrix, i: usize, j: usize) {
    for row in m.iter_mut() {
        row.swap(i, j);
    }
}

fn column_negate(m: &mut DenseMatrix, i: usize) {
    for row in m.iter_mut() {
        if !row[i].is_zero() {
            row[i] = -&row[i];
        }
    }
}

/// Column HNF of a dense `rows × ncols` matrix.
pub fn hnf_dense(mut h: DenseMatrix, ncols: usize, track_u: bool) -> Hnf {
    let mut u: Option<DenseMatrix> = track_u.then(|| {
        (0..ncols)
            .map(|r| (0..ncols).map(|c| if r == c { BigInt::one() } else { BigInt::zero() }).collect())
            .collect()
    });
    let mut pivots = Vec::new();
    let mut piv = 0;
    for i in 0..h.len() {
        if piv == ncols {
            break;
        }
        for j in piv + 1..ncols {
            if h[i][j].is_zero() {
                continue;
            }
            if h[i][piv].is_zero() {
                column_swap(&mut h, piv, j);
                if let Some(u) = u.as_mut() {
                    column_swap(u, piv, j);
                }
                continue;
            }
            let a = h[i][piv].clone();
            let b = h[i][j].clone();
            let (q, r) = b.div_rem(&a);
            if r.is_zero() {
                column_axpy(&mut h, j, piv, &q);
                if let Some(u) = u.as_mut() {
                    column_axpy(u, j, piv, &q);
                }
                continue;
            }
            let e = a.extended_gcd(&b);
            let p = &a / &e.gcd;
            let q = -(&b / &e.gcd);
            column_combine(&mut h, piv, j, [&e.x, &e.y, &q, &p]);
            if let Some(u) = u.as_mut() {
                column_combine(u, piv, j, [&e.x, &e.y, &q, &p]);
            }
        }
        if h[i][piv].is_zero() {
            continue;
        }
        if h[i][piv].is_negative() {
            column_negate(&mut h, piv);
            if let Some(u) = u.as_mut() {
                column_negate(u, piv);
            }
        }
        let pivot = h[i][piv].clone();
        for j in 0..piv {
            let q = h[i][j].div_floor(&pivot);
            if !q.is_zero() {
                column_axpy(&mut h, j, piv, &q);
                if let Some(u) = u.as_mut() {
                    column_axpy(u, j, piv, &q);
                }
            }
        }
        pivots.push((i, piv));
        piv += 1;
    }
    Hnf { h, u, pivots }
}

/// `(H, U)` with `H = M·U` in column Hermite normal form.
pub fn hermite_normal_form(m: &SparseIntMatrix) -> (DenseMatrix, DenseMatrix) {
    let hnf = hnf_dense(m.to_dense(), m.cols(), true);
    (hnf.h, hnf.u.expect("tracked"))
}

/// Result of eliminating on `±1` pivots.
struct Elimination {
    ncols: usize,
    /// `(pivot column, pivot value ±1, other entries of the row, rhs)`, in order.
    steps: Vec<(usize, BigInt, Vec<(usize, BigInt)>, BigInt)>,
    residual: Vec<(BTreeMap<usize, BigInt>, BigInt)>,
    eliminated: Vec<bool>,
    inconsistent: bool,
}

impl Elimination {
    fn run(m: &SparseIntMatrix, b: &[BigInt]) -> Self {
        let ncols = m.cols();
        let mut rows: Vec<Option<BTreeMap<usize, BigInt>>> = m.rows.iter().cloned().map(Some).collect();
        let mut rhs: Vec<BigInt> = b.to_vec();
        let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ncols];
        for (r, row) in m.rows.iter().enumerate() {
            for &c in row.keys() {
                col_rows[c].insert(r);
            }
        }
        let mut eliminated = vec![false; ncols];
        let mut steps = Vec::new();
        loop {
            // Markowitz-style choice among unit entries
            let mut best: Option<(usize, usize, usize)> = None;
            for (r, row) in rows.iter().enumerate() {
                let Some(row) = row.as_ref().filter(|row| !row.is_empty()) else { continue };
                let rl = row.len() - 1;
                for (&c, v) in row {
                    if v.magnitude().is_one() {
                        let cost = rl * (col_rows[c].len() - 1);
                        if best.is_none_or(|(_, _, bc)| cost < bc) {
                            best = Some((r, c, cost));
                        }
                    }
                }
                if best.is_some_and(|(_, _, cost)| cost == 0) {
                    break;
                }
            }
            let Some((r, c, _)) = best else { break };
            let prow = rows[r].take().expect("live row");
            let pb = std::mem::take(&mut rhs[r]);
            let pv = prow[&c].clone();
            for &cc in prow.keys() {
                col_rows[cc].remove(&r);
            }
            let targets: Vec<usize> = col_rows[c].iter().copied().collect();
            for i in targets {
                let row = rows[i].as_mut().expect("live row");
                let f = row[&c].clone() * &pv;
                for (&cc, v) in &prow {
                    let entry = row.entry(cc).or_default();
                    *entry -= &f * v;
                    if entry.is_zero() {
                        row.remove(&cc);
                        col_rows[cc].remove(&i);
                    } else {
                        col_rows[cc].insert(i);
                    }
                }
                rhs[i] -= &f * &pb;
            }
            debug_assert!(col_rows[c].is_empty());
            eliminated[c] = true;
            let others: Vec<(usize, BigInt)> = prow.into_iter().filter(|(cc, _)| *cc != c).collect();
            steps.push((c, pv, others, pb));
            // drop emptied rows, remembering inconsistency
            for (i, row) in rows.iter_mut().enumerate() {
                if row.as_ref().is_some_and(BTreeMap::is_empty) && rhs[i].is_zero() {
                    *row = None;
                }
            }
        }
        let mut inconsistent = false;
        let mut residual = Vec::new();
        for (row, b) in rows.into_iter().zip(rhs) {
            if let Some(row) = row {
                if row.is_empty() {
                    if !b.is_zero() {
                        inconsistent = true;
                    }
                } else {
                    residual.push((row, b));
                }
            }
        }
        Self {
            ncols,
            steps,
            residual,
            eliminated,
            inconsistent,
        }
    }

    /// Columns not used as pivots.
    fn free_columns(&self) -> Vec<usize> {
        (0..self.ncols).filter(|&c| !self.eliminated[c]).collect()
    }

    /// Completes an assignment of the free columns; `homogeneous` ignores rhs.
    fn back_substitute(&self, x: &mut [BigInt], homogeneous: bool) {
        for (c, pv, others, b) in self.steps.iter().rev() {
            let mut acc = if homogeneous { BigInt::zero() } else { b.clone() };
            for (cc, v) in others {
                if !x[*cc].is_zero() {
                    acc -= v * &x[*cc];
                }
            }
            x[*c] = acc * pv;
        }
    }
}

/// Exact consistency of `R y = b` over Q, by fraction-free elimination.
fn rationally_consistent(rows: &[(BTreeMap<usize, BigInt>, BigInt)]) -> bool {
    let mut live: Vec<(BTreeMap<usize, BigInt>, BigInt)> = rows.to_vec();
    while let Some((prow, pb)) = live.pop() {
        let Some((&c, pv)) = prow.iter().next() else {
            if !pb.is_zero() {
                return false;
            }
            continue;
        };
        let pv = pv.clone();
        for (row, b) in live.iter_mut() {
            let Some(f) = row.get(&c).cloned() else { continue };
            // row <- pv*row - f*prow, then strip the content
            for v in row.values_mut() {
                *v *= &pv;
            }
            *b *= &pv;
            for (&cc, v) in &prow {
                let e = row.entry(cc).or_default();
                *e -= &f * v;
            }
            *b -= &f * &pb;
            row.retain(|_, v| !v.is_zero());
            let g = row.values().fold(b.abs(), |g, v| g.gcd(v));
            if !g.is_zero() && !g.is_one() {
                for v in row.values_mut() {
                    *v /= &g;
                }
                *b /= &g;
            }
        }
    }
    true
}

fn residual_dense(el: &Elimination, active: &[usize]) -> (DenseMatrix, Vec<BigInt>) {
    let pos: BTreeMap<usize, usize> = active.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut dense = Vec::with_capacity(el.residual.len());
    let mut b = Vec::with_capacity(el.residual.len());
    for (row, rb) in &el.residual {
        let mut out = vec![BigInt::zero(); active.len()];
        for (c, v) in row {
            out[pos[c]] = v.clone();
        }
        dense.push(out);
        b.push(rb.clone());
    }
    (dense, b)
}

fn active_columns(el: &Elimination) -> Vec<usize> {
    let set: BTreeSet<usize> = el.residual.iter().flat_map(|(row, _)| row.keys().copied()).collect();
    set.into_iter().collect()
}

/// Decides `∃ x ∈ Z^cols. M x = b`, returning a witness when one exists.
pub fn solve_integer(m: &SparseIntMatrix, b: &[BigInt]) -> Result<SolveResult> {
    if b.len() != m.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows but right-hand side of length {}",
            m.rows(),
            b.len()
        )));
    }
    let el = Elimination::run(m, b);
    if el.inconsistent || !rationally_consistent(&el.residual) {
        return Ok(SolveResult::Unsolvable(Infeasibility::Rational));
    }
    let active = active_columns(&el);
    let mut x = vec![BigInt::zero(); m.cols()];
    if !active.is_empty() {
        let (dense, rb) = residual_dense(&el, &active);
        let hnf = hnf_dense(dense, active.len(), true);
        let Some(z) = hnf.forward_solve(&rb) else {
            return Ok(SolveResult::Unsolvable(Infeasibility::Lattice));
        };
        let u = hnf.u.as_ref().expect("tracked");
        for (i, &c) in active.iter().enumerate() {
            x[c] = u[i].iter().zip(&z).map(|(a, b)| a * b).sum();
        }
    }
    el.back_substitute(&mut x, false);
    assert_eq!(m.mul_vec(&x), b, "integer witness failed substitution");
    Ok(SolveResult::Solvable(x))
}

/// A basis of the integer kernel `{x ∈ Z^cols | M x = 0}`.
pub fn integer_kernel(m: &SparseIntMatrix) -> Vec<Vec<BigInt>> {
    let zeros = vec![BigInt::zero(); m.rows()];
    let el = Elimination::run(m, &zeros);
    let active = active_columns(&el);
    let active_set: BTreeSet<usize> = active.iter().copied().collect();
    let mut basis = Vec::new();
    for c in el.free_columns() {
        if !active_set.contains(&c) {
            let mut x = vec![BigInt::zero(); m.cols()];
            x[c] = BigInt::one();
            basis.push(x);
        }
    }
    if !active.is_empty() {
        let (dense, _) = residual_dense(&el, &active);
        let hnf = hnf_dense(dense, active.len(), true);
        let u = hnf.u.as_ref().expect("tracked");
        for k in hnf.rank()..active.len() {
            let mut x = vec![BigInt::zero(); m.cols()];
            for (i, &c) in active.iter().enumerate() {
                x[c] = u[i][k].clone();
            }
            basis.push(x);
        }
    }
    for x in basis.iter_mut() {
        el.back_substitute(x, true);
        debug_assert!(m.mul_vec(x).iter().all(Zero::is_zero));
    }
    basis
}

/// The sublattice of `Z^dim` spanned by a set of generators.
#[derive(Clone, Debug)]
pub struct Lattice {
    dim: usize,
    hnf: Hnf,
}

impl Lattice {
    pub fn new(dim: usize, generators: &[Vec<BigInt>]) -> Self {
        // generators become the columns of a dim × n matrix
        let n = generators.len();
        let dense: DenseMatrix = (0..dim)
            .map(|r| generators.iter().map(|g| g[r].clone()).collect())
            .collect();
        Self {
            dim,
            hnf: hnf_dense(dense, n, false),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.hnf.rank()
    }

    pub fn contains(&self, v: &[BigInt]) -> bool {
        assert_eq!(v.len(), self.dim);
        self.hnf.forward_solve(v).is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModSolveResult {
    Solvable(Vec<u64>),
    Unsolvable,
}

impl ModSolveResult {
    pub fn is_solvable(&self) -> bool {
        matches!(self, ModSolveResult::Solvable(_))
    }
}

fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = ((acc as u128 * base as u128) % p as u128) as u64;
        }
        base = ((base as u128 * base as u128) % p as u128) as u64;
        exp >>= 1;
    }
    acc
}

/// Gaussian elimination over `Z_p`; `rows` is dense with `ncols` columns.
pub fn solve_mod_p(rows: &[Vec<u64>], b: &[u64], ncols: usize, p: u64) -> Result<ModSolveResult> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if rows.len() != b.len() || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch("system shape disagrees with right-hand side".into()));
    }
    let mulm = |x: u64, y: u64| ((x as u128 * y as u128) % p as u128) as u64;
    let mut aug: Vec<Vec<u64>> = rows
        .iter()
        .zip(b)
        .map(|(r, &v)| r.iter().chain(std::iter::once(&v)).map(|&x| x % p).collect())
        .collect();
    let mut pivot_cols = Vec::new();
    let mut rank = 0;
    for c in 0..ncols {
        let Some(found) = (rank..aug.len()).find(|&r| aug[r][c] != 0) else { continue };
        aug.swap(rank, found);
        let inv = pow_mod(aug[rank][c], p - 2, p);
        for v in aug[rank].iter_mut() {
            *v = mulm(*v, inv);
        }
        let prow = aug[rank].clone();
        for (r, row) in aug.iter_mut().enumerate() {
            if r != rank && row[c] != 0 {
                let f = row[c];
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v = (*v + p - mulm(f, *pv)) % p;
                }
            }
        }
        pivot_cols.push(c);
        rank += 1;
    }
    if aug[rank..].iter().any(|row| row[ncols] != 0) {
        return Ok(ModSolveResult::Unsolvable);
    }
    let mut x = vec![0u64; ncols];
    for (r, &c) in pivot_cols.iter().enumerate() {
        x[c] = aug[r][ncols];
    }
    for (row, &v) in rows.iter().zip(b) {
        let lhs = row.iter().zip(&x).fold(0u64, |acc, (&a, &xi)| (acc + mulm(a % p, xi)) % p);
        assert_eq!(lhs, v % p, "modular witness failed substitution");
    }
    Ok(ModSolveResult::Solvable(x))
}
