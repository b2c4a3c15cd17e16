//! Independent checks for the integer solver, written against plain
//! rationals and determinants.

use itertools::Itertools;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub fn rank(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| BigRational::from_integer(x.into())).collect())
        .collect();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let piv = m[r][c].clone();
        let prow = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = &row[c] / &piv;
                for (x, y) in row.iter_mut().zip(&prow) {
                    *x -= &f * y;
                }
            }
        }
        r += 1;
    }
    r
}

/// Exact rational solution when the system is consistent and has full
/// column rank.
pub fn unique_rational_solution(m: &[Vec<i64>], b: &[i64]) -> Option<Vec<BigRational>> {
    let n = m.first().map_or(0, Vec::len);
    if rank(m) != n || rank(&augment(m, b)) != n {
        return None;
    }
    let mut a: Vec<Vec<BigRational>> = augment(m, b)
        .iter()
        .map(|r| r.iter().map(|&x| BigRational::from_integer(x.into())).collect())
        .collect();
    let mut row = 0;
    for c in 0..n {
        let p = (row..a.len()).find(|&i| !a[i][c].is_zero())?;
        a.swap(row, p);
        let piv = a[row][c].clone();
        for x in a[row].iter_mut() {
            *x /= &piv;
        }
        let prow = a[row].clone();
        for (i, r) in a.iter_mut().enumerate() {
            if i != row && !r[c].is_zero() {
                let f = r[c].clone();
                for (x, y) in r.iter_mut().zip(&prow) {
                    *x -= &f * y;
                }
            }
        }
        row += 1;
    }
    Some((0..n).map(|c| a[c][n].clone()).collect())
}

pub fn augment(m: &[Vec<i64>], b: &[i64]) -> Vec<Vec<i64>> {
    m.iter()
        .zip(b)
        .map(|(r, &v)| r.iter().copied().chain(std::iter::once(v)).collect())
        .collect()
}

pub fn rationally_feasible(m: &[Vec<i64>], b: &[i64]) -> bool {
    rank(m) == rank(&augment(m, b))
}

/// Determinant by cofactor-free Bareiss elimination.
fn det(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&i| !a[i][k].is_zero()) else { return BigInt::zero() };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * a.last().and_then(|r| r.last()).cloned().unwrap_or_else(BigInt::one)
}

/// gcd of all `r × r` minors.
pub fn determinantal_divisor(m: &[Vec<i64>], r: usize) -> BigInt {
    let cols = m.first().map_or(0, Vec::len);
    let mut g = BigInt::zero();
    for rs in (0..m.len()).combinations(r) {
        for cs in (0..cols).combinations(r) {
            let sub = rs
                .iter()
                .map(|&i| cs.iter().map(|&j| BigInt::from(m[i][j])).collect())
                .collect();
            g = g.gcd(&det(sub));
        }
    }
    g.abs()
}

/// `M x = b` has an integer solution iff the ranks of `M` and `[M | b]`
/// agree and so do their determinantal divisors at that rank.
pub fn integer_solvable(m: &[Vec<i64>], b: &[i64]) -> bool {
    let r = rank(m);
    let aug = augment(m, b);
    r == rank(&aug) && (r == 0 || determinantal_divisor(m, r) == determinantal_divisor(&aug, r))
}

/// Some `x ∈ [-bound, bound]^n` with `M x = b`.
pub fn box_search(m: &[Vec<i64>], b: &[i64], bound: i64) -> Option<Vec<i64>> {
    let n = m.first().map_or(0, Vec::len);
    let mut x = vec![-bound; n];
    loop {
        if m.iter().zip(b).all(|(row, &v)| row.iter().zip(&x).map(|(a, y)| a * y).sum::<i64>() == v) {
            return Some(x);
        }
        let mut i = 0;
        while i < n && x[i] == bound {
            x[i] = -bound;
            i += 1;
        }
        if i == n {
            return None;
        }
        x[i] += 1;
    }
}

pub fn is_integral(v: &[BigRational]) -> bool {
    v.iter().all(|q| q.is_integer())
}
