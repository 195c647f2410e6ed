#![allow(dead_code)]

use cpdcert::{Matrix, Rational};
use num_traits::{One, Zero};
use rand::Rng;

pub fn exact(rows: &[&[i64]]) -> Matrix<Rational> {
    Matrix::from_i64_rows(rows).unwrap()
}

pub fn q(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

pub fn ints(v: &[i64]) -> Vec<Rational> {
    v.iter().map(|&x| q(x)).collect()
}

/// The 6x7, 6x7, 4x7 triple whose third factor is unique although the
/// decomposition is not.
pub fn w5_triple() -> (Matrix<Rational>, Matrix<Rational>, Matrix<Rational>) {
    let a = exact(&[
        &[1, 1, 0, 0, 0, 0, 0],
        &[1, 0, 1, 0, 0, 0, 0],
        &[1, 0, 0, 1, 0, 0, 0],
        &[1, 0, 0, 0, 1, 0, 0],
        &[0, 0, 0, 0, 0, 1, 0],
        &[0, 0, 0, 0, 0, 0, 1],
    ]);
    let b = exact(&[
        &[0, 1, 0, 0, 0, 0, 0],
        &[0, 0, 1, 0, 0, 0, 0],
        &[1, 0, 0, 1, 0, 0, 0],
        &[1, 0, 0, 0, 1, 0, 0],
        &[1, 0, 0, 0, 0, 1, 0],
        &[1, 0, 0, 0, 0, 0, 1],
    ]);
    let c = exact(&[
        &[1, 0, 0, 1, 0, 0, 0],
        &[0, 1, 0, 0, 1, 0, 0],
        &[0, 0, 1, 0, 0, 1, 0],
        &[1, 0, 0, 0, 0, 0, 1],
    ]);
    (a, b, c)
}

/// The 2x4 triple for which W2 holds and W1 fails.
pub fn w2_triple() -> (Matrix<Rational>, Matrix<Rational>, Matrix<Rational>) {
    (
        exact(&[&[1, 0, 0, 1], &[0, 1, 0, 1]]),
        exact(&[&[1, 0, 1, 1], &[0, 1, 1, 2]]),
        exact(&[&[0, 0, 1, 0], &[1, 1, 0, 1]]),
    )
}

/// Integer matrix with entries drawn uniformly from `lo..=hi`.
pub fn random_int_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, lo: i64, hi: i64) -> Matrix<Rational> {
    Matrix::from_fn(rows, cols, |_, _| q(rng.random_range(lo..=hi)))
}

/// Determinant by cofactor expansion along the first row.
pub fn cofactor_det(m: &[Vec<Rational>]) -> Rational {
    let n = m.len();
    if n == 0 {
        return Rational::one();
    }
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc = Rational::zero();
    for j in 0..n {
        if m[0][j].is_zero() {
            continue;
        }
        let minor: Vec<Vec<Rational>> = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| v.clone()).collect())
            .collect();
        let term = m[0][j].clone() * cofactor_det(&minor);
        if j % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

pub fn rows_of(m: &Matrix<Rational>) -> Vec<Vec<Rational>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// All k-subsets of 0..n, lexicographic, by recursion.
pub fn naive_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            go(v + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Compound matrix from cofactor determinants of every minor.
pub fn naive_compound(m: &Matrix<Rational>, k: usize) -> Vec<Vec<Rational>> {
    let rows = naive_subsets(m.rows(), k);
    let cols = naive_subsets(m.cols(), k);
    rows.iter()
        .map(|rs| {
            cols.iter()
                .map(|cs| {
                    let sub: Vec<Vec<Rational>> = rs
                        .iter()
                        .map(|&i| cs.iter().map(|&j| m.get(i, j).clone()).collect())
                        .collect();
                    cofactor_det(&sub)
                })
                .collect()
        })
        .collect()
}

/// Rank by plain Gaussian elimination over the rationals.
#[allow(clippy::needless_range_loop)]
pub fn naive_rank(m: &[Vec<Rational>]) -> usize {
    let mut a: Vec<Vec<Rational>> = m.to_vec();
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&r| !a[r][c].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        for r in 0..rows {
            if r != rank && !a[r][c].is_zero() {
                let f = a[r][c].clone() / a[rank][c].clone();
                for j in c..cols {
                    let v = a[rank][j].clone() * f.clone();
                    a[r][j] -= v;
                }
            }
        }
        rank += 1;
    }
    rank
}

pub fn columns_rank(m: &Matrix<Rational>, cols: &[usize]) -> usize {
    let sub: Vec<Vec<Rational>> = (0..m.rows())
        .map(|i| cols.iter().map(|&j| m.get(i, j).clone()).collect())
        .collect();
    naive_rank(&sub)
}

/// k-rank by testing every column subset of every size.
pub fn brute_k_rank(m: &Matrix<Rational>) -> usize {
    let r = m.cols();
    let mut k = 0;
    for size in 1..=r {
        if naive_subsets(r, size).iter().all(|s| columns_rank(m, s) == size) {
            k = size;
        } else {
            break;
        }
    }
    k
}

/// Tensor entries by a triple loop over the definition.
pub fn naive_tensor(a: &Matrix<Rational>, b: &Matrix<Rational>, c: &Matrix<Rational>) -> Vec<Rational> {
    let mut out = Vec::new();
    for i in 0..a.rows() {
        for j in 0..b.rows() {
            for k in 0..c.rows() {
                let mut s = Rational::zero();
                for r in 0..a.cols() {
                    s += a.get(i, r).clone() * b.get(j, r).clone() * c.get(k, r).clone();
                }
                out.push(s);
            }
        }
    }
    out
}

/// Every permutation of 0..n.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in all_permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Is `y` a nonzero multiple of `x`? Returns the multiplier.
pub fn multiple_of(x: &[Rational], y: &[Rational]) -> Option<Rational> {
    let p = x.iter().position(|v| !v.is_zero())?;
    let l = y[p].clone() / x[p].clone();
    if l.is_zero() {
        return None;
    }
    x.iter().zip(y).all(|(a, b)| a.clone() * l.clone() == *b).then_some(l)
}

/// Exhaustive search for a permutation and scalings with product one
/// mapping triple 1 onto triple 2.
pub fn exhaustive_equivalent(f1: [&Matrix<Rational>; 3], f2: [&Matrix<Rational>; 3]) -> bool {
    let r = f1[0].cols();
    all_permutations(r).into_iter().any(|perm| {
        (0..r).all(|j| {
            let p = perm[j];
            let mut prod = Rational::one();
            for (m1, m2) in f1.iter().zip(f2.iter()) {
                match multiple_of(&m1.column(p), &m2.column(j)) {
                    Some(l) => prod *= l,
                    None => return false,
                }
            }
            prod.is_one()
        })
    })
}

/// Proptest strategy for integer matrices of a fixed shape.
pub fn int_matrix(rows: usize, cols: usize, lo: i64, hi: i64) -> impl proptest::strategy::Strategy<Value = Matrix<Rational>> {
    use proptest::prelude::*;
    proptest::collection::vec(lo..=hi, rows * cols).prop_map(move |v| {
        Matrix::new(rows, cols, v.into_iter().map(q).collect()).unwrap()
    })
}

/// Proptest strategy for integer matrices with shapes in the given ranges.
pub fn any_int_matrix(
    rows: std::ops::RangeInclusive<usize>,
    cols: std::ops::RangeInclusive<usize>,
    lo: i64,
    hi: i64,
) -> impl proptest::strategy::Strategy<Value = Matrix<Rational>> {
    use proptest::prelude::*;
    (rows, cols).prop_flat_map(move |(r, c)| int_matrix(r, c, lo, hi))
}
