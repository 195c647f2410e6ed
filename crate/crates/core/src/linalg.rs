//! Dense matrices over two interchangeable scalar fields.
//!
//! [`Rational`] (arbitrary-precision, always reduced) is the exact backend:
//! ranks come from fraction-free Bareiss elimination and never depend on a
//! tolerance. `f64` is the floating-point backend: ranks come from the SVD
//! with the rule `sigma <= tol * sigma_max * max(rows, cols)` counted as zero.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::combinatorics::{capped_binomial, Subsets};
use crate::error::{Error, Result};
use crate::settings::Settings;

/// Exact scalar type.
pub type Rational = BigRational;

/// Which arithmetic a matrix lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Exact,
    Float,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Exact => "exact",
            Backend::Float => "float",
        })
    }
}

/// Scalar field backing a [`Matrix`].
pub trait Field:
    Clone
    + fmt::Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    const BACKEND: Backend;

    fn from_i64(v: i64) -> Self;
    fn from_rational(q: &Rational) -> Self;
    fn to_f64(&self) -> f64;

    /// Zero test relative to a magnitude `scale`. Exact backends ignore
    /// both arguments.
    fn is_negligible(&self, scale: f64, tol: f64) -> bool;

    /// Determinant of a square matrix.
    fn determinant(m: &Matrix<Self>) -> Self;

    fn rank_report(m: &Matrix<Self>, tol: f64) -> RankReport<Self>;

    /// Some `x` with `m x = b`, if one exists.
    fn solve(m: &Matrix<Self>, b: &[Self], tol: f64) -> Option<Vec<Self>>;

    /// Canonical textual form: `p` or `p/q` for rationals, shortest
    /// round-trip decimal for floats.
    fn to_text(&self) -> String;
}

/// Rank, a kernel basis, and the pivot columns of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RankReport<T> {
    pub rank: usize,
    /// Basis of the right kernel; `rank + kernel_basis.len() == cols`.
    pub kernel_basis: Vec<Vec<T>>,
    /// Zero-based indices of a maximal independent set of columns.
    pub pivot_columns: Vec<usize>,
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

impl<T> Matrix<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Field> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::domain(format!(
                "{} entries cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some((i, bad)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
            return Err(Error::domain(format!(
                "row {} has {} entries, expected {c}",
                i + 1,
                bad.len()
            )));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Integer entries, row by row.
    pub fn from_i64_rows<R: AsRef<[i64]>>(rows: &[R]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.as_ref().iter().map(|&v| T::from_i64(v)).collect())
                .collect(),
        )
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<T>]) -> Result<Self> {
        if let Some(bad) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::domain(format!(
                "column of length {} in a matrix with {rows} rows",
                bad.len()
            )));
        }
        Ok(Self::from_fn(rows, columns.len(), |i, j| columns[j][i].clone()))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| T::zero())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn diag(d: &[T]) -> Self {
        let n = d.len();
        Self::from_fn(n, n, |i, j| if i == j { d[i].clone() } else { T::zero() })
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn columns(&self) -> Vec<Vec<T>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn matmul(&self, other: &Matrix<T>) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::domain(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).fold(T::zero(), |acc, k| {
                acc + self.get(i, k).clone() * other.get(k, j).clone()
            })
        }))
    }

    pub fn mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        if self.cols != v.len() {
            return Err(Error::domain(format!(
                "cannot multiply {}x{} by a vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
            })
            .collect())
    }

    pub fn add(&self, other: &Matrix<T>) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::domain("matrix sum of different shapes"));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        })
    }

    pub fn scale(&self, s: &T) -> Self {
        self.map(|x| x.clone() * s.clone())
    }

    /// Multiplies column `j` by `factors[j]`, i.e. `self * Diag(factors)`.
    pub fn scale_columns(&self, factors: &[T]) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| {
            self.get(i, j).clone() * factors[j].clone()
        })
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |i, j| self.get(i, cols[j]).clone())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self::from_fn(rows.len(), self.cols, |i, j| self.get(rows[i], j).clone())
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]).clone())
    }

    /// `[self x]`.
    pub fn append_column(&self, x: &[T]) -> Result<Self> {
        if x.len() != self.rows {
            return Err(Error::domain(format!(
                "cannot append a column of length {} to a matrix with {} rows",
                x.len(),
                self.rows
            )));
        }
        Ok(Self::from_fn(self.rows, self.cols + 1, |i, j| {
            if j < self.cols {
                self.get(i, j).clone()
            } else {
                x[i].clone()
            }
        }))
    }

    /// Largest absolute entry, as a float.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.to_f64().powi(2)).sum::<f64>().sqrt()
    }

    fn column_is_negligible(&self, j: usize, tol: f64) -> bool {
        let scale = self.max_abs();
        (0..self.rows).all(|i| self.get(i, j).is_negligible(scale, tol))
    }

    /// Zero-based indices of columns that are zero (negligible for floats).
    pub fn zero_columns(&self, tol: f64) -> Vec<usize> {
        (0..self.cols)
            .filter(|&j| self.column_is_negligible(j, tol))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    /// Entrywise equality, up to the tolerance for floats.
    pub fn approx_eq(&self, other: &Matrix<T>, tol: f64) -> bool {
        if self.shape() != other.shape() {
            return false;
        }
        let scale = self.max_abs().max(other.max_abs()).max(1.0);
        self.data
            .iter()
            .zip(&other.data)
            .all(|(a, b)| (a.clone() - b.clone()).is_negligible(scale, tol))
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).to_f64())
    }

    pub fn rank_report(&self, settings: &Settings) -> RankReport<T> {
        T::rank_report(self, settings.tolerance)
    }

    pub fn rank(&self, settings: &Settings) -> usize {
        self.rank_report(settings).rank
    }

    /// Determinant; errors on non-square input.
    pub fn determinant(&self) -> Result<T> {
        if self.rows != self.cols {
            return Err(Error::domain(format!(
                "determinant of a non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        Ok(T::determinant(self))
    }

    pub fn solve(&self, b: &[T], settings: &Settings) -> Result<Option<Vec<T>>> {
        if b.len() != self.rows {
            return Err(Error::domain(format!(
                "right-hand side of length {} for a system with {} rows",
                b.len(),
                self.rows
            )));
        }
        Ok(T::solve(self, b, settings.tolerance))
    }

    /// Largest `k` such that every `k` columns are linearly independent.
    ///
    /// Subsets are examined for ascending `k` in lexicographic order and the
    /// scan stops at the first dependent subset. A zero column gives 0.
    pub fn k_rank(&self, settings: &Settings) -> Result<usize> {
        Ok(self.k_rank_with_witness(settings)?.0)
    }

    /// `k_rank` together with the first dependent subset found (zero-based),
    /// if any subset of size `k_rank + 1 <= cols` is dependent.
    pub fn k_rank_with_witness(&self, settings: &Settings) -> Result<(usize, Option<Vec<usize>>)> {
        if self.cols == 0 {
            return Ok((0, None));
        }
        if let Some(&j) = self.zero_columns(settings.tolerance).first() {
            return Ok((0, Some(vec![j])));
        }
        let rank = self.rank(settings);
        if rank == self.cols {
            return Ok((self.cols, None));
        }
        // Every (rank + 1)-subset is dependent, so the answer is at most rank.
        for k in 2..=rank + 1 {
            capped_binomial(self.cols, k, settings.cap)?;
            for subset in Subsets::new(self.cols, k) {
                if k > rank || self.select_columns(&subset).rank(settings) < k {
                    return Ok((k - 1, Some(subset)));
                }
            }
        }
        unreachable!("a dependent subset of size rank + 1 always exists")
    }
}

/// `a ⊗ b`: entry `i * |b| + j` equals `a_i b_j` (zero-based).
pub fn kron<T: Field>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| x.clone() * y.clone()))
        .collect()
}

/// Column-wise Kronecker product `A ⊙ B`.
pub fn khatri_rao<T: Field>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.cols() != b.cols() {
        return Err(Error::domain(format!(
            "Khatri-Rao product needs equal column counts, got {} and {}",
            a.cols(),
            b.cols()
        )));
    }
    let columns: Vec<Vec<T>> = (0..a.cols())
        .map(|r| kron(&a.column(r), &b.column(r)))
        .collect();
    Matrix::from_columns(a.rows() * b.rows(), &columns)
}

/// Columns stacked on top of one another.
pub fn vec<T: Field>(m: &Matrix<T>) -> Vec<T> {
    (0..m.cols()).flat_map(|j| m.column(j)).collect()
}

/// Inverse of [`vec`].
pub fn unvec<T: Field>(v: &[T], rows: usize, cols: usize) -> Result<Matrix<T>> {
    if v.len() != rows * cols {
        return Err(Error::domain(format!(
            "vector of length {} cannot be reshaped to {rows}x{cols}",
            v.len()
        )));
    }
    Ok(Matrix::from_fn(rows, cols, |i, j| v[j * rows + i].clone()))
}

/// Reduced row echelon form and its pivot columns (zero-based).
///
/// Pivots are chosen by largest magnitude; for the exact backend this only
/// affects which rows get swapped, not the result.
#[allow(clippy::needless_range_loop)]
pub fn rref<T: Field>(m: &Matrix<T>, tol: f64) -> (Matrix<T>, Vec<usize>) {
    let mut rows: Vec<Vec<T>> = (0..m.rows()).map(|i| m.row(i).to_vec()).collect();
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..m.cols() {
        if r == rows.len() {
            break;
        }
        let best = (r..rows.len())
            .filter(|&i| !rows[i][c].is_negligible(scale, tol))
            .max_by(|&i, &j| {
                rows[i][c]
                    .to_f64()
                    .abs()
                    .partial_cmp(&rows[j][c].to_f64().abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        let Some(p) = best else {
            for row in rows[r..].iter_mut() {
                row[c] = T::zero();
            }
            continue;
        };
        rows.swap(p, r);
        let inv = T::one() / rows[r][c].clone();
        for v in rows[r].iter_mut() {
            *v = v.clone() * inv.clone();
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                for j in 0..m.cols() {
                    let delta = f.clone() * rows[r][j].clone();
                    rows[i][j] = rows[i][j].clone() - delta;
                }
                rows[i][c] = T::zero();
            }
        }
        pivots.push(c);
        r += 1;
    }
    rows.truncate(r);
    let out = Matrix::from_rows(rows).unwrap_or_else(|_| Matrix::zeros(0, m.cols()));
    let out = if out.rows() == 0 { Matrix::zeros(0, m.cols()) } else { out };
    (out, pivots)
}

// ---------------------------------------------------------------------------
// exact backend

/// Rows scaled to integers: each row is multiplied by the lcm of its
/// denominators. Returns the integer rows and the multipliers.
fn integer_rows(m: &Matrix<Rational>) -> (Vec<Vec<BigInt>>, Vec<BigInt>) {
    let mut out = Vec::with_capacity(m.rows());
    let mut factors = Vec::with_capacity(m.rows());
    for i in 0..m.rows() {
        let lcm = m
            .row(i)
            .iter()
            .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
        out.push(
            m.row(i)
                .iter()
                .map(|q| q.numer() * (&lcm / q.denom()))
                .collect(),
        );
        factors.push(lcm);
    }
    (out, factors)
}

/// Fraction-free (Bareiss) row echelon form, in place.
///
/// Returns the pivot columns and whether an odd number of row swaps was
/// performed. Every division is exact: after step `r` each entry is a
/// minor of the input.
fn bareiss_echelon(rows: &mut [Vec<BigInt>]) -> (Vec<usize>, bool) {
    let n_rows = rows.len();
    let n_cols = rows.first().map_or(0, Vec::len);
    let mut prev = BigInt::one();
    let mut pivots = Vec::new();
    let mut odd = false;
    let mut r = 0;
    for c in 0..n_cols {
        if r == n_rows {
            break;
        }
        let Some(p) = (r..n_rows).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        if p != r {
            rows.swap(p, r);
            odd = !odd;
        }
        let (top, rest) = rows.split_at_mut(r + 1);
        let pivot_row = &top[r];
        let pivot = &pivot_row[c];
        for row in rest.iter_mut() {
            let lead = row[c].clone();
            for j in c + 1..n_cols {
                let v = pivot * &row[j] - &lead * &pivot_row[j];
                row[j] = v / &prev;
            }
            row[c] = BigInt::zero();
        }
        // Rows below a skipped column were not rescaled; they already hold
        // minors of the same order as the pivot row.
        prev = pivot.clone();
        pivots.push(c);
        r += 1;
    }
    (pivots, odd)
}

impl Field for Rational {
    const BACKEND: Backend = Backend::Exact;

    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }

    fn from_rational(q: &Rational) -> Self {
        q.clone()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_negligible(&self, _scale: f64, _tol: f64) -> bool {
        self.is_zero()
    }

    fn determinant(m: &Matrix<Self>) -> Self {
        let n = m.rows();
        if n == 0 {
            return Rational::one();
        }
        let (mut rows, factors) = integer_rows(m);
        let (pivots, odd) = bareiss_echelon(&mut rows);
        if pivots.len() < n {
            return Rational::zero();
        }
        let det_int = rows[n - 1][n - 1].clone();
        let denom = factors.iter().fold(BigInt::one(), |acc, f| acc * f);
        let det = Rational::new(det_int, denom);
        if odd {
            -det
        } else {
            det
        }
    }

    fn rank_report(m: &Matrix<Self>, _tol: f64) -> RankReport<Self> {
        let (mut rows, _) = integer_rows(m);
        let (pivots, _) = bareiss_echelon(&mut rows);
        let rank = pivots.len();
        let free: Vec<usize> = (0..m.cols()).filter(|c| !pivots.contains(c)).collect();
        let mut kernel_basis = Vec::with_capacity(free.len());
        for &f in &free {
            let mut x = vec![Rational::zero(); m.cols()];
            x[f] = Rational::one();
            for i in (0..rank).rev() {
                let p = pivots[i];
                let mut acc = Rational::zero();
                for j in p + 1..m.cols() {
                    if !x[j].is_zero() && !rows[i][j].is_zero() {
                        acc += Rational::from_integer(rows[i][j].clone()) * &x[j];
                    }
                }
                x[p] = -acc / Rational::from_integer(rows[i][p].clone());
            }
            kernel_basis.push(x);
        }
        RankReport {
            rank,
            kernel_basis,
            pivot_columns: pivots,
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn solve(m: &Matrix<Self>, b: &[Self], _tol: f64) -> Option<Vec<Self>> {
        // Gauss-Jordan on [m | b].
        let n = m.cols();
        let mut aug: Vec<Vec<Rational>> = (0..m.rows())
            .map(|i| {
                let mut row = m.row(i).to_vec();
                row.push(b[i].clone());
                row
            })
            .collect();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..n {
            let Some(p) = (r..aug.len()).find(|&i| !aug[i][c].is_zero()) else {
                continue;
            };
            aug.swap(p, r);
            let inv = Rational::one() / aug[r][c].clone();
            for v in aug[r].iter_mut() {
                *v *= &inv;
            }
            for i in 0..aug.len() {
                if i != r && !aug[i][c].is_zero() {
                    let f = aug[i][c].clone();
                    for j in c..=n {
                        let delta = &f * &aug[r][j];
                        aug[i][j] -= delta;
                    }
                }
            }
            pivots.push(c);
            r += 1;
            if r == aug.len() {
                break;
            }
        }
        if aug[r..].iter().any(|row| !row[n].is_zero()) {
            return None;
        }
        let mut x = vec![Rational::zero(); n];
        for (i, &c) in pivots.iter().enumerate() {
            x[c] = aug[i][n].clone();
        }
        Some(x)
    }

    fn to_text(&self) -> String {
        if self.is_integer() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
}

// ---------------------------------------------------------------------------
// float backend

/// SVD of `m` padded with zero rows so the right singular vectors span the
/// whole column space, plus the rank threshold.
fn padded_svd(m: &Matrix<f64>, tol: f64) -> (nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, f64) {
    let rows = m.rows().max(m.cols());
    let dm = DMatrix::from_fn(rows, m.cols(), |i, j| {
        if i < m.rows() {
            *m.get(i, j)
        } else {
            0.0
        }
    });
    let svd = nalgebra::SVD::new(dm, false, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let threshold = tol * smax * (m.rows().max(m.cols()) as f64);
    (svd, threshold)
}

impl Field for f64 {
    const BACKEND: Backend = Backend::Float;

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn from_rational(q: &Rational) -> Self {
        ToPrimitive::to_f64(q).unwrap_or(f64::NAN)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_negligible(&self, scale: f64, tol: f64) -> bool {
        self.abs() <= tol * scale.max(f64::MIN_POSITIVE)
    }

    fn determinant(m: &Matrix<Self>) -> Self {
        if m.rows() == 0 {
            return 1.0;
        }
        m.to_dmatrix().lu().determinant()
    }

    fn rank_report(m: &Matrix<Self>, tol: f64) -> RankReport<Self> {
        if m.cols() == 0 {
            return RankReport {
                rank: 0,
                kernel_basis: Vec::new(),
                pivot_columns: Vec::new(),
            };
        }
        if m.rows() == 0 || m.max_abs() == 0.0 {
            return RankReport {
                rank: 0,
                kernel_basis: (0..m.cols())
                    .map(|j| (0..m.cols()).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
                    .collect(),
                pivot_columns: Vec::new(),
            };
        }
        let (svd, threshold) = padded_svd(m, tol);
        let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
        let mut rank = 0;
        let mut kernel_basis = Vec::new();
        for (idx, &s) in svd.singular_values.iter().enumerate() {
            if s > threshold {
                rank += 1;
            } else {
                kernel_basis.push(v_t.row(idx).iter().cloned().collect());
            }
        }
        // greedy pivot columns by Gram-Schmidt against the same threshold
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut pivot_columns = Vec::new();
        for j in 0..m.cols() {
            if pivot_columns.len() == rank {
                break;
            }
            let mut v = m.column(j);
            for q in &basis {
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= dot * qi;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > threshold {
                basis.push(v.iter().map(|x| x / norm).collect());
                pivot_columns.push(j);
            }
        }
        RankReport {
            rank,
            kernel_basis,
            pivot_columns,
        }
    }

    fn solve(m: &Matrix<Self>, b: &[Self], tol: f64) -> Option<Vec<Self>> {
        if m.cols() == 0 {
            let bn = b.iter().map(|x| x.abs()).fold(0.0, f64::max);
            return (bn <= tol).then(Vec::new);
        }
        let dm = m.to_dmatrix();
        let svd = dm.clone().svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let eps = tol * smax * (m.rows().max(m.cols()) as f64);
        let rhs = nalgebra::DVector::from_column_slice(b);
        let x = svd.solve(&rhs, eps.max(f64::MIN_POSITIVE)).ok()?;
        let residual = (&dm * &x - &rhs).norm();
        let scale = dm.norm() * x.norm() + rhs.norm();
        (residual <= tol.sqrt() * scale.max(1.0)).then(|| x.iter().cloned().collect())
    }

    fn to_text(&self) -> String {
        format!("{self:?}")
    }
}

/// Parses `p`, `p/q`, or a finite decimal such as `-1.25e-3` into an exact
/// rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(Rational::new(p, q));
    }
    if let Ok(p) = s.parse::<BigInt>() {
        return Some(Rational::from_integer(p));
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}0").parse().ok()?;
    let digits = digits / BigInt::from(10);
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut q = if scale >= 0 {
        Rational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    if negative {
        q = -q;
    }
    Some(q)
}

/// Best rational approximation of `x` with denominator at most `max_den`,
/// accepted only if it lies within `tol` of `x`.
pub fn rational_reconstruct(x: f64, max_den: i64, tol: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let negative = x < 0.0;
    let mut y = x.abs();
    // continued-fraction convergents h/k
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut best: Option<(i128, i128)> = None;
    for _ in 0..64 {
        let a = y.floor();
        if a > 1e15 {
            break;
        }
        let a = a as i128;
        let h2 = a * h1 + h0;
        let k2 = a * k1 + k0;
        if k2 > max_den as i128 {
            break;
        }
        best = Some((h2, k2));
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = y - a as f64;
        if frac < 1e-15 {
            break;
        }
        y = 1.0 / frac;
    }
    let (h, k) = best?;
    let approx = h as f64 / k as f64;
    if (approx - x.abs()).abs() > tol * x.abs().max(1.0) {
        return None;
    }
    let q = Rational::new(BigInt::from(h), BigInt::from(k));
    Some(if negative { -q } else { q })
}

/// Sign of a rational as -1, 0, 1.
pub fn signum(q: &Rational) -> i32 {
    if q.is_zero() {
        0
    } else if q.is_positive() {
        1
    } else {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: i64) -> Rational {
        Rational::from_i64(v)
    }

    fn exact(rows: &[&[i64]]) -> Matrix<Rational> {
        Matrix::from_i64_rows(rows).unwrap()
    }

    #[test]
    fn identity_has_full_rank_and_empty_kernel() {
        let s = Settings::default();
        let r = Matrix::<Rational>::identity(3).rank_report(&s);
        assert_eq!(r.rank, 3);
        assert!(r.kernel_basis.is_empty());
        assert_eq!(r.pivot_columns, vec![0, 1, 2]);
        let r = Matrix::<f64>::identity(3).rank_report(&s);
        assert_eq!(r.rank, 3);
        assert!(r.kernel_basis.is_empty());
    }

    #[test]
    fn outer_product_sum_has_rank_two() {
        // M = u1 v1^T + u2 v2^T
        let u1 = [1, 2, 0, -1, 3];
        let v1 = [1, 0, 2];
        let u2 = [0, 1, 1, 4, -2];
        let v2 = [3, 1, -1];
        let m = Matrix::<Rational>::from_fn(5, 3, |i, j| q(u1[i] * v1[j] + u2[i] * v2[j]));
        let s = Settings::default();
        let rep = m.rank_report(&s);
        assert_eq!(rep.rank, 2);
        assert_eq!(rep.kernel_basis.len(), 1);
        for v in &rep.kernel_basis {
            assert!(m.mul_vec(v).unwrap().iter().all(Zero::is_zero));
        }
        let mf = m.map(Field::to_f64);
        let rep = mf.rank_report(&s);
        assert_eq!(rep.rank, 2);
        let r = mf.mul_vec(&rep.kernel_basis[0]).unwrap();
        assert!(r.iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn determinants() {
        let m = exact(&[&[2, 0, 1], &[1, 3, 2], &[1, 1, 1]]);
        // 2*(3-2) - 0 + 1*(1-3) = 0
        assert_eq!(m.determinant().unwrap(), q(0));
        let m = exact(&[&[0, 1], &[1, 0]]);
        assert_eq!(m.determinant().unwrap(), q(-1));
        let m = Matrix::from_rows(vec![
            vec![Rational::new(1.into(), 2.into()), q(1)],
            vec![q(3), Rational::new(1.into(), 3.into())],
        ])
        .unwrap();
        assert_eq!(m.determinant().unwrap(), Rational::new((-17).into(), 6.into()));
        assert!(exact(&[&[1, 2, 3]]).determinant().is_err());
    }

    #[test]
    fn k_rank_basics() {
        let s = Settings::default();
        // proportional columns 1 and 3
        let m = exact(&[&[1, 0, 2], &[1, 1, 2]]);
        assert_eq!(m.k_rank(&s).unwrap(), 1);
        let m = exact(&[&[1, 0, 0], &[0, 0, 1]]);
        assert_eq!(m.k_rank(&s).unwrap(), 0);
        let m = exact(&[&[1, 0, 1, 1], &[0, 1, 1, 2]]);
        assert_eq!(m.k_rank(&s).unwrap(), 2);
        assert_eq!(Matrix::<Rational>::identity(4).k_rank(&s).unwrap(), 4);
    }

    #[test]
    fn kron_and_vec() {
        let a = [q(1), q(0)];
        let b = [q(0), q(1)];
        assert_eq!(kron(&a, &b), vec![q(0), q(1), q(0), q(0)]);
        // vec(b a^T) = a ⊗ b
        let a = [q(1), q(2)];
        let b = [q(3), q(4)];
        let outer = Matrix::from_fn(2, 2, |i, j| b[i].clone() * a[j].clone());
        assert_eq!(vec(&outer), kron(&a, &b));
        assert_eq!(kron(&a, &b), vec![q(3), q(4), q(6), q(8)]);
        let m = exact(&[&[1, 3], &[2, 4]]);
        assert_eq!(vec(&m), vec![q(1), q(2), q(3), q(4)]);
        assert_eq!(unvec(&vec(&m), 2, 2).unwrap(), m);
    }

    #[test]
    fn khatri_rao_with_ones_row_is_identity_map() {
        let a = exact(&[&[1, 2, 3], &[4, 5, 6]]);
        let ones = exact(&[&[1, 1, 1]]);
        assert_eq!(khatri_rao(&a, &ones).unwrap(), a);
        assert!(khatri_rao(&a, &exact(&[&[1, 1]])).is_err());
    }

    #[test]
    fn solve_consistent_and_inconsistent() {
        let s = Settings::default();
        let m = exact(&[&[1, 1], &[1, 1]]);
        assert!(m.solve(&[q(1), q(2)], &s).unwrap().is_none());
        let x = m.solve(&[q(2), q(2)], &s).unwrap().unwrap();
        assert_eq!(m.mul_vec(&x).unwrap(), vec![q(2), q(2)]);
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("3/6"), Some(Rational::new(1.into(), 2.into())));
        assert_eq!(parse_rational("-7"), Some(q(-7)));
        assert_eq!(parse_rational("0.25"), Some(Rational::new(1.into(), 4.into())));
        assert_eq!(parse_rational("-1.5e2"), Some(q(-150)));
        assert_eq!(parse_rational("1e-2"), Some(Rational::new(1.into(), 100.into())));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational("."), None);
    }

    #[test]
    fn reconstruct_simple_fractions() {
        assert_eq!(
            rational_reconstruct(0.333333333333, 1_000_000, 1e-9),
            Some(Rational::new(1.into(), 3.into()))
        );
        assert_eq!(rational_reconstruct(-2.0, 1_000_000, 1e-9), Some(q(-2)));
        assert_eq!(rational_reconstruct(std::f64::consts::PI, 100, 1e-9), None);
    }
}
