//! Compound matrices and the identities built on them.
//!
//! `C_k(A)` holds every `k x k` minor of `A`, with row and column index
//! sets ordered lexicographically. The Khatri-Rao product of compounds
//! `C_m(A) ⊙ C_m(B)` is the matrix all the uniqueness conditions are
//! phrased in.

use crate::combinatorics::{capped_binomial, product_vector, rank_zero_based, MultiIndex, Subsets};
use crate::error::{Error, Result};
use crate::linalg::{khatri_rao, vec, Field, Matrix};
use crate::settings::Settings;

/// `C_k(A)` together with the shape of `A`, so that row and column
/// multi-indices can be recovered.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundMatrix<T> {
    data: Matrix<T>,
    source_rows: usize,
    source_cols: usize,
    order: usize,
}

impl<T: Field> CompoundMatrix<T> {
    pub fn matrix(&self) -> &Matrix<T> {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.data
    }

    pub fn source_rows(&self) -> usize {
        self.source_rows
    }

    pub fn source_cols(&self) -> usize {
        self.source_cols
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Row set labelling row `i` (zero-based).
    pub fn row_label(&self, i: usize) -> MultiIndex {
        label(self.source_rows, self.order, i)
    }

    /// Column set labelling column `j` (zero-based).
    pub fn column_label(&self, j: usize) -> MultiIndex {
        label(self.source_cols, self.order, j)
    }
}

fn label(n: usize, k: usize, i: usize) -> MultiIndex {
    let subset = Subsets::new(n, k)
        .nth(i)
        .expect("label index within the compound's dimensions");
    MultiIndex::from_zero_based(&subset, n)
}

/// The `k`-th compound matrix of `a`.
pub fn compound<T: Field>(a: &Matrix<T>, k: usize, settings: &Settings) -> Result<CompoundMatrix<T>> {
    let (rows, cols) = a.shape();
    if k == 0 || k > rows.min(cols) {
        return Err(Error::domain(format!(
            "compound order {k} outside 1..={} for a {rows}x{cols} matrix",
            rows.min(cols)
        )));
    }
    let n_rows = capped_binomial(rows, k, settings.cap)?;
    let n_cols = capped_binomial(cols, k, settings.cap)?;
    check_entries(n_rows, n_cols, rows, k, settings)?;
    let row_sets: Vec<Vec<usize>> = Subsets::new(rows, k).collect();
    let col_sets: Vec<Vec<usize>> = Subsets::new(cols, k).collect();
    let mut data = Vec::with_capacity(n_rows * n_cols);
    for rs in &row_sets {
        for cs in &col_sets {
            data.push(T::determinant(&a.submatrix(rs, cs)));
        }
    }
    Ok(CompoundMatrix {
        data: Matrix::new(n_rows, n_cols, data)?,
        source_rows: rows,
        source_cols: cols,
        order: k,
    })
}

fn check_entries(n_rows: usize, n_cols: usize, n: usize, k: usize, settings: &Settings) -> Result<()> {
    match n_rows.checked_mul(n_cols) {
        Some(e) if (e as u64) <= settings.cap => Ok(()),
        other => Err(Error::CapExceeded {
            n,
            k,
            value: other.map_or_else(|| "overflow".to_string(), |e| format!("{e} entries")),
            cap: settings.cap,
        }),
    }
}

/// Diagonal of `C_k(Diag(d))`, which is the product vector of `d`.
pub fn compound_diag<T: Field>(d: &[T], k: usize) -> Result<Vec<T>> {
    product_vector(d, k)
}

/// `C_m(A) ⊙ C_m(B)`, of shape `C(I,m) C(J,m) x C(R,m)`.
pub fn khatri_rao_compound<T: Field>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    m: usize,
    settings: &Settings,
) -> Result<Matrix<T>> {
    if a.cols() != b.cols() {
        return Err(Error::domain(format!(
            "factor matrices have {} and {} columns",
            a.cols(),
            b.cols()
        )));
    }
    let ca = compound(a, m, settings)?;
    let cb = compound(b, m, settings)?;
    check_entries(
        ca.matrix().rows() * cb.matrix().rows(),
        ca.matrix().cols(),
        a.cols(),
        m,
        settings,
    )?;
    khatri_rao(ca.matrix(), cb.matrix())
}

/// The matrix `Phi^{I,m}(x)` with `C_m([A x]) = Phi(x) C_{m-1}(A)` for
/// every `I x (m-1)` matrix `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiMap<T> {
    data: Matrix<T>,
    order: usize,
    len: usize,
}

impl<T: Field> PhiMap<T> {
    pub fn matrix(&self) -> &Matrix<T> {
        &self.data
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Length `I` of the generating vector.
    pub fn source_vector_length(&self) -> usize {
        self.len
    }

    /// Applies the map to `C_{m-1}(A)`.
    pub fn apply(&self, lower: &Matrix<T>) -> Result<Matrix<T>> {
        self.data.matmul(lower)
    }
}

/// Laplace expansion of every `m x m` minor of `[A x]` along its last column.
///
/// Row `(i_1, ..., i_m)` has the entry `(-1)^(m-p) x_{i_p}` in the column
/// labelled by the tuple with `i_p` removed. For `m = 1` the single column
/// corresponds to the empty minor, equal to 1.
pub fn phi_map<T: Field>(x: &[T], m: usize, settings: &Settings) -> Result<PhiMap<T>> {
    let n = x.len();
    if m == 0 || m > n {
        return Err(Error::domain(format!(
            "Phi map order {m} outside 1..={n}"
        )));
    }
    let n_rows = capped_binomial(n, m, settings.cap)?;
    let n_cols = capped_binomial(n, m - 1, settings.cap)?;
    check_entries(n_rows, n_cols, n, m, settings)?;
    let mut data = Matrix::zeros(n_rows, n_cols);
    for (row, tuple) in Subsets::new(n, m).enumerate() {
        for p in 0..m {
            let rest: Vec<usize> = tuple
                .iter()
                .enumerate()
                .filter(|&(q, _)| q != p)
                .map(|(_, &v)| v)
                .collect();
            let col = rank_zero_based(&rest, n);
            let v = x[tuple[p]].clone();
            // 1-based position p+1, sign (-1)^(m - (p+1))
            let v = if (m - 1 - p).is_multiple_of(2) { v } else { -v };
            data.set(row, col, v);
        }
    }
    Ok(PhiMap {
        data,
        order: m,
        len: n,
    })
}

/// Checks `vec(C_k(B Diag(d) A^T)) = [C_k(A) ⊙ C_k(B)] d̂` by computing
/// both sides along independent routes.
pub fn vec_compound_identity_check<T: Field>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    d: &[T],
    k: usize,
    settings: &Settings,
) -> Result<bool> {
    if a.cols() != d.len() || b.cols() != d.len() {
        return Err(Error::domain("A, B and d must agree on R"));
    }
    let inner = b.scale_columns(d).matmul(&a.transpose())?;
    let lhs = vec(compound(&inner, k, settings)?.matrix());
    let rhs = khatri_rao_compound(a, b, k, settings)?.mul_vec(&product_vector(d, k)?)?;
    let scale = lhs
        .iter()
        .chain(&rhs)
        .map(|x| x.to_f64().abs())
        .fold(1.0, f64::max);
    Ok(lhs
        .iter()
        .zip(&rhs)
        .all(|(l, r)| (l.clone() - r.clone()).is_negligible(scale, settings.tolerance.sqrt())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rational;

    fn exact(rows: &[&[i64]]) -> Matrix<Rational> {
        Matrix::from_i64_rows(rows).unwrap()
    }

    fn ints(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| Rational::from_integer(x.into())).collect()
    }

    #[test]
    fn second_compound_of_bordered_identity() {
        let a = exact(&[&[2, 1, 0, 0], &[3, 0, 1, 0], &[5, 0, 0, 1]]);
        let c2 = compound(&a, 2, &Settings::default()).unwrap();
        let expected = exact(&[
            &[-3, 2, 0, 1, 0, 0],
            &[-5, 0, 2, 0, 1, 0],
            &[0, -5, 3, 0, 0, 1],
        ]);
        assert_eq!(c2.matrix(), &expected);
        assert_eq!(c2.column_label(3).to_string(), "(2,3)");
        assert_eq!(c2.row_label(2).to_string(), "(2,3)");
    }

    #[test]
    fn first_compound_and_full_order() {
        let a = exact(&[&[1, 2], &[3, 4]]);
        let s = Settings::default();
        assert_eq!(compound(&a, 1, &s).unwrap().into_matrix(), a);
        assert_eq!(compound(&a, 2, &s).unwrap().into_matrix(), exact(&[&[-2]]));
        assert!(compound(&a, 3, &s).is_err());
    }

    #[test]
    fn phi_for_four_rows_order_two() {
        let phi = phi_map(&ints(&[1, 2, 3, 4]), 2, &Settings::default()).unwrap();
        let expected = exact(&[
            &[2, -1, 0, 0],
            &[3, 0, -1, 0],
            &[4, 0, 0, -1],
            &[0, 3, -2, 0],
            &[0, 4, 0, -2],
            &[0, 0, 4, -3],
        ]);
        assert_eq!(phi.matrix(), &expected);
    }

    #[test]
    fn phi_at_full_order_is_alternating_row() {
        let phi = phi_map(&ints(&[1, 2, 3, 4]), 4, &Settings::default()).unwrap();
        assert_eq!(phi.matrix(), &exact(&[&[4, -3, 2, -1]]));
        assert!(phi_map(&ints(&[1, 2]), 3, &Settings::default()).is_err());
    }

    #[test]
    fn laplace_identity_on_a_fixed_instance() {
        let s = Settings::default();
        let a = exact(&[&[1, 0], &[2, -1], &[0, 3], &[4, 1], &[-2, 2]]);
        let x = ints(&[3, -1, 2, 0, 5]);
        let lhs = compound(&a.append_column(&x).unwrap(), 3, &s).unwrap().into_matrix();
        let rhs = phi_map(&x, 3, &s).unwrap().apply(compound(&a, 2, &s).unwrap().matrix()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn diagonal_compound_is_product_vector() {
        let d = ints(&[2, 3, 5, 7]);
        let full = compound(&Matrix::diag(&d), 3, &Settings::default()).unwrap().into_matrix();
        let diag: Vec<Rational> = (0..4).map(|i| full.get(i, i).clone()).collect();
        assert_eq!(diag, compound_diag(&d, 3).unwrap());
        assert_eq!(diag, ints(&[30, 42, 70, 105]));
    }

    #[test]
    fn vec_identity_holds() {
        let s = Settings::default();
        let a = exact(&[&[1, 2, 0, -1], &[0, 1, 3, 2], &[2, -1, 1, 0]]);
        let b = exact(&[&[3, 0, 1, 1], &[1, 1, -2, 0], &[0, 2, 1, 4]]);
        for k in 1..=3 {
            assert!(vec_compound_identity_check(&a, &b, &ints(&[2, -1, 3, 1]), k, &s).unwrap());
            assert!(vec_compound_identity_check(&a, &b, &ints(&[0, 0, 0, 0]), k, &s).unwrap());
        }
    }

    #[test]
    fn cap_is_enforced() {
        let a = Matrix::<Rational>::identity(30);
        let s = Settings::default().with_cap(1000);
        assert!(matches!(compound(&a, 15, &s), Err(Error::CapExceeded { .. })));
    }
}
