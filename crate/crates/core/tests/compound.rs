mod common;

use common::*;
use cpdcert::compound::{compound, compound_diag, khatri_rao_compound, phi_map, vec_compound_identity_check};
use cpdcert::linalg::khatri_rao;
use cpdcert::{Matrix, Rational, Settings};
use num_traits::Zero;
use proptest::prelude::*;

fn c(m: &Matrix<Rational>, k: usize) -> Matrix<Rational> {
    compound(m, k, &Settings::default()).unwrap().into_matrix()
}

#[test]
fn diagonal_compound_example() {
    let d = ints(&[2, 3, 5, 7]);
    assert_eq!(compound_diag(&d, 3).unwrap(), ints(&[30, 42, 70, 105]));
    assert_eq!(compound_diag(&ints(&[1, 1, 1, 1, 1]), 2).unwrap(), ints(&[1; 10]));
    assert_eq!(c(&Matrix::diag(&d), 2), Matrix::diag(&compound_diag(&d, 2).unwrap()));
}

#[test]
fn phi_map_full_order_is_alternating_row() {
    let s = Settings::default();
    let x = ints(&[1, 2, 3, 4, 5]);
    let phi = phi_map(&x, 5, &s).unwrap();
    assert_eq!(phi.matrix(), &exact(&[&[5, -4, 3, -2, 1]]));
}

#[test]
fn laplace_identity_at_order_three() {
    let s = Settings::default();
    let a = exact(&[&[1, 2], &[0, 1], &[3, -1], &[2, 2], &[-1, 4]]);
    let x = ints(&[2, -1, 0, 3, 1]);
    let lhs = c(&a.append_column(&x).unwrap(), 3);
    let rhs = phi_map(&x, 3, &s).unwrap().apply(&c(&a, 2)).unwrap();
    assert_eq!(lhs, rhs);
}

#[test]
fn random_small_vec_identities() {
    let s = Settings::default();
    let a = exact(&[&[1, 2, 0, -1], &[3, 1, 1, 0], &[0, 2, 1, 1]]);
    let b = exact(&[&[2, 0, 1, 1], &[1, 1, -1, 0], &[0, 3, 1, 2]]);
    let d = ints(&[1, -2, 3, 1]);
    for k in 1..=3 {
        assert!(vec_compound_identity_check(&a, &b, &d, k, &s).unwrap());
    }
    assert!(vec_compound_identity_check(&a, &b, &ints(&[0, 0, 0, 0]), 2, &s).unwrap());
    assert_eq!(khatri_rao_compound(&a, &b, 1, &s).unwrap(), khatri_rao(&a, &b).unwrap());
}

#[test]
fn float_backend_agrees() {
    let s = Settings::default();
    let a = exact(&[&[1, 2, 0, -1], &[3, 1, 1, 0], &[0, 2, 1, 1]]);
    let exact_c = c(&a, 2);
    let float_c = compound(&a.map(cpdcert::Field::to_f64), 2, &s).unwrap().into_matrix();
    assert!(float_c.approx_eq(&exact_c.map(cpdcert::Field::to_f64), 1e-12));
}

proptest! {
    #[test]
    fn compound_matches_naive_minors(m in any_int_matrix(1..=5, 1..=5, -4, 4), k in 1usize..=5) {
        prop_assume!(k <= m.rows().min(m.cols()));
        prop_assert_eq!(rows_of(&c(&m, k)), naive_compound(&m, k));
    }

    #[test]
    fn zero_structure_tracks_ranks(m in any_int_matrix(1..=5, 1..=6, -1, 1), k in 1usize..=5) {
        prop_assume!(k <= m.rows().min(m.cols()));
        let s = Settings::default();
        let ck = c(&m, k);
        let has_zero_column = (0..ck.cols()).any(|j| ck.column(j).iter().all(Zero::is_zero));
        prop_assert_eq!(has_zero_column, k > m.k_rank(&s).unwrap());
        prop_assert_eq!(ck.is_zero(), k > m.rank(&s));
    }

    #[test]
    fn phi_map_is_linear(
        xs in proptest::collection::vec(-5i64..=5, 5),
        ys in proptest::collection::vec(-5i64..=5, 5),
        alpha in -3i64..=3,
        beta in -3i64..=3,
        m in 1usize..=5,
    ) {
        let s = Settings::default();
        let (x, y) = (ints(&xs), ints(&ys));
        let combo: Vec<Rational> = x.iter().zip(&y).map(|(a, b)| q(alpha) * a.clone() + q(beta) * b.clone()).collect();
        let lhs = phi_map(&combo, m, &s).unwrap().matrix().clone();
        let rhs = phi_map(&x, m, &s).unwrap().matrix().scale(&q(alpha))
            .add(&phi_map(&y, m, &s).unwrap().matrix().scale(&q(beta))).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn laplace_identity(
        (a, x) in (2usize..=5, 1usize..=4).prop_flat_map(|(i, cols)| (int_matrix(i, cols, -3, 3), proptest::collection::vec(-3i64..=3, i))),
        m in 2usize..=5,
    ) {
        prop_assume!(m <= a.rows() && m - 1 <= a.cols());
        let s = Settings::default();
        let x = ints(&x);
        let lhs = c(&a.append_column(&x).unwrap(), m);
        // only the columns of C_m([A x]) whose multi-index ends in the new column
        let n = a.cols() + 1;
        let labels: Vec<usize> = (0..lhs.cols())
            .filter(|&j| compound(&a.append_column(&x).unwrap(), m, &s).unwrap().column_label(j).entries().last() == Some(&n))
            .collect();
        let lhs = lhs.select_columns(&labels);
        let rhs = phi_map(&x, m, &s).unwrap().apply(&c(&a, m - 1)).unwrap();
        prop_assert_eq!(lhs, rhs);
    }
}
