mod common;

use common::*;
use cpdcert::certify::{certify_overall, certify_third_factor, Conclusion};
use cpdcert::combinatorics::{rank, MultiIndex};
use cpdcert::compound::{compound, khatri_rao_compound};
use cpdcert::conditions::{check_cm, check_km, check_um, check_wm, m_for_c, Status, Witness};
use cpdcert::linalg::khatri_rao;
use cpdcert::tensor::{build_tensor, vectorize_tensor, FactorTriple};
use cpdcert::Settings;

#[test]
fn w5_triple_ranks() {
    let s = Settings::default();
    let (a, b, c) = w5_triple();
    assert_eq!((a.rank(&s), b.rank(&s), c.rank(&s)), (6, 6, 4));
    assert_eq!((a.k_rank(&s).unwrap(), b.k_rank(&s).unwrap(), c.k_rank(&s).unwrap()), (4, 4, 1));
    assert_eq!(m_for_c(&c, &s), 5);
}

#[test]
fn w5_compound_khatri_rao() {
    let s = Settings::default();
    let (a, b, _) = w5_triple();
    let u = khatri_rao_compound(&a, &b, 5, &s).unwrap();
    assert_eq!(u.shape(), (36, 21));
    assert_eq!(u.rank(&s), 19);
    for cols in [[1, 2, 3, 4, 5], [1, 4, 5, 6, 7]] {
        let j = rank(&MultiIndex::new(cols.to_vec(), 7).unwrap()) - 1;
        assert!(u.column(j).iter().all(|v| *v == q(0)), "column {cols:?}");
    }
    assert_eq!(u.zero_columns(0.0).len(), 2);
}

#[test]
fn w5_conditions() {
    let s = Settings::default();
    let (a, b, c) = w5_triple();
    assert!(check_km(&a, &b, 5, &s).unwrap().fails());
    assert!(check_cm(&a, &b, 5, &s).unwrap().fails());
    assert!(check_um(&a, &b, 5, &s).unwrap().fails());
    let w5 = check_wm(&a, &b, &c, 5, &s).unwrap();
    assert_eq!(w5.status, Status::Holds, "{:?}", w5.provenance);
    // A ⊙ B has full column rank, so W1 holds here
    assert_eq!(khatri_rao(&a, &b).unwrap().rank(&s), 7);
    assert_eq!(check_wm(&a, &b, &c, 1, &s).unwrap().status, Status::Holds);
}

#[test]
fn w5_certificates() {
    let s = Settings::default();
    let (a, b, c) = w5_triple();
    let f = FactorTriple::new(a, b, c).unwrap();
    let third = certify_third_factor(&f, 3, &s).unwrap();
    assert_eq!(third.conclusion, Conclusion::ThirdFactorUnique);
    assert_eq!(third.m_used, Some(5));
    assert_eq!(third.chain.last().unwrap().rule, "W5+Corollary 4.9");
    let overall = certify_overall(&f, &s).unwrap();
    assert_eq!(overall.conclusion, Conclusion::NotUnique);
    assert!(overall.chain.iter().any(|st| st.reference == "Theorem 1.9(ii)"));
}

#[test]
fn w5_tensor_matches_triple_loop() {
    let (a, b, c) = w5_triple();
    let t = build_tensor(&FactorTriple::new(a.clone(), b.clone(), c.clone()).unwrap()).unwrap();
    assert_eq!(vectorize_tensor(&t), naive_tensor(&a, &b, &c));
}

#[test]
fn w2_triple_products() {
    let s = Settings::default();
    let (a, b, c) = w2_triple();
    assert_eq!(
        khatri_rao(&a, &b).unwrap(),
        exact(&[&[1, 0, 0, 1], &[0, 0, 0, 2], &[0, 0, 0, 1], &[0, 1, 0, 2]])
    );
    assert_eq!(khatri_rao_compound(&a, &b, 2, &s).unwrap(), exact(&[&[1, 0, 2, 0, 1, 0]]));
    assert_eq!(check_wm(&a, &b, &c, 2, &s).unwrap().status, Status::Holds);
    let w1 = check_wm(&a, &b, &c, 1, &s).unwrap();
    assert_eq!(w1.status, Status::Fails);
    let Some(Witness::Vector { d, preimage: Some(x) }) = w1.witness else {
        panic!("missing witness");
    };
    assert_eq!(d, ints(&[0, 0, 1, 0]));
    assert_eq!(c.transpose().mul_vec(&x).unwrap(), d);
    assert_eq!(m_for_c(&c, &s), 4);
}

#[test]
fn bordered_identity_compound() {
    let a = exact(&[&[2, 1, 0, 0], &[3, 0, 1, 0], &[5, 0, 0, 1]]);
    let c2 = compound(&a, 2, &Settings::default()).unwrap();
    assert_eq!(rows_of(c2.matrix()), naive_compound(&a, 2));
}
