//! The conditions (Km), (Hm), (Cm), (Um) and (Wm) on factor matrices.
//!
//! (Km), (Hm) and (Cm) are rank computations and always decidable. (Um)
//! and (Wm) quantify over every `d` in `F^R` (resp. in `range(C^T)`), so
//! their checkers are three-valued: `Holds` is returned only when a sound
//! sufficient rule fires, `Fails` only with a witness that has been
//! re-verified, and `Undetermined` otherwise.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::combinatorics::{capped_binomial, product_vector, rank_zero_based, support_size, Subsets};
use crate::compound::khatri_rao_compound;
use crate::error::{Error, Result};
use crate::linalg::{rational_reconstruct, rref, Field, Matrix};
use crate::settings::Settings;

/// Denominator bound used when snapping floating-point search results to
/// rationals.
pub const RECONSTRUCTION_MAX_DENOMINATOR: i64 = 1_000_000;

/// Structural (Wm) analysis is attempted only up to this many zero columns
/// of `C_m(A) ⊙ C_m(B)`.
pub const STRUCTURAL_MAX_ZERO_COLUMNS: usize = 8;
/// ... and only up to this rank of `C`.
pub const STRUCTURAL_MAX_RANK_C: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    K,
    H,
    C,
    U,
    W,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::K => "K",
            Condition::H => "H",
            Condition::C => "C",
            Condition::U => "U",
            Condition::W => "W",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Holds,
    Fails,
    Undetermined,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Holds => "holds",
            Status::Fails => "fails",
            Status::Undetermined => "undetermined",
        })
    }
}

/// Evidence attached to a verdict. Column indices are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness<T> {
    /// `d` with `[C_m(A) ⊙ C_m(B)] d̂ = 0` and `d̂ != 0`; for (Wm) also
    /// `x` with `d = C^T x`.
    Vector { d: Vec<T>, preimage: Option<Vec<T>> },
    /// Column subset of size `delta` attaining `H(delta) = value`.
    Subset { delta: usize, columns: Vec<usize>, value: i64 },
    /// Kernel vector of `C_m(A) ⊙ C_m(B)` and its rank deficit.
    Kernel { vector: Vec<T>, rank: usize, expected: usize },
    /// Inequalities that failed, in words.
    Inequalities(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionVerdict<T> {
    pub condition: Condition,
    pub m: usize,
    pub status: Status,
    pub witness: Option<Witness<T>>,
    pub provenance: Vec<String>,
}

impl<T> ConditionVerdict<T> {
    fn new(condition: Condition, m: usize, status: Status) -> Self {
        ConditionVerdict {
            condition,
            m,
            status,
            witness: None,
            provenance: Vec::new(),
        }
    }

    fn note(mut self, line: impl Into<String>) -> Self {
        self.provenance.push(line.into());
        self
    }

    fn with_witness(mut self, w: Witness<T>) -> Self {
        self.witness = Some(w);
        self
    }

    /// Short name such as `W5`.
    pub fn label(&self) -> String {
        format!("{}{}", self.condition, self.m)
    }

    pub fn holds(&self) -> bool {
        self.status == Status::Holds
    }

    pub fn fails(&self) -> bool {
        self.status == Status::Fails
    }
}

/// `H(delta)` for `delta = 1..=R` and the lexicographically first
/// minimizing subset of each size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HProfile {
    pub values: Vec<i64>,
    /// Zero-based column subsets.
    pub minimizers: Vec<Vec<usize>>,
}

impl HProfile {
    pub fn value(&self, delta: usize) -> i64 {
        self.values[delta - 1]
    }
}

fn same_columns<T: Field>(a: &Matrix<T>, b: &Matrix<T>) -> Result<usize> {
    if a.cols() != b.cols() {
        return Err(Error::domain(format!(
            "A has {} columns but B has {}",
            a.cols(),
            b.cols()
        )));
    }
    Ok(a.cols())
}

fn check_order<T: Field>(a: &Matrix<T>, b: &Matrix<T>, m: usize) -> Result<usize> {
    let r = same_columns(a, b)?;
    let bound = a.rows().min(b.rows()).min(r);
    if m == 0 || m > bound {
        return Err(Error::domain(format!(
            "m = {m} outside 1..=min(I, J, R) = {bound}"
        )));
    }
    Ok(r)
}

/// (Km): `r_A + k_B >= R + m` and `k_A >= m`, or the same with A and B
/// swapped.
pub fn check_km<T: Field>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    m: usize,
    settings: &Settings,
) -> Result<ConditionVerdict<T>> {
    let r = same_columns(a, b)?;
    let (ra, rb) = (a.rank(settings), b.rank(settings));
    let (ka, kb) = (a.k_rank(settings)?, b.k_rank(settings)?);
    let target = r + m;
    let first = ra + kb >= target && ka >= m;
    let second = rb + ka >= target && kb >= m;
    let describe = |r1: usize, k2: usize, k1: usize, n1: &str, n2: &str| {
        format!(
            "r_{n1} + k_{n2} = {} {} R + m = {target}; k_{n1} = {k1} {} m = {m}",
            r1 + k2,
            if r1 + k2 >= target { ">=" } else { "<" },
            if k1 >= m { ">=" } else { "<" },
        )
    };
    let d1 = describe(ra, kb, ka, "A", "B");
    let d2 = describe(rb, ka, kb, "B", "A");
    let status = if first || second {
        Status::Holds
    } else {
        Status::Fails
    };
    let mut v = ConditionVerdict::new(Condition::K, m, status);
    if first {
        v = v.note(format!("first disjunct holds: {d1}"));
    }
    if second {
        v = v.note(format!("second disjunct holds: {d2}"));
    }
    if status == Status::Fails {
        v = v
            .note(format!("first disjunct fails: {d1}"))
            .note(format!("second disjunct fails: {d2}"))
            .with_witness(Witness::Inequalities(vec![d1, d2]));
    }
    Ok(v)
}

/// Exhaustive `H(delta) = min_{|S| = delta} r(A_S) + r(B_S) - delta`.
pub fn h_profile<T: Field>(a: &Matrix<T>, b: &Matrix<T>, settings: &Settings) -> Result<HProfile> {
    let r = same_columns(a, b)?;
    for delta in 1..=r {
        capped_binomial(r, delta, settings.cap)?;
    }
    let mut values = Vec::with_capacity(r);
    let mut minimizers = Vec::with_capacity(r);
    for delta in 1..=r {
        let mut best: Option<(i64, Vec<usize>)> = None;
        for subset in Subsets::new(r, delta) {
            let v = (a.select_columns(&subset).rank(settings)
                + b.select_columns(&subset).rank(settings)) as i64
                - delta as i64;
            // strict comparison keeps the lexicographically first minimizer
            if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                best = Some((v, subset));
            }
        }
        let (v, s) = best.expect("at least one subset of each size");
        values.push(v);
        minimizers.push(s);
    }
    Ok(HProfile { values, minimizers })
}

/// (Hm): `H(delta) >= min(delta, m)` for every `delta`.
pub fn check_hm<T: Field>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    m: usize,
    settings: &Settings,
) -> Result<ConditionVerdict<T>> {
    let profile = h_profile(a, b, settings)?;
    check_hm_with_profile(&profile, m)
}

pub fn check_hm_with_profile<T>(profile: &HProfile, m: usize) -> Result<ConditionVerdict<T>> {
    for (i, &h) in profile.values.iter().enumerate() {
        let delta = i + 1;
        let need = delta.min(m) as i64;
        if h < need {
            let columns: Vec<usize> = profile.minimizers[i].iter().map(|c| c + 1).collect();
            return Ok(ConditionVerdict::new(Condition::H, m, Status::Fails)
                .note(format!(
                    "H({delta}) = {h} < min({delta}, {m}) = {need}, attained on columns {columns:?}"
                ))
                .with_witness(Witness::Subset {
                    delta,
                    columns,
                    value: h,
                }));
        }
    }
    Ok(ConditionVerdict::new(Condition::H, m, Status::Holds).note(format!(
        "H(delta) >= min(delta, {m}) for delta = 1..={}; H = {:?}",
        profile.values.len(),
        profile.values
    )))
}

/// (Cm): `C_m(A) ⊙ C_m(B)` has full column rank.
pub fn check_cm<T: Field>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    m: usize,
    settings: &Settings,
) -> Result<ConditionVerdict<T>> {
    let r = check_order(a, b, m)?;
    let u = khatri_rao_compound(a, b, m, settings)?;
    Ok(check_cm_with_matrix(&u, r, m, settings))
}

fn check_cm_with_matrix<T: Field>(u: &Matrix<T>, r: usize, m: usize, settings: &Settings) -> ConditionVerdict<T> {
    let report = u.rank_report(settings);
    let expected = u.cols();
    let line = format!(
        "rank of the {}x{} matrix C_{m}(A) ⊙ C_{m}(B) is {} (C({r},{m}) = {expected})",
        u.rows(),
        u.cols(),
        report.rank
    );
    if report.rank == expected {
        ConditionVerdict::new(Condition::C, m, Status::Holds).note(line)
    } else {
        let vector = report
            .kernel_basis
            .into_iter()
            .next()
            .expect("rank deficit implies a kernel vector");
        ConditionVerdict::new(Condition::C, m, Status::Fails)
            .note(line)
            .with_witness(Witness::Kernel {
                vector,
                rank: report.rank,
                expected,
            })
    }
}

/// Re-verifies a (Um) counterexample: `omega(d) >= m` (so `d̂ != 0`) and
/// `r(A Diag(d) B^T) <= m - 1`, which is equivalent to
/// `[C_m(A) ⊙ C_m(B)] d̂ = 0`.
pub fn verify_um_witness<T: Field>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    m: usize,
    d: &[T],
    settings: &Settings,
) -> Result<bool> {
    same_columns(a, b)?;
    if d.len() != a.cols() {
        return Err(Error::domain("witness length differs from R"));
    }
    if support_size(d) < m {
        return Ok(false);
    }
    let inner = a.scale_columns(d).matmul(&b.transpose())?;
    Ok(inner.rank(settings) < m)
}

/// Verifies `U d̂ = 0` and `d̂ != 0` against an explicit
/// `U = C_m(A) ⊙ C_m(B)`.
pub fn annihilates_product_vector<T: Field>(u: &Matrix<T>, d: &[T], m: usize, tol: f64) -> Result<bool> {
    let dhat = product_vector(d, m)?;
    if dhat.iter().all(|x| x.is_zero()) {
        return Ok(false);
    }
    let res = u.mul_vec(&dhat)?;
    let scale = u.max_abs() * dhat.iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max);
    Ok(res.iter().all(|x| x.is_negligible(scale.max(1.0), tol)))
}

fn indicator<T: Field>(r: usize, support: &[usize]) -> Vec<T> {
    let mut d = vec![T::zero(); r];
    for &i in support {
        d[i] = T::one();
    }
    d
}

/// Dependent column subset of size exactly `m` in `A` or `B`, if
/// `min(k_A, k_B) < m`.
fn dependent_m_subset<T: Field>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    m: usize,
    settings: &Settings,
) -> Result<Option<(char, usize, Vec<usize>)>> {
    let r = a.cols();
    for (name, mat) in [('A', a), ('B', b)] {
        let (k, witness) = mat.k_rank_with_witness(settings)?;
        if k < m {
            let mut subset = witness.expect("k-rank below m < R leaves a dependent subset");
            // a superset of a dependent set is dependent
            for j in 0..r {
                if subset.len() == m {
                    break;
                }
                if !subset.contains(&j) {
                    subset.push(j);
                }
            }
            subset.sort_unstable();
            return Ok(Some((name, k, subset)));
        }
    }
    Ok(None)
}

/// (Um): `[C_m(A) ⊙ C_m(B)] d̂ = 0` implies `d̂ = 0`.
///
/// Rules, cheapest first: (Km) proves it; `min(k_A, k_B) < m` refutes it
/// with an indicator witness; (Hm) proves it; (Cm) proves it; a seeded
/// search for product vectors in the kernel may refute it.
pub fn check_um<T: Field>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    m: usize,
    settings: &Settings,
) -> Result<ConditionVerdict<T>> {
    let r = check_order(a, b, m)?;

    let km = check_km(a, b, m, settings)?;
    if km.holds() {
        return Ok(ConditionVerdict::new(Condition::U, m, Status::Holds)
            .note(format!("K{m} holds, and K{m} => C{m} => U{m}"))
            .note(km.provenance.join("; ")));
    }

    if let Some((name, k, subset)) = dependent_m_subset(a, b, m, settings)? {
        let d = indicator::<T>(r, &subset);
        if verify_um_witness(a, b, m, &d, settings)? {
            let cols: Vec<usize> = subset.iter().map(|c| c + 1).collect();
            return Ok(ConditionVerdict::new(Condition::U, m, Status::Fails)
                .note(format!(
                    "k_{name} = {k} < m = {m}: columns {cols:?} of {name} are dependent, their indicator d has exactly one nonzero product"
                ))
                .with_witness(Witness::Vector { d, preimage: None }));
        }
        return Err(Error::Internal(format!(
            "indicator of dependent columns {subset:?} failed verification for U{m}"
        )));
    }

    let mut provenance = vec![format!("K{m} fails")];
    match check_hm(a, b, m, settings) {
        Ok(hm) if hm.holds() => {
            return Ok(ConditionVerdict::new(Condition::U, m, Status::Holds)
                .note(format!("H{m} holds, and H{m} => U{m}"))
                .note(hm.provenance.join("; ")));
        }
        Ok(_) => provenance.push(format!("H{m} fails")),
        Err(Error::CapExceeded { .. }) => provenance.push(format!("H{m} skipped: combinatorial cap")),
        Err(e) => return Err(e),
    }

    let u = khatri_rao_compound(a, b, m, settings)?;
    let cm = check_cm_with_matrix(&u, r, m, settings);
    if cm.holds() {
        return Ok(ConditionVerdict::new(Condition::U, m, Status::Holds)
            .note(format!("C{m} holds, and C{m} => U{m}"))
            .note(cm.provenance.join("; ")));
    }
    provenance.push(format!("C{m} fails: {}", cm.provenance.join("; ")));

    match search_um_counterexample(a, b, &u, m, settings)? {
        Some((d, how)) => {
            let mut v = ConditionVerdict::new(Condition::U, m, Status::Fails);
            v.provenance = provenance;
            Ok(v.note(how).with_witness(Witness::Vector { d, preimage: None }))
        }
        None => {
            let mut v = ConditionVerdict::new(Condition::U, m, Status::Undetermined);
            v.provenance = provenance;
            Ok(v.note("no sound rule applies and the counterexample search found nothing"))
        }
    }
}

/// Column indices of `U` (zero-based ranks in `S_R^m`) for every m-subset
/// of `support`, with the member positions inside `support`.
fn local_columns(support: &[usize], r: usize, m: usize) -> Vec<(usize, Vec<usize>)> {
    Subsets::new(support.len(), m)
        .map(|local| {
            let global: Vec<usize> = local.iter().map(|&p| support[p]).collect();
            (rank_zero_based(&global, r), local)
        })
        .collect()
}

/// Orthonormal basis of the row space of `u`, in floating point. `U d̂ = 0`
/// iff `Q d̂ = 0`, and `Q` has at most `C(R,m)` rows.
fn row_space_basis(u: &Matrix<f64>) -> Vec<Vec<f64>> {
    let n = u.cols();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let scale = u.max_abs().max(f64::MIN_POSITIVE);
    for i in 0..u.rows() {
        let mut v = u.row(i).to_vec();
        for _ in 0..2 {
            for q in &basis {
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= dot * qi;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 * scale * (n as f64).sqrt() {
            basis.push(v.iter().map(|x| x / norm).collect());
        }
        if basis.len() == n {
            break;
        }
    }
    basis
}

/// Looks for `d` with `omega(d) >= m` and `U d̂ = 0`.
///
/// Two probes run in floating point and every candidate is snapped to
/// rationals and verified in the backend's arithmetic: all sign patterns
/// `d in {-1, 0, 1}^R` (when `3^R` is small), then alternating least
/// squares over each support `S` with `|S| > m`. The residual `U d̂` is
/// affine in each single `d_i`, so each inner step is an exact 1-D
/// projection.
fn search_um_counterexample<T: Field>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    u: &Matrix<T>,
    m: usize,
    settings: &Settings,
) -> Result<Option<(Vec<T>, String)>> {
    let r = a.cols();
    let uf = u.map(|x| x.to_f64());
    let q = row_space_basis(&uf);
    let residual = |d: &[f64]| -> f64 {
        let dhat = product_vector(d, m).expect("m <= R");
        let norm = dhat.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return f64::INFINITY;
        }
        let res: f64 = q
            .iter()
            .map(|row| row.iter().zip(&dhat).map(|(a, b)| a * b).sum::<f64>().powi(2))
            .sum::<f64>()
            .sqrt();
        res / norm
    };
    let accept = |df: &[f64]| -> Result<Option<Vec<T>>> {
        let Some(d) = snap::<T>(df) else {
            return Ok(None);
        };
        if verify_um_witness(a, b, m, &d, settings)?
            && annihilates_product_vector(u, &d, m, settings.tolerance)?
        {
            Ok(Some(d))
        } else {
            Ok(None)
        }
    };

    // sign patterns, first nonzero entry +1
    if r <= 9 {
        let total = 3usize.pow(r as u32);
        for code in 0..total {
            let mut c = code;
            let d: Vec<f64> = (0..r)
                .map(|_| {
                    let digit = c % 3;
                    c /= 3;
                    [0.0, 1.0, -1.0][digit]
                })
                .collect();
            if d.iter().find(|x| **x != 0.0) != Some(&1.0) || support_size(&d) <= m {
                continue;
            }
            if residual(&d) < 1e-9 {
                if let Some(found) = accept(&d)? {
                    return Ok(Some((found, "sign-pattern probe found a product vector in the kernel".into())));
                }
            }
        }
    }

    if q.is_empty() {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ ((m as u64) << 32) ^ r as u64);
    for size in (m + 1)..=r {
        for support in Subsets::new(r, size) {
            let cols = local_columns(&support, r, m);
            for _ in 0..settings.search_restarts {
                let mut d = vec![0.0; r];
                for &i in &support {
                    d[i] = rng.random_range(-1.0..1.0);
                }
                if let Some(df) = alternating_projection(&q, &support, &cols, m, &mut d) {
                    if let Some(found) = accept(&df)? {
                        return Ok(Some((
                            found,
                            format!(
                                "alternating-projection search on support {:?} found a product vector in the kernel",
                                support.iter().map(|c| c + 1).collect::<Vec<_>>()
                            ),
                        )));
                    }
                }
            }
        }
    }
    Ok(None)
}

/// One restart of the coordinate-wise projection; returns a converged
/// point with at least `m` nonzero entries.
fn alternating_projection(
    q: &[Vec<f64>],
    support: &[usize],
    cols: &[(usize, Vec<usize>)],
    m: usize,
    d: &mut [f64],
) -> Option<Vec<f64>> {
    let rows = q.len();
    let mut a = vec![0.0; rows];
    let mut b = vec![0.0; rows];
    let mut last = f64::INFINITY;
    for _sweep in 0..60 {
        for (pos, &i) in support.iter().enumerate() {
            a.iter_mut().for_each(|x| *x = 0.0);
            b.iter_mut().for_each(|x| *x = 0.0);
            for (col, members) in cols {
                let mut prod = 1.0;
                let mut contains = false;
                for &p in members {
                    if p == pos {
                        contains = true;
                    } else {
                        prod *= d[support[p]];
                    }
                }
                if prod == 0.0 {
                    continue;
                }
                let target = if contains { &mut a } else { &mut b };
                for (t, row) in target.iter_mut().zip(q) {
                    *t += row[*col] * prod;
                }
            }
            let aa: f64 = a.iter().map(|x| x * x).sum();
            if aa > 1e-300 {
                let ab: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
                d[i] = -ab / aa;
            }
        }
        let peak = d.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if peak == 0.0 || !peak.is_finite() {
            return None;
        }
        d.iter_mut().for_each(|x| *x /= peak);
        if d.iter().filter(|x| x.abs() > 1e-8).count() < m {
            return None;
        }
        // residual of the current point
        let mut res = vec![0.0; rows];
        let mut dhat_norm = 0.0;
        for (col, members) in cols {
            let prod: f64 = members.iter().map(|&p| d[support[p]]).product();
            dhat_norm += prod * prod;
            for (t, row) in res.iter_mut().zip(q) {
                *t += row[*col] * prod;
            }
        }
        let rel = res.iter().map(|x| x * x).sum::<f64>().sqrt() / dhat_norm.sqrt().max(1e-300);
        if rel < 1e-12 {
            return Some(d.to_vec());
        }
        if (last - rel).abs() < 1e-15 * last.max(1.0) {
            return None;
        }
        last = rel;
    }
    None
}

/// Normalizes by the largest entry and snaps to rationals with bounded
/// denominators.
fn snap<T: Field>(d: &[f64]) -> Option<Vec<T>> {
    let (imax, peak) = d
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.abs().partial_cmp(&y.1.abs()).unwrap_or(std::cmp::Ordering::Equal))?;
    if *peak == 0.0 {
        return None;
    }
    let peak = d[imax];
    d.iter()
        .map(|x| {
            let v = x / peak;
            if v.abs() < 1e-9 {
                Some(T::zero())
            } else {
                rational_reconstruct(v, RECONSTRUCTION_MAX_DENOMINATOR, 1e-7).map(|q| T::from_rational(&q))
            }
        })
        .collect()
}

/// (Wm): like (Um), restricted to `d in range(C^T)`.
///
/// Holds when (Um) holds, or when the structural analysis refutes every
/// support pattern compatible with `range(C^T)`. Fails with `d` and an
/// explicit `x` satisfying `d = C^T x`.
pub fn check_wm<T: Field>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    c: &Matrix<T>,
    m: usize,
    settings: &Settings,
) -> Result<ConditionVerdict<T>> {
    let r = check_order(a, b, m)?;
    if c.cols() != r {
        return Err(Error::domain(format!(
            "C has {} columns, expected R = {r}",
            c.cols()
        )));
    }
    let um = check_um(a, b, m, settings)?;
    let ct = c.transpose();
    match (&um.status, &um.witness) {
        (Status::Holds, _) => {
            return Ok(ConditionVerdict::new(Condition::W, m, Status::Holds)
                .note(format!("U{m} holds, and U{m} => W{m}"))
                .note(um.provenance.join("; ")));
        }
        (Status::Fails, Some(Witness::Vector { d, .. })) => {
            if let Some(x) = ct.solve(d, settings)? {
                if in_row_space(&ct, &x, d, settings.tolerance)? {
                    return Ok(ConditionVerdict::new(Condition::W, m, Status::Fails)
                        .note(format!("the U{m} counterexample lies in range(C^T)"))
                        .note(um.provenance.join("; "))
                        .with_witness(Witness::Vector {
                            d: d.clone(),
                            preimage: Some(x),
                        }));
                }
            }
        }
        _ => {}
    }
    let u = khatri_rao_compound(a, b, m, settings)?;
    let structural = structural_wm(&u, c, m, settings)?;
    let mut v = match structural {
        Structural::Holds(lines) => {
            let mut v = ConditionVerdict::new(Condition::W, m, Status::Holds);
            v.provenance = lines;
            v
        }
        Structural::Fails { d, x, lines } => {
            let mut v = ConditionVerdict::new(Condition::W, m, Status::Fails);
            v.provenance = lines;
            v.with_witness(Witness::Vector { d, preimage: Some(x) })
        }
        Structural::Open(lines) => {
            let mut v = ConditionVerdict::new(Condition::W, m, Status::Undetermined);
            v.provenance = lines;
            v
        }
    };
    v.provenance.insert(0, format!("U{m} {}: {}", um.status, um.provenance.join("; ")));
    if let Some(Witness::Vector { d, preimage: Some(x) }) = &v.witness {
        if !in_row_space(&ct, x, d, settings.tolerance)? || !annihilates_product_vector(&u, d, m, settings.tolerance)? {
            return Err(Error::Internal(format!("W{m} witness failed re-verification")));
        }
    }
    Ok(v)
}

fn in_row_space<T: Field>(ct: &Matrix<T>, x: &[T], d: &[T], tol: f64) -> Result<bool> {
    let scale = ct.max_abs().max(1.0) * x.iter().map(|v| v.to_f64().abs()).fold(1.0, f64::max);
    Ok(ct
        .mul_vec(x)?
        .iter()
        .zip(d)
        .all(|(l, r)| (l.clone() - r.clone()).is_negligible(scale, tol)))
}

enum Structural<T> {
    Holds(Vec<String>),
    Fails { d: Vec<T>, x: Vec<T>, lines: Vec<String> },
    Open(Vec<String>),
}

/// Homogeneous polynomial: exponent vector -> coefficient.
type Poly<T> = BTreeMap<Vec<u32>, T>;

fn poly_mul<T: Field>(p: &Poly<T>, q: &Poly<T>) -> Poly<T> {
    let mut out: Poly<T> = BTreeMap::new();
    for (e1, c1) in p {
        for (e2, c2) in q {
            let e: Vec<u32> = e1.iter().zip(e2).map(|(x, y)| x + y).collect();
            let v = c1.clone() * c2.clone();
            let slot = out.entry(e).or_insert_with(T::zero);
            *slot = slot.clone() + v;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn linear_poly<T: Field>(form: &[T]) -> Poly<T> {
    let p = form.len();
    form.iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(i, c)| {
            let mut e = vec![0u32; p];
            e[i] = 1;
            (e, c.clone())
        })
        .collect()
}

fn poly_is_negligible<T: Field>(p: &Poly<T>, tol: f64) -> bool {
    let scale = p.values().map(|c| c.to_f64().abs()).fold(1.0, f64::max);
    p.values().all(|c| c.is_negligible(scale, tol))
}

/// Is `p` a scalar multiple of `q` (both nonzero)?
fn proportional<T: Field>(p: &Poly<T>, q: &Poly<T>, tol: f64) -> bool {
    let Some((e, qc)) = q.iter().next() else {
        return false;
    };
    let Some(pc) = p.get(e) else {
        return false;
    };
    let ratio = pc.clone() / qc.clone();
    let scale = p.values().map(|c| c.to_f64().abs()).fold(1.0, f64::max);
    let keys: std::collections::BTreeSet<&Vec<u32>> = p.keys().chain(q.keys()).collect();
    keys.into_iter().all(|k| {
        let pv = p.get(k).cloned().unwrap_or_else(T::zero);
        let qv = q.get(k).cloned().unwrap_or_else(T::zero);
        (pv - ratio.clone() * qv).is_negligible(scale, tol)
    })
}

fn is_proportional_vec<T: Field>(x: &[T], y: &[T], tol: f64) -> bool {
    // rank of [x y] below 2
    let n = x.len();
    for i in 0..n {
        for j in i + 1..n {
            let det = x[i].clone() * y[j].clone() - x[j].clone() * y[i].clone();
            let scale = [&x[i], &x[j], &y[i], &y[j]]
                .iter()
                .map(|v| v.to_f64().abs())
                .fold(1.0, f64::max);
            if !det.is_negligible(scale * scale, tol) {
                return false;
            }
        }
    }
    true
}

/// All multisets of size `m` over `0..q`, as nondecreasing vectors.
fn multisets(q: usize, m: usize, limit: usize) -> Option<Vec<Vec<usize>>> {
    let count = crate::combinatorics::binomial(q + m - 1, m)?;
    if count > limit as u128 {
        return None;
    }
    let mut out = Vec::new();
    let mut cur = vec![0usize; m];
    loop {
        out.push(cur.clone());
        let mut p = m;
        loop {
            if p == 0 {
                return Some(out);
            }
            p -= 1;
            if cur[p] + 1 < q {
                let v = cur[p] + 1;
                for slot in cur[p..].iter_mut() {
                    *slot = v;
                }
                break;
            }
        }
    }
}

/// `y = (1, t, t^2, ...)` for the first `t = 1, 2, ...` avoiding every
/// hyperplane `form . y = 0`.
fn avoid_hyperplanes<T: Field>(forms: &[Vec<T>], p: usize, tol: f64) -> Vec<T> {
    let tries = forms.len() * p.max(1) + 2;
    for t in 1..=tries as i64 {
        let mut y = Vec::with_capacity(p);
        let mut pow = T::one();
        for _ in 0..p {
            y.push(pow.clone());
            pow = pow * T::from_i64(t);
        }
        if forms.iter().all(|f| !dot(f, &y).is_negligible(1.0, tol)) {
            return y;
        }
    }
    // A nonzero polynomial in t of degree < tries has fewer roots than
    // tries, so this is unreachable for nonzero forms.
    vec![T::one(); p]
}

fn dot<T: Field>(x: &[T], y: &[T]) -> T {
    x.iter()
        .zip(y)
        .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
}

/// Case analysis on the support `T` of `d = C^T x`.
///
/// For `d̂ != 0` with `U d̂ = 0`, the support `T` has `|T| >= m` and must be
/// realizable in `range(C^T)`: `d_i = 0` off `T` is a linear subspace
/// `x = N y`, and `d_i != 0` on `T` avoids finitely many hyperplanes. Each
/// realizable pattern is then refuted or confirmed:
/// - the m-subsets of `T` index only zero columns of `U`: any realization
///   is a counterexample;
/// - the nonzero columns of `U` inside `T` are independent: every product
///   there is nonzero, so `U d̂ = 0` is impossible;
/// - otherwise `U d̂(N y)` is a system of degree-m forms in `y`; a form
///   that is a constant times a product of the nonvanishing linear forms
///   `d_i(y)`, `i in T`, refutes the pattern, an identically vanishing
///   system confirms it, and a small integer grid is scanned for
///   solutions. Anything else leaves the pattern open.
fn structural_wm<T: Field>(
    u: &Matrix<T>,
    c: &Matrix<T>,
    m: usize,
    settings: &Settings,
) -> Result<Structural<T>> {
    let r = c.cols();
    let tol = settings.tolerance;
    let zero_cols = u.zero_columns(tol);
    let rank_c = c.rank(settings);
    let mut lines = vec![format!(
        "C_{m}(A) ⊙ C_{m}(B) has {} zero columns; rank(C) = {rank_c}",
        zero_cols.len()
    )];
    if zero_cols.len() > STRUCTURAL_MAX_ZERO_COLUMNS || rank_c > STRUCTURAL_MAX_RANK_C {
        lines.push(format!(
            "structural analysis not attempted (needs at most {STRUCTURAL_MAX_ZERO_COLUMNS} zero columns and rank(C) <= {STRUCTURAL_MAX_RANK_C})"
        ));
        return Ok(Structural::Open(lines));
    }
    if r >= 64 || (1u64 << r) > settings.cap {
        lines.push(format!("structural analysis not attempted: 2^{r} support patterns exceed the cap"));
        return Ok(Structural::Open(lines));
    }
    let zero_set: std::collections::BTreeSet<usize> = zero_cols.iter().cloned().collect();
    let ct = c.transpose();
    let u_scale = u.max_abs().max(1.0);
    let mut realizable = 0usize;
    let mut open: Vec<String> = Vec::new();
    for size in m..=r {
        for support in Subsets::new(r, size) {
            let off: Vec<usize> = (0..r).filter(|i| !support.contains(i)).collect();
            // x with d_i = 0 off the support
            let kernel: Vec<Vec<T>> = if off.is_empty() {
                (0..c.rows())
                    .map(|j| (0..c.rows()).map(|i| if i == j { T::one() } else { T::zero() }).collect())
                    .collect()
            } else {
                ct.select_rows(&off).rank_report(settings).kernel_basis
            };
            let p = kernel.len();
            if p == 0 {
                continue;
            }
            let n_mat = Matrix::from_columns(c.rows(), &kernel)?;
            let forms_mat = ct.select_rows(&support).matmul(&n_mat)?;
            let forms: Vec<Vec<T>> = (0..support.len()).map(|i| forms_mat.row(i).to_vec()).collect();
            let form_scale = forms_mat.max_abs().max(1.0);
            if forms
                .iter()
                .any(|f| f.iter().all(|v| v.is_negligible(form_scale, tol)))
            {
                continue;
            }
            realizable += 1;
            let label: Vec<usize> = support.iter().map(|i| i + 1).collect();
            let cols = local_columns(&support, r, m);
            let nonzero: Vec<usize> = cols
                .iter()
                .map(|(g, _)| *g)
                .filter(|g| !zero_set.contains(g))
                .collect();

            let realize = |y: Vec<T>| -> Result<(Vec<T>, Vec<T>)> {
                let x = n_mat.mul_vec(&y)?;
                let d = ct.mul_vec(&x)?;
                Ok((d, x))
            };

            if nonzero.is_empty() {
                let y = avoid_hyperplanes(&forms, p, tol);
                let (d, x) = realize(y)?;
                if annihilates_product_vector(u, &d, m, tol)? {
                    lines.push(format!(
                        "support {label:?} is realizable in range(C^T) and only meets zero columns"
                    ));
                    return Ok(Structural::Fails { d, x, lines });
                }
            }

            let u_nz = u.select_columns(&nonzero);
            if u_nz.rank(settings) == nonzero.len() && !nonzero.is_empty() {
                continue;
            }

            // polynomial system in y
            let local_u = u.select_columns(&cols.iter().map(|(g, _)| *g).collect::<Vec<_>>());
            let (reduced, _) = rref(&local_u, tol);
            let linear: Vec<Poly<T>> = forms.iter().map(|f| linear_poly(f)).collect();
            let monomials: Vec<Poly<T>> = cols
                .iter()
                .map(|(_, members)| {
                    members
                        .iter()
                        .skip(1)
                        .fold(linear[members[0]].clone(), |acc, &pos| poly_mul(&acc, &linear[pos]))
                })
                .collect();
            let mut system: Vec<Poly<T>> = Vec::new();
            for i in 0..reduced.rows() {
                let mut poly: Poly<T> = BTreeMap::new();
                for (j, mono) in monomials.iter().enumerate() {
                    let coef = reduced.get(i, j);
                    if coef.is_negligible(u_scale, tol) {
                        continue;
                    }
                    for (e, v) in mono {
                        let slot = poly.entry(e.clone()).or_insert_with(T::zero);
                        *slot = slot.clone() + coef.clone() * v.clone();
                    }
                }
                poly.retain(|_, v| !v.is_zero());
                if !poly_is_negligible(&poly, tol) {
                    system.push(poly);
                }
            }
            if system.is_empty() {
                let y = avoid_hyperplanes(&forms, p, tol);
                let (d, x) = realize(y)?;
                if annihilates_product_vector(u, &d, m, tol)? {
                    lines.push(format!(
                        "support {label:?} is realizable and U d̂ vanishes identically on it"
                    ));
                    return Ok(Structural::Fails { d, x, lines });
                }
                open.push(format!("{label:?}"));
                continue;
            }
            // distinct nonvanishing forms up to scaling
            let mut distinct: Vec<Poly<T>> = Vec::new();
            let mut distinct_raw: Vec<&Vec<T>> = Vec::new();
            for (f, lp) in forms.iter().zip(&linear) {
                if !distinct_raw.iter().any(|g| is_proportional_vec(f, g, tol)) {
                    distinct_raw.push(f);
                    distinct.push(lp.clone());
                }
            }
            let refuted = multisets(distinct.len(), m, 20_000).is_some_and(|sets| {
                sets.iter().any(|set| {
                    let prod = set
                        .iter()
                        .skip(1)
                        .fold(distinct[set[0]].clone(), |acc, &i| poly_mul(&acc, &distinct[i]));
                    system.iter().any(|poly| proportional(poly, &prod, tol))
                })
            });
            if refuted {
                continue;
            }
            // small integer grid
            let grid: Vec<i64> = vec![0, 1, -1, 2, -2];
            let points = grid.len().checked_pow(p as u32).unwrap_or(usize::MAX);
            let mut found = None;
            if points <= 4096 {
                for code in 0..points {
                    let mut cc = code;
                    let y: Vec<T> = (0..p)
                        .map(|_| {
                            let v = grid[cc % grid.len()];
                            cc /= grid.len();
                            T::from_i64(v)
                        })
                        .collect();
                    if forms.iter().any(|f| dot(f, &y).is_negligible(form_scale, tol)) {
                        continue;
                    }
                    let (d, x) = realize(y)?;
                    if annihilates_product_vector(u, &d, m, tol)? {
                        found = Some((d, x));
                        break;
                    }
                }
            }
            if let Some((d, x)) = found {
                lines.push(format!(
                    "support {label:?}: integer grid point solves the polynomial system"
                ));
                return Ok(Structural::Fails { d, x, lines });
            }
            open.push(format!("{label:?}"));
        }
    }
    if open.is_empty() {
        lines.push(format!(
            "every one of the {realizable} support patterns of size >= {m} realizable in range(C^T) is refuted"
        ));
        Ok(Structural::Holds(lines))
    } else {
        lines.push(format!(
            "{} support pattern(s) left open: {}",
            open.len(),
            open.iter().take(8).cloned().collect::<Vec<_>>().join(", ")
        ));
        Ok(Structural::Open(lines))
    }
}

/// `m = R - r_C + 2`.
pub fn m_for_c<T: Field>(c: &Matrix<T>, settings: &Settings) -> usize {
    c.cols() + 2 - c.rank(settings)
}
