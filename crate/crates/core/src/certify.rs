//! Uniqueness certificates assembled from condition verdicts.
//!
//! A certificate records an ordered chain of rule applications, each with
//! the named result it relies on and the verdict it produced, plus enough
//! metadata (matrix hashes, backend, tolerance, seed, version) to replay
//! it.

use std::fmt;

use sha2::{Digest, Sha256};

use crate::conditions::{
    check_cm, check_hm, check_km, check_um, check_wm, ConditionVerdict, Status, Witness,
};
use crate::error::{Error, Result};
use crate::linalg::{khatri_rao, Field, Matrix};
use crate::settings::Settings;
use crate::tensor::FactorTriple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Conclusion {
    OverallUnique,
    ThirdFactorUnique,
    NotUnique,
    Undetermined,
}

impl Conclusion {
    pub fn as_str(&self) -> &'static str {
        match self {
            Conclusion::OverallUnique => "overall_unique",
            Conclusion::ThirdFactorUnique => "third_factor_unique",
            Conclusion::NotUnique => "not_unique",
            Conclusion::Undetermined => "undetermined",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Conclusion::OverallUnique,
            Conclusion::ThirdFactorUnique,
            Conclusion::NotUnique,
            Conclusion::Undetermined,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Conclusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One rule application.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStep<T> {
    pub rule: String,
    pub reference: String,
    pub status: Status,
    pub details: Vec<String>,
    pub witness: Option<Witness<T>>,
}

impl<T: Clone> ChainStep<T> {
    fn new(rule: impl Into<String>, reference: impl Into<String>, status: Status) -> Self {
        ChainStep {
            rule: rule.into(),
            reference: reference.into(),
            status,
            details: Vec::new(),
            witness: None,
        }
    }

    fn detail(mut self, line: impl Into<String>) -> Self {
        self.details.push(line.into());
        self
    }

    fn from_verdict(rule: impl Into<String>, reference: impl Into<String>, v: &ConditionVerdict<T>) -> Self {
        ChainStep {
            rule: rule.into(),
            reference: reference.into(),
            status: v.status,
            details: v.provenance.clone(),
            witness: v.witness.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reproducibility {
    /// SHA-256 of the canonical text of A, B and C, in input order.
    pub matrix_hashes: [String; 3],
    pub backend: String,
    pub tolerance: f64,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessCertificate<T> {
    pub conclusion: Conclusion,
    /// Which input factor (1, 2 or 3) played the role of `C`; for overall
    /// certificates, the factor used by the deciding rule, if any.
    pub target_mode: u8,
    pub m_used: Option<usize>,
    pub chain: Vec<ChainStep<T>>,
    pub reproducibility: Reproducibility,
}

impl<T: Clone> UniquenessCertificate<T> {
    /// Witnesses of every failed step, labelled by rule.
    pub fn witnesses(&self) -> Vec<(String, Witness<T>)> {
        self.chain
            .iter()
            .filter(|s| s.status == Status::Fails)
            .filter_map(|s| s.witness.clone().map(|w| (s.rule.clone(), w)))
            .collect()
    }
}

/// SHA-256 over `rows x cols` followed by the entries in row-major order.
pub fn matrix_hash<T: Field>(m: &Matrix<T>) -> String {
    let mut h = Sha256::new();
    h.update(format!("{}x{}", m.rows(), m.cols()).as_bytes());
    for v in m.data() {
        h.update(b";");
        h.update(v.to_text().as_bytes());
    }
    hex::encode(h.finalize())
}

fn reproducibility<T: Field>(f: &FactorTriple<T>, settings: &Settings) -> Reproducibility {
    Reproducibility {
        matrix_hashes: [matrix_hash(&f.a), matrix_hash(&f.b), matrix_hash(&f.c)],
        backend: T::BACKEND.to_string(),
        tolerance: settings.tolerance,
        seed: settings.seed,
        version: crate::VERSION.to_string(),
    }
}

/// Cyclic relabeling that puts factor `target` in third position:
/// 1 gives `(B, C, A)`, 2 gives `(C, A, B)`, 3 is the identity.
pub fn mode_rotate<T: Field>(f: &FactorTriple<T>, target: u8) -> Result<FactorTriple<T>> {
    let (a, b, c) = (f.a.clone(), f.b.clone(), f.c.clone());
    match target {
        1 => Ok(FactorTriple { a: b, b: c, c: a }),
        2 => Ok(FactorTriple { a: c, b: a, c: b }),
        3 => Ok(FactorTriple { a, b, c }),
        other => Err(Error::domain(format!("target mode {other} is not 1, 2 or 3"))),
    }
}

/// Target equivalent to rotating by `first` and then by `second`.
pub fn compose_targets(first: u8, second: u8) -> u8 {
    match (first % 3 + second % 3) % 3 {
        0 => 3,
        s => s,
    }
}

const NAMES: [char; 3] = ['A', 'B', 'C'];

fn zero_column_step<T: Field>(f: &FactorTriple<T>, tol: f64, names: [char; 3]) -> Option<ChainStep<T>> {
    for (m, name) in f.factors().into_iter().zip(names) {
        if let Some(&j) = m.zero_columns(tol).first() {
            return Some(
                ChainStep::new("zero column", "Theorem 1.9(i)", Status::Fails)
                    .detail(format!(
                        "column {} of {name} is zero: the rank-1 term vanishes, r_T < R, and the Khatri-Rao products involving {name} lose full column rank",
                        j + 1
                    ))
                    .with_subset(j),
            );
        }
    }
    None
}

impl<T: Clone> ChainStep<T> {
    fn with_subset(mut self, j: usize) -> Self {
        self.witness = Some(Witness::Subset {
            delta: 1,
            columns: vec![j + 1],
            value: 0,
        });
        self
    }
}

/// Uniqueness of the factor in position `target` of the triple.
pub fn certify_third_factor<T: Field>(
    f: &FactorTriple<T>,
    target: u8,
    settings: &Settings,
) -> Result<UniquenessCertificate<T>> {
    let rotated = mode_rotate(f, target)?;
    let names = match target {
        1 => ['B', 'C', 'A'],
        2 => ['C', 'A', 'B'],
        _ => NAMES,
    };
    let (conclusion, m_used, chain) = third_factor_chain(&rotated, settings, names)?;
    Ok(UniquenessCertificate {
        conclusion,
        target_mode: target,
        m_used,
        chain,
        reproducibility: reproducibility(f, settings),
    })
}

type Chain<T> = (Conclusion, Option<usize>, Vec<ChainStep<T>>);

fn third_factor_chain<T: Field>(f: &FactorTriple<T>, settings: &Settings, names: [char; 3]) -> Result<Chain<T>> {
    let (a, b, c) = (&f.a, &f.b, &f.c);
    let r = f.r();
    let (i_dim, j_dim, _) = f.dims();
    let mut chain = Vec::new();
    if let Some(step) = zero_column_step(f, settings.tolerance, names) {
        chain.push(step);
        return Ok((Conclusion::NotUnique, None, chain));
    }
    if r == 1 {
        chain.push(
            ChainStep::new("R = 1", "Definition 1.1", Status::Holds)
                .detail("a single nonzero rank-1 term determines each factor up to scaling"),
        );
        return Ok((Conclusion::ThirdFactorUnique, None, chain));
    }
    let r_c = c.rank(settings);
    let m = r + 2 - r_c;
    chain.push(
        ChainStep::new("m = R - r_C + 2", "Proposition 4.3", Status::Holds)
            .detail(format!("R = {r}, r_C = {r_c}, m = {m}; k_C >= 1 since C has no zero column")),
    );
    let bound = i_dim.min(j_dim).min(r);
    if m > bound {
        chain.push(
            ChainStep::new("m <= min(I, J)", "Proposition 4.3", Status::Undetermined)
                .detail(format!("m = {m} exceeds min(I, J, R) = {bound}, so no compound condition of order m is defined")),
        );
        return Ok((Conclusion::Undetermined, Some(m), chain));
    }

    let km = check_km(a, b, m, settings)?;
    chain.push(ChainStep::from_verdict(format!("K{m}"), "Corollary 4.5", &km));
    if km.holds() {
        let cm = check_cm(a, b, m, settings)?;
        if cm.fails() {
            return Err(Error::Internal(format!("K{m} holds but C{m} fails")));
        }
        match check_hm(a, b, m, settings) {
            Ok(hm) if hm.fails() => return Err(Error::Internal(format!("K{m} holds but H{m} fails"))),
            Ok(_) | Err(Error::CapExceeded { .. }) => {}
            Err(e) => return Err(e),
        }
        return Ok((Conclusion::ThirdFactorUnique, Some(m), chain));
    }

    match check_hm(a, b, m, settings) {
        Ok(hm) => {
            chain.push(ChainStep::from_verdict(format!("H{m}"), "Theorem 1.5", &hm));
            if hm.holds() {
                return Ok((Conclusion::ThirdFactorUnique, Some(m), chain));
            }
        }
        Err(Error::CapExceeded { n, k, value, cap }) => chain.push(
            ChainStep::new(format!("H{m}"), "Theorem 1.5", Status::Undetermined)
                .detail(format!("skipped: C({n},{k}) = {value} exceeds the cap {cap}")),
        ),
        Err(e) => return Err(e),
    }

    let cm = check_cm(a, b, m, settings)?;
    chain.push(ChainStep::from_verdict(format!("C{m}"), "Corollary 4.4", &cm));
    if cm.holds() {
        return Ok((Conclusion::ThirdFactorUnique, Some(m), chain));
    }

    let um = check_um(a, b, m, settings)?;
    chain.push(ChainStep::from_verdict(format!("U{m}"), "Proposition 4.3", &um));
    if um.holds() {
        return Ok((Conclusion::ThirdFactorUnique, Some(m), chain));
    }

    // Wm route: k-rank floor and A ⊙ B of full column rank
    let ka = a.k_rank(settings)?;
    let kb = b.k_rank(settings)?;
    let kr_rank = khatri_rao(a, b)?.rank(settings);
    let floor_ok = ka.min(kb) + 1 >= m;
    let kr_ok = kr_rank == r;
    chain.push(
        ChainStep::new(
            "min(k_A, k_B) >= m - 1",
            "Corollary 4.9",
            if floor_ok { Status::Holds } else { Status::Fails },
        )
        .detail(format!("k_A = {ka}, k_B = {kb}, m - 1 = {}", m - 1)),
    );
    chain.push(
        ChainStep::new("C1", "Corollary 4.9", if kr_ok { Status::Holds } else { Status::Fails })
            .detail(format!("rank(A ⊙ B) = {kr_rank}, R = {r}")),
    );
    if !kr_ok {
        return Ok((Conclusion::Undetermined, Some(m), chain));
    }
    let wm = check_wm(a, b, c, m, settings)?;
    if floor_ok {
        chain.push(ChainStep::from_verdict(format!("W{m}+Corollary 4.9"), "Corollary 4.9", &wm));
        if wm.holds() {
            return Ok((Conclusion::ThirdFactorUnique, Some(m), chain));
        }
        return Ok((Conclusion::Undetermined, Some(m), chain));
    }
    chain.push(ChainStep::from_verdict(format!("W{m}"), "Proposition 4.8", &wm));
    if !wm.holds() {
        return Ok((Conclusion::Undetermined, Some(m), chain));
    }
    // without the floor, every lower order must be checked
    for k in (1..m).rev() {
        let wk = check_wm(a, b, c, k, settings)?;
        let holds = wk.holds();
        chain.push(ChainStep::from_verdict(format!("W{k}"), "Proposition 4.8", &wk));
        if !holds {
            return Ok((Conclusion::Undetermined, Some(m), chain));
        }
    }
    chain.push(
        ChainStep::new(format!("W{m}..W1+Proposition 4.8"), "Proposition 4.8", Status::Holds)
            .detail(format!("W{m}, ..., W1 hold and A ⊙ B has full column rank")),
    );
    Ok((Conclusion::ThirdFactorUnique, Some(m), chain))
}

/// Overall uniqueness of the decomposition `[A, B, C]_R`.
pub fn certify_overall<T: Field>(f: &FactorTriple<T>, settings: &Settings) -> Result<UniquenessCertificate<T>> {
    let (conclusion, target, m_used, chain) = overall_chain(f, settings)?;
    Ok(UniquenessCertificate {
        conclusion,
        target_mode: target,
        m_used,
        chain,
        reproducibility: reproducibility(f, settings),
    })
}

fn pair_name(target: u8) -> (char, char, char) {
    match target {
        1 => ('B', 'C', 'A'),
        2 => ('C', 'A', 'B'),
        _ => ('A', 'B', 'C'),
    }
}

/// Conclusion, target mode, order used, and the chain.
type ChainOutcome<T> = (Conclusion, u8, Option<usize>, Vec<ChainStep<T>>);

fn overall_chain<T: Field>(f: &FactorTriple<T>, settings: &Settings) -> Result<ChainOutcome<T>> {
    let r = f.r();
    let mut chain = Vec::new();
    if let Some(step) = zero_column_step(f, settings.tolerance, NAMES) {
        chain.push(step);
        return Ok((Conclusion::NotUnique, 3, None, chain));
    }
    if r == 1 {
        chain.push(
            ChainStep::new("R = 1", "Definition 1.1", Status::Holds)
                .detail("a single nonzero rank-1 term is unique up to scaling"),
        );
        return Ok((Conclusion::OverallUnique, 3, None, chain));
    }

    // full-column-rank factor plus U2 for the other two
    for target in [3u8, 1, 2] {
        let g = mode_rotate(f, target)?;
        let (pa, pb, pc) = pair_name(target);
        let rank = g.c.rank(settings);
        if rank != r {
            continue;
        }
        if g.a.rows().min(g.b.rows()) < 2 {
            continue;
        }
        let um = check_um(&g.a, &g.b, 2, settings)?;
        chain.push(
            ChainStep::from_verdict(format!("U2({pa},{pb})"), "Theorem 1.6", &um)
                .detail(format!("r_{pc} = {rank} = R")),
        );
        if um.holds() {
            return Ok((Conclusion::OverallUnique, target, Some(2), chain));
        }
        if um.fails() {
            chain.push(
                ChainStep::new(format!("U2({pa},{pb}) necessary"), "Theorem 1.10", Status::Fails)
                    .detail(format!("r_{pc} = R and U2 fails for ({pa},{pb})")),
            );
            return Ok((Conclusion::NotUnique, target, Some(2), chain));
        }
    }

    let ks: Vec<usize> = f
        .factors()
        .iter()
        .map(|m| m.k_rank(settings))
        .collect::<Result<_>>()?;
    let sum: usize = ks.iter().sum();
    let kruskal = sum >= 2 * r + 2;
    chain.push(
        ChainStep::new(
            "Kruskal",
            "Theorem 1.3",
            if kruskal { Status::Holds } else { Status::Fails },
        )
        .detail(format!(
            "k_A + k_B + k_C = {} + {} + {} = {sum} {} 2R + 2 = {}",
            ks[0],
            ks[1],
            ks[2],
            if kruskal { ">=" } else { "<" },
            2 * r + 2
        )),
    );
    if kruskal {
        return Ok((Conclusion::OverallUnique, 3, None, chain));
    }

    // necessary conditions
    for (k, name) in ks.iter().zip(NAMES) {
        if *k < 2 {
            let (_, witness) = f.factors()[NAMES.iter().position(|&c| c == name).unwrap()]
                .k_rank_with_witness(settings)?;
            let mut step = ChainStep::new("min k-rank >= 2", "Theorem 1.9(ii)", Status::Fails)
                .detail(format!("k_{name} = {k} < 2"));
            if let Some(cols) = witness {
                step.witness = Some(Witness::Subset {
                    delta: cols.len(),
                    columns: cols.iter().map(|c| c + 1).collect(),
                    value: *k as i64,
                });
            }
            chain.push(step);
            return Ok((Conclusion::NotUnique, 3, None, chain));
        }
    }
    for (x, y, nx, ny) in [
        (&f.a, &f.b, 'A', 'B'),
        (&f.b, &f.c, 'B', 'C'),
        (&f.c, &f.a, 'C', 'A'),
    ] {
        let kr = khatri_rao(x, y)?;
        let report = kr.rank_report(settings);
        if report.rank < r {
            let mut step = ChainStep::new(format!("{nx} ⊙ {ny} full column rank"), "Theorem 1.9(i)", Status::Fails)
                .detail(format!("rank({nx} ⊙ {ny}) = {} < R = {r}", report.rank));
            step.witness = Some(Witness::Kernel {
                vector: report.kernel_basis[0].clone(),
                rank: report.rank,
                expected: r,
            });
            chain.push(step);
            return Ok((Conclusion::NotUnique, 3, None, chain));
        }
    }
    chain.push(ChainStep::new("Khatri-Rao products full column rank", "Theorem 1.9", Status::Holds));
    for (x, y, nx, ny) in [
        (&f.a, &f.b, 'A', 'B'),
        (&f.b, &f.c, 'B', 'C'),
        (&f.c, &f.a, 'C', 'A'),
    ] {
        if x.rows().min(y.rows()) < 2 {
            // C_2 undefined; U2 cannot be evaluated for this pair
            continue;
        }
        let um = check_um(x, y, 2, settings)?;
        let failed = um.fails();
        chain.push(ChainStep::from_verdict(format!("U2({nx},{ny})"), "Theorem 1.10", &um));
        if failed {
            return Ok((Conclusion::NotUnique, 3, Some(2), chain));
        }
    }
    Ok((Conclusion::Undetermined, 3, None, chain))
}
