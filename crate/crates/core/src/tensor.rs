//! Third-order tensors built from factor matrices, their reshapes, and
//! equivalence of factor triples up to permutation and scaling.
//!
//! Layout: entry `t_{ijk}` (1-based) lives at flat position
//! `(i-1)JK + (j-1)K + k`, so a rank-1 term `a∘b∘c` flattens to `a⊗b⊗c`
//! and the `IJ x K` unfolding of `[A, B, C]_R` is `(A ⊙ B) C^T`.

use crate::error::{Error, Result};
use crate::linalg::{Field, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    dims: (usize, usize, usize),
    entries: Vec<T>,
}

impl<T: Field> Tensor3<T> {
    pub fn new(dims: (usize, usize, usize), entries: Vec<T>) -> Result<Self> {
        if entries.len() != dims.0 * dims.1 * dims.2 {
            return Err(Error::domain(format!(
                "{} entries for a {}x{}x{} tensor",
                entries.len(),
                dims.0,
                dims.1,
                dims.2
            )));
        }
        Ok(Tensor3 { dims, entries })
    }

    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Tensor3 {
            dims,
            entries: vec![T::zero(); dims.0 * dims.1 * dims.2],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        let (_, jd, kd) = self.dims;
        (i * jd + j) * kd + k
    }

    /// Zero-based access.
    pub fn get(&self, i: usize, j: usize, k: usize) -> &T {
        &self.entries[self.offset(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: T) {
        let o = self.offset(i, j, k);
        self.entries[o] = v;
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn add(&self, other: &Tensor3<T>) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::domain("tensor dimensions differ"));
        }
        Ok(Tensor3 {
            dims: self.dims,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        })
    }
}

/// `(A, B, C)` with a common number of columns `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTriple<T> {
    pub a: Matrix<T>,
    pub b: Matrix<T>,
    pub c: Matrix<T>,
}

impl<T: Field> FactorTriple<T> {
    pub fn new(a: Matrix<T>, b: Matrix<T>, c: Matrix<T>) -> Result<Self> {
        if a.cols() != b.cols() || a.cols() != c.cols() {
            return Err(Error::domain(format!(
                "factor matrices have {}, {} and {} columns",
                a.cols(),
                b.cols(),
                c.cols()
            )));
        }
        if a.cols() == 0 {
            return Err(Error::domain("factor matrices need at least one column"));
        }
        Ok(FactorTriple { a, b, c })
    }

    pub fn r(&self) -> usize {
        self.a.cols()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.rows(), self.b.rows(), self.c.rows())
    }

    pub fn factors(&self) -> [&Matrix<T>; 3] {
        [&self.a, &self.b, &self.c]
    }
}

/// `t_{ijk} = sum_r a_{ir} b_{jr} c_{kr}`.
pub fn build_tensor<T: Field>(f: &FactorTriple<T>) -> Result<Tensor3<T>> {
    let (i_dim, j_dim, k_dim) = f.dims();
    let mut t = Tensor3::<T>::zeros((i_dim, j_dim, k_dim));
    for r in 0..f.r() {
        for i in 0..i_dim {
            let a = f.a.get(i, r);
            if a.is_zero() {
                continue;
            }
            for j in 0..j_dim {
                let ab = a.clone() * f.b.get(j, r).clone();
                if ab.is_zero() {
                    continue;
                }
                for k in 0..k_dim {
                    let o = t.offset(i, j, k);
                    t.entries[o] = t.entries[o].clone() + ab.clone() * f.c.get(k, r).clone();
                }
            }
        }
    }
    Ok(t)
}

/// The `IJ x K` matrix with `t_{ijk}` at row `(i-1)J + j`, column `k`.
pub fn matricize<T: Field>(t: &Tensor3<T>) -> Matrix<T> {
    let (i, j, k) = t.dims;
    Matrix::new(i * j, k, t.entries.clone()).expect("layout sizes agree")
}

/// Inverse of [`matricize`].
pub fn tensor_from_matrix<T: Field>(m: &Matrix<T>, dims: (usize, usize, usize)) -> Result<Tensor3<T>> {
    if m.shape() != (dims.0 * dims.1, dims.2) {
        return Err(Error::domain(format!(
            "a {}x{} matrix does not unfold a {}x{}x{} tensor",
            m.rows(),
            m.cols(),
            dims.0,
            dims.1,
            dims.2
        )));
    }
    Tensor3::new(dims, m.data().to_vec())
}

pub fn vectorize_tensor<T: Field>(t: &Tensor3<T>) -> Vec<T> {
    t.entries.clone()
}

/// Inverse of [`vectorize_tensor`].
pub fn tensor_from_vector<T: Field>(v: &[T], dims: (usize, usize, usize)) -> Result<Tensor3<T>> {
    Tensor3::new(dims, v.to_vec())
}

/// Outcome of an equivalence test.
///
/// `permutation[j] = p` (1-based) means column `j` of the second triple
/// corresponds to column `p` of the first; `scalings` are the diagonals
/// `(lambda_A, lambda_B, lambda_C)` in the second triple's column order,
/// so that `A2[:, j] = lambda_A[j] A1[:, p]` and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport<T> {
    pub matched: bool,
    pub permutation: Option<Vec<usize>>,
    pub scalings: Option<Vec<Vec<T>>>,
}

impl<T> EquivalenceReport<T> {
    fn unmatched() -> Self {
        EquivalenceReport {
            matched: false,
            permutation: None,
            scalings: None,
        }
    }
}

fn first_nonzero<T: Field>(v: &[T], tol: f64) -> Option<usize> {
    let scale = v.iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max);
    v.iter().position(|x| !x.is_zero() && !x.is_negligible(scale, tol))
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / n).collect()
    }
}

/// `min ||u - s w||` over signs `s`, for unit vectors.
fn projective_distance(u: &[f64], w: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(w).map(|(a, b)| a * b).sum();
    (2.0 - 2.0 * dot.abs()).max(0.0).sqrt()
}

/// Minimum-cost perfect assignment on a square cost matrix
/// (Hungarian method with potentials). Returns `assign[row] = col`.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; index 0 is a sentinel column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

fn column_scale<T: Field>(from: &[T], to: &[T], tol: f64) -> Option<T> {
    let p = first_nonzero(from, tol)?;
    if first_nonzero(to, tol) != Some(p) {
        return None;
    }
    let lambda = to[p].clone() / from[p].clone();
    let scale = from
        .iter()
        .chain(to)
        .map(|x| x.to_f64().abs())
        .fold(1.0, f64::max);
    from.iter()
        .zip(to)
        .all(|(x, y)| (lambda.clone() * x.clone() - y.clone()).is_negligible(scale, tol))
        .then_some(lambda)
}

fn check_same_shape<T: Field>(x: &Matrix<T>, y: &Matrix<T>, name: &str) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::domain(format!(
            "{name} factors have shapes {:?} and {:?}",
            x.shape(),
            y.shape()
        )));
    }
    Ok(())
}

fn reject_zero_columns<T: Field>(m: &Matrix<T>, name: &str, tol: f64) -> Result<()> {
    if let Some(&j) = m.zero_columns(tol).first() {
        return Err(Error::domain(format!(
            "column {} of {name} is zero, so the rank-1 term vanishes",
            j + 1
        )));
    }
    Ok(())
}

/// Decides whether `f2 = (A Π Λ_A, B Π Λ_B, C Π Λ_C)` with
/// `Λ_A Λ_B Λ_C = I`.
///
/// Columns are paired by a minimum-cost assignment on the projective
/// distance between the normalized rank-1 terms `a_r ⊗ b_r ⊗ c_r`, then the
/// candidate is verified column by column in the backend's arithmetic.
/// A pair is accepted only if the two rank-1 terms are equal, that is the
/// columns are proportional with scalings whose product is 1.
pub fn match_factors<T: Field>(
    f1: &FactorTriple<T>,
    f2: &FactorTriple<T>,
    tol: f64,
) -> Result<EquivalenceReport<T>> {
    for (x, y, name) in [(&f1.a, &f2.a, "A"), (&f1.b, &f2.b, "B"), (&f1.c, &f2.c, "C")] {
        check_same_shape(x, y, name)?;
        reject_zero_columns(x, name, tol)?;
        reject_zero_columns(y, name, tol)?;
    }
    let r = f1.r();
    let term = |f: &FactorTriple<T>, col: usize| -> Vec<f64> {
        let a: Vec<f64> = f.a.column(col).iter().map(|x| x.to_f64()).collect();
        let b: Vec<f64> = f.b.column(col).iter().map(|x| x.to_f64()).collect();
        let c: Vec<f64> = f.c.column(col).iter().map(|x| x.to_f64()).collect();
        let mut out = Vec::with_capacity(a.len() * b.len() * c.len());
        for x in unit(&a) {
            for y in unit(&b) {
                for z in unit(&c) {
                    out.push(x * y * z);
                }
            }
        }
        out
    };
    let t1: Vec<Vec<f64>> = (0..r).map(|j| term(f1, j)).collect();
    let t2: Vec<Vec<f64>> = (0..r).map(|j| term(f2, j)).collect();
    let cost: Vec<Vec<f64>> = t2
        .iter()
        .map(|w| t1.iter().map(|u| projective_distance(u, w)).collect())
        .collect();
    let preferred = min_cost_assignment(&cost);

    // A pair verifies exactly when the two rank-1 terms are equal. That is
    // an equivalence relation, so taking any unused verifying column keeps
    // a perfect matching reachable whenever one exists; the assignment only
    // sets the order in which candidates are tried (it can pick the wrong
    // member among proportional terms).
    let verify = |p: usize, j: usize| -> Option<Vec<T>> {
        let mut lambdas = Vec::with_capacity(3);
        for (m1, m2) in [(&f1.a, &f2.a), (&f1.b, &f2.b), (&f1.c, &f2.c)] {
            lambdas.push(column_scale(&m1.column(p), &m2.column(j), tol)?);
        }
        let product = lambdas[0].clone() * lambdas[1].clone() * lambdas[2].clone();
        (product - T::one()).is_negligible(1.0, tol.sqrt()).then_some(lambdas)
    };
    let mut used = vec![false; r];
    let mut assign = vec![0; r];
    let mut scalings = vec![Vec::with_capacity(r), Vec::with_capacity(r), Vec::with_capacity(r)];
    for j in 0..r {
        let mut candidates: Vec<usize> = (0..r).filter(|&p| !used[p]).collect();
        candidates.sort_by(|&x, &y| {
            (x != preferred[j])
                .cmp(&(y != preferred[j]))
                .then(cost[j][x].total_cmp(&cost[j][y]))
        });
        let Some((p, lambdas)) = candidates.into_iter().find_map(|p| verify(p, j).map(|l| (p, l))) else {
            return Ok(EquivalenceReport::unmatched());
        };
        used[p] = true;
        assign[j] = p;
        for (slot, l) in scalings.iter_mut().zip(lambdas) {
            slot.push(l);
        }
    }
    Ok(EquivalenceReport {
        matched: true,
        permutation: Some(assign.iter().map(|p| p + 1).collect()),
        scalings: Some(scalings),
    })
}

/// Decides whether `c2 = c1 Π Λ` for a permutation `Π` and a nonsingular
/// diagonal `Λ`.
pub fn match_single_factor<T: Field>(
    c1: &Matrix<T>,
    c2: &Matrix<T>,
    tol: f64,
) -> Result<EquivalenceReport<T>> {
    check_same_shape(c1, c2, "the two")?;
    let r = c1.cols();
    // zero columns can only pair with zero columns
    let z1 = c1.zero_columns(tol);
    let z2 = c2.zero_columns(tol);
    if z1.len() != z2.len() {
        return Ok(EquivalenceReport::unmatched());
    }
    let unit_cols = |m: &Matrix<T>| -> Vec<Vec<f64>> {
        (0..r)
            .map(|j| unit(&m.column(j).iter().map(|x| x.to_f64()).collect::<Vec<_>>()))
            .collect()
    };
    let (u1, u2) = (unit_cols(c1), unit_cols(c2));
    let zero_in_1: Vec<bool> = (0..r).map(|j| z1.contains(&j)).collect();
    let zero_in_2: Vec<bool> = (0..r).map(|j| z2.contains(&j)).collect();
    let cost: Vec<Vec<f64>> = (0..r)
        .map(|j| {
            (0..r)
                .map(|p| match (zero_in_2[j], zero_in_1[p]) {
                    (true, true) => 0.0,
                    (false, false) => projective_distance(&u1[p], &u2[j]),
                    _ => 4.0,
                })
                .collect()
        })
        .collect();
    let assign = min_cost_assignment(&cost);
    let mut lambdas = Vec::with_capacity(r);
    for (j, &p) in assign.iter().enumerate() {
        match (zero_in_2[j], zero_in_1[p]) {
            (true, true) => lambdas.push(T::one()),
            (false, false) => match column_scale(&c1.column(p), &c2.column(j), tol) {
                Some(l) => lambdas.push(l),
                None => return Ok(EquivalenceReport::unmatched()),
            },
            _ => return Ok(EquivalenceReport::unmatched()),
        }
    }
    Ok(EquivalenceReport {
        matched: true,
        permutation: Some(assign.iter().map(|p| p + 1).collect()),
        scalings: Some(vec![lambdas]),
    })
}

/// Applies a column permutation (1-based, `out[:, j] = m[:, perm[j]]`)
/// and column scaling.
pub fn permute_and_scale<T: Field>(m: &Matrix<T>, perm: &[usize], scale: &[T]) -> Result<Matrix<T>> {
    if perm.len() != m.cols() || scale.len() != m.cols() {
        return Err(Error::domain("permutation and scaling must have R entries"));
    }
    let zero_based: Vec<usize> = perm.iter().map(|p| p - 1).collect();
    Ok(m.select_columns(&zero_based).scale_columns(scale))
}
