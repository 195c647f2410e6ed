//! Lexicographically ordered k-subsets of `{1, ..., n}`.
//!
//! The set `S_n^k` of strictly increasing k-tuples is enumerated in
//! lexicographic order; [`rank`] and [`CombinadicTable::unrank`] are the
//! order-preserving bijection between `S_n^k` and `1..=C(n,k)`. All
//! user-facing tuples are 1-based. The zero-based [`Subsets`] iterator is
//! the internal workhorse.

use std::fmt;
use std::ops::Mul;

use num_traits::One;

use crate::error::{Error, Result};

/// Default ceiling on any binomial coefficient an operation may enumerate.
pub const DEFAULT_CAP: u64 = 10_000_000;

/// `C(n,k)` with overflow detection; `None` when it does not fit in `u128`.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) is always integral at this point
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `C(n,k)` as a `usize`, refusing values above `cap`.
pub fn capped_binomial(n: usize, k: usize, cap: u64) -> Result<usize> {
    match binomial(n, k) {
        Some(v) if v <= cap as u128 => Ok(v as usize),
        Some(v) => Err(Error::CapExceeded {
            n,
            k,
            value: v.to_string(),
            cap,
        }),
        None => Err(Error::CapExceeded {
            n,
            k,
            value: "overflow".into(),
            cap,
        }),
    }
}

/// A strictly increasing tuple `1 <= i_1 < ... < i_k <= n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    entries: Vec<usize>,
    n: usize,
}

impl MultiIndex {
    /// Validates a 1-based tuple against the ambient size `n`.
    pub fn new(entries: Vec<usize>, n: usize) -> Result<Self> {
        if entries.len() > n {
            return Err(Error::domain(format!(
                "tuple of length {} exceeds ambient size {n}",
                entries.len()
            )));
        }
        for (pos, &e) in entries.iter().enumerate() {
            if e == 0 || e > n {
                return Err(Error::domain(format!(
                    "tuple entry {e} at position {} is outside 1..={n}",
                    pos + 1
                )));
            }
            if pos > 0 && entries[pos - 1] >= e {
                return Err(Error::domain(format!(
                    "tuple {entries:?} is not strictly increasing"
                )));
            }
        }
        Ok(MultiIndex { entries, n })
    }

    pub(crate) fn from_zero_based(subset: &[usize], n: usize) -> Self {
        MultiIndex {
            entries: subset.iter().map(|&i| i + 1).collect(),
            n,
        }
    }

    /// 1-based entries.
    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.entries.len()
    }

    pub fn to_zero_based(&self) -> Vec<usize> {
        self.entries.iter().map(|&i| i - 1).collect()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Lexicographic position of `idx` in `S_n^k`, 1-based.
pub fn rank(idx: &MultiIndex) -> usize {
    rank_zero_based(&idx.to_zero_based(), idx.n) + 1
}

/// Zero-based position of a zero-based increasing subset of `0..n`.
///
/// Counts the tuples that agree on a prefix and are smaller at the next
/// position: for position `p` every value `v` strictly between the
/// previous entry and `subset[p]` contributes `C(n - 1 - v, k - 1 - p)`.
pub(crate) fn rank_zero_based(subset: &[usize], n: usize) -> usize {
    let k = subset.len();
    let mut acc = 0usize;
    let mut start = 0usize;
    for (p, &c) in subset.iter().enumerate() {
        for v in start..c {
            acc += binomial(n - 1 - v, k - 1 - p).unwrap_or(0) as usize;
        }
        start = c + 1;
    }
    acc
}

/// The bijection `sigma_{n,k}` between `1..=C(n,k)` and `S_n^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CombinadicTable {
    n: usize,
    k: usize,
    count: usize,
}

impl CombinadicTable {
    pub fn new(n: usize, k: usize, cap: u64) -> Result<Self> {
        if k > n {
            return Err(Error::domain(format!("k = {k} exceeds n = {n}")));
        }
        let count = capped_binomial(n, k, cap)?;
        Ok(CombinadicTable { n, k, count })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// The `i`-th tuple (1-based `i`) in lexicographic order.
    pub fn unrank(&self, i: usize) -> Result<MultiIndex> {
        if i == 0 || i > self.count {
            return Err(Error::domain(format!(
                "rank {i} outside 1..={} for S_{}^{}",
                self.count, self.n, self.k
            )));
        }
        let mut remaining = i - 1;
        let mut entries = Vec::with_capacity(self.k);
        let mut v = 0usize;
        for p in 0..self.k {
            loop {
                let block = binomial(self.n - 1 - v, self.k - 1 - p).unwrap_or(0) as usize;
                if remaining < block {
                    break;
                }
                remaining -= block;
                v += 1;
            }
            entries.push(v + 1);
            v += 1;
        }
        Ok(MultiIndex { entries, n: self.n })
    }

    /// Inverse of [`unrank`](Self::unrank); checks that `idx` belongs to this table.
    pub fn rank(&self, idx: &MultiIndex) -> Result<usize> {
        if idx.n != self.n || idx.k() != self.k {
            return Err(Error::domain(format!(
                "tuple {idx} does not belong to S_{}^{}",
                self.n, self.k
            )));
        }
        Ok(rank(idx))
    }

    /// All tuples in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        Subsets::new(self.n, self.k).map(move |s| MultiIndex::from_zero_based(&s, self.n))
    }
}

/// Zero-based k-subsets of `0..n` in lexicographic order.
#[derive(Debug, Clone)]
pub struct Subsets {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Subsets {
    pub fn new(n: usize, k: usize) -> Self {
        let current = if k <= n { Some((0..k).collect()) } else { None };
        Subsets { n, current }
    }
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let k = out.len();
        let mut next = out.clone();
        // rightmost position that can still be incremented
        let mut p = k;
        while p > 0 {
            p -= 1;
            if next[p] < self.n - k + p {
                next[p] += 1;
                for q in p + 1..k {
                    next[q] = next[q - 1] + 1;
                }
                self.current = Some(next);
                return Some(out);
            }
        }
        Some(out)
    }
}

/// Products `d_{i_1} * ... * d_{i_m}` over `S_R^m` in lexicographic order.
///
/// For `m = 1` this is `d` itself.
pub fn product_vector<T>(d: &[T], m: usize) -> Result<Vec<T>>
where
    T: Clone + One + Mul<Output = T>,
{
    if m == 0 || m > d.len() {
        return Err(Error::domain(format!(
            "product order m = {m} outside 1..={}",
            d.len()
        )));
    }
    Ok(Subsets::new(d.len(), m)
        .map(|s| {
            s.iter()
                .fold(T::one(), |acc, &i| acc * d[i].clone())
        })
        .collect())
}

/// Number of nonzero entries.
pub fn support_size<T: num_traits::Zero>(d: &[T]) -> usize {
    d.iter().filter(|x| !x.is_zero()).count()
}
