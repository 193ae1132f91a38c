//! Exact arithmetic on `F_p^n`, the torus subgroups `U_k` and affine maps.
//!
//! Points of `F_p^n` are indexed little-endian: coordinate 1 varies fastest,
//! so the point `(x_1, ..., x_n)` has index `x_1 + x_2 p + ... + x_n p^{n-1}`.
//! Every dense table in the crate uses this order.

mod affine;
pub(crate) mod torus;

pub use affine::{all_affine_embeddings, count_affine_embeddings, sample_affine_embedding, AffineMap, EmbeddingEnsemble};
pub use torus::{iota, TorusValue};

use crate::budget::{sat_pow, Budget};
use crate::error::{Error, Result};

/// Largest supported prime.
pub const MAX_PRIME: u32 = 13;

pub fn is_supported_prime(p: u32) -> bool {
    matches!(p, 2 | 3 | 5 | 7 | 11 | 13)
}

pub(crate) fn check_prime(p: u32) -> Result<()> {
    if is_supported_prime(p) {
        Ok(())
    } else {
        Err(Error::UnsupportedPrime(p))
    }
}

/// A point of `F_p^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldVec {
    p: u32,
    coords: Vec<u32>,
}

impl FieldVec {
    pub fn new(p: u32, coords: Vec<u32>) -> Result<Self> {
        check_prime(p)?;
        if let Some(&c) = coords.iter().find(|&&c| c >= p) {
            return Err(Error::OutOfRange(format!("coordinate {c} is not a residue mod {p}")));
        }
        Ok(FieldVec { p, coords })
    }

    pub fn zero(p: u32, n: usize) -> Self {
        FieldVec { p, coords: vec![0; n] }
    }

    /// The `i`-th standard basis vector (0-based).
    pub fn unit(p: u32, n: usize, i: usize) -> Self {
        let mut coords = vec![0; n];
        coords[i] = 1;
        FieldVec { p, coords }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[u32] {
        &self.coords
    }

    pub fn add(&self, other: &FieldVec) -> FieldVec {
        debug_assert_eq!(self.coords.len(), other.coords.len());
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a + b) % self.p)
            .collect();
        FieldVec { p: self.p, coords }
    }

    pub fn scale(&self, c: u32) -> FieldVec {
        let coords = self.coords.iter().map(|a| (a * (c % self.p)) % self.p).collect();
        FieldVec { p: self.p, coords }
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }
}

/// The ambient space `F_p^n` together with its point indexing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Space {
    p: u32,
    n: usize,
    size: usize,
}

impl Space {
    /// `F_p^n` with the default table budget.
    pub fn new(p: u32, n: usize) -> Result<Self> {
        Self::with_budget(p, n, Budget::TABLE_CELLS)
    }

    pub fn with_budget(p: u32, n: usize, budget: Budget) -> Result<Self> {
        check_prime(p)?;
        let size = sat_pow(p as u128, n as u64);
        budget.check(&format!("table over F_{p}^{n}"), size)?;
        Ok(Space { p, n, size: size as usize })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of points, `p^n`.
    pub fn size(&self) -> usize {
        self.size
    }

    /// The point with canonical index `index`.
    pub fn point(&self, mut index: usize) -> FieldVec {
        let p = self.p as usize;
        let mut coords = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            coords.push((index % p) as u32);
            index /= p;
        }
        FieldVec { p: self.p, coords }
    }

    pub fn index_of(&self, x: &FieldVec) -> Result<usize> {
        if x.p != self.p {
            return Err(Error::ModulusMismatch { expected: self.p, found: x.p });
        }
        if x.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.dim() });
        }
        Ok(self.index_of_coords(&x.coords))
    }

    pub(crate) fn index_of_coords(&self, coords: &[u32]) -> usize {
        coords
            .iter()
            .rev()
            .fold(0usize, |acc, &c| acc * self.p as usize + c as usize)
    }

    /// Index of `x + y` given the indices of `x` and `y`.
    pub fn add_indices(&self, mut a: usize, mut b: usize) -> usize {
        if self.p == 2 {
            return a ^ b;
        }
        let p = self.p as usize;
        let mut out = 0;
        let mut place = 1;
        for _ in 0..self.n {
            out += ((a % p + b % p) % p) * place;
            a /= p;
            b /= p;
            place *= p;
        }
        out
    }

    /// Index of `-x`.
    pub fn neg_index(&self, mut a: usize) -> usize {
        if self.p == 2 {
            return a;
        }
        let p = self.p as usize;
        let mut out = 0;
        let mut place = 1;
        for _ in 0..self.n {
            out += ((p - a % p) % p) * place;
            a /= p;
            place *= p;
        }
        out
    }

    /// All points in canonical order.
    pub fn points(&self) -> impl Iterator<Item = FieldVec> + '_ {
        (0..self.size).map(move |i| self.point(i))
    }

    /// Digits of point `index` written into `out` (length `n`).
    pub(crate) fn digits_into(&self, mut index: usize, out: &mut [u32]) {
        let p = self.p as usize;
        for slot in out.iter_mut() {
            *slot = (index % p) as u32;
            index /= p;
        }
    }
}

/// All `p^n` points of `F_p^n` in canonical little-endian order.
pub fn enumerate_points(p: u32, n: usize, budget: Budget) -> Result<Vec<FieldVec>> {
    let space = Space::with_budget(p, n, budget)?;
    Ok(space.points().collect())
}

/// `a^e mod m` on small integers.
pub(crate) fn pow_mod(mut a: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    a %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = ((acc as u128 * a as u128) % m as u128) as u64;
        }
        a = ((a as u128 * a as u128) % m as u128) as u64;
        e >>= 1;
    }
    acc
}

/// Inverse of a nonzero residue mod the prime `p`.
pub(crate) fn inv_mod_p(a: u32, p: u32) -> u32 {
    debug_assert!(!a.is_multiple_of(p));
    pow_mod(a as u64, (p - 2) as u64, p as u64) as u32
}

/// Rank over `F_p` of a row-major `rows x cols` matrix.
pub(crate) fn rank_mod_p(mut m: Vec<u32>, rows: usize, cols: usize, p: u32) -> usize {
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows).find(|&r| !m[r * cols + col].is_multiple_of(p)) else {
            continue;
        };
        for c in 0..cols {
            m.swap(rank * cols + c, pivot * cols + c);
        }
        let inv = inv_mod_p(m[rank * cols + col], p);
        for c in 0..cols {
            m[rank * cols + c] = m[rank * cols + c] * inv % p;
        }
        for r in 0..rows {
            if r != rank {
                let factor = m[r * cols + col];
                if factor != 0 {
                    for c in 0..cols {
                        m[r * cols + c] = (m[r * cols + c] + (p - factor) * m[rank * cols + c]) % p;
                    }
                }
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coords(v: &[FieldVec]) -> Vec<Vec<u32>> {
        v.iter().map(|x| x.coords().to_vec()).collect()
    }

    #[test]
    fn enumeration_order_is_little_endian() {
        let b = Budget::TABLE_CELLS;
        assert_eq!(coords(&enumerate_points(2, 1, b).unwrap()), vec![vec![0], vec![1]]);
        assert_eq!(
            coords(&enumerate_points(2, 2, b).unwrap()),
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]]
        );
        let pts = enumerate_points(3, 2, b).unwrap();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0].coords(), &[0, 0]);
        assert_eq!(pts[8].coords(), &[2, 2]);
    }

    #[test]
    fn enumeration_refuses_over_budget() {
        let err = enumerate_points(2, 10, Budget(1000)).unwrap_err();
        match err {
            Error::BudgetExceeded { required, .. } => assert_eq!(required, 1024),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unsupported_primes_are_rejected() {
        assert!(Space::new(4, 2).is_err());
        assert!(Space::new(17, 1).is_err());
        assert!(Space::new(13, 2).is_ok());
    }

    #[test]
    fn index_arithmetic_matches_vector_arithmetic() {
        for p in [2, 3, 5] {
            let s = Space::new(p, 3).unwrap();
            for a in 0..s.size() {
                for b in (0..s.size()).step_by(7) {
                    let sum = s.point(a).add(&s.point(b));
                    assert_eq!(s.index_of(&sum).unwrap(), s.add_indices(a, b));
                }
                let neg = s.point(a).scale(p - 1);
                assert_eq!(s.index_of(&neg).unwrap(), s.neg_index(a));
            }
        }
    }

    #[test]
    fn rank_over_small_fields() {
        assert_eq!(rank_mod_p(vec![1, 0, 0, 1], 2, 2, 2), 2);
        assert_eq!(rank_mod_p(vec![1, 1, 1, 1], 2, 2, 2), 1);
        assert_eq!(rank_mod_p(vec![1, 2, 2, 1], 2, 2, 3), 1);
        assert_eq!(rank_mod_p(vec![0, 0, 0, 0], 2, 2, 5), 0);
    }
}
