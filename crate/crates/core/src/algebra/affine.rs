use rand::Rng;

use super::{check_prime, rank_mod_p, FieldVec, Space};
use crate::budget::{sat_pow, Budget};
use crate::error::{Error, Result};

/// An affine map `x ↦ Lx + c` from `F_p^m` to `F_p^n`.
///
/// `L` is stored row-major as an `n x m` matrix; its columns are the images of
/// the standard basis. The embedding / non-singular flags are derived from the
/// rank at construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AffineMap {
    p: u32,
    m: usize,
    n: usize,
    matrix: Vec<u32>,
    shift: Vec<u32>,
    rank: usize,
}

impl AffineMap {
    /// Builds from the row-major `n x m` matrix and the shift.
    pub fn new(p: u32, m: usize, n: usize, matrix: Vec<u32>, shift: Vec<u32>) -> Result<Self> {
        check_prime(p)?;
        if matrix.len() != n * m {
            return Err(Error::DimensionMismatch { expected: n * m, found: matrix.len() });
        }
        if shift.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: shift.len() });
        }
        if matrix.iter().chain(&shift).any(|&v| v >= p) {
            return Err(Error::OutOfRange(format!("affine map entries must be residues mod {p}")));
        }
        let rank = rank_mod_p(matrix.clone(), n, m, p);
        Ok(AffineMap { p, m, n, matrix, shift, rank })
    }

    /// Builds from the `m` columns of `L` (each a point of `F_p^n`).
    pub fn from_columns(columns: &[FieldVec], shift: &FieldVec) -> Result<Self> {
        let p = shift.p();
        let n = shift.dim();
        let m = columns.len();
        let mut matrix = vec![0; n * m];
        for (j, col) in columns.iter().enumerate() {
            if col.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: col.dim() });
            }
            for i in 0..n {
                matrix[i * m + j] = col.coords()[i];
            }
        }
        Self::new(p, m, n, matrix, shift.coords().to_vec())
    }

    pub fn identity(p: u32, n: usize) -> Result<Self> {
        let mut matrix = vec![0; n * n];
        for i in 0..n {
            matrix[i * n + i] = 1;
        }
        Self::new(p, n, n, matrix, vec![0; n])
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// Domain dimension `m`.
    pub fn domain_dim(&self) -> usize {
        self.m
    }

    /// Codomain dimension `n`.
    pub fn codomain_dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &[u32] {
        &self.matrix
    }

    pub fn shift(&self) -> &[u32] {
        &self.shift
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Injective, i.e. `L` has full column rank.
    pub fn is_embedding(&self) -> bool {
        self.rank == self.m
    }

    pub fn is_nonsingular(&self) -> bool {
        self.m == self.n && self.rank == self.n
    }

    /// Entry `L[i][j]`.
    pub fn entry(&self, i: usize, j: usize) -> u32 {
        self.matrix[i * self.m + j]
    }

    pub(crate) fn apply_coords(&self, x: &[u32], out: &mut [u32]) {
        let p = self.p;
        for i in 0..self.n {
            let row = &self.matrix[i * self.m..(i + 1) * self.m];
            let mut acc = self.shift[i];
            for (a, b) in row.iter().zip(x) {
                acc = (acc + a * b) % p;
            }
            out[i] = acc;
        }
    }

    /// `Lx + c`.
    pub fn apply(&self, x: &FieldVec) -> Result<FieldVec> {
        if x.p() != self.p {
            return Err(Error::ModulusMismatch { expected: self.p, found: x.p() });
        }
        if x.dim() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, found: x.dim() });
        }
        let mut out = vec![0; self.n];
        self.apply_coords(x.coords(), &mut out);
        Ok(FieldVec::new(self.p, out).expect("residues"))
    }

    /// Canonical index in `F_p^n` of the image of every point of `F_p^m`,
    /// listed in canonical order of the domain.
    pub fn image_indices(&self) -> Result<Vec<usize>> {
        let domain = Space::new(self.p, self.m)?;
        let codomain = Space::with_budget(self.p, self.n, Budget(u64::MAX))?;
        let mut x = vec![0; self.m];
        let mut y = vec![0; self.n];
        Ok((0..domain.size())
            .map(|i| {
                domain.digits_into(i, &mut x);
                self.apply_coords(&x, &mut y);
                codomain.index_of_coords(&y)
            })
            .collect())
    }

    /// `self ∘ inner`, mapping the domain of `inner` into the codomain of `self`.
    pub fn compose(&self, inner: &AffineMap) -> Result<AffineMap> {
        if inner.p != self.p {
            return Err(Error::ModulusMismatch { expected: self.p, found: inner.p });
        }
        if inner.n != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, found: inner.n });
        }
        let (p, n, k) = (self.p, self.n, inner.m);
        let mut matrix = vec![0; n * k];
        for i in 0..n {
            for j in 0..k {
                let mut acc = 0;
                for t in 0..self.m {
                    acc = (acc + self.entry(i, t) * inner.entry(t, j)) % p;
                }
                matrix[i * k + j] = acc;
            }
        }
        let mut shift = vec![0; n];
        self.apply_coords(&inner.shift, &mut shift);
        AffineMap::new(p, k, n, matrix, shift)
    }
}

/// Uniformly random affine embedding `F_p^m → F_p^n`.
///
/// `L` is drawn by rejection: uniform `n x m` matrices are resampled until
/// they have full column rank, which makes `L` exactly uniform over the
/// injective ones; `c` is uniform over `F_p^n`.
pub fn sample_affine_embedding<R: Rng + ?Sized>(rng: &mut R, p: u32, m: usize, n: usize) -> Result<AffineMap> {
    check_prime(p)?;
    if m > n {
        return Err(Error::Precondition(format!("embedding needs m <= n, got m = {m}, n = {n}")));
    }
    loop {
        let matrix: Vec<u32> = (0..n * m).map(|_| rng.gen_range(0..p)).collect();
        if rank_mod_p(matrix.clone(), n, m, p) == m {
            let shift: Vec<u32> = (0..n).map(|_| rng.gen_range(0..p)).collect();
            return AffineMap::new(p, m, n, matrix, shift);
        }
    }
}

/// Number of affine embeddings `F_p^m → F_p^n`: `p^n ∏_{i<m} (p^n - p^i)`.
pub fn count_affine_embeddings(p: u32, m: usize, n: usize) -> u128 {
    if m > n {
        return 0;
    }
    let pn = sat_pow(p as u128, n as u64);
    (0..m).fold(pn, |acc, i| acc.saturating_mul(pn - sat_pow(p as u128, i as u64)))
}

/// Every affine embedding `F_p^m → F_p^n`, linear part outermost.
///
/// The work counted against the budget is the number of candidate matrices
/// scanned plus the number of maps produced.
pub fn all_affine_embeddings(p: u32, m: usize, n: usize, budget: Budget) -> Result<impl Iterator<Item = AffineMap>> {
    check_prime(p)?;
    if m > n {
        return Err(Error::Precondition(format!("embedding needs m <= n, got m = {m}, n = {n}")));
    }
    let candidates = sat_pow(p as u128, (n * m) as u64);
    let produced = count_affine_embeddings(p, m, n);
    budget.check("affine embedding enumeration", candidates.saturating_add(produced))?;
    let mut linear = Vec::new();
    let mut matrix = vec![0u32; n * m];
    for _ in 0..candidates as u64 {
        if rank_mod_p(matrix.clone(), n, m, p) == m {
            linear.push(matrix.clone());
        }
        for v in matrix.iter_mut() {
            *v += 1;
            if *v < p {
                break;
            }
            *v = 0;
        }
    }
    let shifts = Space::with_budget(p, n, budget)?;
    Ok(linear.into_iter().flat_map(move |mat| {
        (0..shifts.size()).map(move |s| {
            let shift = shifts.point(s).coords().to_vec();
            AffineMap::new(p, m, n, mat.clone(), shift).expect("valid embedding")
        })
    }))
}

/// Which embeddings an ensemble-level statistic ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingEnsemble {
    /// Every affine embedding, each with equal weight.
    Exact,
    /// `trials` independent uniform embeddings; trial `t` uses stream `t` of `seed`.
    Sampled { trials: u64, seed: u64 },
}

const FOLD_CHUNK: usize = 8192;

impl EmbeddingEnsemble {
    /// Number of maps visited.
    pub fn len(&self, p: u32, m: usize, n: usize) -> u128 {
        match *self {
            EmbeddingEnsemble::Exact => count_affine_embeddings(p, m, n),
            EmbeddingEnsemble::Sampled { trials, .. } => trials as u128,
        }
    }

    pub fn is_empty(&self, p: u32, m: usize, n: usize) -> bool {
        self.len(p, m, n) == 0
    }

    /// Maps every embedding through `map` (in parallel) and folds the
    /// results in ensemble order, so the outcome does not depend on the
    /// thread count.
    pub fn fold<T, A, M, F>(&self, p: u32, m: usize, n: usize, budget: Budget, mut acc: A, map: M, mut fold: F) -> Result<A>
    where
        T: Send,
        M: Fn(&AffineMap) -> T + Sync,
        F: FnMut(&mut A, T),
    {
        use rayon::prelude::*;
        let mut chunk: Vec<AffineMap> = Vec::with_capacity(FOLD_CHUNK);
        let mut flush = |chunk: &mut Vec<AffineMap>, acc: &mut A| {
            let out: Vec<T> = chunk.par_iter().map(&map).collect();
            for t in out {
                fold(acc, t);
            }
            chunk.clear();
        };
        match *self {
            EmbeddingEnsemble::Exact => {
                for a in all_affine_embeddings(p, m, n, budget)? {
                    chunk.push(a);
                    if chunk.len() == FOLD_CHUNK {
                        flush(&mut chunk, &mut acc);
                    }
                }
            }
            EmbeddingEnsemble::Sampled { trials, seed } => {
                check_prime(p)?;
                if m > n {
                    return Err(Error::Precondition(format!("embedding needs m <= n, got m = {m}, n = {n}")));
                }
                for t in 0..trials {
                    let mut rng = crate::rng::trial_rng(seed, t);
                    chunk.push(sample_affine_embedding(&mut rng, p, m, n)?);
                    if chunk.len() == FOLD_CHUNK {
                        flush(&mut chunk, &mut acc);
                    }
                }
            }
        }
        flush(&mut chunk, &mut acc);
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;
    use std::collections::HashMap;

    fn fv(p: u32, c: &[u32]) -> FieldVec {
        FieldVec::new(p, c.to_vec()).unwrap()
    }

    #[test]
    fn identity_and_hand_example() {
        let id = AffineMap::identity(3, 2).unwrap();
        assert!(id.is_nonsingular() && id.is_embedding());
        assert_eq!(id.apply(&fv(3, &[2, 1])).unwrap(), fv(3, &[2, 1]));

        let a = AffineMap::new(2, 1, 2, vec![1, 1], vec![0, 1]).unwrap();
        assert_eq!(a.apply(&fv(2, &[1])).unwrap(), fv(2, &[1, 0]));
        assert!(a.apply(&fv(2, &[1, 0])).is_err());
    }

    #[test]
    fn composition_agrees_with_sequential_application() {
        let mut rng = trial_rng(11, 0);
        for t in 0..100 {
            let p = [2, 3, 5][t % 3];
            let b = sample_affine_embedding(&mut rng, p, 2, 3).unwrap();
            let a = sample_affine_embedding(&mut rng, p, 3, 4).unwrap();
            let ab = a.compose(&b).unwrap();
            let x = fv(p, &[rng.gen_range(0..p), rng.gen_range(0..p)]);
            assert_eq!(ab.apply(&x).unwrap(), a.apply(&b.apply(&x).unwrap()).unwrap());
        }
    }

    #[test]
    fn sampled_embeddings_have_full_column_rank() {
        let mut rng = trial_rng(5, 1);
        for t in 0..10_000 {
            let p = [2, 3, 5, 7][t % 4];
            let m = 1 + t % 3;
            let a = sample_affine_embedding(&mut rng, p, m, 3).unwrap();
            assert!(a.is_embedding());
            assert_eq!(a.rank(), m);
        }
        assert!(sample_affine_embedding(&mut rng, 2, 3, 2).is_err());
    }

    #[test]
    fn one_dimensional_embeddings_are_nonzero_scalars() {
        let mut rng = trial_rng(3, 0);
        let mut seen = [0u32; 5];
        for _ in 0..5000 {
            let a = sample_affine_embedding(&mut rng, 5, 1, 1).unwrap();
            seen[a.entry(0, 0) as usize] += 1;
        }
        assert_eq!(seen[0], 0);
        for &c in &seen[1..] {
            assert!((c as f64 / 5000.0 - 0.25).abs() < 0.03, "{seen:?}");
        }
    }

    #[test]
    fn linear_parts_are_uniform_over_invertible_matrices() {
        // Oracle: the 6 invertible 2x2 matrices over F_2, found by brute force.
        let invertible: Vec<Vec<u32>> = (0..16u32)
            .map(|bits| (0..4).map(|i| (bits >> i) & 1).collect::<Vec<u32>>())
            .filter(|m| (m[0] * m[3] + m[1] * m[2]) % 2 == 1)
            .collect();
        assert_eq!(invertible.len(), 6);
        let draws = 100_000;
        let mut counts: HashMap<Vec<u32>, u32> = HashMap::new();
        for seed in 0..draws {
            let mut rng = trial_rng(seed, 0);
            let a = sample_affine_embedding(&mut rng, 2, 2, 2).unwrap();
            *counts.entry(a.matrix().to_vec()).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let expected = draws as f64 / 6.0;
        let mut chi2 = 0.0;
        for m in &invertible {
            let c = counts[m] as f64;
            assert!((c / draws as f64 - 1.0 / 6.0).abs() < 0.02);
            chi2 += (c - expected).powi(2) / expected;
        }
        // 5 degrees of freedom, 99.9% quantile is 20.5
        assert!(chi2 < 20.5, "chi-square {chi2}");
    }

    #[test]
    fn exhaustive_embedding_count() {
        let all: Vec<_> = all_affine_embeddings(2, 1, 2, Budget::WORK).unwrap().collect();
        assert_eq!(all.len(), 12);
        assert_eq!(count_affine_embeddings(2, 1, 2), 12);
        assert_eq!(count_affine_embeddings(2, 2, 4), 16 * 15 * 14);
        assert_eq!(all_affine_embeddings(2, 2, 4, Budget::WORK).unwrap().count(), 16 * 15 * 14);
        assert_eq!(all_affine_embeddings(3, 2, 2, Budget::WORK).unwrap().count(), 9 * 8 * 6);
    }
}
