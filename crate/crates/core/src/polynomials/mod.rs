//! Non-classical polynomials `F_p^n → T` in canonical form.
//!
//! A polynomial is a finite sum of terms `c |x_1|^{d_1} ⋯ |x_n|^{d_n} / p^{h+1}`
//! with `c ∈ {1, …, p-1}`, `0 <= d_i < p`, `h >= 0` and not all `d_i` zero
//! (shift 0). The degree of a term is `Σ d_i + h (p-1)`, and the
//! representation is unique, so equality of term maps is equality of
//! functions.
//!
//! Internally a monomial `|x|^d` with terms at several depths is the same as
//! a single integer numerator `N_d mod p^K` over `p^K`; addition and integer
//! scaling are carried out on those numerators and re-expanded into base-`p`
//! digits.

mod text;

use std::collections::BTreeMap;

use crate::algebra::torus::{max_exponent, p_pow};
use crate::algebra::{check_prime, inv_mod_p, AffineMap, FieldVec, Space, TorusValue};
use crate::budget::{sat_pow, Budget};
use crate::error::{Error, Result};

/// Exponent vector and depth of one canonical term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    pub depth: u32,
    pub exponents: Vec<u32>,
}

impl Monomial {
    pub fn new(exponents: Vec<u32>, depth: u32) -> Self {
        Monomial { depth, exponents }
    }

    /// `Σ d_i`.
    pub fn classical_degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    /// `Σ d_i + h (p-1)`.
    pub fn degree(&self, p: u32) -> u32 {
        self.classical_degree() + self.depth * (p - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NcPolynomial {
    p: u32,
    n: usize,
    terms: BTreeMap<Monomial, u32>,
}

/// `|x_1|^{d_1} ⋯ |x_n|^{d_n} mod q` on integer representatives.
fn monomial_value(x: &[u32], exps: &[u32], q: u64) -> u64 {
    let mut acc: u128 = 1 % q as u128;
    for (&xi, &di) in x.iter().zip(exps) {
        for _ in 0..di {
            acc = acc * xi as u128 % q as u128;
        }
    }
    acc as u64
}

impl NcPolynomial {
    pub fn zero(p: u32, n: usize) -> Self {
        NcPolynomial { p, n, terms: BTreeMap::new() }
    }

    /// Builds from canonical terms `(exponents, depth, coefficient)`.
    ///
    /// Zero coefficients are dropped; repeated monomials, coefficients outside
    /// `1..p`, exponents `>= p` and constant terms are rejected.
    pub fn from_terms<I>(p: u32, n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, u32, u32)>,
    {
        check_prime(p)?;
        let mut map = BTreeMap::new();
        for (exps, depth, c) in terms {
            if exps.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: exps.len() });
            }
            if let Some(&e) = exps.iter().find(|&&e| e >= p) {
                return Err(Error::OutOfRange(format!("exponent {e} must be below p = {p}")));
            }
            if c >= p {
                return Err(Error::OutOfRange(format!("coefficient {c} must be below p = {p}")));
            }
            if depth + 1 > max_exponent(p) {
                return Err(Error::OutOfRange(format!("depth {depth} is too large for p = {p}")));
            }
            if c == 0 {
                continue;
            }
            if exps.iter().all(|&e| e == 0) {
                return Err(Error::NonzeroShift(format!("constant term {c}/{}", p_pow(p, depth + 1))));
            }
            let mono = Monomial::new(exps, depth);
            if map.insert(mono, c).is_some() {
                return Err(Error::Precondition("repeated term in polynomial".into()));
            }
        }
        Ok(NcPolynomial { p, n, terms: map })
    }

    /// The single term `|x|^d / p^{h+1}`.
    pub fn monomial(p: u32, exponents: Vec<u32>, depth: u32) -> Result<Self> {
        let n = exponents.len();
        Self::from_terms(p, n, [(exponents, depth, 1)])
    }

    /// `ι(Q)` for the classical polynomial `Q = Σ c_d x^d` over `F_p`;
    /// coefficients are reduced mod `p`.
    pub fn classical<I>(p: u32, n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, u32)>,
    {
        check_prime(p)?;
        let mut total = Self::zero(p, n);
        for (exps, c) in terms {
            let c = c % p;
            if c == 0 {
                continue;
            }
            let t = Self::from_terms(p, n, [(exps, 0, c)])?;
            total = total.add(&t)?;
        }
        Ok(total)
    }

    /// `ι(a · x)` for `a ∈ F_p^n`.
    pub fn linear(p: u32, a: &[u32]) -> Result<Self> {
        let n = a.len();
        Self::classical(
            p,
            n,
            (0..n).map(|i| {
                let mut e = vec![0; n];
                e[i] = 1;
                (e, a[i])
            }),
        )
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, u32> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_classical(&self) -> bool {
        self.depth() == 0
    }

    /// `(degree, depth)`; `(0, 0)` for the zero polynomial.
    pub fn degree_and_depth(&self) -> (u32, u32) {
        (self.degree(), self.depth())
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree(self.p)).max().unwrap_or(0)
    }

    pub fn depth(&self) -> u32 {
        self.terms.keys().map(|m| m.depth).max().unwrap_or(0)
    }

    /// Per-monomial numerators over `p^k`, `k = depth + 1`.
    fn numerators(&self) -> (u32, BTreeMap<Vec<u32>, u64>) {
        let k = self.depth() + 1;
        let mut out: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
        for (m, &c) in &self.terms {
            let v = c as u64 * p_pow(self.p, k - m.depth - 1);
            *out.entry(m.exponents.clone()).or_default() += v;
        }
        (k, out)
    }

    /// Inverse of [`Self::numerators`]: expands `N_d mod p^k` into digits.
    fn from_numerators(p: u32, n: usize, k: u32, nums: BTreeMap<Vec<u32>, u64>) -> Self {
        let q = p_pow(p, k);
        let mut terms = BTreeMap::new();
        for (exps, num) in nums {
            let mut num = num % q;
            // digit j of N sits at depth k - 1 - j
            for j in 0..k {
                let digit = (num % p as u64) as u32;
                num /= p as u64;
                if digit != 0 {
                    terms.insert(Monomial::new(exps.clone(), k - 1 - j), digit);
                }
            }
        }
        NcPolynomial { p, n, terms }
    }

    pub(crate) fn evaluate_coords(&self, x: &[u32]) -> TorusValue {
        if self.terms.is_empty() {
            return TorusValue::zero(self.p);
        }
        let (k, nums) = self.numerators();
        let q = p_pow(self.p, k);
        let mut acc: u128 = 0;
        for (exps, num) in &nums {
            acc = (acc + *num as u128 * monomial_value(x, exps, q) as u128) % q as u128;
        }
        TorusValue::from_numerator(self.p, acc as u64, k)
    }

    /// `P(x)`; lies in `U_{depth+1}`.
    pub fn evaluate(&self, x: &FieldVec) -> Result<TorusValue> {
        if x.p() != self.p {
            return Err(Error::ModulusMismatch { expected: self.p, found: x.p() });
        }
        if x.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.dim() });
        }
        Ok(self.evaluate_coords(x.coords()))
    }

    /// Values at every point of `F_p^n`, in canonical order.
    pub fn table(&self) -> Result<Vec<TorusValue>> {
        let space = Space::new(self.p, self.n)?;
        Ok(self.table_on(&space))
    }

    pub(crate) fn table_on(&self, space: &Space) -> Vec<TorusValue> {
        let p = self.p;
        let (k, nums) = self.numerators();
        let q = p_pow(p, k);
        let nums: Vec<(Vec<u32>, u64)> = nums.into_iter().collect();
        // Σ_d N_d |x|^d by one tensor transform per coordinate.
        let mut coeffs = vec![0u64; space.size()];
        for (exps, num) in &nums {
            coeffs[space.index_of_coords(exps)] = num % q;
        }
        let v = vandermonde(p, q);
        apply_tensor(&mut coeffs, p, self.n, &v, q);
        coeffs.into_iter().map(|num| TorusValue::from_numerator(p, num, k)).collect()
    }

    /// Pointwise table of `D_h P(x) = P(x + h) - P(x)`.
    pub fn additive_derivative(&self, h: &FieldVec) -> Result<Vec<TorusValue>> {
        let space = Space::new(self.p, self.n)?;
        let table = self.table_on(&space);
        let h = space.index_of(h)?;
        Ok(additive_derivative(&space, &table, h))
    }

    pub fn add(&self, other: &NcPolynomial) -> Result<NcPolynomial> {
        if other.p != self.p {
            return Err(Error::ModulusMismatch { expected: self.p, found: other.p });
        }
        if other.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        let (ka, mut a) = self.numerators();
        let (kb, b) = other.numerators();
        let k = ka.max(kb);
        let q = p_pow(self.p, k);
        for v in a.values_mut() {
            *v *= p_pow(self.p, k - ka);
        }
        for (exps, v) in b {
            let e = a.entry(exps).or_default();
            *e = (*e + v * p_pow(self.p, k - kb)) % q;
        }
        Ok(Self::from_numerators(self.p, self.n, k, a))
    }

    pub fn neg(&self) -> NcPolynomial {
        self.int_scale(-1)
    }

    /// `λ P`; depth drops wherever `p` divides the scaled numerators.
    pub fn int_scale(&self, lambda: i64) -> NcPolynomial {
        let (k, mut nums) = self.numerators();
        let q = p_pow(self.p, k) as i128;
        for v in nums.values_mut() {
            *v = (lambda as i128 * *v as i128).rem_euclid(q) as u64;
        }
        Self::from_numerators(self.p, self.n, k, nums)
    }

    /// `P ∘ A` as `(shift, polynomial)`, where `shift = P(A(0))`.
    pub fn compose_affine(&self, a: &AffineMap) -> Result<(TorusValue, NcPolynomial)> {
        if a.p() != self.p {
            return Err(Error::ModulusMismatch { expected: self.p, found: a.p() });
        }
        if a.codomain_dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: a.codomain_dim() });
        }
        let m = a.domain_dim();
        let domain = Space::new(self.p, m)?;
        let mut x = vec![0; m];
        let mut y = vec![0; self.n];
        let table: Vec<TorusValue> = (0..domain.size())
            .map(|i| {
                domain.digits_into(i, &mut x);
                a.apply_coords(&x, &mut y);
                self.evaluate_coords(&y)
            })
            .collect();
        interpolate_with_shift(self.p, m, &table)
    }
}

/// `V[x][d] = x^d mod q` for `x, d < p` (with `0^0 = 1`).
fn vandermonde(p: u32, q: u64) -> Vec<u64> {
    let p = p as usize;
    let mut v = vec![0u64; p * p];
    for x in 0..p {
        let mut acc = 1 % q;
        for d in 0..p {
            v[x * p + d] = acc;
            acc = acc * x as u64 % q;
        }
    }
    v
}

/// Inverse of the Vandermonde matrix mod the prime `p`.
fn inverse_vandermonde(p: u32) -> Vec<u64> {
    let pu = p as usize;
    let v = vandermonde(p, p as u64);
    let mut a: Vec<u64> = (0..pu)
        .flat_map(|r| {
            let mut row = v[r * pu..(r + 1) * pu].to_vec();
            row.extend((0..pu).map(|c| (c == r) as u64));
            row
        })
        .collect();
    let w = 2 * pu;
    let pm = p as u64;
    for col in 0..pu {
        let pivot = (col..pu).find(|&r| a[r * w + col] != 0).expect("Vandermonde is invertible");
        for c in 0..w {
            a.swap(col * w + c, pivot * w + c);
        }
        let inv = inv_mod_p(a[col * w + col] as u32, p) as u64;
        for c in 0..w {
            a[col * w + c] = a[col * w + c] * inv % pm;
        }
        for r in 0..pu {
            let f = a[r * w + col];
            if r != col && f != 0 {
                for c in 0..w {
                    a[r * w + c] = (a[r * w + c] + (pm - f) * a[col * w + c]) % pm;
                }
            }
        }
    }
    (0..pu).flat_map(|r| a[r * w + pu..(r + 1) * w].to_vec()).collect()
}

/// Applies the `p x p` matrix `mat` along every coordinate axis, mod `q`.
fn apply_tensor(data: &mut [u64], p: u32, n: usize, mat: &[u64], q: u64) {
    let p = p as usize;
    let mut stride = 1;
    let mut buf = vec![0u64; p];
    for _ in 0..n {
        let block = stride * p;
        for base in (0..data.len()).step_by(block) {
            for off in 0..stride {
                for (a, slot) in buf.iter_mut().enumerate() {
                    let mut acc: u128 = 0;
                    for b in 0..p {
                        acc += mat[a * p + b] as u128 * data[base + off + b * stride] as u128;
                    }
                    *slot = (acc % q as u128) as u64;
                }
                for (a, &val) in buf.iter().enumerate() {
                    data[base + off + a * stride] = val;
                }
            }
        }
        stride = block;
    }
}

/// Table of `D_h T(x) = T(x + h) - T(x)`, `h` given by its point index.
pub fn additive_derivative(space: &Space, table: &[TorusValue], h: usize) -> Vec<TorusValue> {
    (0..space.size())
        .map(|x| table[space.add_indices(x, h)].sub(&table[x]))
        .collect()
}

fn check_table(p: u32, n: usize, table: &[TorusValue]) -> Result<Space> {
    let space = Space::with_budget(p, n, Budget(u64::MAX))?;
    if table.len() != space.size() {
        return Err(Error::DimensionMismatch { expected: space.size(), found: table.len() });
    }
    if let Some(v) = table.iter().find(|v| v.p() != p) {
        return Err(Error::ModulusMismatch { expected: p, found: v.p() });
    }
    Ok(space)
}

/// The unique shift-0 polynomial with the given table.
///
/// Fails with [`Error::NonzeroShift`] when the value at the origin is not 0.
pub fn interpolate(p: u32, n: usize, table: &[TorusValue]) -> Result<NcPolynomial> {
    check_table(p, n, table)?;
    if !table[0].is_zero() {
        return Err(Error::NonzeroShift(table[0].to_string()));
    }
    interpolate_with_shift(p, n, table).map(|(_, poly)| poly)
}

/// Splits an arbitrary table in `U_K` into `(shift, shift-0 polynomial)`.
pub fn interpolate_with_shift(p: u32, n: usize, table: &[TorusValue]) -> Result<(TorusValue, NcPolynomial)> {
    let space = check_table(p, n, table)?;
    let k_max = table.iter().map(|v| v.exponent()).max().unwrap_or(0);
    let inv = inverse_vandermonde(p);
    let mut nums: Vec<u64> = table.iter().map(|v| v.numerator_at(k_max)).collect();
    let mut terms = BTreeMap::new();
    let mut shift = TorusValue::zero(p);
    let mut exps = vec![0u32; n];
    for j in (1..=k_max).rev() {
        let q = p_pow(p, j);
        let mut coeffs: Vec<u64> = nums.iter().map(|v| v % p as u64).collect();
        apply_tensor(&mut coeffs, p, n, &inv, p as u64);
        for (idx, &c) in coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            if idx == 0 {
                shift = shift.add(&TorusValue::new(p, c as i128, j)?);
            } else {
                space.digits_into(idx, &mut exps);
                terms.insert(Monomial::new(exps.clone(), j - 1), c as u32);
            }
        }
        // peel the top digit off the numerators
        let mut evals = coeffs;
        apply_tensor(&mut evals, p, n, &vandermonde(p, q), q);
        for (v, e) in nums.iter_mut().zip(evals) {
            let r = (*v % q + q - e) % q;
            debug_assert_eq!(r % p as u64, 0);
            *v = r / p as u64;
        }
    }
    Ok((shift, NcPolynomial { p, n, terms }))
}

/// Every shift-0 polynomial on `F_p^n` of degree at most `max_degree` (and
/// depth at most `max_depth`), in a fixed order.
///
/// Each admissible term independently takes one of `p` coefficients, so the
/// family has `p^{#terms}` members; index digits are read little-endian over
/// the term list.
#[derive(Debug, Clone)]
pub struct PolynomialFamily {
    p: u32,
    n: usize,
    terms: Vec<Monomial>,
    size: u128,
}

impl PolynomialFamily {
    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Admissible terms.
    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn size(&self) -> u128 {
        self.size
    }

    pub fn get(&self, mut index: u128) -> NcPolynomial {
        let mut terms = BTreeMap::new();
        for m in &self.terms {
            let c = (index % self.p as u128) as u32;
            index /= self.p as u128;
            if c != 0 {
                terms.insert(m.clone(), c);
            }
        }
        NcPolynomial { p: self.p, n: self.n, terms }
    }

    pub fn iter(&self) -> impl Iterator<Item = NcPolynomial> + '_ {
        (0..self.size).map(move |i| self.get(i))
    }

    /// Members of degree exactly `d` and depth exactly `h`.
    pub fn exact(&self, d: u32, h: u32) -> impl Iterator<Item = NcPolynomial> + '_ {
        self.iter().filter(move |q| q.degree_and_depth() == (d, h))
    }
}

/// All shift-0 polynomials of degree at most `max_degree`.
pub fn enumerate_polynomials(p: u32, n: usize, max_degree: u32, budget: Budget) -> Result<PolynomialFamily> {
    enumerate_polynomials_bounded(p, n, max_degree, u32::MAX, budget)
}

/// As [`enumerate_polynomials`], additionally capping the depth.
pub fn enumerate_polynomials_bounded(
    p: u32,
    n: usize,
    max_degree: u32,
    max_depth: u32,
    budget: Budget,
) -> Result<PolynomialFamily> {
    check_prime(p)?;
    let exps_space = Space::with_budget(p, n, Budget::TABLE_CELLS)?;
    let mut terms = Vec::new();
    let mut exps = vec![0u32; n];
    let top_depth = max_depth.min(max_exponent(p) - 1);
    for h in 0..=top_depth {
        let used = h as u64 * (p - 1) as u64;
        if used >= max_degree as u64 {
            break;
        }
        let room = max_degree as u64 - used;
        for idx in 1..exps_space.size() {
            exps_space.digits_into(idx, &mut exps);
            if exps.iter().map(|&e| e as u64).sum::<u64>() <= room {
                terms.push(Monomial::new(exps.clone(), h));
            }
        }
    }
    let size = sat_pow(p as u128, terms.len() as u64);
    budget.check(&format!("polynomial family on F_{p}^{n} of degree <= {max_degree}"), size)?;
    Ok(PolynomialFamily { p, n, terms, size })
}
