use std::cmp::Ordering;
use std::fmt;

use super::check_prime;
use crate::error::{Error, Result};

/// Largest supported denominator exponent; keeps `p^k` inside `u64`.
pub(crate) fn max_exponent(p: u32) -> u32 {
    let mut k = 0;
    let mut q: u64 = 1;
    while let Some(next) = q.checked_mul(p as u64) {
        if next > (1u64 << 62) {
            break;
        }
        q = next;
        k += 1;
    }
    k
}

pub(crate) fn p_pow(p: u32, k: u32) -> u64 {
    (p as u64).pow(k)
}

/// An element `num / p^k mod 1` of `U_k ⊂ T = R/Z`.
///
/// Always stored normalised: `0 <= num < p^k`, and `k` is minimal, so that
/// `p` does not divide `num` unless the value is zero (then `k = 0`).
/// Equality is therefore structural.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusValue {
    p: u32,
    num: u64,
    k: u32,
}

impl TorusValue {
    pub fn zero(p: u32) -> Self {
        TorusValue { p, num: 0, k: 0 }
    }

    /// `num / p^k mod 1`, normalised.
    pub fn new(p: u32, num: i128, k: u32) -> Result<Self> {
        check_prime(p)?;
        if k > max_exponent(p) {
            return Err(Error::OutOfRange(format!("denominator {p}^{k} is too large")));
        }
        let q = p_pow(p, k) as i128;
        let num = num.rem_euclid(q) as u64;
        Ok(Self::normalized(p, num, k))
    }

    pub(crate) fn normalized(p: u32, mut num: u64, mut k: u32) -> Self {
        if num == 0 {
            return TorusValue { p, num: 0, k: 0 };
        }
        while k > 0 && num.is_multiple_of(p as u64) {
            num /= p as u64;
            k -= 1;
        }
        TorusValue { p, num, k }
    }

    /// Builds from a numerator over the fixed denominator `p^k` (no bounds check
    /// beyond reduction).
    pub(crate) fn from_numerator(p: u32, num: u64, k: u32) -> Self {
        Self::normalized(p, num % p_pow(p, k), k)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    /// Minimal denominator exponent.
    pub fn exponent(&self) -> u32 {
        self.k
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// Whether the value lies in `U_k`.
    pub fn lies_in(&self, k: u32) -> bool {
        self.k <= k
    }

    /// Numerator over the denominator `p^k`; requires `self ∈ U_k`.
    pub fn numerator_at(&self, k: u32) -> u64 {
        debug_assert!(self.k <= k);
        self.num * p_pow(self.p, k - self.k)
    }

    fn check_same(&self, other: &TorusValue) -> Result<()> {
        if self.p != other.p {
            Err(Error::ModulusMismatch { expected: self.p, found: other.p })
        } else {
            Ok(())
        }
    }

    pub fn try_add(&self, other: &TorusValue) -> Result<TorusValue> {
        self.check_same(other)?;
        let k = self.k.max(other.k);
        let q = p_pow(self.p, k);
        let sum = (self.numerator_at(k) as u128 + other.numerator_at(k) as u128) % q as u128;
        Ok(Self::normalized(self.p, sum as u64, k))
    }

    /// Sum of two values over the same prime. Panics on a modulus mismatch;
    /// use [`TorusValue::try_add`] for a checked variant.
    pub fn add(&self, other: &TorusValue) -> TorusValue {
        self.try_add(other).expect("torus values over different primes")
    }

    pub fn neg(&self) -> TorusValue {
        if self.num == 0 {
            return *self;
        }
        TorusValue { p: self.p, num: p_pow(self.p, self.k) - self.num, k: self.k }
    }

    pub fn sub(&self, other: &TorusValue) -> TorusValue {
        self.add(&other.neg())
    }

    /// `lambda * self`; the depth drops whenever `p` divides `lambda * num`.
    pub fn int_scale(&self, lambda: i64) -> TorusValue {
        if self.num == 0 {
            return *self;
        }
        let q = p_pow(self.p, self.k) as i128;
        let prod = (lambda as i128 * self.num as i128).rem_euclid(q);
        Self::normalized(self.p, prod as u64, self.k)
    }

    /// Representative in `[0, 1)`.
    pub fn to_f64(&self) -> f64 {
        if self.num == 0 {
            0.0
        } else {
            self.num as f64 / p_pow(self.p, self.k) as f64
        }
    }

    /// Parses `a/q` (with `q` a power of `p`, written out or as `p^k`) or `0`.
    pub fn parse(p: u32, s: &str) -> Result<TorusValue> {
        let s = s.trim();
        let bad = || Error::Parse(format!("bad torus value {s:?} for p = {p}"));
        let Some((num, den)) = s.split_once('/') else {
            let v: i128 = s.parse().map_err(|_| bad())?;
            if v != 0 {
                return Err(Error::Parse(format!(
                    "torus value {s:?}: only 0 may be written without a denominator"
                )));
            }
            return Ok(TorusValue::zero(p));
        };
        let num: i128 = num.trim().parse().map_err(|_| bad())?;
        let den = den.trim();
        let k = if let Some((base, exp)) = den.split_once('^') {
            let base: u32 = base.trim().parse().map_err(|_| bad())?;
            if base != p {
                return Err(bad());
            }
            exp.trim().parse::<u32>().map_err(|_| bad())?
        } else {
            let mut q: u64 = den.parse().map_err(|_| bad())?;
            let mut k = 0;
            while q > 1 && q.is_multiple_of(p as u64) {
                q /= p as u64;
                k += 1;
            }
            if q != 1 {
                return Err(bad());
            }
            k
        };
        TorusValue::new(p, num, k)
    }
}

/// `ι(x) = |x|/p mod 1`, the embedding of `F_p` into `U_1`.
pub fn iota(p: u32, x: u32) -> TorusValue {
    debug_assert!(x < p);
    TorusValue::normalized(p, (x % p) as u64, 1)
}

impl fmt::Display for TorusValue {
    /// `0` for zero, otherwise `a/q` with `q = p^k` written out.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.num == 0 {
            write!(f, "0")
        } else {
            write!(f, "{}/{}", self.num, p_pow(self.p, self.k))
        }
    }
}

impl fmt::Debug for TorusValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl PartialOrd for TorusValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Orders by prime, then by the value's position in `[0, 1)`.
impl Ord for TorusValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.p.cmp(&other.p).then_with(|| {
            let k = self.k.max(other.k);
            self.numerator_at(k).cmp(&other.numerator_at(k))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tv(p: u32, num: i128, k: u32) -> TorusValue {
        TorusValue::new(p, num, k).unwrap()
    }

    #[test]
    fn examples() {
        assert_eq!(tv(2, 1, 1).add(&tv(2, 1, 1)), TorusValue::zero(2));
        let scaled = tv(2, 1, 2).int_scale(2);
        assert_eq!(scaled, tv(2, 1, 1));
        assert_eq!(scaled.exponent(), 1);
        assert_eq!(tv(3, 1, 1).add(&tv(3, 2, 2)), tv(3, 5, 2));
    }

    #[test]
    fn iota_values() {
        assert_eq!(iota(3, 1), tv(3, 1, 1));
        assert_eq!(iota(2, 0), TorusValue::zero(2));
        assert_eq!(iota(5, 4).to_string(), "4/5");
    }

    #[test]
    fn iota_is_an_injective_homomorphism() {
        for p in [2u32, 3, 5, 7, 11, 13] {
            for x in 0..p {
                for y in 0..p {
                    assert_eq!(iota(p, x).add(&iota(p, y)), iota(p, (x + y) % p));
                    if x != y {
                        assert_ne!(iota(p, x), iota(p, y));
                    }
                }
            }
        }
    }

    #[test]
    fn normalization_is_minimal() {
        let v = tv(3, 9, 3);
        assert_eq!((v.numerator(), v.exponent()), (1, 1));
        assert_eq!(tv(2, 8, 3), TorusValue::zero(2));
        assert_eq!(tv(5, -1, 1), tv(5, 4, 1));
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(TorusValue::parse(2, "1/4").unwrap(), tv(2, 1, 2));
        assert_eq!(TorusValue::parse(2, "1/2^2").unwrap(), tv(2, 1, 2));
        assert_eq!(TorusValue::parse(3, "0").unwrap(), TorusValue::zero(3));
        assert_eq!(TorusValue::parse(3, "6/9").unwrap(), tv(3, 2, 1));
        assert!(TorusValue::parse(2, "1/3").is_err());
        assert!(TorusValue::parse(2, "1").is_err());
        assert_eq!(tv(2, 3, 2).to_string(), "3/4");
    }

    #[test]
    fn modulus_mismatch_is_an_error() {
        assert!(tv(2, 1, 1).try_add(&tv(3, 1, 1)).is_err());
    }

    fn arb_value(p: u32) -> impl Strategy<Value = TorusValue> {
        (0i128..1_000_000, 0u32..6).prop_map(move |(n, k)| tv(p, n, k))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn group_laws(p in prop::sample::select(vec![2u32, 3, 5, 7]),
                      seeds in (0i128..1_000_000, 0u32..6, 0i128..1_000_000, 0u32..6, 0i128..1_000_000, 0u32..6)) {
            let a = tv(p, seeds.0, seeds.1);
            let b = tv(p, seeds.2, seeds.3);
            let c = tv(p, seeds.4, seeds.5);
            prop_assert_eq!(a.add(&b), b.add(&a));
            prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
            prop_assert_eq!(a.add(&a.neg()), TorusValue::zero(p));
            let renorm = TorusValue::new(p, a.numerator() as i128, a.exponent()).unwrap();
            prop_assert_eq!(renorm, a);
        }

        #[test]
        fn order_divides_p_to_the_k(a in arb_value(3)) {
            let q = p_pow(3, a.exponent()) as i64;
            prop_assert!(a.int_scale(q).is_zero());
        }
    }
}
