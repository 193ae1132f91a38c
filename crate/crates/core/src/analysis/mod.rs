//! Dense function tables over `F_p^n`, their norms, restrictions and
//! derivatives.
//!
//! Norms follow the expectation convention: `‖f‖_1 = E|f|`,
//! `‖f‖_2 = E|f|^2` (no square root) and `‖f‖_∞ = max |f|`.

mod gowers;

pub use gowers::{gowers_norm, GowersEstimate, GowersMode, MC_CHUNK};

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;

use crate::algebra::{AffineMap, FieldVec, Space, TorusValue};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableKind {
    /// Values in `{0, 1}`.
    Boolean,
    /// Values in `[0, 1]`.
    Unit,
    /// Values in `[-1, 1]`.
    Signed,
    Torus,
    Complex,
}

impl TableKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TableKind::Boolean => "boolean",
            TableKind::Unit => "unit",
            TableKind::Signed => "signed",
            TableKind::Torus => "torus",
            TableKind::Complex => "complex",
        }
    }

    fn admits(self, v: f64) -> bool {
        match self {
            TableKind::Boolean => v == 0.0 || v == 1.0,
            TableKind::Unit => (0.0..=1.0).contains(&v),
            TableKind::Signed => (-1.0..=1.0).contains(&v),
            _ => v.is_finite(),
        }
    }
}

impl fmt::Display for TableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boolean" => Ok(TableKind::Boolean),
            "unit" => Ok(TableKind::Unit),
            "signed" => Ok(TableKind::Signed),
            "torus" => Ok(TableKind::Torus),
            "complex" => Ok(TableKind::Complex),
            other => Err(Error::Parse(format!("unknown table kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableValues {
    /// Boolean, unit-interval and signed tables.
    Real(Vec<f64>),
    Torus(Vec<TorusValue>),
    Complex(Vec<Complex64>),
}

impl TableValues {
    pub fn len(&self) -> usize {
        match self {
            TableValues::Real(v) => v.len(),
            TableValues::Torus(v) => v.len(),
            TableValues::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    Linf,
}

/// A function `F_p^n → {boolean | unit | signed | torus | complex}` stored
/// densely in canonical point order.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionTable {
    space: Space,
    kind: TableKind,
    values: TableValues,
}

impl FunctionTable {
    pub fn new(space: Space, kind: TableKind, values: TableValues) -> Result<Self> {
        if values.len() != space.size() {
            return Err(Error::DimensionMismatch { expected: space.size(), found: values.len() });
        }
        match (&values, kind) {
            (TableValues::Real(v), TableKind::Boolean | TableKind::Unit | TableKind::Signed) => {
                if let Some(x) = v.iter().find(|&&x| !kind.admits(x)) {
                    return Err(Error::OutOfRange(format!("value {x} is not admissible for a {kind} table")));
                }
            }
            (TableValues::Torus(v), TableKind::Torus) => {
                if let Some(x) = v.iter().find(|x| x.p() != space.p()) {
                    return Err(Error::ModulusMismatch { expected: space.p(), found: x.p() });
                }
            }
            (TableValues::Complex(v), TableKind::Complex) => {
                if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::OutOfRange("complex values must be finite".into()));
                }
            }
            _ => return Err(Error::UnsupportedKind(format!("values do not match kind {kind}"))),
        }
        Ok(FunctionTable { space, kind, values })
    }

    pub fn boolean(space: Space, values: Vec<f64>) -> Result<Self> {
        Self::new(space, TableKind::Boolean, TableValues::Real(values))
    }

    pub fn from_bits(space: Space, bits: &[bool]) -> Result<Self> {
        Self::boolean(space, bits.iter().map(|&b| b as u8 as f64).collect())
    }

    pub fn unit(space: Space, values: Vec<f64>) -> Result<Self> {
        Self::new(space, TableKind::Unit, TableValues::Real(values))
    }

    pub fn signed(space: Space, values: Vec<f64>) -> Result<Self> {
        Self::new(space, TableKind::Signed, TableValues::Real(values))
    }

    pub fn torus(space: Space, values: Vec<TorusValue>) -> Result<Self> {
        Self::new(space, TableKind::Torus, TableValues::Torus(values))
    }

    pub fn complex(space: Space, values: Vec<Complex64>) -> Result<Self> {
        Self::new(space, TableKind::Complex, TableValues::Complex(values))
    }

    /// `e(T) = exp(2πi T)` of a torus table.
    pub fn phase(space: Space, values: &[TorusValue]) -> Result<Self> {
        Self::complex(space, values.iter().map(|&t| phase(t)).collect())
    }

    pub fn constant(space: Space, kind: TableKind, value: f64) -> Result<Self> {
        Self::new(space, kind, TableValues::Real(vec![value; space.size()]))
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn p(&self) -> u32 {
        self.space.p()
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn len(&self) -> usize {
        self.space.size()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn values(&self) -> &TableValues {
        &self.values
    }

    /// Real values of a boolean, unit or signed table.
    pub fn real(&self) -> Option<&[f64]> {
        match &self.values {
            TableValues::Real(v) => Some(v),
            _ => None,
        }
    }

    pub(crate) fn real_or_err(&self) -> Result<&[f64]> {
        self.real()
            .ok_or_else(|| Error::UnsupportedKind(format!("{} table where a real table is required", self.kind)))
    }

    pub fn torus_values(&self) -> Option<&[TorusValue]> {
        match &self.values {
            TableValues::Torus(v) => Some(v),
            _ => None,
        }
    }

    /// Complex lift: real kinds embed, torus tables map through `e(·)`.
    pub fn to_complex(&self) -> Vec<Complex64> {
        match &self.values {
            TableValues::Real(v) => v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            TableValues::Torus(v) => v.iter().map(|&t| phase(t)).collect(),
            TableValues::Complex(v) => v.clone(),
        }
    }

    fn abs_values(&self) -> Result<Vec<f64>> {
        match &self.values {
            TableValues::Real(v) => Ok(v.iter().map(|x| x.abs()).collect()),
            TableValues::Complex(v) => Ok(v.iter().map(|z| z.norm()).collect()),
            TableValues::Torus(_) => Err(Error::UnsupportedKind("norms of torus tables are undefined".into())),
        }
    }

    pub fn norm(&self, which: Norm) -> Result<f64> {
        let a = self.abs_values()?;
        let size = a.len() as f64;
        Ok(match which {
            Norm::L1 => a.iter().sum::<f64>() / size,
            Norm::L2 => a.iter().map(|x| x * x).sum::<f64>() / size,
            Norm::Linf => a.iter().cloned().fold(0.0, f64::max),
        })
    }

    /// `E f` of a real table.
    pub fn mean(&self) -> Result<f64> {
        let v = self.real_or_err()?;
        Ok(v.iter().sum::<f64>() / v.len() as f64)
    }

    fn check_same_space(&self, other: &FunctionTable) -> Result<()> {
        if self.p() != other.p() {
            return Err(Error::ModulusMismatch { expected: self.p(), found: other.p() });
        }
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: other.n() });
        }
        Ok(())
    }

    /// `f - g` of two real tables; the result is tagged signed when it fits
    /// in `[-1, 1]` and complex otherwise.
    pub fn sub(&self, other: &FunctionTable) -> Result<FunctionTable> {
        self.check_same_space(other)?;
        match (&self.values, &other.values) {
            (TableValues::Real(a), TableValues::Real(b)) => {
                let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                if d.iter().all(|x| (-1.0..=1.0).contains(x)) {
                    Self::signed(self.space, d)
                } else {
                    Self::complex(self.space, d.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
                }
            }
            _ => {
                let a = self.to_complex();
                let b = other.to_complex();
                Self::complex(self.space, a.iter().zip(&b).map(|(x, y)| x - y).collect())
            }
        }
    }

    /// `‖f - g‖_1`.
    pub fn l1_distance(&self, other: &FunctionTable) -> Result<f64> {
        self.sub(other)?.norm(Norm::L1)
    }

    /// `Δ_h f(x) = f(x + h) · conj(f(x))`, on the complex lift.
    pub fn mult_derivative(&self, h: &FieldVec) -> Result<FunctionTable> {
        let hi = self.space.index_of(h)?;
        let f = self.to_complex();
        let out = mult_derivative_values(&self.space, &f, hi);
        Self::complex(self.space, out)
    }

    /// `f ∘ A` on `F_p^m`.
    pub fn restrict(&self, a: &AffineMap) -> Result<FunctionTable> {
        if a.p() != self.p() {
            return Err(Error::ModulusMismatch { expected: self.p(), found: a.p() });
        }
        if a.codomain_dim() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: a.codomain_dim() });
        }
        let idx = a.image_indices()?;
        let domain = Space::new(self.p(), a.domain_dim())?;
        let values = match &self.values {
            TableValues::Real(v) => TableValues::Real(idx.iter().map(|&i| v[i]).collect()),
            TableValues::Torus(v) => TableValues::Torus(idx.iter().map(|&i| v[i]).collect()),
            TableValues::Complex(v) => TableValues::Complex(idx.iter().map(|&i| v[i]).collect()),
        };
        Ok(FunctionTable { space: domain, kind: self.kind, values })
    }

    /// Independent per-point draws with `Pr[f'(x) = 1] = f(x)`.
    pub fn bernoulli_round<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<FunctionTable> {
        if !matches!(self.kind, TableKind::Boolean | TableKind::Unit) {
            return Err(Error::UnsupportedKind(format!("bernoulli rounding of a {} table", self.kind)));
        }
        let v = self.real_or_err()?;
        let out = v.iter().map(|&q| if rng.gen::<f64>() < q { 1.0 } else { 0.0 }).collect();
        Self::boolean(self.space, out)
    }
}

/// `exp(2πi t)` for `t ∈ T`.
pub fn phase(t: TorusValue) -> Complex64 {
    Complex64::from_polar(1.0, std::f64::consts::TAU * t.to_f64())
}

pub(crate) fn mult_derivative_values(space: &Space, f: &[Complex64], h: usize) -> Vec<Complex64> {
    (0..space.size()).map(|x| f[space.add_indices(x, h)] * f[x].conj()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;
    use std::collections::HashMap;

    fn space(p: u32, n: usize) -> Space {
        Space::new(p, n).unwrap()
    }

    #[test]
    fn norm_examples() {
        let s = space(2, 2);
        let one = FunctionTable::constant(s, TableKind::Boolean, 1.0).unwrap();
        for w in [Norm::L1, Norm::L2, Norm::Linf] {
            assert_eq!(one.norm(w).unwrap(), 1.0);
        }
        let spike = FunctionTable::boolean(s, vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(spike.norm(Norm::L1).unwrap(), 0.25);
        assert_eq!(spike.norm(Norm::L2).unwrap(), 0.25);
        assert_eq!(spike.norm(Norm::Linf).unwrap(), 1.0);
        let zero = FunctionTable::constant(s, TableKind::Signed, 0.0).unwrap();
        for w in [Norm::L1, Norm::L2, Norm::Linf] {
            assert_eq!(zero.norm(w).unwrap(), 0.0);
        }
        let t = FunctionTable::torus(s, vec![TorusValue::zero(2); 4]).unwrap();
        assert!(matches!(t.norm(Norm::L1), Err(Error::UnsupportedKind(_))));
    }

    #[test]
    fn kinds_are_validated() {
        let s = space(2, 1);
        assert!(FunctionTable::boolean(s, vec![0.0, 0.5]).is_err());
        assert!(FunctionTable::unit(s, vec![0.0, 1.5]).is_err());
        assert!(FunctionTable::signed(s, vec![-1.0, 1.0]).is_ok());
        assert!(FunctionTable::signed(s, vec![0.0]).is_err());
    }

    #[test]
    fn mult_derivative_examples() {
        let s = space(2, 1);
        let f = FunctionTable::phase(s, &[TorusValue::zero(2), TorusValue::new(2, 1, 1).unwrap()]).unwrap();
        let h0 = FieldVec::zero(2, 1);
        let d0 = f.mult_derivative(&h0).unwrap().to_complex();
        assert!(d0.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));
        let d1 = f.mult_derivative(&FieldVec::unit(2, 1, 0)).unwrap().to_complex();
        assert!(d1.iter().all(|z| (z + Complex64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn mult_derivative_modulus_identity() {
        let s = space(3, 2);
        for seed in 0..100 {
            let mut rng = trial_rng(seed, 0);
            let v: Vec<Complex64> = (0..9).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let f = FunctionTable::complex(s, v.clone()).unwrap();
            let hi = rng.gen_range(0..9);
            let d = f.mult_derivative(&s.point(hi)).unwrap().to_complex();
            for x in 0..9 {
                let expected = v[s.add_indices(x, hi)].norm() * v[x].norm();
                assert!((d[x].norm() - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn restriction_examples() {
        let s = space(2, 2);
        let f = FunctionTable::boolean(s, vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        let id = AffineMap::identity(2, 2).unwrap();
        assert_eq!(f.restrict(&id).unwrap(), f);
        let e1 = AffineMap::new(2, 1, 2, vec![1, 0], vec![0, 0]).unwrap();
        assert_eq!(f.restrict(&e1).unwrap().real().unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn restriction_is_functorial() {
        let s = space(3, 3);
        for seed in 0..100 {
            let mut rng = trial_rng(seed, 1);
            let v: Vec<f64> = (0..27).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let f = FunctionTable::signed(s, v).unwrap();
            let a = crate::algebra::sample_affine_embedding(&mut rng, 3, 2, 3).unwrap();
            let b = crate::algebra::sample_affine_embedding(&mut rng, 3, 1, 2).unwrap();
            let lhs = f.restrict(&a).unwrap().restrict(&b).unwrap();
            let rhs = f.restrict(&a.compose(&b).unwrap()).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn bernoulli_rounding() {
        let s = space(2, 1);
        let mut rng = trial_rng(1, 0);
        let one = FunctionTable::constant(s, TableKind::Unit, 1.0).unwrap();
        assert_eq!(one.bernoulli_round(&mut rng).unwrap().real().unwrap(), &[1.0, 1.0]);
        let zero = FunctionTable::constant(s, TableKind::Unit, 0.0).unwrap();
        assert_eq!(zero.bernoulli_round(&mut rng).unwrap().real().unwrap(), &[0.0, 0.0]);

        let half = FunctionTable::constant(s, TableKind::Unit, 0.5).unwrap();
        let draws = 100_000u64;
        let mut counts: HashMap<Vec<u8>, u64> = HashMap::new();
        for seed in 0..draws {
            let g = half.bernoulli_round(&mut trial_rng(seed, 0)).unwrap();
            let key = g.real().unwrap().iter().map(|&x| x as u8).collect();
            *counts.entry(key).or_default() += 1;
        }
        assert_eq!(counts.len(), 4);
        for c in counts.values() {
            assert!((*c as f64 / draws as f64 - 0.25).abs() < 0.01);
        }
    }
}
