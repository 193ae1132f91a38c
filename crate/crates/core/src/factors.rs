//! Polynomial factors, atoms, conditional expectations and rank searches.
//!
//! Atom labels are packed into a single integer code in mixed radix: slot
//! `i` contributes its numerator over `p^{h_i+1}`, and slot 1 varies
//! fastest. Structure functions `Γ` are stored as dense tables over codes.
//!
//! Rank is searched by brute force. `rank_d(P) <= r` is decided by asking
//! whether `P` is measurable with respect to some factor of `r` polynomials
//! of degree `< d`; that is equivalent to the existence of `Γ` and never
//! builds `Γ`. Every search is budgeted and reports a lower bound, an upper
//! bound when one is known, and the witness that realises the upper bound.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;

use crate::algebra::{AffineMap, EmbeddingEnsemble, FieldVec, Space, TorusValue};
use crate::analysis::{gowers_norm, FunctionTable, GowersMode, Norm, TableKind};
use crate::budget::{sat_pow, Budget};
use crate::error::{Error, Result};
use crate::polynomials::{enumerate_polynomials, NcPolynomial};

/// `(b_1, …, b_C)` with `b_i ∈ U_{h_i+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomLabel(pub Vec<TorusValue>);

impl fmt::Display for AtomLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Mixed-radix packing of atom labels for a fixed depth vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelSpace {
    p: u32,
    depths: Vec<u32>,
    radices: Vec<u64>,
    order: u64,
}

impl LabelSpace {
    pub fn new(p: u32, depths: Vec<u32>) -> Result<Self> {
        crate::algebra::check_prime(p)?;
        let mut radices = Vec::with_capacity(depths.len());
        let mut order: u128 = 1;
        for &h in &depths {
            let r = sat_pow(p as u128, h as u64 + 1);
            order = order.saturating_mul(r);
            if order > (1u128 << 62) {
                return Err(Error::OutOfRange("factor order does not fit in 62 bits".into()));
            }
            radices.push(r as u64);
        }
        Ok(LabelSpace { p, depths, radices, order: order as u64 })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn depths(&self) -> &[u32] {
        &self.depths
    }

    /// `‖B‖ = ∏ p^{h_i+1}`.
    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn complexity(&self) -> usize {
        self.depths.len()
    }

    pub fn code_of_values(&self, values: &[TorusValue]) -> Result<u64> {
        if values.len() != self.depths.len() {
            return Err(Error::DimensionMismatch { expected: self.depths.len(), found: values.len() });
        }
        let mut code = 0u64;
        let mut place = 1u64;
        for (i, v) in values.iter().enumerate() {
            if v.p() != self.p {
                return Err(Error::ModulusMismatch { expected: self.p, found: v.p() });
            }
            let k = self.depths[i] + 1;
            if !v.lies_in(k) {
                return Err(Error::OutOfRange(format!("label value {v} is not in U_{k}")));
            }
            code += v.numerator_at(k) * place;
            place *= self.radices[i];
        }
        Ok(code)
    }

    pub fn code_of(&self, label: &AtomLabel) -> Result<u64> {
        self.code_of_values(&label.0)
    }

    pub fn label_of(&self, mut code: u64) -> AtomLabel {
        let mut out = Vec::with_capacity(self.depths.len());
        for (i, &r) in self.radices.iter().enumerate() {
            out.push(TorusValue::from_numerator(self.p, code % r, self.depths[i] + 1));
            code /= r;
        }
        AtomLabel(out)
    }

    /// Numerator digits of a code, slot by slot.
    pub fn digits(&self, mut code: u64) -> Vec<u64> {
        self.radices
            .iter()
            .map(|&r| {
                let d = code % r;
                code /= r;
                d
            })
            .collect()
    }
}

/// The factor `B(P_1, …, P_C)` with its per-point atom codes.
#[derive(Debug, Clone)]
pub struct PolyFactor {
    space: Space,
    polys: Vec<NcPolynomial>,
    labels: LabelSpace,
    codes: Vec<u64>,
}

impl PolyFactor {
    pub fn new(p: u32, n: usize, polys: Vec<NcPolynomial>) -> Result<Self> {
        let space = Space::new(p, n)?;
        for q in &polys {
            if q.p() != p {
                return Err(Error::ModulusMismatch { expected: p, found: q.p() });
            }
            if q.n() != n {
                return Err(Error::DimensionMismatch { expected: n, found: q.n() });
            }
        }
        let labels = LabelSpace::new(p, polys.iter().map(|q| q.depth()).collect())?;
        let mut codes = vec![0u64; space.size()];
        let mut place = 1u64;
        for (i, q) in polys.iter().enumerate() {
            let k = labels.depths[i] + 1;
            for (c, v) in codes.iter_mut().zip(q.table_on(&space)) {
                *c += v.numerator_at(k) * place;
            }
            place *= labels.radices[i];
        }
        Ok(PolyFactor { space, polys, labels, codes })
    }

    /// The factor with no polynomials and one atom.
    pub fn trivial(p: u32, n: usize) -> Result<Self> {
        Self::new(p, n, Vec::new())
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

    pub fn polys(&self) -> &[NcPolynomial] {
        &self.polys
    }

    pub fn complexity(&self) -> usize {
        self.polys.len()
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.polys.iter().map(|q| q.degree()).collect()
    }

    pub fn depths(&self) -> &[u32] {
        &self.labels.depths
    }

    /// Maximum degree of the defining polynomials.
    pub fn degree(&self) -> u32 {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn order(&self) -> u64 {
        self.labels.order
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.labels
    }

    /// Atom code of every point, in canonical order.
    pub fn codes(&self) -> &[u64] {
        &self.codes
    }

    pub fn atom_of(&self, x: &FieldVec) -> Result<AtomLabel> {
        let i = self.space.index_of(x)?;
        Ok(self.labels.label_of(self.codes[i]))
    }

    pub fn nonempty_atoms(&self) -> usize {
        let mut c = self.codes.clone();
        c.sort_unstable();
        c.dedup();
        c.len()
    }

    /// `B(P_1 ∘ A, …, P_C ∘ A)`, shifts dropped.
    pub fn restrict(&self, a: &AffineMap) -> Result<PolyFactor> {
        let polys = self
            .polys
            .iter()
            .map(|q| q.compose_affine(a).map(|(_, r)| r))
            .collect::<Result<Vec<_>>>()?;
        PolyFactor::new(self.p(), a.domain_dim(), polys)
    }

    /// Whether `f` is constant on every atom.
    pub fn is_measurable(&self, f: &FunctionTable) -> Result<bool> {
        self.check_space(f.space())?;
        let mut seen: HashMap<u64, usize> = HashMap::new();
        let same = |i: usize, j: usize| match f.values() {
            crate::analysis::TableValues::Real(v) => v[i] == v[j],
            crate::analysis::TableValues::Torus(v) => v[i] == v[j],
            crate::analysis::TableValues::Complex(v) => v[i] == v[j],
        };
        for (x, &c) in self.codes.iter().enumerate() {
            let first = *seen.entry(c).or_insert(x);
            if !same(first, x) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn check_space(&self, s: Space) -> Result<()> {
        if s.p() != self.p() {
            return Err(Error::ModulusMismatch { expected: self.p(), found: s.p() });
        }
        if s.n() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: s.n() });
        }
        Ok(())
    }
}

/// A structure function `Γ: ∏ U_{h_i+1} → [0, 1]`, total over all labels.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureFunction {
    labels: LabelSpace,
    values: Vec<f64>,
}

impl StructureFunction {
    pub fn new(labels: LabelSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() as u64 != labels.order() {
            return Err(Error::DimensionMismatch { expected: labels.order() as usize, found: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange(format!("structure function value {v} is outside [0, 1]")));
        }
        Ok(StructureFunction { labels, values })
    }

    pub fn constant(labels: LabelSpace, value: f64) -> Result<Self> {
        let n = labels.order() as usize;
        Self::new(labels, vec![value; n])
    }

    /// Single slot of depth `h`: `a / p^{h+1} ↦ a / (p^{h+1} - 1)`.
    pub fn identity(p: u32, h: u32) -> Result<Self> {
        let labels = LabelSpace::new(p, vec![h])?;
        let top = (labels.order() - 1) as f64;
        let values = (0..labels.order()).map(|a| a as f64 / top).collect();
        Self::new(labels, values)
    }

    pub fn from_fn(labels: LabelSpace, f: impl Fn(&AtomLabel) -> f64) -> Result<Self> {
        let values = (0..labels.order()).map(|c| f(&labels.label_of(c))).collect();
        Self::new(labels, values)
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at_code(&self, code: u64) -> f64 {
        self.values[code as usize]
    }

    pub fn at(&self, label: &AtomLabel) -> Result<f64> {
        Ok(self.values[self.labels.code_of(label)? as usize])
    }

    /// `Γ ∘ B` as a unit-interval table.
    pub fn compose(&self, b: &PolyFactor) -> Result<FunctionTable> {
        if b.depths() != self.labels.depths() || b.p() != self.labels.p() {
            return Err(Error::Precondition(format!(
                "structure function over depths {:?} applied to a factor of depths {:?}",
                self.labels.depths(),
                b.depths()
            )));
        }
        FunctionTable::unit(b.space(), b.codes().iter().map(|&c| self.at_code(c)).collect())
    }
}

/// `E[f | B]`.
pub fn conditional_expectation(f: &FunctionTable, b: &PolyFactor) -> Result<FunctionTable> {
    b.check_space(f.space())?;
    let v = f.real_or_err()?;
    let mut sums: HashMap<u64, (f64, u64)> = HashMap::new();
    for (x, &c) in b.codes().iter().enumerate() {
        let e = sums.entry(c).or_insert((0.0, 0));
        e.0 += v[x];
        e.1 += 1;
    }
    let out: Vec<f64> = b
        .codes()
        .iter()
        .map(|c| {
            let (s, k) = sums[c];
            s / k as f64
        })
        .collect();
    let kind = match f.kind() {
        TableKind::Signed => TableKind::Signed,
        _ => TableKind::Unit,
    };
    let out = if kind == TableKind::Unit {
        out.into_iter().map(|x| x.clamp(0.0, 1.0)).collect()
    } else {
        out.into_iter().map(|x| x.clamp(-1.0, 1.0)).collect()
    };
    FunctionTable::new(f.space(), kind, crate::analysis::TableValues::Real(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refinement {
    Syntactic,
    Semantic,
    Neither,
}

impl Refinement {
    pub fn as_str(self) -> &'static str {
        match self {
            Refinement::Syntactic => "syntactic",
            Refinement::Semantic => "semantic",
            Refinement::Neither => "neither",
        }
    }
}

/// How `refined` relates to `base`: syntactic when its polynomial sequence
/// starts with that of `base`, semantic when its atoms refine those of
/// `base`.
pub fn refinement_relation(refined: &PolyFactor, base: &PolyFactor) -> Result<Refinement> {
    refined.check_space(base.space())?;
    let prefix = refined.polys().len() >= base.polys().len() && refined.polys()[..base.polys().len()] == *base.polys();
    if prefix {
        return Ok(Refinement::Syntactic);
    }
    let mut map: HashMap<u64, u64> = HashMap::new();
    for (a, b) in refined.codes().iter().zip(base.codes()) {
        if *map.entry(*a).or_insert(*b) != *b {
            return Ok(Refinement::Neither);
        }
    }
    Ok(Refinement::Semantic)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RankValue {
    Finite(u32),
    Infinite,
}

impl fmt::Display for RankValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankValue::Finite(r) => write!(f, "{r}"),
            RankValue::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankKind {
    Exact,
    AtMost,
    Inconclusive,
}

impl RankKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RankKind::Exact => "exact",
            RankKind::AtMost => "at_most",
            RankKind::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    /// The rank is at least this.
    pub lower: RankValue,
    /// The rank is at most this, when a witness is known.
    pub upper: Option<RankValue>,
    /// Lower-degree polynomials `Q_1, …, Q_r` through which the polynomial
    /// (or the λ-combination) factors; realises `upper`.
    pub witness: Vec<NcPolynomial>,
    /// For factor rank: the combination `λ` realising `upper`, with its degree `d_λ`.
    pub lambda: Option<(Vec<u64>, u32)>,
    /// Work a refused enumeration would have needed.
    pub required_budget: Option<u128>,
}

impl RankReport {
    fn exact(v: RankValue, witness: Vec<NcPolynomial>) -> Self {
        RankReport { lower: v, upper: Some(v), witness, lambda: None, required_budget: None }
    }

    pub fn kind(&self) -> RankKind {
        match self.upper {
            Some(u) if u == self.lower => RankKind::Exact,
            Some(_) => RankKind::AtMost,
            None => RankKind::Inconclusive,
        }
    }

    /// The rank, when the search settled it.
    pub fn value(&self) -> Option<RankValue> {
        (self.kind() == RankKind::Exact).then_some(self.lower)
    }

    /// `Some(true)` if the rank is provably `>= r`, `Some(false)` if provably `< r`.
    pub fn at_least(&self, r: u32) -> Option<bool> {
        let r = RankValue::Finite(r);
        if self.lower >= r {
            Some(true)
        } else if self.upper.is_some_and(|u| u < r) {
            Some(false)
        } else {
            None
        }
    }
}

/// Class id of each point, numbered by first occurrence.
fn partition_of(values: impl Iterator<Item = u64>) -> Vec<u32> {
    let mut ids: HashMap<u64, u32> = HashMap::new();
    values
        .map(|v| {
            let next = ids.len() as u32;
            *ids.entry(v).or_insert(next)
        })
        .collect()
}

fn refine(a: &[u32], b: &[u32]) -> Vec<u32> {
    partition_of(a.iter().zip(b).map(|(&x, &y)| ((x as u64) << 32) | y as u64))
}

fn measurable(target: &[u64], part: &[u32]) -> bool {
    let mut value: HashMap<u32, u64> = HashMap::new();
    target.iter().zip(part).all(|(t, c)| value.entry(*c).or_insert(*t) == t)
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Depth-first search for `r` partitions (increasing indices from `start`)
/// whose common refinement makes `target` measurable.
fn search_combination(parts: &[Vec<u32>], target: &[u64], current: &[u32], start: usize, r: usize, chosen: &mut Vec<usize>) -> bool {
    if r == 0 {
        return measurable(target, current);
    }
    for i in start..=parts.len() - r {
        chosen.push(i);
        let next = refine(current, &parts[i]);
        if search_combination(parts, target, &next, i + 1, r - 1, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// Brute-force `rank_d(P)` over factors of at most `r_max` polynomials of
/// degree `<= d - 1` on the same space.
pub fn rank_d_search(poly: &NcPolynomial, d: u32, r_max: u32, budget: Budget) -> Result<RankReport> {
    let (p, n) = (poly.p(), poly.n());
    let space = Space::new(p, n)?;
    let k = poly.depth() + 1;
    let target: Vec<u64> = poly.table_on(&space).iter().map(|v| v.numerator_at(k)).collect();
    if target.iter().all(|&t| t == target[0]) {
        return Ok(RankReport::exact(RankValue::Finite(0), Vec::new()));
    }
    if d <= 1 {
        return Ok(RankReport::exact(RankValue::Infinite, Vec::new()));
    }
    // coordinates have degree 1 < d and separate points
    let coords: Vec<NcPolynomial> = (0..n)
        .map(|i| {
            let mut e = vec![0; n];
            e[i] = 1;
            NcPolynomial::monomial(p, e, 0)
        })
        .collect::<Result<_>>()?;
    let upper_n = RankValue::Finite(n as u32);
    let mut report = RankReport {
        lower: RankValue::Finite(1),
        upper: Some(upper_n),
        witness: coords,
        lambda: None,
        required_budget: None,
    };
    let family = match enumerate_polynomials(p, n, d - 1, budget) {
        Ok(f) => f,
        Err(Error::BudgetExceeded { required, .. }) => {
            report.required_budget = Some(required);
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    let size = space.size() as u128;
    let mut work = family.size().saturating_mul(size);
    if let Err(Error::BudgetExceeded { required, .. }) = budget.check("rank family tables", work) {
        report.required_budget = Some(required);
        return Ok(report);
    }
    let mut parts: Vec<Vec<u32>> = Vec::new();
    let mut reps: Vec<NcPolynomial> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for q in family.iter().skip(1) {
        let kq = q.depth() + 1;
        let part = partition_of(q.table_on(&space).iter().map(|v| v.numerator_at(kq)));
        if seen.insert(part.clone()) {
            parts.push(part);
            reps.push(q);
        }
    }
    let top = r_max.min(n as u32);
    let trivial = vec![0u32; space.size()];
    for r in 1..=top {
        if r == n as u32 {
            // nothing smaller works, so the coordinate witness is optimal
            report.lower = upper_n;
            return Ok(report);
        }
        let combos = binomial(parts.len() as u128, r as u128);
        work = work.saturating_add(combos.saturating_mul(size));
        if let Err(Error::BudgetExceeded { required, .. }) = budget.check("rank search", work) {
            report.required_budget = Some(required);
            return Ok(report);
        }
        let r = r as usize;
        let found = (0..parts.len().saturating_sub(r - 1)).into_par_iter().find_map_first(|i| {
            let mut chosen = vec![i];
            let first = refine(&trivial, &parts[i]);
            search_combination(&parts, &target, &first, i + 1, r - 1, &mut chosen).then_some(chosen)
        });
        if let Some(chosen) = found {
            report.lower = RankValue::Finite(r as u32);
            report.upper = Some(RankValue::Finite(r as u32));
            report.witness = chosen.into_iter().map(|i| reps[i].clone()).collect();
            return Ok(report);
        }
        report.lower = RankValue::Finite(r as u32 + 1);
    }
    Ok(report)
}

/// Brute-force rank of `B`: the minimum over nonzero
/// `λ ∈ ∏ {0, …, p^{h_i+1} - 1}` of `rank_{d_λ}(Σ λ_i P_i)`, where
/// `d_λ = max_i deg(λ_i P_i)`.
pub fn factor_rank_search(b: &PolyFactor, r_max: u32, budget: Budget) -> Result<RankReport> {
    if b.complexity() == 0 {
        // no admissible λ: the minimum over the empty set
        return Ok(RankReport::exact(RankValue::Infinite, Vec::new()));
    }
    let labels = b.label_space();
    let combos = labels.order() - 1;
    if let Err(Error::BudgetExceeded { required, .. }) = budget.check("factor rank combinations", combos as u128) {
        return Ok(RankReport {
            lower: RankValue::Finite(0),
            upper: None,
            witness: Vec::new(),
            lambda: None,
            required_budget: Some(required),
        });
    }
    let mut best: Option<RankReport> = None;
    let mut lower = RankValue::Infinite;
    let mut required = None;
    for code in 1..labels.order() {
        let lambda = labels.digits(code);
        let mut q = NcPolynomial::zero(b.p(), b.n());
        let mut d_lambda = 0;
        for (l, pi) in lambda.iter().zip(b.polys()) {
            let scaled = pi.int_scale(*l as i64);
            d_lambda = d_lambda.max(scaled.degree());
            q = q.add(&scaled)?;
        }
        let cap = match best.as_ref().and_then(|r| r.upper) {
            Some(RankValue::Finite(u)) => r_max.min(u.saturating_sub(1)),
            _ => r_max,
        };
        let inner = rank_d_search(&q, d_lambda, cap, budget)?;
        lower = lower.min(inner.lower);
        if inner.required_budget.is_some() {
            required = inner.required_budget;
        }
        let improves = match (&best, inner.upper) {
            (_, None) => false,
            (None, Some(_)) => true,
            (Some(r), Some(u)) => r.upper.is_none_or(|bu| u < bu),
        };
        if improves {
            let mut inner = inner;
            inner.lambda = Some((lambda, d_lambda));
            best = Some(inner);
        }
        if lower == RankValue::Finite(0) && best.as_ref().is_some_and(|r| r.upper == Some(RankValue::Finite(0))) {
            break;
        }
    }
    let mut report = best.unwrap_or(RankReport {
        lower,
        upper: None,
        witness: Vec::new(),
        lambda: None,
        required_budget: None,
    });
    // the minimum is bounded below by the smallest lower bound seen
    report.lower = lower.min(report.upper.unwrap_or(RankValue::Infinite));
    report.required_budget = required;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomDistribution {
    pub order: u64,
    /// Point count of every label code.
    pub counts: Vec<u64>,
    pub total: u64,
    pub nonempty: usize,
    /// `max_b |Pr[B(x) = b] - 1/‖B‖|` over all labels, empty ones included.
    pub max_deviation: f64,
}

impl AtomDistribution {
    pub fn probability(&self, code: u64) -> f64 {
        self.counts[code as usize] as f64 / self.total as f64
    }
}

pub fn atom_distribution_report(b: &PolyFactor, budget: Budget) -> Result<AtomDistribution> {
    budget.check("atom distribution labels", b.order() as u128)?;
    let mut counts = vec![0u64; b.order() as usize];
    for &c in b.codes() {
        counts[c as usize] += 1;
    }
    let total = b.codes().len() as u64;
    let uniform = 1.0 / b.order() as f64;
    let max_deviation = counts
        .iter()
        .map(|&c| (c as f64 / total as f64 - uniform).abs())
        .fold(0.0, f64::max);
    let nonempty = counts.iter().filter(|&&c| c > 0).count();
    Ok(AtomDistribution { order: b.order(), counts, total, nonempty, max_deviation })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub m: usize,
    pub embeddings: u64,
    /// Embeddings under which some `P_i ∘ A` has smaller degree.
    pub degree_drops: u64,
    pub depth_drops: u64,
    pub rank_drops: u64,
    /// Embeddings where the budgeted searches could not decide a rank drop.
    pub rank_undecided: u64,
    pub base_rank: RankReport,
}

impl StabilityReport {
    pub fn degree_drop_frequency(&self) -> f64 {
        self.degree_drops as f64 / self.embeddings.max(1) as f64
    }

    pub fn depth_drop_frequency(&self) -> f64 {
        self.depth_drops as f64 / self.embeddings.max(1) as f64
    }

    pub fn rank_drop_frequency(&self) -> f64 {
        self.rank_drops as f64 / self.embeddings.max(1) as f64
    }
}

/// Degree, depth and rank drops of `B ∘ A` over an ensemble of embeddings
/// `A: F_p^m → F_p^n`.
pub fn embedding_stability_report(
    b: &PolyFactor,
    m: usize,
    ensemble: EmbeddingEnsemble,
    r_max: u32,
    budget: Budget,
) -> Result<StabilityReport> {
    let base_rank = factor_rank_search(b, r_max, budget)?;
    let degrees = b.degrees();
    let depths = b.depths().to_vec();
    let per = |a: &AffineMap| -> Result<(bool, bool, Option<bool>)> {
        let r = b.restrict(a)?;
        let deg_drop = r.degrees().iter().zip(&degrees).any(|(x, y)| x < y);
        let depth_drop = r.depths().iter().zip(&depths).any(|(x, y)| x < y);
        let rr = factor_rank_search(&r, r_max, budget)?;
        let drop = match (rr.upper, base_rank.upper) {
            (Some(u), _) if u < base_rank.lower => Some(true),
            (_, Some(bu)) if rr.lower >= bu => Some(false),
            _ => None,
        };
        Ok((deg_drop, depth_drop, drop))
    };
    let init = Ok(StabilityReport {
        m,
        embeddings: 0,
        degree_drops: 0,
        depth_drops: 0,
        rank_drops: 0,
        rank_undecided: 0,
        base_rank: base_rank.clone(),
    });
    
    ensemble.fold(b.p(), m, b.n(), budget, init, per, |acc: &mut Result<StabilityReport>, t| {
        let Ok(rep) = acc else { return };
        match t {
            Ok((dd, hd, rd)) => {
                rep.embeddings += 1;
                rep.degree_drops += dd as u64;
                rep.depth_drops += hd as u64;
                match rd {
                    Some(true) => rep.rank_drops += 1,
                    Some(false) => {}
                    None => rep.rank_undecided += 1,
                }
            }
            Err(e) => *acc = Err(e),
        }
    })?
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClauseStatus {
    Pass,
    Fail,
    Inconclusive,
}

impl ClauseStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ClauseStatus::Pass => "pass",
            ClauseStatus::Fail => "fail",
            ClauseStatus::Inconclusive => "inconclusive",
        }
    }

    fn from_bool(b: bool) -> Self {
        if b {
            ClauseStatus::Pass
        } else {
            ClauseStatus::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub name: &'static str,
    pub status: ClauseStatus,
    /// Measured quantity, when the clause has one.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub clauses: Vec<Clause>,
}

impl DecompositionReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.status == ClauseStatus::Pass)
    }

    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }
}

/// Tolerance for pointwise identities between real tables.
const EQ_TOL: f64 = 1e-9;

/// Parameters of a candidate regularity decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionBounds {
    /// The factor must have degree at most `d`; `f_3` is measured in `U^{d+1}`.
    pub d: u32,
    /// Strict bound on `‖f_2‖_2`.
    pub zeta: f64,
    /// Strict bound on `‖f_3‖_{U^{d+1}}`.
    pub eta: f64,
    pub rank_required: u32,
    pub rank_r_max: u32,
}

/// Checks every clause of a candidate decomposition `f = f_1 + f_2 + f_3`.
/// Never fails on clause violations; they are reported.
pub fn validate_decomposition(
    f: &FunctionTable,
    parts: [&FunctionTable; 3],
    b1: &PolyFactor,
    bounds: DecompositionBounds,
    budget: Budget,
) -> Result<DecompositionReport> {
    let [f1, f2, f3] = parts;
    for g in [f1, f2, f3] {
        if g.space() != f.space() {
            return Err(Error::DimensionMismatch { expected: f.n(), found: g.n() });
        }
    }
    b1.check_space(f.space())?;
    let (fv, v1, v2, v3) = (f.real_or_err()?, f1.real_or_err()?, f2.real_or_err()?, f3.real_or_err()?);
    let mut clauses = Vec::new();

    let boolean = fv.iter().all(|&x| x == 0.0 || x == 1.0);
    clauses.push(Clause { name: "f_boolean", status: ClauseStatus::from_bool(boolean), value: None });

    let sum_err = (0..fv.len()).map(|i| (fv[i] - v1[i] - v2[i] - v3[i]).abs()).fold(0.0, f64::max);
    clauses.push(Clause { name: "sum_identity", status: ClauseStatus::from_bool(sum_err <= EQ_TOL), value: Some(sum_err) });

    let cond = conditional_expectation(f, b1)?;
    let cond_err = cond.real().unwrap().iter().zip(v1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    clauses.push(Clause {
        name: "f1_conditional_expectation",
        status: ClauseStatus::from_bool(cond_err <= EQ_TOL),
        value: Some(cond_err),
    });

    clauses.push(Clause {
        name: "factor_degree",
        status: ClauseStatus::from_bool(b1.degree() <= bounds.d),
        value: Some(b1.degree() as f64),
    });

    let l2 = f2.norm(Norm::L2)?;
    clauses.push(Clause { name: "f2_l2_below_zeta", status: ClauseStatus::from_bool(l2 < bounds.zeta), value: Some(l2) });

    match gowers_norm(f3, bounds.d + 1, GowersMode::Exact, budget) {
        Ok(g) => clauses.push(Clause {
            name: "f3_gowers_below_eta",
            status: ClauseStatus::from_bool(g.value < bounds.eta),
            value: Some(g.value),
        }),
        Err(Error::BudgetExceeded { .. }) => {
            clauses.push(Clause { name: "f3_gowers_below_eta", status: ClauseStatus::Inconclusive, value: None })
        }
        Err(e) => return Err(e),
    }

    let unit = |x: f64| (-EQ_TOL..=1.0 + EQ_TOL).contains(&x);
    let signed = |x: f64| (-1.0 - EQ_TOL..=1.0 + EQ_TOL).contains(&x);
    clauses.push(Clause { name: "f1_range_unit", status: ClauseStatus::from_bool(v1.iter().all(|&x| unit(x))), value: None });
    clauses.push(Clause {
        name: "f1_plus_f3_range_unit",
        status: ClauseStatus::from_bool(v1.iter().zip(v3).all(|(a, b)| unit(a + b))),
        value: None,
    });
    clauses.push(Clause {
        name: "f2_f3_range_signed",
        status: ClauseStatus::from_bool(v2.iter().chain(v3).all(|&x| signed(x))),
        value: None,
    });

    let rank = factor_rank_search(b1, bounds.rank_r_max, budget)?;
    let status = match rank.at_least(bounds.rank_required) {
        Some(true) => ClauseStatus::Pass,
        Some(false) => ClauseStatus::Fail,
        None => ClauseStatus::Inconclusive,
    };
    let value = match rank.lower {
        RankValue::Finite(r) => Some(r as f64),
        RankValue::Infinite => Some(f64::INFINITY),
    };
    clauses.push(Clause { name: "rank_at_least_required", status, value });
    Ok(DecompositionReport { clauses })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iota_x(n: usize, i: usize) -> NcPolynomial {
        let mut e = vec![0; n];
        e[i] = 1;
        NcPolynomial::monomial(2, e, 0).unwrap()
    }

    fn tv(p: u32, num: i128, k: u32) -> TorusValue {
        TorusValue::new(p, num, k).unwrap()
    }

    #[test]
    fn atom_examples() {
        let b = PolyFactor::new(2, 2, vec![iota_x(2, 0)]).unwrap();
        assert_eq!(b.atom_of(&FieldVec::new(2, vec![1, 0]).unwrap()).unwrap(), AtomLabel(vec![tv(2, 1, 1)]));
        let b = PolyFactor::new(2, 2, vec![iota_x(2, 0), iota_x(2, 1)]).unwrap();
        assert_eq!(
            b.atom_of(&FieldVec::new(2, vec![0, 1]).unwrap()).unwrap(),
            AtomLabel(vec![TorusValue::zero(2), tv(2, 1, 1)])
        );
        let quarter = NcPolynomial::monomial(2, vec![1], 1).unwrap();
        let b = PolyFactor::new(2, 1, vec![quarter]).unwrap();
        assert_eq!(b.order(), 4);
        assert_eq!(b.nonempty_atoms(), 2);
        assert_eq!(b.atom_of(&FieldVec::new(2, vec![1]).unwrap()).unwrap(), AtomLabel(vec![tv(2, 1, 2)]));
    }

    #[test]
    fn label_codes_round_trip() {
        let ls = LabelSpace::new(3, vec![0, 1, 0]).unwrap();
        assert_eq!(ls.order(), 3 * 9 * 3);
        for c in 0..ls.order() {
            assert_eq!(ls.code_of(&ls.label_of(c)).unwrap(), c);
        }
        assert!(ls.code_of(&AtomLabel(vec![tv(3, 1, 2), TorusValue::zero(3), TorusValue::zero(3)])).is_err());
    }

    #[test]
    fn conditional_expectation_examples() {
        let s = Space::new(2, 2).unwrap();
        let f = FunctionTable::boolean(s, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let trivial = PolyFactor::trivial(2, 2).unwrap();
        assert_eq!(conditional_expectation(&f, &trivial).unwrap().real().unwrap(), &[0.5; 4]);
        let b2 = PolyFactor::new(2, 2, vec![iota_x(2, 1)]).unwrap();
        assert_eq!(conditional_expectation(&f, &b2).unwrap().real().unwrap(), &[0.5; 4]);
        let x1 = FunctionTable::boolean(s, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let b1 = PolyFactor::new(2, 2, vec![iota_x(2, 0)]).unwrap();
        assert_eq!(conditional_expectation(&x1, &b1).unwrap().real().unwrap(), x1.real().unwrap());
    }

    #[test]
    fn refinement_examples() {
        let b1 = PolyFactor::new(2, 2, vec![iota_x(2, 0)]).unwrap();
        let b2 = PolyFactor::new(2, 2, vec![iota_x(2, 1)]).unwrap();
        let b12 = PolyFactor::new(2, 2, vec![iota_x(2, 0), iota_x(2, 1)]).unwrap();
        let b21 = PolyFactor::new(2, 2, vec![iota_x(2, 1), iota_x(2, 0)]).unwrap();
        assert_eq!(refinement_relation(&b12, &b1).unwrap(), Refinement::Syntactic);
        assert_eq!(refinement_relation(&b21, &b1).unwrap(), Refinement::Semantic);
        assert_eq!(refinement_relation(&b1, &b2).unwrap(), Refinement::Neither);
    }

    #[test]
    fn rank_of_single_polynomials() {
        let b = Budget::WORK;
        let zero = NcPolynomial::zero(2, 2);
        assert_eq!(rank_d_search(&zero, 1, 4, b).unwrap().value(), Some(RankValue::Finite(0)));
        let x1 = iota_x(2, 0);
        assert_eq!(rank_d_search(&x1, 1, 4, b).unwrap().value(), Some(RankValue::Infinite));

        let x1x2 = NcPolynomial::monomial(2, vec![1, 1], 0).unwrap();
        let r = rank_d_search(&x1x2, 2, 4, b).unwrap();
        assert_eq!(r.value(), Some(RankValue::Finite(2)));
        assert_eq!(r.witness.len(), 2);
        let wf = PolyFactor::new(2, 2, r.witness.clone()).unwrap();
        let pt = FunctionTable::torus(Space::new(2, 2).unwrap(), x1x2.table().unwrap()).unwrap();
        assert!(wf.is_measurable(&pt).unwrap());
        // no single degree-1 polynomial works
        for q in enumerate_polynomials(2, 2, 1, b).unwrap().iter() {
            let qf = PolyFactor::new(2, 2, vec![q]).unwrap();
            assert!(!qf.is_measurable(&pt).unwrap());
        }
    }

    #[test]
    fn rank_search_respects_r_max_and_budget() {
        // x1 x2 + x3 x4 needs all four coordinates
        let q = NcPolynomial::classical(2, 4, [(vec![1, 1, 0, 0], 1), (vec![0, 0, 1, 1], 1)]).unwrap();
        let r = rank_d_search(&q, 2, 1, Budget::WORK).unwrap();
        assert_eq!(r.kind(), RankKind::AtMost);
        assert_eq!(r.lower, RankValue::Finite(2));
        assert_eq!(r.upper, Some(RankValue::Finite(4)));
        assert_eq!(rank_d_search(&q, 2, 4, Budget::WORK).unwrap().value(), Some(RankValue::Finite(4)));
        let r = rank_d_search(&q, 2, 4, Budget(10)).unwrap();
        assert_eq!(r.required_budget, Some(16));
        assert_eq!(r.upper, Some(RankValue::Finite(4)));
    }

    #[test]
    fn non_classical_polynomials_can_lower_rank() {
        // x1 x2 x3 on F_2^3 is a function of the degree-2 polynomial Σ |x_i| / 4
        let q = NcPolynomial::monomial(2, vec![1, 1, 1], 0).unwrap();
        let r = rank_d_search(&q, 3, 3, Budget::WORK).unwrap();
        assert_eq!(r.value(), Some(RankValue::Finite(1)));
        assert_eq!(r.witness[0].depth(), 1);
    }

    #[test]
    fn factor_rank_examples() {
        let b = Budget::WORK;
        let f = PolyFactor::new(2, 2, vec![iota_x(2, 0)]).unwrap();
        assert_eq!(factor_rank_search(&f, 4, b).unwrap().value(), Some(RankValue::Infinite));
        let dup = PolyFactor::new(2, 2, vec![iota_x(2, 0), iota_x(2, 0)]).unwrap();
        let r = factor_rank_search(&dup, 4, b).unwrap();
        assert_eq!(r.value(), Some(RankValue::Finite(0)));
        assert_eq!(r.lambda.as_ref().unwrap().0, vec![1, 1]);
        let both = PolyFactor::new(2, 2, vec![iota_x(2, 0), iota_x(2, 1)]).unwrap();
        assert_eq!(factor_rank_search(&both, 4, b).unwrap().value(), Some(RankValue::Infinite));
    }

    #[test]
    fn multiples_are_checked_at_their_own_degree() {
        // 2 · |x|/4 = ι(x): degree 1, so the 2-multiple has infinite 1-rank
        let quarter = NcPolynomial::monomial(2, vec![1, 0], 1).unwrap();
        let f = PolyFactor::new(2, 2, vec![quarter]).unwrap();
        let r = factor_rank_search(&f, 4, Budget::WORK).unwrap();
        // λ = 1: degree 2, rank_2 of |x_1|/4 is 1 (it is a function of ι(x_1))
        assert_eq!(r.value(), Some(RankValue::Finite(1)));
    }

    #[test]
    fn atom_distribution_examples() {
        let b = PolyFactor::new(2, 3, vec![iota_x(3, 0)]).unwrap();
        let d = atom_distribution_report(&b, Budget::WORK).unwrap();
        assert_eq!(d.counts, vec![4, 4]);
        assert_eq!(d.max_deviation, 0.0);
        let quarter = NcPolynomial::monomial(2, vec![1], 1).unwrap();
        let b = PolyFactor::new(2, 1, vec![quarter]).unwrap();
        let d = atom_distribution_report(&b, Budget::WORK).unwrap();
        assert_eq!(d.nonempty, 2);
        assert_eq!(d.max_deviation, 0.25);
        let t = atom_distribution_report(&PolyFactor::trivial(2, 3).unwrap(), Budget::WORK).unwrap();
        assert_eq!((t.counts.clone(), t.max_deviation), (vec![8], 0.0));
    }

    #[test]
    fn nonsingular_embeddings_never_drop() {
        let b = PolyFactor::new(2, 3, vec![NcPolynomial::monomial(2, vec![1, 1, 0], 0).unwrap(), iota_x(3, 2)]).unwrap();
        let ens = EmbeddingEnsemble::Sampled { trials: 30, seed: 4 };
        let r = embedding_stability_report(&b, 3, ens, 3, Budget::WORK).unwrap();
        assert_eq!((r.degree_drops, r.depth_drops, r.rank_drops, r.rank_undecided), (0, 0, 0, 0));
        let t = embedding_stability_report(&PolyFactor::trivial(2, 3).unwrap(), 2, ens, 3, Budget::WORK).unwrap();
        assert_eq!((t.degree_drops, t.depth_drops, t.rank_drops), (0, 0, 0));
    }

    #[test]
    fn degree_drop_matches_enumeration() {
        // ι(x_1) ∘ A is constant iff the first row of L vanishes:
        // (p^n - p)… the oracle counts rank-2 matrices over F_2^{4x2} with a zero first row.
        let b = PolyFactor::new(2, 4, vec![iota_x(4, 0)]).unwrap();
        let mut zero_row = 0u64;
        let mut total = 0u64;
        for bits in 0u32..256 {
            let m: Vec<u32> = (0..8).map(|i| (bits >> i) & 1).collect();
            if crate::algebra::rank_mod_p(m.clone(), 4, 2, 2) == 2 {
                total += 1;
                zero_row += (m[0] == 0 && m[1] == 0) as u64;
            }
        }
        let exact = embedding_stability_report(&b, 2, EmbeddingEnsemble::Exact, 2, Budget::WORK).unwrap();
        assert_eq!(exact.degree_drops * total, zero_row * exact.embeddings);
        assert_eq!(exact.degree_drop_frequency(), 42.0 / 210.0);
        let sampled = embedding_stability_report(&b, 2, EmbeddingEnsemble::Sampled { trials: 2000, seed: 1 }, 2, Budget::WORK).unwrap();
        assert!((sampled.degree_drop_frequency() - 0.2).abs() < 0.03);
    }

    #[test]
    fn decomposition_clauses() {
        let s = Space::new(2, 2).unwrap();
        let x1 = FunctionTable::boolean(s, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let zero = FunctionTable::constant(s, TableKind::Signed, 0.0).unwrap();
        let b1 = PolyFactor::new(2, 2, vec![iota_x(2, 0)]).unwrap();
        let bounds = DecompositionBounds { d: 1, zeta: 0.1, eta: 0.1, rank_required: 0, rank_r_max: 2 };
        let ok = validate_decomposition(&x1, [&x1, &zero, &zero], &b1, bounds, Budget::WORK).unwrap();
        assert!(ok.passed(), "{ok:?}");

        let wrong = FunctionTable::unit(s, vec![0.5; 4]).unwrap();
        let rest = FunctionTable::signed(s, vec![-0.5, 0.5, -0.5, 0.5]).unwrap();
        let r = validate_decomposition(&x1, [&wrong, &rest, &zero], &b1, bounds, Budget::WORK).unwrap();
        assert_eq!(r.clause("f1_conditional_expectation").unwrap().status, ClauseStatus::Fail);
        assert_eq!(r.clause("sum_identity").unwrap().status, ClauseStatus::Pass);

        // ‖f_2‖_2 = ζ exactly fails the strict bound
        let f2 = FunctionTable::signed(s, vec![0.5, 0.0, 0.0, 0.0]).unwrap();
        let f1 = FunctionTable::unit(s, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let tight = DecompositionBounds { zeta: 0.0625, ..bounds };
        let r = validate_decomposition(&x1, [&f1, &f2, &zero], &b1, tight, Budget::WORK).unwrap();
        assert_eq!(r.clause("f2_l2_below_zeta").unwrap().value, Some(0.0625));
        assert_eq!(r.clause("f2_l2_below_zeta").unwrap().status, ClauseStatus::Fail);
    }
}
