//! Linear forms, `(d, h)`-dependency sets and consistent atom assignments.
//!
//! A dependency set is certified against every polynomial of exact degree `d`
//! and exact depth `h` on `n_check` variables, never symbolically for all
//! `n`. The certification level travels with the set.

use std::collections::{BTreeMap, BTreeSet};

use crate::algebra::torus::p_pow;
use crate::algebra::{check_prime, EmbeddingEnsemble, Space, TorusValue};
use crate::analysis::{gowers_norm, GowersEstimate, GowersMode};
use crate::budget::{sat_pow, Budget};
use crate::error::{Error, Result};
use crate::factors::{AtomLabel, LabelSpace, PolyFactor, StructureFunction};
use crate::polynomials::enumerate_polynomials_bounded;
use crate::rng::trial_rng;

/// `L(x_1, …, x_m) = Σ ℓ_i x_i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearForm {
    p: u32,
    coeffs: Vec<u32>,
}

impl LinearForm {
    pub fn new(p: u32, coeffs: Vec<u32>) -> Result<Self> {
        check_prime(p)?;
        if coeffs.is_empty() {
            return Err(Error::Precondition("a linear form needs at least one variable".into()));
        }
        if let Some(c) = coeffs.iter().find(|&&c| c >= p) {
            return Err(Error::OutOfRange(format!("form coefficient {c} is not a residue mod {p}")));
        }
        Ok(LinearForm { p, coeffs })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// Number of variables `m`.
    pub fn vars(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[u32] {
        &self.coeffs
    }
}

/// The `p^m` forms `x ↦ y_0 + Σ x_i y_i` for `x ∈ F_p^m` (canonical order),
/// on the `m + 1` variables `(y_0, …, y_m)`: the evaluation points of an
/// affine map `F_p^m → F_p^n` with shift `y_0` and columns `y_i`.
pub fn affine_evaluation_forms(p: u32, m: usize) -> Result<Vec<LinearForm>> {
    let s = Space::new(p, m)?;
    s.points()
        .map(|x| {
            let mut c = vec![1];
            c.extend_from_slice(x.coords());
            LinearForm::new(p, c)
        })
        .collect()
}

fn check_forms(forms: &[LinearForm]) -> Result<(u32, usize)> {
    let first = forms.first().ok_or_else(|| Error::Precondition("no linear forms given".into()))?;
    let (p, m) = (first.p, first.vars());
    for f in forms {
        if f.p != p {
            return Err(Error::ModulusMismatch { expected: p, found: f.p });
        }
        if f.vars() != m {
            return Err(Error::DimensionMismatch { expected: m, found: f.vars() });
        }
    }
    Ok((p, m))
}

/// For every `x⃗ ∈ (F_p^k)^m`, the point indices of `L_1(x⃗), …, L_ℓ(x⃗)` in `F_p^k`.
fn form_points(forms: &[LinearForm], space: &Space, budget: Budget) -> Result<Vec<Vec<usize>>> {
    let m = forms[0].vars();
    let tuples = sat_pow(space.size() as u128, m as u64);
    budget.check("linear form evaluation tuples", tuples.saturating_mul(forms.len() as u128))?;
    let (p, k, size) = (space.p(), space.n(), space.size());
    let mut out = Vec::with_capacity(tuples as usize);
    let mut xs = vec![vec![0u32; k]; m];
    let mut y = vec![0u32; k];
    for t in 0..tuples as usize {
        let mut rest = t;
        for x in xs.iter_mut() {
            space.digits_into(rest % size, x);
            rest /= size;
        }
        out.push(
            forms
                .iter()
                .map(|f| {
                    for (c, slot) in y.iter_mut().enumerate() {
                        *slot = f.coeffs.iter().zip(&xs).map(|(l, x)| l * x[c]).sum::<u32>() % p;
                    }
                    space.index_of_coords(&y)
                })
                .collect(),
        );
    }
    Ok(out)
}

/// The `(d, h)`-dependency set of a list of forms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencySet {
    p: u32,
    d: u32,
    h: u32,
    forms: Vec<LinearForm>,
    /// Sorted lexicographically; entries in `0..p^{h+1}`.
    lambdas: Vec<Vec<u64>>,
    n_check: usize,
    /// Number of exact-degree, exact-depth polynomials checked.
    polys_checked: u128,
}

impl DependencySet {
    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.d
    }

    pub fn depth(&self) -> u32 {
        self.h
    }

    pub fn forms(&self) -> &[LinearForm] {
        &self.forms
    }

    pub fn lambdas(&self) -> &[Vec<u64>] {
        &self.lambdas
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn contains(&self, lambda: &[u64]) -> bool {
        self.lambdas.binary_search_by(|l| l.as_slice().cmp(lambda)).is_ok()
    }

    /// Variables per ambient copy on which the identities were verified.
    pub fn n_check(&self) -> usize {
        self.n_check
    }

    pub fn polys_checked(&self) -> u128 {
        self.polys_checked
    }

    /// `p^{h+1}`.
    pub fn modulus(&self) -> u64 {
        p_pow(self.p, self.h + 1)
    }

    fn annihilates(&self, b: &[u64]) -> bool {
        let q = self.modulus() as u128;
        self.lambdas
            .iter()
            .all(|l| l.iter().zip(b).map(|(x, y)| *x as u128 * *y as u128).sum::<u128>() % q == 0)
    }
}

/// Computes the `(d, h)`-dependency set of `forms`.
///
/// Requires `d > h (p-1)`; the degenerate slot `(d, h) = (0, 0)` is also
/// accepted, where the only polynomial is 0 and every `λ` qualifies.
pub fn dependency_set(forms: &[LinearForm], d: u32, h: u32, n_check: usize, budget: Budget) -> Result<DependencySet> {
    let (p, _) = check_forms(forms)?;
    if !(d > h * (p - 1) || (d, h) == (0, 0)) {
        return Err(Error::Precondition(format!("dependency sets need d > h(p-1), got d = {d}, h = {h}, p = {p}")));
    }
    let q = p_pow(p, h + 1);
    let ell = forms.len();
    let space = Space::new(p, n_check)?;
    let points = form_points(forms, &space, budget)?;
    let family = enumerate_polynomials_bounded(p, n_check, d, h, budget)?;
    budget.check(
        "dependency set verification",
        family.size().saturating_mul(points.len() as u128).saturating_mul(ell as u128),
    )?;
    let mut vectors: BTreeSet<Vec<u64>> = BTreeSet::new();
    let mut checked = 0u128;
    for poly in family.exact(d, h) {
        checked += 1;
        let table: Vec<u64> = poly.table_on(&space).iter().map(|v| v.numerator_at(h + 1)).collect();
        for pts in &points {
            let v: Vec<u64> = pts.iter().map(|&i| table[i]).collect();
            if v.iter().any(|&x| x != 0) {
                vectors.insert(v);
            }
        }
    }
    let candidates = sat_pow(q as u128, ell as u64);
    budget.check(
        "dependency set candidates",
        candidates.saturating_mul(vectors.len().max(1) as u128),
    )?;
    let vectors: Vec<Vec<u64>> = vectors.into_iter().collect();
    let mut lambdas = Vec::new();
    let mut lambda = vec![0u64; ell];
    for _ in 0..candidates {
        let ok = vectors.iter().all(|v| {
            v.iter().zip(&lambda).map(|(a, b)| *a as u128 * *b as u128).sum::<u128>() % q as u128 == 0
        });
        if ok {
            lambdas.push(lambda.clone());
        }
        // last coordinate fastest, so the list comes out sorted
        for slot in lambda.iter_mut().rev() {
            *slot += 1;
            if *slot < q {
                break;
            }
            *slot = 0;
        }
    }
    Ok(DependencySet { p, d, h, forms: forms.to_vec(), lambdas, n_check, polys_checked: checked })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyCheck {
    pub consistent: bool,
    /// Why the check failed, when it did.
    pub reason: Option<String>,
}

impl ConsistencyCheck {
    fn ok() -> Self {
        ConsistencyCheck { consistent: true, reason: None }
    }

    fn fail(reason: String) -> Self {
        ConsistencyCheck { consistent: false, reason: Some(reason) }
    }
}

/// `(d, h)`-consistency of `b_1, …, b_ℓ` with the forms of `set`.
pub fn is_consistent(b: &[TorusValue], set: &DependencySet) -> Result<ConsistencyCheck> {
    if b.len() != set.forms.len() {
        return Err(Error::DimensionMismatch { expected: set.forms.len(), found: b.len() });
    }
    let k = set.h + 1;
    let mut nums = Vec::with_capacity(b.len());
    for (i, v) in b.iter().enumerate() {
        if v.p() != set.p {
            return Err(Error::ModulusMismatch { expected: set.p, found: v.p() });
        }
        if !v.lies_in(k) {
            return Ok(ConsistencyCheck::fail(format!("b_{} = {v} is not in U_{k}", i + 1)));
        }
        nums.push(v.numerator_at(k));
    }
    let q = set.modulus() as u128;
    for l in &set.lambdas {
        if l.iter().zip(&nums).map(|(x, y)| *x as u128 * *y as u128).sum::<u128>() % q != 0 {
            return Ok(ConsistencyCheck::fail(format!("λ = {l:?} does not annihilate the sequence")));
        }
    }
    Ok(ConsistencyCheck::ok())
}

/// Vector form: slot `i` of every label is checked against `sets[i]`.
pub fn is_consistent_labels(b: &[AtomLabel], sets: &[DependencySet]) -> Result<ConsistencyCheck> {
    for (i, set) in sets.iter().enumerate() {
        let column: Vec<TorusValue> = b
            .iter()
            .map(|label| {
                label.0.get(i).copied().ok_or(Error::DimensionMismatch { expected: sets.len(), found: label.0.len() })
            })
            .collect::<Result<_>>()?;
        let c = is_consistent(&column, set)?;
        if !c.consistent {
            return Ok(ConsistencyCheck::fail(format!("slot {}: {}", i + 1, c.reason.unwrap_or_default())));
        }
    }
    Ok(ConsistencyCheck::ok())
}

/// All `(d, h)`-consistent assignments of atom labels to a list of forms.
///
/// Consistency constrains each slot separately, so the set is a product of
/// per-slot sets; assignments are produced with slot 1 varying fastest.
#[derive(Debug, Clone)]
pub struct ConsistentSet {
    labels: LabelSpace,
    ell: usize,
    sets: Vec<DependencySet>,
    /// Per slot: consistent numerator tuples over `p^{h_i+1}`.
    per_slot: Vec<Vec<Vec<u64>>>,
}

impl ConsistentSet {
    pub fn label_space(&self) -> &LabelSpace {
        &self.labels
    }

    pub fn dependency_sets(&self) -> &[DependencySet] {
        &self.sets
    }

    pub fn forms_len(&self) -> usize {
        self.ell
    }

    pub fn count(&self) -> u128 {
        self.per_slot.iter().fold(1u128, |acc, s| acc.saturating_mul(s.len() as u128))
    }

    /// `∏ |Λ_i|`.
    pub fn lambda_product(&self) -> u128 {
        self.sets.iter().fold(1u128, |acc, s| acc.saturating_mul(s.len() as u128))
    }

    /// `‖B‖^ℓ`.
    pub fn total(&self) -> u128 {
        sat_pow(self.labels.order() as u128, self.ell as u64)
    }

    /// Label codes of the forms under assignment `index`.
    pub fn codes(&self, mut index: u128) -> Vec<u64> {
        let mut codes = vec![0u64; self.ell];
        let mut place = 1u64;
        for (slot, tuples) in self.per_slot.iter().enumerate() {
            let t = &tuples[(index % tuples.len() as u128) as usize];
            index /= tuples.len() as u128;
            for (c, &v) in codes.iter_mut().zip(t) {
                *c += v * place;
            }
            place *= p_pow(self.labels.p(), self.labels.depths()[slot] + 1);
        }
        codes
    }

    pub fn iter_codes(&self) -> impl Iterator<Item = Vec<u64>> + '_ {
        (0..self.count()).map(move |i| self.codes(i))
    }

    pub fn contains_codes(&self, codes: &[u64]) -> bool {
        if codes.len() != self.ell {
            return false;
        }
        let digits: Vec<Vec<u64>> = codes.iter().map(|&c| self.labels.digits(c)).collect();
        self.sets.iter().enumerate().all(|(i, set)| {
            let column: Vec<u64> = digits.iter().map(|d| d[i]).collect();
            set.annihilates(&column)
        })
    }
}

/// Enumerates the assignments that are `(d, h)`-consistent with `forms`.
pub fn enumerate_consistent(
    forms: &[LinearForm],
    degrees: &[u32],
    depths: &[u32],
    n_check: usize,
    budget: Budget,
) -> Result<ConsistentSet> {
    let (p, _) = check_forms(forms)?;
    if degrees.len() != depths.len() {
        return Err(Error::DimensionMismatch { expected: degrees.len(), found: depths.len() });
    }
    let labels = LabelSpace::new(p, depths.to_vec())?;
    let ell = forms.len();
    let mut sets = Vec::new();
    let mut per_slot = Vec::new();
    for (&d, &h) in degrees.iter().zip(depths) {
        let set = dependency_set(forms, d, h, n_check, budget)?;
        let q = set.modulus();
        let candidates = sat_pow(q as u128, ell as u64);
        budget.check("consistent assignment candidates", candidates.saturating_mul(set.len() as u128))?;
        let mut tuples = Vec::new();
        let mut b = vec![0u64; ell];
        for _ in 0..candidates {
            if set.annihilates(&b) {
                tuples.push(b.clone());
            }
            for slot in b.iter_mut() {
                *slot += 1;
                if *slot < q {
                    break;
                }
                *slot = 0;
            }
        }
        sets.push(set);
        per_slot.push(tuples);
    }
    Ok(ConsistentSet { labels, ell, sets, per_slot })
}

/// How the joint distribution of `(B(L_j(x⃗)))_j` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    Exact,
    Sampled { trials: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquidistributionReport {
    pub sampling: Sampling,
    /// Tuples `x⃗` examined.
    pub samples: u128,
    /// `∏ |Λ_i| / ‖B‖^ℓ`, the predicted mass of each consistent tuple.
    pub predicted: f64,
    pub consistent_count: u128,
    /// Observed probability of each observed tuple of label codes.
    pub observed: BTreeMap<Vec<u64>, f64>,
    /// `max |observed - predicted|` over all consistent tuples.
    pub max_deviation: f64,
    /// Mass on tuples that are not consistent; 0 whenever the dependency
    /// sets are correct.
    pub inconsistent_mass: f64,
}

/// Compares the joint distribution of atoms along `forms` with the
/// uniform-over-consistent prediction.
pub fn equidistribution_report(
    b: &PolyFactor,
    forms: &[LinearForm],
    sampling: Sampling,
    n_check: usize,
    budget: Budget,
) -> Result<EquidistributionReport> {
    let (p, m) = check_forms(forms)?;
    if p != b.p() {
        return Err(Error::ModulusMismatch { expected: b.p(), found: p });
    }
    let consistent = enumerate_consistent(forms, &b.degrees(), b.depths(), n_check, budget)?;
    budget.check("consistent tuples", consistent.count())?;
    let space = b.space();
    let codes = b.codes();
    let mut counts: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
    let samples: u128 = match sampling {
        Sampling::Exact => {
            let points = form_points(forms, &space, budget)?;
            for pts in &points {
                *counts.entry(pts.iter().map(|&i| codes[i]).collect()).or_default() += 1;
            }
            points.len() as u128
        }
        Sampling::Sampled { trials, seed } => {
            use rand::Rng;
            let mut rng = trial_rng(seed, 0);
            let mut xs = vec![vec![0u32; space.n()]; m];
            let mut y = vec![0u32; space.n()];
            for _ in 0..trials {
                for x in xs.iter_mut() {
                    space.digits_into(rng.gen_range(0..space.size()), x);
                }
                let key: Vec<u64> = forms
                    .iter()
                    .map(|f| {
                        for (c, slot) in y.iter_mut().enumerate() {
                            *slot = f.coeffs.iter().zip(&xs).map(|(l, x)| l * x[c]).sum::<u32>() % p;
                        }
                        codes[space.index_of_coords(&y)]
                    })
                    .collect();
                *counts.entry(key).or_default() += 1;
            }
            trials as u128
        }
    };
    let total = samples as f64;
    let predicted = consistent.lambda_product() as f64 / consistent.total() as f64;
    let observed: BTreeMap<Vec<u64>, f64> = counts.iter().map(|(k, &c)| (k.clone(), c as f64 / total)).collect();
    let mut max_deviation: f64 = 0.0;
    for key in consistent.iter_codes() {
        let o = observed.get(&key).copied().unwrap_or(0.0);
        max_deviation = max_deviation.max((o - predicted).abs());
    }
    let inconsistent_mass = observed
        .iter()
        .filter(|(k, _)| !consistent.contains_codes(k))
        .map(|(_, v)| v)
        .sum();
    Ok(EquidistributionReport {
        sampling,
        samples,
        predicted,
        consistent_count: consistent.count(),
        observed,
        max_deviation,
        inconsistent_mass,
    })
}

/// Comparison of `Γ ∘ P` with `Γ ∘ Q`.
#[derive(Debug, Clone, PartialEq)]
pub enum GammaTransfer {
    /// Same ambient space: `‖Γ∘P − Γ∘Q‖_{U^d}`.
    Gowers(GowersEstimate),
    /// Different ambient spaces: total variation between the restriction
    /// distributions of the two composites at dimension `m`.
    RestrictionTv { m: usize, tv: f64 },
}

/// Measures how far `Γ ∘ P` and `Γ ∘ Q` are apart. Both factors must share
/// their degree and depth vectors.
pub fn gamma_transfer_report(
    gamma: &StructureFunction,
    pf: &PolyFactor,
    qf: &PolyFactor,
    d: u32,
    mode: GowersMode,
    budget: Budget,
) -> Result<GammaTransfer> {
    if pf.degrees() != qf.degrees() || pf.depths() != qf.depths() {
        return Err(Error::Precondition(format!(
            "factors differ in shape: degrees {:?} vs {:?}, depths {:?} vs {:?}",
            pf.degrees(),
            qf.degrees(),
            pf.depths(),
            qf.depths()
        )));
    }
    let gp = gamma.compose(pf)?;
    let gq = gamma.compose(qf)?;
    if pf.n() == qf.n() {
        let diff = gp.sub(&gq)?;
        return Ok(GammaTransfer::Gowers(gowers_norm(&diff, d, mode, budget)?));
    }
    let m = (d as usize).min(pf.n()).min(qf.n());
    let mu_p = crate::instances::restriction_distribution(&gp, m, EmbeddingEnsemble::Exact, budget)?;
    let mu_q = crate::instances::restriction_distribution(&gq, m, EmbeddingEnsemble::Exact, budget)?;
    Ok(GammaTransfer::RestrictionTv { m, tv: crate::instances::tv_distance(&mu_p, &mu_q)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomials::NcPolynomial;

    fn forms(p: u32, rows: &[&[u32]]) -> Vec<LinearForm> {
        rows.iter().map(|r| LinearForm::new(p, r.to_vec()).unwrap()).collect()
    }

    fn tv(p: u32, num: i128, k: u32) -> TorusValue {
        TorusValue::new(p, num, k).unwrap()
    }

    #[test]
    fn dependency_set_examples() {
        let b = Budget::WORK;
        let single = dependency_set(&forms(2, &[&[1]]), 1, 0, 2, b).unwrap();
        assert_eq!(single.lambdas(), &[vec![0]]);
        let tri = dependency_set(&forms(2, &[&[1, 0], &[0, 1], &[1, 1]]), 1, 0, 2, b).unwrap();
        assert_eq!(tri.lambdas(), &[vec![0, 0, 0], vec![1, 1, 1]]);
        let dup = dependency_set(&forms(2, &[&[1], &[1]]), 1, 0, 2, b).unwrap();
        assert_eq!(dup.lambdas(), &[vec![0, 0], vec![1, 1]]);
        assert!(dependency_set(&forms(2, &[&[1]]), 1, 1, 2, b).is_err());
    }

    #[test]
    fn consistency_examples() {
        let set = dependency_set(&forms(2, &[&[1, 0], &[0, 1], &[1, 1]]), 1, 0, 2, Budget::WORK).unwrap();
        let z = TorusValue::zero(2);
        let h = tv(2, 1, 1);
        assert!(is_consistent(&[z, z, z], &set).unwrap().consistent);
        assert!(is_consistent(&[h, h, z], &set).unwrap().consistent);
        assert!(!is_consistent(&[h, z, z], &set).unwrap().consistent);
        let c = is_consistent(&[tv(2, 1, 2), z, z], &set).unwrap();
        assert!(!c.consistent && c.reason.unwrap().contains("U_1"));
    }

    #[test]
    fn consistent_enumeration_examples() {
        let f = forms(2, &[&[1, 0], &[0, 1], &[1, 1]]);
        let c = enumerate_consistent(&f, &[1], &[0], 2, Budget::WORK).unwrap();
        let mut got: Vec<Vec<u64>> = c.iter_codes().collect();
        got.sort();
        assert_eq!(got, vec![vec![0, 0, 0], vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]);
        let one = enumerate_consistent(&forms(2, &[&[1]]), &[2], &[1], 2, Budget::WORK).unwrap();
        assert_eq!(one.count(), 4);
    }

    #[test]
    fn degree_zero_slot_forces_zero_labels() {
        let f = forms(2, &[&[1, 0], &[1, 1]]);
        let c = enumerate_consistent(&f, &[0], &[0], 2, Budget::WORK).unwrap();
        assert_eq!(c.count(), 1);
        assert_eq!(c.lambda_product(), 4);
    }

    #[test]
    fn polynomial_evaluations_are_consistent() {
        use rand::Rng;
        let f = forms(3, &[&[1, 0], &[0, 1], &[1, 1], &[1, 2]]);
        let set = dependency_set(&f, 2, 0, 2, Budget::WORK).unwrap();
        let s = Space::new(3, 3).unwrap();
        let mut rng = trial_rng(2, 0);
        let q = NcPolynomial::classical(3, 3, [(vec![2, 0, 0], 1), (vec![0, 1, 1], 2), (vec![1, 0, 0], 1)]).unwrap();
        let t = q.table().unwrap();
        for _ in 0..1000 {
            let x = rng.gen_range(0..s.size());
            let y = rng.gen_range(0..s.size());
            let b: Vec<TorusValue> = f
                .iter()
                .map(|l| {
                    let mut pt = 0;
                    for _ in 0..l.coeffs()[0] {
                        pt = s.add_indices(pt, x);
                    }
                    for _ in 0..l.coeffs()[1] {
                        pt = s.add_indices(pt, y);
                    }
                    t[pt]
                })
                .collect();
            assert!(is_consistent(&b, &set).unwrap().consistent);
        }
    }

    #[test]
    fn equidistribution_examples() {
        let x1 = NcPolynomial::monomial(2, vec![1, 0, 0], 0).unwrap();
        let b = PolyFactor::new(2, 3, vec![x1]).unwrap();
        let r = equidistribution_report(&b, &forms(2, &[&[1]]), Sampling::Exact, 2, Budget::WORK).unwrap();
        assert_eq!((r.predicted, r.max_deviation, r.inconsistent_mass), (0.5, 0.0, 0.0));
        let tri = forms(2, &[&[1, 0], &[0, 1], &[1, 1]]);
        let r = equidistribution_report(&b, &tri, Sampling::Exact, 2, Budget::WORK).unwrap();
        assert_eq!(r.predicted, 0.25);
        assert_eq!(r.observed.len(), 4);
        assert_eq!((r.max_deviation, r.inconsistent_mass), (0.0, 0.0));

        let quarter = NcPolynomial::monomial(2, vec![1], 1).unwrap();
        let low = PolyFactor::new(2, 1, vec![quarter]).unwrap();
        let r = equidistribution_report(&low, &forms(2, &[&[1]]), Sampling::Exact, 2, Budget::WORK).unwrap();
        assert_eq!(r.max_deviation, 0.25);
    }

    #[test]
    fn gamma_transfer_examples() {
        let s3 = |i: usize| {
            let mut e = vec![0; 3];
            e[i] = 1;
            NcPolynomial::monomial(2, e, 0).unwrap()
        };
        let p = PolyFactor::new(2, 3, vec![s3(0)]).unwrap();
        let q = PolyFactor::new(2, 3, vec![s3(1)]).unwrap();
        let id = StructureFunction::identity(2, 0).unwrap();
        let GammaTransfer::Gowers(same) = gamma_transfer_report(&id, &p, &p, 2, GowersMode::Exact, Budget::WORK).unwrap() else {
            panic!("expected a Gowers comparison");
        };
        assert_eq!(same.value, 0.0);
        let GammaTransfer::Gowers(g) = gamma_transfer_report(&id, &p, &q, 2, GowersMode::Exact, Budget::WORK).unwrap() else {
            panic!("expected a Gowers comparison");
        };
        // x_1 - x_2 over F_2^3: frozen from an exhaustive sum, ‖·‖^4 = 1/8
        assert!((g.raw_mean - 0.125).abs() < 1e-12, "{}", g.raw_mean);
        let half = StructureFunction::constant(id.label_space().clone(), 0.5).unwrap();
        let GammaTransfer::Gowers(g) = gamma_transfer_report(&half, &p, &q, 2, GowersMode::Exact, Budget::WORK).unwrap() else {
            panic!("expected a Gowers comparison");
        };
        assert_eq!(g.value, 0.0);
    }
}
