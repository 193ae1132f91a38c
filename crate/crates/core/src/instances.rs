//! Regularity-instances, witnesses, the perturbation drive and restriction
//! distributions.

use std::collections::BTreeMap;

use rand::Rng;

use crate::algebra::torus::p_pow;
use crate::algebra::{check_prime, EmbeddingEnsemble, Space, TorusValue};
use crate::analysis::{gowers_norm, FunctionTable, GowersEstimate, GowersMode, TableKind};
use crate::budget::{sat_pow, Budget};
use crate::error::{Error, Result};
use crate::factors::{factor_rank_search, LabelSpace, PolyFactor, RankReport, StructureFunction};
use crate::forms::{affine_evaluation_forms, enumerate_consistent};
use crate::polynomials::{enumerate_polynomials_bounded, NcPolynomial};
use crate::rng::trial_rng;

/// `(γ, Γ, C, d, (d_i), (h_i), r)`; `rank = None` is the rank-oblivious kind.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityInstance {
    gamma: f64,
    structure: StructureFunction,
    degree_bound: u32,
    degrees: Vec<u32>,
    depths: Vec<u32>,
    rank: Option<u32>,
}

impl RegularityInstance {
    /// `C` is `degrees.len()`. A slot with `(d_i, h_i) = (0, 0)` is accepted
    /// as the constant slot.
    pub fn new(
        gamma: f64,
        structure: StructureFunction,
        degree_bound: u32,
        degrees: Vec<u32>,
        depths: Vec<u32>,
        rank: Option<u32>,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Precondition(format!("error parameter must be positive, got {gamma}")));
        }
        if degrees.len() != depths.len() {
            return Err(Error::DimensionMismatch { expected: degrees.len(), found: depths.len() });
        }
        for (i, (&d, &h)) in degrees.iter().zip(&depths).enumerate() {
            if d >= degree_bound {
                return Err(Error::Precondition(format!("d_{} = {d} must be below the degree bound {degree_bound}", i + 1)));
            }
            if h >= d && (d, h) != (0, 0) {
                return Err(Error::Precondition(format!("h_{} = {h} must be below d_{} = {d}", i + 1, i + 1)));
            }
        }
        if structure.label_space().depths() != depths.as_slice() {
            return Err(Error::Precondition(format!(
                "structure function is over depths {:?}, instance has {:?}",
                structure.label_space().depths(),
                depths
            )));
        }
        Ok(RegularityInstance { gamma, structure, degree_bound, degrees, depths, rank })
    }

    pub fn p(&self) -> u32 {
        self.structure.label_space().p()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn structure(&self) -> &StructureFunction {
        &self.structure
    }

    pub fn complexity(&self) -> usize {
        self.degrees.len()
    }

    pub fn degree_bound(&self) -> u32 {
        self.degree_bound
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn depths(&self) -> &[u32] {
        &self.depths
    }

    pub fn rank(&self) -> Option<u32> {
        self.rank
    }

    pub fn is_rank_oblivious(&self) -> bool {
        self.rank.is_none()
    }

    /// `max(1/γ, C, d, r)`.
    pub fn complexity_measure(&self) -> f64 {
        [1.0 / self.gamma, self.complexity() as f64, self.degree_bound as f64, self.rank.unwrap_or(0) as f64]
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Slots whose depth exceeds `(d_i - 1)/(p - 1)`: no polynomial has that
    /// shape, though the instance itself is well formed.
    pub fn lint(&self) -> Vec<String> {
        let p = self.p();
        self.degrees
            .iter()
            .zip(&self.depths)
            .enumerate()
            .filter(|(_, (&d, &h))| d > 0 && h * (p - 1) > d - 1)
            .map(|(i, (d, h))| format!("slot {}: depth {h} exceeds (d-1)/(p-1) for d = {d}, p = {p}", i + 1))
            .collect()
    }

    /// `x ↦ Γ(P_1(x) + α_1, …, P_C(x) + α_C)`, or `None` when some value
    /// leaves `U_{h_i+1}`.
    pub fn composite(&self, space: Space, polys: &[NcPolynomial], shifts: &[TorusValue]) -> Result<Option<FunctionTable>> {
        if polys.len() != self.complexity() || shifts.len() != self.complexity() {
            return Err(Error::DimensionMismatch { expected: self.complexity(), found: polys.len().min(shifts.len()) });
        }
        let tables = polys
            .iter()
            .map(|q| {
                if (q.p(), q.n()) != (space.p(), space.n()) {
                    return Err(Error::DimensionMismatch { expected: space.n(), found: q.n() });
                }
                Ok(q.table_on(&space))
            })
            .collect::<Result<Vec<_>>>()?;
        let ls = self.structure.label_space();
        let mut values = Vec::with_capacity(space.size());
        let mut label = vec![TorusValue::zero(space.p()); polys.len()];
        for x in 0..space.size() {
            for (i, slot) in label.iter_mut().enumerate() {
                *slot = tables[i][x].add(&shifts[i]);
            }
            match ls.code_of_values(&label) {
                Ok(c) => values.push(self.structure.at_code(c)),
                Err(Error::OutOfRange(_)) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        Ok(Some(FunctionTable::unit(space, values)?))
    }
}

/// `I_k = (γ, id, 1, d, (k), (0))` for `k = 0..=degree` over `U_1`.
pub fn low_degree_family(p: u32, degree: u32, gamma: f64, degree_bound: u32) -> Result<Vec<RegularityInstance>> {
    (0..=degree)
        .map(|k| RegularityInstance::new(gamma, StructureFunction::identity(p, 0)?, degree_bound, vec![k], vec![0], None))
        .collect()
}

/// How the rank clause of a witness is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankEvidence {
    Search { r_max: u32 },
    Asserted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankClause {
    NotRequired,
    Asserted,
    Pass,
    Fail,
    Inconclusive,
}

impl RankClause {
    pub fn as_str(self) -> &'static str {
        match self {
            RankClause::NotRequired => "not_required",
            RankClause::Asserted => "asserted",
            RankClause::Pass => "pass",
            RankClause::Fail => "fail",
            RankClause::Inconclusive => "inconclusive",
        }
    }

    fn ok(self) -> bool {
        !matches!(self, RankClause::Fail | RankClause::Inconclusive)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport {
    pub polys: Vec<NcPolynomial>,
    pub shifts: Vec<TorusValue>,
    /// `Υ = f - Γ∘P`; `None` if `P` leaves the label space.
    pub residual: Option<FunctionTable>,
    pub degrees_exact: bool,
    pub depths_exact: bool,
    pub rank: RankClause,
    pub rank_report: Option<RankReport>,
    pub residual_norm: Option<GowersEstimate>,
    pub gowers_ok: bool,
}

impl WitnessReport {
    pub fn satisfied(&self) -> bool {
        self.degrees_exact && self.depths_exact && self.rank.ok() && self.gowers_ok
    }

    pub fn residual_value(&self) -> f64 {
        self.residual_norm.as_ref().map_or(f64::INFINITY, |g| g.value)
    }
}

fn check_boolean(f: &FunctionTable) -> Result<()> {
    if f.kind() != TableKind::Boolean {
        return Err(Error::UnsupportedKind(format!("expected a boolean table, got {}", f.kind())));
    }
    Ok(())
}

/// Evaluates every clause of `f = Γ∘(P + α) + Υ` against `inst`.
pub fn witness_check(
    f: &FunctionTable,
    inst: &RegularityInstance,
    polys: &[NcPolynomial],
    shifts: &[TorusValue],
    evidence: RankEvidence,
    mode: GowersMode,
    budget: Budget,
) -> Result<WitnessReport> {
    check_boolean(f)?;
    let composite = inst.composite(f.space(), polys, shifts)?;
    let degrees_exact = polys.iter().zip(&inst.degrees).all(|(q, &d)| q.degree() == d);
    let depths_exact = polys
        .iter()
        .zip(shifts)
        .zip(&inst.depths)
        .all(|((q, a), &h)| q.depth() == h && a.lies_in(h + 1));
    let (rank, rank_report) = match (inst.rank, evidence) {
        (None, _) => (RankClause::NotRequired, None),
        (Some(_), RankEvidence::Asserted) => (RankClause::Asserted, None),
        (Some(r), RankEvidence::Search { r_max }) => {
            let b = PolyFactor::new(f.p(), f.n(), polys.to_vec())?;
            let rep = factor_rank_search(&b, r_max, budget)?;
            let clause = match rep.at_least(r) {
                Some(true) => RankClause::Pass,
                Some(false) => RankClause::Fail,
                None => RankClause::Inconclusive,
            };
            (clause, Some(rep))
        }
    };
    let (residual, residual_norm) = match composite {
        Some(c) => {
            let r = f.sub(&c)?;
            let g = gowers_norm(&r, inst.degree_bound.max(1), mode, budget)?;
            (Some(r), Some(g))
        }
        None => (None, None),
    };
    let gowers_ok = residual_norm.as_ref().is_some_and(|g| g.value <= inst.gamma);
    Ok(WitnessReport {
        polys: polys.to_vec(),
        shifts: shifts.to_vec(),
        residual,
        degrees_exact,
        depths_exact,
        rank,
        rank_report,
        residual_norm,
        gowers_ok,
    })
}

/// Candidate `(P_i, α_i)` pairs of slot shape `(d, h)` on `F_p^n`.
fn slot_candidates(p: u32, n: usize, d: u32, h: u32, budget: Budget) -> Result<Vec<(NcPolynomial, TorusValue)>> {
    let polys: Vec<NcPolynomial> = if d == 0 {
        vec![NcPolynomial::zero(p, n)]
    } else {
        enumerate_polynomials_bounded(p, n, d, h, budget)?.exact(d, h).collect()
    };
    let k = h + 1;
    let q = p_pow(p, k);
    let mut out = Vec::with_capacity(polys.len() * q as usize);
    for poly in &polys {
        for a in 0..q {
            out.push((poly.clone(), TorusValue::from_numerator(p, a, k)));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessSearch {
    /// Number of `C`-tuples of shape-matching `(P_i, α_i)`.
    pub family_size: u128,
    /// `false` when the family exceeded the budget; not a refutation.
    pub complete: bool,
    /// Residual `U^d` norm of every examined witness, in enumeration order.
    pub residuals: Vec<f64>,
    pub best: Option<WitnessReport>,
}

struct Family {
    slots: Vec<Vec<(NcPolynomial, TorusValue)>>,
    size: u128,
}

impl Family {
    fn get(&self, mut index: u128) -> (Vec<NcPolynomial>, Vec<TorusValue>) {
        let mut polys = Vec::with_capacity(self.slots.len());
        let mut shifts = Vec::with_capacity(self.slots.len());
        for s in &self.slots {
            let (q, a) = &s[(index % s.len() as u128) as usize];
            index /= s.len() as u128;
            polys.push(q.clone());
            shifts.push(*a);
        }
        (polys, shifts)
    }
}

fn witness_family(f: &FunctionTable, inst: &RegularityInstance, budget: Budget) -> Result<Option<Family>> {
    let mut slots = Vec::new();
    let mut size = 1u128;
    for (&d, &h) in inst.degrees.iter().zip(&inst.depths) {
        match slot_candidates(f.p(), f.n(), d, h, budget) {
            Ok(s) => {
                size = size.saturating_mul(s.len() as u128);
                slots.push(s);
            }
            Err(Error::BudgetExceeded { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Some(Family { slots, size }))
}

/// Exhaustive search for the witness with the smallest residual `U^d` norm.
///
/// The rank clause is evaluated only on the returned witness.
pub fn search_witness(
    f: &FunctionTable,
    inst: &RegularityInstance,
    evidence: RankEvidence,
    mode: GowersMode,
    budget: Budget,
) -> Result<WitnessSearch> {
    check_boolean(f)?;
    let Some(family) = witness_family(f, inst, budget)? else {
        return Ok(WitnessSearch { family_size: u128::MAX, complete: false, residuals: vec![], best: None });
    };
    let per = sat_pow(f.len() as u128, inst.degree_bound.max(1) as u64 + 1);
    if budget.check("witness search", family.size.saturating_mul(per)).is_err() {
        return Ok(WitnessSearch { family_size: family.size, complete: false, residuals: vec![], best: None });
    }
    let residuals = residual_norms(f, inst, &family, mode, budget)?;
    let best_index = residuals
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if b <= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i);
    let best = match best_index {
        Some(i) => {
            let (polys, shifts) = family.get(i as u128);
            Some(witness_check(f, inst, &polys, &shifts, evidence, mode, budget)?)
        }
        None => None,
    };
    Ok(WitnessSearch { family_size: family.size, complete: true, residuals, best })
}

fn residual_norms(
    f: &FunctionTable,
    inst: &RegularityInstance,
    family: &Family,
    mode: GowersMode,
    budget: Budget,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    (0..family.size)
        .into_par_iter()
        .map(|i| {
            let (polys, shifts) = family.get(i);
            match inst.composite(f.space(), &polys, &shifts)? {
                Some(c) => Ok(gowers_norm(&f.sub(&c)?, inst.degree_bound.max(1), mode, budget)?.value),
                None => Ok(f64::INFINITY),
            }
        })
        .collect()
}

/// One pass of the two-coin procedure: keep `f(x)` with probability
/// `1 - δ`, otherwise draw 1 with probability `target(x)`.
pub fn perturb_toward_structure<R: Rng + ?Sized>(
    f: &FunctionTable,
    target: &FunctionTable,
    delta: f64,
    rng: &mut R,
) -> Result<FunctionTable> {
    check_boolean(f)?;
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::OutOfRange(format!("δ = {delta} is not a probability")));
    }
    if (target.p(), target.n()) != (f.p(), f.n()) {
        return Err(Error::DimensionMismatch { expected: f.n(), found: target.n() });
    }
    let t = target.real_or_err()?;
    if let Some(v) = t.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::OutOfRange(format!("target value {v} is outside [0, 1]")));
    }
    let src = f.real_or_err()?;
    let out = src
        .iter()
        .zip(t)
        .map(|(&fx, &tx)| {
            if rng.gen::<f64>() < 1.0 - delta {
                fx
            } else if rng.gen::<f64>() < tx {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    FunctionTable::boolean(f.space(), out)
}

/// One perturbation checked against both bounds of the one-step claim.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationTrial {
    pub l1: f64,
    pub norm_before: f64,
    pub norm_after: f64,
    /// `‖f - g‖_1 ≤ 2δ`.
    pub l1_ok: bool,
    /// `‖g - t‖_{U^d} ≤ (1 - δ/3) ‖f - t‖_{U^d}`.
    pub contracted: bool,
}

pub fn perturbation_trial(
    f: &FunctionTable,
    target: &FunctionTable,
    delta: f64,
    d: u32,
    seed: u64,
    budget: Budget,
) -> Result<PerturbationTrial> {
    let g = perturb_toward_structure(f, target, delta, &mut trial_rng(seed, 0))?;
    let before = gowers_norm(&f.sub(target)?, d, GowersMode::Exact, budget)?.value;
    let after = gowers_norm(&g.sub(target)?, d, GowersMode::Exact, budget)?.value;
    let l1 = f.l1_distance(&g)?;
    Ok(PerturbationTrial {
        l1,
        norm_before: before,
        norm_after: after,
        l1_ok: l1 <= 2.0 * delta,
        contracted: after <= (1.0 - delta / 3.0) * before,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveConfig {
    pub delta: f64,
    pub gamma_goal: f64,
    pub d: u32,
    pub max_rounds: u32,
    /// Cap on sampled perturbations over all rounds.
    pub max_samples: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveOutcome {
    pub g: FunctionTable,
    pub reached: bool,
    pub rounds: u32,
    pub samples: u64,
    /// `‖g - t‖_{U^d}` at the start and after every accepted round.
    pub trace: Vec<f64>,
    pub l1_from_start: f64,
}

/// Repeated contraction rounds toward `target`; sample `s` uses stream `s`
/// of `seed`.
pub fn small_perturbation_drive(
    f: &FunctionTable,
    target: &FunctionTable,
    cfg: DriveConfig,
    seed: u64,
    budget: Budget,
) -> Result<DriveOutcome> {
    check_boolean(f)?;
    let norm = |g: &FunctionTable| -> Result<f64> { Ok(gowers_norm(&g.sub(target)?, cfg.d, GowersMode::Exact, budget)?.value) };
    let mut g = f.clone();
    let mut current = norm(&g)?;
    let mut trace = vec![current];
    let mut rounds = 0;
    let mut samples = 0;
    while current > cfg.gamma_goal && rounds < cfg.max_rounds && samples < cfg.max_samples {
        let goal = (1.0 - cfg.delta / 3.0) * current;
        let mut accepted = None;
        while samples < cfg.max_samples {
            let cand = perturb_toward_structure(&g, target, cfg.delta, &mut trial_rng(seed, samples))?;
            samples += 1;
            if g.l1_distance(&cand)? > 2.0 * cfg.delta {
                continue;
            }
            let v = norm(&cand)?;
            if v <= goal {
                accepted = Some((cand, v));
                break;
            }
        }
        let Some((cand, v)) = accepted else { break };
        g = cand;
        current = v;
        rounds += 1;
        trace.push(v);
    }
    let l1_from_start = f.l1_distance(&g)?;
    Ok(DriveOutcome { g, reached: current <= cfg.gamma_goal, rounds, samples, trace, l1_from_start })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateConfig {
    pub delta: f64,
    pub max_rounds: u32,
    pub max_samples: u64,
    /// Witnesses (smallest residual first) handed to the drive.
    pub top_k: usize,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig { delta: 0.1, max_rounds: 40, max_samples: 400, top_k: 4, seed: 0 }
    }
}

/// Upper bound on the distance from `f` to satisfying an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Closeness {
    /// `None`: no witness produced a satisfying `g` (or the search was
    /// incomplete); the true distance may still be small.
    pub upper_bound: Option<f64>,
    pub search_complete: bool,
    pub family_size: u128,
    pub best_residual: f64,
    /// The rank clause is not enforced by the surrogate.
    pub rank_enforced: bool,
}

impl Closeness {
    pub fn is_close(&self, delta: f64) -> Option<bool> {
        match self.upper_bound {
            Some(u) if u <= delta => Some(true),
            _ if !self.search_complete => None,
            _ => Some(false),
        }
    }
}

/// Minimum over enumerated witnesses of `‖f - g‖_1`, where `g = f` if the
/// residual is already below `γ`, and otherwise `g` is the outcome of the
/// perturbation drive or of one full (`δ = 1`) resampling of `Γ∘P`.
pub fn closeness_surrogate(
    f: &FunctionTable,
    inst: &RegularityInstance,
    cfg: SurrogateConfig,
    budget: Budget,
) -> Result<Closeness> {
    check_boolean(f)?;
    let mode = GowersMode::Exact;
    let incomplete = |family_size| Closeness {
        upper_bound: None,
        search_complete: false,
        family_size,
        best_residual: f64::INFINITY,
        rank_enforced: false,
    };
    let Some(family) = witness_family(f, inst, budget)? else {
        return Ok(incomplete(u128::MAX));
    };
    let d = inst.degree_bound.max(1);
    let per = sat_pow(f.len() as u128, d as u64 + 1);
    if budget.check("witness search", family.size.saturating_mul(per)).is_err() {
        return Ok(incomplete(family.size));
    }
    let residuals = residual_norms(f, inst, &family, mode, budget)?;
    let mut order: Vec<usize> = (0..residuals.len()).filter(|&i| residuals[i].is_finite()).collect();
    order.sort_by(|&a, &b| residuals[a].total_cmp(&residuals[b]).then(a.cmp(&b)));
    let best_residual = order.first().map_or(f64::INFINITY, |&i| residuals[i]);
    let mut upper: Option<f64> = None;
    for (rank, &i) in order.iter().take(cfg.top_k.max(1)).enumerate() {
        if residuals[i] <= inst.gamma {
            upper = Some(0.0);
            break;
        }
        let (polys, shifts) = family.get(i as u128);
        let Some(target) = inst.composite(f.space(), &polys, &shifts)? else { continue };
        let seed = crate::rng::derive_seed(cfg.seed, rank as u64);
        let drive = small_perturbation_drive(
            f,
            &target,
            DriveConfig { delta: cfg.delta, gamma_goal: inst.gamma, d, max_rounds: cfg.max_rounds, max_samples: cfg.max_samples },
            seed,
            budget,
        )?;
        let mut best = drive.reached.then_some(drive.l1_from_start);
        let resample = target.bernoulli_round(&mut trial_rng(seed, u64::MAX))?;
        if gowers_norm(&resample.sub(&target)?, d, mode, budget)?.value <= inst.gamma {
            let l1 = f.l1_distance(&resample)?;
            best = Some(best.map_or(l1, |b: f64| b.min(l1)));
        }
        if let Some(b) = best {
            upper = Some(upper.map_or(b, |u| u.min(b)));
        }
    }
    Ok(Closeness { upper_bound: upper, search_complete: true, family_size: family.size, best_residual, rank_enforced: false })
}

/// Boolean table on `F_p^m` packed as a bitmask, bit `x` set iff the value
/// at point `x` is 1.
pub type TableKey = u64;

pub fn table_key(values: &[f64]) -> TableKey {
    values.iter().enumerate().filter(|(_, &v)| v == 1.0).fold(0, |k, (i, _)| k | 1 << i)
}

pub fn key_values(key: TableKey, len: usize) -> Vec<f64> {
    (0..len).map(|i| (key >> i & 1) as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionSource {
    /// Every affine embedding.
    Exact { embeddings: u128 },
    /// Sampled embeddings.
    Empirical { samples: u64 },
    /// Uniform consistent atom assignments over the affine evaluation forms.
    Equidistributed { assignments: u128 },
}

/// Law of a boolean table on `F_p^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionDistribution {
    pub p: u32,
    pub m: usize,
    pub source: DistributionSource,
    pub probs: BTreeMap<TableKey, f64>,
}

impl RestrictionDistribution {
    pub fn prob(&self, key: TableKey) -> f64 {
        self.probs.get(&key).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn points(&self) -> usize {
        (self.p as usize).pow(self.m as u32)
    }
}

fn check_key_width(p: u32, m: usize) -> Result<usize> {
    check_prime(p)?;
    let pts = sat_pow(p as u128, m as u64);
    if pts > 64 {
        return Err(Error::OutOfRange(format!("restriction tables with {pts} points do not fit a 64-bit key")));
    }
    Ok(pts as usize)
}

/// Distribution of independent per-point coins with `Pr[1] = q_x`.
fn bernoulli_product(q: &[f64]) -> Vec<(TableKey, f64)> {
    let mut out = vec![(0u64, 1.0)];
    for (i, &v) in q.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        if v == 1.0 {
            for e in out.iter_mut() {
                e.0 |= 1 << i;
            }
            continue;
        }
        let mut next = Vec::with_capacity(out.len() * 2);
        for &(k, w) in &out {
            next.push((k, w * (1.0 - v)));
            next.push((k | 1 << i, w * v));
        }
        out = next;
    }
    out
}

fn fractional_points(q: &[f64]) -> u32 {
    q.iter().filter(|&&v| v != 0.0 && v != 1.0).count() as u32
}

/// `μ_{f,m}`: law of `f ∘ A` over affine embeddings `A: F_p^m → F_p^n`.
/// Unit-interval tables are read as independent coins, integrated
/// analytically for every embedding.
pub fn restriction_distribution(
    f: &FunctionTable,
    m: usize,
    ensemble: EmbeddingEnsemble,
    budget: Budget,
) -> Result<RestrictionDistribution> {
    if !matches!(f.kind(), TableKind::Boolean | TableKind::Unit) {
        return Err(Error::UnsupportedKind(format!("restriction distribution of a {} table", f.kind())));
    }
    let (p, n) = (f.p(), f.n());
    let pts = check_key_width(p, m)?;
    let values = f.real_or_err()?;
    let frac = fractional_points(values).min(pts as u32);
    let per = (pts as u128).max(1u128 << frac);
    let (count, source) = match ensemble {
        EmbeddingEnsemble::Exact => {
            let c = crate::algebra::count_affine_embeddings(p, m, n);
            (c, DistributionSource::Exact { embeddings: c })
        }
        EmbeddingEnsemble::Sampled { trials, .. } => (trials as u128, DistributionSource::Empirical { samples: trials }),
    };
    if count == 0 {
        return Err(Error::Precondition("no embeddings to average over".into()));
    }
    budget.check("restriction distribution", count.saturating_mul(per))?;
    let weight = 1.0 / count as f64;
    let probs = ensemble.fold(
        p,
        m,
        n,
        budget,
        BTreeMap::new(),
        |a| {
            let img = a.image_indices().expect("embedding into the table's space");
            let q: Vec<f64> = img.iter().map(|&i| values[i]).collect();
            bernoulli_product(&q)
        },
        |acc: &mut BTreeMap<TableKey, f64>, dist| {
            for (k, w) in dist {
                *acc.entry(k).or_default() += w * weight;
            }
        },
    )?;
    Ok(RestrictionDistribution { p, m, source, probs })
}

/// `μ_{I,m}` in the high-rank limit: atoms along the `p^m` evaluation forms
/// are uniform over consistent assignments, then each point is a coin with
/// bias `Γ(atom)`.
pub fn instance_distribution(
    inst: &RegularityInstance,
    m: usize,
    n_check: usize,
    budget: Budget,
) -> Result<RestrictionDistribution> {
    let p = inst.p();
    let pts = check_key_width(p, m)?;
    let forms = affine_evaluation_forms(p, m)?;
    let consistent = enumerate_consistent(&forms, &inst.degrees, &inst.depths, n_check, budget)?;
    debug_assert_eq!(consistent.count().saturating_mul(consistent.lambda_product()), consistent.total());
    let count = consistent.count();
    budget.check("instance distribution", count.saturating_mul(1u128 << pts.min(64)))?;
    let weight = 1.0 / count as f64;
    let mut probs: BTreeMap<TableKey, f64> = BTreeMap::new();
    for codes in consistent.iter_codes() {
        let q: Vec<f64> = codes.iter().map(|&c| inst.structure.at_code(c)).collect();
        for (k, w) in bernoulli_product(&q) {
            *probs.entry(k).or_default() += w * weight;
        }
    }
    Ok(RestrictionDistribution { p, m, source: DistributionSource::Equidistributed { assignments: count }, probs })
}

/// `½ Σ |μ(v) - μ'(v)|` over the union of supports.
pub fn tv_distance(a: &RestrictionDistribution, b: &RestrictionDistribution) -> Result<f64> {
    if a.p != b.p {
        return Err(Error::ModulusMismatch { expected: a.p, found: b.p });
    }
    if a.m != b.m {
        return Err(Error::DimensionMismatch { expected: a.m, found: b.m });
    }
    let mut keys: Vec<TableKey> = a.probs.keys().chain(b.probs.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let s: f64 = keys.iter().map(|&k| (a.prob(k) - b.prob(k)).abs()).sum();
    Ok((0.5 * s).clamp(0.0, 1.0))
}

/// Label space of an instance, for callers building `Γ` tables.
pub fn instance_labels(p: u32, depths: &[u32]) -> Result<LabelSpace> {
    LabelSpace::new(p, depths.to_vec())
}
