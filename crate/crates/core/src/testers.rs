//! Query-counted oracles and testers.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rayon::prelude::*;

use crate::algebra::{iota, sample_affine_embedding, AffineMap, EmbeddingEnsemble, Space, TorusValue};
use crate::analysis::{FunctionTable, TableKind, TableValues};
use crate::budget::{sat_pow, Budget};
use crate::error::{Error, Result};
use crate::instances::{closeness_surrogate, RegularityInstance, SurrogateConfig};
use crate::rng::{derive_seed, trial_rng};

const Z99: f64 = 2.575_829_303_548_901;

/// Counted access to a function table. Every request counts, repeats
/// included.
#[derive(Debug)]
pub struct QueryOracle {
    table: FunctionTable,
    count: AtomicU64,
    cap: Option<u64>,
}

impl QueryOracle {
    pub fn new(table: FunctionTable, cap: Option<u64>) -> Result<Self> {
        if !matches!(table.kind(), TableKind::Boolean | TableKind::Torus) {
            return Err(Error::UnsupportedKind(format!("oracles serve boolean or torus tables, got {}", table.kind())));
        }
        Ok(QueryOracle { table, count: AtomicU64::new(0), cap })
    }

    pub fn space(&self) -> Space {
        self.table.space()
    }

    pub fn queries(&self) -> u64 {
        self.count.load(Ordering::SeqCst)
    }

    pub fn cap(&self) -> Option<u64> {
        self.cap
    }

    pub fn reset(&self) {
        self.count.store(0, Ordering::SeqCst);
    }

    fn charge(&self) -> Result<()> {
        let used = self.count.fetch_add(1, Ordering::SeqCst) + 1;
        match self.cap {
            Some(cap) if used > cap => Err(Error::QueryCapExceeded { cap }),
            _ => Ok(()),
        }
    }

    /// `f(x)` of a boolean table.
    pub fn query_bit(&self, x: usize) -> Result<f64> {
        self.charge()?;
        match self.table.values() {
            TableValues::Real(v) => Ok(v[x]),
            _ => Err(Error::UnsupportedKind("bit query on a torus table".into())),
        }
    }

    /// `ι(f(x))` for boolean tables, `f(x)` itself for torus tables.
    pub fn query_torus(&self, x: usize) -> Result<TorusValue> {
        self.charge()?;
        match self.table.values() {
            TableValues::Real(v) => Ok(iota(self.table.p(), v[x] as u32)),
            TableValues::Torus(v) => Ok(v[x]),
            TableValues::Complex(_) => Err(Error::UnsupportedKind("torus query on a complex table".into())),
        }
    }

    /// The restriction `f ∘ A`, one query per image point.
    pub fn restrict(&self, a: &AffineMap) -> Result<FunctionTable> {
        let idx = a.image_indices()?;
        let domain = Space::new(a.p(), a.domain_dim())?;
        let values = idx.iter().map(|&i| self.query_bit(i)).collect::<Result<Vec<_>>>()?;
        FunctionTable::boolean(domain, values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject,
    Inconclusive,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Accept => "accept",
            Decision::Reject => "reject",
            Decision::Inconclusive => "inconclusive",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Decision::Accept => 0,
            Decision::Reject => 1,
            Decision::Inconclusive => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TesterVerdict {
    pub decision: Decision,
    pub queries: u64,
    pub trials: u64,
    /// Per trial: `Some(accepted)`, or `None` when undecided.
    pub transcript: Vec<Option<bool>>,
    /// Fraction of accepting trials.
    pub acceptance: f64,
    /// 99% normal half-width on `acceptance`.
    pub half_width: f64,
    /// Closeness was decided by the witness-search surrogate.
    pub surrogate: bool,
}

impl TesterVerdict {
    fn from_transcript(transcript: Vec<Option<bool>>, queries: u64, decision: Decision, surrogate: bool) -> Self {
        let trials = transcript.len() as u64;
        let acc = transcript.iter().filter(|t| **t == Some(true)).count() as f64;
        let acceptance = if trials == 0 { 0.0 } else { acc / trials as f64 };
        let half_width = if trials == 0 { 0.0 } else { Z99 * (acceptance * (1.0 - acceptance) / trials as f64).sqrt() };
        TesterVerdict { decision, queries, trials, transcript, acceptance, half_width, surrogate }
    }
}

/// Samples `trials` embeddings and accepts iff at least half of the restricted
/// tables lie in `V`. Trial `t` draws its embedding from stream `t` of `seed`.
pub fn canonical_run<V>(oracle: &QueryOracle, m: usize, member: V, trials: u64, seed: u64) -> Result<TesterVerdict>
where
    V: Fn(&[f64]) -> bool + Sync,
{
    let s = oracle.space();
    if trials == 0 {
        return Err(Error::Precondition("canonical run needs at least one trial".into()));
    }
    let before = oracle.queries();
    let outcomes: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let a = sample_affine_embedding(&mut trial_rng(seed, t), s.p(), m, s.n())?;
            let view = oracle.restrict(&a)?;
            Ok(member(view.real().expect("boolean view")))
        })
        .collect::<Result<_>>()?;
    let accepted = outcomes.iter().filter(|&&b| b).count() as u64;
    let decision = if 2 * accepted >= trials { Decision::Accept } else { Decision::Reject };
    Ok(TesterVerdict::from_transcript(
        outcomes.into_iter().map(Some).collect(),
        oracle.queries() - before,
        decision,
        false,
    ))
}

/// `Pr_A[f ∘ A ∈ V]` over every affine embedding.
pub fn canonical_acceptance_exact<V>(f: &FunctionTable, m: usize, member: V, budget: Budget) -> Result<f64>
where
    V: Fn(&[f64]) -> bool + Sync,
{
    let values = f.real_or_err()?;
    let s = f.space();
    let (hits, total) = EmbeddingEnsemble::Exact.fold(
        s.p(),
        m,
        s.n(),
        budget,
        (0u128, 0u128),
        |a| {
            let view: Vec<f64> = a.image_indices().expect("embedding").iter().map(|&i| values[i]).collect();
            member(&view)
        },
        |acc, hit| {
            acc.0 += hit as u128;
            acc.1 += 1;
        },
    )?;
    Ok(hits as f64 / total as f64)
}

/// Points `x + Σ_{i∈S} y_i` for every subset `S`, indexed by bitmask.
fn cube_points(space: &Space, x: usize, ys: &[usize]) -> Vec<usize> {
    let mut pts = vec![x; 1 << ys.len()];
    for s in 1..pts.len() {
        let top = usize::BITS - 1 - s.leading_zeros();
        pts[s] = space.add_indices(pts[s ^ (1 << top)], ys[top as usize]);
    }
    pts
}

/// `(D_{y_1} ⋯ D_{y_k} T)(x)`, from values at the cube points.
fn cube_derivative(p: u32, values: &[TorusValue], k: usize) -> TorusValue {
    values.iter().enumerate().fold(TorusValue::zero(p), |acc, (s, v)| {
        if (k - s.count_ones() as usize).is_multiple_of(2) {
            acc.add(v)
        } else {
            acc.sub(v)
        }
    })
}

/// One-sided test for classical degree `≤ d`: each rep queries the
/// `2^{d+1}` cube points and rejects on a nonzero `(d+1)`-fold derivative.
pub fn classical_degree_tester(oracle: &QueryOracle, d: u32, reps: u64, seed: u64) -> Result<TesterVerdict> {
    if reps == 0 {
        return Err(Error::Precondition("degree tester needs at least one repetition".into()));
    }
    let s = oracle.space();
    let k = d as usize + 1;
    if k >= usize::BITS as usize {
        return Err(Error::OutOfRange(format!("degree {d} is too large")));
    }
    let before = oracle.queries();
    let outcomes: Vec<bool> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = trial_rng(seed, r);
            let x = rng.gen_range(0..s.size());
            let ys: Vec<usize> = (0..k).map(|_| rng.gen_range(0..s.size())).collect();
            let vals = cube_points(&s, x, &ys).into_iter().map(|i| oracle.query_torus(i)).collect::<Result<Vec<_>>>()?;
            Ok(cube_derivative(s.p(), &vals, k).is_zero())
        })
        .collect::<Result<_>>()?;
    let decision = if outcomes.iter().all(|&b| b) { Decision::Accept } else { Decision::Reject };
    Ok(TesterVerdict::from_transcript(
        outcomes.into_iter().map(Some).collect(),
        oracle.queries() - before,
        decision,
        false,
    ))
}

/// Exact per-rep rejection probability of the degree tester as a reduced
/// fraction, over every `(x, y_1, …, y_{d+1})`.
pub fn degree_rejection_exact(f: &FunctionTable, d: u32, budget: Budget) -> Result<(u128, u128)> {
    let s = f.space();
    let k = d as usize + 1;
    let tuples = sat_pow(s.size() as u128, k as u64 + 1);
    budget.check("exhaustive degree-test tuples", tuples.saturating_mul(1u128 << k.min(100)))?;
    let t: Vec<TorusValue> = match f.values() {
        TableValues::Real(v) => v.iter().map(|&b| iota(s.p(), b as u32)).collect(),
        TableValues::Torus(v) => v.clone(),
        TableValues::Complex(_) => return Err(Error::UnsupportedKind("degree test of a complex table".into())),
    };
    let size = s.size() as u128;
    let rejected: u128 = (0..tuples)
        .into_par_iter()
        .map(|mut idx| {
            let x = (idx % size) as usize;
            idx /= size;
            let ys: Vec<usize> = (0..k)
                .map(|_| {
                    let y = (idx % size) as usize;
                    idx /= size;
                    y
                })
                .collect();
            let vals: Vec<TorusValue> = cube_points(&s, x, &ys).into_iter().map(|i| t[i]).collect();
            u128::from(!cube_derivative(s.p(), &vals, k).is_zero())
        })
        .sum();
    let g = gcd(rejected, tuples);
    Ok((rejected / g, tuples / g))
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

/// Settings of the restricted closeness test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceTest {
    pub epsilon: f64,
    pub delta: f64,
    pub m: usize,
    /// Odd number of independent embeddings; the majority decides.
    pub trials: u64,
    pub surrogate: SurrogateConfig,
}

/// Restricts `f` along random embeddings and accepts when the restriction
/// is `δ`-close to satisfying `inst` under the closeness surrogate.
pub fn instance_tester(
    oracle: &QueryOracle,
    inst: &RegularityInstance,
    cfg: InstanceTest,
    seed: u64,
    budget: Budget,
) -> Result<TesterVerdict> {
    for (name, v) in [("ε", cfg.epsilon), ("δ", cfg.delta)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::OutOfRange(format!("{name} = {v} must lie in (0, 1)")));
        }
    }
    if cfg.trials == 0 || cfg.trials.is_multiple_of(2) {
        return Err(Error::Precondition(format!("trial count must be odd, got {}", cfg.trials)));
    }
    if inst.p() != oracle.space().p() {
        return Err(Error::ModulusMismatch { expected: oracle.space().p(), found: inst.p() });
    }
    let s = oracle.space();
    let before = oracle.queries();
    let mut transcript = Vec::with_capacity(cfg.trials as usize);
    for t in 0..cfg.trials {
        let a = sample_affine_embedding(&mut trial_rng(seed, t), s.p(), cfg.m, s.n())?;
        let view = oracle.restrict(&a)?;
        let sc = SurrogateConfig { seed: derive_seed(seed, t), ..cfg.surrogate };
        transcript.push(closeness_surrogate(&view, inst, sc, budget)?.is_close(cfg.delta));
    }
    let decision = majority(&transcript);
    Ok(TesterVerdict::from_transcript(transcript, oracle.queries() - before, decision, true))
}

fn majority(outcomes: &[Option<bool>]) -> Decision {
    let acc = outcomes.iter().filter(|o| **o == Some(true)).count();
    let rej = outcomes.iter().filter(|o| **o == Some(false)).count();
    if 2 * acc > outcomes.len() {
        Decision::Accept
    } else if 2 * rej > outcomes.len() {
        Decision::Reject
    } else {
        Decision::Inconclusive
    }
}

/// Majority vote over `repetitions` runs; run `r` receives seed
/// `derive_seed(seed, r)`.
pub fn amplify<F>(repetitions: u64, seed: u64, mut run: F) -> Result<TesterVerdict>
where
    F: FnMut(u64) -> Result<TesterVerdict>,
{
    if repetitions == 0 || repetitions.is_multiple_of(2) {
        return Err(Error::Precondition(format!("repetitions must be odd, got {repetitions}")));
    }
    let mut votes = Vec::with_capacity(repetitions as usize);
    let mut transcript = Vec::new();
    let mut queries = 0;
    let mut surrogate = false;
    for r in 0..repetitions {
        let v = run(derive_seed(seed, r))?;
        votes.push(match v.decision {
            Decision::Accept => Some(true),
            Decision::Reject => Some(false),
            Decision::Inconclusive => None,
        });
        queries += v.queries;
        surrogate |= v.surrogate;
        transcript.extend(v.transcript);
    }
    let decision = majority(&votes);
    let mut out = TesterVerdict::from_transcript(transcript, queries, decision, surrogate);
    // the estimate is over the votes, not the pooled inner trials
    let n = votes.len() as f64;
    out.acceptance = votes.iter().filter(|v| **v == Some(true)).count() as f64 / n;
    out.half_width = Z99 * (out.acceptance * (1.0 - out.acceptance) / n).sqrt();
    Ok(out)
}

/// Odd repetition count whose majority errs with probability at most
/// `1/(3·len)` when each run is right with probability 2/3.
pub fn family_repetitions(len: usize) -> u64 {
    let r = (18.0 * (3.0 * len.max(1) as f64).ln()).ceil() as u64;
    r | 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyVerdict {
    pub verdict: TesterVerdict,
    /// Per instance, in family order.
    pub per_instance: Vec<TesterVerdict>,
    /// Index of the first instance reported close.
    pub accepted_by: Option<usize>,
}

/// Runs the amplified surrogate distinguisher (`δ = ε/4`) for every
/// instance and accepts iff some instance reports close.
pub fn family_tester(
    oracle: &QueryOracle,
    family: &[RegularityInstance],
    epsilon: f64,
    m: usize,
    repetitions: Option<u64>,
    surrogate: SurrogateConfig,
    seed: u64,
    budget: Budget,
) -> Result<FamilyVerdict> {
    if family.is_empty() {
        return Err(Error::Precondition("instance family is empty".into()));
    }
    let reps = repetitions.unwrap_or_else(|| family_repetitions(family.len()));
    let cfg = InstanceTest { epsilon, delta: epsilon / 4.0, m, trials: 1, surrogate };
    let before = oracle.queries();
    let mut per_instance = Vec::with_capacity(family.len());
    for (i, inst) in family.iter().enumerate() {
        let base = derive_seed(seed, i as u64);
        per_instance.push(amplify(reps, base, |s| instance_tester(oracle, inst, cfg, s, budget))?);
    }
    let accepted_by = per_instance.iter().position(|v| v.decision == Decision::Accept);
    let decision = if accepted_by.is_some() {
        Decision::Accept
    } else if per_instance.iter().any(|v| v.decision == Decision::Inconclusive) {
        Decision::Inconclusive
    } else {
        Decision::Reject
    };
    let transcript = per_instance
        .iter()
        .map(|v| match v.decision {
            Decision::Accept => Some(true),
            Decision::Reject => Some(false),
            Decision::Inconclusive => None,
        })
        .collect();
    let verdict = TesterVerdict::from_transcript(transcript, oracle.queries() - before, decision, true);
    Ok(FamilyVerdict { verdict, per_instance, accepted_by })
}
