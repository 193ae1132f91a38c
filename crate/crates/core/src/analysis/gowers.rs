use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::{mult_derivative_values, FunctionTable};
use crate::algebra::Space;
use crate::budget::{sat_pow, Budget};
use crate::error::{Error, Result};
use crate::rng::trial_rng;

/// Samples per seeded chunk in Monte Carlo mode.
pub const MC_CHUNK: u64 = 4096;

/// 99% two-sided normal quantile.
const Z99: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GowersMode {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GowersEstimate {
    /// `‖f‖_{U^d}`.
    pub value: f64,
    pub d: u32,
    pub mode: GowersMode,
    /// Number of sampled tuples; the full tuple count `p^{n(d+1)}` in exact mode.
    pub samples: u128,
    /// Expectation before the `2^d`-th root (unclamped in Monte Carlo mode).
    pub raw_mean: f64,
    /// 99% half-width on `raw_mean`; 0 in exact mode.
    pub half_width: f64,
}

impl GowersEstimate {
    pub fn is_exact(&self) -> bool {
        matches!(self.mode, GowersMode::Exact)
    }
}

/// `‖f‖_{U^d}` of the complex lift of `f` (torus tables enter as `e(f)`).
///
/// Exact mode counts `p^{n(d+1)}` products against the budget.
pub fn gowers_norm(f: &FunctionTable, d: u32, mode: GowersMode, budget: Budget) -> Result<GowersEstimate> {
    if d == 0 {
        return Err(Error::Precondition("Gowers order must be at least 1".into()));
    }
    let space = f.space();
    let values = f.to_complex();
    match mode {
        GowersMode::Exact => {
            let tuples = sat_pow(space.size() as u128, d as u64 + 1);
            budget.check_with_hint(
                &format!("exact U^{d} norm over F_{}^{}", space.p(), space.n()),
                tuples,
                "use monte-carlo mode with a sample count instead",
            )?;
            let power = power_exact(&space, &values, d).max(0.0);
            Ok(GowersEstimate {
                value: root(power, d),
                d,
                mode,
                samples: tuples,
                raw_mean: power,
                half_width: 0.0,
            })
        }
        GowersMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::Precondition("monte-carlo mode needs at least one sample".into()));
            }
            let (mean, half_width) = power_monte_carlo(&space, &values, d, samples, seed);
            Ok(GowersEstimate {
                value: root(mean.max(0.0), d),
                d,
                mode,
                samples: samples as u128,
                raw_mean: mean,
                half_width,
            })
        }
    }
}

fn root(power: f64, d: u32) -> f64 {
    power.powf(1.0 / (1u64 << d) as f64)
}

/// `‖f‖_{U^d}^{2^d}` via `E_h ‖Δ_h f‖_{U^{d-1}}^{2^{d-1}}`.
fn power_exact(space: &Space, f: &[Complex64], d: u32) -> f64 {
    match d {
        1 => {
            let m = f.iter().sum::<Complex64>() / f.len() as f64;
            m.norm_sqr()
        }
        2 => fourier_fourth_moment(space, f),
        _ => {
            let total: f64 = (0..space.size())
                .into_par_iter()
                .map(|h| power_exact(space, &mult_derivative_values(space, f, h), d - 1))
                .collect::<Vec<f64>>()
                .into_iter()
                .sum();
            total / space.size() as f64
        }
    }
}

/// `Σ_a |f̂(a)|^4 = ‖f‖_{U^2}^4`.
fn fourier_fourth_moment(space: &Space, f: &[Complex64]) -> f64 {
    let p = space.p() as usize;
    let omega: Vec<Complex64> = (0..p)
        .map(|k| Complex64::from_polar(1.0, -std::f64::consts::TAU * k as f64 / p as f64))
        .collect();
    let mut data = f.to_vec();
    let mut buf = vec![Complex64::new(0.0, 0.0); p];
    let mut stride = 1;
    for _ in 0..space.n() {
        let block = stride * p;
        for base in (0..data.len()).step_by(block) {
            for off in 0..stride {
                for (a, slot) in buf.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for x in 0..p {
                        acc += omega[(a * x) % p] * data[base + off + x * stride];
                    }
                    *slot = acc;
                }
                for (a, &v) in buf.iter().enumerate() {
                    data[base + off + a * stride] = v;
                }
            }
        }
        stride = block;
    }
    let size = space.size() as f64;
    data.iter().map(|z| (z.norm_sqr() / (size * size)).powi(2)).sum()
}

/// Sample mean and 99% half-width of `Re Π_S C^{|S|} f(x + Σ_{i∈S} y_i)`.
fn power_monte_carlo(space: &Space, f: &[Complex64], d: u32, samples: u64, seed: u64) -> (f64, f64) {
    let chunks = samples.div_ceil(MC_CHUNK);
    let corners = 1usize << d;
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = trial_rng(seed, c);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut pts = vec![0usize; corners];
            let mut ys = vec![0usize; d as usize];
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                pts[0] = rng.gen_range(0..space.size());
                for y in ys.iter_mut() {
                    *y = rng.gen_range(0..space.size());
                }
                let mut prod = f[pts[0]];
                for s in 1..corners {
                    let top = usize::BITS - 1 - s.leading_zeros();
                    pts[s] = space.add_indices(pts[s ^ (1 << top)], ys[top as usize]);
                    let v = f[pts[s]];
                    prod *= if s.count_ones() % 2 == 1 { v.conj() } else { v };
                }
                s1 += prod.re;
                s2 += prod.re * prod.re;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = partial.into_iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let nf = samples as f64;
    let mean = s1 / nf;
    let var = if samples > 1 { ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    (mean, Z99 * (var / nf).sqrt())
}
