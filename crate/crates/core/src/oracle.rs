//! Simulation-free ground truth for the stationary law.
//!
//! * iterated offspring pgf `f^{∘k}` and the stationary pgf product
//!   `π(s) = Π_{k≥0} g(f^{∘k}(s))`, which follows from independence of the
//!   backward-series terms;
//! * exact second and third moments of `Ã^{(k)}` with the matching upper bounds;
//! * stationary mean and variance (law of total variance applied to one step);
//! * a truncated-kernel stationary pmf by power iteration.
//!
//! The variance identity: `Var X = E(X) Var(A) + μ² Var(X) + Var(B)` for the
//! stationary `X = θ ∘ X' + B`, hence `Var X = (Var(A) E(X) + Var(B)) / (1 - μ²)`.

use serde::{Deserialize, Serialize};

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::process::{ModelConfig, Variant};

/// Power iteration stops once successive iterates differ by less than this in TV.
pub const POWER_ITERATION_TV: f64 = 1e-12;
const MAX_POWER_ITERATIONS: usize = 1_000_000;

fn check_unit(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::domain(format!("s = {s} outside [0, 1]")));
    }
    Ok(())
}

/// `f^{∘k}(s)`, the pgf of `Ã^{(k)}`; `k = 0` is the identity.
pub fn iterate_pgf(offspring: &DistributionSpec, k: usize, s: f64) -> Result<f64> {
    check_unit(s)?;
    let mut t = s;
    for _ in 0..k {
        t = offspring.pgf_unchecked(t);
    }
    Ok(t)
}

/// Finite product `Π_{k=0}^{depth} g(f^{∘k}(s))`.
///
/// When `E(B) < ∞` the neglected factors satisfy
/// `-ln Π_{k>depth} g(f^{∘k}(s)) <= E(B)(1-s) μ^{depth+1} / (1-μ)` up to first
/// order; see [`stationary_pgf_remainder_bound`].
pub fn stationary_pgf(config: &ModelConfig, s: f64, depth: usize) -> Result<f64> {
    check_unit(s)?;
    let mu = config.mu();
    if mu >= 1.0 {
        return Err(Error::domain(format!("stationary pgf needs mu < 1, got {mu}")));
    }
    let mut t = s;
    let mut prod = config.immigration.pgf_unchecked(t);
    for _ in 0..depth {
        t = config.offspring.pgf_unchecked(t);
        prod *= config.immigration.pgf_unchecked(t);
    }
    Ok(prod)
}

/// Bound on `Σ_{k>depth} (1 - g(f^{∘k}(s)))`, infinite when `E(B) = ∞`.
pub fn stationary_pgf_remainder_bound(config: &ModelConfig, s: f64, depth: usize) -> f64 {
    let mu = config.mu();
    let mean_b = config.immigration.mean();
    mean_b * (1.0 - s) * mu.powi(depth as i32 + 1) / (1.0 - mu)
}

/// Exact `E(Ã^{(k)})²` and the bound `E(A²)(k+1)μ^k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondMoment {
    pub k: usize,
    pub exact: f64,
    pub bound: f64,
}

impl SecondMoment {
    pub fn holds(&self) -> bool {
        self.exact <= self.bound
    }
}

/// `m₂(k)` via `Var Ã^{(k)} = μ Var Ã^{(k-1)} + Var(A) μ^{2(k-1)}`, where
/// `Ã^{(k)}` is the `k`-generation compound with mean `μ^k`.
///
/// The bound is evaluated at the same `k`. At that indexing it can fail for
/// small `μ`: Bernoulli(0.2) at `k = 2` gives `0.04 > 0.024`. It always
/// bounds `m₂(k + 1)`, which is the reading with `Ã^{(0)} = A`.
pub fn exact_m2(offspring: &DistributionSpec, k: usize) -> Result<SecondMoment> {
    let m = offspring.moments();
    if !m.second_moment.is_finite() {
        return Err(Error::InfiniteMoment("E(A^2)".into()));
    }
    let mu = m.mean;
    let var_a = m.variance();
    let mut var = 0.0;
    for j in 1..=k {
        var = mu * var + var_a * mu.powi(2 * (j as i32 - 1));
    }
    Ok(SecondMoment {
        k,
        exact: var + mu.powi(2 * k as i32),
        bound: m.second_moment * (k as f64 + 1.0) * mu.powi(k as i32),
    })
}

/// Exact `E(Ã^{(k)})³` and the bound
/// `μ^k E(A³) + E(A³) k μ^{2k} + 3 E(A²)² k² μ^k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThirdMoment {
    pub k: usize,
    pub exact: f64,
    pub bound: f64,
}

impl ThirdMoment {
    pub fn holds(&self) -> bool {
        self.exact <= self.bound
    }
}

/// Exact third moment by the compound-sum recursion
/// `Ã^{(k)} = Σ_{i ≤ Ã^{(k-1)}} A_i`, plus the closed-form bound. The same
/// indexing caveat as [`exact_m2`] applies: Bernoulli(0.2) at `k = 2`
/// violates the bound, while `m₃(k + 1)` stays below it.
pub fn m3_upper_bound(offspring: &DistributionSpec, k: usize) -> Result<ThirdMoment> {
    let m = offspring.moments();
    if !m.third_moment.is_finite() {
        return Err(Error::InfiniteMoment("E(A^3)".into()));
    }
    let mu = m.mean;
    if mu >= 1.0 {
        return Err(Error::domain(format!("third-moment bound needs mu < 1, got {mu}")));
    }
    let (a1, a2, a3) = (m.mean, m.second_moment, m.third_moment);
    let (mut n1, mut n2, mut n3) = (1.0, 1.0, 1.0);
    for _ in 0..k {
        let f2 = n2 - n1; // E N(N-1)
        let f3 = n3 - 3.0 * n2 + 2.0 * n1; // E N(N-1)(N-2)
        let next3 = n1 * a3 + 3.0 * f2 * a1 * a2 + f3 * a1 * a1 * a1;
        let next2 = n1 * a2 + f2 * a1 * a1;
        n1 *= a1;
        n2 = next2;
        n3 = next3;
    }
    let kf = k as f64;
    let muk = mu.powi(k as i32);
    Ok(ThirdMoment {
        k,
        exact: n3,
        bound: muk * a3 + a3 * kf * mu.powi(2 * k as i32) + 3.0 * a2 * a2 * kf * kf * muk,
    })
}

/// Stationary mean and variance; `f64::INFINITY` flags a divergent moment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryMoments {
    pub mean: f64,
    pub variance: f64,
}

pub fn stationary_moments(config: &ModelConfig) -> Result<StationaryMoments> {
    if config.variant != Variant::Sum {
        return Err(Error::domain("closed-form stationary moments exist for the sum variant only"));
    }
    let a = config.offspring.moments();
    let b = config.immigration.moments();
    let mu = a.mean;
    if mu >= 1.0 {
        return Err(Error::domain(format!("stationary moments need mu < 1, got {mu}")));
    }
    let mean = if b.mean.is_finite() {
        b.mean / (1.0 - mu)
    } else {
        f64::INFINITY
    };
    let variance = if mean.is_finite() && a.second_moment.is_finite() && b.second_moment.is_finite() {
        (a.variance() * mean + b.variance()) / (1.0 - mu * mu)
    } else {
        f64::INFINITY
    };
    Ok(StationaryMoments { mean, variance })
}

/// Truncated stationary pmf on `{0, ..., state_cap}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryOracle {
    pub pmf: Vec<f64>,
    /// Mass the fixed point leaks above the cap in one transition.
    pub mass_deficit: f64,
    /// Depth used when the pgf product is evaluated alongside this pmf.
    pub pgf_depth: usize,
    pub iterations: usize,
    pub config: ModelConfig,
}

impl StationaryOracle {
    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.pmf
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64 - m).powi(2) * p)
            .sum()
    }

    /// `Σ_n pmf(n) s^n` by Horner's rule.
    pub fn pgf(&self, s: f64) -> f64 {
        self.pmf.iter().rev().fold(0.0, |acc, p| acc * s + p)
    }

    /// `sup_y |(πP)(y) - π(y)|` for the truncated kernel.
    pub fn kernel_residual(&self) -> f64 {
        let kernel = TruncatedKernel::new(&self.config, self.pmf.len() - 1);
        let next = kernel.apply(&self.pmf);
        next.iter()
            .zip(&self.pmf)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

struct TruncatedKernel {
    cap: usize,
    offspring: Vec<f64>,
    immigration: Vec<f64>,
    variant: Variant,
}

impl TruncatedKernel {
    fn new(config: &ModelConfig, cap: usize) -> Self {
        let pmf_vec = |d: &DistributionSpec| -> Vec<f64> {
            let top = d.support_cutoff(1e-18, cap as u64) as usize;
            (0..=top).map(|n| d.pmf(n as u64)).collect()
        };
        Self {
            cap,
            offspring: pmf_vec(&config.offspring),
            immigration: pmf_vec(&config.immigration),
            variant: config.variant,
        }
    }

    fn convolve(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cap + 1];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, &yj) in y.iter().enumerate().take(self.cap + 1 - i) {
                out[i + j] += xi * yj;
            }
        }
        out
    }

    /// `πP` restricted to `{0..cap}`; mass above the cap is dropped.
    fn apply(&self, pi: &[f64]) -> Vec<f64> {
        // Σ_x π(x) A^{*x} by Horner: r ← r * A + π(x) δ_0, from the top state down
        let top = pi.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        let mut survivors = vec![0.0; self.cap + 1];
        survivors[0] = pi[top];
        for x in (0..top).rev() {
            survivors = self.convolve(&survivors, &self.offspring);
            survivors[0] += pi[x];
        }
        match self.variant {
            Variant::Sum => self.convolve(&survivors, &self.immigration),
            Variant::Max => {
                // P(max ≤ y) = P(T ≤ y) P(B ≤ y)
                let mut out = vec![0.0; self.cap + 1];
                let (mut ct, mut cb, mut prev) = (0.0, 0.0, 0.0);
                for y in 0..=self.cap {
                    ct += survivors[y];
                    cb += self.immigration.get(y).copied().unwrap_or(0.0);
                    let joint = ct * cb;
                    out[y] = joint - prev;
                    prev = joint;
                }
                out
            }
        }
    }
}

/// Stationary pmf of the chain truncated to `{0..state_cap}`, by power
/// iteration from `δ_0` until successive normalized iterates differ by less
/// than [`POWER_ITERATION_TV`] in total variation.
///
/// The kernel is applied matrix-free (Horner over offspring convolutions),
/// so memory stays `O(state_cap)`.
pub fn stationary_pmf_bruteforce(config: &ModelConfig, state_cap: usize, tol: f64) -> Result<StationaryOracle> {
    let report = crate::process::check_ergodicity(config)?;
    if !report.ergodic {
        return Err(Error::NotErgodic(report));
    }
    let kernel = TruncatedKernel::new(config, state_cap);
    let mut pi = vec![0.0; state_cap + 1];
    pi[0] = 1.0;
    let mut deficit: f64;
    let mut iterations = 0;
    loop {
        let mut next = kernel.apply(&pi);
        let mass: f64 = next.iter().sum();
        deficit = 1.0 - mass;
        next.iter_mut().for_each(|p| *p /= mass);
        let tv = 0.5 * next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum::<f64>();
        pi = next;
        iterations += 1;
        if tv < POWER_ITERATION_TV || iterations >= MAX_POWER_ITERATIONS {
            break;
        }
    }
    if deficit > tol {
        return Err(Error::MassDeficit {
            cap: state_cap,
            deficit,
            tol,
        });
    }
    let mu = config.mu();
    let pgf_depth = if mu > 0.0 {
        ((1e-15f64).ln() / mu.ln()).ceil() as usize
    } else {
        0
    };
    Ok(StationaryOracle {
        pmf: pi,
        mass_deficit: deficit.max(0.0),
        pgf_depth,
        iterations,
        config: config.clone(),
    })
}
