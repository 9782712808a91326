//! Tail constants of the stationary law, the norming sequence, Hill
//! estimation and empirical tail-ratio curves.
//!
//! Model I (heavy immigration): `P(X > x) / P(B > x) → Σ_k μ^{kα} = 1/(1-μ^α)`.
//! Model II (heavy offspring): `P(X > x) / P(A > x) → Σ_k ψ_k` with
//! `ψ_k = E(B) d_k + c μ^{kα}` and `d_k = μ d_{k-1} + μ^{(k-1)α}`, `d_0 = 0`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::process::{thin, ModelConfig, Regime, STATIONARY_CHUNK};
use crate::rng::RandomStream;
use crate::stats::quantile_sorted;

/// Target for the truncation error of `Σ ψ_k`.
pub const PSI_REMAINDER_TOL: f64 = 1e-8;
/// Default probe levels for tail-ratio curves.
pub const DEFAULT_PROBE_QUANTILES: [f64; 3] = [0.99, 0.999, 0.9999];
pub const MIN_COMPOUND_REPS: usize = 1_000_000;

fn check_mu_alpha(mu: f64, alpha: f64) -> Result<()> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::domain(format!("mu must lie in (0, 1), got {mu}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

/// `Σ_{k≥0} μ^{kα} = 1/(1 - μ^α)`.
pub fn model1_tail_constant(mu: f64, alpha: f64) -> Result<f64> {
    check_mu_alpha(mu, alpha)?;
    Ok(1.0 / (1.0 - mu.powf(alpha)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model2Constants {
    /// `d_0..=d_K` for the requested `K`.
    pub d: Vec<f64>,
    /// `ψ_0..=ψ_K` for the requested `K`.
    pub psi: Vec<f64>,
    /// `Σ ψ_k` truncated where the remainder bound drops below [`PSI_REMAINDER_TOL`].
    pub total: f64,
    /// Index at which `total` was truncated.
    pub truncation: usize,
    pub remainder_bound: f64,
}

/// `d_k` from the closed form `μ^{(k-1)α} Σ_{j<k} μ^{j(1-α)}`.
pub fn model2_d_closed(mu: f64, alpha: f64, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let head = mu.powf((k as f64 - 1.0) * alpha);
    let sum: f64 = (0..k).map(|j| mu.powf(j as f64 * (1.0 - alpha))).sum();
    head * sum
}

/// `d_0..=d_k` from the recursion `d_k = μ d_{k-1} + μ^{(k-1)α}`.
pub fn model2_d_recursive(mu: f64, alpha: f64, k: usize) -> Vec<f64> {
    let mut d = vec![0.0; k + 1];
    for j in 1..=k {
        d[j] = mu * d[j - 1] + mu.powf((j as f64 - 1.0) * alpha);
    }
    d
}

/// Bound on `Σ_{k>K} ψ_k`. Since `α > 1`, `d_k <= k μ^{k-1}`.
fn psi_remainder(mu: f64, alpha: f64, c: f64, mean_b: f64, k: usize) -> f64 {
    let kf = k as f64;
    let d_tail = ((kf + 1.0) * mu.powf(kf) - kf * mu.powf(kf + 1.0)) / (1.0 - mu).powi(2);
    mean_b * d_tail + c * mu.powf((kf + 1.0) * alpha) / (1.0 - mu.powf(alpha))
}

pub fn model2_tail_constants(mu: f64, alpha: f64, c: f64, mean_b: f64, k: usize) -> Result<Model2Constants> {
    check_mu_alpha(mu, alpha)?;
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::domain(format!("model II needs alpha in (1, 2), got {alpha}")));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::domain(format!("c must be finite and nonnegative, got {c}")));
    }
    if !(mean_b >= 0.0 && mean_b.is_finite()) {
        return Err(Error::domain(format!("E(B) must be finite, got {mean_b}")));
    }
    let mut truncation = 0;
    while psi_remainder(mu, alpha, c, mean_b, truncation) >= PSI_REMAINDER_TOL {
        truncation += 1;
    }
    let len = truncation.max(k);
    let d = model2_d_recursive(mu, alpha, len);
    let psi: Vec<f64> = d
        .iter()
        .enumerate()
        .map(|(j, dj)| mean_b * dj + c * mu.powf(j as f64 * alpha))
        .collect();
    let total = psi[..=truncation].iter().sum();
    Ok(Model2Constants {
        d: d[..=k].to_vec(),
        psi: psi[..=k].to_vec(),
        total,
        truncation,
        remainder_bound: psi_remainder(mu, alpha, c, mean_b, truncation),
    })
}

/// `a_n = (C n)^{1/α}` where `P(X > x) ~ C x^{-α}`.
pub fn norming_sequence(n: u64, alpha: f64, tail_scale: f64) -> Result<f64> {
    if n == 0 || !(alpha > 0.0) || !(tail_scale > 0.0) {
        return Err(Error::domain(format!(
            "norming sequence needs n >= 1 and positive alpha, scale (n={n}, alpha={alpha}, C={tail_scale})"
        )));
    }
    Ok((tail_scale * n as f64).powf(1.0 / alpha))
}

/// Exact `C` with `P(X > x) ~ C x^{-α}` for the stationary law, plus `α`.
pub fn stationary_tail_scale(config: &ModelConfig) -> Result<(f64, f64)> {
    let mu = config.mu();
    match config.regime {
        Regime::ModelI => {
            let alpha = config
                .immigration
                .tail_index()
                .ok_or_else(|| Error::Regime("model I immigration must be Pareto".into()))?;
            let c0 = config.immigration.tail_constant().unwrap_or(1.0);
            Ok((c0 * model1_tail_constant(mu, alpha)?, alpha))
        }
        Regime::ModelII => {
            let alpha = config
                .offspring
                .tail_index()
                .ok_or_else(|| Error::Regime("model II offspring must be Pareto".into()))?;
            let ca = config.offspring.tail_constant().unwrap_or(1.0);
            let c = config.model2_c().unwrap_or(0.0);
            let consts = model2_tail_constants(mu, alpha, c, config.immigration.mean(), 0)?;
            Ok((ca * consts.total, alpha))
        }
        Regime::Light => Err(Error::Regime("light-tailed models have no tail scale".into())),
    }
}

/// Hill estimate with a normal-approximation confidence interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HillEstimate {
    pub alpha_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub k_order: usize,
}

/// Hill estimator for integer data on the top `k_order` order statistics.
///
/// Values are shifted by +0.5 before taking logs, a continuity correction
/// for integer data. Ties are kept.
pub fn hill(samples: &[u64], k_order: usize) -> Result<HillEstimate> {
    let positive: Vec<f64> = samples.iter().filter(|&&x| x > 0).map(|&x| x as f64 + 0.5).collect();
    hill_inner(positive, k_order)
}

/// Hill estimator for positive real data, no shift.
pub fn hill_continuous(samples: &[f64], k_order: usize) -> Result<HillEstimate> {
    let positive: Vec<f64> = samples.iter().copied().filter(|&x| x > 0.0).collect();
    hill_inner(positive, k_order)
}

fn hill_inner(mut positive: Vec<f64>, k_order: usize) -> Result<HillEstimate> {
    if k_order < 10 {
        return Err(Error::param(format!("k_order must be at least 10, got {k_order}")));
    }
    if positive.len() < k_order + 1 {
        return Err(Error::InsufficientData {
            what: "positive samples for the Hill estimator",
            got: positive.len(),
            need: k_order + 1,
        });
    }
    let n = positive.len();
    positive.select_nth_unstable_by(n - k_order - 1, |a, b| a.total_cmp(b));
    let threshold = positive[n - k_order - 1].ln();
    let h: f64 = positive[n - k_order..].iter().map(|x| x.ln() - threshold).sum::<f64>() / k_order as f64;
    if h <= 0.0 {
        return Err(Error::Degenerate("no variation among the top order statistics".into()));
    }
    let alpha_hat = 1.0 / h;
    let half = 1.96 * alpha_hat / (k_order as f64).sqrt();
    Ok(HillEstimate {
        alpha_hat,
        ci_low: alpha_hat - half,
        ci_high: alpha_hat + half,
        k_order,
    })
}

/// One point of an empirical tail-ratio curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub x: u64,
    pub exceedances: usize,
    pub empirical_tail: f64,
    pub reference_tail: f64,
    pub ratio: f64,
    /// Binomial standard error of `ratio`.
    pub std_error: f64,
    /// `false` when the probe has no exceedances (at or beyond the sample maximum).
    pub reliable: bool,
}

/// Sorted copy of the data for repeated exceedance counts.
#[derive(Clone, Debug)]
pub struct SortedSample(Vec<u64>);

impl SortedSample {
    pub fn new(samples: &[u64]) -> Self {
        let mut v = samples.to_vec();
        v.par_sort_unstable();
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `#{i : x_i > x}`.
    pub fn exceedances(&self, x: u64) -> usize {
        self.0.len() - self.0.partition_point(|&v| v <= x)
    }

    pub fn quantile(&self, q: f64) -> u64 {
        quantile_sorted(&self.0, q)
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }
}

/// `P̂(X > x) / ref_tail(x)` at each probe.
pub fn tail_ratio_curve(samples: &SortedSample, ref_tail: impl Fn(f64) -> f64, probes: &[u64]) -> Vec<RatioPoint> {
    let n = samples.len() as f64;
    probes
        .iter()
        .map(|&x| {
            let count = samples.exceedances(x);
            let p = count as f64 / n;
            let r = ref_tail(x as f64);
            RatioPoint {
                x,
                exceedances: count,
                empirical_tail: p,
                reference_tail: r,
                ratio: p / r,
                std_error: (p * (1.0 - p) / n).sqrt() / r,
                reliable: count > 0,
            }
        })
        .collect()
}

/// Probe thresholds at the given quantile levels, strictly increasing.
pub fn quantile_probes(samples: &SortedSample, levels: &[f64]) -> Result<Vec<u64>> {
    let mut probes = Vec::with_capacity(levels.len());
    for &q in levels {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::param(format!("quantile level {q} outside (0, 1)")));
        }
        let x = samples.quantile(q);
        if probes.last().is_none_or(|&last| x > last) {
            probes.push(x);
        }
    }
    Ok(probes)
}

/// Simulates `S = Σ_{i≤B} A_i` and reports `P̂(S > x) / P(B > x/μ)` at the
/// empirical quantiles `levels` of `S`. Replicate chunks run in parallel,
/// chunk `i` on stream `i`.
pub fn compound_tail_check(
    offspring: &DistributionSpec,
    immigration: &DistributionSpec,
    levels: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<RatioPoint>> {
    offspring.validate()?;
    immigration.validate()?;
    let mu = offspring.mean();
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::domain(format!("compound check needs 0 < mu < 1, got {mu}")));
    }
    if reps < MIN_COMPOUND_REPS {
        return Err(Error::InsufficientData {
            what: "compound-sum replicates",
            got: reps,
            need: MIN_COMPOUND_REPS,
        });
    }
    let draws = compound_sums(offspring, immigration, reps, seed);
    let sorted = SortedSample::new(&draws);
    let probes = quantile_probes(&sorted, levels)?;
    Ok(tail_ratio_curve(&sorted, |x| immigration.tail_prob_real(x / mu), &probes))
}

/// `reps` draws of `Σ_{i≤B} A_i`, deterministic for a given seed.
pub fn compound_sums(offspring: &DistributionSpec, immigration: &DistributionSpec, reps: usize, seed: u64) -> Vec<u64> {
    let chunks = reps.div_ceil(STATIONARY_CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = RandomStream::new(seed, i as u64);
            let len = STATIONARY_CHUNK.min(reps - i * STATIONARY_CHUNK);
            (0..len)
                .map(|_| {
                    let b = immigration.sample(&mut rng);
                    thin(b, offspring, &mut rng)
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

/// Empirical tail behaviour of stationary samples against the theory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub regime: Regime,
    pub alpha: f64,
    pub alpha_hat: HillEstimate,
    pub probe_levels: Vec<f64>,
    pub probe_points: Vec<u64>,
    pub ratio_curve: Vec<RatioPoint>,
    /// `1/(1-μ^α)` for model I, `Σ ψ_k` for model II.
    pub constant_theory: f64,
    pub sample_size: usize,
}

/// Tail report for stationary draws of a model I or model II configuration.
/// Ratios are taken against `P(B > x)` (model I) or `P(A > x)` (model II).
pub fn tail_report(config: &ModelConfig, samples: &[u64], k_order: usize, levels: &[f64]) -> Result<TailReport> {
    let mu = config.mu();
    let (reference, alpha, constant) = match config.regime {
        Regime::ModelI => {
            let alpha = config.immigration.tail_index().unwrap_or(f64::NAN);
            (&config.immigration, alpha, model1_tail_constant(mu, alpha)?)
        }
        Regime::ModelII => {
            let alpha = config.offspring.tail_index().unwrap_or(f64::NAN);
            let c = config.model2_c().unwrap_or(0.0);
            let consts = model2_tail_constants(mu, alpha, c, config.immigration.mean(), 0)?;
            (&config.offspring, alpha, consts.total)
        }
        Regime::Light => return Err(Error::Regime("tail reports need a heavy-tailed regime".into())),
    };
    let sorted = SortedSample::new(samples);
    let probes = quantile_probes(&sorted, levels)?;
    let ratio_curve = tail_ratio_curve(&sorted, |x| reference.tail_prob_real(x), &probes);
    Ok(TailReport {
        regime: config.regime,
        alpha,
        alpha_hat: hill(samples, k_order)?,
        probe_levels: levels.to_vec(),
        probe_points: probes,
        ratio_curve,
        constant_theory: constant,
        sample_size: samples.len(),
    })
}

impl TailReport {
    /// One row per probe: `x,exceedances,empirical_tail,reference_tail,ratio,std_error,target,reliable`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "x",
            "exceedances",
            "empirical_tail",
            "reference_tail",
            "ratio",
            "std_error",
            "target",
            "reliable",
        ])?;
        for p in &self.ratio_curve {
            w.write_record([
                p.x.to_string(),
                p.exceedances.to_string(),
                p.empirical_tail.to_string(),
                p.reference_tail.to_string(),
                p.ratio.to_string(),
                p.std_error.to_string(),
                self.constant_theory.to_string(),
                p.reliable.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, csv_path: &Path, json_path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(csv_path)?)?;
        std::fs::write(json_path, self.to_json()?)?;
        Ok(())
    }
}
