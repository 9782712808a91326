//! Branching process with immigration.
//!
//! The state evolves as `X_t = θ_t ∘ X_{t-1} + B_t` (sum variant) or
//! `X_t = max(θ_t ∘ X_{t-1}, B_t)` (max variant), where `θ ∘ x` is the sum of
//! `x` i.i.d. offspring counts. The stationary law is the series
//! `Σ_k C_k` of independent batches `C_k = Σ_{j ≤ B_k} Ã_j^{(k)}`, each an
//! immigrant batch pushed through `k` generations of thinning. For the max
//! variant the batches share the thinning operators, so its law is not the
//! supremum of independent `C_k`.

use std::fmt;

use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{sample_binomial, sample_pareto, sample_poisson, DistributionSpec};
use crate::error::{Error, Result};
use crate::numeric::integrate;
use crate::rng::RandomStream;

/// Default forward burn-in.
pub const DEFAULT_BURN_IN: u64 = 1_000;
/// Backward-sampler truncation level for the auto depth rule.
pub const BACKWARD_EPSILON: f64 = 1e-6;
/// Hard ceiling for adaptive depth doubling.
pub const MAX_BACKWARD_DEPTH: usize = 1 << 16;
/// Width of the analytic endpoint strip `[1 - δ, 1]` in the Foster-Williamson integral.
pub const FW_DELTA: f64 = 1e-6;
/// Samples per stream when drawing many stationary variates.
pub const STATIONARY_CHUNK: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Sum,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Regularly varying immigration, light offspring.
    #[serde(rename = "model_i")]
    ModelI,
    /// Regularly varying offspring, immigration no heavier than offspring.
    #[serde(rename = "model_ii")]
    ModelII,
    /// Finite second moments for both laws.
    Light,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub offspring: DistributionSpec,
    pub immigration: DistributionSpec,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    pub regime: Regime,
}

fn default_variant() -> Variant {
    Variant::Sum
}

impl ModelConfig {
    pub fn new(offspring: DistributionSpec, immigration: DistributionSpec, variant: Variant, regime: Regime) -> Self {
        Self {
            offspring,
            immigration,
            variant,
            regime,
        }
    }

    /// Offspring mean `μ = E(A)`.
    pub fn mu(&self) -> f64 {
        self.offspring.mean()
    }

    /// Checks parameter ranges, ergodicity and the declared regime, in that order.
    pub fn validate(&self) -> Result<ErgodicityReport> {
        self.offspring.validate()?;
        self.immigration.validate()?;
        let report = check_ergodicity(self)?;
        if !report.ergodic {
            return Err(Error::NotErgodic(report));
        }
        self.check_regime()?;
        Ok(report)
    }

    fn check_regime(&self) -> Result<()> {
        let mu = self.mu();
        let a = self.offspring.moments();
        let b = self.immigration.moments();
        match self.regime {
            Regime::ModelI => {
                // μ = 0 is admitted as the i.i.d. boundary (X_t = B_t)
                if !(0.0..1.0).contains(&mu) {
                    return Err(Error::Regime(format!("model I needs 0 <= mu < 1, got {mu}")));
                }
                match self.immigration {
                    DistributionSpec::DiscretePareto { alpha, .. } if alpha > 0.0 && alpha < 2.0 && alpha != 1.0 => {}
                    _ => {
                        return Err(Error::Regime(
                            "model I needs discrete Pareto immigration with alpha in (0, 2), alpha != 1".into(),
                        ))
                    }
                }
                if !a.second_moment.is_finite() {
                    return Err(Error::Regime("model I needs E(A^2) < inf".into()));
                }
            }
            Regime::ModelII => {
                let alpha = match self.offspring {
                    DistributionSpec::ZeroInflatedPareto { alpha, .. } if alpha > 1.0 && alpha < 2.0 => alpha,
                    _ => {
                        return Err(Error::Regime(
                            "model II needs zero-inflated Pareto offspring with alpha in (1, 2)".into(),
                        ))
                    }
                };
                if !(mu > 0.0 && mu < 1.0) {
                    return Err(Error::Regime(format!("model II needs 0 < mu < 1, got {mu}")));
                }
                match self.immigration.tail_index() {
                    None => {}
                    Some(beta) if beta == alpha => {}
                    Some(beta) => {
                        return Err(Error::Regime(format!(
                            "model II immigration must be light or share the offspring index {alpha}, got {beta}"
                        )))
                    }
                }
            }
            Regime::Light => {
                if !(a.second_moment.is_finite() && b.second_moment.is_finite()) {
                    return Err(Error::Regime("light regime needs finite second moments of A and B".into()));
                }
            }
        }
        Ok(())
    }

    /// Limit `c = lim P(B>x)/P(A>x)` for model II configurations.
    pub fn model2_c(&self) -> Option<f64> {
        if self.regime != Regime::ModelII {
            return None;
        }
        let a = self.offspring.tail_constant()?;
        Some(self.immigration.tail_constant().map_or(0.0, |b| b / a))
    }

    #[inline]
    fn combine(&self, acc: u64, term: u64) -> u64 {
        match self.variant {
            Variant::Sum => acc.saturating_add(term),
            Variant::Max => acc.max(term),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub mu: f64,
    pub log_moment_ok: bool,
    /// Foster-Williamson integral; `None` when it diverges.
    pub fw_integral: Option<f64>,
    /// Quadrature error estimate plus the endpoint-strip bound.
    pub fw_error: f64,
    pub ergodic: bool,
}

impl fmt::Display for ErgodicityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fw = self.fw_integral.map_or("inf".to_string(), |v| format!("{v:.6}"));
        write!(
            f,
            "mu = {:.6}, log-moment finite = {}, Foster-Williamson integral = {}, ergodic = {}",
            self.mu, self.log_moment_ok, fw, self.ergodic
        )
    }
}

/// Ergodicity via `0 <= μ < 1`, `E ln(1+B) < ∞` and the Foster-Williamson
/// integral `∫_0^1 (1 - g(s)) / (f(s) - s) ds`.
///
/// The integral is computed by adaptive quadrature on `[0, 1-δ]`. On the
/// strip `[1-δ, 1]` convexity gives `f(s) - s >= (1-μ)(1-s)`, and the strip
/// contributes at most `E(B) δ / (1-μ)` (finite mean) or
/// `E[min(Bδ, 1 + ln(Bδ))] / (1-μ)` (Pareto immigration with infinite mean);
/// that bound is added to the reported value.
pub fn check_ergodicity(config: &ModelConfig) -> Result<ErgodicityReport> {
    config.offspring.validate()?;
    config.immigration.validate()?;
    let mu = config.mu();
    let log_moment_ok = config.immigration.moments().log_moment_finite;
    let b_is_zero = matches!(config.immigration, DistributionSpec::Dirac { value: 0 });

    if b_is_zero {
        return Ok(ErgodicityReport {
            mu,
            log_moment_ok,
            fw_integral: Some(0.0),
            fw_error: 0.0,
            ergodic: mu < 1.0 && log_moment_ok,
        });
    }
    if mu >= 1.0 {
        // f(s) - s vanishes at least quadratically at s = 1, so the integral diverges
        return Ok(ErgodicityReport {
            mu,
            log_moment_ok,
            fw_integral: None,
            fw_error: 0.0,
            ergodic: false,
        });
    }

    let f = &config.offspring;
    let g = &config.immigration;
    let integrand = |s: f64| (1.0 - g.pgf_unchecked(s)) / (f.pgf_unchecked(s) - s);
    let quad = integrate(integrand, 0.0, 1.0 - FW_DELTA, 1e-10, 4000);
    let strip = endpoint_strip_bound(g, mu);
    let report = ErgodicityReport {
        mu,
        log_moment_ok,
        fw_integral: Some(quad.value + strip),
        fw_error: quad.error + strip,
        ergodic: log_moment_ok && quad.value.is_finite(),
    };
    if !quad.converged {
        return Err(Error::Quadrature {
            message: format!("error estimate {:.3e} after interval budget", quad.error),
            partial: Box::new(report),
        });
    }
    Ok(report)
}

fn endpoint_strip_bound(b: &DistributionSpec, mu: f64) -> f64 {
    let mean = b.mean();
    if mean.is_finite() {
        return mean * FW_DELTA / (1.0 - mu);
    }
    // infinite mean only occurs for the Pareto families with alpha <= 1
    let alpha = b.tail_index().expect("infinite mean implies a Pareto family");
    let c = b.tail_constant().expect("Pareto family");
    let n = 1.0 / FW_DELTA;
    let head = if alpha == 1.0 {
        1.0 + n.ln()
    } else {
        1.0 + (n.powf(1.0 - alpha) - 1.0) / (1.0 - alpha)
    };
    let tail = n.powf(-alpha - 1.0) + n.powf(-alpha) / alpha;
    c * (FW_DELTA * head + tail) / (1.0 - mu)
}

/// `θ ∘ x`: the sum of `x` i.i.d. offspring counts.
///
/// Compound laws with a closed form are drawn directly: Bernoulli and
/// binomial offspring give a binomial, Poisson a Poisson, Dirac a constant,
/// geometric a negative binomial (gamma-Poisson mixture), and zero-inflated
/// Pareto a binomial number of Pareto draws.
#[inline]
pub fn thin(x: u64, offspring: &DistributionSpec, rng: &mut RandomStream) -> u64 {
    if x == 0 {
        return 0;
    }
    match *offspring {
        DistributionSpec::Dirac { value } => x.saturating_mul(value),
        DistributionSpec::Bernoulli { p } => sample_binomial(x, p, rng),
        DistributionSpec::Binomial { trials, p } => sample_binomial(x.saturating_mul(trials), p, rng),
        DistributionSpec::Poisson { lambda } => sample_poisson(x as f64 * lambda, rng),
        DistributionSpec::Geometric { p } => {
            if p >= 1.0 {
                return 0;
            }
            let rate = Gamma::new(x as f64, (1.0 - p) / p).expect("validated").sample(rng);
            sample_poisson(rate, rng)
        }
        DistributionSpec::DiscretePareto { .. } => thin_naive(x, offspring, rng),
        DistributionSpec::ZeroInflatedPareto {
            inflation,
            alpha,
            scale,
        } => {
            let active = sample_binomial(x, inflation, rng);
            let mut total = 0u64;
            for _ in 0..active {
                total = total.saturating_add(sample_pareto(alpha, scale, rng));
            }
            total
        }
    }
}

/// Reference thinning: an explicit loop over `x` offspring draws.
pub fn thin_naive(x: u64, offspring: &DistributionSpec, rng: &mut RandomStream) -> u64 {
    let mut total = 0u64;
    for _ in 0..x {
        total = total.saturating_add(offspring.sample(rng));
    }
    total
}

/// `k`-fold iterated thinning of `x`.
#[inline]
pub fn thin_iterated(x: u64, k: usize, offspring: &DistributionSpec, rng: &mut RandomStream) -> u64 {
    if x == 0 || k == 0 {
        return x;
    }
    match *offspring {
        DistributionSpec::Bernoulli { p } => sample_binomial(x, p.powi(k.min(i32::MAX as usize) as i32), rng),
        DistributionSpec::Dirac { value: 0 } => 0,
        DistributionSpec::Dirac { value: 1 } => x,
        _ => {
            let mut state = x;
            for _ in 0..k {
                state = thin(state, offspring, rng);
                if state == 0 {
                    break;
                }
            }
            state
        }
    }
}

/// Progeny of a single ancestor after `k` generations, `Ã^{(k)}`.
pub fn sample_iterated_thinning(k: usize, offspring: &DistributionSpec, rng: &mut RandomStream) -> u64 {
    thin_iterated(1, k, offspring, rng)
}

/// One transition of the chain. The offspring draw precedes the immigration draw.
#[inline]
pub fn step(state: u64, config: &ModelConfig, rng: &mut RandomStream) -> u64 {
    let survivors = thin(state, &config.offspring, rng);
    let immigrants = config.immigration.sample(rng);
    config.combine(survivors, immigrants)
}

/// Joint transition of the sum chain and the max chain on shared randomness.
///
/// With `max_state <= sum_state`, branching additivity splits
/// `θ ∘ sum_state = θ ∘ max_state + θ' ∘ (sum_state - max_state)` with an
/// independent `θ'`, and both chains see the same immigration draw. Each
/// marginal is the correct one-step law and the order is preserved.
pub fn coupled_step(sum_state: u64, max_state: u64, config: &ModelConfig, rng: &mut RandomStream) -> (u64, u64) {
    assert!(max_state <= sum_state, "coupling requires max_state <= sum_state");
    let shared = thin(max_state, &config.offspring, rng);
    let extra = thin(sum_state - max_state, &config.offspring, rng);
    let immigrants = config.immigration.sample(rng);
    (shared.saturating_add(extra).saturating_add(immigrants), shared.max(immigrants))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub values: Vec<u64>,
    pub burn_in: u64,
    pub seed: u64,
    pub stream: u64,
    pub config: ModelConfig,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl AsRef<[u64]> for PathSample {
    fn as_ref(&self) -> &[u64] {
        &self.values
    }
}

/// Forward trajectory from `X_0 = 0`, keeping `X_{burn_in+1}, ..., X_{burn_in+length}`.
pub fn simulate_path(config: &ModelConfig, length: usize, burn_in: u64, seed: u64, stream: u64) -> Result<PathSample> {
    if length == 0 {
        return Err(Error::param("path length must be at least 1"));
    }
    config.validate()?;
    let mut rng = RandomStream::new(seed, stream);
    let mut x = 0u64;
    for _ in 0..burn_in {
        x = step(x, config, &mut rng);
    }
    let mut values = Vec::with_capacity(length);
    for _ in 0..length {
        x = step(x, config, &mut rng);
        values.push(x);
    }
    Ok(PathSample {
        values,
        burn_in,
        seed,
        stream,
        config: config.clone(),
    })
}

/// Truncation depth of the backward series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Depth {
    /// `K = ceil(ln ε / ln μ)`, doubled while any of the last
    /// `ceil(ln 10 / -ln μ)` terms is nonzero.
    Auto,
    Fixed(usize),
}

/// Exact-in-the-limit sampler of the stationary law through the backward
/// series. Ergodicity and the regime are checked once at construction.
#[derive(Clone, Debug)]
pub struct StationarySampler {
    config: ModelConfig,
    base_depth: usize,
    window: usize,
    adaptive: bool,
}

impl StationarySampler {
    pub fn new(config: &ModelConfig, depth: Depth) -> Result<Self> {
        config.validate()?;
        Ok(Self::unchecked(config, depth))
    }

    fn unchecked(config: &ModelConfig, depth: Depth) -> Self {
        let mu = config.mu();
        let (auto_depth, window) = if mu <= 0.0 {
            (0, 0)
        } else {
            (
                (BACKWARD_EPSILON.ln() / mu.ln()).ceil() as usize,
                (10f64.ln() / -mu.ln()).ceil() as usize,
            )
        };
        match depth {
            Depth::Auto => Self {
                config: config.clone(),
                base_depth: auto_depth,
                window,
                adaptive: true,
            },
            Depth::Fixed(k) => Self {
                config: config.clone(),
                base_depth: k,
                window: 0,
                adaptive: false,
            },
        }
    }

    pub fn base_depth(&self) -> usize {
        self.base_depth
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn sample(&self, rng: &mut RandomStream) -> u64 {
        if self.config.variant == Variant::Max {
            return self.sample_max(rng);
        }
        let cfg = &self.config;
        let mut acc = 0u64;
        let mut last_nonzero: Option<usize> = None;
        let mut limit = self.base_depth;
        let mut k = 0usize;
        loop {
            while k <= limit {
                let batch = cfg.immigration.sample(rng);
                let term = thin_iterated(batch, k, &cfg.offspring, rng);
                if term > 0 {
                    last_nonzero = Some(k);
                }
                acc = cfg.combine(acc, term);
                k += 1;
            }
            if !self.adaptive || limit >= MAX_BACKWARD_DEPTH {
                break;
            }
            match last_nonzero {
                Some(j) if self.window > 0 && j + self.window > limit => {
                    limit = (2 * limit).clamp(1, MAX_BACKWARD_DEPTH);
                }
                _ => break,
            }
        }
        acc
    }

    /// The max recursion unrolls to `max_k θ_0∘…∘θ_{-k+1}∘B_{-k}` with the same
    /// thinning operators shared by every batch, so the terms are not
    /// independent. Runs the chain forward from the deepest batch, coupling
    /// `θ∘x` across states as the offspring sum of the first `x` individuals.
    /// `old` follows the same chain fed only by the deepest `window` batches
    /// and triggers the doubling while it survives.
    fn sample_max(&self, rng: &mut RandomStream) -> u64 {
        let cfg = &self.config;
        let mut limit = self.base_depth;
        loop {
            let (mut y, mut old) = (0u64, 0u64);
            for k in (0..=limit).rev() {
                let (lo, hi) = (y.min(old), y.max(old));
                let t_lo = thin(lo, &cfg.offspring, rng);
                let t_hi = t_lo.saturating_add(thin(hi - lo, &cfg.offspring, rng));
                (y, old) = if y <= old { (t_lo, t_hi) } else { (t_hi, t_lo) };
                let b = cfg.immigration.sample(rng);
                y = y.max(b);
                if k + self.window > limit {
                    old = old.max(b);
                }
            }
            if !self.adaptive || self.window == 0 || old == 0 || limit >= MAX_BACKWARD_DEPTH {
                return y;
            }
            limit = (2 * limit).clamp(1, MAX_BACKWARD_DEPTH);
        }
    }

    /// `count` stationary draws. Chunk `i` of [`STATIONARY_CHUNK`] draws uses
    /// stream `stream_offset + i`, so the output is independent of thread count.
    pub fn sample_many(&self, count: usize, seed: u64, stream_offset: u64) -> Vec<u64> {
        let chunks = count.div_ceil(STATIONARY_CHUNK);
        let parts: Vec<Vec<u64>> = (0..chunks)
            .into_par_iter()
            .map(|i| {
                let mut rng = RandomStream::new(seed, stream_offset + i as u64);
                let len = STATIONARY_CHUNK.min(count - i * STATIONARY_CHUNK);
                (0..len).map(|_| self.sample(&mut rng)).collect()
            })
            .collect();
        parts.concat()
    }
}

/// One stationary draw via the backward series; refuses non-ergodic models.
pub fn sample_stationary_backward(config: &ModelConfig, depth: Depth, rng: &mut RandomStream) -> Result<u64> {
    Ok(StationarySampler::new(config, depth)?.sample(rng))
}

/// The truncated backward series `Σ_{k=0}^{depth} C_k` (or the coupled max)
/// without any ergodicity check. For critical models this grows with the depth.
pub fn backward_partial_sum(config: &ModelConfig, depth: usize, rng: &mut RandomStream) -> u64 {
    StationarySampler::unchecked(config, Depth::Fixed(depth)).sample(rng)
}
