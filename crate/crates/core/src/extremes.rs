//! Extremal behaviour of stationary paths.
//!
//! For model I the extremal index is `θ = 1 - μ^α`, block maxima normalized
//! by `a_n` follow `exp(-θ x^{-α})`, cluster sizes are geometric with
//! `P(κ = k) = (1-μ^α) μ^{α(k-1)}`, and the tail process decays as `Y_0 μ^t`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{step, ModelConfig};
use crate::rng::RandomStream;
use crate::stats::{chi_square_sf, ks_one_sample, quantile_sorted};

pub const MIN_EXCEEDANCES: usize = 20;
pub const MIN_CLUSTERS_FIT: usize = 100;
pub const MIN_PROFILE_EVENTS: usize = 200;
pub const MIN_INTERCLUSTER: usize = 20;
/// Size classes `1..=4` and a pooled `>= 5` class.
pub const CLUSTER_CLASSES: usize = 5;

/// `θ = 1 - μ^α`.
pub fn theoretical_extremal_index(mu: f64, alpha: f64) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) || !(alpha > 0.0) {
        return Err(Error::domain(format!("extremal index needs mu in (0, 1), alpha > 0 (mu={mu}, alpha={alpha})")));
    }
    Ok(1.0 - mu.powf(alpha))
}

/// Maxima of consecutive blocks; a trailing partial block is dropped.
pub fn block_maxima(path: &[u64], block_len: usize) -> Result<Vec<u64>> {
    if block_len == 0 || path.len() < block_len {
        return Err(Error::param(format!(
            "block length {block_len} must be in 1..={}",
            path.len()
        )));
    }
    Ok(path
        .chunks_exact(block_len)
        .map(|b| *b.iter().max().expect("nonempty block"))
        .collect())
}

/// Block maxima of a freshly simulated path, without storing the path.
pub fn simulate_block_maxima(
    config: &ModelConfig,
    blocks: usize,
    block_len: usize,
    burn_in: u64,
    seed: u64,
    stream: u64,
) -> Result<Vec<u64>> {
    config.validate()?;
    if block_len == 0 {
        return Err(Error::param("block length must be positive"));
    }
    let mut rng = RandomStream::new(seed, stream);
    let mut x = 0u64;
    for _ in 0..burn_in {
        x = step(x, config, &mut rng);
    }
    let mut maxima = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        let mut m = 0;
        for _ in 0..block_len {
            x = step(x, config, &mut rng);
            m = m.max(x);
        }
        maxima.push(m);
    }
    Ok(maxima)
}

/// Fréchet cdf `exp(-θ x^{-α})`, zero for `x <= 0`.
pub fn frechet_cdf(x: f64, theta: f64, alpha: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-theta * x.powf(-alpha)).exp()
    }
}

/// KS distance between `M / a_n` and `exp(-θ x^{-α})`.
pub fn frechet_gof(maxima: &[u64], a_n: f64, theta: f64, alpha: f64) -> Result<f64> {
    if maxima.is_empty() {
        return Err(Error::InsufficientData {
            what: "block maxima",
            got: 0,
            need: 1,
        });
    }
    if !(a_n > 0.0) || !(theta > 0.0 && theta <= 1.0) || !(alpha > 0.0) {
        return Err(Error::domain("frechet fit needs a_n > 0, theta in (0, 1], alpha > 0"));
    }
    let scaled: Vec<f64> = maxima.iter().map(|&m| m as f64 / a_n).collect();
    Ok(ks_one_sample(&scaled, |x| frechet_cdf(x, theta, alpha)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMethod {
    /// Blocks of the given length: clusters are blocks with an exceedance.
    Blocks,
    /// Run declustering: an exceedance closes its cluster when followed by
    /// `param` non-exceedances.
    Runs,
}

fn exceedance_indices(path: &[u64], threshold: f64) -> Vec<usize> {
    path.iter()
        .enumerate()
        .filter(|(_, &x)| x as f64 > threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Blocks or runs estimate of the extremal index, clamped to `[0, 1]`.
pub fn extremal_index_estimate(path: &[u64], threshold: f64, method: IndexMethod, param: usize) -> Result<f64> {
    if param == 0 {
        return Err(Error::param("block length / run gap must be positive"));
    }
    let idx = exceedance_indices(path, threshold);
    if idx.len() < MIN_EXCEEDANCES {
        return Err(Error::InsufficientData {
            what: "threshold exceedances",
            got: idx.len(),
            need: MIN_EXCEEDANCES,
        });
    }
    let clusters = match method {
        IndexMethod::Blocks => {
            let mut blocks: Vec<usize> = idx.iter().map(|i| i / param).collect();
            blocks.dedup();
            blocks.len()
        }
        IndexMethod::Runs => idx.windows(2).filter(|w| w[1] - w[0] > param).count() + 1,
    };
    Ok((clusters as f64 / idx.len() as f64).clamp(0.0, 1.0))
}

/// Groups exceedance times into clusters; consecutive exceedances at most
/// `gap` apart share a cluster.
pub fn decluster(path: &[u64], threshold: f64, gap: usize) -> Result<Vec<Vec<usize>>> {
    if gap == 0 {
        return Err(Error::param("declustering gap must be at least 1"));
    }
    Ok(group_indices(&exceedance_indices(path, threshold), gap))
}

fn group_indices(idx: &[usize], gap: usize) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &i in idx {
        match clusters.last_mut() {
            Some(c) if i - c.last().expect("clusters are nonempty") <= gap => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    clusters
}

/// Corrected geometric cluster-size pmf `(1-μ^α) μ^{α(k-1)}`, `k >= 1`.
pub fn geometric_cluster_pmf(mu: f64, alpha: f64, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let r = mu.powf(alpha);
    (1.0 - r) * r.powi(k as i32 - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterFit {
    /// Classes `1, 2, 3, 4, >=5`.
    pub empirical_pmf: Vec<f64>,
    pub target_pmf: Vec<f64>,
    pub counts: Vec<usize>,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    pub mean_size: f64,
    pub mean_target: f64,
    pub clusters: usize,
}

pub fn cluster_size_fit(clusters: &[Vec<usize>], mu: f64, alpha: f64) -> Result<ClusterFit> {
    if clusters.len() < MIN_CLUSTERS_FIT {
        return Err(Error::InsufficientData {
            what: "clusters",
            got: clusters.len(),
            need: MIN_CLUSTERS_FIT,
        });
    }
    let theta = theoretical_extremal_index(mu, alpha)?;
    let n = clusters.len() as f64;
    let mut counts = vec![0usize; CLUSTER_CLASSES];
    for c in clusters {
        counts[c.len().min(CLUSTER_CLASSES) - 1] += 1;
    }
    let mut target: Vec<f64> = (1..CLUSTER_CLASSES).map(|k| geometric_cluster_pmf(mu, alpha, k)).collect();
    // P(κ >= 5) = μ^{4α}, computed directly rather than as 1 - Σ
    target.push(mu.powf(alpha * (CLUSTER_CLASSES - 1) as f64));
    let chi_square: f64 = counts
        .iter()
        .zip(&target)
        .map(|(&o, &p)| (o as f64 - n * p).powi(2) / (n * p))
        .sum();
    let dof = CLUSTER_CLASSES - 1;
    let mean_size = clusters.iter().map(Vec::len).sum::<usize>() as f64 / n;
    Ok(ClusterFit {
        empirical_pmf: counts.iter().map(|&c| c as f64 / n).collect(),
        target_pmf: target,
        counts,
        chi_square,
        dof,
        p_value: chi_square_sf(chi_square, dof as f64),
        mean_size,
        mean_target: 1.0 / theta,
        clusters: clusters.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub lag: usize,
    pub median_ratio: f64,
    pub target: f64,
    pub events: usize,
}

/// Lag-wise medians of `X_{s+t}/X_s` over times with `X_s` above the
/// empirical `quantile`, against `μ^t`.
pub fn tail_process_profile(path: &[u64], quantile: f64, max_lag: usize, mu: f64) -> Result<Vec<ProfilePoint>> {
    if !(0.99..1.0).contains(&quantile) {
        return Err(Error::param(format!("profile quantile must lie in [0.99, 1), got {quantile}")));
    }
    if path.len() <= max_lag {
        return Err(Error::param("path shorter than the maximal lag"));
    }
    let mut sorted = path.to_vec();
    sorted.sort_unstable();
    let threshold = quantile_sorted(&sorted, quantile);
    let events: Vec<usize> = (0..path.len() - max_lag).filter(|&s| path[s] > threshold).collect();
    if events.len() < MIN_PROFILE_EVENTS {
        return Err(Error::InsufficientData {
            what: "conditioning events for the tail process",
            got: events.len(),
            need: MIN_PROFILE_EVENTS,
        });
    }
    Ok((0..=max_lag)
        .map(|t| {
            let mut ratios: Vec<f64> = events.iter().map(|&s| path[s + t] as f64 / path[s] as f64).collect();
            ratios.sort_by(f64::total_cmp);
            let m = ratios.len();
            let median = if m % 2 == 1 {
                ratios[m / 2]
            } else {
                0.5 * (ratios[m / 2 - 1] + ratios[m / 2])
            };
            ProfilePoint {
                lag: t,
                median_ratio: median,
                target: mu.powi(t as i32),
                events: events.len(),
            }
        })
        .collect())
}

/// KS distance between the scaled gaps between cluster starts,
/// `θ u^{-α} (s_{i+1} - s_i)/n`, and the unit exponential law.
pub fn intercluster_exponential_check(clusters: &[Vec<usize>], n: u64, theta: f64, u: f64, alpha: f64) -> Result<f64> {
    if clusters.len() < MIN_INTERCLUSTER {
        return Err(Error::InsufficientData {
            what: "clusters for inter-cluster times",
            got: clusters.len(),
            need: MIN_INTERCLUSTER,
        });
    }
    let rate = theta * u.powf(-alpha) / n as f64;
    let gaps: Vec<f64> = clusters.windows(2).map(|w| (w[1][0] - w[0][0]) as f64 * rate).collect();
    Ok(ks_one_sample(&gaps, |x| if x <= 0.0 { 0.0 } else { 1.0 - (-x).exp() }))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnticlusterPoint {
    pub m: usize,
    pub probability: f64,
    pub events: usize,
}

/// `P(max_{m <= |t| <= r_n} X_t > level | X_0 > level)` for each `m`.
pub fn anticlustering_profile(path: &[u64], level: f64, m_values: &[usize], r_n: usize) -> Result<Vec<AnticlusterPoint>> {
    if r_n == 0 || path.len() <= 2 * r_n {
        return Err(Error::param("r_n must be positive and below half the path length"));
    }
    // farthest lag |t| <= r_n with an exceedance, per conditioning event
    let far: Vec<usize> = (r_n..path.len() - r_n)
        .filter(|&s| path[s] as f64 > level)
        .map(|s| {
            (1..=r_n)
                .rev()
                .find(|&t| path[s + t] as f64 > level || path[s - t] as f64 > level)
                .unwrap_or(0)
        })
        .collect();
    if far.len() < MIN_EXCEEDANCES {
        return Err(Error::InsufficientData {
            what: "exceedances for the anticlustering profile",
            got: far.len(),
            need: MIN_EXCEEDANCES,
        });
    }
    Ok(m_values
        .iter()
        .map(|&m| AnticlusterPoint {
            m,
            probability: far.iter().filter(|&&f| f >= m && m <= r_n).count() as f64 / far.len() as f64,
            events: far.len(),
        })
        .collect())
}

/// Settings of an extremes analysis on one stationary path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremesParams {
    /// Exceedance threshold as an empirical quantile.
    pub quantile: f64,
    pub block_len: usize,
    pub run_gap: usize,
    pub max_lag: usize,
    /// Block size `n` for maxima, the norming sequence and the point-process checks.
    pub norming_n: u64,
    pub anticluster_m: Vec<usize>,
}

impl ExtremesParams {
    /// Defaults for a path of the given length: quantile 0.999, run gap
    /// `⌈ln len⌉`, blocks of 100, lags 0..=4, `n = 10^4`, `r_n = ⌊n^{0.4}⌋`.
    pub fn defaults_for(len: usize) -> Self {
        Self {
            quantile: 0.999,
            block_len: 100,
            run_gap: (len as f64).ln().ceil() as usize,
            max_lag: 4,
            norming_n: 10_000,
            anticluster_m: vec![1, 2, 5, 10, 20],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremesReport {
    pub mu: f64,
    pub alpha: f64,
    pub theta_theory: f64,
    pub threshold: u64,
    pub theta_blocks: f64,
    pub theta_runs: f64,
    pub a_n: f64,
    pub frechet_ks: Option<f64>,
    pub frechet_blocks: usize,
    pub cluster_fit: ClusterFit,
    pub tail_profile: Vec<ProfilePoint>,
    pub intercluster_ks: Option<f64>,
    pub anticlustering: Vec<AnticlusterPoint>,
    pub params: ExtremesParams,
}

/// Full extremes analysis of a stationary path with known `μ`, `α` and
/// stationary tail scale `C` (so `a_n = (C n)^{1/α}`).
pub fn extremes_report(path: &[u64], mu: f64, alpha: f64, tail_scale: f64, params: &ExtremesParams) -> Result<ExtremesReport> {
    let theta_theory = theoretical_extremal_index(mu, alpha)?;
    let mut sorted = path.to_vec();
    sorted.sort_unstable();
    let threshold = quantile_sorted(&sorted, params.quantile);
    drop(sorted);
    let u = threshold as f64;
    let theta_blocks = extremal_index_estimate(path, u, IndexMethod::Blocks, params.block_len)?;
    let theta_runs = extremal_index_estimate(path, u, IndexMethod::Runs, params.run_gap)?;
    let clusters = decluster(path, u, params.run_gap)?;
    let cluster_fit = cluster_size_fit(&clusters, mu, alpha)?;
    let tail_profile = tail_process_profile(path, params.quantile, params.max_lag, mu)?;

    let n = params.norming_n;
    let a_n = crate::tail::norming_sequence(n, alpha, tail_scale)?;
    let (frechet_ks, frechet_blocks) = match block_maxima(path, n as usize) {
        Ok(maxima) if maxima.len() >= MIN_EXCEEDANCES => (Some(frechet_gof(&maxima, a_n, theta_theory, alpha)?), maxima.len()),
        _ => (None, 0),
    };
    let level_clusters = decluster(path, a_n, params.run_gap)?;
    let intercluster_ks = intercluster_exponential_check(&level_clusters, n, theta_theory, 1.0, alpha).ok();
    let r_n = (n as f64).powf(0.4).floor() as usize;
    let anticlustering = anticlustering_profile(path, a_n, &params.anticluster_m, r_n).unwrap_or_default();
    Ok(ExtremesReport {
        mu,
        alpha,
        theta_theory,
        threshold,
        theta_blocks,
        theta_runs,
        a_n,
        frechet_ks,
        frechet_blocks,
        cluster_fit,
        tail_profile,
        intercluster_ks,
        anticlustering,
        params: params.clone(),
    })
}

impl ExtremesReport {
    /// Long format: `section,key,estimate,target`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["section", "key", "estimate", "target"])?;
        let mut row = |s: &str, k: String, e: String, t: String| w.write_record([s, &k, &e, &t]);
        row("extremal_index", "blocks".into(), self.theta_blocks.to_string(), self.theta_theory.to_string())?;
        row("extremal_index", "runs".into(), self.theta_runs.to_string(), self.theta_theory.to_string())?;
        let fit = &self.cluster_fit;
        for k in 0..fit.counts.len() {
            row("cluster_size", (k + 1).to_string(), fit.empirical_pmf[k].to_string(), fit.target_pmf[k].to_string())?;
        }
        row("cluster_size", "mean".into(), fit.mean_size.to_string(), fit.mean_target.to_string())?;
        for p in &self.tail_profile {
            row("tail_profile", p.lag.to_string(), p.median_ratio.to_string(), p.target.to_string())?;
        }
        for p in &self.anticlustering {
            row("anticlustering", p.m.to_string(), p.probability.to_string(), String::new())?;
        }
        if let Some(ks) = self.frechet_ks {
            row("frechet", "ks".into(), ks.to_string(), String::new())?;
        }
        if let Some(ks) = self.intercluster_ks {
            row("intercluster", "ks".into(), ks.to_string(), String::new())?;
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
