//! Partial sums `S_n = X_1 + ... + X_n` of the stationary chain.
//!
//! Three regimes, by the index `α` of the driving tail (`B` for model I,
//! `A` for model II, `∞` for light models):
//!
//! | regime       | center          | scale   |
//! |--------------|-----------------|---------|
//! | gaussian     | `n E(B)/(1-μ)`  | `√n`    |
//! | `α ∈ (0,1)`  | `0`             | `a_n`   |
//! | `α ∈ (1,2)`  | `n E(X)`        | `a_n`   |
//!
//! `α = 1` and `α = 2` are boundary cases without a limit statement and are refused.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{simulate_path, ModelConfig, Regime, DEFAULT_BURN_IN};
use crate::stats::{ks_band_two_sample, ks_one_sample, ks_pvalue, ks_two_sample, mean_var, normal_cdf};
use crate::tail::{hill_continuous, norming_sequence, stationary_tail_scale, HillEstimate};

pub const MIN_REPLICATES: usize = 100;
pub const MIN_STABLE_REPLICATES: usize = 500;
/// Replicates whose long-run variance is averaged into `σ̂²`.
pub const LRV_REPLICATES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumsRegime {
    Gaussian,
    /// `α ∈ (0, 1)`
    StableLow,
    /// `α ∈ (1, 2)`
    StableMid,
}

/// Index of the tail that drives the partial sums; infinite for light models.
pub fn driving_alpha(config: &ModelConfig) -> f64 {
    match config.regime {
        Regime::ModelI => config.immigration.tail_index().unwrap_or(f64::INFINITY),
        Regime::ModelII => config.offspring.tail_index().unwrap_or(f64::INFINITY),
        Regime::Light => f64::INFINITY,
    }
}

pub fn classify(alpha: f64) -> Result<SumsRegime> {
    if alpha == 1.0 || alpha == 2.0 {
        return Err(Error::Regime(format!("no partial-sum limit is asserted at alpha = {alpha}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
    }
    Ok(if alpha > 2.0 {
        SumsRegime::Gaussian
    } else if alpha < 1.0 {
        SumsRegime::StableLow
    } else {
        SumsRegime::StableMid
    })
}

/// `(center, scale)` for `(S_n - center)/scale`.
pub fn regime_centering(config: &ModelConfig, alpha: f64, n: u64, a_n: f64) -> Result<(f64, f64)> {
    let nf = n as f64;
    let mean_x = || {
        let eb = config.immigration.mean();
        if eb.is_finite() {
            Ok(eb / (1.0 - config.mu()))
        } else {
            Err(Error::InfiniteMoment("E(B)".into()))
        }
    };
    match classify(alpha)? {
        SumsRegime::Gaussian => Ok((nf * mean_x()?, nf.sqrt())),
        SumsRegime::StableLow => Ok((0.0, a_n)),
        SumsRegime::StableMid => Ok((nf * mean_x()?, a_n)),
    }
}

/// Sample autocovariance `γ̂(0..=max_lag)` of the centered series.
pub fn autocovariances(path: &[u64], max_lag: usize) -> Vec<f64> {
    let n = path.len();
    let mean = path.iter().map(|&x| x as f64).sum::<f64>() / n as f64;
    let centered: Vec<f64> = path.iter().map(|&x| x as f64 - mean).collect();
    (0..=max_lag.min(n.saturating_sub(1)))
        .map(|i| centered[..n - i].iter().zip(&centered[i..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect()
}

/// Default truncation lag `⌈10 log10(len)⌉`.
pub fn default_max_lag(len: usize) -> usize {
    (10.0 * (len as f64).log10()).ceil() as usize
}

/// `σ̂² = γ̂(0) + 2 Σ_{i=1}^{max_lag} γ̂(i)`.
pub fn long_run_variance(path: &[u64], max_lag: Option<usize>) -> Result<f64> {
    if path.len() < 2 {
        return Err(Error::InsufficientData {
            what: "path length for the long-run variance",
            got: path.len(),
            need: 2,
        });
    }
    let lag = max_lag.unwrap_or_else(|| default_max_lag(path.len()));
    let g = autocovariances(path, lag);
    let s = g[0] + 2.0 * g[1..].iter().sum::<f64>();
    if s < 0.0 {
        return Err(Error::Degenerate(format!(
            "negative long-run variance estimate {s}; use a longer path"
        )));
    }
    Ok(s)
}

/// Batch-means estimate: `b · Var(batch means)` for batches of length `b`.
pub fn batch_means_variance(path: &[u64], batches: usize) -> Result<f64> {
    if batches < 2 || path.len() < 2 * batches {
        return Err(Error::InsufficientData {
            what: "batches",
            got: batches.min(path.len() / 2),
            need: 2,
        });
    }
    let b = path.len() / batches;
    let means: Vec<f64> = path
        .chunks_exact(b)
        .map(|c| c.iter().map(|&x| x as f64).sum::<f64>() / b as f64)
        .collect();
    Ok(b as f64 * mean_var(&means).1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumsDiagnostics {
    pub hill: Option<HillEstimate>,
    /// Hill index above 2: the sums do not look stable.
    pub non_stable_flag: bool,
    pub normality_ks: Option<f64>,
    pub normality_pvalue: Option<f64>,
    pub self_similarity_ks: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumsReport {
    pub regime: SumsRegime,
    pub alpha: f64,
    pub n: u64,
    pub reps: usize,
    pub seed: u64,
    pub normalized_sums: Vec<f64>,
    pub center_used: f64,
    pub scale_used: f64,
    /// Long-run variance estimate (gaussian regime).
    pub sigma2_hat: Option<f64>,
    pub diagnostics: SumsDiagnostics,
}

/// Replicate `r` is an independent stationary stretch on stream
/// `first_stream + r`, started at 0 and burned in for `burn_in` steps.
pub fn partial_sum_replicates_at(
    config: &ModelConfig,
    n: u64,
    reps: usize,
    master_seed: u64,
    first_stream: u64,
    burn_in: u64,
) -> Result<SumsReport> {
    config.validate()?;
    if reps < MIN_REPLICATES {
        return Err(Error::InsufficientData {
            what: "partial-sum replicates",
            got: reps,
            need: MIN_REPLICATES,
        });
    }
    if n == 0 {
        return Err(Error::param("n must be positive"));
    }
    let alpha = driving_alpha(config);
    let regime = classify(alpha)?;
    let a_n = match regime {
        SumsRegime::Gaussian => f64::NAN,
        _ => {
            let (c, _) = stationary_tail_scale(config)?;
            norming_sequence(n, alpha, c)?
        }
    };
    let (center, scale) = regime_centering(config, alpha, n, a_n)?;

    let results: Vec<(f64, Option<f64>)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let path = simulate_path(config, n as usize, burn_in, master_seed, first_stream + r as u64)?;
            let total: u128 = path.values.iter().map(|&x| x as u128).sum();
            let lrv = if regime == SumsRegime::Gaussian && r < LRV_REPLICATES {
                Some(long_run_variance(&path.values, None)?)
            } else {
                None
            };
            Ok(((total as f64 - center) / scale, lrv))
        })
        .collect::<Result<_>>()?;
    let normalized_sums: Vec<f64> = results.iter().map(|r| r.0).collect();

    let mut diagnostics = SumsDiagnostics {
        hill: None,
        non_stable_flag: false,
        normality_ks: None,
        normality_pvalue: None,
        self_similarity_ks: None,
    };
    let mut sigma2_hat = None;
    if regime == SumsRegime::Gaussian {
        let lrvs: Vec<f64> = results.iter().filter_map(|r| r.1).collect();
        let s2 = lrvs.iter().sum::<f64>() / lrvs.len() as f64;
        let sd = s2.sqrt();
        let ks = ks_one_sample(&normalized_sums, |x| normal_cdf(x / sd));
        diagnostics.normality_ks = Some(ks);
        diagnostics.normality_pvalue = Some(ks_pvalue(ks, reps as f64));
        sigma2_hat = Some(s2);
    } else {
        let hill = hill_of_abs(&normalized_sums)?;
        diagnostics.non_stable_flag = hill.alpha_hat > 2.0;
        diagnostics.hill = Some(hill);
    }
    Ok(SumsReport {
        regime,
        alpha,
        n,
        reps,
        seed: master_seed,
        normalized_sums,
        center_used: center,
        scale_used: scale,
        sigma2_hat,
        diagnostics,
    })
}

/// [`partial_sum_replicates_at`] on streams `0..reps` with the default burn-in.
pub fn partial_sum_replicates(config: &ModelConfig, n: u64, reps: usize, master_seed: u64) -> Result<SumsReport> {
    partial_sum_replicates_at(config, n, reps, master_seed, 0, DEFAULT_BURN_IN)
}

/// Order used for the Hill index of normalized sums: the top 2% of the
/// sample, at least 10. Larger fractions pick up the second-order bias of
/// the stable law (for `α = 1.5` the top 10% gives about 1.9).
pub fn sums_hill_order(reps: usize) -> usize {
    (reps / 50).max(10)
}

fn hill_of_abs(sums: &[f64]) -> Result<HillEstimate> {
    let abs: Vec<f64> = sums.iter().map(|x| x.abs()).collect();
    hill_continuous(&abs, sums_hill_order(sums.len()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableDiagnostics {
    pub hill: HillEstimate,
    pub non_stable_flag: bool,
    pub self_similarity_ks: f64,
    pub band_95: f64,
    pub band_99: f64,
}

/// Hill index of `|sums_n|` and the two-sample KS distance between sums
/// normalized at `n` and at `2n`.
pub fn stable_diagnostics(sums_n: &[f64], sums_2n: &[f64]) -> Result<StableDiagnostics> {
    let got = sums_n.len().min(sums_2n.len());
    if got < MIN_STABLE_REPLICATES {
        return Err(Error::InsufficientData {
            what: "replicates per length for stable diagnostics",
            got,
            need: MIN_STABLE_REPLICATES,
        });
    }
    let hill = hill_of_abs(sums_n)?;
    Ok(StableDiagnostics {
        non_stable_flag: hill.alpha_hat > 2.0,
        hill,
        self_similarity_ks: ks_two_sample(sums_n, sums_2n),
        band_95: ks_band_two_sample(0.05, sums_n.len(), sums_2n.len()),
        band_99: ks_band_two_sample(0.01, sums_n.len(), sums_2n.len()),
    })
}

impl SumsReport {
    /// One row per replicate: `replicate,normalized_sum`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replicate", "normalized_sum"])?;
        for (i, s) in self.normalized_sums.iter().enumerate() {
            w.write_record([i.to_string(), s.to_string()])?;
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistributionSpec as D;
    use crate::process::Variant;
    use crate::rng::RandomStream;
    use crate::stats::sample_symmetric_stable;

    fn cfg(a: D, b: D, regime: Regime) -> ModelConfig {
        ModelConfig::new(a, b, Variant::Sum, regime)
    }

    #[test]
    fn centering_examples() {
        let m1 = cfg(D::Bernoulli { p: 0.5 }, D::DiscretePareto { alpha: 0.8, scale: 1.0 }, Regime::ModelI);
        assert_eq!(regime_centering(&m1, 0.8, 100, 7.0).unwrap(), (0.0, 7.0));
        let light = cfg(D::Bernoulli { p: 0.5 }, D::Dirac { value: 1 }, Regime::Light);
        let (c, s) = regime_centering(&light, f64::INFINITY, 100, f64::NAN).unwrap();
        assert!((c - 200.0).abs() < 1e-12 && (s - 10.0).abs() < 1e-12);
        assert!(matches!(regime_centering(&m1, 1.0, 100, 1.0), Err(Error::Regime(_))));
        assert!(matches!(regime_centering(&m1, 2.0, 100, 1.0), Err(Error::Regime(_))));
    }

    #[test]
    fn centering_mid_uses_stationary_mean() {
        let m2 = cfg(
            D::ZeroInflatedPareto { inflation: 0.3, alpha: 1.5, scale: 1.0 },
            D::Poisson { lambda: 0.5 },
            Regime::ModelII,
        );
        let mu = m2.mu();
        let (c, _) = regime_centering(&m2, 1.5, 1000, 1.0).unwrap();
        assert!((c - 1000.0 * 0.5 / (1.0 - mu)).abs() < 1e-9);
    }

    #[test]
    fn lrv_examples() {
        assert_eq!(long_run_variance(&[3; 1000], None).unwrap(), 0.0);
        let iid = cfg(D::Dirac { value: 0 }, D::Poisson { lambda: 1.0 }, Regime::Light);
        let p = simulate_path(&iid, 1_000_000, 0, 1, 0).unwrap();
        let s = long_run_variance(&p.values, None).unwrap();
        assert!((s - 1.0).abs() < 0.1, "{s}");
    }

    #[test]
    fn lrv_matches_batch_means() {
        let c = cfg(D::Bernoulli { p: 0.5 }, D::Poisson { lambda: 1.0 }, Regime::Light);
        let p = simulate_path(&c, 1_000_000, 1000, 2, 0).unwrap();
        let s = long_run_variance(&p.values, None).unwrap();
        let b = batch_means_variance(&p.values, 200).unwrap();
        assert!((s / b - 1.0).abs() < 0.1, "{s} vs {b}");
        // exact: Var X (1+μ)/(1-μ) = 2 · 3
        assert!((s - 6.0).abs() < 0.3, "{s}");
    }

    #[test]
    fn iid_clt() {
        let c = cfg(D::Dirac { value: 0 }, D::Poisson { lambda: 1.0 }, Regime::Light);
        let r = partial_sum_replicates(&c, 1000, 500, 4).unwrap();
        assert_eq!(r.regime, SumsRegime::Gaussian);
        assert!(r.diagnostics.normality_pvalue.unwrap() > 0.05, "{:?}", r.diagnostics);
    }

    #[test]
    fn replicate_guards() {
        let c = cfg(D::Dirac { value: 0 }, D::Poisson { lambda: 1.0 }, Regime::Light);
        assert!(partial_sum_replicates(&c, 100, 10, 1).is_err());
    }

    #[test]
    fn self_similarity_on_exact_stable() {
        let mut rng = RandomStream::new(40, 0);
        let a: Vec<f64> = (0..5000).map(|_| sample_symmetric_stable(0.8, &mut rng)).collect();
        let b: Vec<f64> = (0..5000).map(|_| sample_symmetric_stable(0.8, &mut rng)).collect();
        let d = stable_diagnostics(&a, &b).unwrap();
        assert!(d.self_similarity_ks < d.band_95, "{d:?}");
        assert!((d.hill.alpha_hat - 0.8).abs() < 0.2, "{d:?}");
        assert!(stable_diagnostics(&a[..100], &b[..100]).is_err());
    }

    #[test]
    fn gaussian_input_is_flagged() {
        let mut rng = RandomStream::new(41, 0);
        let g: Vec<f64> = (0..1000).map(|_| sample_symmetric_stable(2.0, &mut rng)).collect();
        let d = stable_diagnostics(&g, &g).unwrap();
        assert!(d.non_stable_flag && d.hill.alpha_hat > 2.0, "{d:?}");
    }
}
