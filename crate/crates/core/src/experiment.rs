//! JSON experiment configuration and the experiment runners behind the CLI.
//!
//! Every run is a pure function of the configuration and the seed. Outputs
//! go to `<out>/<experiment>.csv` and `<out>/<experiment>.summary.json`;
//! neither file carries a timestamp, so reruns are byte-identical.
//!
//! ```json
//! {
//!   "model": {
//!     "offspring": {"family": "bernoulli", "p": 0.5},
//!     "immigration": {"family": "discrete_pareto", "alpha": 0.8, "scale": 1.0},
//!     "variant": "sum",
//!     "regime": "model_i"
//!   },
//!   "experiment": "tails",
//!   "sizes": {"n": 1000000, "quantiles": [0.99, 0.999]},
//!   "seed": 42,
//!   "output_dir": "out"
//! }
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::extremes::{extremes_report, ExtremesParams};
use crate::oracle::{stationary_moments, stationary_pgf, stationary_pmf_bruteforce};
use crate::process::{simulate_path, Depth, ModelConfig, StationarySampler, DEFAULT_BURN_IN};
use crate::stats::mean_var;
use crate::sums::{partial_sum_replicates_at, stable_diagnostics, SumsRegime};
use crate::tail::{compound_tail_check, stationary_tail_scale, tail_report, DEFAULT_PROBE_QUANTILES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    Oracle,
    Tails,
    Extremes,
    Sums,
    Compound,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Simulate,
        ExperimentKind::Oracle,
        ExperimentKind::Tails,
        ExperimentKind::Extremes,
        ExperimentKind::Sums,
        ExperimentKind::Compound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Oracle => "oracle",
            ExperimentKind::Tails => "tails",
            ExperimentKind::Extremes => "extremes",
            ExperimentKind::Sums => "sums",
            ExperimentKind::Compound => "compound",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// Size knobs; every field is optional and falls back to a per-experiment default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sizes {
    /// Path length, sample count or partial-sum length, by experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_gap: Option<usize>,
    /// Probe or threshold levels, each in `(0, 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantiles: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_lag: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norming_n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub sizes: Sizes,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check_sizes()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Canonical pretty-printed form; parsing it yields `self` again.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn check_sizes(&self) -> Result<()> {
        if let Some(q) = &self.sizes.quantiles {
            if q.is_empty() {
                return Err(Error::Config("sizes.quantiles must not be empty".into()));
            }
            if let Some(bad) = q.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
                return Err(Error::Config(format!("sizes.quantiles: {bad} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

/// What a finished run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub kind: ExperimentKind,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
    /// One-line human digest.
    pub digest: String,
}

fn write_outputs(out_dir: &Path, kind: ExperimentKind, csv: Vec<u8>, summary: &serde_json::Value) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{kind}.csv"));
    let summary_path = out_dir.join(format!("{kind}.summary.json"));
    std::fs::write(&csv_path, csv)?;
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    std::fs::write(&summary_path, text)?;
    Ok((csv_path, summary_path))
}

fn quantiles_or(sizes: &Sizes, default: &[f64]) -> Vec<f64> {
    sizes.quantiles.clone().unwrap_or_else(|| default.to_vec())
}

/// Runs one experiment and writes its CSV and JSON summary into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, kind: ExperimentKind, out_dir: &Path) -> Result<RunOutcome> {
    let report = cfg.model.validate()?;
    let s = &cfg.sizes;
    let burn_in = s.burn_in.unwrap_or(DEFAULT_BURN_IN);
    let (csv, summary, digest) = match kind {
        ExperimentKind::Simulate => {
            let n = s.n.unwrap_or(10_000) as usize;
            let path = simulate_path(&cfg.model, n, burn_in, cfg.seed, 0)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["t", "x"])?;
            for (t, x) in path.values.iter().enumerate() {
                w.write_record([t.to_string(), x.to_string()])?;
            }
            let data: Vec<f64> = path.values.iter().map(|&x| x as f64).collect();
            let (mean, var) = mean_var(&data);
            let max = path.values.iter().max().copied().unwrap_or(0);
            let summary = json!({
                "experiment": kind, "seed": cfg.seed, "length": n, "burn_in": burn_in,
                "mean": mean, "variance": var, "max": max, "ergodicity": report,
            });
            (w.into_inner().map_err(|e| Error::Io(e.into_error()))?, summary, format!("length={n} mean={mean:.6} max={max}"))
        }
        ExperimentKind::Oracle => {
            let cap = s.state_cap.unwrap_or(256);
            let tol = s.tol.unwrap_or(1e-9);
            let oracle = stationary_pmf_bruteforce(&cfg.model, cap, tol)?;
            let moments = stationary_moments(&cfg.model).ok();
            let grid = [0.0, 0.25, 0.5, 0.75];
            let mut pgf_rows = Vec::new();
            for &x in &grid {
                let product = stationary_pgf(&cfg.model, x, oracle.pgf_depth).ok();
                pgf_rows.push(json!({"s": x, "pmf_pgf": oracle.pgf(x), "product_pgf": product}));
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["n", "pmf"])?;
            for (n, p) in oracle.pmf.iter().enumerate() {
                w.write_record([n.to_string(), p.to_string()])?;
            }
            let summary = json!({
                "experiment": kind, "seed": cfg.seed, "oracle": oracle, "pmf_mean": oracle.mean(),
                "pmf_variance": oracle.variance(), "closed_form_moments": moments, "pgf": pgf_rows,
                "kernel_residual": oracle.kernel_residual(),
            });
            let digest = format!("cap={cap} mass_deficit={:.3e} mean={:.6}", oracle.mass_deficit, oracle.mean());
            (w.into_inner().map_err(|e| Error::Io(e.into_error()))?, summary, digest)
        }
        ExperimentKind::Tails => {
            let n = s.n.unwrap_or(1_000_000) as usize;
            let levels = quantiles_or(s, &DEFAULT_PROBE_QUANTILES);
            let k = s.k_order.unwrap_or((n / 100).clamp(10, 1000));
            let xs = StationarySampler::new(&cfg.model, Depth::Auto)?.sample_many(n, cfg.seed, 0);
            let report = tail_report(&cfg.model, &xs, k, &levels)?;
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            let mid = &report.ratio_curve[report.ratio_curve.len() / 2];
            let digest = format!(
                "constant={:.6} ratio@x={}={:.4} alpha_hat={:.3}",
                report.constant_theory, mid.x, mid.ratio, report.alpha_hat.alpha_hat
            );
            (buf, serde_json::to_value(&report)?, digest)
        }
        ExperimentKind::Extremes => {
            let n = s.n.unwrap_or(1_000_000) as usize;
            let path = simulate_path(&cfg.model, n, burn_in, cfg.seed, 0)?;
            let (tail_scale, alpha) = stationary_tail_scale(&cfg.model)?;
            let mut params = ExtremesParams::defaults_for(n);
            if let Some(q) = s.quantiles.as_ref().and_then(|q| q.first()) {
                params.quantile = *q;
            }
            params.block_len = s.block_len.unwrap_or(params.block_len);
            params.run_gap = s.run_gap.unwrap_or(params.run_gap);
            params.max_lag = s.max_lag.unwrap_or(params.max_lag);
            params.norming_n = s.norming_n.unwrap_or(params.norming_n);
            let report = extremes_report(&path.values, cfg.model.mu(), alpha, tail_scale, &params)?;
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            let digest = format!(
                "theta={:.4} blocks={:.4} runs={:.4} mean_cluster={:.3}",
                report.theta_theory, report.theta_blocks, report.theta_runs, report.cluster_fit.mean_size
            );
            (buf, serde_json::to_value(&report)?, digest)
        }
        ExperimentKind::Sums => {
            let n = s.n.unwrap_or(10_000);
            let reps = s.reps.unwrap_or(1000);
            let first = partial_sum_replicates_at(&cfg.model, n, reps, cfg.seed, 0, burn_in)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["length", "replicate", "normalized_sum"])?;
            for (i, v) in first.normalized_sums.iter().enumerate() {
                w.write_record([n.to_string(), i.to_string(), v.to_string()])?;
            }
            let mut summary = json!({"experiment": kind, "seed": cfg.seed, "report": first});
            let digest;
            if first.regime == SumsRegime::Gaussian {
                digest = format!(
                    "gaussian sigma2_hat={:.4} normality_ks={:.4}",
                    first.sigma2_hat.unwrap_or(f64::NAN),
                    first.diagnostics.normality_ks.unwrap_or(f64::NAN)
                );
            } else {
                // doubled length on disjoint streams
                let second = partial_sum_replicates_at(&cfg.model, 2 * n, reps, cfg.seed, reps as u64, burn_in)?;
                for (i, v) in second.normalized_sums.iter().enumerate() {
                    w.write_record([(2 * n).to_string(), i.to_string(), v.to_string()])?;
                }
                let diag = stable_diagnostics(&first.normalized_sums, &second.normalized_sums)?;
                digest = format!(
                    "{:?} hill={:.3} self_similarity_ks={:.4} band99={:.4}",
                    first.regime, diag.hill.alpha_hat, diag.self_similarity_ks, diag.band_99
                );
                summary["report_2n"] = serde_json::to_value(&second)?;
                summary["stable"] = serde_json::to_value(&diag)?;
            }
            (w.into_inner().map_err(|e| Error::Io(e.into_error()))?, summary, digest)
        }
        ExperimentKind::Compound => {
            let reps = s.reps.unwrap_or(1_000_000);
            let levels = quantiles_or(s, &DEFAULT_PROBE_QUANTILES);
            let curve = compound_tail_check(&cfg.model.offspring, &cfg.model.immigration, &levels, reps, cfg.seed)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["level", "x", "exceedances", "empirical_tail", "reference_tail", "ratio", "std_error", "reliable"])?;
            for (q, p) in levels.iter().zip(&curve) {
                w.write_record([
                    q.to_string(),
                    p.x.to_string(),
                    p.exceedances.to_string(),
                    p.empirical_tail.to_string(),
                    p.reference_tail.to_string(),
                    p.ratio.to_string(),
                    p.std_error.to_string(),
                    p.reliable.to_string(),
                ])?;
            }
            let digest = curve
                .iter()
                .map(|p| format!("ratio@{}={:.4}", p.x, p.ratio))
                .collect::<Vec<_>>()
                .join(" ");
            let summary = json!({"experiment": kind, "seed": cfg.seed, "reps": reps, "levels": levels, "curve": curve});
            (w.into_inner().map_err(|e| Error::Io(e.into_error()))?, summary, digest)
        }
    };
    let (csv_path, summary_path) = write_outputs(out_dir, kind, csv, &summary)?;
    Ok(RunOutcome {
        kind,
        csv_path,
        summary_path,
        digest: format!("{kind}: {digest}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": {
            "offspring": {"family": "dirac", "value": 0},
            "immigration": {"family": "dirac", "value": 1},
            "regime": "light"
        },
        "seed": 3
    }"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.sizes, Sizes::default());
    }

    #[test]
    fn rejects_unknown_keys_and_missing_seed() {
        let typo = MINIMAL.replace("\"seed\"", "\"sed\"");
        let err = ExperimentConfig::from_json(&typo).unwrap_err().to_string();
        assert!(err.contains("sed") || err.contains("seed"), "{err}");
        let no_seed = r#"{"model": {"offspring": {"family": "dirac", "value": 0},
            "immigration": {"family": "dirac", "value": 1}, "regime": "light"}}"#;
        assert!(ExperimentConfig::from_json(no_seed).unwrap_err().to_string().contains("seed"));
        let bad_q = MINIMAL.replace("\"seed\": 3", "\"seed\": 3, \"sizes\": {\"quantiles\": [1.5]}");
        assert!(matches!(ExperimentConfig::from_json(&bad_q), Err(Error::Config(_))));
    }

    #[test]
    fn canonical_round_trip() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        let canon = cfg.to_canonical_json();
        let again = ExperimentConfig::from_json(&canon).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(canon, again.to_canonical_json());
    }

    #[test]
    fn experiment_names() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
        assert!("plot".parse::<ExperimentKind>().is_err());
    }
}
