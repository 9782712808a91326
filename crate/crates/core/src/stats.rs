//! Small statistical toolkit: empirical quantiles, Kolmogorov-Smirnov
//! statistics, and a symmetric stable sampler.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::rng::RandomStream;

/// Sample mean and unbiased sample variance.
pub fn mean_var(data: &[f64]) -> (f64, f64) {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let ss: f64 = data.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, if data.len() > 1 { ss / (n - 1.0) } else { 0.0 })
}

/// Lower empirical quantile of sorted data: the `⌈qn⌉`-th order statistic.
pub fn quantile_sorted<T: Copy>(sorted: &[T], q: f64) -> T {
    let n = sorted.len();
    let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}

/// Empirical quantile of unsorted integer data.
pub fn empirical_quantile(data: &[u64], q: f64) -> u64 {
    let mut v = data.to_vec();
    let n = v.len();
    let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    *v.select_nth_unstable(idx).1
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Survival function of the chi-square law.
pub fn chi_square_sf(x: f64, dof: f64) -> f64 {
    let chi = ChiSquared::new(dof).expect("positive degrees of freedom");
    1.0 - chi.cdf(x)
}

/// One-sample KS distance between the data and a continuous cdf.
pub fn ks_one_sample(data: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        // step over ties so the empirical cdf jumps once per distinct value
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]);
        d = d.max((f - i as f64 / n).abs()).max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    d
}

/// Two-sample KS distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic Kolmogorov critical value `c(level)` with `P(√n D > c) = level`.
pub fn ks_critical(level: f64) -> f64 {
    (-0.5 * (level / 2.0).ln()).sqrt()
}

/// One-sample rejection band `c(level)/√n`.
pub fn ks_band(level: f64, n: usize) -> f64 {
    ks_critical(level) / (n as f64).sqrt()
}

/// Two-sample rejection band `c(level)·√((n+m)/(nm))`.
pub fn ks_band_two_sample(level: f64, n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_critical(level) * ((n + m) / (n * m)).sqrt()
}

/// Kolmogorov survival `Q(λ) = 2 Σ (-1)^{j-1} e^{-2j²λ²}` with the
/// small-sample correction `λ = (√n + 0.12 + 0.11/√n) d`.
pub fn ks_pvalue(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..200 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Symmetric α-stable draw (unit scale) by the Chambers-Mallows-Stuck method.
pub fn sample_symmetric_stable(alpha: f64, rng: &mut RandomStream) -> f64 {
    let v = std::f64::consts::PI * (rng.uniform_open0() - 0.5);
    let w = -rng.uniform_open0().ln();
    if (alpha - 1.0).abs() < 1e-12 {
        return v.tan();
    }
    let v = v.clamp(-FRAC_PI_2 + 1e-15, FRAC_PI_2 - 1e-15);
    (alpha * v).sin() / v.cos().powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}
