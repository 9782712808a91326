//! Nonnegative-integer distribution families for offspring and immigration.
//!
//! Every family supports seeded sampling and exact analytic queries: tail
//! probabilities, pmf, probability generating function and raw moments.
//!
//! The Pareto families are defined through their tail. For
//! `DiscretePareto { alpha, scale }`
//!
//! ```text
//! P(X > n) = scale * (1 + n)^(-alpha),   n = 0, 1, 2, ...
//! ```
//!
//! so the slowly varying part is the constant `scale` and theoretical tail
//! ratios are exact. Sampling inverts this tail, `X = ceil((scale / U)^(1/alpha)) - 1`
//! with `U` uniform on (0, 1], which reproduces the identity above exactly.
//! `ZeroInflatedPareto` draws a `DiscretePareto` with probability
//! `inflation` and zero otherwise.
//!
//! # Serialization
//!
//! Specs are JSON objects tagged by `family`:
//!
//! ```text
//! {"family": "dirac", "value": 3}
//! {"family": "bernoulli", "p": 0.5}
//! {"family": "binomial", "trials": 2, "p": 0.25}
//! {"family": "poisson", "lambda": 1.0}
//! {"family": "geometric", "p": 0.5}            // failures before first success
//! {"family": "discrete_pareto", "alpha": 0.8, "scale": 1.0}
//! {"family": "zero_inflated_pareto", "inflation": 0.3, "alpha": 1.5, "scale": 1.0}
//! ```

use rand::Rng;
use rand_distr::{Binomial, Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{polylog, zeta};
use crate::rng::RandomStream;

/// Pareto pgf truncation budget; the series error stays below this.
pub const PGF_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Dirac { value: u64 },
    Bernoulli { p: f64 },
    Binomial { trials: u64, p: f64 },
    Poisson { lambda: f64 },
    Geometric { p: f64 },
    DiscretePareto { alpha: f64, scale: f64 },
    ZeroInflatedPareto { inflation: f64, alpha: f64, scale: f64 },
}

/// Raw moments; `f64::INFINITY` marks a divergent moment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub second_moment: f64,
    pub third_moment: f64,
    pub log_moment_finite: bool,
}

impl Moments {
    pub fn variance(&self) -> f64 {
        if self.second_moment.is_finite() {
            (self.second_moment - self.mean * self.mean).max(0.0)
        } else {
            f64::INFINITY
        }
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

fn check_pareto(alpha: f64, scale: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param(format!("alpha = {alpha} must be positive")));
    }
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::param(format!("scale = {scale} must lie in (0, 1]")));
    }
    Ok(())
}

/// `n^(-a) - (n+1)^(-a)` without cancellation for large `n`.
fn pareto_increment(n: f64, alpha: f64) -> f64 {
    -(n.powf(-alpha)) * (-alpha * (1.0 / n).ln_1p()).exp_m1()
}

/// Σ_{m≥1} m^{-p} or infinity when it diverges.
fn zeta_or_inf(p: f64) -> f64 {
    if p <= 1.0 {
        f64::INFINITY
    } else {
        zeta(p)
    }
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DistributionSpec::Dirac { .. } => Ok(()),
            DistributionSpec::Bernoulli { p } => check_prob("p", p),
            DistributionSpec::Binomial { p, .. } => check_prob("p", p),
            DistributionSpec::Poisson { lambda } => {
                if lambda >= 0.0 && lambda.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param(format!("lambda = {lambda} must be nonnegative")))
                }
            }
            DistributionSpec::Geometric { p } => {
                check_prob("p", p)?;
                if p == 0.0 {
                    return Err(Error::param("geometric p must be positive"));
                }
                Ok(())
            }
            DistributionSpec::DiscretePareto { alpha, scale } => check_pareto(alpha, scale),
            DistributionSpec::ZeroInflatedPareto {
                inflation,
                alpha,
                scale,
            } => {
                if !(0.0..1.0).contains(&inflation) {
                    return Err(Error::param(format!("inflation = {inflation} must lie in [0, 1)")));
                }
                check_pareto(alpha, scale)
            }
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            DistributionSpec::Dirac { .. } => "dirac",
            DistributionSpec::Bernoulli { .. } => "bernoulli",
            DistributionSpec::Binomial { .. } => "binomial",
            DistributionSpec::Poisson { .. } => "poisson",
            DistributionSpec::Geometric { .. } => "geometric",
            DistributionSpec::DiscretePareto { .. } => "discrete_pareto",
            DistributionSpec::ZeroInflatedPareto { .. } => "zero_inflated_pareto",
        }
    }

    /// Tail index of the Pareto families, `None` for light-tailed families.
    pub fn tail_index(&self) -> Option<f64> {
        match *self {
            DistributionSpec::DiscretePareto { alpha, .. }
            | DistributionSpec::ZeroInflatedPareto { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    /// Constant `C` with `P(X > x) ~ C x^(-alpha)`, Pareto families only.
    pub fn tail_constant(&self) -> Option<f64> {
        match *self {
            DistributionSpec::DiscretePareto { scale, .. } => Some(scale),
            DistributionSpec::ZeroInflatedPareto {
                inflation, scale, ..
            } => Some(inflation * scale),
            _ => None,
        }
    }

    /// Draws one variate. Parameters are assumed validated.
    #[inline]
    pub fn sample(&self, rng: &mut RandomStream) -> u64 {
        match *self {
            DistributionSpec::Dirac { value } => value,
            DistributionSpec::Bernoulli { p } => (rng.uniform() < p) as u64,
            DistributionSpec::Binomial { trials, p } => sample_binomial(trials, p, rng),
            DistributionSpec::Poisson { lambda } => sample_poisson(lambda, rng),
            DistributionSpec::Geometric { p } => {
                if p >= 1.0 {
                    0
                } else {
                    Geometric::new(p).expect("validated").sample(rng)
                }
            }
            DistributionSpec::DiscretePareto { alpha, scale } => sample_pareto(alpha, scale, rng),
            DistributionSpec::ZeroInflatedPareto {
                inflation,
                alpha,
                scale,
            } => {
                if rng.uniform() < inflation {
                    sample_pareto(alpha, scale, rng)
                } else {
                    0
                }
            }
        }
    }

    /// Probability mass at `n`.
    pub fn pmf(&self, n: u64) -> f64 {
        match *self {
            DistributionSpec::Dirac { value } => (n == value) as u8 as f64,
            DistributionSpec::Bernoulli { p } => match n {
                0 => 1.0 - p,
                1 => p,
                _ => 0.0,
            },
            DistributionSpec::Binomial { trials, p } => binomial_pmf(trials, p, n),
            DistributionSpec::Poisson { lambda } => {
                if lambda == 0.0 {
                    return (n == 0) as u8 as f64;
                }
                let nf = n as f64;
                (nf * lambda.ln() - lambda - statrs::function::gamma::ln_gamma(nf + 1.0)).exp()
            }
            DistributionSpec::Geometric { p } => p * (1.0 - p).powf(n as f64),
            DistributionSpec::DiscretePareto { alpha, scale } => {
                if n == 0 {
                    1.0 - scale
                } else {
                    scale * pareto_increment(n as f64, alpha)
                }
            }
            DistributionSpec::ZeroInflatedPareto {
                inflation,
                alpha,
                scale,
            } => {
                if n == 0 {
                    1.0 - inflation * scale
                } else {
                    inflation * scale * pareto_increment(n as f64, alpha)
                }
            }
        }
    }

    /// Exact `P(X > x)`.
    pub fn tail_prob(&self, x: u64) -> f64 {
        match *self {
            DistributionSpec::Dirac { value } => (value > x) as u8 as f64,
            DistributionSpec::Bernoulli { p } => {
                if x == 0 {
                    p
                } else {
                    0.0
                }
            }
            DistributionSpec::Binomial { trials, .. } => {
                if x >= trials {
                    return 0.0;
                }
                summed_tail(self, x)
            }
            DistributionSpec::Poisson { .. } => summed_tail(self, x),
            DistributionSpec::Geometric { p } => (1.0 - p).powf(x as f64 + 1.0),
            DistributionSpec::DiscretePareto { alpha, scale } => scale * (1.0 + x as f64).powf(-alpha),
            DistributionSpec::ZeroInflatedPareto {
                inflation,
                alpha,
                scale,
            } => inflation * scale * (1.0 + x as f64).powf(-alpha),
        }
    }

    /// Tail at a real threshold, `P(X > y)` for integer-valued `X`.
    pub fn tail_prob_real(&self, y: f64) -> f64 {
        if y < 0.0 {
            1.0
        } else {
            self.tail_prob(y.floor() as u64)
        }
    }

    /// Probability generating function `E(s^X)` on `[0, 1]`.
    pub fn pgf(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::domain(format!("pgf argument s = {s} outside [0, 1]")));
        }
        Ok(self.pgf_unchecked(s))
    }

    pub(crate) fn pgf_unchecked(&self, s: f64) -> f64 {
        if s == 1.0 {
            return 1.0;
        }
        match *self {
            DistributionSpec::Dirac { value } => s.powf(value as f64),
            DistributionSpec::Bernoulli { p } => 1.0 - p + p * s,
            DistributionSpec::Binomial { trials, p } => (1.0 - p + p * s).powf(trials as f64),
            DistributionSpec::Poisson { lambda } => (-lambda * (1.0 - s)).exp(),
            DistributionSpec::Geometric { p } => p / (1.0 - (1.0 - p) * s),
            DistributionSpec::DiscretePareto { alpha, scale } => 1.0 - scale * pareto_tail_series(alpha, s),
            DistributionSpec::ZeroInflatedPareto {
                inflation,
                alpha,
                scale,
            } => 1.0 - inflation * scale * pareto_tail_series(alpha, s),
        }
    }

    /// Exact raw moments with divergence flags.
    pub fn moments(&self) -> Moments {
        let (mean, second_moment, third_moment) = match *self {
            DistributionSpec::Dirac { value } => {
                let v = value as f64;
                (v, v * v, v * v * v)
            }
            DistributionSpec::Bernoulli { p } => (p, p, p),
            DistributionSpec::Binomial { trials, p } => {
                let m = trials as f64;
                let mean = m * p;
                let second = mean * (1.0 - p) + mean * mean;
                let third = mean * (1.0 - 3.0 * p + 3.0 * m * p + 2.0 * p * p - 3.0 * m * p * p + m * m * p * p);
                (mean, second, third)
            }
            DistributionSpec::Poisson { lambda: l } => (l, l + l * l, l * l * l + 3.0 * l * l + l),
            DistributionSpec::Geometric { p } => {
                let q = 1.0 - p;
                (q / p, q * (1.0 + q) / (p * p), q * (1.0 + 4.0 * q + q * q) / (p * p * p))
            }
            DistributionSpec::DiscretePareto { alpha, scale } => pareto_moments(alpha, scale),
            DistributionSpec::ZeroInflatedPareto {
                inflation,
                alpha,
                scale,
            } => pareto_moments(alpha, inflation * scale),
        };
        Moments {
            mean,
            second_moment,
            third_moment,
            log_moment_finite: true,
        }
    }

    pub fn mean(&self) -> f64 {
        self.moments().mean
    }

    /// Smallest `n` with `P(X > n) <= eps`, used to truncate pmf supports.
    pub(crate) fn support_cutoff(&self, eps: f64, cap: u64) -> u64 {
        match *self {
            DistributionSpec::Dirac { value } => value.min(cap),
            DistributionSpec::Bernoulli { .. } => 1.min(cap),
            DistributionSpec::Binomial { trials, .. } => trials.min(cap),
            _ => {
                let mut n = 0u64;
                let mut tail = 1.0 - self.pmf(0);
                while tail > eps && n < cap {
                    n += 1;
                    tail -= self.pmf(n);
                }
                n
            }
        }
    }
}

fn pareto_moments(alpha: f64, c: f64) -> (f64, f64, f64) {
    // E X   = Σ_{n≥0} P(X>n)                = c ζ(α)
    // E X^2 = Σ (2n+1) P(X>n)              = c (2ζ(α-1) - ζ(α))
    // E X^3 = Σ ((n+1)^3 - n^3) P(X>n)     = c (3ζ(α-2) - 3ζ(α-1) + ζ(α))
    let z0 = zeta_or_inf(alpha);
    let z1 = zeta_or_inf(alpha - 1.0);
    let z2 = zeta_or_inf(alpha - 2.0);
    let mean = c * z0;
    let second = if z1.is_finite() { c * (2.0 * z1 - z0) } else { f64::INFINITY };
    let third = if z2.is_finite() {
        c * (3.0 * z2 - 3.0 * z1 + z0)
    } else {
        f64::INFINITY
    };
    (mean, second, third)
}

/// `(1 - s) Σ_{n≥0} (1+n)^{-α} s^n`, i.e. `(1 - E s^X) / scale` for the
/// discrete Pareto law. Uses `Li_α(s) / s`; its series and near-one
/// expansion both stop well below [`PGF_TOLERANCE`].
fn pareto_tail_series(alpha: f64, s: f64) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    (1.0 - s) * polylog(alpha, s) / s
}

fn summed_tail(dist: &DistributionSpec, x: u64) -> f64 {
    let head: f64 = (0..=x).map(|k| dist.pmf(k)).sum();
    if head < 0.5 {
        return (1.0 - head).max(0.0);
    }
    // sum the upper tail directly to avoid cancellation
    let mut tail = 0.0;
    let mut k = x + 1;
    loop {
        let p = dist.pmf(k);
        tail += p;
        if p < 1e-18 * tail.max(1e-300) || p == 0.0 {
            break;
        }
        k += 1;
        if let DistributionSpec::Binomial { trials, .. } = *dist {
            if k > trials {
                break;
            }
        }
    }
    tail
}

fn binomial_pmf(trials: u64, p: f64, n: u64) -> f64 {
    if n > trials {
        return 0.0;
    }
    if p == 0.0 {
        return (n == 0) as u8 as f64;
    }
    if p == 1.0 {
        return (n == trials) as u8 as f64;
    }
    use statrs::function::factorial::ln_binomial;
    let (m, k) = (trials, n);
    (ln_binomial(m, k) + k as f64 * p.ln() + (m - k) as f64 * (1.0 - p).ln()).exp()
}

#[inline]
pub(crate) fn sample_pareto(alpha: f64, scale: f64, rng: &mut RandomStream) -> u64 {
    let u = rng.uniform_open0();
    let y = (scale / u).powf(1.0 / alpha);
    // float-to-int casts saturate at u64::MAX
    (y.ceil() as u64).saturating_sub(1)
}

#[inline]
pub(crate) fn sample_binomial(trials: u64, p: f64, rng: &mut RandomStream) -> u64 {
    if trials == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return trials;
    }
    if trials <= 16 {
        let mut k = 0;
        for _ in 0..trials {
            k += (rng.uniform() < p) as u64;
        }
        return k;
    }
    Binomial::new(trials, p).expect("validated").sample(rng)
}

#[inline]
pub(crate) fn sample_poisson(lambda: f64, rng: &mut RandomStream) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda < Poisson::<f64>::MAX_LAMBDA {
        Poisson::new(lambda).expect("validated").sample(rng) as u64
    } else {
        // beyond the sampler's range the normal approximation is exact to f64
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        (lambda + z * lambda.sqrt()).max(0.0) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_families() -> Vec<DistributionSpec> {
        vec![
            DistributionSpec::Dirac { value: 3 },
            DistributionSpec::Bernoulli { p: 0.3 },
            DistributionSpec::Binomial { trials: 7, p: 0.25 },
            DistributionSpec::Poisson { lambda: 1.7 },
            DistributionSpec::Geometric { p: 0.4 },
            DistributionSpec::DiscretePareto { alpha: 0.8, scale: 1.0 },
            DistributionSpec::DiscretePareto { alpha: 2.5, scale: 0.6 },
            DistributionSpec::ZeroInflatedPareto {
                inflation: 0.3,
                alpha: 1.5,
                scale: 1.0,
            },
        ]
    }

    #[test]
    fn point_mass_and_degenerate_draws() {
        let mut rng = RandomStream::new(1, 0);
        let d = DistributionSpec::Dirac { value: 3 };
        let b = DistributionSpec::Bernoulli { p: 0.0 };
        for _ in 0..1000 {
            assert_eq!(d.sample(&mut rng), 3);
            assert_eq!(b.sample(&mut rng), 0);
        }
    }

    #[test]
    fn tail_examples() {
        let p = DistributionSpec::DiscretePareto { alpha: 1.0, scale: 1.0 };
        assert!((p.tail_prob(9) - 0.1).abs() < 1e-15);
        assert_eq!(DistributionSpec::Dirac { value: 3 }.tail_prob(5), 0.0);
        let pois = DistributionSpec::Poisson { lambda: 1.0 };
        assert!((pois.tail_prob(0) - (1.0 - (-1f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn tail_at_zero_matches_pmf() {
        for d in all_families() {
            assert!((d.tail_prob(0) - (1.0 - d.pmf(0))).abs() < 1e-12, "{d:?}");
        }
    }

    #[test]
    fn tails_are_nonincreasing_and_consistent_with_pmf() {
        for d in all_families() {
            let mut prev = 1.0;
            for x in 0..60u64 {
                let t = d.tail_prob(x);
                assert!(t <= prev + 1e-15, "{d:?} at {x}");
                prev = t;
                if x > 0 {
                    let diff = d.tail_prob(x - 1) - t;
                    assert!((diff - d.pmf(x)).abs() < 1e-12, "{d:?} at {x}");
                }
            }
        }
    }

    #[test]
    fn pgf_closed_forms() {
        for d in all_families() {
            assert_eq!(d.pgf(1.0).unwrap(), 1.0);
        }
        let b = DistributionSpec::Bernoulli { p: 0.3 };
        assert!((b.pgf(0.6).unwrap() - (0.7 + 0.3 * 0.6)).abs() < 1e-15);
        let g = DistributionSpec::Geometric { p: 0.5 };
        assert!((g.pgf(0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(b.pgf(1.5).is_err());
        assert!(b.pgf(-0.1).is_err());
    }

    #[test]
    fn pgf_matches_pmf_series() {
        for d in all_families() {
            for s in [0.0, 0.2, 0.5, 0.8, 0.95] {
                let mut sum = 0.0;
                let mut sn = 1.0;
                for n in 0..20_000u64 {
                    sum += d.pmf(n) * sn;
                    sn *= s;
                    if sn < 1e-300 {
                        break;
                    }
                }
                let v = d.pgf(s).unwrap();
                assert!((v - sum).abs() < 1e-12, "{d:?} s={s}: {v} vs {sum}");
            }
        }
    }

    #[test]
    fn pgf_monotone_and_convex_on_grid() {
        for d in all_families() {
            let grid: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
            let vals: Vec<f64> = grid.iter().map(|&s| d.pgf(s).unwrap()).collect();
            for w in vals.windows(2) {
                assert!(w[1] >= w[0] - 1e-13, "{d:?}");
            }
            for w in vals.windows(3) {
                assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-12, "{d:?}");
            }
        }
    }

    #[test]
    fn moment_examples() {
        let b = DistributionSpec::Bernoulli { p: 0.5 }.moments();
        assert_eq!((b.mean, b.second_moment, b.log_moment_finite), (0.5, 0.5, true));
        let p = DistributionSpec::DiscretePareto { alpha: 0.8, scale: 1.0 }.moments();
        assert!(p.mean.is_infinite() && p.second_moment.is_infinite() && p.log_moment_finite);
        let p = DistributionSpec::DiscretePareto { alpha: 1.5, scale: 1.0 }.moments();
        assert!(p.mean.is_finite() && p.second_moment.is_infinite());
    }

    #[test]
    fn zero_inflated_mean_matches_pmf_summation() {
        // Σ_n P(X>n) = 0.3 Σ_{m=1}^{N} m^{-1.5} + 0.3 ∫_{N+1/2}^∞ x^{-1.5} dx
        let d = DistributionSpec::ZeroInflatedPareto {
            inflation: 0.3,
            alpha: 1.5,
            scale: 1.0,
        };
        let n = 1_000_000u64;
        let head: f64 = (0..n).rev().map(|k| d.tail_prob(k)).sum();
        let oracle = head + 0.3 * 2.0 / (n as f64 + 0.5).sqrt();
        assert!((d.mean() - oracle).abs() < 1e-9, "{} vs {oracle}", d.mean());
    }

    #[test]
    fn light_moments_match_pmf_sums() {
        for d in all_families().into_iter().filter(|d| d.tail_index().is_none()) {
            let m = d.moments();
            let (mut m1, mut m2, mut m3) = (0.0, 0.0, 0.0);
            for n in 0..400u64 {
                let p = d.pmf(n);
                let x = n as f64;
                m1 += x * p;
                m2 += x * x * p;
                m3 += x * x * x * p;
            }
            assert!((m.mean - m1).abs() < 1e-10, "{d:?}");
            assert!((m.second_moment - m2).abs() < 1e-9, "{d:?}");
            assert!((m.third_moment - m3).abs() < 1e-8, "{d:?}");
        }
    }

    #[test]
    fn pareto_inversion_frequency() {
        // P(X > 9) = 10^{-0.8}; 10^6 draws, 3 binomial standard errors
        let d = DistributionSpec::DiscretePareto { alpha: 0.8, scale: 1.0 };
        let mut rng = RandomStream::new(2024, 0);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| d.sample(&mut rng) > 9).count();
        let p = 10f64.powf(-0.8);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 3.0 * se);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(DistributionSpec::Bernoulli { p: 1.2 }.validate().is_err());
        assert!(DistributionSpec::Poisson { lambda: -1.0 }.validate().is_err());
        assert!(DistributionSpec::DiscretePareto { alpha: 0.0, scale: 1.0 }.validate().is_err());
        assert!(DistributionSpec::DiscretePareto { alpha: 1.0, scale: 1.5 }.validate().is_err());
        assert!(DistributionSpec::ZeroInflatedPareto {
            inflation: 1.0,
            alpha: 1.5,
            scale: 1.0
        }
        .validate()
        .is_err());
        assert!(DistributionSpec::Geometric { p: 0.0 }.validate().is_err());
    }

    #[test]
    fn json_shape() {
        let d: DistributionSpec = serde_json::from_str(r#"{"family":"discrete_pareto","alpha":0.8,"scale":1.0}"#).unwrap();
        assert_eq!(d, DistributionSpec::DiscretePareto { alpha: 0.8, scale: 1.0 });
        assert!(serde_json::from_str::<DistributionSpec>(r#"{"family":"bernoulli","p":0.5,"q":1}"#).is_err());
        assert!(serde_json::from_str::<DistributionSpec>(r#"{"family":"cauchy"}"#).is_err());
    }
}
