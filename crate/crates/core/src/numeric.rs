//! Special functions and quadrature used by the exact distribution queries.
//!
//! `zeta` covers the whole real line except the pole at 1: Euler-Maclaurin
//! summation for `s >= 0` and the functional equation for `s < 0`.
//! `polylog` evaluates `Li_s(x)` on `[0, 1)` by its power series for
//! `x <= 0.5` and by the expansion in `ln x` around `x = 1` otherwise.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

// B_2, B_4, ..., B_24
const BERNOULLI_EVEN: [f64; 12] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
];

const EM_TERMS: usize = 20;

/// Riemann zeta function for real `s != 1`.
pub fn zeta(s: f64) -> f64 {
    if s == 1.0 {
        return f64::INFINITY;
    }
    if s < 0.0 {
        // ζ(s) = 2^s π^(s-1) sin(πs/2) Γ(1-s) ζ(1-s)
        if s.fract() == 0.0 && (s as i64) % 2 == 0 {
            return 0.0;
        }
        return 2f64.powf(s) * PI.powf(s - 1.0) * (PI * s / 2.0).sin() * gamma(1.0 - s) * zeta(1.0 - s);
    }
    if s > 60.0 {
        return 1.0 + 2f64.powf(-s);
    }
    let n = EM_TERMS as f64;
    let mut sum: f64 = (1..EM_TERMS).map(|k| (k as f64).powf(-s)).sum();
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // rising factorial s (s+1) ... (s+2j-2), over (2j)!
    let mut rising = s;
    let mut fact = 2.0;
    let mut npow = n.powf(-s - 1.0);
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b / fact * rising * npow;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        let m = 2.0 * (j as f64 + 1.0);
        rising *= (s + m - 1.0) * (s + m);
        fact *= (m + 1.0) * (m + 2.0);
        npow /= n * n;
    }
    sum
}

/// Polylogarithm `Li_s(x) = Σ_{m≥1} x^m / m^s` for real `s > 0` and `0 <= x < 1`.
pub fn polylog(s: f64, x: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&x));
    if x == 0.0 {
        return 0.0;
    }
    if x <= 0.5 {
        return polylog_series(s, x);
    }
    polylog_near_one(s, x)
}

fn polylog_series(s: f64, x: f64) -> f64 {
    let mut sum = 0.0;
    let mut xm = 1.0;
    for m in 1..10_000u32 {
        xm *= x;
        let term = xm * (m as f64).powf(-s);
        sum += term;
        // remainder <= term * x / (1 - x)
        if term * x / (1.0 - x) < 1e-18 * sum {
            break;
        }
    }
    sum
}

fn polylog_near_one(s: f64, x: f64) -> f64 {
    let w = x.ln(); // in (ln 0.5, 0)
    let integer = s.fract() == 0.0;
    let pole = s as i64 - 1; // index k where ζ(s - k) has its pole when s is an integer
    let mut sum = if integer {
        let n = s as usize;
        let harmonic: f64 = (1..n).map(|j| 1.0 / j as f64).sum();
        let fact: f64 = (1..n).map(|j| j as f64).product();
        w.powi(n as i32 - 1) / fact * (harmonic - (-w).ln())
    } else {
        gamma(1.0 - s) * (-w).powf(s - 1.0)
    };
    let mut wk_over_fact = 1.0;
    for k in 0..80i64 {
        if k > 0 {
            wk_over_fact *= w / k as f64;
        }
        if integer && k == pole {
            continue;
        }
        let term = zeta(s - k as f64) * wk_over_fact;
        sum += term;
        // ζ vanishes at negative even integers, so a zero term says nothing
        if k as f64 > s + 1.0 && term != 0.0 && term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Result of [`integrate`]: value, absolute error estimate, and whether the
/// requested tolerance was met within the interval budget.
#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
// Gauss weights on the odd-indexed Kronrod nodes (1, 3, 5, 7)
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * GK_WEIGHTS[7];
    let mut gauss = fc * G_WEIGHTS[3];
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let pair = f(c - dx) + f(c + dx);
        kronrod += GK_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += G_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss-Kronrod (7/15) quadrature on `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_intervals: usize) -> Quadrature {
    let mut intervals = vec![{
        let (v, e) = gk15(&f, a, b);
        (a, b, v, e)
    }];
    loop {
        let value: f64 = intervals.iter().map(|iv| iv.2).sum();
        let error: f64 = intervals.iter().map(|iv| iv.3).sum();
        if error <= tol.max(1e-15 * value.abs()) {
            return Quadrature {
                value,
                error,
                converged: true,
            };
        }
        if intervals.len() >= max_intervals || !value.is_finite() {
            return Quadrature {
                value,
                error,
                converged: false,
            };
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}
