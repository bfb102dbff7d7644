//! Independent oracles shared by the integration tests and the acceptance
//! runner.
#![allow(dead_code)]

use mlmc_sr::models::normal_cdf;
use num::{BigInt, Zero};

/// Exact check of `V[p~] / E[p~]^2 <= 1/4` for `p~ = (x + 1)/(n + 1)`,
/// `x ~ Bin(n, a/1000)`.
///
/// Scaling every pmf term by `1000^n` makes it the integer
/// `C(n,x) a^x (1000-a)^(n-x)`. With `S1 = sum (x+1) t_x` and
/// `S2 = sum (x+1)^2 t_x` the bound reads `4 S2 1000^n <= 5 S1^2`.
/// The pmf sums are cross-checked against the closed-form binomial moments.
pub fn shrinkage_bound_exact(n: u64, a: u64) -> bool {
    let (s1, s2, scale) = shrinkage_sums(n, a);
    BigInt::from(4) * s2 * scale <= BigInt::from(5) * &s1 * &s1
}

/// `(S1, S2, 1000^n)`: the scaled first and second moments of `x + 1`.
pub fn shrinkage_sums(n: u64, a: u64) -> (BigInt, BigInt, BigInt) {
    assert!(a > 0 && a < 1000);
    let b = 1000 - a;
    let big = |v: u64| BigInt::from(v);
    let scale = num::pow(big(1000), n as usize);

    // t_0 = b^n, t_{x+1} = t_x (n-x) a / ((x+1) b)
    let mut t = num::pow(big(b), n as usize);
    let mut total = BigInt::zero();
    let mut s1 = BigInt::zero();
    let mut s2 = BigInt::zero();
    for x in 0..=n {
        let w = big(x + 1);
        total += &t;
        s1 += &t * &w;
        s2 += &t * &w * &w;
        if x < n {
            t = t * big(n - x) * big(a) / (big(x + 1) * big(b));
        }
    }
    assert_eq!(total, scale, "pmf does not sum to one (n={n}, a={a})");

    // E[x] = n p, E[x^2] = n p (1-p) + n^2 p^2, scaled by 1000^n.
    let m1 = if n == 0 { BigInt::zero() } else { big(n) * big(a) * num::pow(big(1000), n as usize - 1) };
    let m2 = if n < 2 {
        m1.clone()
    } else {
        m1.clone() + big(n) * big(n - 1) * big(a) * big(a) * num::pow(big(1000), n as usize - 2)
    };
    assert_eq!(s1, &m1 + &scale, "first moment mismatch (n={n}, a={a})");
    assert_eq!(s2, &m2 + big(2) * &m1 + &scale, "second moment mismatch (n={n}, a={a})");
    (s1, s2, scale)
}

/// Composite Simpson rule with `intervals` (even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    assert!(intervals % 2 == 0);
    let h = (b - a) / intervals as f64;
    let mut s = f(a) + f(b);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn ratio(u: f64, b: f64) -> f64 {
    (2.0 * u - 1.0 + b) / (1.0 + b)
}

/// `Pr(omega + h r(U) <= y)` for the synthetic model.
pub fn synthetic_level_mean(y: f64, h: f64, b: f64) -> f64 {
    simpson(|u| normal_cdf(y - h * ratio(u, b)), 0.0, 1.0, 2000)
}

/// Mean and variance of `1(X_h1 <= y) - 1(X_h2 <= y)` on one `omega` with
/// independent perturbations.
pub fn synthetic_corrector_moments(y: f64, h1: f64, h2: f64, b: f64) -> (f64, f64) {
    let mean = synthetic_level_mean(y, h1, b) - synthetic_level_mean(y, h2, b);
    let second = simpson(
        |u1| {
            let f1 = normal_cdf(y - h1 * ratio(u1, b));
            simpson(|u2| (f1 - normal_cdf(y - h2 * ratio(u2, b))).abs(), 0.0, 1.0, 400)
        },
        0.0,
        1.0,
        400,
    );
    (mean, second - mean * mean)
}

/// `points` values `10^e`, `e` evenly spaced from `hi` down to `lo`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| 10f64.powf(hi - (hi - lo) * i as f64 / (points - 1) as f64))
        .collect()
}
