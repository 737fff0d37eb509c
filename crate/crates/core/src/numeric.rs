//! Scalar numerics shared by the theory and design modules: the standard
//! normal distribution, the binomial CDF, composite Simpson quadrature and
//! bracketed bisection.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use statrs::function::{beta, erf};

use crate::{Error, Result};

/// Standard normal CDF, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Normal density with the given mean and variance.
pub fn normal_pdf_with(x: f64, mean: f64, variance: f64) -> f64 {
    let sd = variance.sqrt();
    normal_pdf((x - mean) / sd) / sd
}

/// Standard normal quantile. Returns +-inf at the endpoints.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -SQRT_2 * erf::erfc_inv(2.0 * p)
}

/// P(X <= k) for X ~ Binomial(trials, p), through the regularized incomplete
/// beta function: F(k; N, p) = I_{1-p}(N - k, k + 1).
pub fn binomial_cdf(k: i64, trials: u64, p: f64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let k = k as u64;
    if k >= trials {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    beta::beta_reg((trials - k) as f64, (k + 1) as f64, 1.0 - p)
}

/// Composite Simpson rule over `[a, b]` with `intervals` subintervals
/// (rounded up to an even count).
pub fn simpson<F>(f: F, a: f64, b: f64, intervals: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    let m = intervals.max(2).div_ceil(2) * 2;
    let h = (b - a) / m as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..m {
        let v = f(a + h * i as f64);
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    (f(a) + f(b) + 4.0 * odd + 2.0 * even) * h / 3.0
}

/// Simpson quadrature refined by halving the step until two successive
/// estimates differ by less than `tol * max(1, |estimate|)`.
pub fn simpson_refined<F>(f: F, a: f64, b: f64, intervals: usize, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    const MAX_INTERVALS: usize = 1 << 20;
    let mut m = intervals.max(2);
    let mut prev = simpson(&f, a, b, m);
    while m < MAX_INTERVALS {
        m *= 2;
        let next = simpson(&f, a, b, m);
        if !next.is_finite() {
            return Err(Error::Numerical(format!(
                "quadrature over [{a}, {b}] produced {next}"
            )));
        }
        if (next - prev).abs() < tol * next.abs().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Numerical(format!(
        "quadrature over [{a}, {b}] did not settle to {tol} within {MAX_INTERVALS} intervals"
    )))
}

/// Root of a strictly decreasing function by bisection.
///
/// The bracket starts at `[lo, hi]` and is widened geometrically until the
/// sign changes. Stops when the bracket is narrower than `tol`.
pub fn bisect_decreasing<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    const MAX_EXPANSIONS: usize = 64;
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    let mut width = (hi - lo).max(1.0);
    let mut expansions = 0;
    while !(f_lo >= 0.0 && f_hi <= 0.0) {
        if expansions == MAX_EXPANSIONS || f_lo.is_nan() || f_hi.is_nan() {
            return Err(Error::Numerical(format!(
                "no sign change in [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}"
            )));
        }
        if f_lo < 0.0 {
            lo -= width;
            f_lo = f(lo);
        }
        if f_hi > 0.0 {
            hi += width;
            f_hi = f(hi);
        }
        width *= 2.0;
        expansions += 1;
    }
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial_coefficient(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) is integral at every step
        match acc.checked_mul((n - i) as u128) {
            Some(v) => acc = v / (i + 1) as u128,
            None => return u128::MAX,
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_cdf_reference_values() {
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(normal_cdf(1.959963984540054), 0.975, epsilon = 1e-14);
        assert_abs_diff_eq!(normal_cdf(-1.6448536269514722), 0.05, epsilon = 1e-14);
        // far tail stays relative-accurate
        let t = normal_cdf(-10.0);
        assert!((t / 7.619853024160527e-24 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-12, 1e-6, 0.001, 0.05, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-9] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() <= 1e-13 * p.max(1e-3), "p = {p}");
        }
        assert_eq!(normal_quantile(0.0), f64::NEG_INFINITY);
    }

    fn binomial_cdf_by_sum(k: i64, n: u64, p: f64) -> f64 {
        (0..=k.min(n as i64))
            .map(|i| {
                let c = binomial_coefficient(n, i as u64) as f64;
                c * p.powi(i as i32) * (1.0 - p).powi((n - i as u64) as i32)
            })
            .sum()
    }

    #[test]
    fn binomial_cdf_matches_direct_sum() {
        for &(k, n, p) in &[(0, 9, 0.3), (2, 29, 0.1), (9, 99, 0.07), (5, 20, 0.5), (19, 20, 0.9)] {
            let want = binomial_cdf_by_sum(k, n, p);
            assert_abs_diff_eq!(binomial_cdf(k, n, p), want, epsilon = 1e-12);
        }
        assert_eq!(binomial_cdf(-1, 5, 0.5), 0.0);
        assert_eq!(binomial_cdf(5, 5, 0.5), 1.0);
        assert_eq!(binomial_cdf(0, 5, 1.0), 0.0);
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 4);
        assert_abs_diff_eq!(v, 3.75 - 3.0 + 3.0, epsilon = 1e-12);
        let g = simpson_refined(normal_pdf, -8.0, 8.0, 100, 1e-12).unwrap();
        assert_abs_diff_eq!(g, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bisection_expands_bracket() {
        let r = bisect_decreasing(|x| 100.0 - x, 0.0, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(r, 100.0, epsilon = 1e-10);
        let r = bisect_decreasing(|x| -5.0 - x, 0.0, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(r, -5.0, epsilon = 1e-10);
        assert!(bisect_decreasing(|_| 1.0, 0.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn binomial_coefficients() {
        assert_eq!(binomial_coefficient(4, 2), 6);
        assert_eq!(binomial_coefficient(6, 3), 20);
        assert_eq!(binomial_coefficient(26, 13), 10_400_600);
        assert_eq!(binomial_coefficient(200, 100), u128::MAX);
        assert_eq!(binomial_coefficient(3, 5), 0);
    }
}
