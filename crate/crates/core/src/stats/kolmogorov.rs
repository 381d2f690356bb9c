//! Law of `sup_{t in [0,1]} |BB(t)|` for a standard Brownian bridge.

use std::f64::consts::PI;

use crate::{Error, Result};

const SERIES_TOL: f64 = 1e-12;
const MAX_TERMS: u32 = 100;
/// Below this the alternating series needs more than `MAX_TERMS` terms; the
/// theta-function form converges in one or two terms there.
const SMALL_Z: f64 = 0.2;

/// `P(sup |BB| > z) = 2 sum_{v>=1} (-1)^{v-1} exp(-2 v^2 z^2)`.
pub fn bb_sup_sf(z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(Error::invalid(format!("z must be nonnegative, got {z}")));
    }
    if z < SMALL_Z {
        return Ok(1.0 - small_z_cdf(z));
    }
    let mut sum = 0.0;
    for v in 1..=MAX_TERMS {
        let v = f64::from(v);
        let term = (-2.0 * v * v * z * z).exp();
        sum += if v as u32 % 2 == 1 { term } else { -term };
        if term < SERIES_TOL {
            break;
        }
    }
    Ok((2.0 * sum).clamp(0.0, 1.0))
}

/// `P(sup |BB| <= z)`, clamped to `[0, 1]`.
pub fn bb_sup_cdf(z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(Error::invalid(format!("z must be nonnegative, got {z}")));
    }
    if z < SMALL_Z {
        return Ok(small_z_cdf(z));
    }
    Ok((1.0 - bb_sup_sf(z)?).clamp(0.0, 1.0))
}

// sqrt(2 pi)/z * sum_k exp(-(2k-1)^2 pi^2 / (8 z^2)), the same law written in
// the Jacobi-theta form.
fn small_z_cdf(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for k in 1..=MAX_TERMS {
        let odd = f64::from(2 * k - 1);
        let term = (-odd * odd * PI * PI / (8.0 * z * z)).exp();
        sum += term;
        if term < SERIES_TOL * sum.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    ((2.0 * PI).sqrt() / z * sum).clamp(0.0, 1.0)
}

/// `q` with `P(sup |BB| <= q) = p`, by bisection on `[0, 5]`.
pub fn bb_sup_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("p must lie in (0, 1), got {p}")));
    }
    // Bisect on the survival function so that p close to 1 keeps its precision.
    let target = 1.0 - p;
    let (mut lo, mut hi) = (0.0f64, 5.0f64);
    while hi - lo > 1e-11 {
        let mid = 0.5 * (lo + hi);
        if bb_sup_sf(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `sqrt((n + N) / (n N)) * sqrt(-log(alpha / 2) / 2)`.
pub fn two_sample_threshold(n: usize, big_n: usize, alpha: f64) -> Result<f64> {
    if n == 0 || big_n == 0 {
        return Err(Error::invalid("sample sizes must be positive"));
    }
    super::check_alpha(alpha)?;
    let (n, big_n) = (n as f64, big_n as f64);
    Ok(((n + big_n) / (n * big_n)).sqrt() * (-0.5 * (alpha / 2.0).ln()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_examples() {
        assert_eq!(bb_sup_cdf(0.0).unwrap(), 0.0);
        assert!((bb_sup_cdf(1.3581).unwrap() - 0.95).abs() < 1e-4);
        let expected = 1.0 - 2.0 * (-18.0f64).exp();
        assert!((bb_sup_cdf(3.0).unwrap() - expected).abs() < 1e-9);
        assert!(bb_sup_cdf(-0.1).is_err());
    }

    #[test]
    fn both_series_agree_where_they_overlap() {
        for z in [0.2, 0.3, 0.5, 0.8, 1.0] {
            let mut sum = 0.0;
            for v in 1..=200 {
                let v = v as f64;
                let t = (-2.0 * v * v * z * z).exp();
                sum += if (v as u32) % 2 == 1 { t } else { -t };
            }
            assert!((small_z_cdf(z) - (1.0 - 2.0 * sum)).abs() < 1e-12, "z={z}");
        }
    }

    #[test]
    fn cdf_is_nondecreasing() {
        let mut prev = 0.0;
        for i in 0..=600 {
            let c = bb_sup_cdf(i as f64 * 0.01).unwrap();
            assert!(c >= prev - 1e-15, "at z={}", i as f64 * 0.01);
            prev = c;
        }
        assert!(prev > 1.0 - 1e-15);
    }

    #[test]
    fn quantile_examples() {
        // Reference values from a root-finder applied to the series.
        assert!((bb_sup_quantile(0.95).unwrap() - 1.358_098_639).abs() < 1e-6);
        assert!((bb_sup_quantile(0.99).unwrap() - 1.627_623_612).abs() < 1e-6);
        assert!(bb_sup_quantile(0.0).is_err());
        assert!(bb_sup_quantile(1.0).is_err());
        let mut prev = 0.0;
        for p in [0.01, 0.1, 0.5, 0.9, 0.95, 0.999, 1.0 - 1e-9] {
            let q = bb_sup_quantile(p).unwrap();
            assert!(q > prev);
            prev = q;
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for z in [0.3, 0.7, 1.0, 1.5, 2.2] {
            let p = bb_sup_cdf(z).unwrap();
            assert!((bb_sup_quantile(p).unwrap() - z).abs() < 1e-7);
        }
    }

    #[test]
    fn one_term_bound_holds() {
        for alpha in [0.01, 0.05, 0.1] {
            let q = bb_sup_quantile(1.0 - alpha).unwrap();
            assert!(q * q <= -(alpha / 2.0f64).ln() / 2.0);
        }
    }

    #[test]
    fn two_sample_threshold_values() {
        assert!((two_sample_threshold(100, 100, 0.05).unwrap() - 0.192_064_558).abs() < 1e-8);
        let prefactor = (-0.5 * 0.025f64.ln()).sqrt();
        assert!((prefactor - 1.358_10).abs() < 1e-5);
        assert!(two_sample_threshold(1_000_000_000, 1_000_000_000, 0.05).unwrap() < 1e-4);
        assert!(two_sample_threshold(0, 10, 0.05).is_err());
    }
}
