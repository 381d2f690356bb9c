//! Moments, quantiles and autocorrelations of plain slices.
//!
//! Degenerate-variance convention: whenever the (population) variance is zero,
//! skewness, excess kurtosis and every autocorrelation are reported as 0.

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Central moments 2, 3 and 4 (divisor `len`).
fn central_moments(x: &[f64]) -> (f64, f64, f64) {
    let m = mean(x);
    let n = x.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (m2 / n, m3 / n, m4 / n)
}

/// Population standard deviation.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    central_moments(x).0.sqrt()
}

pub fn skewness(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let (m2, m3, _) = central_moments(x);
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

pub fn excess_kurtosis(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let (m2, _, m4) = central_moments(x);
    if m2 <= 0.0 {
        0.0
    } else {
        m4 / (m2 * m2) - 3.0
    }
}

/// Linear-interpolation quantile of an already sorted slice (midpoint for even medians).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sample autocorrelation function at `lag`:
/// `sum_{t} (x_t - m)(x_{t+lag} - m) / sum_t (x_t - m)^2`, with the full-series
/// mean and denominator.
pub fn acf(x: &[f64], lag: usize) -> f64 {
    if lag >= x.len() {
        return 0.0;
    }
    let m = mean(x);
    let denom: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    if denom <= 0.0 {
        return 0.0;
    }
    let num: f64 = x
        .iter()
        .zip(&x[lag..])
        .map(|(a, b)| (a - m) * (b - m))
        .sum();
    (num / denom).clamp(-1.0, 1.0)
}

/// Pearson correlation of the pairs `(x_t, x_{t+lag})`.
pub fn lagged_pearson(x: &[f64], lag: usize) -> f64 {
    if lag + 1 >= x.len() {
        return 0.0;
    }
    let a = &x[..x.len() - lag];
    let b = &x[lag..];
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (u, v) in a.iter().zip(b) {
        let (du, dv) = (u - ma, v - mb);
        sab += du * dv;
        saa += du * du;
        sbb += dv * dv;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}
