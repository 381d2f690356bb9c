//! Stylized facts of return series: heavy tails and aggregational normality,
//! absence of linear autocorrelation, volatility clustering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::stats::descriptive::{acf, excess_kurtosis, lagged_pearson};
use crate::{Error, Result};

/// `log m_{t+dt} - log m_t` for every admissible `t`.
pub fn log_returns(mid_prices: &[f64], dt_steps: usize) -> Result<Vec<f64>> {
    if dt_steps == 0 {
        return Err(Error::invalid("dt_steps must be positive"));
    }
    if mid_prices.len() <= dt_steps {
        return Err(Error::invalid(format!(
            "need more than {dt_steps} prices, got {}",
            mid_prices.len()
        )));
    }
    if let Some(p) = mid_prices.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::invalid(format!("prices must be positive, got {p}")));
    }
    let logs: Vec<f64> = mid_prices.iter().map(|p| p.ln()).collect();
    Ok(logs.iter().zip(&logs[dt_steps..]).map(|(a, b)| b - a).collect())
}

/// Pearson correlation of `(x_t, x_{t+lag})`; 0 when either side is constant.
pub fn autocorr(series: &[f64], lag: usize) -> Result<f64> {
    if lag + 1 >= series.len() {
        return Err(Error::invalid(format!(
            "lag {lag} needs a series longer than {}, got {}",
            lag + 1,
            series.len()
        )));
    }
    Ok(lagged_pearson(series, lag))
}

/// Non-overlapping sums of `block` consecutive returns; a partial tail block is dropped.
pub fn aggregate_returns(returns: &[f64], block: usize) -> Vec<f64> {
    returns.chunks_exact(block.max(1)).map(|c| c.iter().sum()).collect()
}

pub const RETURN_AUTOCORR_LAGS_MINUTES: [usize; 2] = [20, 25];
pub const SQUARED_AUTOCORR_MAX_LAG: usize = 10;

/// Metrics that cannot be computed from a short input are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StylizedFactReport {
    /// Excess kurtosis of one-minute returns.
    pub minutely_return_kurtosis: Option<f64>,
    /// Excess kurtosis at 1 s, 10 s and 60 s horizons, keyed by seconds.
    pub kurtosis_by_horizon: BTreeMap<usize, Option<f64>>,
    /// Autocorrelation of one-minute returns keyed by lag in minutes.
    pub return_autocorr_at_lag: BTreeMap<usize, Option<f64>>,
    /// Autocorrelation of squared 10-second returns at lags `1..=10`.
    pub squared_return_autocorr: Vec<Option<f64>>,
    pub one_second_returns: usize,
    pub ten_second_returns: usize,
    pub minutely_returns: usize,
}

fn kurtosis(x: &[f64]) -> Option<f64> {
    (x.len() >= 4).then(|| excess_kurtosis(x))
}

fn checked_acf(x: &[f64], lag: usize) -> Option<f64> {
    (lag + 1 < x.len()).then(|| acf(x, lag))
}

/// Report for a series of one-second log returns.
///
/// Autocorrelations use the standard sample ACF (full-series mean and
/// variance), which keeps small samples such as 29 one-minute returns from
/// inflating long-lag estimates.
pub fn stylized_fact_report(returns_1s: &[f64]) -> Result<StylizedFactReport> {
    if returns_1s.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid("returns must be finite"));
    }
    let tens = aggregate_returns(returns_1s, 10);
    let minutes = aggregate_returns(returns_1s, 60);
    let squared: Vec<f64> = tens.iter().map(|r| r * r).collect();
    Ok(StylizedFactReport {
        minutely_return_kurtosis: kurtosis(&minutes),
        kurtosis_by_horizon: [(1, kurtosis(returns_1s)), (10, kurtosis(&tens)), (60, kurtosis(&minutes))]
            .into_iter()
            .collect(),
        return_autocorr_at_lag: RETURN_AUTOCORR_LAGS_MINUTES
            .iter()
            .map(|&lag| (lag, checked_acf(&minutes, lag)))
            .collect(),
        squared_return_autocorr: (1..=SQUARED_AUTOCORR_MAX_LAG)
            .map(|lag| checked_acf(&squared, lag))
            .collect(),
        one_second_returns: returns_1s.len(),
        ten_second_returns: tens.len(),
        minutely_returns: minutes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::rng::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal, StudentT};

    #[test]
    fn log_return_examples() {
        let r = log_returns(&[100.0, 101.0], 1).unwrap();
        assert!((r[0] - 0.009_950_330_853_168).abs() < 1e-12);
        assert!(log_returns(&[5.0; 10], 1).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(log_returns(&[100.0, 101.0, 102.0, 103.0], 2).unwrap().len(), 2);
        assert!(log_returns(&[100.0, 0.0], 1).is_err());
        assert!(log_returns(&[100.0], 1).is_err());
    }

    #[test]
    fn autocorr_examples() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        assert!((autocorr(&x, 0).unwrap() - 1.0).abs() < 1e-12);
        let alt: Vec<f64> = (0..30).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!((autocorr(&alt, 1).unwrap() + 1.0).abs() < 1e-12);
        assert!(autocorr(&alt, 29).is_err());
        assert_eq!(autocorr(&[2.0; 10], 3).unwrap(), 0.0);
    }

    #[test]
    fn white_noise_autocorr_is_small() {
        let t = 1799;
        let bound = 3.0 / (t as f64).sqrt();
        let within = (0..500u64)
            .filter(|&s| {
                let mut rng = rng_from_seed(s);
                let x: Vec<f64> = (0..t).map(|_| StandardNormal.sample(&mut rng)).collect();
                autocorr(&x, 5).unwrap().abs() <= bound
            })
            .count();
        assert!(within >= 475);
    }

    #[test]
    fn minutely_returns_telescope() {
        let mut rng = rng_from_seed(2);
        let mut prices = vec![100.0f64];
        for _ in 0..1799 {
            let z: f64 = StandardNormal.sample(&mut rng);
            let last = *prices.last().unwrap();
            prices.push(last * (1e-3 * z).exp());
        }
        let r1 = log_returns(&prices, 1).unwrap();
        let minutes = aggregate_returns(&r1, 60);
        assert_eq!(minutes.len(), 29);
        for (j, m) in minutes.iter().enumerate() {
            let direct: f64 = r1[60 * j..60 * (j + 1)].iter().sum();
            assert_eq!(*m, direct);
            let from_prices = prices[60 * (j + 1)].ln() - prices[60 * j].ln();
            assert!((m - from_prices).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_returns_report() {
        let r = stylized_fact_report(&[0.0; 1799]).unwrap();
        assert_eq!(r.minutely_return_kurtosis, Some(0.0));
        assert!(r.return_autocorr_at_lag.values().all(|v| *v == Some(0.0)));
        assert!(r.squared_return_autocorr.iter().all(|v| *v == Some(0.0)));
        assert_eq!((r.ten_second_returns, r.minutely_returns), (179, 29));
    }

    #[test]
    fn short_series_flags_absent_metrics() {
        let r = stylized_fact_report(&[0.1, -0.2, 0.3]).unwrap();
        assert_eq!(r.minutely_return_kurtosis, None);
        assert!(r.return_autocorr_at_lag.values().all(Option::is_none));
        assert!(r.squared_return_autocorr.iter().all(Option::is_none));
    }

    #[test]
    fn student_t_minutely_returns_are_heavy_tailed() {
        let t3 = StudentT::new(3.0).unwrap();
        let heavy = (0..200u64)
            .filter(|&s| {
                let mut rng = rng_from_seed(1000 + s);
                // Each one-second block of 60 carries the whole minute's return.
                let mut r = vec![0.0; 60 * 500];
                for j in 0..500 {
                    r[60 * j] = t3.sample(&mut rng);
                }
                stylized_fact_report(&r).unwrap().minutely_return_kurtosis.unwrap() > 1.0
            })
            .count();
        assert!(heavy >= 190, "{heavy}");
    }

    #[test]
    fn garch_series_shows_volatility_clustering() {
        // GARCH(1,1) on 10-second returns: s2 = 0.05 + 0.1 r^2 + 0.85 s2.
        let mut rng = rng_from_seed(77);
        let mut s2 = 1.0f64;
        let mut r = Vec::with_capacity(18_000);
        for _ in 0..1800 {
            let z: f64 = StandardNormal.sample(&mut rng);
            let x = s2.sqrt() * z;
            s2 = 0.05 + 0.1 * x * x + 0.85 * s2;
            r.push(x);
            r.extend([0.0; 9]);
        }
        let report = stylized_fact_report(&r).unwrap();
        assert!(report.squared_return_autocorr.iter().all(|v| v.unwrap() > 0.0));
    }
}
