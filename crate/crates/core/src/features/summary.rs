use serde::{Deserialize, Serialize};

use crate::stats::descriptive::{acf, excess_kurtosis, mean, quantile_sorted, skewness, std_dev};
use crate::{Error, Result};

/// Hand-crafted summary statistics of a series.
///
/// Output order is fixed: mean, standard deviation (population), skewness,
/// excess kurtosis, each requested quantile, ACF at each lag in `acf_lags`,
/// ACF of the squared series at each lag in `squared_acf_lags`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryConfig {
    pub quantiles: Vec<f64>,
    pub acf_lags: Vec<usize>,
    pub squared_acf_lags: Vec<usize>,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        Self {
            quantiles: vec![0.05, 0.25, 0.5, 0.75, 0.95],
            acf_lags: vec![1, 2, 5],
            squared_acf_lags: vec![1, 2, 5],
        }
    }
}

impl SummaryConfig {
    pub fn output_dim(&self) -> usize {
        4 + self.quantiles.len() + self.acf_lags.len() + self.squared_acf_lags.len()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(q) = self.quantiles.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(Error::invalid(format!("quantile level {q} outside [0, 1]")));
        }
        Ok(())
    }

    fn max_lag(&self) -> usize {
        self.acf_lags
            .iter()
            .chain(&self.squared_acf_lags)
            .copied()
            .max()
            .unwrap_or(0)
    }

    /// Smallest admissible input length.
    pub fn min_len(&self) -> usize {
        (self.max_lag() + 2).max(1)
    }
}

pub fn summary_stats_extract(sample: &[f64], config: &SummaryConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if sample.len() < config.min_len() {
        return Err(Error::invalid(format!(
            "series of length {} too short for summary statistics (need {})",
            sample.len(),
            config.min_len()
        )));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains a non-finite value"));
    }
    let mut out = Vec::with_capacity(config.output_dim());
    out.push(mean(sample));
    out.push(std_dev(sample));
    out.push(skewness(sample));
    out.push(excess_kurtosis(sample));

    let mut sorted = sample.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    out.extend(config.quantiles.iter().map(|&p| quantile_sorted(&sorted, p)));

    out.extend(config.acf_lags.iter().map(|&lag| acf(sample, lag)));
    let squared: Vec<f64> = sample.iter().map(|v| v * v).collect();
    out.extend(config.squared_acf_lags.iter().map(|&lag| acf(&squared, lag)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_conventions() {
        let cfg = SummaryConfig::default();
        let f = summary_stats_extract(&[4.0; 20], &cfg).unwrap();
        assert_eq!(f.len(), cfg.output_dim());
        assert_eq!(f[0], 4.0);
        assert_eq!(&f[1..4], &[0.0, 0.0, 0.0]);
        assert!(f[4..9].iter().all(|&q| q == 4.0));
        assert!(f[9..].iter().all(|&a| a == 0.0));
    }

    #[test]
    fn small_sample_values() {
        let cfg = SummaryConfig {
            quantiles: vec![0.5],
            acf_lags: vec![],
            squared_acf_lags: vec![],
        };
        let f = summary_stats_extract(&[1.0, 2.0, 3.0, 4.0], &cfg).unwrap();
        assert_eq!(f[0], 2.5);
        assert!((f[1] - 1.1180).abs() < 1e-4);
        assert_eq!(f[4], 2.5);
    }

    #[test]
    fn too_short_for_lags() {
        let cfg = SummaryConfig {
            quantiles: vec![],
            acf_lags: vec![5],
            squared_acf_lags: vec![],
        };
        assert!(summary_stats_extract(&[1.0; 6], &cfg).is_err());
        assert!(summary_stats_extract(&[1.0; 7], &cfg).is_ok());
    }
}
