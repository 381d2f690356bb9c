//! Distribution-free statistics: empirical CDFs, KS distances and the
//! reference distributions used to set eligibility thresholds.

mod chisq;
pub mod descriptive;
mod kolmogorov;
mod normal;
pub mod rng;

pub use chisq::{gen_chisq_quantile, GeneralizedChiSquare};
pub use kolmogorov::{bb_sup_cdf, bb_sup_quantile, bb_sup_sf, two_sample_threshold};
pub use normal::{normal_cdf, normal_quantile, normal_sf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A nonempty sample of finite reals, kept sorted.
///
/// Carries the empirical CDF `F(x) = #{v <= x} / len`, right-continuous.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSample {
    values: Vec<f64>,
}

impl EmpiricalSample {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empirical sample must be nonempty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("empirical sample contains a non-finite value"));
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Empirical CDF at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let count = self.values.partition_point(|&v| v <= x);
        count as f64 / self.values.len() as f64
    }
}

/// `sup_x |F_a(x) - F_b(x)|`, evaluated exactly at the pooled jump points.
pub fn ks_distance(a: &EmpiricalSample, b: &EmpiricalSample) -> f64 {
    ks_distance_sorted(&a.values, &b.values)
}

/// KS distance of two sorted, nonempty slices.
pub(crate) fn ks_distance_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup = 0.0f64;
    while i < a.len() || j < b.len() {
        // Next distinct jump point; ties on both sides are consumed together.
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    sup
}

/// One-sample (`q_{1-a}/sqrt(N)`) or two-sample (Hoeffding-type closed form) threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TestMode {
    OneSample,
    #[default]
    TwoSample,
}

impl std::str::FromStr for TestMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_sample" | "one-sample" | "one" => Ok(TestMode::OneSample),
            "two_sample" | "two-sample" | "two" => Ok(TestMode::TwoSample),
            other => Err(Error::invalid(format!("unknown test mode `{other}`"))),
        }
    }
}

/// Confidence level, threshold family and Bonferroni multiplicity for a KS decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub alpha: f64,
    pub mode: TestMode,
    pub bonferroni_k: usize,
}

impl ThresholdSpec {
    pub fn new(alpha: f64, mode: TestMode, bonferroni_k: usize) -> Result<Self> {
        let spec = Self {
            alpha,
            mode,
            bonferroni_k,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.bonferroni_k == 0 {
            return Err(Error::invalid("bonferroni_k must be at least 1"));
        }
        Ok(())
    }

    /// Per-feature level `alpha / K`.
    pub fn per_feature_alpha(&self) -> f64 {
        self.alpha / self.bonferroni_k as f64
    }

    /// KS threshold for simulation size `n` and real-data size `big_n`.
    pub fn threshold(&self, n: usize, big_n: usize) -> Result<f64> {
        self.validate()?;
        if n == 0 || big_n == 0 {
            return Err(Error::invalid("sample sizes must be positive"));
        }
        let a = self.per_feature_alpha();
        match self.mode {
            TestMode::OneSample => Ok(bb_sup_quantile(1.0 - a)? / (big_n as f64).sqrt()),
            TestMode::TwoSample => two_sample_threshold(n, big_n, a),
        }
    }

    /// Asymptotic p-value of an observed KS distance under the same scaling as
    /// [`threshold`](Self::threshold). Not Bonferroni-adjusted.
    pub fn p_value(&self, statistic: f64, n: usize, big_n: usize) -> f64 {
        let scale = match self.mode {
            TestMode::OneSample => (big_n as f64).sqrt(),
            TestMode::TwoSample => ((n * big_n) as f64 / (n + big_n) as f64).sqrt(),
        };
        bb_sup_sf(scale * statistic).unwrap_or(1.0)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Inverse-ECDF quantile of an already sorted slice (smallest `x` with `F(x) >= p`).
pub(crate) fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let idx = ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(v: &[f64]) -> EmpiricalSample {
        EmpiricalSample::from_slice(v).unwrap()
    }

    fn brute_force_ks(a: &[f64], b: &[f64]) -> f64 {
        let ecdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
        a.iter()
            .chain(b)
            .map(|&x| (ecdf(a, x) - ecdf(b, x)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_distance(&sample(&[1., 2., 3.]), &sample(&[1., 2., 3.])), 0.0);
        let d = ks_distance(&sample(&[0.1, 0.5, 0.9]), &sample(&[0.2, 0.6]));
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(ks_distance(&sample(&[0., 1.]), &sample(&[10., 11.])), 1.0);
    }

    #[test]
    fn ties_are_merged() {
        // F_a jumps to 1 at 1.0 while F_b reaches 2/3 there.
        let d = ks_distance(&sample(&[1., 1., 1.]), &sample(&[1., 1., 2.]));
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_and_non_finite_rejected() {
        assert!(EmpiricalSample::new(vec![]).is_err());
        assert!(EmpiricalSample::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn ecdf_is_right_continuous() {
        let s = sample(&[1., 2., 2., 3.]);
        assert_eq!(s.cdf(0.5), 0.0);
        assert_eq!(s.cdf(2.0), 0.75);
        assert_eq!(s.cdf(3.0), 1.0);
    }

    #[test]
    fn threshold_modes() {
        let one = ThresholdSpec::new(0.05, TestMode::OneSample, 1).unwrap();
        let t = one.threshold(100, 100).unwrap();
        assert!((t - bb_sup_quantile(0.95).unwrap() / 10.0).abs() < 1e-12);
        let two = ThresholdSpec::new(0.05, TestMode::TwoSample, 1).unwrap();
        assert!((two.threshold(100, 100).unwrap() - 0.192_064_558_263_984).abs() < 1e-9);
        assert!(ThresholdSpec::new(1.5, TestMode::TwoSample, 1).is_err());
        assert!(ThresholdSpec::new(0.05, TestMode::TwoSample, 0).is_err());
    }

    #[test]
    fn sorted_quantile_inverse_ecdf() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(sorted_quantile(&v, 0.5), 2.0);
        assert_eq!(sorted_quantile(&v, 0.51), 3.0);
        assert_eq!(sorted_quantile(&v, 1.0), 4.0);
        assert_eq!(sorted_quantile(&v, 0.0), 1.0);
    }

    proptest! {
        #[test]
        fn ks_matches_brute_force(
            a in prop::collection::vec(-5i32..5, 1..20),
            b in prop::collection::vec(-5i32..5, 1..20),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let d = ks_distance(&sample(&a), &sample(&b));
            prop_assert_eq!(d, brute_force_ks(&a, &b));
            prop_assert_eq!(d, ks_distance(&sample(&b), &sample(&a)));
            prop_assert!((0.0..=1.0).contains(&d));
        }

        #[test]
        fn ks_triangle_inequality(
            a in prop::collection::vec(-10.0f64..10.0, 1..15),
            b in prop::collection::vec(-10.0f64..10.0, 1..15),
            c in prop::collection::vec(-10.0f64..10.0, 1..15),
        ) {
            let (a, b, c) = (sample(&a), sample(&b), sample(&c));
            prop_assert!(ks_distance(&a, &c) <= ks_distance(&a, &b) + ks_distance(&b, &c) + 1e-12);
            prop_assert_eq!(ks_distance(&a, &a), 0.0);
        }
    }
}
