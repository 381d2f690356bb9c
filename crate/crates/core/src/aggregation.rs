//! Aggregating `K` extracted features into one eligibility decision.
//!
//! * SKS: every per-feature KS distance must fall under the Bonferroni threshold.
//! * SSMD: every per-feature mean difference must fall under
//!   `z_{1-alpha/(2K)} * sqrt((1/N + 1/n) var_k)`, with `var_k` the sample
//!   variance of the real features.
//! * ESMD: the squared norm of the mean-difference vector is compared with the
//!   `(1-alpha)` quantile of `(1/N + 1/n) Z' S Z`, `S` the sample covariance of
//!   the real features.
//!
//! `X` is always the real-data feature matrix (`N` rows), `Y` the simulated one
//! (`n` rows).

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::stats::rng::rng_from_seed;
use crate::stats::{
    check_alpha, ks_distance_sorted, normal_cdf, normal_quantile, normal_sf, GeneralizedChiSquare,
    TestMode, ThresholdSpec,
};
use crate::{Error, FeatureMatrix, Result};

pub const DEFAULT_MC_DRAWS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum AggregationMethod {
    Sks {
        #[serde(default)]
        mode: TestMode,
    },
    Ssmd,
    Esmd {
        #[serde(default = "default_draws")]
        mc_draws: usize,
    },
}

fn default_draws() -> usize {
    DEFAULT_MC_DRAWS
}

impl Default for AggregationMethod {
    fn default() -> Self {
        AggregationMethod::Sks {
            mode: TestMode::TwoSample,
        }
    }
}

impl AggregationMethod {
    pub fn kind(&self) -> MethodKind {
        match self {
            AggregationMethod::Sks { .. } => MethodKind::Sks,
            AggregationMethod::Ssmd => MethodKind::Ssmd,
            AggregationMethod::Esmd { .. } => MethodKind::Esmd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Sks,
    Ssmd,
    Esmd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationReport {
    pub method: MethodKind,
    /// KS distances (SKS), absolute mean differences (SSMD) or the single sum of
    /// squared mean differences (ESMD).
    pub statistics: Vec<f64>,
    /// One threshold per entry of `statistics`; SSMD appends the bare normal quantile.
    pub thresholds: Vec<f64>,
    pub eligible: bool,
    /// SKS: smallest per-feature asymptotic KS p-value. SSMD: Bonferroni-adjusted
    /// smallest two-sided normal p-value. ESMD: Monte Carlo tail probability of
    /// the statistic under the generalized chi-square.
    pub pseudo_p: f64,
    /// Set by SSMD when a feature has zero sample variance but unequal means.
    pub degenerate_variance: bool,
}

impl AggregationReport {
    /// One `(statistic, threshold)` pair with `eligible == (statistic <= threshold)`.
    ///
    /// SKS: the largest KS distance against the common threshold. SSMD: the
    /// largest standardized difference `|d_k| / se_k` against `z_{1-alpha/(2K)}`.
    /// ESMD: the statistic itself.
    pub fn summary(&self) -> (f64, f64) {
        match self.method {
            MethodKind::Sks | MethodKind::Esmd => {
                let stat = self.statistics.iter().copied().fold(0.0, f64::max);
                (stat, self.thresholds[0])
            }
            MethodKind::Ssmd => {
                // thresholds[k] = z * se_k, and the last entry holds z itself.
                let k = self.statistics.len();
                let z = self.thresholds[k];
                let ratio = self
                    .statistics
                    .iter()
                    .zip(&self.thresholds[..k])
                    .map(|(d, t)| standardized(*d, *t / z))
                    .fold(0.0, f64::max);
                (ratio, z)
            }
        }
    }
}

fn standardized(d: f64, se: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else if se > 0.0 {
        d / se
    } else {
        f64::INFINITY
    }
}

/// Everything about the real data that the decision rules reuse across candidates.
#[derive(Debug, Clone)]
pub struct Reference {
    method: AggregationMethod,
    alpha: f64,
    big_n: usize,
    k: usize,
    sorted_columns: Vec<Vec<f64>>,
    means: Vec<f64>,
    variances: Vec<f64>,
    /// Unit-scale `Z' S Z` draws (ESMD only).
    chisq: Option<GeneralizedChiSquare>,
}

impl Reference {
    pub fn new(x: &FeatureMatrix, method: AggregationMethod, alpha: f64, seed: u64) -> Result<Self> {
        check_alpha(alpha)?;
        let k = x.cols();
        let big_n = x.rows();
        if big_n == 0 {
            return Err(Error::invalid("real feature matrix has no rows"));
        }
        let mut reference = Self {
            method,
            alpha,
            big_n,
            k,
            sorted_columns: Vec::new(),
            means: x.column_means(),
            variances: Vec::new(),
            chisq: None,
        };
        match method {
            AggregationMethod::Sks { .. } => {
                reference.sorted_columns = sorted_columns(x);
            }
            AggregationMethod::Ssmd => {
                reference.variances = x.column_variances()?;
            }
            AggregationMethod::Esmd { mc_draws } => {
                if big_n < k + 1 {
                    return Err(Error::invalid(format!(
                        "ESMD needs at least K+1 = {} real rows, got {big_n}",
                        k + 1
                    )));
                }
                let cov = x.sample_covariance()?;
                let law = GeneralizedChiSquare::simulate(&cov, k, 1.0, mc_draws, seed).map_err(
                    |e| match e {
                        Error::InvalidInput(m) if m.contains("semidefinite") => {
                            Error::numeric("esmd covariance", m)
                        }
                        other => other,
                    },
                )?;
                reference.chisq = Some(law);
            }
        }
        Ok(reference)
    }

    pub fn method(&self) -> AggregationMethod {
        self.method
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn real_size(&self) -> usize {
        self.big_n
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn decide(&self, y: &FeatureMatrix) -> Result<AggregationReport> {
        if y.cols() != self.k {
            return Err(Error::invalid(format!(
                "simulated features have {} columns, real have {}",
                y.cols(),
                self.k
            )));
        }
        let n = y.rows();
        if n == 0 {
            return Err(Error::invalid("simulated feature matrix has no rows"));
        }
        match self.method {
            AggregationMethod::Sks { mode } => self.sks(y, mode),
            AggregationMethod::Ssmd => Ok(self.ssmd(y)),
            AggregationMethod::Esmd { .. } => Ok(self.esmd(y)),
        }
    }

    fn sks(&self, y: &FeatureMatrix, mode: TestMode) -> Result<AggregationReport> {
        let n = y.rows();
        let spec = ThresholdSpec::new(self.alpha, mode, self.k)?;
        let threshold = spec.threshold(n, self.big_n)?;
        let statistics: Vec<f64> = sorted_columns(y)
            .iter()
            .zip(&self.sorted_columns)
            .map(|(ys, xs)| ks_distance_sorted(xs, ys))
            .collect();
        let eligible = statistics.iter().all(|&s| s <= threshold);
        let pseudo_p = statistics
            .iter()
            .map(|&s| spec.p_value(s, n, self.big_n))
            .fold(1.0, f64::min);
        Ok(AggregationReport {
            method: MethodKind::Sks,
            thresholds: vec![threshold; self.k],
            statistics,
            eligible,
            pseudo_p,
            degenerate_variance: false,
        })
    }

    fn scale(&self, n: usize) -> f64 {
        1.0 / self.big_n as f64 + 1.0 / n as f64
    }

    fn ssmd(&self, y: &FeatureMatrix) -> AggregationReport {
        let k = self.k as f64;
        let z = normal_quantile(1.0 - self.alpha / (2.0 * k)).expect("alpha checked");
        let scale = self.scale(y.rows());
        let mut statistics = Vec::with_capacity(self.k);
        let mut thresholds = Vec::with_capacity(self.k + 1);
        let mut degenerate = false;
        let mut min_p = 1.0f64;
        for ((xm, ym), var) in self.means.iter().zip(y.column_means()).zip(&self.variances) {
            let d = (xm - ym).abs();
            let se = (scale * var).sqrt();
            if se == 0.0 && d > 0.0 {
                degenerate = true;
            }
            let p = match standardized(d, se) {
                r if r.is_infinite() => 0.0,
                r => 2.0 * normal_sf(r),
            };
            min_p = min_p.min(p);
            statistics.push(d);
            thresholds.push(z * se);
        }
        let eligible = statistics.iter().zip(&thresholds).all(|(d, t)| d <= t);
        thresholds.push(z);
        AggregationReport {
            method: MethodKind::Ssmd,
            statistics,
            thresholds,
            eligible,
            pseudo_p: (k * min_p).min(1.0),
            degenerate_variance: degenerate,
        }
    }

    fn esmd(&self, y: &FeatureMatrix) -> AggregationReport {
        let law = self.chisq.as_ref().expect("built for ESMD");
        let scale = self.scale(y.rows());
        let stat: f64 = self
            .means
            .iter()
            .zip(y.column_means())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let threshold = scale * law.quantile(1.0 - self.alpha);
        AggregationReport {
            method: MethodKind::Esmd,
            statistics: vec![stat],
            thresholds: vec![threshold],
            eligible: stat <= threshold,
            pseudo_p: law.sf(stat / scale),
            degenerate_variance: false,
        }
    }
}

fn sorted_columns(m: &FeatureMatrix) -> Vec<Vec<f64>> {
    (0..m.cols())
        .map(|k| {
            let mut c = m.column(k);
            c.sort_unstable_by(f64::total_cmp);
            c
        })
        .collect()
}

fn check_columns(x: &FeatureMatrix, y: &FeatureMatrix) -> Result<()> {
    if x.cols() != y.cols() {
        return Err(Error::invalid(format!(
            "feature matrices have {} and {} columns",
            x.cols(),
            y.cols()
        )));
    }
    Ok(())
}

pub fn sks_decide(
    x: &FeatureMatrix,
    y: &FeatureMatrix,
    alpha: f64,
    mode: TestMode,
) -> Result<AggregationReport> {
    check_columns(x, y)?;
    Reference::new(x, AggregationMethod::Sks { mode }, alpha, 0)?.decide(y)
}

pub fn ssmd_decide(x: &FeatureMatrix, y: &FeatureMatrix, alpha: f64) -> Result<AggregationReport> {
    check_columns(x, y)?;
    Reference::new(x, AggregationMethod::Ssmd, alpha, 0)?.decide(y)
}

pub fn esmd_decide(
    x: &FeatureMatrix,
    y: &FeatureMatrix,
    alpha: f64,
    mc_draws: usize,
    seed: u64,
) -> Result<AggregationReport> {
    check_columns(x, y)?;
    Reference::new(x, AggregationMethod::Esmd { mc_draws }, alpha, seed)?.decide(y)
}

/// `P(|N(mu, s^2)| <= eta)`.
fn folded_normal_within(mu: f64, s: f64, eta: f64) -> f64 {
    (normal_cdf((eta - mu) / s) - normal_cdf((-eta - mu) / s)).clamp(0.0, 1.0)
}

/// Type II error probabilities for Gaussian features with identity covariance
/// and mean shift `delta`: `p1` tests feature `k` (1-based) alone at level
/// `alpha`, `p2` is the ESMD rule on all features.
///
/// `p1` is exact. `p2 = P(chi2_{K,nu} <= q)` with `q` the `chi2_K` quantile;
/// both `q` and the noncentral probability are Monte Carlo estimates from
/// `mc_draws` draws on independent streams derived from `seed`.
pub fn gaussian_type2_curves(
    k: usize,
    delta: &[f64],
    n: usize,
    big_n: usize,
    alpha: f64,
    mc_draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    let dim = delta.len();
    if dim == 0 || k == 0 || k > dim {
        return Err(Error::invalid(format!("feature index {k} outside 1..={dim}")));
    }
    if n == 0 || big_n == 0 {
        return Err(Error::invalid("sample sizes must be positive"));
    }
    if delta.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("delta must be finite"));
    }
    let s2 = 1.0 / big_n as f64 + 1.0 / n as f64;
    let s = s2.sqrt();
    let eta = normal_quantile(1.0 - alpha / 2.0)? * s;
    let p1 = folded_normal_within(delta[k - 1], s, eta);

    let mut identity = vec![0.0; dim * dim];
    (0..dim).for_each(|i| identity[i * dim + i] = 1.0);
    let q = GeneralizedChiSquare::simulate(
        &identity,
        dim,
        1.0,
        mc_draws,
        crate::stats::rng::derive_seed(seed, 0),
    )?
    .quantile(1.0 - alpha);

    let shift: Vec<f64> = delta.iter().map(|d| d / s).collect();
    let mut rng = rng_from_seed(crate::stats::rng::derive_seed(seed, 1));
    let mut inside = 0usize;
    for _ in 0..mc_draws {
        let v: f64 = shift
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (z + m) * (z + m)
            })
            .sum();
        if v <= q {
            inside += 1;
        }
    }
    Ok((p1, inside as f64 / mc_draws as f64))
}

/// Noncentrality `sum_k delta_k^2 / (1/N + 1/n)`.
pub fn noncentrality(delta: &[f64], n: usize, big_n: usize) -> f64 {
    delta.iter().map(|d| d * d).sum::<f64>() / (1.0 / big_n as f64 + 1.0 / n as f64)
}

/// Closed-form Type II errors when only the first of `dim` identity-covariance
/// Gaussian features is shifted by `delta1`: `p1` tests that feature alone at
/// level `alpha`, `p2` is Bonferroni SSMD over all features,
/// `p2 = (1 - alpha/K)^(K-1) P(|N(delta1, s^2)| <= eta')` with `eta'` at level `alpha/K`.
pub fn bonferroni_type2_closed_form(
    dim: usize,
    delta1: f64,
    n: usize,
    big_n: usize,
    alpha: f64,
) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if dim == 0 || n == 0 || big_n == 0 {
        return Err(Error::invalid("dimension and sample sizes must be positive"));
    }
    let kf = dim as f64;
    let s = (1.0 / big_n as f64 + 1.0 / n as f64).sqrt();
    let eta = normal_quantile(1.0 - alpha / 2.0)? * s;
    let eta_k = normal_quantile(1.0 - alpha / (2.0 * kf))? * s;
    let p1 = folded_normal_within(delta1, s, eta);
    let p2 = (1.0 - alpha / kf).powi(dim as i32 - 1) * folded_normal_within(delta1, s, eta_k);
    Ok((p1, p2))
}
