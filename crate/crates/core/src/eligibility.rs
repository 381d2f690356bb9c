//! Eligibility sets: candidate generation, per-candidate decisions, set
//! assembly, robust bounds and Monte Carlo error harnesses.
//!
//! Every candidate `i` simulates with a generator derived from `(seed, i)`, and
//! every replication `r` of a harness from `(seed, r)`, so results do not depend
//! on how work is scheduled across threads.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aggregation::{AggregationMethod, AggregationReport, Reference};
use crate::features::ExtractorSpec;
use crate::simulators::Simulator;
use crate::stats::rng::{derive_seed, derived_rng, rng_from_seed};
use crate::stats::{bb_sup_quantile, check_alpha, ks_distance_sorted, EmpiricalSample, TestMode, ThresholdSpec};
use crate::{Error, FeatureMatrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub dims: Vec<Dimension>,
}

impl ParameterSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        let space = Self { dims };
        space.validate()?;
        Ok(space)
    }

    /// Convenience constructor from `(name, lower, upper)` triples.
    pub fn from_bounds(bounds: &[(&str, f64, f64)]) -> Result<Self> {
        Self::new(
            bounds
                .iter()
                .map(|&(name, lower, upper)| Dimension {
                    name: name.to_string(),
                    lower,
                    upper,
                })
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::invalid("parameter space needs at least one dimension"));
        }
        for d in &self.dims {
            if !(d.lower.is_finite() && d.upper.is_finite() && d.lower < d.upper) {
                return Err(Error::invalid(format!(
                    "dimension `{}` needs finite lower < upper, got ({}, {})",
                    d.name, d.lower, d.upper
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dims.len()
            && theta.iter().zip(&self.dims).all(|(v, d)| d.lower < *v && *v < d.upper)
    }

    pub fn names(&self) -> Vec<&str> {
        self.dims.iter().map(|d| d.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePoint {
    pub id: usize,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CandidateMode {
    /// Interior lattice with `round(m^(1/d))` points per axis; `m` must be a
    /// perfect `d`-th power.
    Grid,
    #[default]
    UniformRandom,
}

impl std::str::FromStr for CandidateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(CandidateMode::Grid),
            "uniform_random" | "uniform-random" | "uniform" | "random" => Ok(CandidateMode::UniformRandom),
            other => Err(Error::invalid(format!("unknown candidate mode `{other}`"))),
        }
    }
}

/// `m` candidates strictly inside the box. Grid points along an axis with `c`
/// levels sit at `lower + (upper - lower) i / (c + 1)`, `i = 1..=c`, with the
/// last dimension varying fastest.
pub fn generate_candidates(
    space: &ParameterSpace,
    m: usize,
    mode: CandidateMode,
    seed: u64,
) -> Result<Vec<CandidatePoint>> {
    space.validate()?;
    if m == 0 {
        return Err(Error::invalid("number of candidates must be positive"));
    }
    let d = space.dim();
    match mode {
        CandidateMode::Grid => {
            let c = (m as f64).powf(1.0 / d as f64).round() as usize;
            if c.checked_pow(d as u32) != Some(m) {
                return Err(Error::invalid(format!(
                    "grid mode needs m to be a perfect {d}-th power, got {m}"
                )));
            }
            let axes: Vec<Vec<f64>> = space
                .dims
                .iter()
                .map(|dim| {
                    (1..=c)
                        .map(|i| dim.lower + (dim.upper - dim.lower) * i as f64 / (c + 1) as f64)
                        .collect()
                })
                .collect();
            Ok((0..m)
                .map(|id| {
                    let mut rest = id;
                    let mut theta = vec![0.0; d];
                    for j in (0..d).rev() {
                        theta[j] = axes[j][rest % c];
                        rest /= c;
                    }
                    CandidatePoint { id, theta }
                })
                .collect())
        }
        CandidateMode::UniformRandom => {
            let mut rng = rng_from_seed(seed);
            Ok((0..m)
                .map(|id| {
                    let theta = space
                        .dims
                        .iter()
                        .map(|dim| loop {
                            let u: f64 = rng.random();
                            let v = dim.lower + (dim.upper - dim.lower) * u;
                            if u > 0.0 && v > dim.lower && v < dim.upper {
                                break v;
                            }
                        })
                        .collect();
                    CandidatePoint { id, theta }
                })
                .collect())
        }
    }
}

/// Statistic, threshold and the `statistic <= threshold` verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub eligible: bool,
}

impl TestOutcome {
    pub fn new(statistic: f64, threshold: f64) -> Self {
        Self {
            statistic,
            threshold,
            eligible: statistic <= threshold,
        }
    }
}

impl From<&AggregationReport> for TestOutcome {
    fn from(report: &AggregationReport) -> Self {
        let (statistic, threshold) = report.summary();
        Self {
            statistic,
            threshold,
            eligible: report.eligible,
        }
    }
}

/// KS decision for scalar outputs: `real_data` has `N` points, `sim_data` `n`.
pub fn decide_candidate(
    real_data: &EmpiricalSample,
    sim_data: &EmpiricalSample,
    spec: &ThresholdSpec,
) -> Result<TestOutcome> {
    let threshold = spec.threshold(sim_data.len(), real_data.len())?;
    Ok(TestOutcome::new(
        ks_distance_sorted(real_data.values(), sim_data.values()),
        threshold,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EligibilityDecision {
    pub candidate: CandidatePoint,
    /// `NaN` when the simulator failed.
    pub statistic: f64,
    pub threshold: f64,
    pub eligible: bool,
    /// Present when simulation or feature extraction failed; such candidates are never eligible.
    pub error: Option<String>,
}

impl EligibilityDecision {
    fn failed(candidate: CandidatePoint, error: &Error) -> Self {
        Self {
            candidate,
            statistic: f64::NAN,
            threshold: f64::NAN,
            eligible: false,
            error: Some(error.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EligibilitySetResult {
    pub decisions: Vec<EligibilityDecision>,
    pub alpha: f64,
    pub method: AggregationMethod,
    /// Simulation size per candidate.
    pub n: usize,
    /// Real-data size.
    pub big_n: usize,
    pub m: usize,
}

impl EligibilitySetResult {
    pub fn mode(&self) -> Option<TestMode> {
        match self.method {
            AggregationMethod::Sks { mode } => Some(mode),
            _ => None,
        }
    }

    pub fn eligible(&self) -> impl Iterator<Item = &EligibilityDecision> {
        self.decisions.iter().filter(|d| d.eligible)
    }

    pub fn eligible_count(&self) -> usize {
        self.eligible().count()
    }

    pub fn error_count(&self) -> usize {
        self.decisions.iter().filter(|d| d.error.is_some()).count()
    }
}

#[cfg(feature = "parallel")]
fn map_ordered<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_ordered<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    items.iter().map(f).collect()
}

/// `n` runs at `theta`, drawn from one generator.
pub fn simulate_runs<S: Simulator + ?Sized>(
    simulator: &S,
    theta: &[f64],
    n: usize,
    rng: &mut crate::stats::rng::SimRng,
) -> Result<Vec<Vec<f64>>> {
    (0..n)
        .map(|_| {
            let out = simulator.simulate(theta, rng)?;
            if out.len() != simulator.output_dim() {
                return Err(Error::Simulation(format!(
                    "simulator returned {} values, expected {}",
                    out.len(),
                    simulator.output_dim()
                )));
            }
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::Simulation("simulator returned a non-finite value".into()));
            }
            Ok(out)
        })
        .collect()
}

/// Real features and decision rule shared by every candidate.
pub struct Calibration<'a, S: Simulator + ?Sized> {
    pub simulator: &'a S,
    pub extractor: &'a ExtractorSpec,
    pub reference: &'a Reference,
    /// Simulation size per candidate.
    pub n: usize,
    pub seed: u64,
}

impl<S: Simulator + ?Sized> Calibration<'_, S> {
    pub fn evaluate(&self, candidate: &CandidatePoint) -> EligibilityDecision {
        let mut rng = derived_rng(self.seed, candidate.id as u64);
        let report = simulate_runs(self.simulator, &candidate.theta, self.n, &mut rng)
            .and_then(|runs| self.extractor.extract_batch(&runs))
            .and_then(|y| self.reference.decide(&y));
        match report {
            Ok(r) => {
                let o = TestOutcome::from(&r);
                EligibilityDecision {
                    candidate: candidate.clone(),
                    statistic: o.statistic,
                    threshold: o.threshold,
                    eligible: o.eligible,
                    error: None,
                }
            }
            Err(e) => EligibilityDecision::failed(candidate.clone(), &e),
        }
    }

    pub fn run(&self, candidates: &[CandidatePoint]) -> Result<EligibilitySetResult> {
        if self.n == 0 {
            return Err(Error::invalid("simulation size n must be positive"));
        }
        Ok(EligibilitySetResult {
            decisions: map_ordered(candidates, |c| self.evaluate(c)),
            alpha: self.reference.alpha(),
            method: self.reference.method(),
            n: self.n,
            big_n: self.reference.real_size(),
            m: candidates.len(),
        })
    }

    /// Evaluate in chunks of `chunk` candidates, handing decisions to `sink`
    /// in candidate order. Memory is bounded by one chunk.
    pub fn run_streaming<F>(&self, candidates: &[CandidatePoint], chunk: usize, mut sink: F) -> Result<()>
    where
        F: FnMut(EligibilityDecision) -> Result<()>,
    {
        if self.n == 0 {
            return Err(Error::invalid("simulation size n must be positive"));
        }
        for block in candidates.chunks(chunk.max(1)) {
            for d in map_ordered(block, |c| self.evaluate(c)) {
                sink(d)?;
            }
        }
        Ok(())
    }
}

/// Scalar-output eligibility set: each candidate's `n` simulated outputs are
/// compared with `real_data` by the KS rule in `spec`.
pub fn build_eligibility_set<S: Simulator + ?Sized>(
    real_data: &EmpiricalSample,
    simulator: &S,
    candidates: &[CandidatePoint],
    n: usize,
    spec: &ThresholdSpec,
    seed: u64,
) -> Result<EligibilitySetResult> {
    spec.validate()?;
    if simulator.output_dim() != 1 {
        return Err(Error::invalid(
            "scalar eligibility needs a one-dimensional simulator output; use Calibration with an extractor",
        ));
    }
    if n == 0 {
        return Err(Error::invalid("simulation size n must be positive"));
    }
    let threshold = spec.threshold(n, real_data.len())?;
    let decisions = map_ordered(candidates, |c| {
        let mut rng = derived_rng(seed, c.id as u64);
        let sample = simulate_runs(simulator, &c.theta, n, &mut rng)
            .and_then(|runs| EmpiricalSample::new(runs.into_iter().map(|r| r[0]).collect()));
        match sample {
            Ok(s) => {
                let o = TestOutcome::new(ks_distance_sorted(real_data.values(), s.values()), threshold);
                EligibilityDecision {
                    candidate: c.clone(),
                    statistic: o.statistic,
                    threshold: o.threshold,
                    eligible: o.eligible,
                    error: None,
                }
            }
            Err(e) => EligibilityDecision::failed(c.clone(), &e),
        }
    });
    Ok(EligibilitySetResult {
        decisions,
        alpha: spec.alpha,
        method: AggregationMethod::Sks { mode: spec.mode },
        n,
        big_n: real_data.len(),
        m: candidates.len(),
    })
}

/// `(min, max)` of `psi` over the eligible candidates.
pub fn ro_bounds(result: &EligibilitySetResult, psi_values: &BTreeMap<usize, f64>) -> Result<(f64, f64)> {
    let mut bounds: Option<(f64, f64)> = None;
    for d in result.eligible() {
        let id = d.candidate.id;
        let v = *psi_values
            .get(&id)
            .ok_or_else(|| Error::invalid(format!("no psi value for eligible candidate {id}")))?;
        if !v.is_finite() {
            return Err(Error::invalid(format!("psi value for candidate {id} is not finite")));
        }
        bounds = Some(match bounds {
            None => (v, v),
            Some((lo, hi)) => (lo.min(v), hi.max(v)),
        });
    }
    bounds.ok_or(Error::EmptyEligibilitySet)
}

/// `2 m (exp(-2 n eps1^2) + exp(-2 N eps2^2))`, not clamped.
pub fn type2_bound_unclamped(n: usize, big_n: usize, m: usize, eps1: f64, eps2: f64) -> Result<f64> {
    if !(eps1 > 0.0 && eps2 > 0.0) {
        return Err(Error::invalid("epsilons must be positive"));
    }
    Ok(2.0 * m as f64 * ((-2.0 * n as f64 * eps1 * eps1).exp() + (-2.0 * big_n as f64 * eps2 * eps2).exp()))
}

/// [`type2_bound_unclamped`] clamped to `[0, 1]`.
pub fn type2_bound(n: usize, big_n: usize, m: usize, eps1: f64, eps2: f64) -> Result<f64> {
    Ok(type2_bound_unclamped(n, big_n, m, eps1, eps2)?.min(1.0))
}

/// Smallest integer `N > (q_{1-alpha/K} / (gap - eps1 - eps2))^2`.
pub fn min_real_data_size(gap: f64, eps1: f64, eps2: f64, alpha: f64, k: usize) -> Result<u64> {
    check_alpha(alpha)?;
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if !(eps1 > 0.0 && eps2 > 0.0) {
        return Err(Error::invalid("epsilons must be positive"));
    }
    if !(gap <= 1.0 && gap > eps1 + eps2) {
        return Err(Error::invalid(format!(
            "need eps1 + eps2 < gap <= 1, got gap={gap}, eps1+eps2={}",
            eps1 + eps2
        )));
    }
    let q = bb_sup_quantile(1.0 - alpha / k as f64)?;
    let x = (q / (gap - eps1 - eps2)).powi(2);
    Ok(x.floor() as u64 + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionReport {
    pub reps: usize,
    pub rejections: usize,
    /// Replications lost to simulator failures; excluded from `rate`.
    pub failures: usize,
    pub rate: f64,
    /// Binomial standard error; absent with fewer than two valid replications.
    pub se: Option<f64>,
    /// Mean and standard deviation of `threshold - statistic`.
    pub mean_margin: f64,
    pub sd_margin: Option<f64>,
}

fn summarize(outcomes: Vec<Result<TestOutcome>>) -> RejectionReport {
    let reps = outcomes.len();
    let ok: Vec<TestOutcome> = outcomes.into_iter().filter_map(|o| o.ok()).collect();
    let valid = ok.len();
    let rejections = ok.iter().filter(|o| !o.eligible).count();
    let rate = if valid > 0 {
        rejections as f64 / valid as f64
    } else {
        f64::NAN
    };
    let margins: Vec<f64> = ok
        .iter()
        .map(|o| o.threshold - o.statistic)
        .filter(|m| m.is_finite())
        .collect();
    let mean_margin = if margins.is_empty() {
        f64::NAN
    } else {
        margins.iter().sum::<f64>() / margins.len() as f64
    };
    let sd_margin = (margins.len() > 1).then(|| {
        let ss: f64 = margins.iter().map(|m| (m - mean_margin).powi(2)).sum();
        (ss / (margins.len() - 1) as f64).sqrt()
    });
    RejectionReport {
        reps,
        rejections,
        failures: reps - valid,
        rate,
        se: (valid > 1).then(|| (rate * (1.0 - rate) / valid as f64).sqrt()),
        mean_margin,
        sd_margin,
    }
}

/// How often `theta_sim` is rejected against real data generated at
/// `theta_real`, with scalar outputs and the KS rule in `spec`.
#[allow(clippy::too_many_arguments)]
pub fn rejection_rate<S: Simulator + ?Sized>(
    simulator: &S,
    theta_real: &[f64],
    theta_sim: &[f64],
    n: usize,
    big_n: usize,
    spec: &ThresholdSpec,
    reps: usize,
    seed: u64,
) -> Result<RejectionReport> {
    spec.validate()?;
    if reps == 0 || n == 0 || big_n == 0 {
        return Err(Error::invalid("reps, n and N must be positive"));
    }
    if simulator.output_dim() != 1 {
        return Err(Error::invalid("scalar harness needs a one-dimensional simulator output"));
    }
    let ids: Vec<u64> = (0..reps as u64).collect();
    let outcomes = map_ordered(&ids, |&r| {
        let rep_seed = derive_seed(seed, r);
        let real = simulate_runs(simulator, theta_real, big_n, &mut derived_rng(rep_seed, 0))?;
        let sim = simulate_runs(simulator, theta_sim, n, &mut derived_rng(rep_seed, 1))?;
        let real = EmpiricalSample::new(real.into_iter().map(|v| v[0]).collect())?;
        let sim = EmpiricalSample::new(sim.into_iter().map(|v| v[0]).collect())?;
        decide_candidate(&real, &sim, spec)
    });
    Ok(summarize(outcomes))
}

/// Type I error: real and simulated data both come from `theta0`.
pub fn type1_error_estimate<S: Simulator + ?Sized>(
    simulator: &S,
    theta0: &[f64],
    n: usize,
    big_n: usize,
    spec: &ThresholdSpec,
    reps: usize,
    seed: u64,
) -> Result<RejectionReport> {
    rejection_rate(simulator, theta0, theta0, n, big_n, spec, reps, seed)
}

/// Feature-based version of [`rejection_rate`]: both samples pass through
/// `extractor` and are compared with `method`.
#[allow(clippy::too_many_arguments)]
pub fn rejection_rate_features<S: Simulator + ?Sized>(
    simulator: &S,
    extractor: &ExtractorSpec,
    method: AggregationMethod,
    theta_real: &[f64],
    theta_sim: &[f64],
    n: usize,
    big_n: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<RejectionReport> {
    check_alpha(alpha)?;
    extractor.validate()?;
    if reps == 0 || n == 0 || big_n == 0 {
        return Err(Error::invalid("reps, n and N must be positive"));
    }
    let ids: Vec<u64> = (0..reps as u64).collect();
    let outcomes = map_ordered(&ids, |&r| {
        let rep_seed = derive_seed(seed, r);
        let real = simulate_runs(simulator, theta_real, big_n, &mut derived_rng(rep_seed, 0))?;
        let sim = simulate_runs(simulator, theta_sim, n, &mut derived_rng(rep_seed, 1))?;
        let x = extractor.extract_batch(&real)?;
        let y = extractor.extract_batch(&sim)?;
        let reference = Reference::new(&x, method, alpha, derive_seed(rep_seed, 2))?;
        Ok(TestOutcome::from(&reference.decide(&y)?))
    });
    Ok(summarize(outcomes))
}

/// Rejection rate of `method` on pairs of feature matrices drawn by `draw`
/// (called with a per-replication generator, returns `(X, Y)`).
pub fn rejection_rate_matrices<F>(
    method: AggregationMethod,
    alpha: f64,
    reps: usize,
    seed: u64,
    draw: F,
) -> Result<RejectionReport>
where
    F: Fn(&mut crate::stats::rng::SimRng) -> Result<(FeatureMatrix, FeatureMatrix)> + Sync + Send,
{
    check_alpha(alpha)?;
    if reps == 0 {
        return Err(Error::invalid("reps must be positive"));
    }
    let ids: Vec<u64> = (0..reps as u64).collect();
    let outcomes = map_ordered(&ids, |&r| {
        let rep_seed = derive_seed(seed, r);
        let (x, y) = draw(&mut derived_rng(rep_seed, 0))?;
        let reference = Reference::new(&x, method, alpha, derive_seed(rep_seed, 1))?;
        Ok(TestOutcome::from(&reference.decide(&y)?))
    });
    Ok(summarize(outcomes))
}
