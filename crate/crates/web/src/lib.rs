//! WebAssembly bindings for the browser demo in `www/`. Every export returns a
//! JSON string; errors surface as JavaScript exceptions.

use serde::Serialize;
use simcal::aggregation::gaussian_type2_curves;
use simcal::eligibility::{build_eligibility_set, generate_candidates, simulate_runs, CandidateMode, ParameterSpace};
use simcal::realism::{log_returns, stylized_fact_report, StylizedFactReport};
use simcal::simulators::market::simulate_mid_prices;
use simcal::simulators::{Calibrated, MarketConfig, Mm1Params, Model};
use simcal::stats::rng::{derive_seed, rng_from_seed};
use simcal::stats::{EmpiricalSample, TestMode, ThresholdSpec};
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct ScanPoint {
    pub mu: f64,
    pub statistic: f64,
    pub eligible: bool,
}

#[derive(Debug, Serialize)]
pub struct Mm1Scan {
    pub threshold: f64,
    pub points: Vec<ScanPoint>,
    pub eligible: usize,
    /// Smallest and largest eligible `mu`.
    pub hull: Option<(f64, f64)>,
}

/// KS distance of every candidate `mu` on (0, 2) with `lambda` known.
pub fn mm1_scan(
    lambda: f64,
    mu_true: f64,
    m: usize,
    n: usize,
    big_n: usize,
    alpha: f64,
    seed: u64,
) -> simcal::Result<Mm1Scan> {
    let sim = Calibrated::by_name(Model::Mm1(Mm1Params::new(lambda, mu_true)), &["mu"])?;
    let runs = simulate_runs(&sim, &[mu_true], big_n, &mut rng_from_seed(derive_seed(seed, 0)))?;
    let real = EmpiricalSample::new(runs.into_iter().map(|r| r[0]).collect())?;
    let space = ParameterSpace::from_bounds(&[("mu", 0.0, 2.0)])?;
    let mut candidates = generate_candidates(&space, m, CandidateMode::UniformRandom, derive_seed(seed, 1))?;
    candidates.sort_by(|a, b| a.theta[0].total_cmp(&b.theta[0]));
    let spec = ThresholdSpec::new(alpha, TestMode::TwoSample, 1)?;
    let set = build_eligibility_set(&real, &sim, &candidates, n, &spec, derive_seed(seed, 2))?;
    let points: Vec<ScanPoint> = set
        .decisions
        .iter()
        .map(|d| ScanPoint {
            mu: d.candidate.theta[0],
            statistic: d.statistic,
            eligible: d.eligible,
        })
        .collect();
    let eligible: Vec<f64> = points.iter().filter(|p| p.eligible).map(|p| p.mu).collect();
    Ok(Mm1Scan {
        threshold: spec.threshold(n, big_n)?,
        eligible: eligible.len(),
        hull: eligible.first().map(|&lo| (lo, *eligible.last().unwrap_or(&lo))),
        points,
    })
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub size: usize,
    pub p1: f64,
    pub p2: f64,
}

/// Type II error of the first-feature test (`p1`) and the all-feature ESMD
/// test (`p2`) for `K` Gaussian features, across equal sample sizes.
/// `shift_all` shifts every mean by `delta`, otherwise only the first.
pub fn type2_curves(
    k: usize,
    delta: f64,
    shift_all: bool,
    sizes: &[usize],
    alpha: f64,
    draws: usize,
    seed: u64,
) -> simcal::Result<Vec<CurvePoint>> {
    let mut d = vec![0.0; k];
    if shift_all {
        d.iter_mut().for_each(|v| *v = delta);
    } else if let Some(first) = d.first_mut() {
        *first = delta;
    }
    sizes
        .iter()
        .enumerate()
        .map(|(i, &size)| {
            let (p1, p2) = gaussian_type2_curves(1, &d, size, size, alpha, draws, derive_seed(seed, i as u64))?;
            Ok(CurvePoint { size, p1, p2 })
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct MarketPath {
    pub mid_prices: Vec<f64>,
    pub returns: Vec<f64>,
    pub facts: StylizedFactReport,
}

pub fn market_path(preset: usize, seed: u64) -> simcal::Result<MarketPath> {
    let cfg = MarketConfig::preset(preset).ok_or_else(|| {
        simcal::Error::InvalidInput(format!("preset must be 1..={}", MarketConfig::preset_count()))
    })?;
    let mid_prices = simulate_mid_prices(&cfg, &mut rng_from_seed(seed))?;
    let returns = log_returns(&mid_prices, 1)?;
    let facts = stylized_fact_report(&returns)?;
    Ok(MarketPath {
        mid_prices,
        returns,
        facts,
    })
}

fn to_js<T: Serialize>(value: simcal::Result<T>) -> Result<String, JsValue> {
    let value = value.map_err(|e| JsValue::from_str(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = mm1Scan)]
pub fn mm1_scan_js(lambda: f64, mu_true: f64, m: usize, n: usize, big_n: usize, alpha: f64, seed: u32) -> Result<String, JsValue> {
    to_js(mm1_scan(lambda, mu_true, m, n, big_n, alpha, u64::from(seed)))
}

#[wasm_bindgen(js_name = type2Curves)]
pub fn type2_curves_js(k: usize, delta: f64, shift_all: bool, sizes: Vec<u32>, alpha: f64, draws: usize, seed: u32) -> Result<String, JsValue> {
    let sizes: Vec<usize> = sizes.into_iter().map(|s| s as usize).collect();
    to_js(type2_curves(k, delta, shift_all, &sizes, alpha, draws, u64::from(seed)))
}

#[wasm_bindgen(js_name = marketPath)]
pub fn market_path_js(preset: usize, seed: u32) -> Result<String, JsValue> {
    to_js(market_path(preset, u64::from(seed)))
}
