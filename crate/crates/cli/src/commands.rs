use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use simcal::aggregation::{AggregationMethod, Reference};
use simcal::eligibility::{
    generate_candidates, min_real_data_size, rejection_rate_features, ro_bounds, simulate_runs, type2_bound,
    type2_bound_unclamped, CandidatePoint, Calibration, EligibilityDecision, EligibilitySetResult,
};
use simcal::features::{ExtractorSpec, SummaryConfig};
use simcal::realism::{stylized_fact_report, StylizedFactReport};
use simcal::simulators::{MarketConfig, Model, Simulator};
use simcal::stats::rng::{derive_seed, derived_rng};

use crate::config::{default_model, load_extractor, RunConfig};
use crate::error::CliError;
use crate::io::{number, numbered, print_json, read_table, with_suffix, write_json, write_meta, TableWriter};
use crate::{CalibrateArgs, ExtractArgs, RunOverrides, SimulateArgs, TypeErrorArgs};

/// Seed streams derived from the master seed.
const REAL_STREAM: u64 = 1;
const SIM_STREAM: u64 = 2;
const CANDIDATE_STREAM: u64 = 3;
const REFERENCE_STREAM: u64 = 4;

const SIM_CHUNK: usize = 1024;

fn header_for(model: &Model) -> Vec<String> {
    match model {
        Model::Mm1(_) => vec!["sojourn_mean".to_string()],
        Model::Gg1(p) => numbered("sojourn", p.num_customers),
        Model::Market(c) => numbered("r", c.output_len()),
    }
}

fn set_param(model: &Model, name: &str, value: f64) -> Result<Model, CliError> {
    let names = model.param_names();
    let i = names.iter().position(|n| *n == name).ok_or_else(|| {
        CliError::invalid(format!("model has no parameter `{name}` (expected one of {})", names.join(", ")))
    })?;
    let mut values = model.params();
    values[i] = value;
    Ok(model.with_params(&values)?)
}

#[derive(Serialize)]
struct SimulateMeta<'a> {
    model: &'a Model,
    reps: usize,
    seed: u64,
}

pub fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let mut model = match (&a.config, &a.model) {
        (Some(_), Some(_)) => return Err(CliError::invalid("give --model or --config, not both")),
        (Some(p), None) => RunConfig::load(Some(p))?.model,
        (None, Some(name)) => default_model(name)?,
        (None, None) if a.preset.is_some() => default_model("market")?,
        (None, None) => return Err(CliError::invalid("give --model or --config")),
    };
    if let Some(i) = a.preset {
        if !matches!(model, Model::Market(_)) {
            return Err(CliError::invalid("--preset applies to the market model"));
        }
        model = Model::Market(
            MarketConfig::preset(i)
                .ok_or_else(|| CliError::invalid(format!("preset must be 1..={}", MarketConfig::preset_count())))?,
        );
    }
    let named = [
        ("lambda", a.lambda),
        ("mu", a.mu),
        ("k", a.k),
        ("theta", a.theta),
        ("sigma", a.sigma),
    ];
    for (name, value) in named {
        if let Some(v) = value {
            model = set_param(&model, name, v)?;
        }
    }
    for p in &a.params {
        let (name, value) = p
            .split_once('=')
            .ok_or_else(|| CliError::invalid(format!("--param expects NAME=VALUE, got `{p}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::invalid(format!("--param {name}: `{value}` is not a number")))?;
        model = set_param(&model, name.trim(), value)?;
    }
    if let Some(c) = a.customers {
        match &mut model {
            Model::Mm1(p) => p.num_customers = c,
            Model::Gg1(p) => p.num_customers = c,
            Model::Market(_) => return Err(CliError::invalid("--customers applies to queue models")),
        }
    }
    model.validate()?;
    if a.reps == 0 {
        return Err(CliError::invalid("--reps must be at least 1"));
    }

    let mut writer = TableWriter::create(&a.output, &header_for(&model))?;
    let ids: Vec<u64> = (0..a.reps as u64).collect();
    for block in ids.chunks(SIM_CHUNK) {
        let rows: Vec<Vec<f64>> = block
            .par_iter()
            .map(|&r| model.run(&mut derived_rng(a.seed, r)))
            .collect::<simcal::Result<_>>()?;
        for row in &rows {
            writer.write_numbers(row)?;
        }
    }
    writer.finish()?;
    write_meta(
        &a.output,
        "simulate",
        &SimulateMeta {
            model: &model,
            reps: a.reps,
            seed: a.seed,
        },
        a.seed,
    )
}

#[derive(Serialize)]
struct ExtractMeta<'a> {
    input: &'a Path,
    extractor: &'a ExtractorSpec,
}

pub fn extract(a: ExtractArgs) -> Result<(), CliError> {
    let extractor = match &a.extractor {
        Some(p) => load_extractor(p)?,
        None => ExtractorSpec::SummaryStats(SummaryConfig::default()),
    };
    extractor.validate()?;
    let (_, rows) = read_table(&a.input)?;
    let features = extractor.extract_batch(&rows)?;
    let mut writer = TableWriter::create(&a.output, &numbered("f", features.cols()))?;
    for row in features.iter_rows() {
        writer.write_numbers(row)?;
    }
    writer.finish()?;
    write_meta(
        &a.output,
        "extract",
        &ExtractMeta {
            input: &a.input,
            extractor: &extractor,
        },
        0,
    )
}

fn apply_overrides(cfg: &mut RunConfig, o: &RunOverrides, alpha: Option<f64>) {
    if let Some(v) = alpha {
        cfg.alpha = v;
    }
    if let Some(v) = o.n {
        cfg.n = v;
    }
    if let Some(v) = o.big_n {
        cfg.big_n = v;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(p) = &o.extractor {
        cfg.extractor = None;
        cfg.extractor_file = Some(p.clone());
    }
}

/// Observed outputs: the `real_data` CSV, or `N` runs at the truth.
fn real_outputs<S: Simulator>(cfg: &RunConfig, sim: &S, truth: &[f64]) -> Result<Vec<Vec<f64>>, CliError> {
    match &cfg.real_data {
        Some(path) => {
            let (_, rows) = read_table(path)?;
            if rows.is_empty() {
                return Err(CliError::invalid(format!("{} has no data rows", path.display())));
            }
            if let Some(row) = rows.iter().find(|r| r.len() != sim.output_dim()) {
                return Err(CliError::invalid(format!(
                    "{}: rows have {} values, the model emits {}",
                    path.display(),
                    row.len(),
                    sim.output_dim()
                )));
            }
            Ok(rows)
        }
        None => Ok(simulate_runs(
            sim,
            truth,
            cfg.big_n,
            &mut derived_rng(cfg.seed, REAL_STREAM),
        )?),
    }
}

fn decision_fields(d: &EligibilityDecision) -> Vec<String> {
    let mut f = Vec::with_capacity(d.candidate.theta.len() + 5);
    f.push(d.candidate.id.to_string());
    f.extend(d.candidate.theta.iter().map(|v| number(*v)));
    f.push(number(d.statistic));
    f.push(number(d.threshold));
    f.push(u8::from(d.eligible).to_string());
    f.push(u8::from(d.error.is_some()).to_string());
    f
}

fn decisions_header(d: usize) -> Vec<String> {
    let mut h = vec!["id".to_string()];
    h.extend(numbered("theta", d));
    h.extend(["statistic", "threshold", "eligible", "error_flag"].map(String::from));
    h
}

#[derive(Serialize)]
struct Hull {
    name: String,
    min: f64,
    max: f64,
}

pub fn calibrate(a: CalibrateArgs, alpha: Option<f64>) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(a.run.config.as_deref())?;
    apply_overrides(&mut cfg, &a.run, alpha);
    if let Some(m) = a.m {
        cfg.m = m;
    }
    if let Some(c) = &a.candidates {
        cfg.candidates = c.parse()?;
    }
    if let Some(p) = &a.real_data {
        cfg.real_data = Some(p.clone());
    }
    if let Some(p) = &a.output {
        cfg.output = Some(p.clone());
    }
    if let Some(p) = &a.summary {
        cfg.summary = Some(p.clone());
    }
    cfg.validate()?;
    if cfg.m == 0 {
        return Err(CliError::invalid("zero candidates requested"));
    }

    let sim = cfg.simulator()?;
    let space = cfg.space()?;
    let extractor = cfg.extractor()?;
    let truth = cfg.truth()?;
    let real = real_outputs(&cfg, &sim, &truth)?;
    let x = extractor.extract_batch(&real)?;
    let reference = Reference::new(&x, cfg.aggregation, cfg.alpha, derive_seed(cfg.seed, REFERENCE_STREAM))?;
    let candidates = generate_candidates(&space, cfg.m, cfg.candidates, derive_seed(cfg.seed, CANDIDATE_STREAM))?;

    let output = cfg.output.clone().unwrap_or_else(|| PathBuf::from("decisions.csv"));
    let summary_path = cfg.summary.clone().unwrap_or_else(|| with_suffix(&output, "summary.json"));
    let mut writer = TableWriter::create(&output, &decisions_header(space.dim()))?;

    let calibration = Calibration {
        simulator: &sim,
        extractor: &extractor,
        reference: &reference,
        n: cfg.n,
        seed: derive_seed(cfg.seed, SIM_STREAM),
    };
    let mut eligible = 0usize;
    let mut errors = 0usize;
    let mut first_error: Option<String> = None;
    let mut hull: Option<Vec<(f64, f64)>> = None;
    let mut write_error: Option<CliError> = None;
    calibration.run_streaming(&candidates, cfg.chunk, |d| {
        if let Err(e) = writer.write_fields(&decision_fields(&d)) {
            write_error = Some(e);
            return Err(simcal::Error::InvalidInput("write failed".into()));
        }
        if let Some(msg) = &d.error {
            errors += 1;
            first_error.get_or_insert_with(|| msg.clone());
        }
        if d.eligible {
            eligible += 1;
            let h = hull.get_or_insert_with(|| d.candidate.theta.iter().map(|&v| (v, v)).collect());
            for (b, &v) in h.iter_mut().zip(&d.candidate.theta) {
                *b = (b.0.min(v), b.1.max(v));
            }
        }
        Ok(())
    })
    .map_err(|e| write_error.take().unwrap_or_else(|| e.into()))?;
    writer.finish()?;

    let hash = cfg.hash();
    let names = cfg.free_names();
    let summary = json!({
        "command": "calibrate",
        "config_hash": hash,
        "seed": cfg.seed,
        "alpha": cfg.alpha,
        "aggregation": cfg.aggregation,
        "mode": match cfg.aggregation {
            AggregationMethod::Sks { mode } => json!(mode),
            _ => Value::Null,
        },
        "free": names,
        "m": cfg.m,
        "n": cfg.n,
        "N": real.len(),
        "eligible": eligible,
        "errors": errors,
        "empty": eligible == 0,
        "eligible_hull": hull.map(|h| names
            .iter()
            .zip(h)
            .map(|(name, (min, max))| Hull { name: name.clone(), min, max })
            .collect::<Vec<_>>()),
        "first_error": first_error,
        "decisions": output,
    });
    write_json(&summary_path, &summary)?;
    write_meta(&output, "calibrate", &cfg, cfg.seed)?;
    if eligible == 0 {
        eprintln!("simcal: eligibility set is empty ({} candidates tested)", cfg.m);
    }
    if errors * 2 > cfg.m {
        return Err(CliError::simulation(format!(
            "{errors} of {} candidates failed to simulate; first error: {}",
            cfg.m,
            first_error.unwrap_or_default()
        )));
    }
    Ok(())
}

pub fn typeerror(a: TypeErrorArgs, alpha: Option<f64>) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(a.run.config.as_deref())?;
    apply_overrides(&mut cfg, &a.run, alpha);
    if let Some(r) = a.reps {
        cfg.reps = r;
    }
    cfg.validate()?;
    let sim = cfg.simulator()?;
    let extractor = cfg.extractor()?;
    let truth = cfg.truth()?;
    let r = rejection_rate_features(
        &sim,
        &extractor,
        cfg.aggregation,
        &truth,
        &truth,
        cfg.n,
        cfg.big_n,
        cfg.alpha,
        cfg.reps,
        cfg.seed,
    )?;
    let report = json!({
        "command": "typeerror",
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "alpha": cfg.alpha,
        "aggregation": cfg.aggregation,
        "truth": truth,
        "n": cfg.n,
        "N": cfg.big_n,
        "reps": r.reps,
        "rejections": r.rejections,
        "failures": r.failures,
        "rate": finite_or_null(r.rate),
        "se": r.se,
        "mean_q_minus_statistic": finite_or_null(r.mean_margin),
        "sd_q_minus_statistic": r.sd_margin,
    });
    match &a.output {
        Some(p) => write_json(p, &report)?,
        None => print_json(&report)?,
    }
    if r.failures * 2 > r.reps {
        return Err(CliError::simulation(format!(
            "{} of {} replications failed to simulate",
            r.failures, r.reps
        )));
    }
    Ok(())
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[h] } else { 0.5 * (v[h - 1] + v[h]) })
}

pub fn realism(a: crate::RealismArgs) -> Result<(), CliError> {
    let series: Vec<Vec<f64>> = match &a.input {
        Some(path) => read_table(path)?.1,
        None => {
            let cfg = match (a.preset, &a.config) {
                (Some(_), Some(_)) => return Err(CliError::invalid("give --preset or --config, not both")),
                (Some(i), None) => MarketConfig::preset(i)
                    .ok_or_else(|| CliError::invalid(format!("preset must be 1..={}", MarketConfig::preset_count())))?,
                (None, Some(p)) => match RunConfig::load(Some(p))?.model {
                    Model::Market(c) => c,
                    _ => return Err(CliError::invalid("realism simulates the market model only")),
                },
                (None, None) => MarketConfig::default(),
            };
            cfg.validate()?;
            if a.reps == 0 {
                return Err(CliError::invalid("--reps must be at least 1"));
            }
            let ids: Vec<u64> = (0..a.reps as u64).collect();
            ids.par_iter()
                .map(|&r| simcal::simulators::market::simulate_market_with(&cfg, &mut derived_rng(a.seed, r)))
                .collect::<simcal::Result<_>>()?
        }
    };
    let reports: Vec<StylizedFactReport> = series
        .iter()
        .map(|s| stylized_fact_report(s))
        .collect::<simcal::Result<_>>()?;
    let abs_acf = |lag: usize| -> Option<f64> {
        median(
            reports
                .iter()
                .filter_map(|r| r.return_autocorr_at_lag.get(&lag).copied().flatten())
                .map(f64::abs)
                .collect(),
        )
    };
    let out = json!({
        "command": "realism",
        "seed": a.seed,
        "runs": reports.len(),
        "median_abs_return_autocorr": {
            "20": abs_acf(20),
            "25": abs_acf(25),
        },
        "median_minutely_kurtosis": median(reports.iter().filter_map(|r| r.minutely_return_kurtosis).collect()),
        "reports": reports,
    });
    match &a.output {
        Some(p) => write_json(p, &out),
        None => print_json(&out),
    }
}

fn read_decisions(path: &Path) -> Result<EligibilitySetResult, CliError> {
    let (header, rows) = read_table(path)?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::invalid(format!("{}: missing column `{name}`", path.display())))
    };
    let (id, eligible, statistic, threshold, error) =
        (col("id")?, col("eligible")?, col("statistic")?, col("threshold")?, col("error_flag")?);
    let thetas: Vec<usize> = (0..header.len()).filter(|&i| header[i].starts_with("theta_")).collect();
    let decisions = rows
        .iter()
        .map(|r| EligibilityDecision {
            candidate: CandidatePoint {
                id: r[id] as usize,
                theta: thetas.iter().map(|&i| r[i]).collect(),
            },
            statistic: r[statistic],
            threshold: r[threshold],
            eligible: r[eligible] != 0.0,
            error: (r[error] != 0.0).then(|| "simulation failed".to_string()),
        })
        .collect::<Vec<_>>();
    Ok(EligibilitySetResult {
        m: decisions.len(),
        decisions,
        alpha: f64::NAN,
        method: AggregationMethod::default(),
        n: 0,
        big_n: 0,
    })
}

fn read_psi(path: &Path) -> Result<BTreeMap<usize, f64>, CliError> {
    let (header, rows) = read_table(path)?;
    if header.len() != 2 || header[0] != "id" || header[1] != "psi" {
        return Err(CliError::invalid(format!("{}: expected columns id,psi", path.display())));
    }
    Ok(rows.iter().map(|r| (r[0] as usize, r[1])).collect())
}

pub fn bounds(a: crate::BoundsArgs, alpha: Option<f64>) -> Result<(), CliError> {
    let alpha = alpha.unwrap_or(0.05);
    let mut out = serde_json::Map::new();
    if let (Some(n), Some(big_n), Some(m), Some(e1), Some(e2)) = (a.n, a.big_n, a.m, a.eps1, a.eps2) {
        out.insert("type2_bound".into(), json!(type2_bound(n, big_n, m, e1, e2)?));
        out.insert("type2_bound_unclamped".into(), json!(type2_bound_unclamped(n, big_n, m, e1, e2)?));
    }
    if let (Some(gap), Some(e1), Some(e2)) = (a.gap, a.eps1, a.eps2) {
        out.insert("alpha".into(), json!(alpha));
        out.insert("min_real_data_size".into(), json!(min_real_data_size(gap, e1, e2, alpha, a.k)?));
    }
    match (&a.decisions, &a.psi) {
        (Some(d), Some(p)) => {
            let result = read_decisions(d)?;
            match ro_bounds(&result, &read_psi(p)?) {
                Ok((lo, hi)) => {
                    out.insert("ro_bounds".into(), json!([lo, hi]));
                    out.insert("empty".into(), json!(false));
                }
                Err(simcal::Error::EmptyEligibilitySet) => {
                    out.insert("ro_bounds".into(), Value::Null);
                    out.insert("empty".into(), json!(true));
                }
                Err(e) => return Err(e.into()),
            }
        }
        (None, None) => {}
        _ => return Err(CliError::invalid("robust bounds need both --decisions and --psi")),
    }
    if out.is_empty() {
        return Err(CliError::invalid(
            "nothing to compute: give --n --big-n --m --eps1 --eps2, --gap --eps1 --eps2, or --decisions --psi",
        ));
    }
    let out = Value::Object(out);
    match &a.output {
        Some(p) => write_json(p, &out),
        None => print_json(&out),
    }
}
