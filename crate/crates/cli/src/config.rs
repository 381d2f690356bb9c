//! Run configuration: a JSON document whose fields can be overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simcal::aggregation::AggregationMethod;
use simcal::eligibility::{CandidateMode, Dimension, ParameterSpace};
use simcal::features::{ExtractorSpec, NeuralNet, SummaryConfig};
use simcal::simulators::{Calibrated, Gg1Params, MarketConfig, Mm1Params, Model};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Base model; its parameter values are the truth unless `truth` is given.
    pub model: Model,
    /// Parameters to calibrate. Empty means all of them.
    pub free: Vec<String>,
    /// Box for the free parameters, in the same order. Empty means the model default.
    pub space: Vec<Dimension>,
    pub truth: Option<Vec<f64>>,
    pub m: usize,
    pub n: usize,
    #[serde(rename = "N", alias = "big_n")]
    pub big_n: usize,
    pub alpha: f64,
    pub candidates: CandidateMode,
    pub aggregation: AggregationMethod,
    pub extractor: Option<ExtractorSpec>,
    /// JSON file holding an extractor spec or a bare neural weights document.
    pub extractor_file: Option<PathBuf>,
    /// Observed outputs, one run per row. Synthesized at the truth when absent.
    pub real_data: Option<PathBuf>,
    pub seed: u64,
    pub reps: usize,
    pub output: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    /// Candidates evaluated per streaming block.
    pub chunk: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: Model::Mm1(Mm1Params::new(0.5, 1.0)),
            free: Vec::new(),
            space: Vec::new(),
            truth: None,
            m: 1000,
            n: 100,
            big_n: 100,
            alpha: 0.05,
            candidates: CandidateMode::UniformRandom,
            aggregation: AggregationMethod::default(),
            extractor: None,
            extractor_file: None,
            real_data: None,
            seed: 0,
            reps: 500,
            output: None,
            summary: None,
            chunk: 4096,
        }
    }
}

pub fn default_model(name: &str) -> Result<Model, CliError> {
    match name {
        "mm1" => Ok(Model::Mm1(Mm1Params::new(0.5, 1.0))),
        "gg1" => Ok(Model::Gg1(Gg1Params::new(1.0, 1.0, -2.0, 2.0))),
        "market" => Ok(Model::Market(MarketConfig::default())),
        other => Err(CliError::invalid(format!("unknown model `{other}` (expected mm1, gg1 or market)"))),
    }
}

fn default_bounds(model: &Model, name: &str) -> Option<(f64, f64)> {
    match (model, name) {
        (Model::Mm1(_), "lambda" | "mu") => Some((0.0, 2.0)),
        (Model::Gg1(_), "k" | "theta" | "sigma") => Some((0.0, 5.0)),
        (Model::Gg1(_), "mu") => Some((-5.0, 5.0)),
        _ => None,
    }
}

pub fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::invalid(format!("config {}: {e}", p.display())))
            }
        }
    }

    pub fn free_names(&self) -> Vec<String> {
        if self.free.is_empty() {
            self.model.param_names().iter().map(|s| s.to_string()).collect()
        } else {
            self.free.clone()
        }
    }

    pub fn simulator(&self) -> Result<Calibrated, CliError> {
        let names = self.free_names();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        Ok(Calibrated::by_name(self.model.clone(), &refs)?)
    }

    pub fn space(&self) -> Result<ParameterSpace, CliError> {
        let names = self.free_names();
        if self.space.is_empty() {
            let dims = names
                .iter()
                .map(|n| {
                    let (lower, upper) = default_bounds(&self.model, n).ok_or_else(|| {
                        CliError::invalid(format!("no default bounds for `{n}`; give `space` in the config"))
                    })?;
                    Ok(Dimension {
                        name: n.clone(),
                        lower,
                        upper,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            return Ok(ParameterSpace::new(dims)?);
        }
        let given: Vec<&str> = self.space.iter().map(|d| d.name.as_str()).collect();
        if given != names.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(CliError::invalid(format!(
                "space dimensions {given:?} must match the free parameters {names:?}"
            )));
        }
        Ok(ParameterSpace::new(self.space.clone())?)
    }

    /// Truth values of the free parameters.
    pub fn truth(&self) -> Result<Vec<f64>, CliError> {
        let names = self.free_names();
        match &self.truth {
            Some(t) if t.len() != names.len() => Err(CliError::invalid(format!(
                "truth has {} values for {} free parameters",
                t.len(),
                names.len()
            ))),
            Some(t) => Ok(t.clone()),
            None => {
                let all = self.model.param_names();
                let values = self.model.params();
                Ok(names
                    .iter()
                    .map(|n| values[all.iter().position(|a| a == n).unwrap_or(0)])
                    .collect())
            }
        }
    }

    pub fn extractor(&self) -> Result<ExtractorSpec, CliError> {
        if self.extractor.is_some() && self.extractor_file.is_some() {
            return Err(CliError::invalid("give either `extractor` or `extractor_file`, not both"));
        }
        let spec = if let Some(path) = &self.extractor_file {
            load_extractor(path)?
        } else if let Some(spec) = &self.extractor {
            spec.clone()
        } else {
            match &self.model {
                Model::Market(_) => ExtractorSpec::SummaryStats(SummaryConfig::default()),
                m => ExtractorSpec::Identity { dim: m.output_dim() },
            }
        };
        spec.validate()?;
        if let Some(d) = spec.input_dim() {
            if d != self.model.output_dim() {
                return Err(CliError::invalid(format!(
                    "extractor expects inputs of length {d} but the model emits {}",
                    self.model.output_dim()
                )));
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        check_alpha(self.alpha)?;
        self.model.validate()?;
        if self.n == 0 || self.big_n == 0 {
            return Err(CliError::invalid("n and N must be positive"));
        }
        if self.reps == 0 {
            return Err(CliError::invalid("reps must be at least 1"));
        }
        for path in [&self.real_data, &self.extractor_file].into_iter().flatten() {
            if !path.is_file() {
                return Err(CliError::invalid(format!("file {} does not exist", path.display())));
            }
        }
        self.simulator()?;
        self.space()?;
        let truth = self.truth()?;
        self.simulator()?.model_at(&truth)?;
        self.extractor()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        crate::hash_text(&serde_json::to_string(self).expect("config serializes"))
    }
}

pub fn load_extractor(path: &Path) -> Result<ExtractorSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    match ExtractorSpec::from_json(&text) {
        Ok(spec) => Ok(spec),
        Err(first) => match NeuralNet::from_json(&text) {
            Ok(net) => Ok(ExtractorSpec::Neural(net)),
            Err(_) => Err(first.into()),
        },
    }
}
