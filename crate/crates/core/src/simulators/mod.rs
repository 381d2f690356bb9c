//! Built-in parametric simulators and the black-box interface used by calibration.

pub mod market;
pub mod queue;

pub use market::{simulate_market, MarketConfig};
pub use queue::{fcfs_sojourn_times, simulate_gg1, simulate_mm1, Gg1Params, Mm1Params};

use serde::{Deserialize, Serialize};

use crate::stats::rng::SimRng;
use crate::{Error, Result};

/// A black box mapping a parameter vector to one output vector per call.
pub trait Simulator: Sync {
    /// Length of every output vector.
    fn output_dim(&self) -> usize;

    fn simulate(&self, theta: &[f64], rng: &mut SimRng) -> Result<Vec<f64>>;
}

/// One of the built-in models with all of its parameters set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    Mm1(Mm1Params),
    Gg1(Gg1Params),
    Market(MarketConfig),
}

impl Model {
    /// Names of the calibratable parameters, in vector order.
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Model::Mm1(_) => &["lambda", "mu"],
            Model::Gg1(_) => &["k", "theta", "mu", "sigma"],
            Model::Market(_) => &["m", "n", "r_bar", "kappa", "lambda_a"],
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            Model::Mm1(p) => vec![p.lambda, p.mu],
            Model::Gg1(p) => vec![p.k, p.theta, p.mu, p.sigma],
            Model::Market(c) => vec![
                c.num_value_agents as f64,
                c.num_noise_agents as f64,
                c.r_bar,
                c.kappa,
                c.lambda_a,
            ],
        }
    }

    /// Copy with the calibratable parameters replaced. Agent counts are rounded
    /// to the nearest integer.
    pub fn with_params(&self, values: &[f64]) -> Result<Model> {
        let names = self.param_names();
        if values.len() != names.len() {
            return Err(Error::invalid(format!(
                "expected {} parameters ({}), got {}",
                names.len(),
                names.join(", "),
                values.len()
            )));
        }
        let model = match self {
            Model::Mm1(p) => Model::Mm1(Mm1Params {
                lambda: values[0],
                mu: values[1],
                ..*p
            }),
            Model::Gg1(p) => Model::Gg1(Gg1Params {
                k: values[0],
                theta: values[1],
                mu: values[2],
                sigma: values[3],
                ..*p
            }),
            Model::Market(c) => {
                let count = |v: f64, name: &str| -> Result<usize> {
                    if v.is_finite() && v > -0.5 {
                        Ok(v.round() as usize)
                    } else {
                        Err(Error::invalid(format!("{name} must be a nonnegative count, got {v}")))
                    }
                };
                Model::Market(MarketConfig {
                    num_value_agents: count(values[0], "m")?,
                    num_noise_agents: count(values[1], "n")?,
                    r_bar: values[2],
                    kappa: values[3],
                    lambda_a: values[4],
                    ..c.clone()
                })
            }
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Mm1(p) => p.validate(),
            Model::Gg1(p) => p.validate(),
            Model::Market(c) => c.validate(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Model::Mm1(_) => 1,
            Model::Gg1(p) => p.num_customers,
            Model::Market(c) => c.output_len(),
        }
    }

    /// One simulation run.
    pub fn run(&self, rng: &mut SimRng) -> Result<Vec<f64>> {
        match self {
            Model::Mm1(p) => Ok(vec![p.sample(rng)?]),
            Model::Gg1(p) => p.sample(rng),
            Model::Market(c) => market::simulate_market_with(c, rng),
        }
    }
}

/// A model whose parameters at `free` indices come from the calibration
/// vector; the rest stay at the values in `base`.
#[derive(Debug, Clone)]
pub struct Calibrated {
    base: Model,
    free: Vec<usize>,
}

impl Calibrated {
    pub fn new(base: Model, free: Vec<usize>) -> Result<Self> {
        let d = base.param_names().len();
        if free.is_empty() {
            return Err(Error::invalid("at least one free parameter is required"));
        }
        let mut seen = vec![false; d];
        for &i in &free {
            if i >= d || std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("bad or repeated free parameter index {i}")));
            }
        }
        Ok(Self { base, free })
    }

    /// Free parameters given by name.
    pub fn by_name(base: Model, names: &[&str]) -> Result<Self> {
        let all = base.param_names();
        let free = names
            .iter()
            .map(|n| {
                all.iter()
                    .position(|a| a == n)
                    .ok_or_else(|| Error::invalid(format!("unknown parameter `{n}`; expected one of {}", all.join(", "))))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(base, free)
    }

    pub fn base(&self) -> &Model {
        &self.base
    }

    pub fn free_names(&self) -> Vec<&'static str> {
        let names = self.base.param_names();
        self.free.iter().map(|&i| names[i]).collect()
    }

    pub fn model_at(&self, theta: &[f64]) -> Result<Model> {
        if theta.len() != self.free.len() {
            return Err(Error::invalid(format!(
                "expected {} free parameters, got {}",
                self.free.len(),
                theta.len()
            )));
        }
        let mut full = self.base.params();
        for (&i, &v) in self.free.iter().zip(theta) {
            full[i] = v;
        }
        self.base.with_params(&full)
    }
}

impl Simulator for Calibrated {
    fn output_dim(&self) -> usize {
        self.base.output_dim()
    }

    fn simulate(&self, theta: &[f64], rng: &mut SimRng) -> Result<Vec<f64>> {
        self.model_at(theta)?.run(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::rng::rng_from_seed;

    #[test]
    fn overlay_of_free_parameters() {
        let sim = Calibrated::by_name(Model::Mm1(Mm1Params::new(0.5, 1.0)), &["mu"]).unwrap();
        assert_eq!(sim.model_at(&[1.5]).unwrap().params(), vec![0.5, 1.5]);
        assert!(sim.model_at(&[-1.0]).is_err());
        assert!(sim.model_at(&[1.0, 2.0]).is_err());
        assert!(Calibrated::by_name(Model::Mm1(Mm1Params::new(0.5, 1.0)), &["nu"]).is_err());
        assert!(Calibrated::new(Model::Mm1(Mm1Params::new(0.5, 1.0)), vec![1, 1]).is_err());
    }

    #[test]
    fn market_counts_are_rounded() {
        let base = Model::Market(MarketConfig::default());
        let m = base.with_params(&[9.6, 100.2, 1e5, 1e-12, 1e-13]).unwrap();
        let Model::Market(c) = m else { unreachable!() };
        assert_eq!((c.num_value_agents, c.num_noise_agents), (10, 100));
        assert!(base.with_params(&[-3.0, 1.0, 1e5, 1e-12, 1e-13]).is_err());
    }

    #[test]
    fn output_dims() {
        let mut rng = rng_from_seed(1);
        for model in [
            Model::Mm1(Mm1Params::new(0.5, 1.0)),
            Model::Gg1(Gg1Params::new(1.0, 1.0, -2.0, 2.0)),
        ] {
            assert_eq!(model.run(&mut rng).unwrap().len(), model.output_dim());
        }
    }
}
