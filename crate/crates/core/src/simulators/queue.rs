//! Single-server FCFS queues started empty.

use rand_distr::{Distribution, Exp, Gamma, LogNormal};
use serde::{Deserialize, Serialize};

use crate::stats::rng::{rng_from_seed, SimRng};
use crate::{Error, Result};

/// Sojourn times (wait plus service) of successive customers.
///
/// Customer `j` arrives `interarrivals[j]` after customer `j-1` (the first after
/// time 0) and needs `services[j]`. Waits follow the Lindley recursion
/// `W_{j+1} = max(0, W_j + S_j - A_{j+1})`.
pub fn fcfs_sojourn_times(interarrivals: &[f64], services: &[f64]) -> Vec<f64> {
    let mut wait = 0.0f64;
    let mut out = Vec::with_capacity(services.len());
    for (j, &s) in services.iter().enumerate() {
        if j > 0 {
            let prev: f64 = out[j - 1];
            wait = (prev - interarrivals[j]).max(0.0);
        }
        out.push(wait + s);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mm1Params {
    pub lambda: f64,
    pub mu: f64,
    #[serde(default = "default_mm1_customers")]
    pub num_customers: usize,
}

fn default_mm1_customers() -> usize {
    100
}

fn default_gg1_customers() -> usize {
    10
}

impl Mm1Params {
    pub fn new(lambda: f64, mu: f64) -> Self {
        Self {
            lambda,
            mu,
            num_customers: default_mm1_customers(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.mu > 0.0 && self.lambda.is_finite() && self.mu.is_finite()) {
            return Err(Error::invalid(format!(
                "M/M/1 rates must be positive, got lambda={} mu={}",
                self.lambda, self.mu
            )));
        }
        if self.num_customers == 0 {
            return Err(Error::invalid("num_customers must be positive"));
        }
        Ok(())
    }

    pub fn sojourns(&self, rng: &mut SimRng) -> Result<Vec<f64>> {
        self.validate()?;
        let arrivals = Exp::new(self.lambda).map_err(|e| Error::invalid(e.to_string()))?;
        let services = Exp::new(self.mu).map_err(|e| Error::invalid(e.to_string()))?;
        let mut a = Vec::with_capacity(self.num_customers);
        let mut s = Vec::with_capacity(self.num_customers);
        for _ in 0..self.num_customers {
            a.push(arrivals.sample(rng));
            s.push(services.sample(rng));
        }
        Ok(fcfs_sojourn_times(&a, &s))
    }

    /// Average sojourn time of the first `num_customers` customers.
    pub fn sample(&self, rng: &mut SimRng) -> Result<f64> {
        let t = self.sojourns(rng)?;
        Ok(t.iter().sum::<f64>() / t.len() as f64)
    }
}

pub fn simulate_mm1(params: &Mm1Params, seed: u64) -> Result<f64> {
    params.sample(&mut rng_from_seed(seed))
}

/// Gamma(`k`, scale `theta`) interarrivals and Lognormal(`mu`, `sigma^2`) services.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gg1Params {
    pub k: f64,
    pub theta: f64,
    pub mu: f64,
    pub sigma: f64,
    #[serde(default = "default_gg1_customers")]
    pub num_customers: usize,
}

impl Gg1Params {
    pub fn new(k: f64, theta: f64, mu: f64, sigma: f64) -> Self {
        Self {
            k,
            theta,
            mu,
            sigma,
            num_customers: default_gg1_customers(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.k > 0.0
            && self.theta > 0.0
            && self.sigma > 0.0
            && [self.k, self.theta, self.mu, self.sigma].iter().all(|v| v.is_finite());
        if !ok {
            return Err(Error::invalid(format!(
                "G/G/1 needs k, theta, sigma > 0 and finite mu, got ({}, {}, {}, {})",
                self.k, self.theta, self.mu, self.sigma
            )));
        }
        if self.num_customers == 0 {
            return Err(Error::invalid("num_customers must be positive"));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut SimRng) -> Result<Vec<f64>> {
        self.validate()?;
        let arrivals = Gamma::new(self.k, self.theta).map_err(|e| Error::invalid(e.to_string()))?;
        let services = LogNormal::new(self.mu, self.sigma).map_err(|e| Error::invalid(e.to_string()))?;
        let mut a = Vec::with_capacity(self.num_customers);
        let mut s = Vec::with_capacity(self.num_customers);
        for _ in 0..self.num_customers {
            a.push(arrivals.sample(rng));
            s.push(services.sample(rng));
        }
        let out = fcfs_sojourn_times(&a, &s);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Simulation("non-finite sojourn time".into()));
        }
        Ok(out)
    }
}

pub fn simulate_gg1(params: &Gg1Params, seed: u64) -> Result<Vec<f64>> {
    params.sample(&mut rng_from_seed(seed))
}
