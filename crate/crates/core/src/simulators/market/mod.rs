//! A small event-driven market: one market maker, value agents trading on a
//! noisy view of a mean-reverting fundamental, and noise agents sending market
//! orders. Time is measured in nanoseconds from the open; prices in integer ticks.
//!
//! * Value agents wake as a Poisson process with aggregate rate `m * lambda_a`.
//!   Each wakeup observes the fundamental plus `N(0, obs_noise_sd^2)` and sends a
//!   passive limit order of `value_order_size` on the side of `observation - mid`:
//!   one tick inside the touch if the spread allows, otherwise at the touch.
//! * Each noise agent trades once, at a time uniform over the session, with a
//!   market order of size uniform on `1..=noise_size_max` and a fair-coin side.
//! * The market maker wakes every `mm_interval_seconds`, cancels its quotes and
//!   posts `mm_size` on each side at `ref -/+ mm_spread/2` (rounded inward to
//!   ticks), where `ref` is the book mid, else the last trade price, else the
//!   last valid mid.
//!
//! The mid is sampled at the end of every second. When a side of the book is
//! empty the last valid mid is used (`r_bar` before any).

mod book;
mod ou;

pub use book::{Fill, OrderBook, Price, Side};
pub use ou::ou_fundamental_step;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::stats::rng::{rng_from_seed, SimRng};
use crate::{Error, Result};

const NS_PER_SECOND: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarketConfig {
    pub num_value_agents: usize,
    pub num_noise_agents: usize,
    /// Mean fundamental value, ticks.
    pub r_bar: f64,
    /// Mean-reversion rate, per nanosecond.
    pub kappa: f64,
    /// Per-agent value-agent arrival rate, per nanosecond.
    pub lambda_a: f64,
    pub session_seconds: u64,
    /// Fundamental volatility, ticks per square-root nanosecond.
    pub fundamental_vol: f64,
    /// Standard deviation of a value agent's observation noise, ticks.
    pub obs_noise_sd: f64,
    /// Market maker quoted spread, ticks.
    pub mm_spread: u32,
    pub mm_size: u64,
    pub mm_interval_seconds: f64,
    pub noise_size_max: u64,
    pub value_order_size: u64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self::preset(1).expect("preset 1 exists")
    }
}

/// `(m, n, r_bar, kappa, lambda_a)` for the seventeen reference configurations.
const PRESETS: [(usize, usize, f64, f64, f64); 17] = [
    (100, 1000, 1e5, 1.67e-12, 1e-13),
    (105, 1050, 1e5, 1.67e-12, 1e-14),
    (90, 900, 1e5, 1.67e-12, 1e-13),
    (70, 700, 1e5, 1.67e-12, 1e-13),
    (95, 950, 1.1e5, 1.5e-12, 1.1e-13),
    (500, 1000, 1e5, 1.67e-12, 1e-13),
    (70, 700, 1e5, 8e-1, 1e-12),
    (100, 1000, 1e5, 5e-2, 1e-12),
    (200, 2000, 1e5, 1.67e-12, 1e-13),
    (10, 100, 1e5, 1.67e-12, 1e-13),
    (50, 500, 1e5, 1.67e-12, 1e-13),
    (105, 1050, 9e4, 1.8e-12, 8e-14),
    (100, 3000, 1e5, 1.67e-12, 1e-13),
    (10, 10, 1e5, 1.67e-12, 1e-12),
    (200, 1500, 1e5, 1.67e-12, 1e-12),
    (10, 10, 1e5, 1.67e-12, 1e-13),
    (50, 500, 1e5, 1.67e-12, 1e-11),
];

impl MarketConfig {
    /// Reference configuration `index` (1-based, 1 is the ground truth), with
    /// default values for the simulator-internal constants.
    pub fn preset(index: usize) -> Option<Self> {
        let &(m, n, r_bar, kappa, lambda_a) = PRESETS.get(index.checked_sub(1)?)?;
        Some(Self {
            num_value_agents: m,
            num_noise_agents: n,
            r_bar,
            kappa,
            lambda_a,
            session_seconds: 1800,
            fundamental_vol: 1e-4,
            obs_noise_sd: 100.0,
            mm_spread: 2,
            mm_size: 100,
            mm_interval_seconds: 5.0,
            noise_size_max: 100,
            value_order_size: 100,
        })
    }

    pub fn preset_count() -> usize {
        PRESETS.len()
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.r_bar.is_finite() && self.r_bar >= 1.0) {
            return Err(Error::invalid(format!("r_bar must be at least one tick, got {}", self.r_bar)));
        }
        if !finite_nonneg(self.kappa) || !finite_nonneg(self.lambda_a) {
            return Err(Error::invalid("kappa and lambda_a must be finite and nonnegative"));
        }
        if !finite_nonneg(self.fundamental_vol) || !finite_nonneg(self.obs_noise_sd) {
            return Err(Error::invalid("fundamental_vol and obs_noise_sd must be finite and nonnegative"));
        }
        if self.session_seconds < 2 {
            return Err(Error::invalid("session must last at least two seconds"));
        }
        if !(self.mm_interval_seconds.is_finite() && self.mm_interval_seconds > 0.0) {
            return Err(Error::invalid("mm_interval_seconds must be positive"));
        }
        if self.mm_size == 0 || self.noise_size_max == 0 || self.value_order_size == 0 {
            return Err(Error::invalid("order sizes must be positive"));
        }
        Ok(())
    }

    /// Number of returns produced per session.
    pub fn output_len(&self) -> usize {
        self.session_seconds as usize - 1
    }
}

pub fn simulate_market(config: &MarketConfig, seed: u64) -> Result<Vec<f64>> {
    simulate_market_with(config, &mut rng_from_seed(seed))
}

pub fn simulate_market_with(config: &MarketConfig, rng: &mut SimRng) -> Result<Vec<f64>> {
    let mids = simulate_mid_prices(config, rng)?;
    Ok(mids.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// Mid price at the end of each second, `session_seconds` values.
pub fn simulate_mid_prices(config: &MarketConfig, rng: &mut SimRng) -> Result<Vec<f64>> {
    config.validate()?;
    Session::new(config, rng).run()
}

struct Session<'a> {
    cfg: &'a MarketConfig,
    rng: &'a mut SimRng,
    book: OrderBook,
    next_id: u64,
    mm_orders: Vec<u64>,
    last_trade: Option<Price>,
    last_mid: f64,
    fundamental: f64,
    fundamental_time: f64,
}

impl<'a> Session<'a> {
    fn new(cfg: &'a MarketConfig, rng: &'a mut SimRng) -> Self {
        Self {
            cfg,
            rng,
            book: OrderBook::new(),
            next_id: 0,
            mm_orders: Vec::with_capacity(2),
            last_trade: None,
            last_mid: cfg.r_bar,
            fundamental: cfg.r_bar,
            fundamental_time: 0.0,
        }
    }

    fn run(mut self) -> Result<Vec<f64>> {
        let cfg = self.cfg;
        let horizon = cfg.session_seconds as f64 * NS_PER_SECOND;

        let mut noise_times: Vec<f64> = (0..cfg.num_noise_agents)
            .map(|_| self.rng.random::<f64>() * horizon)
            .collect();
        noise_times.sort_unstable_by(f64::total_cmp);
        let mut noise_iter = noise_times.into_iter().peekable();

        let value_rate = cfg.num_value_agents as f64 * cfg.lambda_a;
        let value_gap = if value_rate > 0.0 {
            Some(Exp::new(value_rate).map_err(|e| Error::Simulation(e.to_string()))?)
        } else {
            None
        };
        let mut next_value = match &value_gap {
            Some(d) => d.sample(self.rng),
            None => f64::INFINITY,
        };

        let mm_step = cfg.mm_interval_seconds * NS_PER_SECOND;
        let mut mm_count = 0u64;

        let mut mids = Vec::with_capacity(cfg.session_seconds as usize);
        for second in 1..=cfg.session_seconds {
            let sample_time = second as f64 * NS_PER_SECOND;
            loop {
                let mm_time = mm_count as f64 * mm_step;
                let noise_time = noise_iter.peek().copied().unwrap_or(f64::INFINITY);
                let next = mm_time.min(noise_time).min(next_value);
                if next > sample_time {
                    break;
                }
                if next == mm_time {
                    self.market_maker();
                    mm_count += 1;
                } else if next == next_value {
                    self.value_agent(next_value);
                    next_value += value_gap.as_ref().map_or(f64::INFINITY, |d| d.sample(self.rng));
                } else {
                    noise_iter.next();
                    self.noise_agent();
                }
                if let Some(mid) = self.book.mid() {
                    self.last_mid = mid;
                }
            }
            mids.push(self.last_mid);
        }
        Ok(mids)
    }

    fn id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn record(&mut self, fills: &[Fill]) {
        if let Some(f) = fills.last() {
            self.last_trade = Some(f.price);
        }
    }

    fn market_maker(&mut self) {
        for id in std::mem::take(&mut self.mm_orders) {
            self.book.cancel(id);
        }
        let reference = self
            .book
            .mid()
            .or(self.last_trade.map(|p| p as f64))
            .unwrap_or(self.last_mid);
        let half = self.cfg.mm_spread as f64 / 2.0;
        let bid = (reference - half).ceil() as Price;
        let ask = ((reference + half).floor() as Price).max(bid + 1);
        let size = self.cfg.mm_size;
        for (side, price) in [(Side::Buy, bid.max(1)), (Side::Sell, ask.max(2))] {
            let id = self.id();
            let fills = self.book.submit_limit(id, side, price, size);
            self.record(&fills);
            if self.book.contains(id) {
                self.mm_orders.push(id);
            }
        }
    }

    fn value_agent(&mut self, now: f64) {
        let z: f64 = StandardNormal.sample(self.rng);
        self.fundamental = ou_fundamental_step(
            self.fundamental,
            self.cfg.r_bar,
            self.cfg.kappa,
            now - self.fundamental_time,
            self.cfg.fundamental_vol,
            z,
        );
        self.fundamental_time = now;
        let e: f64 = StandardNormal.sample(self.rng);
        let observation = self.fundamental + self.cfg.obs_noise_sd * e;
        let mid = self.book.mid().unwrap_or(self.last_mid);
        let (bid, ask) = (self.book.best_bid(), self.book.best_ask());
        let (side, price) = if observation > mid {
            let p = match bid {
                Some(b) => b + 1,
                None => mid.floor() as Price,
            };
            let p = match ask {
                Some(a) if p >= a => bid.unwrap_or(a - 1).min(a - 1),
                _ => p,
            };
            (Side::Buy, p)
        } else if observation < mid {
            let p = match ask {
                Some(a) => a - 1,
                None => mid.ceil() as Price,
            };
            let p = match bid {
                Some(b) if p <= b => ask.unwrap_or(b + 1).max(b + 1),
                _ => p,
            };
            (Side::Sell, p)
        } else {
            return;
        };
        if price < 1 {
            return;
        }
        let id = self.id();
        let fills = self.book.submit_limit(id, side, price, self.cfg.value_order_size);
        self.record(&fills);
    }

    fn noise_agent(&mut self) {
        let size = self.rng.random_range(1..=self.cfg.noise_size_max);
        let side = if self.rng.random_bool(0.5) { Side::Buy } else { Side::Sell };
        let id = self.id();
        let fills = self.book.submit_market(id, side, size);
        self.record(&fills);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_length_and_determinism() {
        let cfg = MarketConfig::default();
        let a = simulate_market(&cfg, 42).unwrap();
        assert_eq!(a.len(), 1799);
        assert!(a.iter().all(|r| r.is_finite()));
        assert_eq!(a, simulate_market(&cfg, 42).unwrap());
        assert_ne!(a, simulate_market(&cfg, 43).unwrap());
    }

    #[test]
    fn market_maker_alone_keeps_mid_constant() {
        let cfg = MarketConfig {
            num_value_agents: 0,
            num_noise_agents: 0,
            ..MarketConfig::default()
        };
        assert!(simulate_market(&cfg, 1).unwrap().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn presets() {
        assert_eq!(MarketConfig::preset_count(), 17);
        assert!(MarketConfig::preset(0).is_none());
        assert!(MarketConfig::preset(18).is_none());
        let c14 = MarketConfig::preset(14).unwrap();
        assert_eq!((c14.num_value_agents, c14.num_noise_agents), (10, 10));
        assert_eq!(c14.lambda_a, 1e-12);
        for i in 1..=17 {
            MarketConfig::preset(i).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = MarketConfig {
            r_bar: -1.0,
            ..MarketConfig::default()
        };
        assert!(simulate_market(&cfg, 1).is_err());
    }

    #[test]
    fn value_agents_only_never_cross() {
        // Passive orders alone never trade.
        let cfg = MarketConfig {
            num_noise_agents: 0,
            lambda_a: 1e-11,
            ..MarketConfig::default()
        };
        let mut rng = rng_from_seed(3);
        let mut s = Session::new(&cfg, &mut rng);
        s.market_maker();
        for t in 1..200 {
            s.value_agent(t as f64 * 1e9);
            if let (Some(b), Some(a)) = (s.book.best_bid(), s.book.best_ask()) {
                assert!(b < a);
            }
        }
        assert_eq!(s.book.executed_volume(), (0, 0));
    }
}
