//! Single-security limit order book with price-then-FIFO matching.

use std::collections::{BTreeMap, HashMap, VecDeque};

/// Price in integer ticks.
pub type Price = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fill {
    pub maker: u64,
    pub taker: u64,
    pub price: Price,
    pub size: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Resting {
    id: u64,
    size: u64,
    /// Arrival sequence number; FIFO key within a level.
    seq: u64,
}

#[derive(Debug, Default, Clone)]
pub struct OrderBook {
    bids: BTreeMap<Price, VecDeque<Resting>>,
    asks: BTreeMap<Price, VecDeque<Resting>>,
    index: HashMap<u64, (Side, Price)>,
    seq: u64,
    bought: u64,
    sold: u64,
}

impl OrderBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn best_bid(&self) -> Option<Price> {
        self.bids.keys().next_back().copied()
    }

    pub fn best_ask(&self) -> Option<Price> {
        self.asks.keys().next().copied()
    }

    /// Average of best bid and best ask, when both sides are nonempty.
    pub fn mid(&self) -> Option<f64> {
        Some((self.best_bid()? + self.best_ask()?) as f64 / 2.0)
    }

    /// Executed buy and sell volume since construction.
    pub fn executed_volume(&self) -> (u64, u64) {
        (self.bought, self.sold)
    }

    pub fn contains(&self, id: u64) -> bool {
        self.index.contains_key(&id)
    }

    /// `(price, total size)` per level, best first.
    pub fn depth(&self, side: Side) -> Vec<(Price, u64)> {
        let total = |(p, q): (&Price, &VecDeque<Resting>)| (*p, q.iter().map(|r| r.size).sum());
        match side {
            Side::Buy => self.bids.iter().rev().map(total).collect(),
            Side::Sell => self.asks.iter().map(total).collect(),
        }
    }

    /// Resting order ids on one side in execution-priority order.
    pub fn queue(&self, side: Side) -> Vec<(u64, Price, u64)> {
        let flat = |(p, q): (&Price, &VecDeque<Resting>)| {
            q.iter().map(move |r| (r.id, *p, r.size)).collect::<Vec<_>>()
        };
        match side {
            Side::Buy => self.bids.iter().rev().flat_map(flat).collect(),
            Side::Sell => self.asks.iter().flat_map(flat).collect(),
        }
    }

    /// Match against the opposite side, then rest any remainder at `price`.
    pub fn submit_limit(&mut self, id: u64, side: Side, price: Price, size: u64) -> Vec<Fill> {
        let (fills, left) = self.take(id, side, Some(price), size);
        if left > 0 {
            let seq = self.next_seq();
            let levels = match side {
                Side::Buy => &mut self.bids,
                Side::Sell => &mut self.asks,
            };
            levels.entry(price).or_default().push_back(Resting { id, size: left, seq });
            self.index.insert(id, (side, price));
        }
        fills
    }

    /// Match against the opposite side at any price; an unfilled remainder is dropped.
    pub fn submit_market(&mut self, id: u64, side: Side, size: u64) -> Vec<Fill> {
        self.take(id, side, None, size).0
    }

    /// Remove a resting order. Returns whether it was present.
    pub fn cancel(&mut self, id: u64) -> bool {
        let Some((side, price)) = self.index.remove(&id) else {
            return false;
        };
        let levels = match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        };
        if let Some(queue) = levels.get_mut(&price) {
            queue.retain(|r| r.id != id);
            if queue.is_empty() {
                levels.remove(&price);
            }
        }
        true
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn take(&mut self, taker: u64, side: Side, limit: Option<Price>, mut size: u64) -> (Vec<Fill>, u64) {
        let mut fills = Vec::new();
        while size > 0 {
            let best = match side {
                Side::Buy => self.best_ask(),
                Side::Sell => self.best_bid(),
            };
            let Some(level) = best else { break };
            let crosses = match (side, limit) {
                (_, None) => true,
                (Side::Buy, Some(p)) => level <= p,
                (Side::Sell, Some(p)) => level >= p,
            };
            if !crosses {
                break;
            }
            let levels = match side {
                Side::Buy => &mut self.asks,
                Side::Sell => &mut self.bids,
            };
            let queue = levels.get_mut(&level).expect("best level exists");
            while size > 0 {
                let Some(front) = queue.front_mut() else { break };
                let q = front.size.min(size);
                front.size -= q;
                size -= q;
                fills.push(Fill {
                    maker: front.id,
                    taker,
                    price: level,
                    size: q,
                });
                self.bought += q;
                self.sold += q;
                if front.size == 0 {
                    let done = queue.pop_front().expect("front exists");
                    self.index.remove(&done.id);
                }
            }
            if queue.is_empty() {
                levels.remove(&level);
            }
        }
        (fills, size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::rng::rng_from_seed;
    use rand::Rng;

    /// Quadratic reference matcher over a flat list of resting orders.
    #[derive(Default)]
    struct Brute {
        resting: Vec<(u64, Side, Price, u64, u64)>,
        seq: u64,
    }

    impl Brute {
        fn submit(&mut self, id: u64, side: Side, limit: Option<Price>, mut size: u64) -> Vec<Fill> {
            let mut fills = Vec::new();
            while size > 0 {
                let best = self
                    .resting
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| r.1 == side.opposite())
                    .filter(|(_, r)| match (side, limit) {
                        (_, None) => true,
                        (Side::Buy, Some(p)) => r.2 <= p,
                        (Side::Sell, Some(p)) => r.2 >= p,
                    })
                    .min_by_key(|(_, r)| match side {
                        Side::Buy => (r.2, r.4),
                        Side::Sell => (-r.2, r.4),
                    })
                    .map(|(i, _)| i);
                let Some(i) = best else { break };
                let q = self.resting[i].3.min(size);
                fills.push(Fill {
                    maker: self.resting[i].0,
                    taker: id,
                    price: self.resting[i].2,
                    size: q,
                });
                size -= q;
                self.resting[i].3 -= q;
                if self.resting[i].3 == 0 {
                    self.resting.remove(i);
                }
            }
            if let (Some(p), true) = (limit, size > 0) {
                self.seq += 1;
                self.resting.push((id, side, p, size, self.seq));
            }
            fills
        }

        fn cancel(&mut self, id: u64) -> bool {
            let before = self.resting.len();
            self.resting.retain(|r| r.0 != id);
            before != self.resting.len()
        }

        fn queue(&self, side: Side) -> Vec<(u64, Price, u64)> {
            let mut v: Vec<_> = self.resting.iter().filter(|r| r.1 == side).collect();
            v.sort_by_key(|r| match side {
                Side::Buy => (-r.2, r.4),
                Side::Sell => (r.2, r.4),
            });
            v.iter().map(|r| (r.0, r.2, r.3)).collect()
        }
    }

    #[test]
    fn price_then_time_priority() {
        let mut book = OrderBook::new();
        book.submit_limit(1, Side::Sell, 101, 5);
        book.submit_limit(2, Side::Sell, 100, 5);
        book.submit_limit(3, Side::Sell, 100, 5);
        let fills = book.submit_market(9, Side::Buy, 12);
        let order: Vec<(u64, u64)> = fills.iter().map(|f| (f.maker, f.size)).collect();
        assert_eq!(order, vec![(2, 5), (3, 5), (1, 2)]);
        assert_eq!(book.depth(Side::Sell), vec![(101, 3)]);
    }

    #[test]
    fn marketable_limit_rests_remainder() {
        let mut book = OrderBook::new();
        book.submit_limit(1, Side::Sell, 100, 5);
        let fills = book.submit_limit(2, Side::Buy, 101, 8);
        assert_eq!(fills.len(), 1);
        assert_eq!(book.best_bid(), Some(101));
        assert_eq!(book.best_ask(), None);
        assert_eq!(book.mid(), None);
        assert!(book.cancel(2));
        assert!(!book.cancel(2));
        assert_eq!(book.best_bid(), None);
    }

    #[test]
    fn matches_brute_force_on_random_sequences() {
        for case in 0..300u64 {
            let mut rng = rng_from_seed(case);
            let mut book = OrderBook::new();
            let mut brute = Brute::default();
            let count = rng.random_range(1..=50);
            for id in 0..count {
                let side = if rng.random_bool(0.5) { Side::Buy } else { Side::Sell };
                let size = rng.random_range(1..=10);
                match rng.random_range(0..10) {
                    0 => {
                        let victim = rng.random_range(0..=id);
                        assert_eq!(book.cancel(victim), brute.cancel(victim));
                    }
                    1 | 2 => {
                        assert_eq!(book.submit_market(id, side, size), brute.submit(id, side, None, size));
                    }
                    _ => {
                        let price = rng.random_range(95..=105);
                        assert_eq!(
                            book.submit_limit(id, side, price, size),
                            brute.submit(id, side, Some(price), size)
                        );
                    }
                }
                assert_eq!(book.queue(Side::Buy), brute.queue(Side::Buy));
                assert_eq!(book.queue(Side::Sell), brute.queue(Side::Sell));
                if let (Some(b), Some(a)) = (book.best_bid(), book.best_ask()) {
                    assert!(b < a);
                }
                let (bought, sold) = book.executed_volume();
                assert_eq!(bought, sold);
            }
        }
    }
}
