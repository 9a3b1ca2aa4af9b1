//! Simulated links between clients and the server.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub start_ms: u64,
    pub end_ms: u64,
    /// Sessions cut off from the server for the duration.
    pub side_a: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub seed: u64,
    /// Uniform one-way latency bounds in ms, inclusive.
    pub latency_ms: (u64, u64),
    /// Probability that a fan-out frame is lost.
    pub drop_prob: f64,
    /// Probability that a fan-out frame is delivered twice.
    pub duplicate_prob: f64,
    /// How many later frames may overtake a frame on the same link.
    pub reorder_window: usize,
    pub partitions: Vec<Partition>,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            seed: 0,
            latency_ms: (5, 40),
            drop_prob: 0.0,
            duplicate_prob: 0.0,
            reorder_window: 0,
            partitions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid network config: {0}")]
pub struct InvalidNet(pub String);

impl NetConfig {
    pub fn validate(&self) -> Result<(), InvalidNet> {
        for (name, p) in [("drop_prob", self.drop_prob), ("duplicate_prob", self.duplicate_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(InvalidNet(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        if self.latency_ms.0 > self.latency_ms.1 {
            return Err(InvalidNet(format!("latency bounds {:?} are reversed", self.latency_ms)));
        }
        if let Some(p) = self.partitions.iter().find(|p| p.start_ms > p.end_ms) {
            return Err(InvalidNet(format!("partition {}..{} ends before it starts", p.start_ms, p.end_ms)));
        }
        Ok(())
    }

    pub fn latency(&self, rng: &mut ChaCha8Rng) -> u64 {
        rng.gen_range(self.latency_ms.0..=self.latency_ms.1)
    }
}

/// Delivery times on one directed link.
///
/// Frame `k` may not arrive before any frame `j <= k - window - 1`, so at most
/// `window` successors overtake it. A window of 0 makes the link FIFO.
#[derive(Debug, Default)]
pub struct Link {
    /// Running maximum of the delivery times of frames 0..=k.
    prefix_max: Vec<u64>,
}

impl Link {
    pub fn schedule(&mut self, candidate: u64, window: usize) -> u64 {
        let k = self.prefix_max.len();
        let floor = if k > window { self.prefix_max[k - window - 1] } else { 0 };
        let at = candidate.max(floor);
        let running = self.prefix_max.last().copied().unwrap_or(0).max(at);
        self.prefix_max.push(running);
        at
    }

    /// Latest delivery time scheduled so far.
    pub fn horizon(&self) -> u64 {
        self.prefix_max.last().copied().unwrap_or(0)
    }
}
