//! Simulated field-bus link between the controller and the converter ports.
//!
//! Each [`Channel`] is a one-way queue with a fixed per-hop latency and an
//! optional seeded loss process. Delivery is ordered by `(deliver_at,
//! sequence)`, so messages posted at the same instant arrive in post order.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::Mode;

/// Slack on delivery-time comparisons, well below any sensible step size.
const DELIVERY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub node: String,
    pub u: f64,
    pub p: f64,
    pub mode: Mode,
    pub soc_pct: Option<f64>,
    pub locked: bool,
    /// Cumulative curve shift the node has applied (kW).
    #[serde(default)]
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Message {
    Telemetry(Telemetry),
    ShiftCommand { node: String, delta_p: f64 },
    LockNotice { node: String },
    Alarm(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// Seconds per hop.
    pub latency: f64,
    pub drop_probability: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            latency: crate::scenario::DEFAULT_LATENCY,
            drop_probability: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub sent_at: f64,
    pub deliver_at: f64,
    pub sequence: u64,
    pub payload: Message,
}

#[derive(Debug, Clone)]
pub struct Channel {
    config: ChannelConfig,
    queue: VecDeque<Envelope>,
    next_sequence: u64,
    dropped: u64,
}

impl Channel {
    pub fn new(config: ChannelConfig) -> Self {
        Self {
            config,
            queue: VecDeque::new(),
            next_sequence: 0,
            dropped: 0,
        }
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    /// Enqueues `msg` for delivery at `now + latency`. Returns `false` when
    /// the loss process drops it.
    pub fn post(&mut self, now: f64, msg: Message) -> bool {
        let sequence = self.next_sequence;
        self.next_sequence += 1;

        if is_dropped(self.config.seed, sequence, self.config.drop_probability) {
            self.dropped += 1;
            return false;
        }

        let envelope = Envelope {
            sent_at: now,
            deliver_at: now + self.config.latency,
            sequence,
            payload: msg,
        };
        let at = self.queue.partition_point(|e| {
            e.deliver_at
                .total_cmp(&envelope.deliver_at)
                .then(e.sequence.cmp(&envelope.sequence))
                .is_lt()
        });
        self.queue.insert(at, envelope);
        true
    }

    /// Removes and returns every message due at `now` (inclusive).
    pub fn poll_due(&mut self, now: f64) -> Vec<Message> {
        let due = self
            .queue
            .partition_point(|e| e.deliver_at <= now + DELIVERY_EPS);
        self.queue.drain(..due).map(|e| e.payload).collect()
    }

    pub fn pending(&self) -> impl Iterator<Item = &Envelope> {
        self.queue.iter()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn posted(&self) -> u64 {
        self.next_sequence
    }
}

/// Loss decision as a pure function of `(seed, sequence)`.
fn is_dropped(seed: u64, sequence: u64, probability: f64) -> bool {
    if probability <= 0.0 {
        return false;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sequence);
    rng.gen::<f64>() < probability
}
