//! In-process simulation of the strictly sublinear MPC model.
//!
//! A [`Cluster`] runs in one of two modes. In ledger-only mode primitives run
//! sequentially and only their canonical round cost is charged. In enforced
//! mode records are physically spread over virtual machines of `S` words,
//! every message is metered, and a superstep in which any machine sends plus
//! receives more than `S` words aborts with [`MpcError::IoExceeded`].

mod network;
mod ops;
mod sort;
mod tree;

use std::collections::BTreeMap;

use thiserror::Error;

pub use network::Network;
pub use ops::Grouped;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpcError {
    #[error("invalid cluster configuration: {0}")]
    InvalidConfig(String),
    #[error("capacity exceeded: need {needed} words, cluster holds {available}")]
    CapacityExceeded { needed: u64, available: u64 },
    #[error("records of {words} words do not fit the tree payload budget of S = {space}")]
    RecordTooWide { words: usize, space: u64 },
    #[error("key multiplicity {multiplicity} exceeds S = {space} and salting is disabled")]
    SkewOverflow { multiplicity: usize, space: u64 },
    #[error("superstep {superstep}: machine {machine} moved {words} words, S = {space}")]
    IoExceeded { superstep: u64, machine: usize, words: u64, space: u64 },
}

/// Fixed-width records that can be sorted across machines.
pub trait Record: Clone + Ord + std::fmt::Debug {
    const WORDS: usize;
}

macro_rules! scalar_record {
    ($($t:ty),*) => { $(impl Record for $t { const WORDS: usize = 1; })* };
}
scalar_record!(u8, u16, u32, u64, usize, i32, i64, bool);

impl<A: Record, B: Record> Record for (A, B) {
    const WORDS: usize = A::WORDS + B::WORDS;
}
impl<A: Record, B: Record, C: Record> Record for (A, B, C) {
    const WORDS: usize = A::WORDS + B::WORDS + C::WORDS;
}
impl<A: Record, B: Record, C: Record, D: Record> Record for (A, B, C, D) {
    const WORDS: usize = A::WORDS + B::WORDS + C::WORDS + D::WORDS;
}

/// An `f64` ordered by `total_cmp`, one word wide.
#[derive(Debug, Clone, Copy)]
pub struct OrdF64(pub f64);

impl PartialEq for OrdF64 {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0).is_eq()
    }
}
impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
impl Record for OrdF64 {
    const WORDS: usize = 1;
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClusterConfig {
    pub n: usize,
    pub delta: f64,
    /// Words per machine, `ceil(n^delta)` and at least 2.
    pub space: u64,
    pub machines: u64,
    pub total_space_cap: u64,
    pub c_sort: f64,
    pub c_tree: f64,
    pub enforce: bool,
    pub salting: bool,
}

impl ClusterConfig {
    /// `M = ceil(4 ceil(log2 n) n^2 / S)` machines, enough for the full edge
    /// set with a logarithmic factor to spare.
    pub fn new(n: usize, delta: f64) -> Result<Self, MpcError> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(MpcError::InvalidConfig(format!("delta must lie in (0,1), got {delta}")));
        }
        let n = n.max(2);
        let space = ((n as f64).powf(delta).ceil() as u64).max(2);
        let slack = 4 * (n as f64).log2().ceil().max(1.0) as u64;
        let machines = (slack * (n as u64) * (n as u64)).div_ceil(space);
        Ok(ClusterConfig {
            n,
            delta,
            space,
            machines,
            total_space_cap: machines.saturating_mul(space),
            c_sort: 4.0,
            c_tree: 1.0,
            enforce: false,
            salting: true,
        })
    }

    pub fn enforced(mut self, on: bool) -> Self {
        self.enforce = on;
        self
    }

    pub fn with_constants(mut self, c_sort: f64, c_tree: f64) -> Self {
        self.c_sort = c_sort;
        self.c_tree = c_tree;
        self
    }

    /// Canonical charge of one distributed sort, `ceil(c_sort / delta)`.
    pub fn sort_rounds(&self) -> u64 {
        (self.c_sort / self.delta).ceil() as u64
    }

    /// Canonical charge of one tree broadcast or aggregation, `ceil(c_tree / delta)`.
    pub fn tree_rounds(&self) -> u64 {
        (self.c_tree / self.delta).ceil() as u64
    }
}

/// Rounds charged per phase plus the metered peaks of enforced mode.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RoundLedger {
    pub rounds_by_phase: BTreeMap<String, u64>,
    /// Supersteps actually executed in enforced mode, per phase.
    pub supersteps_by_phase: BTreeMap<String, u64>,
    pub peak_machine_io: u64,
    pub peak_machine_storage: u64,
}

impl RoundLedger {
    pub fn charge(&mut self, phase: &str, rounds: u64) {
        *self.rounds_by_phase.entry(phase.to_string()).or_insert(0) += rounds;
    }

    pub fn total_rounds(&self) -> u64 {
        self.rounds_by_phase.values().sum()
    }

    pub fn rounds(&self, phase: &str) -> u64 {
        self.rounds_by_phase.get(phase).copied().unwrap_or(0)
    }

    pub fn total_supersteps(&self) -> u64 {
        self.supersteps_by_phase.values().sum()
    }

    pub fn absorb(&mut self, other: &RoundLedger) {
        for (k, v) in &other.rounds_by_phase {
            *self.rounds_by_phase.entry(k.clone()).or_insert(0) += v;
        }
        for (k, v) in &other.supersteps_by_phase {
            *self.supersteps_by_phase.entry(k.clone()).or_insert(0) += v;
        }
        self.peak_machine_io = self.peak_machine_io.max(other.peak_machine_io);
        self.peak_machine_storage = self.peak_machine_storage.max(other.peak_machine_storage);
    }

    /// `{phase: rounds, ..., "peak_machine_io": .., "peak_machine_storage": ..}`
    pub fn to_json(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        for (k, v) in &self.rounds_by_phase {
            m.insert(k.clone(), (*v).into());
        }
        m.insert("peak_machine_io".into(), self.peak_machine_io.into());
        m.insert("peak_machine_storage".into(), self.peak_machine_storage.into());
        serde_json::Value::Object(m)
    }
}

/// Records laid out over machines, in machine order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement<R> {
    pub machines: Vec<Vec<R>>,
}

impl<R: Clone> Placement<R> {
    pub fn len(&self) -> usize {
        self.machines.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flatten(&self) -> Vec<R> {
        self.machines.iter().flatten().cloned().collect()
    }

    pub fn into_flat(self) -> Vec<R> {
        self.machines.into_iter().flatten().collect()
    }
}

pub struct Cluster {
    config: ClusterConfig,
    ledger: RoundLedger,
    net: Network,
}

impl Cluster {
    pub fn new(config: ClusterConfig) -> Self {
        let net = Network::new(config.space, config.enforce);
        Cluster { config, ledger: RoundLedger::default(), net }
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.config
    }

    pub fn ledger(&self) -> &RoundLedger {
        &self.ledger
    }

    pub fn take_ledger(&mut self) -> RoundLedger {
        let mut l = std::mem::take(&mut self.ledger);
        l.peak_machine_io = self.net.peak_io();
        l.peak_machine_storage = self.net.peak_storage();
        l
    }

    /// Snapshot including the metered peaks.
    pub fn report(&self) -> RoundLedger {
        let mut l = self.ledger.clone();
        l.peak_machine_io = self.net.peak_io();
        l.peak_machine_storage = self.net.peak_storage();
        l
    }

    pub fn is_enforced(&self) -> bool {
        self.config.enforce
    }

    fn steps_since(&mut self, phase: &str, start: u64) {
        let used = self.net.supersteps() - start;
        if used > 0 {
            *self.ledger.supersteps_by_phase.entry(phase.to_string()).or_insert(0) += used;
        }
    }

    pub(crate) fn charge_sort(&mut self, phase: &str) {
        let r = self.config.sort_rounds();
        self.ledger.charge(phase, r);
    }

    pub(crate) fn charge_tree(&mut self, phase: &str) {
        let r = self.config.tree_rounds();
        self.ledger.charge(phase, r);
    }
}
