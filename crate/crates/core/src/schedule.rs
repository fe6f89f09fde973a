//! Derived parameters and the canonical round schedule.
//!
//! Both executors perform the same sequence of grouped-sort operations, each
//! costing one distributed sort plus one tree broadcast. The counts below are
//! a pure function of the parameters, never of the data.

use serde::{Deserialize, Serialize};

use crate::mpc::{ClusterConfig, RoundLedger};

pub const PHASE_MPX: &str = "mpx";
pub const PHASE_INTERSECT: &str = "intersect";
pub const PHASE_COMPRESS: &str = "compress";
pub const PHASE_BORUVKA: &str = "boruvka";
pub const PHASE_JOIN: &str = "join";

/// Grouped operations per level outside the round loops.
pub const MPX_OPS: u64 = 1;
pub const INTERSECT_OPS: u64 = 1;
pub const COMPRESS_SETUP_OPS: u64 = 2;
pub const COMPRESS_ROUND_OPS: u64 = 5;
pub const COMPRESS_FINAL_OPS: u64 = 5;
pub const BORUVKA_SETUP_OPS: u64 = 2;
pub const BORUVKA_ROUND_OPS: u64 = 5;
pub const JOIN_OPS: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    pub alpha: u64,
    /// Index of the top level; thresholds are `alpha^k` for `k = 0..=top`.
    pub top: u32,
    pub compress_rounds: u64,
    pub boruvka_rounds: u64,
}

/// `ceil(log_{4/3}(alpha^3 / eps))`
pub fn default_rounds(alpha: u64, eps: f64) -> u64 {
    let x = (3.0 * (alpha as f64).ln() - eps.ln()) / (4.0f64 / 3.0).ln();
    x.ceil().max(1.0) as u64
}

/// `max(2, ceil(c_alpha ln^2 n / eps))`
pub fn default_alpha(n: usize, eps: f64, c_alpha: f64) -> u64 {
    let ln = (n.max(1) as f64).ln();
    ((c_alpha * ln * ln / eps).ceil() as u64).max(2)
}

/// Smallest `L` with `alpha^L >= w`.
pub fn top_level(alpha: u64, w: u64) -> u32 {
    let mut l = 0;
    let mut p: u64 = 1;
    while p < w {
        p = p.saturating_mul(alpha);
        l += 1;
    }
    l
}

impl Params {
    pub fn derive(n: usize, max_weight: u64, eps: f64, c_alpha: f64) -> Self {
        let alpha = default_alpha(n, eps, c_alpha);
        Self::with_alpha(alpha, max_weight, eps)
    }

    pub fn with_alpha(alpha: u64, max_weight: u64, eps: f64) -> Self {
        let r = default_rounds(alpha, eps);
        Params { alpha, top: top_level(alpha, max_weight), compress_rounds: r, boruvka_rounds: r }
    }

    pub fn levels(&self) -> u64 {
        self.top as u64 + 1
    }

    pub fn threshold(&self, k: u32) -> u64 {
        crate::tree::power(self.alpha, k)
    }

    /// Grouped operations charged to each phase over the whole run.
    pub fn ops_by_phase(&self) -> [(&'static str, u64); 5] {
        let l = self.levels();
        [
            (PHASE_MPX, l * MPX_OPS),
            (PHASE_INTERSECT, l * INTERSECT_OPS),
            (PHASE_COMPRESS, l * (COMPRESS_SETUP_OPS + COMPRESS_ROUND_OPS * self.compress_rounds + COMPRESS_FINAL_OPS)),
            (PHASE_BORUVKA, l * (BORUVKA_SETUP_OPS + BORUVKA_ROUND_OPS * self.boruvka_rounds)),
            (PHASE_JOIN, l * JOIN_OPS),
        ]
    }

    /// `(L+1)(15 + 5r + 5T)`
    pub fn total_ops(&self) -> u64 {
        self.levels() * (15 + 5 * self.compress_rounds + 5 * self.boruvka_rounds)
    }

    /// The ledger either executor must produce, without peaks.
    pub fn closed_form(&self, cluster: &ClusterConfig) -> RoundLedger {
        let per_op = cluster.sort_rounds() + cluster.tree_rounds();
        let mut l = RoundLedger::default();
        for (phase, ops) in self.ops_by_phase() {
            l.charge(phase, ops * per_op);
        }
        l
    }
}
