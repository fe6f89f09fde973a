//! Approximate minimum spanning trees of metric spaces in a simulated
//! massively parallel setting.
//!
//! The crate builds a hierarchy of low-diameter decompositions, compresses
//! it with coin-flip merging, and grows a spanning tree level by level with a
//! coin-flip Borůvka. Both a direct executor and one routed through a
//! simulated cluster are provided, together with exact oracles and a
//! reduction from approximate MST to ordering the vertices of a cycle.

pub mod cycle_graph;
pub mod dsu;
pub mod experiment;
pub mod hierarchy;
pub mod mpc;
pub mod metric;
pub mod oracle;
pub mod partition;
pub mod reduction;
pub mod pipeline;
pub mod rng;
pub mod schedule;
pub mod tree;

pub use cycle_graph::{Component, ComponentKind, CycleGraph, CycleGraphError};
pub use metric::{metric_from_cycles, metric_from_points, validate_metric, EdgeRef, MetricError, MetricInstance};
pub use partition::Partition;
pub use tree::{SpanningTree, TreeEdge, TreeError};
