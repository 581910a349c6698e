//! Multicast route planning for 2D-mesh networks-on-chip, with a
//! cycle-accurate wormhole simulator to measure the plans.
//!
//! Destinations are split into eight sectors around the source, adjacent
//! sectors are merged greedily when one packet can serve them more cheaply,
//! and each resulting set is delivered from its representative node by
//! either label-monotone chains or per-destination unicasts. The multipath,
//! nearest-first multipath, dual-path and multi-unicast baselines share the
//! same routing and simulation machinery.
//!
//! Statistics are generic over [`scalar::Real`]; the aliases below fix them
//! to `f64`.

pub mod check;
pub mod config;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod partition;
pub mod report;
pub mod routing;
pub mod scalar;
pub mod topology;
pub mod workload;

pub use config::RunConfig;
pub use engine::{simulate, SimConfig, SimOutcome};
pub use error::{Error, Result};
pub use partition::{dpm_partition, exact_optimal_partition, CostModel, FinalPartition};
pub use routing::{plan, PlanOptions, PlannerKind, RoutePlan};
pub use scalar::Real;
pub use topology::{MeshConfig, NodeCoord, NodeLabel};
pub use workload::{TraceEvent, TrafficConfig};

pub type StatsReport = metrics::StatsReport<f64>;
pub type SweepResult = metrics::SweepResult<f64>;
pub type EnergyWeights = metrics::EnergyWeights<f64>;
