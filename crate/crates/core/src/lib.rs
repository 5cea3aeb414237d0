//! Group vehicular mobility generation, mobility metrics and a packet-level
//! MANET routing simulator.

pub mod geometry;
pub mod metrics;
pub mod mobility;
pub mod roadmap;
pub mod sim;

pub use geometry::{MobilityTrace, NodeId, NodeState, SimulationArea, TraceSample, Vec2};
pub use metrics::{compute_metrics, MetricsConfig, MetricsReport};
pub use mobility::{GvmmParams, MobilityError, VehicularParams};
pub use roadmap::{LaneGraph, MapKind, TurnProbabilities};
pub use sim::{run_simulation, Protocol, RadioModel, SimParams, SimReport, TrafficFlow};
