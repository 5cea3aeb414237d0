//! Discrete-event packet simulator with AODV, DSR and TORA routing.

pub mod aodv;
pub mod dsr;
mod engine;
mod packet;
mod report;
mod routing;
pub mod tora;
mod traffic;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use engine::{audit_hops, run_simulation, EventKind, EventRecord, NodeRouter, Simulation};
pub use packet::{Body, DataHeader, Packet, PacketKind};
pub use report::{
    compute_avg_delay, compute_nrl, compute_path_optimality, compute_pdr, DeliveryRecord,
    DropCounts, DropReason, MetricUndefined, SimReport,
};
pub use routing::{Action, DuplicateCache, NodeContext, Router, RouterEvent, Timer};
pub use traffic::{select_flows, TrafficFlow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Protocol {
    Aodv,
    Dsr,
    Tora,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Aodv, Protocol::Dsr, Protocol::Tora];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Aodv => "aodv",
            Protocol::Dsr => "dsr",
            Protocol::Tora => "tora",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "aodv" => Ok(Protocol::Aodv),
            "dsr" => Ok(Protocol::Dsr),
            "tora" => Ok(Protocol::Tora),
            other => Err(SimError::InvalidParameter {
                key: "protocol",
                reason: format!("unknown protocol `{other}` (expected aodv, dsr or tora)"),
            }),
        }
    }
}

/// Unit-disk radio with fixed per-hop costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioModel {
    pub range: f64,
    /// Bits per second.
    pub link_bitrate: f64,
    /// Propagation and processing delay added to every hop, seconds.
    pub per_hop_latency: f64,
    /// Independent per-receiver frame loss probability.
    pub loss_probability: f64,
    /// Broadcasts wait a uniform delay in `[0, broadcast_jitter)` before queueing.
    pub broadcast_jitter: f64,
}

impl Default for RadioModel {
    fn default() -> Self {
        RadioModel {
            range: 250.0,
            link_bitrate: 2e6,
            per_hop_latency: 0.002,
            loss_probability: 0.0,
            broadcast_jitter: 0.0,
        }
    }
}

impl RadioModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.range.is_finite() && self.range > 0.0) {
            return Err(invalid("range", "must be positive"));
        }
        if !(self.link_bitrate.is_finite() && self.link_bitrate > 0.0) {
            return Err(invalid("link_bitrate", "must be positive"));
        }
        if !(self.per_hop_latency.is_finite() && self.per_hop_latency >= 0.0) {
            return Err(invalid("per_hop_latency", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.loss_probability) {
            return Err(invalid("loss_probability", "must lie in [0, 1]"));
        }
        if !(self.broadcast_jitter.is_finite() && self.broadcast_jitter >= 0.0) {
            return Err(invalid("broadcast_jitter", "must be non-negative"));
        }
        Ok(())
    }

    pub fn tx_time(&self, bits: u32) -> f64 {
        f64::from(bits) / self.link_bitrate
    }
}

/// Protocol-independent and per-protocol tunables.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub ttl: u32,
    /// Interface queue length per node, frames.
    pub queue_capacity: usize,
    /// Data packets buffered per destination while a route is sought.
    pub buffer_capacity: usize,
    pub dup_cache_size: usize,
    pub control_packet_bits: u32,
    /// AODV active route lifetime, seconds.
    pub route_lifetime: f64,
    /// AODV first route request timeout, doubled on every retry.
    pub rreq_timeout: f64,
    pub rreq_retries: u32,
    pub dsr_send_buffer_timeout: f64,
    pub dsr_backoff_initial: f64,
    pub dsr_backoff_max: f64,
    pub dsr_cache_size: usize,
    pub tora_query_timeout: f64,
    /// Query attempts before buffered data is dropped.
    pub tora_query_retries: u32,
    /// Induced reversals allowed inside `tora_reversal_window` before a node
    /// gives up its height.
    pub tora_reversal_budget: usize,
    pub tora_reversal_window: f64,
    pub record_events: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            ttl: 32,
            queue_capacity: 64,
            buffer_capacity: 10,
            dup_cache_size: 64,
            control_packet_bits: 64 * 8,
            route_lifetime: 10.0,
            rreq_timeout: 1.0,
            rreq_retries: 2,
            dsr_send_buffer_timeout: 30.0,
            dsr_backoff_initial: 0.5,
            dsr_backoff_max: 10.0,
            dsr_cache_size: 64,
            tora_query_timeout: 1.0,
            tora_query_retries: 3,
            tora_reversal_budget: 3,
            tora_reversal_window: 2.0,
            record_events: false,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.ttl == 0 {
            return Err(invalid("ttl", "must be at least 1"));
        }
        if self.queue_capacity == 0 {
            return Err(invalid("queue_capacity", "must be at least 1"));
        }
        if self.buffer_capacity == 0 {
            return Err(invalid("buffer_capacity", "must be at least 1"));
        }
        if self.control_packet_bits == 0 {
            return Err(invalid("control_packet_bits", "must be positive"));
        }
        for (key, v) in [
            ("route_lifetime", self.route_lifetime),
            ("rreq_timeout", self.rreq_timeout),
            ("dsr_send_buffer_timeout", self.dsr_send_buffer_timeout),
            ("dsr_backoff_initial", self.dsr_backoff_initial),
            ("dsr_backoff_max", self.dsr_backoff_max),
            ("tora_query_timeout", self.tora_query_timeout),
            ("tora_reversal_window", self.tora_reversal_window),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(key, "must be positive"));
            }
        }
        if self.tora_query_retries == 0 {
            return Err(invalid("tora_query_retries", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: &'static str, reason: String },
    #[error("flow {flow}: {reason}")]
    InvalidFlow { flow: usize, reason: String },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> SimError {
    SimError::InvalidParameter {
        key,
        reason: reason.into(),
    }
}
