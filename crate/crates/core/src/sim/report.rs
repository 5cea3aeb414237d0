use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::packet::PacketKind;
use super::Protocol;
use crate::geometry::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    NoRoute,
    Ttl,
    QueueOverflow,
    LinkLoss,
    ExpiredAtEnd,
}

impl DropReason {
    pub const ALL: [DropReason; 5] = [
        DropReason::NoRoute,
        DropReason::Ttl,
        DropReason::QueueOverflow,
        DropReason::LinkLoss,
        DropReason::ExpiredAtEnd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DropReason::NoRoute => "no_route",
            DropReason::Ttl => "ttl",
            DropReason::QueueOverflow => "queue_overflow",
            DropReason::LinkLoss => "link_loss",
            DropReason::ExpiredAtEnd => "expired_at_end",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DropCounts {
    pub no_route: u64,
    pub ttl: u64,
    pub queue_overflow: u64,
    pub link_loss: u64,
    pub expired_at_end: u64,
}

impl DropCounts {
    pub fn get(&self, reason: DropReason) -> u64 {
        match reason {
            DropReason::NoRoute => self.no_route,
            DropReason::Ttl => self.ttl,
            DropReason::QueueOverflow => self.queue_overflow,
            DropReason::LinkLoss => self.link_loss,
            DropReason::ExpiredAtEnd => self.expired_at_end,
        }
    }

    pub(crate) fn add(&mut self, reason: DropReason) {
        let slot = match reason {
            DropReason::NoRoute => &mut self.no_route,
            DropReason::Ttl => &mut self.ttl,
            DropReason::QueueOverflow => &mut self.queue_overflow,
            DropReason::LinkLoss => &mut self.link_loss,
            DropReason::ExpiredAtEnd => &mut self.expired_at_end,
        };
        *slot += 1;
    }

    pub fn total(&self) -> u64 {
        DropReason::ALL.iter().map(|r| self.get(*r)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryRecord {
    pub packet_id: u64,
    pub flow: usize,
    pub origin_time: f64,
    pub delivered_at: f64,
    pub hop_count: u32,
    /// Hop distance between the endpoints in the connectivity graph when the
    /// packet was created; `None` if they were disconnected.
    pub shortest_hops: Option<u32>,
    pub path: Vec<NodeId>,
}

impl DeliveryRecord {
    pub fn delay(&self) -> f64 {
        self.delivered_at - self.origin_time
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub protocol: Protocol,
    pub originated: u64,
    pub delivered: u64,
    pub dropped: DropCounts,
    pub in_flight_at_end: u64,
    /// Every per-hop transmission of a control packet.
    pub routing_transmissions: u64,
    pub routing_by_kind: BTreeMap<PacketKind, u64>,
    /// Data frames put on the air, counting each hop.
    pub data_transmissions: u64,
    pub control_dropped: u64,
    pub deliveries: Vec<DeliveryRecord>,
    /// Shortest path length at origination for every originated packet.
    pub shortest_at_origination: Vec<Option<u32>>,
}

impl SimReport {
    pub fn new(protocol: Protocol) -> Self {
        SimReport {
            protocol,
            originated: 0,
            delivered: 0,
            dropped: DropCounts::default(),
            in_flight_at_end: 0,
            routing_transmissions: 0,
            routing_by_kind: BTreeMap::new(),
            data_transmissions: 0,
            control_dropped: 0,
            deliveries: Vec::new(),
            shortest_at_origination: Vec::new(),
        }
    }

    pub fn is_conserved(&self) -> bool {
        self.originated == self.delivered + self.dropped.total() + self.in_flight_at_end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{metric} is undefined: {reason}")]
pub struct MetricUndefined {
    pub metric: &'static str,
    pub reason: &'static str,
}

pub fn compute_pdr(report: &SimReport) -> Result<f64, MetricUndefined> {
    if report.originated == 0 {
        return Err(MetricUndefined {
            metric: "pdr",
            reason: "no packets originated",
        });
    }
    Ok(report.delivered as f64 / report.originated as f64)
}

pub fn compute_nrl(report: &SimReport) -> Result<f64, MetricUndefined> {
    if report.delivered == 0 {
        return Err(nothing_delivered("nrl"));
    }
    Ok(report.routing_transmissions as f64 / report.delivered as f64)
}

pub fn compute_avg_delay(report: &SimReport) -> Result<f64, MetricUndefined> {
    if report.deliveries.is_empty() {
        return Err(nothing_delivered("avg_delay"));
    }
    Ok(report
        .deliveries
        .iter()
        .map(DeliveryRecord::delay)
        .sum::<f64>()
        / report.deliveries.len() as f64)
}

/// Mean excess hops over the shortest path at origination. Packets whose
/// endpoints were disconnected when created do not contribute.
pub fn compute_path_optimality(report: &SimReport) -> Result<f64, MetricUndefined> {
    if report.deliveries.is_empty() {
        return Err(nothing_delivered("path_optimality"));
    }
    let excess: Vec<f64> = report
        .deliveries
        .iter()
        .filter_map(|d| {
            d.shortest_hops
                .map(|s| f64::from(d.hop_count) - f64::from(s))
        })
        .collect();
    if excess.is_empty() {
        return Err(MetricUndefined {
            metric: "path_optimality",
            reason: "no delivered packet had a path at origination",
        });
    }
    Ok(excess.iter().sum::<f64>() / excess.len() as f64)
}

fn nothing_delivered(metric: &'static str) -> MetricUndefined {
    MetricUndefined {
        metric,
        reason: "no packets delivered",
    }
}
