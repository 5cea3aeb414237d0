use rand::seq::index::sample;
use rand::Rng;

use super::SimError;
use crate::geometry::NodeId;

/// Constant-bit-rate source.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficFlow {
    pub src: NodeId,
    pub dst: NodeId,
    /// Bits per second.
    pub rate: f64,
    pub packet_bits: u32,
    pub start: f64,
    pub stop: f64,
}

impl TrafficFlow {
    /// Seconds between consecutive packets.
    pub fn interval(&self) -> f64 {
        f64::from(self.packet_bits) / self.rate
    }

    pub fn validate(&self, index: usize, node_count: usize, duration: f64) -> Result<(), SimError> {
        let fail = |reason: String| SimError::InvalidFlow {
            flow: index,
            reason,
        };
        if self.src >= node_count || self.dst >= node_count {
            return Err(fail(format!(
                "endpoints {}->{} outside 0..{node_count}",
                self.src, self.dst
            )));
        }
        if self.src == self.dst {
            return Err(fail("source equals destination".into()));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) || self.packet_bits == 0 {
            return Err(fail("rate and packet size must be positive".into()));
        }
        if !(self.start.is_finite() && self.start >= 0.0 && self.stop >= self.start) {
            return Err(fail(format!(
                "window [{}, {}] is not ordered",
                self.start, self.stop
            )));
        }
        if self.stop > duration + 1e-9 {
            return Err(fail(format!(
                "stop {} beyond trace duration {duration}",
                self.stop
            )));
        }
        Ok(())
    }
}

/// Picks `count` distinct ordered (src, dst) pairs; flow `k` starts at
/// `start + k * stagger`.
#[allow(clippy::too_many_arguments)]
pub fn select_flows<R: Rng + ?Sized>(
    node_count: usize,
    count: usize,
    rate: f64,
    packet_bits: u32,
    start: f64,
    stagger: f64,
    stop: f64,
    rng: &mut R,
) -> Result<Vec<TrafficFlow>, SimError> {
    let pairs = node_count * node_count.saturating_sub(1);
    if count > pairs {
        return Err(SimError::InvalidParameter {
            key: "flows",
            reason: format!("{count} flows requested, only {pairs} ordered pairs exist"),
        });
    }
    let picked = sample(rng, pairs, count);
    Ok(picked
        .iter()
        .enumerate()
        .map(|(k, idx)| {
            let src = idx / (node_count - 1);
            let mut dst = idx % (node_count - 1);
            if dst >= src {
                dst += 1;
            }
            TrafficFlow {
                src,
                dst,
                rate,
                packet_bits,
                start: (start + k as f64 * stagger).min(stop),
                stop,
            }
        })
        .collect())
}
