//! Interface between the event engine and the per-node routing logic.

use std::cell::Cell;
use std::collections::VecDeque;

use crate::geometry::NodeId;

use super::packet::Packet;
use super::report::DropReason;
use super::SimParams;

/// What a router sees when it is invoked.
pub struct NodeContext<'a> {
    pub node: NodeId,
    pub now: f64,
    pub params: &'a SimParams,
    ids: &'a Cell<u64>,
}

impl<'a> NodeContext<'a> {
    pub fn new(node: NodeId, now: f64, params: &'a SimParams, ids: &'a Cell<u64>) -> Self {
        NodeContext {
            node,
            now,
            params,
            ids,
        }
    }

    pub fn next_packet_id(&self) -> u64 {
        let id = self.ids.get();
        self.ids.set(id + 1);
        id
    }

    pub fn control(&self, body: super::packet::Body) -> Packet {
        Packet::control(
            self.next_packet_id(),
            self.node,
            self.now,
            self.params.control_packet_bits,
            body,
        )
    }
}

/// A discovery/maintenance timer; stale generations are ignored by routers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timer {
    pub dest: NodeId,
    pub generation: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RouterEvent {
    /// Application data created at this node.
    Originate(Packet),
    Receive {
        from: NodeId,
        packet: Packet,
    },
    /// The link layer could not deliver a unicast frame to `next_hop`.
    LinkFailure {
        next_hop: NodeId,
        packet: Packet,
    },
    Timer(Timer),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Unicast { next_hop: NodeId, packet: Packet },
    Broadcast(Packet),
    Deliver(Packet),
    Drop { packet: Packet, reason: DropReason },
    Schedule { delay: f64, timer: Timer },
}

pub trait Router {
    fn handle(&mut self, ctx: &NodeContext<'_>, event: RouterEvent) -> Vec<Action>;

    /// Removes and returns every data packet still waiting for a route.
    fn drain_buffered(&mut self) -> Vec<Packet>;
}

/// Fixed-size LRU set used for flood duplicate suppression.
#[derive(Debug, Clone)]
pub struct DuplicateCache<K> {
    capacity: usize,
    entries: VecDeque<K>,
}

impl<K: PartialEq> DuplicateCache<K> {
    pub fn new(capacity: usize) -> Self {
        DuplicateCache {
            capacity: capacity.max(1),
            entries: VecDeque::with_capacity(capacity),
        }
    }

    /// Records `key`; returns `false` if it was already present.
    pub fn insert(&mut self, key: K) -> bool {
        if let Some(pos) = self.entries.iter().position(|k| *k == key) {
            let k = self.entries.remove(pos).expect("position is in bounds");
            self.entries.push_back(k);
            return false;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(key);
        true
    }

    pub fn contains(&self, key: &K) -> bool {
        self.entries.contains(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Per-destination FIFO of data awaiting a route; overflow evicts the oldest.
pub(crate) fn buffer_packet(
    queue: &mut VecDeque<Packet>,
    packet: Packet,
    capacity: usize,
    actions: &mut Vec<Action>,
) {
    if queue.len() >= capacity {
        if let Some(old) = queue.pop_front() {
            actions.push(Action::Drop {
                packet: old,
                reason: DropReason::NoRoute,
            });
        }
    }
    queue.push_back(packet);
}
