//! Simplified TORA: per-destination heights built by a QRY/UPD exchange,
//! downhill forwarding and full link reversal on loss of the last
//! downstream link. No reliable neighbor broadcast and no partition erasure.

use std::collections::{BTreeMap, VecDeque};

use super::packet::{Body, Packet};
use super::report::DropReason;
use super::routing::{
    buffer_packet, Action, DuplicateCache, NodeContext, Router, RouterEvent, Timer,
};
use super::SimParams;
use crate::geometry::NodeId;

/// Height of a node for one destination; ordered by level, ties by node id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Height {
    pub level: u64,
    pub node: NodeId,
}

#[derive(Debug, Clone, Copy)]
struct Query {
    attempts: u32,
    generation: u64,
}

#[derive(Debug, Clone, Default)]
struct DestState {
    height: Option<Height>,
    neighbors: BTreeMap<NodeId, Option<Height>>,
    route_required: bool,
    query: Option<Query>,
    buffer: VecDeque<Packet>,
    reversals: VecDeque<f64>,
}

impl DestState {
    fn downstream(&self) -> Option<NodeId> {
        self.downstream_excluding(&[])
    }

    fn downstream_excluding(&self, visited: &[NodeId]) -> Option<NodeId> {
        let own = self.height?;
        self.neighbors
            .iter()
            .filter(|(n, _)| !visited.contains(n))
            .filter_map(|(n, h)| h.filter(|h| *h < own).map(|h| (h, *n)))
            .min()
            .map(|(_, n)| n)
    }

    fn highest_neighbor_level(&self) -> Option<u64> {
        self.neighbors
            .values()
            .filter_map(|h| h.map(|h| h.level))
            .max()
    }
}

#[derive(Debug, Clone)]
pub struct ToraRouter {
    id: NodeId,
    qid: u32,
    dests: BTreeMap<NodeId, DestState>,
    seen: DuplicateCache<(NodeId, u32)>,
    generation: u64,
    /// Reversals performed so far, all destinations.
    pub reversal_count: u64,
}

impl ToraRouter {
    pub fn new(id: NodeId, params: &SimParams) -> Self {
        ToraRouter {
            id,
            qid: 0,
            dests: BTreeMap::new(),
            seen: DuplicateCache::new(params.dup_cache_size),
            generation: 0,
            reversal_count: 0,
        }
    }

    pub fn height(&self, dest: NodeId) -> Option<Height> {
        if dest == self.id {
            return Some(Height {
                level: 0,
                node: dest,
            });
        }
        self.dests.get(&dest).and_then(|s| s.height)
    }

    /// Neighbor heights as last advertised.
    pub fn neighbor_height(&self, dest: NodeId, neighbor: NodeId) -> Option<Height> {
        self.dests
            .get(&dest)
            .and_then(|s| s.neighbors.get(&neighbor).copied().flatten())
    }

    pub fn downstream(&self, dest: NodeId) -> Option<NodeId> {
        self.dests.get(&dest).and_then(DestState::downstream)
    }

    fn state(&mut self, dest: NodeId) -> &mut DestState {
        let id = self.id;
        self.dests.entry(dest).or_insert_with(|| DestState {
            height: (dest == id).then_some(Height { level: 0, node: id }),
            ..DestState::default()
        })
    }

    fn broadcast_height(&mut self, ctx: &NodeContext<'_>, dest: NodeId, out: &mut Vec<Action>) {
        let height = self.height(dest);
        out.push(Action::Broadcast(
            ctx.control(Body::Update { dest, height }),
        ));
    }

    /// Full reversal: rise above every known neighbor. Past the budget the
    /// node gives up its height instead and returns `false`.
    fn reverse(&mut self, ctx: &NodeContext<'_>, dest: NodeId, out: &mut Vec<Action>) -> bool {
        let id = self.id;
        let budget = ctx.params.tora_reversal_budget;
        let window = ctx.params.tora_reversal_window;
        let st = self.state(dest);
        while st.reversals.front().is_some_and(|t| *t < ctx.now - window) {
            st.reversals.pop_front();
        }
        let top = st.highest_neighbor_level();
        let ok = st.reversals.len() < budget && top.is_some();
        if ok {
            st.height = Some(Height {
                level: top.expect("checked") + 1,
                node: id,
            });
            st.reversals.push_back(ctx.now);
            self.reversal_count += 1;
        } else {
            st.height = None;
        }
        self.broadcast_height(ctx, dest, out);
        ok
    }

    fn forward(&mut self, ctx: &NodeContext<'_>, packet: Packet, out: &mut Vec<Action>) {
        let dst = packet.data_dst().expect("data packet");
        if dst == self.id {
            out.push(Action::Deliver(packet));
            return;
        }
        // nodes already on the packet's path are not offered again
        let st = self.state(dst);
        if let Some(next_hop) = st.downstream_excluding(&packet.path) {
            out.push(Action::Unicast { next_hop, packet });
            return;
        }
        if st.downstream().is_none()
            && st.height.is_some()
            && st.highest_neighbor_level().is_some()
            && self.reverse(ctx, dst, out)
        {
            if let Some(next_hop) = self.state(dst).downstream_excluding(&packet.path) {
                out.push(Action::Unicast { next_hop, packet });
                return;
            }
        }
        let cap = ctx.params.buffer_capacity;
        buffer_packet(&mut self.state(dst).buffer, packet, cap, out);
        self.start_query(ctx, dst, out);
    }

    fn start_query(&mut self, ctx: &NodeContext<'_>, dest: NodeId, out: &mut Vec<Action>) {
        if self.state(dest).query.is_none() {
            self.send_query(ctx, dest, 1, out);
        }
    }

    fn send_query(
        &mut self,
        ctx: &NodeContext<'_>,
        dest: NodeId,
        attempts: u32,
        out: &mut Vec<Action>,
    ) {
        self.qid += 1;
        self.generation += 1;
        self.seen.insert((self.id, self.qid));
        let generation = self.generation;
        let st = self.state(dest);
        st.route_required = true;
        st.query = Some(Query {
            attempts,
            generation,
        });
        out.push(Action::Broadcast(ctx.control(Body::Query {
            dest,
            origin: self.id,
            qid: self.qid,
        })));
        out.push(Action::Schedule {
            delay: ctx.params.tora_query_timeout,
            timer: Timer { dest, generation },
        });
    }

    /// Retries every buffered packet; those still without a usable
    /// neighbor go back into the buffer.
    fn flush(&mut self, ctx: &NodeContext<'_>, dest: NodeId, out: &mut Vec<Action>) {
        let pending = std::mem::take(&mut self.state(dest).buffer);
        for packet in pending {
            self.forward(ctx, packet, out);
        }
    }

    fn on_query(&mut self, ctx: &NodeContext<'_>, packet: Packet, out: &mut Vec<Action>) {
        let Body::Query { dest, origin, qid } = packet.body else {
            unreachable!()
        };
        if !self.seen.insert((origin, qid)) {
            return;
        }
        if self.height(dest).is_some() {
            self.broadcast_height(ctx, dest, out);
        } else {
            self.state(dest).route_required = true;
            if packet.hop_count < ctx.params.ttl {
                out.push(Action::Broadcast(packet));
            }
        }
    }

    fn on_update(
        &mut self,
        ctx: &NodeContext<'_>,
        from: NodeId,
        dest: NodeId,
        height: Option<Height>,
        out: &mut Vec<Action>,
    ) {
        if dest == self.id {
            return;
        }
        let id = self.id;
        let st = self.state(dest);
        let had_downstream = st.downstream().is_some();
        st.neighbors.insert(from, height);
        match (st.height, height) {
            (None, Some(h)) if st.route_required => {
                st.height = Some(Height {
                    level: h.level + 1,
                    node: id,
                });
                st.route_required = false;
                st.query = None;
                self.broadcast_height(ctx, dest, out);
                self.flush(ctx, dest, out);
            }
            (Some(_), _) => {
                if had_downstream && st.downstream().is_none() {
                    self.reverse(ctx, dest, out);
                }
                let st = self.state(dest);
                if !had_downstream && st.downstream().is_some() && !st.buffer.is_empty() {
                    self.flush(ctx, dest, out);
                }
            }
            _ => {}
        }
    }

    fn on_link_failure(
        &mut self,
        ctx: &NodeContext<'_>,
        next_hop: NodeId,
        packet: Packet,
        out: &mut Vec<Action>,
    ) {
        let dests: Vec<NodeId> = self.dests.keys().copied().collect();
        for d in dests {
            let st = self.state(d);
            let had = st.downstream().is_some();
            st.neighbors.remove(&next_hop);
            if had
                && st.downstream().is_none()
                && st.height.is_some()
                && Some(d) != packet.data_dst()
            {
                self.reverse(ctx, d, out);
            }
        }
        if packet.is_data() {
            self.forward(ctx, packet, out);
        } else {
            out.push(Action::Drop {
                packet,
                reason: DropReason::NoRoute,
            });
        }
    }

    fn on_timer(&mut self, ctx: &NodeContext<'_>, timer: Timer, out: &mut Vec<Action>) {
        let dest = timer.dest;
        let st = self.state(dest);
        let Some(q) = st.query else { return };
        if q.generation != timer.generation {
            return;
        }
        if st.buffer.is_empty() {
            st.query = None;
            st.route_required = false;
            return;
        }
        if q.attempts >= ctx.params.tora_query_retries {
            st.query = None;
            st.route_required = false;
            for packet in std::mem::take(&mut st.buffer) {
                out.push(Action::Drop {
                    packet,
                    reason: DropReason::NoRoute,
                });
            }
            return;
        }
        self.flush(ctx, dest, out);
        if self.state(dest).buffer.is_empty() {
            self.state(dest).query = None;
        } else {
            self.send_query(ctx, dest, q.attempts + 1, out);
        }
    }
}

impl Router for ToraRouter {
    fn handle(&mut self, ctx: &NodeContext<'_>, event: RouterEvent) -> Vec<Action> {
        let mut out = Vec::new();
        match event {
            RouterEvent::Originate(packet) => self.forward(ctx, packet, &mut out),
            RouterEvent::Receive { from, packet } => match packet.body {
                Body::Data(_) => self.forward(ctx, packet, &mut out),
                Body::Query { .. } => self.on_query(ctx, packet, &mut out),
                Body::Update { dest, height } => self.on_update(ctx, from, dest, height, &mut out),
                _ => {}
            },
            RouterEvent::LinkFailure { next_hop, packet } => {
                self.on_link_failure(ctx, next_hop, packet, &mut out)
            }
            RouterEvent::Timer(timer) => self.on_timer(ctx, timer, &mut out),
        }
        out
    }

    fn drain_buffered(&mut self) -> Vec<Packet> {
        self.dests
            .values_mut()
            .flat_map(|s| std::mem::take(&mut s.buffer))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    fn upd(dest: NodeId, height: Option<Height>) -> Packet {
        Packet::control(0, 0, 0.0, 512, Body::Update { dest, height })
    }

    #[test]
    fn heights_order_by_level_then_id() {
        let a = Height { level: 1, node: 7 };
        let b = Height { level: 1, node: 3 };
        let c = Height { level: 0, node: 9 };
        assert!(c < b && b < a);
    }

    #[test]
    fn route_required_node_takes_level_above_update() {
        let params = SimParams::default();
        let ids = Cell::new(0);
        let ctx = NodeContext::new(1, 1.0, &params, &ids);
        let mut r = ToraRouter::new(1, &params);
        let q = Packet::control(
            0,
            0,
            0.0,
            512,
            Body::Query {
                dest: 2,
                origin: 0,
                qid: 1,
            },
        );
        let out = r.handle(&ctx, RouterEvent::Receive { from: 0, packet: q });
        assert!(matches!(out.as_slice(), [Action::Broadcast(_)]));
        r.handle(
            &ctx,
            RouterEvent::Receive {
                from: 2,
                packet: upd(2, Some(Height { level: 0, node: 2 })),
            },
        );
        assert_eq!(r.height(2), Some(Height { level: 1, node: 1 }));
        assert_eq!(r.downstream(2), Some(2));
    }

    #[test]
    fn losing_last_downstream_reverses_above_neighbors() {
        let params = SimParams::default();
        let ids = Cell::new(0);
        let ctx = NodeContext::new(1, 1.0, &params, &ids);
        let mut r = ToraRouter::new(1, &params);
        r.state(5).route_required = true;
        r.handle(
            &ctx,
            RouterEvent::Receive {
                from: 2,
                packet: upd(5, Some(Height { level: 1, node: 2 })),
            },
        );
        assert_eq!(r.height(5), Some(Height { level: 2, node: 1 }));
        r.handle(
            &ctx,
            RouterEvent::Receive {
                from: 3,
                packet: upd(5, Some(Height { level: 3, node: 3 })),
            },
        );
        // neighbor 2 reverses above us
        let out = r.handle(
            &ctx,
            RouterEvent::Receive {
                from: 2,
                packet: upd(5, Some(Height { level: 4, node: 2 })),
            },
        );
        assert_eq!(r.height(5), Some(Height { level: 5, node: 1 }));
        assert!(out
            .iter()
            .any(|a| matches!(a, Action::Broadcast(p) if matches!(p.body, Body::Update { .. }))));
        assert_eq!(r.reversal_count, 1);
    }
}
