//! Simplified DSR: source routes accumulated by flooding, cached only at the
//! data source, shortest cached route first, no salvaging and no snooping.

use std::collections::{BTreeMap, VecDeque};

use super::packet::{Body, Packet};
use super::report::DropReason;
use super::routing::{Action, DuplicateCache, NodeContext, Router, RouterEvent, Timer};
use super::SimParams;
use crate::geometry::NodeId;

#[derive(Debug, Clone, Copy)]
struct Discovery {
    backoff: f64,
    generation: u64,
}

#[derive(Debug, Clone)]
pub struct DsrRouter {
    id: NodeId,
    req_id: u32,
    /// Full routes starting at this node, oldest first.
    cache: Vec<Vec<NodeId>>,
    cache_size: usize,
    seen: DuplicateCache<(NodeId, u32)>,
    buffers: BTreeMap<NodeId, VecDeque<(Packet, f64)>>,
    discoveries: BTreeMap<NodeId, Discovery>,
    generation: u64,
}

impl DsrRouter {
    pub fn new(id: NodeId, params: &SimParams) -> Self {
        DsrRouter {
            id,
            req_id: 0,
            cache: Vec::new(),
            cache_size: params.dsr_cache_size.max(1),
            seen: DuplicateCache::new(params.dup_cache_size),
            buffers: BTreeMap::new(),
            discoveries: BTreeMap::new(),
            generation: 0,
        }
    }

    pub fn cached_routes(&self) -> &[Vec<NodeId>] {
        &self.cache
    }

    /// Adds a route to the cache unless an identical one is present.
    pub fn add_route(&mut self, route: Vec<NodeId>) {
        debug_assert_eq!(route.first(), Some(&self.id));
        if route.len() < 2 || self.cache.contains(&route) {
            return;
        }
        if self.cache.len() == self.cache_size {
            self.cache.remove(0);
        }
        self.cache.push(route);
    }

    /// Shortest cached route to `dest`; the oldest wins a tie.
    pub fn best_route(&self, dest: NodeId) -> Option<&Vec<NodeId>> {
        self.cache
            .iter()
            .filter(|r| r.last() == Some(&dest))
            .min_by_key(|r| r.len())
    }

    fn purge_link(&mut self, a: NodeId, b: NodeId) {
        self.cache.retain(|r| {
            !r.windows(2)
                .any(|w| (w[0] == a && w[1] == b) || (w[0] == b && w[1] == a))
        });
    }

    fn send_from_source(
        &mut self,
        ctx: &NodeContext<'_>,
        mut packet: Packet,
        queued_at: f64,
        out: &mut Vec<Action>,
    ) {
        let dst = packet.data_dst().expect("data packet");
        if let Some(route) = self.best_route(dst).cloned() {
            let next_hop = route[1];
            packet.data_header_mut().expect("data packet").source_route = route;
            out.push(Action::Unicast { next_hop, packet });
            return;
        }
        let queue = self.buffers.entry(dst).or_default();
        if queue.len() >= ctx.params.buffer_capacity {
            if let Some((old, _)) = queue.pop_front() {
                out.push(Action::Drop {
                    packet: old,
                    reason: DropReason::NoRoute,
                });
            }
        }
        queue.push_back((packet, queued_at));
        if !self.discoveries.contains_key(&dst) {
            self.send_request(ctx, dst, ctx.params.dsr_backoff_initial, out);
        }
    }

    fn send_request(
        &mut self,
        ctx: &NodeContext<'_>,
        target: NodeId,
        backoff: f64,
        out: &mut Vec<Action>,
    ) {
        self.req_id += 1;
        self.generation += 1;
        self.seen.insert((self.id, self.req_id));
        out.push(Action::Broadcast(ctx.control(Body::DsrRequest {
            origin: self.id,
            req_id: self.req_id,
            target,
            record: vec![self.id],
        })));
        self.discoveries.insert(
            target,
            Discovery {
                backoff,
                generation: self.generation,
            },
        );
        out.push(Action::Schedule {
            delay: backoff,
            timer: Timer {
                dest: target,
                generation: self.generation,
            },
        });
    }

    fn flush(&mut self, ctx: &NodeContext<'_>, dest: NodeId, out: &mut Vec<Action>) {
        self.discoveries.remove(&dest);
        for (packet, t) in self.buffers.remove(&dest).unwrap_or_default() {
            self.send_from_source(ctx, packet, t, out);
        }
    }

    fn on_request(
        &mut self,
        ctx: &NodeContext<'_>,
        from: NodeId,
        packet: Packet,
        out: &mut Vec<Action>,
    ) {
        let Body::DsrRequest {
            origin,
            req_id,
            target,
            record,
        } = &packet.body
        else {
            unreachable!()
        };
        if *origin == self.id || record.contains(&self.id) {
            return;
        }
        let mut record = record.clone();
        record.push(self.id);
        if *target == self.id {
            // every copy is answered, so the source learns several routes
            let mut reply = ctx.control(Body::DsrReply { route: record });
            reply.hop_count = 0;
            out.push(Action::Unicast {
                next_hop: from,
                packet: reply,
            });
            return;
        }
        if !self.seen.insert((*origin, *req_id)) || packet.hop_count >= ctx.params.ttl {
            return;
        }
        let (origin, req_id, target) = (*origin, *req_id, *target);
        out.push(Action::Broadcast(Packet {
            body: Body::DsrRequest {
                origin,
                req_id,
                target,
                record,
            },
            ..packet
        }));
    }

    fn on_reply(&mut self, ctx: &NodeContext<'_>, packet: Packet, out: &mut Vec<Action>) {
        let Body::DsrReply { route } = &packet.body else {
            unreachable!()
        };
        match route.iter().position(|&n| n == self.id) {
            Some(0) => {
                let target = *route.last().expect("non-empty route");
                self.add_route(route.clone());
                if self.discoveries.contains_key(&target) {
                    self.flush(ctx, target, out);
                }
            }
            Some(k) => {
                let next_hop = route[k - 1];
                out.push(Action::Unicast { next_hop, packet });
            }
            None => out.push(Action::Drop {
                packet,
                reason: DropReason::NoRoute,
            }),
        }
    }

    fn on_error(&mut self, packet: Packet, out: &mut Vec<Action>) {
        let Body::DsrError { broken, route_back } = &packet.body else {
            unreachable!()
        };
        self.purge_link(broken.0, broken.1);
        let Some(k) = route_back.iter().position(|&n| n == self.id) else {
            return;
        };
        if k + 1 < route_back.len() {
            let next_hop = route_back[k + 1];
            out.push(Action::Unicast { next_hop, packet });
        }
    }

    fn forward_data(&mut self, packet: Packet, out: &mut Vec<Action>) {
        let header = packet.data_header().expect("data packet");
        if header.dst == self.id {
            out.push(Action::Deliver(packet));
            return;
        }
        let route = &header.source_route;
        match route.iter().position(|&n| n == self.id) {
            Some(k) if k + 1 < route.len() => {
                let next_hop = route[k + 1];
                out.push(Action::Unicast { next_hop, packet });
            }
            _ => out.push(Action::Drop {
                packet,
                reason: DropReason::NoRoute,
            }),
        }
    }

    fn on_link_failure(
        &mut self,
        ctx: &NodeContext<'_>,
        next_hop: NodeId,
        packet: Packet,
        out: &mut Vec<Action>,
    ) {
        self.purge_link(self.id, next_hop);
        if !packet.is_data() {
            out.push(Action::Drop {
                packet,
                reason: DropReason::NoRoute,
            });
            return;
        }
        if packet.src == self.id {
            self.send_from_source(ctx, packet, ctx.now, out);
            return;
        }
        let route = &packet.data_header().expect("data packet").source_route;
        if let Some(k) = route.iter().position(|&n| n == self.id) {
            if k > 0 {
                let route_back: Vec<NodeId> = route[..=k].iter().rev().copied().collect();
                let next = route_back[1];
                let err = ctx.control(Body::DsrError {
                    broken: (self.id, next_hop),
                    route_back,
                });
                out.push(Action::Unicast {
                    next_hop: next,
                    packet: err,
                });
            }
        }
        out.push(Action::Drop {
            packet,
            reason: DropReason::NoRoute,
        });
    }

    fn on_timer(&mut self, ctx: &NodeContext<'_>, timer: Timer, out: &mut Vec<Action>) {
        let Some(d) = self.discoveries.get(&timer.dest).copied() else {
            return;
        };
        if d.generation != timer.generation {
            return;
        }
        let limit = ctx.now - ctx.params.dsr_send_buffer_timeout;
        if let Some(queue) = self.buffers.get_mut(&timer.dest) {
            while queue.front().is_some_and(|(_, t)| *t <= limit) {
                let (packet, _) = queue.pop_front().expect("front exists");
                out.push(Action::Drop {
                    packet,
                    reason: DropReason::NoRoute,
                });
            }
        }
        if self.buffers.get(&timer.dest).is_none_or(|q| q.is_empty()) {
            self.buffers.remove(&timer.dest);
            self.discoveries.remove(&timer.dest);
        } else if self.best_route(timer.dest).is_some() {
            self.flush(ctx, timer.dest, out);
        } else {
            let backoff = (d.backoff * 2.0).min(ctx.params.dsr_backoff_max);
            self.send_request(ctx, timer.dest, backoff, out);
        }
    }
}

impl Router for DsrRouter {
    fn handle(&mut self, ctx: &NodeContext<'_>, event: RouterEvent) -> Vec<Action> {
        let mut out = Vec::new();
        match event {
            RouterEvent::Originate(packet) => self.send_from_source(ctx, packet, ctx.now, &mut out),
            RouterEvent::Receive { from, packet } => match packet.body {
                Body::Data(_) => self.forward_data(packet, &mut out),
                Body::DsrRequest { .. } => self.on_request(ctx, from, packet, &mut out),
                Body::DsrReply { .. } => self.on_reply(ctx, packet, &mut out),
                Body::DsrError { .. } => self.on_error(packet, &mut out),
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
        std::mem::take(&mut self.buffers)
            .into_values()
            .flatten()
            .map(|(p, _)| p)
            .collect()
    }
}
