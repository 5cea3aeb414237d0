//! Simplified AODV: on-demand discovery with destination sequence numbers,
//! first-reply route choice and RERR-driven invalidation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::packet::{Body, Packet};
use super::report::DropReason;
use super::routing::{
    buffer_packet, Action, DuplicateCache, NodeContext, Router, RouterEvent, Timer,
};
use super::SimParams;
use crate::geometry::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub next_hop: NodeId,
    pub hops: u32,
    pub dest_seq: u32,
    pub valid: bool,
    pub expires: f64,
    /// Upstream neighbors that forward through this route.
    pub precursors: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, Copy)]
struct Discovery {
    attempts: u32,
    generation: u64,
}

#[derive(Debug, Clone)]
pub struct AodvRouter {
    id: NodeId,
    seq: u32,
    bcast_id: u32,
    routes: BTreeMap<NodeId, Route>,
    seen: DuplicateCache<(NodeId, u32)>,
    buffers: BTreeMap<NodeId, VecDeque<Packet>>,
    discoveries: BTreeMap<NodeId, Discovery>,
    generation: u64,
}

impl AodvRouter {
    pub fn new(id: NodeId, params: &SimParams) -> Self {
        AodvRouter {
            id,
            seq: 0,
            bcast_id: 0,
            routes: BTreeMap::new(),
            seen: DuplicateCache::new(params.dup_cache_size),
            buffers: BTreeMap::new(),
            discoveries: BTreeMap::new(),
            generation: 0,
        }
    }

    pub fn route(&self, dest: NodeId) -> Option<&Route> {
        self.routes.get(&dest)
    }

    pub fn sequence_number(&self) -> u32 {
        self.seq
    }

    fn active(&self, dest: NodeId, now: f64) -> Option<&Route> {
        self.routes
            .get(&dest)
            .filter(|r| r.valid && r.expires >= now)
    }

    fn is_active(&self, dest: NodeId, now: f64) -> bool {
        self.active(dest, now).is_some()
    }

    fn route_data(
        &mut self,
        ctx: &NodeContext<'_>,
        packet: Packet,
        from: Option<NodeId>,
        out: &mut Vec<Action>,
    ) {
        let dst = packet.data_dst().expect("route_data takes data packets");
        if dst == self.id {
            out.push(Action::Deliver(packet));
            return;
        }
        let lifetime = ctx.now + ctx.params.route_lifetime;
        if self.is_active(dst, ctx.now) {
            let route = self.routes.get_mut(&dst).expect("active route exists");
            route.expires = route.expires.max(lifetime);
            if let Some(f) = from {
                route.precursors.insert(f);
            }
            let next_hop = route.next_hop;
            out.push(Action::Unicast { next_hop, packet });
            return;
        }
        match from {
            None => {
                let queue = self.buffers.entry(dst).or_default();
                buffer_packet(queue, packet, ctx.params.buffer_capacity, out);
                self.discover(ctx, dst, out);
            }
            Some(f) => {
                let seq = self.routes.get(&dst).map_or(0, |r| r.dest_seq);
                out.push(Action::Drop {
                    packet,
                    reason: DropReason::NoRoute,
                });
                let rerr = ctx.control(Body::Rerr {
                    unreachable: vec![(dst, seq)],
                });
                out.push(Action::Unicast {
                    next_hop: f,
                    packet: rerr,
                });
            }
        }
    }

    fn discover(&mut self, ctx: &NodeContext<'_>, dest: NodeId, out: &mut Vec<Action>) {
        if !self.discoveries.contains_key(&dest) {
            self.send_rreq(ctx, dest, 0, out);
        }
    }

    fn send_rreq(
        &mut self,
        ctx: &NodeContext<'_>,
        dest: NodeId,
        attempts: u32,
        out: &mut Vec<Action>,
    ) {
        self.seq += 1;
        self.bcast_id += 1;
        self.generation += 1;
        self.seen.insert((self.id, self.bcast_id));
        let rreq = ctx.control(Body::Rreq {
            origin: self.id,
            origin_seq: self.seq,
            bcast_id: self.bcast_id,
            dest,
            dest_seq: self.routes.get(&dest).map(|r| r.dest_seq),
        });
        out.push(Action::Broadcast(rreq));
        self.discoveries.insert(
            dest,
            Discovery {
                attempts: attempts + 1,
                generation: self.generation,
            },
        );
        out.push(Action::Schedule {
            delay: ctx.params.rreq_timeout * f64::from(1u32 << attempts.min(16)),
            timer: Timer {
                dest,
                generation: self.generation,
            },
        });
    }

    fn flush(&mut self, ctx: &NodeContext<'_>, dest: NodeId, out: &mut Vec<Action>) {
        self.discoveries.remove(&dest);
        if let Some(queue) = self.buffers.remove(&dest) {
            for packet in queue {
                self.route_data(ctx, packet, None, out);
            }
        }
    }

    /// Installs the offered route if none is active or the offer is fresher.
    fn offer_route(
        &mut self,
        now: f64,
        lifetime: f64,
        dest: NodeId,
        next_hop: NodeId,
        hops: u32,
        seq: u32,
        prefer_shorter: bool,
    ) {
        let active = self.is_active(dest, now);
        match self.routes.get_mut(&dest) {
            Some(r)
                if active
                    && !(seq > r.dest_seq
                        || (prefer_shorter && seq == r.dest_seq && hops < r.hops)) =>
            {
                if r.next_hop == next_hop {
                    r.expires = r.expires.max(now + lifetime);
                }
            }
            Some(r) => {
                r.next_hop = next_hop;
                r.hops = hops;
                r.dest_seq = if active { seq } else { seq.max(r.dest_seq) };
                r.valid = true;
                r.expires = now + lifetime;
            }
            None => {
                self.routes.insert(
                    dest,
                    Route {
                        next_hop,
                        hops,
                        dest_seq: seq,
                        valid: true,
                        expires: now + lifetime,
                        precursors: BTreeSet::new(),
                    },
                );
            }
        }
    }

    fn on_rreq(
        &mut self,
        ctx: &NodeContext<'_>,
        from: NodeId,
        packet: Packet,
        out: &mut Vec<Action>,
    ) {
        let Body::Rreq {
            origin,
            origin_seq,
            bcast_id,
            dest,
            dest_seq,
        } = packet.body
        else {
            unreachable!()
        };
        if !self.seen.insert((origin, bcast_id)) {
            return;
        }
        let lifetime = ctx.params.route_lifetime;
        self.offer_route(
            ctx.now,
            lifetime,
            origin,
            from,
            packet.hop_count,
            origin_seq,
            true,
        );

        if dest == self.id {
            if let Some(s) = dest_seq {
                self.seq = self.seq.max(s);
            }
            let rrep = ctx.control(Body::Rrep {
                origin,
                dest: self.id,
                dest_seq: self.seq,
                hops: 0,
            });
            out.push(Action::Unicast {
                next_hop: from,
                packet: rrep,
            });
            return;
        }
        let cached = self
            .active(dest, ctx.now)
            .filter(|r| r.next_hop != from && dest_seq.is_none_or(|s| r.dest_seq >= s))
            .map(|r| (r.next_hop, r.hops, r.dest_seq));
        if let Some((next, hops, seq)) = cached {
            if let Some(r) = self.routes.get_mut(&dest) {
                r.precursors.insert(from);
            }
            if let Some(r) = self.routes.get_mut(&origin) {
                r.precursors.insert(next);
            }
            let rrep = ctx.control(Body::Rrep {
                origin,
                dest,
                dest_seq: seq,
                hops,
            });
            out.push(Action::Unicast {
                next_hop: from,
                packet: rrep,
            });
            return;
        }
        if packet.hop_count < ctx.params.ttl {
            out.push(Action::Broadcast(Packet {
                body: Body::Rreq {
                    origin,
                    origin_seq,
                    bcast_id,
                    dest,
                    dest_seq,
                },
                ..packet
            }));
        }
    }

    fn on_rrep(
        &mut self,
        ctx: &NodeContext<'_>,
        from: NodeId,
        packet: Packet,
        out: &mut Vec<Action>,
    ) {
        let Body::Rrep {
            origin,
            dest,
            dest_seq,
            hops,
        } = packet.body
        else {
            unreachable!()
        };
        let total = hops + packet.hop_count;
        self.offer_route(
            ctx.now,
            ctx.params.route_lifetime,
            dest,
            from,
            total,
            dest_seq,
            false,
        );
        if origin == self.id {
            if self.is_active(dest, ctx.now) {
                self.flush(ctx, dest, out);
            }
            return;
        }
        let Some(back) = self.active(origin, ctx.now).map(|r| r.next_hop) else {
            out.push(Action::Drop {
                packet,
                reason: DropReason::NoRoute,
            });
            return;
        };
        if let Some(r) = self.routes.get_mut(&dest) {
            r.precursors.insert(back);
        }
        out.push(Action::Unicast {
            next_hop: back,
            packet,
        });
    }

    fn on_rerr(
        &mut self,
        ctx: &NodeContext<'_>,
        from: NodeId,
        unreachable: Vec<(NodeId, u32)>,
        out: &mut Vec<Action>,
    ) {
        let mut notify: BTreeMap<NodeId, Vec<(NodeId, u32)>> = BTreeMap::new();
        for (dest, seq) in unreachable {
            let Some(r) = self.routes.get_mut(&dest) else {
                continue;
            };
            if !(r.valid && r.next_hop == from) {
                continue;
            }
            r.valid = false;
            r.dest_seq = r.dest_seq.max(seq);
            for p in std::mem::take(&mut r.precursors) {
                notify.entry(p).or_default().push((dest, r.dest_seq));
            }
        }
        self.send_rerrs(ctx, notify, out);
    }

    fn send_rerrs(
        &self,
        ctx: &NodeContext<'_>,
        notify: BTreeMap<NodeId, Vec<(NodeId, u32)>>,
        out: &mut Vec<Action>,
    ) {
        for (next_hop, unreachable) in notify {
            if next_hop == self.id {
                continue;
            }
            out.push(Action::Unicast {
                next_hop,
                packet: ctx.control(Body::Rerr { unreachable }),
            });
        }
    }

    fn on_link_failure(
        &mut self,
        ctx: &NodeContext<'_>,
        next_hop: NodeId,
        packet: Packet,
        out: &mut Vec<Action>,
    ) {
        let mut notify: BTreeMap<NodeId, Vec<(NodeId, u32)>> = BTreeMap::new();
        for (dest, r) in self.routes.iter_mut() {
            if r.valid && r.next_hop == next_hop {
                r.valid = false;
                r.dest_seq += 1;
                for p in std::mem::take(&mut r.precursors) {
                    notify.entry(p).or_default().push((*dest, r.dest_seq));
                }
            }
        }
        self.send_rerrs(ctx, notify, out);
        if packet.is_data() {
            if packet.src == self.id {
                self.route_data(ctx, packet, None, out);
            } else {
                out.push(Action::Drop {
                    packet,
                    reason: DropReason::NoRoute,
                });
            }
        } else {
            out.push(Action::Drop {
                packet,
                reason: DropReason::NoRoute,
            });
        }
    }

    fn on_timer(&mut self, ctx: &NodeContext<'_>, timer: Timer, out: &mut Vec<Action>) {
        let Some(d) = self.discoveries.get(&timer.dest).copied() else {
            return;
        };
        if d.generation != timer.generation {
            return;
        }
        if self.is_active(timer.dest, ctx.now) {
            self.flush(ctx, timer.dest, out);
        } else if d.attempts <= ctx.params.rreq_retries {
            self.send_rreq(ctx, timer.dest, d.attempts, out);
        } else {
            self.discoveries.remove(&timer.dest);
            for packet in self.buffers.remove(&timer.dest).unwrap_or_default() {
                out.push(Action::Drop {
                    packet,
                    reason: DropReason::NoRoute,
                });
            }
        }
    }
}

impl Router for AodvRouter {
    fn handle(&mut self, ctx: &NodeContext<'_>, event: RouterEvent) -> Vec<Action> {
        let mut out = Vec::new();
        match event {
            RouterEvent::Originate(packet) => self.route_data(ctx, packet, None, &mut out),
            RouterEvent::Receive { from, packet } => match &packet.body {
                Body::Data(_) => self.route_data(ctx, packet, Some(from), &mut out),
                Body::Rreq { .. } => self.on_rreq(ctx, from, packet, &mut out),
                Body::Rrep { .. } => self.on_rrep(ctx, from, packet, &mut out),
                Body::Rerr { unreachable } => {
                    let list = unreachable.clone();
                    self.on_rerr(ctx, from, list, &mut out);
                }
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
            .collect()
    }
}
