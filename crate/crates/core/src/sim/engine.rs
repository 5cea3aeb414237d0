use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::aodv::AodvRouter;
use super::dsr::DsrRouter;
use super::packet::{Packet, PacketKind};
use super::report::{DeliveryRecord, DropReason, SimReport};
use super::routing::{Action, NodeContext, Router, RouterEvent, Timer};
use super::tora::ToraRouter;
use super::traffic::TrafficFlow;
use super::{Protocol, RadioModel, SimError, SimParams};
use crate::geometry::{MobilityTrace, NodeId, Vec2};

/// Routing state of one node.
#[derive(Debug, Clone)]
pub enum NodeRouter {
    Aodv(AodvRouter),
    Dsr(DsrRouter),
    Tora(ToraRouter),
}

impl NodeRouter {
    pub fn new(protocol: Protocol, node: NodeId, params: &SimParams) -> Self {
        match protocol {
            Protocol::Aodv => NodeRouter::Aodv(AodvRouter::new(node, params)),
            Protocol::Dsr => NodeRouter::Dsr(DsrRouter::new(node, params)),
            Protocol::Tora => NodeRouter::Tora(ToraRouter::new(node, params)),
        }
    }
}

impl Router for NodeRouter {
    fn handle(&mut self, ctx: &NodeContext<'_>, event: RouterEvent) -> Vec<Action> {
        match self {
            NodeRouter::Aodv(r) => r.handle(ctx, event),
            NodeRouter::Dsr(r) => r.handle(ctx, event),
            NodeRouter::Tora(r) => r.handle(ctx, event),
        }
    }

    fn drain_buffered(&mut self) -> Vec<Packet> {
        match self {
            NodeRouter::Aodv(r) => r.drain_buffered(),
            NodeRouter::Dsr(r) => r.drain_buffered(),
            NodeRouter::Tora(r) => r.drain_buffered(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Originate,
    /// A frame left the interface queue.
    Send,
    /// The frame reached `peer`; distance was within range at transmit time.
    Hop,
    /// Unicast receiver out of range; the sender's router is told.
    Fail,
    /// Frame lost to the loss draw.
    Lost,
    Receive,
    Deliver,
    Drop(DropReason),
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::Originate => f.write_str("originate"),
            EventKind::Send => f.write_str("send"),
            EventKind::Hop => f.write_str("hop"),
            EventKind::Fail => f.write_str("fail"),
            EventKind::Lost => f.write_str("lost"),
            EventKind::Receive => f.write_str("recv"),
            EventKind::Deliver => f.write_str("deliver"),
            EventKind::Drop(r) => write!(f, "drop:{r}"),
        }
    }
}

/// One event-log line: `time node kind packet_id peer packet_kind`, with
/// `*` for a broadcast or absent peer.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub node: NodeId,
    pub kind: EventKind,
    pub packet_id: u64,
    pub peer: Option<NodeId>,
    pub packet_kind: PacketKind,
}

impl fmt::Display for EventRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.9} {} {} {} ",
            self.time, self.node, self.kind, self.packet_id
        )?;
        match self.peer {
            Some(p) => write!(f, "{p}")?,
            None => f.write_str("*")?,
        }
        write!(f, " {}", self.packet_kind)
    }
}

/// Checks every `hop` record against the trace; returns the number checked.
pub fn audit_hops(
    trace: &MobilityTrace,
    events: &[EventRecord],
    range: f64,
) -> Result<usize, String> {
    let mut checked = 0;
    for e in events.iter().filter(|e| e.kind == EventKind::Hop) {
        let peer = e
            .peer
            .ok_or_else(|| format!("hop without receiver at t={}", e.time))?;
        let a = trace
            .position_at(e.node, e.time)
            .map_err(|err| err.to_string())?;
        let b = trace
            .position_at(peer, e.time)
            .map_err(|err| err.to_string())?;
        let d = a.distance(b);
        if d > range + 1e-9 {
            return Err(format!(
                "hop {}->{} at t={} spans {d} m > {range} m",
                e.node, peer, e.time
            ));
        }
        checked += 1;
    }
    Ok(checked)
}

#[derive(Debug)]
enum Event {
    Generate {
        flow: usize,
    },
    TxDone {
        node: NodeId,
    },
    Arrive {
        to: NodeId,
        from: NodeId,
        packet: Packet,
    },
    MacFailure {
        node: NodeId,
        next_hop: NodeId,
        packet: Packet,
    },
    Timer {
        node: NodeId,
        timer: Timer,
    },
    Enqueue {
        node: NodeId,
        packet: Packet,
    },
}

impl Event {
    fn carried_data(&self) -> bool {
        match self {
            Event::Arrive { packet, .. }
            | Event::MacFailure { packet, .. }
            | Event::Enqueue { packet, .. } => packet.is_data(),
            _ => false,
        }
    }
}

#[derive(Debug)]
struct Scheduled {
    time: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // reversed: BinaryHeap pops the earliest (time, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug)]
struct Frame {
    next_hop: Option<NodeId>,
    packet: Packet,
}

/// One simulation run. Build with [`Simulation::new`], call [`Simulation::run`] once.
pub struct Simulation<'a> {
    trace: &'a MobilityTrace,
    flows: Vec<TrafficFlow>,
    radio: RadioModel,
    params: SimParams,
    rng: ChaCha8Rng,
    heap: BinaryHeap<Scheduled>,
    seq: u64,
    now: f64,
    queues: Vec<VecDeque<Frame>>,
    busy: Vec<bool>,
    routers: Vec<NodeRouter>,
    ids: Cell<u64>,
    report: SimReport,
    shortest: HashMap<u64, Option<u32>>,
    events: Vec<EventRecord>,
    finished: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(
        trace: &'a MobilityTrace,
        flows: &[TrafficFlow],
        protocol: Protocol,
        radio: RadioModel,
        params: SimParams,
        seed: u64,
    ) -> Result<Self, SimError> {
        radio.validate()?;
        params.validate()?;
        for (k, f) in flows.iter().enumerate() {
            f.validate(k, trace.node_count, trace.duration)?;
        }
        let n = trace.node_count;
        Ok(Simulation {
            trace,
            flows: flows.to_vec(),
            radio,
            rng: ChaCha8Rng::seed_from_u64(seed),
            heap: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            queues: (0..n).map(|_| VecDeque::new()).collect(),
            busy: vec![false; n],
            routers: (0..n)
                .map(|i| NodeRouter::new(protocol, i, &params))
                .collect(),
            params,
            ids: Cell::new(0),
            report: SimReport::new(protocol),
            shortest: HashMap::new(),
            events: Vec::new(),
            finished: false,
        })
    }

    pub fn run(&mut self) -> SimReport {
        assert!(!self.finished, "a simulation runs once");
        self.finished = true;
        for k in 0..self.flows.len() {
            let f = &self.flows[k];
            if f.start < f.stop {
                let t = f.start;
                self.schedule(t, Event::Generate { flow: k });
            }
        }
        while let Some(next) = self.heap.pop() {
            if next.time > self.trace.duration {
                self.heap.push(next);
                break;
            }
            self.now = next.time;
            self.dispatch(next.event);
        }
        self.finish();
        self.report.clone()
    }

    /// Event log of the run; empty unless `record_events` was set.
    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn routers(&self) -> &[NodeRouter] {
        &self.routers
    }

    fn finish(&mut self) {
        self.now = self.trace.duration;
        let queued: u64 = self
            .queues
            .iter()
            .map(|q| q.iter().filter(|f| f.packet.is_data()).count() as u64)
            .sum();
        let pending = self.heap.iter().filter(|s| s.event.carried_data()).count() as u64;
        self.report.in_flight_at_end = queued + pending;
        for node in 0..self.routers.len() {
            for packet in self.routers[node].drain_buffered() {
                self.drop_packet(node, packet, DropReason::ExpiredAtEnd);
            }
        }
        debug_assert!(
            self.report.is_conserved(),
            "conservation violated: {:?}",
            self.report
        );
    }

    fn schedule(&mut self, time: f64, event: Event) {
        self.seq += 1;
        self.heap.push(Scheduled {
            time,
            seq: self.seq,
            event,
        });
    }

    fn log(&mut self, node: NodeId, kind: EventKind, packet: &Packet, peer: Option<NodeId>) {
        if self.params.record_events {
            self.events.push(EventRecord {
                time: self.now,
                node,
                kind,
                packet_id: packet.id,
                peer,
                packet_kind: packet.kind(),
            });
        }
    }

    fn position(&self, node: NodeId) -> Vec2 {
        let t = self.now.clamp(0.0, self.trace.duration);
        self.trace
            .position_at(node, t)
            .expect("node and time validated before the run")
    }

    fn positions(&self) -> Vec<Vec2> {
        (0..self.trace.node_count)
            .map(|i| self.position(i))
            .collect()
    }

    fn shortest_hops(&self, src: NodeId, dst: NodeId) -> Option<u32> {
        let pos = self.positions();
        let n = pos.len();
        let mut dist = vec![u32::MAX; n];
        let mut queue = VecDeque::from([src]);
        dist[src] = 0;
        while let Some(u) = queue.pop_front() {
            if u == dst {
                return Some(dist[u]);
            }
            for v in 0..n {
                if dist[v] == u32::MAX && pos[u].distance(pos[v]) <= self.radio.range {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        None
    }

    fn loss_passes(&mut self) -> bool {
        self.radio.loss_probability <= 0.0 || self.rng.gen::<f64>() >= self.radio.loss_probability
    }

    fn dispatch(&mut self, event: Event) {
        match event {
            Event::Generate { flow } => self.generate(flow),
            Event::TxDone { node } => {
                self.busy[node] = false;
                self.start_tx(node);
            }
            Event::Arrive { to, from, packet } => self.arrive(to, from, packet),
            Event::MacFailure {
                node,
                next_hop,
                packet,
            } => {
                self.log(node, EventKind::Fail, &packet, Some(next_hop));
                self.invoke(node, RouterEvent::LinkFailure { next_hop, packet });
            }
            Event::Timer { node, timer } => self.invoke(node, RouterEvent::Timer(timer)),
            Event::Enqueue { node, packet } => self.enqueue(node, None, packet),
        }
    }

    fn generate(&mut self, k: usize) {
        let flow = self.flows[k].clone();
        // packet times come from the start time, not by accumulation
        let m = ((self.now - flow.start) / flow.interval()).round();
        let packet = Packet::data(
            self.next_id(),
            flow.src,
            flow.dst,
            k,
            m as u64,
            self.now,
            flow.packet_bits,
        );
        self.report.originated += 1;
        let shortest = self.shortest_hops(flow.src, flow.dst);
        self.report.shortest_at_origination.push(shortest);
        self.shortest.insert(packet.id, shortest);
        self.log(flow.src, EventKind::Originate, &packet, Some(flow.dst));
        self.invoke(flow.src, RouterEvent::Originate(packet));

        let next = flow.start + (m + 1.0) * flow.interval();
        if next < flow.stop - 1e-9 {
            self.schedule(next, Event::Generate { flow: k });
        }
    }

    fn next_id(&self) -> u64 {
        let id = self.ids.get();
        self.ids.set(id + 1);
        id
    }

    fn arrive(&mut self, to: NodeId, from: NodeId, mut packet: Packet) {
        self.log(to, EventKind::Receive, &packet, Some(from));
        packet.hop_count += 1;
        if let Some(dst) = packet.data_dst() {
            if packet.path.contains(&to) {
                // a routing loop; counted with hop-limit drops
                self.drop_packet(to, packet, DropReason::Ttl);
                return;
            }
            packet.path.push(to);
            if dst != to && packet.hop_count >= self.params.ttl {
                self.drop_packet(to, packet, DropReason::Ttl);
                return;
            }
        }
        self.invoke(to, RouterEvent::Receive { from, packet });
    }

    fn invoke(&mut self, node: NodeId, event: RouterEvent) {
        let ctx = NodeContext::new(node, self.now, &self.params, &self.ids);
        let actions = self.routers[node].handle(&ctx, event);
        for action in actions {
            match action {
                Action::Unicast { next_hop, packet } => {
                    debug_assert_ne!(next_hop, node, "unicast to self");
                    self.enqueue(node, Some(next_hop), packet);
                }
                Action::Broadcast(packet) => {
                    if self.radio.broadcast_jitter > 0.0 {
                        let t = self.now + self.rng.gen::<f64>() * self.radio.broadcast_jitter;
                        self.schedule(t, Event::Enqueue { node, packet });
                    } else {
                        self.enqueue(node, None, packet);
                    }
                }
                Action::Deliver(packet) => self.deliver(node, packet),
                Action::Drop { packet, reason } => self.drop_packet(node, packet, reason),
                Action::Schedule { delay, timer } => {
                    let t = self.now + delay;
                    self.schedule(t, Event::Timer { node, timer });
                }
            }
        }
    }

    fn deliver(&mut self, node: NodeId, packet: Packet) {
        debug_assert_eq!(packet.data_dst(), Some(node), "delivered at the wrong node");
        self.log(node, EventKind::Deliver, &packet, Some(packet.src));
        let flow = packet.data_header().map_or(0, |h| h.flow);
        let shortest = self.shortest.remove(&packet.id).flatten();
        self.report.delivered += 1;
        self.report.deliveries.push(DeliveryRecord {
            packet_id: packet.id,
            flow,
            origin_time: packet.origin_time,
            delivered_at: self.now,
            hop_count: packet.hop_count,
            shortest_hops: shortest,
            path: packet.path,
        });
    }

    fn drop_packet(&mut self, node: NodeId, packet: Packet, reason: DropReason) {
        self.log(node, EventKind::Drop(reason), &packet, None);
        if packet.is_data() {
            self.shortest.remove(&packet.id);
            self.report.dropped.add(reason);
        } else {
            self.report.control_dropped += 1;
        }
    }

    fn enqueue(&mut self, node: NodeId, next_hop: Option<NodeId>, packet: Packet) {
        if self.queues[node].len() >= self.params.queue_capacity {
            self.drop_packet(node, packet, DropReason::QueueOverflow);
            return;
        }
        self.queues[node].push_back(Frame { next_hop, packet });
        self.start_tx(node);
    }

    fn start_tx(&mut self, node: NodeId) {
        if self.busy[node] {
            return;
        }
        let Some(frame) = self.queues[node].pop_front() else {
            return;
        };
        self.busy[node] = true;
        let packet = frame.packet;
        let done = self.now + self.radio.tx_time(packet.size_bits);
        let arrival = done + self.radio.per_hop_latency;
        if packet.is_data() {
            self.report.data_transmissions += 1;
        } else {
            self.report.routing_transmissions += 1;
            *self
                .report
                .routing_by_kind
                .entry(packet.kind())
                .or_insert(0) += 1;
        }
        self.log(node, EventKind::Send, &packet, frame.next_hop);
        let here = self.position(node);
        match frame.next_hop {
            Some(to) => {
                if here.distance(self.position(to)) <= self.radio.range {
                    if self.loss_passes() {
                        self.log(node, EventKind::Hop, &packet, Some(to));
                        self.schedule(
                            arrival,
                            Event::Arrive {
                                to,
                                from: node,
                                packet,
                            },
                        );
                    } else {
                        self.log(node, EventKind::Lost, &packet, Some(to));
                        self.drop_packet(node, packet, DropReason::LinkLoss);
                    }
                } else {
                    self.schedule(
                        arrival,
                        Event::MacFailure {
                            node,
                            next_hop: to,
                            packet,
                        },
                    );
                }
            }
            None => {
                for to in 0..self.trace.node_count {
                    if to == node || here.distance(self.position(to)) > self.radio.range {
                        continue;
                    }
                    if self.loss_passes() {
                        self.log(node, EventKind::Hop, &packet, Some(to));
                        self.schedule(
                            arrival,
                            Event::Arrive {
                                to,
                                from: node,
                                packet: packet.clone(),
                            },
                        );
                    } else {
                        self.log(node, EventKind::Lost, &packet, Some(to));
                    }
                }
            }
        }
        self.schedule(done, Event::TxDone { node });
    }
}

/// Runs one simulation to the end of the trace.
pub fn run_simulation(
    trace: &MobilityTrace,
    flows: &[TrafficFlow],
    protocol: Protocol,
    radio: RadioModel,
    params: SimParams,
    seed: u64,
) -> Result<SimReport, SimError> {
    Ok(Simulation::new(trace, flows, protocol, radio, params, seed)?.run())
}
