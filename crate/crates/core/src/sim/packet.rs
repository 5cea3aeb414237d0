use std::fmt;

use crate::geometry::NodeId;

use super::tora::Height;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PacketKind {
    Data,
    Rreq,
    Rrep,
    Rerr,
    DsrReq,
    DsrRep,
    DsrErr,
    Qry,
    Upd,
}

impl PacketKind {
    pub fn name(self) -> &'static str {
        match self {
            PacketKind::Data => "data",
            PacketKind::Rreq => "rreq",
            PacketKind::Rrep => "rrep",
            PacketKind::Rerr => "rerr",
            PacketKind::DsrReq => "dsr_req",
            PacketKind::DsrRep => "dsr_rep",
            PacketKind::DsrErr => "dsr_err",
            PacketKind::Qry => "qry",
            PacketKind::Upd => "upd",
        }
    }
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataHeader {
    pub flow: usize,
    pub seq: u64,
    pub dst: NodeId,
    /// Full source route, filled in by DSR only.
    pub source_route: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Data(DataHeader),
    Rreq {
        origin: NodeId,
        origin_seq: u32,
        bcast_id: u32,
        dest: NodeId,
        /// Last destination sequence number known to the origin.
        dest_seq: Option<u32>,
    },
    Rrep {
        origin: NodeId,
        dest: NodeId,
        dest_seq: u32,
        /// Hops from the replying node to `dest`.
        hops: u32,
    },
    Rerr {
        unreachable: Vec<(NodeId, u32)>,
    },
    DsrRequest {
        origin: NodeId,
        req_id: u32,
        target: NodeId,
        record: Vec<NodeId>,
    },
    DsrReply {
        route: Vec<NodeId>,
    },
    DsrError {
        broken: (NodeId, NodeId),
        /// From the node reporting the break back to the data source.
        route_back: Vec<NodeId>,
    },
    Query {
        dest: NodeId,
        origin: NodeId,
        qid: u32,
    },
    Update {
        dest: NodeId,
        height: Option<Height>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub id: u64,
    /// Node that created the packet.
    pub src: NodeId,
    pub origin_time: f64,
    /// Hops traversed so far.
    pub hop_count: u32,
    pub size_bits: u32,
    /// Nodes visited, starting with `src`; maintained for data packets only.
    pub path: Vec<NodeId>,
    pub body: Body,
}

impl Packet {
    pub fn data(
        id: u64,
        src: NodeId,
        dst: NodeId,
        flow: usize,
        seq: u64,
        time: f64,
        size_bits: u32,
    ) -> Packet {
        Packet {
            id,
            src,
            origin_time: time,
            hop_count: 0,
            size_bits,
            path: vec![src],
            body: Body::Data(DataHeader {
                flow,
                seq,
                dst,
                source_route: Vec::new(),
            }),
        }
    }

    pub fn control(id: u64, src: NodeId, time: f64, size_bits: u32, body: Body) -> Packet {
        Packet {
            id,
            src,
            origin_time: time,
            hop_count: 0,
            size_bits,
            path: Vec::new(),
            body,
        }
    }

    pub fn kind(&self) -> PacketKind {
        match self.body {
            Body::Data(_) => PacketKind::Data,
            Body::Rreq { .. } => PacketKind::Rreq,
            Body::Rrep { .. } => PacketKind::Rrep,
            Body::Rerr { .. } => PacketKind::Rerr,
            Body::DsrRequest { .. } => PacketKind::DsrReq,
            Body::DsrReply { .. } => PacketKind::DsrRep,
            Body::DsrError { .. } => PacketKind::DsrErr,
            Body::Query { .. } => PacketKind::Qry,
            Body::Update { .. } => PacketKind::Upd,
        }
    }

    pub fn is_data(&self) -> bool {
        matches!(self.body, Body::Data(_))
    }

    /// Final destination of a data packet.
    pub fn data_dst(&self) -> Option<NodeId> {
        match &self.body {
            Body::Data(h) => Some(h.dst),
            _ => None,
        }
    }

    pub fn data_header(&self) -> Option<&DataHeader> {
        match &self.body {
            Body::Data(h) => Some(h),
            _ => None,
        }
    }

    pub fn data_header_mut(&mut self) -> Option<&mut DataHeader> {
        match &mut self.body {
            Body::Data(h) => Some(h),
            _ => None,
        }
    }
}
