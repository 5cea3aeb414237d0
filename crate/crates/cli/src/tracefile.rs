//! Native text trace format.
//!
//! ```text
//! # manet-trace 1
//! # nodes 2
//! # duration 1
//! # sample_interval 1
//! # area 1000 1000
//! # seed 7
//! # model gvmm
//! # param max_speed 20
//! time id x y speed heading
//! 0 0 10 20 1.5 0
//! ...
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! gives the exact trace that was written.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use manet_core::geometry::{validate_trace, MobilityTrace, NodeState, SimulationArea, Vec2};
use thiserror::Error;

pub const MAGIC: &str = "# manet-trace 1";
const COLUMNS: &str = "time id x y speed heading";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceFileError {
    #[error("empty trace file")]
    Empty,
    #[error("line 1: not a manet trace (expected `{MAGIC}`)")]
    BadMagic,
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("missing header `{0}`")]
    MissingHeader(&'static str),
    #[error("trace is inconsistent: {0}")]
    Invalid(String),
}

/// Header values besides the trace shape.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceMeta {
    pub seed: Option<u64>,
    pub model: Option<String>,
    pub params: BTreeMap<String, String>,
}

pub fn write_trace(trace: &MobilityTrace, meta: &TraceMeta) -> String {
    let mut out = String::with_capacity(64 * trace.samples.len() + 256);
    out.push_str(MAGIC);
    out.push('\n');
    let _ = writeln!(out, "# nodes {}", trace.node_count);
    let _ = writeln!(out, "# duration {}", trace.duration);
    let _ = writeln!(out, "# sample_interval {}", trace.sample_interval);
    let _ = writeln!(out, "# area {} {}", trace.area.width, trace.area.height);
    if let Some(seed) = meta.seed {
        let _ = writeln!(out, "# seed {seed}");
    }
    if let Some(model) = &meta.model {
        let _ = writeln!(out, "# model {model}");
    }
    for (k, v) in &meta.params {
        let _ = writeln!(out, "# param {k} {v}");
    }
    out.push_str(COLUMNS);
    out.push('\n');
    for s in &trace.samples {
        let st = &s.state;
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            s.time, s.node_id, st.position.x, st.position.y, st.speed, st.heading
        );
    }
    out
}

fn line_err(line: usize, reason: impl Into<String>) -> TraceFileError {
    TraceFileError::Line {
        line,
        reason: reason.into(),
    }
}

fn num<T: std::str::FromStr>(
    field: Option<&str>,
    what: &str,
    line: usize,
) -> Result<T, TraceFileError> {
    let raw = field.ok_or_else(|| line_err(line, format!("missing {what}")))?;
    raw.parse()
        .map_err(|_| line_err(line, format!("bad {what} `{raw}`")))
}

pub fn read_trace(text: &str) -> Result<(MobilityTrace, TraceMeta), TraceFileError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        None => return Err(TraceFileError::Empty),
        Some((_, l)) if l.is_empty() && text.trim().is_empty() => {
            return Err(TraceFileError::Empty)
        }
        Some((_, l)) if l != MAGIC => return Err(TraceFileError::BadMagic),
        _ => {}
    }
    let mut nodes = None;
    let mut duration = None;
    let mut dt = None;
    let mut area = None;
    let mut meta = TraceMeta::default();
    let mut rows: Vec<Vec<NodeState>> = Vec::new();
    let mut header_done = false;
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if header_done {
                continue;
            }
            let mut f = rest.split_whitespace();
            match f.next() {
                Some("nodes") => nodes = Some(num::<usize>(f.next(), "node count", n)?),
                Some("duration") => duration = Some(num::<f64>(f.next(), "duration", n)?),
                Some("sample_interval") => dt = Some(num::<f64>(f.next(), "sample interval", n)?),
                Some("area") => {
                    let w = num::<f64>(f.next(), "area width", n)?;
                    let h = num::<f64>(f.next(), "area height", n)?;
                    area = Some(SimulationArea::new(w, h).map_err(|e| line_err(n, e.to_string()))?);
                }
                Some("seed") => meta.seed = Some(num::<u64>(f.next(), "seed", n)?),
                Some("model") => meta.model = f.next().map(str::to_string),
                Some("param") => {
                    let k = f
                        .next()
                        .ok_or_else(|| line_err(n, "param without a name"))?;
                    meta.params
                        .insert(k.to_string(), f.collect::<Vec<_>>().join(" "));
                }
                _ => {}
            }
            continue;
        }
        if !header_done {
            if line != COLUMNS {
                return Err(line_err(n, format!("expected column line `{COLUMNS}`")));
            }
            header_done = true;
            continue;
        }
        let node_count = nodes.ok_or(TraceFileError::MissingHeader("nodes"))?;
        let interval = dt.ok_or(TraceFileError::MissingHeader("sample_interval"))?;
        let mut f = line.split_whitespace();
        let time: f64 = num(f.next(), "time", n)?;
        let id: usize = num(f.next(), "node id", n)?;
        let x: f64 = num(f.next(), "x", n)?;
        let y: f64 = num(f.next(), "y", n)?;
        let speed: f64 = num(f.next(), "speed", n)?;
        let heading: f64 = num(f.next(), "heading", n)?;
        if f.next().is_some() {
            return Err(line_err(n, "too many fields"));
        }
        let (expect_step, expect_id) = match rows.last() {
            Some(r) if r.len() < node_count => (rows.len() - 1, r.len()),
            _ => (rows.len(), 0),
        };
        if id != expect_id {
            return Err(line_err(n, format!("expected node {expect_id}, got {id}")));
        }
        if (time - expect_step as f64 * interval).abs() > 1e-9 * (1.0 + time.abs()) {
            return Err(line_err(n, format!("time {time} is off the sample grid")));
        }
        if expect_id == 0 {
            rows.push(Vec::with_capacity(node_count));
        }
        rows.last_mut()
            .expect("row pushed above")
            .push(NodeState::new(Vec2::new(x, y), speed, heading));
    }
    if !header_done {
        return Err(TraceFileError::Invalid("no records".into()));
    }
    let node_count = nodes.ok_or(TraceFileError::MissingHeader("nodes"))?;
    let interval = dt.ok_or(TraceFileError::MissingHeader("sample_interval"))?;
    let area = area.ok_or(TraceFileError::MissingHeader("area"))?;
    if rows.last().is_some_and(|r| r.len() != node_count) {
        return Err(TraceFileError::Invalid("last step is incomplete".into()));
    }
    let trace = MobilityTrace::from_steps(area, interval, rows)
        .map_err(|e| TraceFileError::Invalid(e.to_string()))?;
    if let Some(d) = duration {
        if (d - trace.duration).abs() > 1e-9 * (1.0 + d) {
            return Err(TraceFileError::Invalid(format!(
                "header says duration {d}, records cover {}",
                trace.duration
            )));
        }
    }
    let report = validate_trace(&trace);
    if let Some(first) = report.findings.first() {
        return Err(TraceFileError::Invalid(format!("{first:?}")));
    }
    Ok((trace, meta))
}
