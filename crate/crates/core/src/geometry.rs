//! Planar vectors, node kinematics and fixed-step mobility traces.

use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use thiserror::Error;

pub type NodeId = usize;

/// Absolute slack used when comparing sampled quantities on the time grid.
const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("speed must be a finite non-negative value, got {0}")]
    InvalidSpeed(f64),
    #[error("heading must be finite, got {0}")]
    InvalidHeading(f64),
    #[error("area dimensions must be positive and finite, got {width} x {height}")]
    InvalidArea { width: f64, height: f64 },
    #[error("time {t} outside trace range [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("node {node} not present in a trace of {node_count} nodes")]
    UnknownNode { node: NodeId, node_count: usize },
    #[error("trace shape is inconsistent: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Maps any finite angle onto `[0, 2π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Smallest absolute difference between two headings, in `[0, π]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(TAU - d)
}

/// Polar to Cartesian conversion of a speed/heading pair.
pub fn heading_to_velocity(speed: f64, heading: f64) -> Result<Vec2, GeometryError> {
    if !speed.is_finite() || speed < 0.0 {
        return Err(GeometryError::InvalidSpeed(speed));
    }
    if !heading.is_finite() {
        return Err(GeometryError::InvalidHeading(heading));
    }
    let (sin, cos) = heading.sin_cos();
    Ok(Vec2::new(speed * cos, speed * sin))
}

/// Kinematic state of one node at one sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeState {
    pub position: Vec2,
    /// m/s, never negative.
    pub speed: f64,
    /// Radians in `[0, 2π)`, 0 pointing along +x.
    pub heading: f64,
}

impl NodeState {
    /// Builds a state with the heading normalized and negative speeds clamped to zero.
    pub fn new(position: Vec2, speed: f64, heading: f64) -> Self {
        NodeState {
            position,
            speed: speed.max(0.0),
            heading: wrap_angle(heading),
        }
    }

    pub fn velocity(&self) -> Vec2 {
        let (sin, cos) = self.heading.sin_cos();
        Vec2::new(self.speed * cos, self.speed * sin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationArea {
    pub width: f64,
    pub height: f64,
}

impl SimulationArea {
    pub fn new(width: f64, height: f64) -> Result<Self, GeometryError> {
        if !(width.is_finite() && height.is_finite() && width > 0.0 && height > 0.0) {
            return Err(GeometryError::InvalidArea { width, height });
        }
        Ok(SimulationArea { width, height })
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= -GRID_EPS
            && p.y >= -GRID_EPS
            && p.x <= self.width + GRID_EPS
            && p.y <= self.height + GRID_EPS
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub time: f64,
    pub node_id: NodeId,
    pub state: NodeState,
}

/// Positions and velocities of every node on a fixed time grid.
///
/// Samples are stored step-major: the sample of `node` at step `k` lives at
/// index `k * node_count + node` in a well-formed trace. Accessors that index
/// by step assume the trace passed [`validate_trace`].
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityTrace {
    pub node_count: usize,
    pub duration: f64,
    pub sample_interval: f64,
    pub area: SimulationArea,
    pub samples: Vec<TraceSample>,
}

impl MobilityTrace {
    /// Assembles a trace from per-step node states (`steps[k][node]`).
    pub fn from_steps(
        area: SimulationArea,
        sample_interval: f64,
        steps: Vec<Vec<NodeState>>,
    ) -> Result<Self, GeometryError> {
        if !(sample_interval.is_finite() && sample_interval > 0.0) {
            return Err(GeometryError::Shape(format!(
                "sample interval must be positive, got {sample_interval}"
            )));
        }
        let node_count = steps.first().map_or(0, Vec::len);
        if steps.is_empty() || node_count == 0 {
            return Err(GeometryError::Shape(
                "trace needs at least one node and one step".into(),
            ));
        }
        let mut samples = Vec::with_capacity(steps.len() * node_count);
        for (k, row) in steps.iter().enumerate() {
            if row.len() != node_count {
                return Err(GeometryError::Shape(format!(
                    "step {k} has {} nodes, expected {node_count}",
                    row.len()
                )));
            }
            let time = k as f64 * sample_interval;
            samples.extend(row.iter().enumerate().map(|(node_id, &state)| TraceSample {
                time,
                node_id,
                state,
            }));
        }
        Ok(MobilityTrace {
            node_count,
            duration: (steps.len() - 1) as f64 * sample_interval,
            sample_interval,
            area,
            samples,
        })
    }

    /// Assembles a trace from per-node paths (`paths[node][k]`).
    pub fn from_paths(
        area: SimulationArea,
        sample_interval: f64,
        paths: Vec<Vec<NodeState>>,
    ) -> Result<Self, GeometryError> {
        let steps = paths.first().map_or(0, Vec::len);
        if paths.iter().any(|p| p.len() != steps) {
            return Err(GeometryError::Shape("node paths differ in length".into()));
        }
        let by_step = (0..steps)
            .map(|k| paths.iter().map(|p| p[k]).collect())
            .collect();
        Self::from_steps(area, sample_interval, by_step)
    }

    /// Number of sample times, `duration / Δt + 1`.
    pub fn step_count(&self) -> usize {
        (self.duration / self.sample_interval).round() as usize + 1
    }

    pub fn time_of(&self, step: usize) -> f64 {
        step as f64 * self.sample_interval
    }

    pub fn state(&self, step: usize, node: NodeId) -> &NodeState {
        &self.samples[step * self.node_count + node].state
    }

    pub fn step_states(&self, step: usize) -> &[TraceSample] {
        let start = step * self.node_count;
        &self.samples[start..start + self.node_count]
    }

    /// Full sampled path of one node.
    pub fn node_path(&self, node: NodeId) -> Vec<NodeState> {
        (0..self.step_count())
            .map(|k| *self.state(k, node))
            .collect()
    }

    /// Position of `node` at an arbitrary time in `[0, duration]`.
    ///
    /// Linear between bracketing samples. A step whose displacement exceeds
    /// what the recorded speed allows is a relocation (lane wrap, imported
    /// `set X_`): the node holds its earlier position and appears at the new
    /// one only at the later sample time.
    pub fn position_at(&self, node: NodeId, t: f64) -> Result<Vec2, GeometryError> {
        if node >= self.node_count {
            return Err(GeometryError::UnknownNode {
                node,
                node_count: self.node_count,
            });
        }
        if !(t >= -GRID_EPS && t <= self.duration + GRID_EPS) {
            return Err(GeometryError::TimeOutOfRange {
                t,
                duration: self.duration,
            });
        }
        let last = self.step_count() - 1;
        let scaled = (t / self.sample_interval).max(0.0);
        let k = (scaled.floor() as usize).min(last);
        let frac = scaled - k as f64;
        let here = self.state(k, node);
        if k == last || frac <= GRID_EPS {
            return Ok(here.position);
        }
        let next = self.state(k + 1, node);
        if 1.0 - frac <= GRID_EPS {
            return Ok(next.position);
        }
        let delta = next.position - here.position;
        if is_relocation(delta.norm(), here.speed, self.sample_interval) {
            return Ok(here.position);
        }
        Ok(here.position + delta * frac)
    }

    /// Fastest recorded speed in the trace.
    pub fn max_speed(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.state.speed)
            .fold(0.0, f64::max)
    }
}

/// Whether a per-step displacement is a jump rather than continuous motion.
pub fn is_relocation(displacement: f64, speed: f64, dt: f64) -> bool {
    displacement > speed * dt * (1.0 + 1e-9) + 1e-6
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceFinding {
    MissingSample {
        step: usize,
        node: NodeId,
    },
    DuplicateSample {
        step: usize,
        node: NodeId,
    },
    OutOfArea {
        index: usize,
        node: NodeId,
        position: Vec2,
    },
    OutOfOrder {
        index: usize,
    },
    UnknownNode {
        index: usize,
        node: NodeId,
    },
    OffGrid {
        index: usize,
        time: f64,
    },
    InvalidState {
        index: usize,
        reason: String,
    },
    BadShape(String),
}

impl fmt::Display for TraceFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceFinding::MissingSample { step, node } => {
                write!(f, "missing sample for node {node} at step {step}")
            }
            TraceFinding::DuplicateSample { step, node } => {
                write!(f, "duplicate sample for node {node} at step {step}")
            }
            TraceFinding::OutOfArea {
                index,
                node,
                position,
            } => {
                write!(f, "sample {index}: node {node} out of area at {position}")
            }
            TraceFinding::OutOfOrder { index } => {
                write!(f, "sample {index} breaks (time, node) ordering")
            }
            TraceFinding::UnknownNode { index, node } => {
                write!(f, "sample {index}: node id {node} exceeds node count")
            }
            TraceFinding::OffGrid { index, time } => {
                write!(f, "sample {index}: time {time} is not on the sampling grid")
            }
            TraceFinding::InvalidState { index, reason } => write!(f, "sample {index}: {reason}"),
            TraceFinding::BadShape(msg) => write!(f, "{msg}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<TraceFinding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Checks every structural invariant of a trace without stopping at the first failure.
pub fn validate_trace(trace: &MobilityTrace) -> ValidationReport {
    let mut findings = Vec::new();
    let dt = trace.sample_interval;
    if trace.node_count == 0 {
        findings.push(TraceFinding::BadShape("trace has no nodes".into()));
    }
    if !(dt.is_finite() && dt > 0.0) || !(trace.duration.is_finite() && trace.duration >= 0.0) {
        findings.push(TraceFinding::BadShape(format!(
            "invalid duration {} or sample interval {}",
            trace.duration, dt
        )));
        return ValidationReport { findings };
    }
    let ratio = trace.duration / dt;
    if (ratio - ratio.round()).abs() > 1e-6 {
        findings.push(TraceFinding::BadShape(format!(
            "duration {} is not a multiple of the sample interval {dt}",
            trace.duration
        )));
    }
    let steps = trace.step_count();
    let mut seen = vec![false; steps * trace.node_count];
    let mut previous: Option<(usize, NodeId)> = None;

    for (index, sample) in trace.samples.iter().enumerate() {
        let node = sample.node_id;
        if node >= trace.node_count {
            findings.push(TraceFinding::UnknownNode { index, node });
            continue;
        }
        let scaled = sample.time / dt;
        let step = scaled.round();
        if !(sample.time >= 0.0) || (scaled - step).abs() > 1e-6 || step as usize >= steps {
            findings.push(TraceFinding::OffGrid {
                index,
                time: sample.time,
            });
            continue;
        }
        let step = step as usize;
        if let Some(prev) = previous {
            if (step, node) <= prev {
                findings.push(TraceFinding::OutOfOrder { index });
            }
        }
        previous = Some((step, node));

        let slot = &mut seen[step * trace.node_count + node];
        if *slot {
            findings.push(TraceFinding::DuplicateSample { step, node });
        }
        *slot = true;

        let state = &sample.state;
        if !state.position.is_finite() {
            findings.push(TraceFinding::InvalidState {
                index,
                reason: "non-finite position".into(),
            });
        } else if !trace.area.contains(state.position) {
            findings.push(TraceFinding::OutOfArea {
                index,
                node,
                position: state.position,
            });
        }
        if !(state.speed.is_finite() && state.speed >= 0.0) {
            findings.push(TraceFinding::InvalidState {
                index,
                reason: format!("invalid speed {}", state.speed),
            });
        }
        if !(state.heading >= 0.0 && state.heading < TAU) {
            findings.push(TraceFinding::InvalidState {
                index,
                reason: format!("heading {} outside [0, 2pi)", state.heading),
            });
        }
    }

    for step in 0..steps {
        for node in 0..trace.node_count {
            if !seen[step * trace.node_count + node] {
                findings.push(TraceFinding::MissingSample { step, node });
            }
        }
    }
    ValidationReport { findings }
}
