//! Seeded mobility trace generators: the group vehicular model and the
//! Manhattan and Freeway vehicular models it is compared against.

mod gvmm;
mod vehicular;

use rand::Rng;
use thiserror::Error;

use crate::geometry::{GeometryError, NodeState};
use crate::roadmap::{advance, LaneGraph, LanePosition, MapError, MapKind, TurnProbabilities};

pub use gvmm::{generate_gvmm, generate_gvmm_in_traffic, generate_gvmm_with_leaders, GvmmParams};
pub use vehicular::{
    generate_freeway, generate_manhattan, simulate_vehicles, VehicleStart, VehicularParams,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MobilityError {
    #[error("invalid {key}: {reason}")]
    InvalidParameter { key: &'static str, reason: String },
    #[error("{nodes} nodes do not fit on the lanes at the required safety spacing (capacity {capacity})")]
    CapacityExceeded { nodes: usize, capacity: usize },
    #[error("could not place node {0} at safety spacing")]
    Placement(usize),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub(crate) fn invalid(key: &'static str, reason: impl Into<String>) -> MobilityError {
    MobilityError::InvalidParameter {
        key,
        reason: reason.into(),
    }
}

/// Speed bounds and acceleration of a lane-following vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicLimits {
    pub min_speed: f64,
    pub max_speed: f64,
    /// m/s²; each step the speed moves by at most `accel_limit · Δt`.
    pub accel_limit: f64,
}

impl KinematicLimits {
    pub fn validate(&self) -> Result<(), MobilityError> {
        if !(self.max_speed.is_finite() && self.max_speed > 0.0) {
            return Err(invalid("max_speed", "must be positive"));
        }
        if !(self.min_speed >= 0.0 && self.min_speed <= self.max_speed) {
            return Err(invalid("min_speed", "must lie in [0, max_speed]"));
        }
        if !(self.accel_limit.is_finite() && self.accel_limit >= 0.0) {
            return Err(invalid("accel_limit", "must be non-negative"));
        }
        Ok(())
    }

    /// One bounded random-walk step of the speed.
    pub(crate) fn step<R: Rng + ?Sized>(&self, speed: f64, dt: f64, rng: &mut R) -> f64 {
        let delta = symmetric_unit(rng) * self.accel_limit * dt;
        (speed + delta).clamp(self.min_speed, self.max_speed)
    }

    pub(crate) fn initial_speed<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.min_speed + rng.gen::<f64>() * (self.max_speed - self.min_speed)
    }
}

/// Uniform draw on `[-1, 1)`.
pub(crate) fn symmetric_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    2.0 * rng.gen::<f64>() - 1.0
}

pub(crate) fn step_count(duration: f64, dt: f64) -> Result<usize, MobilityError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid("sample_interval", "must be positive"));
    }
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(invalid("duration", "must be non-negative"));
    }
    let ratio = duration / dt;
    if (ratio - ratio.round()).abs() > 1e-6 {
        return Err(invalid("duration", "must be a multiple of sample_interval"));
    }
    Ok(ratio.round() as usize + 1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupAssignment {
    /// Group of every node.
    pub group_of: Vec<usize>,
    /// Leader node of every group.
    pub leaders: Vec<usize>,
}

impl GroupAssignment {
    pub fn members(&self, group: usize) -> impl Iterator<Item = usize> + '_ {
        self.group_of
            .iter()
            .enumerate()
            .filter(move |(_, &g)| g == group)
            .map(|(n, _)| n)
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.leaders.len()];
        for &g in &self.group_of {
            sizes[g] += 1;
        }
        sizes
    }
}

/// Splits nodes `0..n` into `g` contiguous blocks; the first `n mod g`
/// blocks get one extra node and the lowest id of each block leads it.
pub fn assign_groups(n: usize, g: usize) -> Result<GroupAssignment, MobilityError> {
    if g == 0 || g > n {
        return Err(invalid(
            "num_groups",
            format!("must lie in [1, {n}], got {g}"),
        ));
    }
    let (base, extra) = (n / g, n % g);
    let mut group_of = Vec::with_capacity(n);
    let mut leaders = Vec::with_capacity(g);
    for group in 0..g {
        leaders.push(group_of.len());
        let size = base + usize::from(group < extra);
        group_of.extend(std::iter::repeat_n(group, size));
    }
    Ok(GroupAssignment { group_of, leaders })
}

/// Drives a single vehicle over a Manhattan map.
///
/// Draw order: lane index, offset fraction, initial speed; then per step the
/// turn draws made while moving, followed by one speed draw. The recorded
/// speed at step `k` is the one used to move during `[t_k, t_{k+1}]`.
pub fn generate_leader_path<R: Rng + ?Sized>(
    map: &LaneGraph,
    limits: &KinematicLimits,
    turns: &TurnProbabilities,
    duration: f64,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<NodeState>, MobilityError> {
    if map.kind != MapKind::Manhattan {
        return Err(MapError::WrongKind {
            expected: MapKind::Manhattan,
        }
        .into());
    }
    limits.validate()?;
    turns.validate()?;
    let steps = step_count(duration, dt)?;

    let lane = rng.gen_range(0..map.lanes.len());
    let offset = rng.gen::<f64>() * map.lanes[lane].length;
    let mut pos = LanePosition { lane, offset };
    let mut speed = limits.initial_speed(rng);

    let mut path = Vec::with_capacity(steps);
    for k in 0..steps {
        path.push(NodeState::new(
            map.point_at(pos),
            speed,
            map.heading_at(pos),
        ));
        if k + 1 < steps {
            pos = advance(map, pos, speed * dt, turns, rng)?;
            speed = limits.step(speed, dt, rng);
        }
    }
    Ok(path)
}
