use std::collections::BTreeMap;

use rand::Rng;

use super::{invalid, step_count, KinematicLimits, MobilityError};
use crate::geometry::{MobilityTrace, NodeState};
use crate::roadmap::{advance, LaneGraph, LanePosition, MapError, MapKind, TurnProbabilities};

const PLACEMENT_ATTEMPTS: usize = 10_000;

/// Parameters shared by the Manhattan and Freeway models.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicularParams {
    pub num_nodes: usize,
    pub max_speed: f64,
    pub min_speed: f64,
    pub accel_limit: f64,
    pub safety_distance: f64,
    pub duration: f64,
    pub sample_interval: f64,
    pub turns: TurnProbabilities,
}

impl Default for VehicularParams {
    fn default() -> Self {
        VehicularParams {
            num_nodes: 50,
            max_speed: 20.0,
            min_speed: 1.0,
            accel_limit: 2.0,
            safety_distance: 20.0,
            duration: 900.0,
            sample_interval: 1.0,
            turns: TurnProbabilities::default(),
        }
    }
}

impl VehicularParams {
    pub fn validate(&self) -> Result<(), MobilityError> {
        if self.num_nodes == 0 {
            return Err(invalid("num_nodes", "must be at least 1"));
        }
        if !(self.max_speed.is_finite() && self.max_speed > 0.0) {
            return Err(invalid("max_speed", "must be positive"));
        }
        if !(self.min_speed >= 0.0 && self.min_speed < self.max_speed) {
            return Err(invalid("min_speed", "must lie in [0, max_speed)"));
        }
        if !(self.accel_limit.is_finite() && self.accel_limit > 0.0) {
            return Err(invalid("accel_limit", "must be positive"));
        }
        if !(self.safety_distance.is_finite() && self.safety_distance >= 0.0) {
            return Err(invalid("safety_distance", "must be non-negative"));
        }
        step_count(self.duration, self.sample_interval)?;
        self.turns.validate()?;
        Ok(())
    }

    pub fn limits(&self) -> KinematicLimits {
        KinematicLimits {
            min_speed: self.min_speed,
            max_speed: self.max_speed,
            accel_limit: self.accel_limit,
        }
    }
}

/// Initial lane position and speed of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleStart {
    pub pos: LanePosition,
    pub speed: f64,
}

pub fn generate_manhattan<R: Rng + ?Sized>(
    params: &VehicularParams,
    map: &LaneGraph,
    rng: &mut R,
) -> Result<MobilityTrace, MobilityError> {
    require_kind(map, MapKind::Manhattan)?;
    params.validate()?;
    let starts = place_vehicles(params, map, rng)?;
    simulate_vehicles(params, map, &starts, rng)
}

pub fn generate_freeway<R: Rng + ?Sized>(
    params: &VehicularParams,
    map: &LaneGraph,
    rng: &mut R,
) -> Result<MobilityTrace, MobilityError> {
    require_kind(map, MapKind::Freeway)?;
    params.validate()?;
    let starts = place_vehicles(params, map, rng)?;
    simulate_vehicles(params, map, &starts, rng)
}

fn require_kind(map: &LaneGraph, expected: MapKind) -> Result<(), MobilityError> {
    if map.kind != expected {
        return Err(MapError::WrongKind { expected }.into());
    }
    Ok(())
}

fn lane_gap(map: &LaneGraph, lane: usize, behind: f64, ahead: f64) -> Option<f64> {
    let gap = ahead - behind;
    match map.kind {
        MapKind::Manhattan => (gap >= 0.0).then_some(gap),
        MapKind::Freeway => Some(gap.rem_euclid(map.lanes[lane].length)),
    }
}

fn place_vehicles<R: Rng + ?Sized>(
    params: &VehicularParams,
    map: &LaneGraph,
    rng: &mut R,
) -> Result<Vec<VehicleStart>, MobilityError> {
    if params.safety_distance > 0.0 {
        let capacity: usize = map
            .lanes
            .iter()
            .map(|l| (l.length / params.safety_distance).floor() as usize)
            .sum();
        if params.num_nodes > capacity {
            return Err(MobilityError::CapacityExceeded {
                nodes: params.num_nodes,
                capacity,
            });
        }
    }
    let limits = params.limits();
    let mut starts: Vec<VehicleStart> = Vec::with_capacity(params.num_nodes);
    for node in 0..params.num_nodes {
        let mut placed = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let lane = rng.gen_range(0..map.lanes.len());
            let offset = rng.gen::<f64>() * map.lanes[lane].length;
            let clear = starts.iter().filter(|s| s.pos.lane == lane).all(|s| {
                let fwd = lane_gap(map, lane, offset, s.pos.offset).unwrap_or(f64::INFINITY);
                let back = lane_gap(map, lane, s.pos.offset, offset).unwrap_or(f64::INFINITY);
                fwd.min(back) >= params.safety_distance
            });
            if clear {
                placed = Some(LanePosition { lane, offset });
                break;
            }
        }
        let pos = placed.ok_or(MobilityError::Placement(node))?;
        starts.push(VehicleStart {
            pos,
            speed: limits.initial_speed(rng),
        });
    }
    Ok(starts)
}

/// Runs lane-following vehicles from the given starts.
///
/// Per step: everyone moves at the recorded speed, each vehicle's cruising
/// speed takes one bounded random-walk step (in node order), and the recorded
/// speed follows it, rising by at most `accel_limit · Δt`. Then any vehicle
/// that would close within `safety_distance` of the vehicle ahead on its lane
/// is held to that vehicle's speed. Holding caps the recorded speed only; the
/// cruising speed keeps walking, so a vehicle speeds back up once the road
/// clears. A zero safety distance disables car following.
pub fn simulate_vehicles<R: Rng + ?Sized>(
    params: &VehicularParams,
    map: &LaneGraph,
    starts: &[VehicleStart],
    rng: &mut R,
) -> Result<MobilityTrace, MobilityError> {
    let steps = step_count(params.duration, params.sample_interval)?;
    let dt = params.sample_interval;
    let limits = params.limits();
    let mut pos: Vec<LanePosition> = starts.iter().map(|s| s.pos).collect();
    let mut cruise: Vec<f64> = starts.iter().map(|s| s.speed).collect();
    let mut speed = cruise.clone();
    apply_safety_braking(params, map, &pos, &mut speed);
    let max_rise = params.accel_limit * dt;

    let mut rows = Vec::with_capacity(steps);
    for k in 0..steps {
        rows.push(
            pos.iter()
                .zip(&speed)
                .map(|(p, &v)| NodeState::new(map.point_at(*p), v, map.heading_at(*p)))
                .collect::<Vec<_>>(),
        );
        if k + 1 == steps {
            break;
        }
        for (p, v) in pos.iter_mut().zip(&speed) {
            *p = advance(map, *p, v * dt, &params.turns, rng)?;
        }
        for (v, c) in speed.iter_mut().zip(cruise.iter_mut()) {
            *c = limits.step(*c, dt, rng);
            *v = c.min(*v + max_rise);
        }
        apply_safety_braking(params, map, &pos, &mut speed);
    }
    Ok(MobilityTrace::from_steps(map.area, dt, rows)?)
}

fn apply_safety_braking(
    params: &VehicularParams,
    map: &LaneGraph,
    pos: &[LanePosition],
    speed: &mut [f64],
) {
    if params.safety_distance <= 0.0 {
        return;
    }
    let dt = params.sample_interval;
    let mut by_lane: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (node, p) in pos.iter().enumerate() {
        by_lane.entry(p.lane).or_default().push(node);
    }
    for (lane, mut nodes) in by_lane {
        if nodes.len() < 2 {
            continue;
        }
        // front of the lane first, so each follower sees its leader's final speed
        nodes.sort_by(|a, b| pos[*b].offset.total_cmp(&pos[*a].offset).then(a.cmp(b)));
        for idx in 0..nodes.len() {
            let follower = nodes[idx];
            let ahead = if idx > 0 {
                nodes[idx - 1]
            } else if map.kind == MapKind::Freeway {
                nodes[nodes.len() - 1]
            } else {
                continue;
            };
            let Some(gap) = lane_gap(map, lane, pos[follower].offset, pos[ahead].offset) else {
                continue;
            };
            let closing = (speed[follower] - speed[ahead]) * dt;
            if gap - closing < params.safety_distance {
                speed[follower] = speed[follower].min(speed[ahead]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{validate_trace, SimulationArea, Vec2};
    use crate::roadmap::{build_freeway_map, build_manhattan_map};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn km() -> SimulationArea {
        SimulationArea::new(1000.0, 1000.0).unwrap()
    }

    fn params(n: usize) -> VehicularParams {
        VehicularParams {
            num_nodes: n,
            duration: 200.0,
            ..VehicularParams::default()
        }
    }

    #[test]
    fn single_node_without_acceleration_moves_uniformly() {
        let map = build_manhattan_map(5, 5, km()).unwrap();
        let p = VehicularParams {
            accel_limit: 1e-12,
            duration: 5.0,
            ..params(1)
        };
        let start = VehicleStart {
            pos: LanePosition {
                lane: 0,
                offset: 10.0,
            },
            speed: 12.0,
        };
        let trace =
            simulate_vehicles(&p, &map, &[start], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for k in 0..trace.step_count() {
            let s = trace.state(k, 0);
            assert!((s.position.x - (10.0 + 12.0 * k as f64)).abs() < 1e-6);
            assert_eq!(s.position.y, 0.0);
        }
    }

    #[test]
    fn follower_never_closes_inside_safety_gap() {
        let map = build_manhattan_map(2, 2, km()).unwrap();
        let p = VehicularParams {
            min_speed: 4.0,
            max_speed: 16.0,
            accel_limit: 1e-9,
            duration: 60.0,
            ..params(2)
        };
        let starts = [
            VehicleStart {
                pos: LanePosition {
                    lane: 0,
                    offset: 400.0,
                },
                speed: 5.0,
            },
            VehicleStart {
                pos: LanePosition {
                    lane: 0,
                    offset: 300.0,
                },
                speed: 15.0,
            },
        ];
        let trace =
            simulate_vehicles(&p, &map, &starts, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut braked = false;
        for k in 0..trace.step_count() {
            let (a, f) = (trace.state(k, 0), trace.state(k, 1));
            if a.heading == f.heading && a.position.y == f.position.y && a.position.x > f.position.x
            {
                let gap = a.position.x - f.position.x;
                assert!(
                    gap >= p.safety_distance - p.max_speed * p.sample_interval - 1e-9,
                    "step {k}: gap {gap}"
                );
                braked |= (f.speed - a.speed).abs() < 1e-6;
            }
        }
        assert!(braked);
    }

    #[test]
    fn manhattan_headings_are_axis_aligned_and_trace_valid() {
        let map = build_manhattan_map(5, 5, km()).unwrap();
        let trace =
            generate_manhattan(&params(30), &map, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(validate_trace(&trace).is_empty());
        for s in &trace.samples {
            let q = s.state.heading / FRAC_PI_2;
            assert!((q - q.round()).abs() < 1e-9);
            assert!(s.state.speed <= 20.0);
        }
    }

    #[test]
    fn speed_changes_are_bounded_except_braking() {
        let map = build_manhattan_map(5, 5, km()).unwrap();
        let p = params(40);
        let trace = generate_manhattan(&p, &map, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        for k in 1..trace.step_count() {
            for n in 0..40 {
                let (prev, cur) = (trace.state(k - 1, n).speed, trace.state(k, n).speed);
                // braking only ever lowers the speed
                assert!(cur - prev <= p.accel_limit * p.sample_interval + 1e-9);
            }
        }
    }

    #[test]
    fn freeway_nodes_are_lane_locked() {
        let map = build_freeway_map(3, 2, km()).unwrap();
        let trace = generate_freeway(&params(1), &map, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let y0 = trace.state(0, 0).position.y;
        assert!(trace.node_path(0).iter().all(|s| s.position.y == y0));
        assert!(validate_trace(&trace).is_empty());
    }

    #[test]
    fn opposite_lanes_give_summed_relative_speed() {
        let map = build_freeway_map(1, 1, km()).unwrap();
        let p = VehicularParams {
            min_speed: 9.999_999,
            max_speed: 10.0,
            ..params(2)
        };
        let starts = [
            VehicleStart {
                pos: LanePosition {
                    lane: 0,
                    offset: 100.0,
                },
                speed: 10.0,
            },
            VehicleStart {
                pos: LanePosition {
                    lane: 1,
                    offset: 100.0,
                },
                speed: 10.0,
            },
        ];
        let trace =
            simulate_vehicles(&p, &map, &starts, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for k in 0..trace.step_count() {
            let (a, b) = (trace.state(k, 0), trace.state(k, 1));
            let rel = (a.velocity() - b.velocity()).norm();
            assert!((rel - (a.speed + b.speed)).abs() < 1e-9);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let map = build_freeway_map(3, 2, km()).unwrap();
        let a = generate_freeway(&params(50), &map, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        let b = generate_freeway(&params(50), &map, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a, b);
    }

    /// Replays a freeway run step by step with plain arithmetic.
    #[test]
    fn freeway_replay_oracle() {
        let map = build_freeway_map(1, 1, km()).unwrap();
        let p = VehicularParams {
            safety_distance: 0.0,
            duration: 40.0,
            max_speed: 60.0,
            ..params(3)
        };
        let seed = 1234;
        let trace = generate_freeway(&p, &map, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lane = Vec::new();
        let mut offset = Vec::new();
        let mut speed = Vec::new();
        for _ in 0..3 {
            lane.push(rng.gen_range(0..2usize));
            offset.push(rng.gen::<f64>() * 1000.0);
            speed.push(1.0 + rng.gen::<f64>() * 59.0);
        }
        let y = [500.0 - 2.0, 500.0 + 2.0];
        for k in 0..trace.step_count() {
            for n in 0..3 {
                let x = if lane[n] == 0 {
                    offset[n]
                } else {
                    1000.0 - offset[n]
                };
                let s = trace.state(k, n);
                assert!(
                    s.position.distance(Vec2::new(x, y[lane[n]])) < 1e-6,
                    "k={k} n={n}"
                );
                assert_eq!(s.speed, speed[n]);
            }
            for n in 0..3 {
                offset[n] = (offset[n] + speed[n]).rem_euclid(1000.0);
            }
            for v in speed.iter_mut() {
                *v = (*v + (2.0 * rng.gen::<f64>() - 1.0) * 2.0).clamp(1.0, 60.0);
            }
        }
    }

    /// Same replay with car following switched on.
    #[test]
    fn freeway_replay_oracle_with_following() {
        let map = build_freeway_map(1, 1, km()).unwrap();
        let n = 8;
        let p = VehicularParams {
            duration: 120.0,
            max_speed: 60.0,
            ..params(n)
        };
        let seed = 77;
        let trace = generate_freeway(&p, &map, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();

        let wrap = |d: f64| d.rem_euclid(1000.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut lane, mut offset, mut cruise) = (Vec::new(), Vec::new(), Vec::new());
        while lane.len() < n {
            let l = rng.gen_range(0..2usize);
            let o = rng.gen::<f64>() * 1000.0;
            let clear = (0..lane.len())
                .filter(|&m| lane[m] == l)
                .all(|m| wrap(offset[m] - o).min(wrap(o - offset[m])) >= 20.0);
            if clear {
                lane.push(l);
                offset.push(o);
                cruise.push(1.0 + rng.gen::<f64>() * 59.0);
            }
        }
        let hold = |offset: &[f64], speed: &mut Vec<f64>| {
            for l in 0..2 {
                let mut order: Vec<usize> = (0..n).filter(|&m| lane[m] == l).collect();
                order.sort_by(|a, b| offset[*b].total_cmp(&offset[*a]));
                for i in 0..order.len() {
                    let f = order[i];
                    let a = if i == 0 {
                        order[order.len() - 1]
                    } else {
                        order[i - 1]
                    };
                    if a != f && wrap(offset[a] - offset[f]) - (speed[f] - speed[a]) < 20.0 {
                        speed[f] = speed[f].min(speed[a]);
                    }
                }
            }
        };
        let mut speed = cruise.clone();
        hold(&offset, &mut speed);
        let y = [500.0 - 2.0, 500.0 + 2.0];
        let mut held = 0;
        for k in 0..trace.step_count() {
            for m in 0..n {
                let x = if lane[m] == 0 {
                    offset[m]
                } else {
                    1000.0 - offset[m]
                };
                let s = trace.state(k, m);
                assert!(
                    s.position.distance(Vec2::new(x, y[lane[m]])) < 1e-6,
                    "k={k} m={m}"
                );
                assert_eq!(s.speed, speed[m], "k={k} m={m}");
                held += usize::from(speed[m] < cruise[m]);
            }
            for m in 0..n {
                offset[m] = wrap(offset[m] + speed[m]);
            }
            for m in 0..n {
                cruise[m] = (cruise[m] + (2.0 * rng.gen::<f64>() - 1.0) * 2.0).clamp(1.0, 60.0);
                speed[m] = cruise[m].min(speed[m] + 2.0);
            }
            hold(&offset, &mut speed);
        }
        assert!(held > 0);
    }

    #[test]
    fn overfull_map_is_rejected() {
        let map = build_freeway_map(1, 1, km()).unwrap();
        let p = VehicularParams {
            safety_distance: 100.0,
            ..params(25)
        };
        let err = generate_freeway(&p, &map, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(
            err,
            MobilityError::CapacityExceeded { capacity: 20, .. }
        ));
    }
}
