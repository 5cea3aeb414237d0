use std::f64::consts::TAU;

use rand::Rng;

use super::{
    assign_groups, generate_leader_path, generate_manhattan, invalid, step_count, symmetric_unit,
    KinematicLimits, MobilityError, VehicularParams,
};
use crate::geometry::{wrap_angle, MobilityTrace, NodeState, SimulationArea, Vec2};
use crate::roadmap::{LaneGraph, TurnProbabilities};

/// Parameters of the group vehicular model.
#[derive(Debug, Clone, PartialEq)]
pub struct GvmmParams {
    pub num_nodes: usize,
    pub num_groups: usize,
    /// Speed deviation ratio.
    pub sdr: f64,
    /// Angle deviation ratio.
    pub adr: f64,
    pub max_speed: f64,
    pub max_angle: f64,
    /// Members start uniformly inside a disc of this radius around their leader.
    pub group_radius: f64,
    pub leader_min_speed: f64,
    pub leader_accel_limit: f64,
    pub duration: f64,
    pub sample_interval: f64,
    pub turns: TurnProbabilities,
}

impl Default for GvmmParams {
    fn default() -> Self {
        GvmmParams {
            num_nodes: 50,
            num_groups: 5,
            sdr: 0.1,
            adr: 0.05,
            max_speed: 20.0,
            max_angle: TAU,
            group_radius: 50.0,
            leader_min_speed: 1.0,
            leader_accel_limit: 2.0,
            duration: 900.0,
            sample_interval: 1.0,
            turns: TurnProbabilities::default(),
        }
    }
}

impl GvmmParams {
    pub fn validate(&self) -> Result<(), MobilityError> {
        if self.num_nodes == 0 {
            return Err(invalid("num_nodes", "must be at least 1"));
        }
        if self.num_groups == 0 || self.num_groups > self.num_nodes {
            return Err(invalid(
                "num_groups",
                format!(
                    "must lie in [1, num_nodes = {}], got {}",
                    self.num_nodes, self.num_groups
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.sdr) {
            return Err(invalid("sdr", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.adr) {
            return Err(invalid("adr", "must lie in [0, 1]"));
        }
        if !(self.max_angle.is_finite() && self.max_angle >= 0.0) {
            return Err(invalid("max_angle", "must be non-negative"));
        }
        if !(self.group_radius.is_finite() && self.group_radius >= 0.0) {
            return Err(invalid("group_radius", "must be non-negative"));
        }
        self.leader_limits().validate()?;
        step_count(self.duration, self.sample_interval)?;
        Ok(())
    }

    pub fn leader_limits(&self) -> KinematicLimits {
        KinematicLimits {
            min_speed: self.leader_min_speed,
            max_speed: self.max_speed,
            accel_limit: self.leader_accel_limit,
        }
    }
}

/// Generates a group vehicular trace: one lane-following leader per group,
/// members deviating from the leader's speed and heading every step.
pub fn generate_gvmm<R: Rng + ?Sized>(
    params: &GvmmParams,
    map: &LaneGraph,
    rng: &mut R,
) -> Result<MobilityTrace, MobilityError> {
    params.validate()?;
    let limits = params.leader_limits();
    let mut leader_paths = Vec::with_capacity(params.num_groups);
    for _ in 0..params.num_groups {
        leader_paths.push(generate_leader_path(
            map,
            &limits,
            &params.turns,
            params.duration,
            params.sample_interval,
            rng,
        )?);
    }
    build_groups(params, &leader_paths, map.area, rng)
}

/// Group leaders taken from a Manhattan vehicular run of `num_nodes` cars:
/// leader `i` drives exactly like car `i` of that run, so leaders share the
/// roads (and car following) with the rest of the traffic. `traffic` supplies
/// the car kinematics; its node count, speed bound and time grid come from
/// `params`.
pub fn generate_gvmm_in_traffic<R: Rng + ?Sized>(
    params: &GvmmParams,
    traffic: &VehicularParams,
    map: &LaneGraph,
    rng: &mut R,
) -> Result<MobilityTrace, MobilityError> {
    params.validate()?;
    let traffic = VehicularParams {
        num_nodes: params.num_nodes,
        max_speed: params.max_speed,
        duration: params.duration,
        sample_interval: params.sample_interval,
        turns: params.turns,
        ..*traffic
    };
    let cars = generate_manhattan(&traffic, map, rng)?;
    let groups = assign_groups(params.num_nodes, params.num_groups)?;
    let leader_paths: Vec<_> = groups
        .leaders
        .iter()
        .map(|&id| cars.node_path(id))
        .collect();
    build_groups(params, &leader_paths, map.area, rng)
}

/// Same as [`generate_gvmm`] with leader motion supplied externally, one path
/// per group, each sampled on the trace grid.
pub fn generate_gvmm_with_leaders<R: Rng + ?Sized>(
    params: &GvmmParams,
    leader_paths: &[Vec<NodeState>],
    area: SimulationArea,
    rng: &mut R,
) -> Result<MobilityTrace, MobilityError> {
    params.validate()?;
    if leader_paths.len() != params.num_groups {
        return Err(invalid(
            "leader_trace",
            format!(
                "holds {} leaders, num_groups is {}",
                leader_paths.len(),
                params.num_groups
            ),
        ));
    }
    let steps = step_count(params.duration, params.sample_interval)?;
    if leader_paths.iter().any(|p| p.len() != steps) {
        return Err(invalid(
            "leader_trace",
            format!("every leader needs {steps} samples"),
        ));
    }
    build_groups(params, leader_paths, area, rng)
}

fn build_groups<R: Rng + ?Sized>(
    params: &GvmmParams,
    leader_paths: &[Vec<NodeState>],
    area: SimulationArea,
    rng: &mut R,
) -> Result<MobilityTrace, MobilityError> {
    let groups = assign_groups(params.num_nodes, params.num_groups)?;
    let speed_span = params.sdr * params.max_speed;
    let angle_span = params.adr * params.max_angle;
    let dt = params.sample_interval;

    let mut paths: Vec<Vec<NodeState>> = Vec::with_capacity(params.num_nodes);
    for node in 0..params.num_nodes {
        let group = groups.group_of[node];
        let leader = &leader_paths[group];
        if groups.leaders[group] == node {
            paths.push(leader.clone());
            continue;
        }
        let r = params.group_radius * rng.gen::<f64>().sqrt();
        let phi = TAU * rng.gen::<f64>();
        let mut position = area.clamp(leader[0].position + Vec2::new(r * phi.cos(), r * phi.sin()));
        let mut path = Vec::with_capacity(leader.len());
        for (k, lead) in leader.iter().enumerate() {
            let speed =
                (lead.speed + symmetric_unit(rng) * speed_span).clamp(0.0, params.max_speed);
            let heading = wrap_angle(lead.heading + symmetric_unit(rng) * angle_span);
            let state = NodeState::new(position, speed, heading);
            path.push(state);
            if k + 1 < leader.len() {
                position = area.clamp(position + state.velocity() * dt);
            }
        }
        paths.push(path);
    }
    Ok(MobilityTrace::from_paths(area, dt, paths)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{angular_distance, validate_trace};
    use crate::roadmap::build_manhattan_map;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn map() -> LaneGraph {
        build_manhattan_map(5, 5, SimulationArea::new(1000.0, 1000.0).unwrap()).unwrap()
    }

    fn short(n: usize, g: usize) -> GvmmParams {
        GvmmParams {
            num_nodes: n,
            num_groups: g,
            duration: 120.0,
            ..GvmmParams::default()
        }
    }

    #[test]
    fn zero_deviation_copies_leader_motion() {
        let params = GvmmParams {
            sdr: 0.0,
            adr: 0.0,
            ..short(6, 1)
        };
        let trace = generate_gvmm(&params, &map(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        for k in 0..trace.step_count() {
            let lead = trace.state(k, 0);
            for m in 1..6 {
                let s = trace.state(k, m);
                assert_eq!(s.speed, lead.speed);
                assert_eq!(s.heading, lead.heading);
            }
        }
    }

    #[test]
    fn single_node_is_leader_path() {
        let params = short(1, 1);
        let trace = generate_gvmm(&params, &map(), &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let path = generate_leader_path(
            &map(),
            &params.leader_limits(),
            &params.turns,
            params.duration,
            params.sample_interval,
            &mut ChaCha8Rng::seed_from_u64(8),
        )
        .unwrap();
        assert_eq!(trace.node_path(0), path);
    }

    #[test]
    fn members_stay_within_deviation_bounds() {
        let params = GvmmParams {
            sdr: 0.1,
            adr: 0.05,
            max_speed: 20.0,
            ..short(20, 4)
        };
        let trace = generate_gvmm(&params, &map(), &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
        let groups = assign_groups(20, 4).unwrap();
        for k in 0..trace.step_count() {
            for node in 0..20 {
                let leader = groups.leaders[groups.group_of[node]];
                let (m, l) = (trace.state(k, node), trace.state(k, leader));
                assert!((m.speed - l.speed).abs() <= 2.0 + 1e-9);
                assert!(angular_distance(m.heading, l.heading) <= 0.05 * TAU + 1e-9);
                assert!((0.0..=20.0).contains(&m.speed));
            }
        }
        assert!(validate_trace(&trace).is_empty());
    }

    #[test]
    fn traffic_leaders_replay_the_car_run() {
        let params = short(12, 3);
        let traffic = VehicularParams {
            max_speed: 5.0,
            duration: 1.0,
            ..VehicularParams::default()
        };
        let trace =
            generate_gvmm_in_traffic(&params, &traffic, &map(), &mut ChaCha8Rng::seed_from_u64(9))
                .unwrap();
        let cars = generate_manhattan(
            &VehicularParams {
                num_nodes: 12,
                max_speed: 20.0,
                duration: 120.0,
                ..VehicularParams::default()
            },
            &map(),
            &mut ChaCha8Rng::seed_from_u64(9),
        )
        .unwrap();
        for leader in [0, 4, 8] {
            assert_eq!(trace.node_path(leader), cars.node_path(leader));
        }
        assert!(validate_trace(&trace).is_empty());
    }

    #[test]
    fn rejects_bad_groups() {
        let err =
            generate_gvmm(&short(5, 0), &map(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(
            err,
            MobilityError::InvalidParameter {
                key: "num_groups",
                ..
            }
        ));
        assert!(generate_gvmm(&short(5, 6), &map(), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        let bad = GvmmParams {
            sdr: 1.5,
            ..short(5, 1)
        };
        assert!(generate_gvmm(&bad, &map(), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn external_leaders_are_followed() {
        let params = GvmmParams {
            sdr: 0.0,
            adr: 0.0,
            duration: 3.0,
            ..short(4, 2)
        };
        let straight = |y: f64| -> Vec<NodeState> {
            (0..4)
                .map(|k| NodeState::new(Vec2::new(100.0 + 10.0 * k as f64, y), 10.0, 0.0))
                .collect()
        };
        let leaders = vec![straight(100.0), straight(500.0)];
        let area = SimulationArea::new(1000.0, 1000.0).unwrap();
        let trace =
            generate_gvmm_with_leaders(&params, &leaders, area, &mut ChaCha8Rng::seed_from_u64(2))
                .unwrap();
        assert_eq!(trace.node_path(0), leaders[0]);
        assert_eq!(trace.node_path(2), leaders[1]);
        let m = trace.node_path(1);
        assert!((m[3].position.x - m[0].position.x - 30.0).abs() < 1e-9);
        let wrong = generate_gvmm_with_leaders(
            &params,
            &leaders[..1],
            area,
            &mut ChaCha8Rng::seed_from_u64(2),
        );
        assert!(wrong.is_err());
    }
}
