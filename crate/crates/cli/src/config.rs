//! Scenario configuration: a flat `key = value` file where every default is a
//! named key, plus `--set key=value` overrides.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use manet_core::geometry::SimulationArea;
use manet_core::metrics::MetricsConfig;
use manet_core::mobility::{GvmmParams, VehicularParams};
use manet_core::roadmap::TurnProbabilities;
use manet_core::sim::{Protocol, RadioModel, SimParams};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: `{key}` set twice")]
    Duplicate { line: usize, key: String },
    #[error("invalid {key}: {reason}")]
    Invalid { key: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MobilityModel {
    Gvmm,
    Manhattan,
    Freeway,
}

impl MobilityModel {
    pub const ALL: [MobilityModel; 3] = [
        MobilityModel::Gvmm,
        MobilityModel::Manhattan,
        MobilityModel::Freeway,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MobilityModel::Gvmm => "gvmm",
            MobilityModel::Manhattan => "manhattan",
            MobilityModel::Freeway => "freeway",
        }
    }
}

impl fmt::Display for MobilityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MobilityModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "gvmm" => Ok(MobilityModel::Gvmm),
            "manhattan" | "mhmm" => Ok(MobilityModel::Manhattan),
            "freeway" | "fwmm" => Ok(MobilityModel::Freeway),
            _ => Err("expected gvmm, manhattan or freeway".into()),
        }
    }
}

/// Which pairs count towards relative speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceFilter {
    All,
    /// Pairs within the radio range.
    Range,
    Meters(f64),
}

impl fmt::Display for DistanceFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistanceFilter::All => f.write_str("none"),
            DistanceFilter::Range => f.write_str("range"),
            DistanceFilter::Meters(m) => write!(f, "{m}"),
        }
    }
}

/// Where GVMM group leaders get their motion.
#[derive(Debug, Clone, PartialEq)]
pub enum LeaderSource {
    /// One independent lane-following leader per group.
    Internal,
    /// Leaders are cars of a Manhattan run with `num_nodes` cars.
    Traffic,
    /// Node `g` of a native trace file drives group `g`.
    File(String),
}

impl fmt::Display for LeaderSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LeaderSource::Internal => f.write_str("internal"),
            LeaderSource::Traffic => f.write_str("traffic"),
            LeaderSource::File(p) => f.write_str(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub model: MobilityModel,
    pub num_nodes: usize,
    pub num_groups: usize,
    pub sdr: f64,
    pub adr: f64,
    pub max_speed: f64,
    pub max_angle: f64,
    pub group_radius: f64,
    /// `internal`, `traffic`, or a path to a native trace.
    pub leaders: LeaderSource,
    pub leader_min_speed: f64,
    pub leader_accel_limit: f64,
    pub min_speed: f64,
    pub accel_limit: f64,
    pub safety_distance: f64,
    pub turn_straight: f64,
    pub turn_left: f64,
    pub turn_right: f64,
    pub area_width: f64,
    pub area_height: f64,
    pub manhattan_rows: usize,
    pub manhattan_cols: usize,
    pub freeway_count: usize,
    pub freeway_lanes: usize,
    pub duration: f64,
    pub sample_interval: f64,

    pub range: f64,
    pub proximity_factor: f64,
    pub rs_distance_filter: DistanceFilter,
    pub include_zero: bool,

    pub link_bitrate: f64,
    pub per_hop_latency: f64,
    pub loss_probability: f64,
    pub broadcast_jitter: f64,

    pub protocol: Protocol,
    pub flows: usize,
    /// Bits per second per source.
    pub flow_rate: f64,
    pub packet_bytes: u32,
    pub flow_start: f64,
    pub flow_stagger: f64,
    /// `None` runs flows to the end of the trace.
    pub flow_stop: Option<f64>,

    pub sim: SimParams,
    pub seed: u64,

    pub sweep_models: Vec<MobilityModel>,
    pub sweep_protocols: Vec<Protocol>,
    pub sweep_speeds: Vec<f64>,
    pub sweep_seeds: Vec<u64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let turns = TurnProbabilities::default();
        ScenarioConfig {
            model: MobilityModel::Gvmm,
            num_nodes: 50,
            num_groups: 5,
            sdr: 0.1,
            adr: 0.05,
            max_speed: 20.0,
            max_angle: TAU,
            group_radius: 50.0,
            leaders: LeaderSource::Traffic,
            leader_min_speed: 1.0,
            leader_accel_limit: 2.0,
            min_speed: 1.0,
            accel_limit: 2.0,
            safety_distance: 20.0,
            turn_straight: turns.straight,
            turn_left: turns.left,
            turn_right: turns.right,
            area_width: 1000.0,
            area_height: 1000.0,
            manhattan_rows: 5,
            manhattan_cols: 5,
            freeway_count: 3,
            freeway_lanes: 2,
            duration: 900.0,
            sample_interval: 1.0,
            range: 250.0,
            proximity_factor: 2.0,
            rs_distance_filter: DistanceFilter::Range,
            include_zero: false,
            link_bitrate: 2e6,
            per_hop_latency: 0.002,
            loss_probability: 0.0,
            broadcast_jitter: 0.0,
            protocol: Protocol::Aodv,
            flows: 8,
            flow_rate: 4000.0,
            packet_bytes: 512,
            flow_start: 10.0,
            flow_stagger: 1.0,
            flow_stop: None,
            sim: SimParams::default(),
            seed: 1,
            sweep_models: MobilityModel::ALL.to_vec(),
            sweep_protocols: Protocol::ALL.to_vec(),
            sweep_speeds: vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
            sweep_seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

fn short_digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn bad(key: &str, value: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| bad(key, value, e))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(bad(key, value, "empty list"));
    }
    Ok(items)
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ScenarioConfig {
    /// Every key in canonical order.
    pub const KEYS: [&'static str; 62] = [
        "model",
        "num_nodes",
        "num_groups",
        "sdr",
        "adr",
        "max_speed",
        "max_angle",
        "group_radius",
        "leaders",
        "leader_min_speed",
        "leader_accel_limit",
        "min_speed",
        "accel_limit",
        "safety_distance",
        "turn_straight",
        "turn_left",
        "turn_right",
        "area_width",
        "area_height",
        "manhattan_rows",
        "manhattan_cols",
        "freeway_count",
        "freeway_lanes",
        "duration",
        "sample_interval",
        "range",
        "proximity_factor",
        "rs_distance_filter",
        "include_zero",
        "link_bitrate",
        "per_hop_latency",
        "loss_probability",
        "broadcast_jitter",
        "protocol",
        "flows",
        "flow_rate",
        "packet_bytes",
        "flow_start",
        "flow_stagger",
        "flow_stop",
        "ttl",
        "queue_capacity",
        "buffer_capacity",
        "dup_cache_size",
        "control_packet_bits",
        "route_lifetime",
        "rreq_timeout",
        "rreq_retries",
        "dsr_send_buffer_timeout",
        "dsr_backoff_initial",
        "dsr_backoff_max",
        "dsr_cache_size",
        "tora_query_timeout",
        "tora_query_retries",
        "tora_reversal_budget",
        "tora_reversal_window",
        "seed",
        "sweep_models",
        "sweep_protocols",
        "sweep_speeds",
        "sweep_seeds",
        "record_events",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "model" => self.model = parse(key, v)?,
            "num_nodes" => self.num_nodes = parse(key, v)?,
            "num_groups" => self.num_groups = parse(key, v)?,
            "sdr" => self.sdr = parse(key, v)?,
            "adr" => self.adr = parse(key, v)?,
            "max_speed" => self.max_speed = parse(key, v)?,
            "max_angle" => self.max_angle = parse(key, v)?,
            "group_radius" => self.group_radius = parse(key, v)?,
            "leaders" => {
                self.leaders = match v {
                    "internal" => LeaderSource::Internal,
                    "traffic" => LeaderSource::Traffic,
                    "" => return Err(bad(key, v, "expected internal, traffic or a trace path")),
                    path => LeaderSource::File(path.to_string()),
                }
            }
            "leader_min_speed" => self.leader_min_speed = parse(key, v)?,
            "leader_accel_limit" => self.leader_accel_limit = parse(key, v)?,
            "min_speed" => self.min_speed = parse(key, v)?,
            "accel_limit" => self.accel_limit = parse(key, v)?,
            "safety_distance" => self.safety_distance = parse(key, v)?,
            "turn_straight" => self.turn_straight = parse(key, v)?,
            "turn_left" => self.turn_left = parse(key, v)?,
            "turn_right" => self.turn_right = parse(key, v)?,
            "area_width" => self.area_width = parse(key, v)?,
            "area_height" => self.area_height = parse(key, v)?,
            "manhattan_rows" => self.manhattan_rows = parse(key, v)?,
            "manhattan_cols" => self.manhattan_cols = parse(key, v)?,
            "freeway_count" => self.freeway_count = parse(key, v)?,
            "freeway_lanes" => self.freeway_lanes = parse(key, v)?,
            "duration" => self.duration = parse(key, v)?,
            "sample_interval" => self.sample_interval = parse(key, v)?,
            "range" => self.range = parse(key, v)?,
            "proximity_factor" => self.proximity_factor = parse(key, v)?,
            "rs_distance_filter" => {
                self.rs_distance_filter = match v {
                    "none" => DistanceFilter::All,
                    "range" => DistanceFilter::Range,
                    _ => DistanceFilter::Meters(parse(key, v)?),
                }
            }
            "include_zero" => self.include_zero = parse(key, v)?,
            "link_bitrate" => self.link_bitrate = parse(key, v)?,
            "per_hop_latency" => self.per_hop_latency = parse(key, v)?,
            "loss_probability" => self.loss_probability = parse(key, v)?,
            "broadcast_jitter" => self.broadcast_jitter = parse(key, v)?,
            "protocol" => self.protocol = parse(key, v)?,
            "flows" => self.flows = parse(key, v)?,
            "flow_rate" => self.flow_rate = parse(key, v)?,
            "packet_bytes" => self.packet_bytes = parse(key, v)?,
            "flow_start" => self.flow_start = parse(key, v)?,
            "flow_stagger" => self.flow_stagger = parse(key, v)?,
            "flow_stop" => {
                self.flow_stop = if v == "end" {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "ttl" => self.sim.ttl = parse(key, v)?,
            "queue_capacity" => self.sim.queue_capacity = parse(key, v)?,
            "buffer_capacity" => self.sim.buffer_capacity = parse(key, v)?,
            "dup_cache_size" => self.sim.dup_cache_size = parse(key, v)?,
            "control_packet_bits" => self.sim.control_packet_bits = parse(key, v)?,
            "route_lifetime" => self.sim.route_lifetime = parse(key, v)?,
            "rreq_timeout" => self.sim.rreq_timeout = parse(key, v)?,
            "rreq_retries" => self.sim.rreq_retries = parse(key, v)?,
            "dsr_send_buffer_timeout" => self.sim.dsr_send_buffer_timeout = parse(key, v)?,
            "dsr_backoff_initial" => self.sim.dsr_backoff_initial = parse(key, v)?,
            "dsr_backoff_max" => self.sim.dsr_backoff_max = parse(key, v)?,
            "dsr_cache_size" => self.sim.dsr_cache_size = parse(key, v)?,
            "tora_query_timeout" => self.sim.tora_query_timeout = parse(key, v)?,
            "tora_query_retries" => self.sim.tora_query_retries = parse(key, v)?,
            "tora_reversal_budget" => self.sim.tora_reversal_budget = parse(key, v)?,
            "tora_reversal_window" => self.sim.tora_reversal_window = parse(key, v)?,
            "record_events" => self.sim.record_events = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "sweep_models" => self.sweep_models = parse_list(key, v)?,
            "sweep_protocols" => self.sweep_protocols = parse_list(key, v)?,
            "sweep_speeds" => self.sweep_speeds = parse_list(key, v)?,
            "sweep_seeds" => self.sweep_seeds = parse_list(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let s = &self.sim;
        Some(match key {
            "model" => self.model.to_string(),
            "num_nodes" => self.num_nodes.to_string(),
            "num_groups" => self.num_groups.to_string(),
            "sdr" => self.sdr.to_string(),
            "adr" => self.adr.to_string(),
            "max_speed" => self.max_speed.to_string(),
            "max_angle" => self.max_angle.to_string(),
            "group_radius" => self.group_radius.to_string(),
            "leaders" => self.leaders.to_string(),
            "leader_min_speed" => self.leader_min_speed.to_string(),
            "leader_accel_limit" => self.leader_accel_limit.to_string(),
            "min_speed" => self.min_speed.to_string(),
            "accel_limit" => self.accel_limit.to_string(),
            "safety_distance" => self.safety_distance.to_string(),
            "turn_straight" => self.turn_straight.to_string(),
            "turn_left" => self.turn_left.to_string(),
            "turn_right" => self.turn_right.to_string(),
            "area_width" => self.area_width.to_string(),
            "area_height" => self.area_height.to_string(),
            "manhattan_rows" => self.manhattan_rows.to_string(),
            "manhattan_cols" => self.manhattan_cols.to_string(),
            "freeway_count" => self.freeway_count.to_string(),
            "freeway_lanes" => self.freeway_lanes.to_string(),
            "duration" => self.duration.to_string(),
            "sample_interval" => self.sample_interval.to_string(),
            "range" => self.range.to_string(),
            "proximity_factor" => self.proximity_factor.to_string(),
            "rs_distance_filter" => self.rs_distance_filter.to_string(),
            "include_zero" => self.include_zero.to_string(),
            "link_bitrate" => self.link_bitrate.to_string(),
            "per_hop_latency" => self.per_hop_latency.to_string(),
            "loss_probability" => self.loss_probability.to_string(),
            "broadcast_jitter" => self.broadcast_jitter.to_string(),
            "protocol" => self.protocol.to_string(),
            "flows" => self.flows.to_string(),
            "flow_rate" => self.flow_rate.to_string(),
            "packet_bytes" => self.packet_bytes.to_string(),
            "flow_start" => self.flow_start.to_string(),
            "flow_stagger" => self.flow_stagger.to_string(),
            "flow_stop" => self
                .flow_stop
                .map_or_else(|| "end".to_string(), |t| t.to_string()),
            "ttl" => s.ttl.to_string(),
            "queue_capacity" => s.queue_capacity.to_string(),
            "buffer_capacity" => s.buffer_capacity.to_string(),
            "dup_cache_size" => s.dup_cache_size.to_string(),
            "control_packet_bits" => s.control_packet_bits.to_string(),
            "route_lifetime" => s.route_lifetime.to_string(),
            "rreq_timeout" => s.rreq_timeout.to_string(),
            "rreq_retries" => s.rreq_retries.to_string(),
            "dsr_send_buffer_timeout" => s.dsr_send_buffer_timeout.to_string(),
            "dsr_backoff_initial" => s.dsr_backoff_initial.to_string(),
            "dsr_backoff_max" => s.dsr_backoff_max.to_string(),
            "dsr_cache_size" => s.dsr_cache_size.to_string(),
            "tora_query_timeout" => s.tora_query_timeout.to_string(),
            "tora_query_retries" => s.tora_query_retries.to_string(),
            "tora_reversal_budget" => s.tora_reversal_budget.to_string(),
            "tora_reversal_window" => s.tora_reversal_window.to_string(),
            "record_events" => s.record_events.to_string(),
            "seed" => self.seed.to_string(),
            "sweep_models" => join(&self.sweep_models),
            "sweep_protocols" => join(&self.sweep_protocols),
            "sweep_speeds" => join(&self.sweep_speeds),
            "sweep_seeds" => join(&self.sweep_seeds),
            _ => return None,
        })
    }

    /// Parses a config file body on top of the defaults.
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut config = ScenarioConfig::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                });
            };
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate {
                    line: i + 1,
                    key: key.to_string(),
                });
            }
            config.set(key, value)?;
        }
        Ok(config)
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: 0,
                text: assignment.to_string(),
            });
        };
        self.set(key.trim(), value)
    }

    /// Canonical text form; parsing it back yields the same config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            let value = self.get(key).expect("every listed key has a value");
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            out.push('\n');
        }
        out
    }

    /// Identifies one run: first 16 hex digits of the SHA-256 of the
    /// canonical text without the `sweep_*` keys, which never affect a run.
    pub fn hash(&self) -> String {
        let text: String = self
            .to_text()
            .lines()
            .filter(|l| !l.starts_with("sweep_"))
            .map(|l| format!("{l}\n"))
            .collect();
        short_digest(&text)
    }

    /// Like [`hash`](Self::hash) but over every key, grid lists included.
    pub fn sweep_hash(&self) -> String {
        short_digest(&self.to_text())
    }

    pub fn area(&self) -> Result<SimulationArea, ConfigError> {
        SimulationArea::new(self.area_width, self.area_height).map_err(|e| invalid("area_width", e))
    }

    pub fn turns(&self) -> TurnProbabilities {
        TurnProbabilities {
            straight: self.turn_straight,
            left: self.turn_left,
            right: self.turn_right,
        }
    }

    pub fn gvmm_params(&self) -> GvmmParams {
        GvmmParams {
            num_nodes: self.num_nodes,
            num_groups: self.num_groups,
            sdr: self.sdr,
            adr: self.adr,
            max_speed: self.max_speed,
            max_angle: self.max_angle,
            group_radius: self.group_radius,
            leader_min_speed: self.leader_min_speed,
            leader_accel_limit: self.leader_accel_limit,
            duration: self.duration,
            sample_interval: self.sample_interval,
            turns: self.turns(),
        }
    }

    pub fn vehicular_params(&self) -> VehicularParams {
        VehicularParams {
            num_nodes: self.num_nodes,
            max_speed: self.max_speed,
            min_speed: self.min_speed,
            accel_limit: self.accel_limit,
            safety_distance: self.safety_distance,
            duration: self.duration,
            sample_interval: self.sample_interval,
            turns: self.turns(),
        }
    }

    pub fn metrics_config(&self) -> MetricsConfig {
        MetricsConfig {
            range: self.range,
            proximity_factor: self.proximity_factor,
            distance_filter: match self.rs_distance_filter {
                DistanceFilter::All => None,
                DistanceFilter::Range => Some(self.range),
                DistanceFilter::Meters(m) => Some(m),
            },
            include_zero: self.include_zero,
        }
    }

    pub fn radio(&self) -> RadioModel {
        RadioModel {
            range: self.range,
            link_bitrate: self.link_bitrate,
            per_hop_latency: self.per_hop_latency,
            loss_probability: self.loss_probability,
            broadcast_jitter: self.broadcast_jitter,
        }
    }

    pub fn packet_bits(&self) -> u32 {
        self.packet_bytes.saturating_mul(8)
    }

    /// Checks every key; the error names the first offending one.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.area()?;
        match self.model {
            MobilityModel::Gvmm => {
                self.gvmm_params().validate().map_err(mobility_invalid)?;
                if self.leaders == LeaderSource::Traffic {
                    self.vehicular_params()
                        .validate()
                        .map_err(mobility_invalid)?;
                }
            }
            _ => self
                .vehicular_params()
                .validate()
                .map_err(mobility_invalid)?,
        }
        self.turns()
            .validate()
            .map_err(|e| invalid("turn_straight", e))?;
        if self.manhattan_rows < 2 {
            return Err(invalid("manhattan_rows", "need at least 2 streets"));
        }
        if self.manhattan_cols < 2 {
            return Err(invalid("manhattan_cols", "need at least 2 streets"));
        }
        if self.freeway_count == 0 {
            return Err(invalid("freeway_count", "need at least one freeway"));
        }
        if self.freeway_lanes == 0 {
            return Err(invalid(
                "freeway_lanes",
                "need at least one lane per direction",
            ));
        }
        if !(self.range.is_finite() && self.range > 0.0) {
            return Err(invalid("range", "must be positive"));
        }
        if !(self.proximity_factor.is_finite() && self.proximity_factor > 0.0) {
            return Err(invalid("proximity_factor", "must be positive"));
        }
        if let DistanceFilter::Meters(m) = self.rs_distance_filter {
            if !(m.is_finite() && m > 0.0) {
                return Err(invalid(
                    "rs_distance_filter",
                    "must be positive, `range` or `none`",
                ));
            }
        }
        self.radio().validate().map_err(sim_invalid)?;
        self.sim.validate().map_err(sim_invalid)?;
        if self.flows > 0 && self.num_nodes < 2 {
            return Err(invalid("flows", "traffic needs at least two nodes"));
        }
        if !(self.flow_rate.is_finite() && self.flow_rate > 0.0) {
            return Err(invalid("flow_rate", "must be positive"));
        }
        if self.packet_bytes == 0 {
            return Err(invalid("packet_bytes", "must be positive"));
        }
        if !(self.flow_start.is_finite() && self.flow_start >= 0.0) {
            return Err(invalid("flow_start", "must be non-negative"));
        }
        if !(self.flow_stagger.is_finite() && self.flow_stagger >= 0.0) {
            return Err(invalid("flow_stagger", "must be non-negative"));
        }
        let stop = self.flow_stop.unwrap_or(self.duration);
        if !(stop.is_finite() && stop >= self.flow_start && stop <= self.duration) {
            return Err(invalid(
                "flow_stop",
                "must lie between flow_start and duration",
            ));
        }
        if let Some(v) = self
            .sweep_speeds
            .iter()
            .find(|v| !(v.is_finite() && **v > 0.0))
        {
            return Err(invalid(
                "sweep_speeds",
                format!("speed {v} is not positive"),
            ));
        }
        Ok(())
    }
}

fn invalid(key: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

fn mobility_invalid(e: manet_core::mobility::MobilityError) -> ConfigError {
    match e {
        manet_core::mobility::MobilityError::InvalidParameter { key, reason } => {
            invalid(key, reason)
        }
        other => invalid("model", other),
    }
}

fn sim_invalid(e: manet_core::sim::SimError) -> ConfigError {
    match e {
        manet_core::sim::SimError::InvalidParameter { key, reason } => invalid(key, reason),
        other => invalid("flows", other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        let mut c = ScenarioConfig::default();
        c.set("model", "freeway").unwrap();
        c.set("rs_distance_filter", "none").unwrap();
        c.set("flow_stop", "300").unwrap();
        c.set("sweep_speeds", "10, 60").unwrap();
        let back = ScenarioConfig::parse_str(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn every_key_is_settable_and_readable() {
        let c = ScenarioConfig::default();
        for key in ScenarioConfig::KEYS {
            let value = c.get(key).unwrap();
            let mut d = ScenarioConfig::default();
            d.set(key, &value).unwrap();
            assert_eq!(d, c, "{key}");
        }
    }

    #[test]
    fn hash_changes_with_any_key() {
        let a = ScenarioConfig::default();
        let mut b = a.clone();
        b.set("seed", "2").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        let mut c = a.clone();
        c.set("sweep_seeds", "9").unwrap();
        assert_eq!(c.hash(), a.hash());
        assert_ne!(c.sweep_hash(), a.sweep_hash());
    }

    #[test]
    fn file_errors_point_at_the_line() {
        let err = ScenarioConfig::parse_str("seed = 3\n\nnonsense\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Syntax {
                line: 3,
                text: "nonsense".into()
            }
        );
        let err = ScenarioConfig::parse_str("seed = 3\nseed = 4\n").unwrap_err();
        assert!(matches!(err, ConfigError::Duplicate { line: 2, .. }));
        let err = ScenarioConfig::parse_str("colour = red\n").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey("colour".into()));
    }

    #[test]
    fn validation_names_the_key() {
        let mut c = ScenarioConfig::default();
        c.num_groups = 0;
        match c.validate().unwrap_err() {
            ConfigError::Invalid { key, .. } => assert_eq!(key, "num_groups"),
            other => panic!("{other}"),
        }
        let mut c = ScenarioConfig::default();
        c.flow_stop = Some(1e6);
        assert!(
            matches!(c.validate(), Err(ConfigError::Invalid { key, .. }) if key == "flow_stop")
        );
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let c = ScenarioConfig::parse_str("# experiment grid\nmax_speed = 40 # m/s\n\n").unwrap();
        assert_eq!(c.max_speed, 40.0);
    }
}
