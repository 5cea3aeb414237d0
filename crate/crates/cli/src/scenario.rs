//! Turns a [`ScenarioConfig`] into traces, flows and simulation runs, and
//! formats the resulting CSV rows.

use manet_core::geometry::MobilityTrace;
use manet_core::metrics::{compute_metrics, MetricValue, MetricsReport};
use manet_core::mobility::{
    generate_freeway, generate_gvmm, generate_gvmm_in_traffic, generate_gvmm_with_leaders,
    generate_manhattan, MobilityError,
};
use manet_core::roadmap::{build_freeway_map, build_manhattan_map, LaneGraph};
use manet_core::sim::{
    compute_avg_delay, compute_nrl, compute_path_optimality, compute_pdr, run_simulation,
    select_flows, DropReason, Protocol, SimError, SimReport, TrafficFlow,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{LeaderSource, MobilityModel, ScenarioConfig};
use crate::tracefile::{read_trace, TraceMeta};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("mobility: {0}")]
    Mobility(#[from] MobilityError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
}

/// Independent stream seed for one purpose within a run.
pub fn derive_seed(seed: u64, labels: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for l in labels {
        h.update([0u8]);
        h.update(l.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

fn stream(config: &ScenarioConfig, purpose: &str) -> ChaCha8Rng {
    let speed = config.max_speed.to_string();
    ChaCha8Rng::seed_from_u64(derive_seed(
        config.seed,
        &[purpose, config.model.name(), &speed],
    ))
}

pub fn build_map(config: &ScenarioConfig) -> Result<LaneGraph, MobilityError> {
    let area = config.area().map_err(|_| MobilityError::InvalidParameter {
        key: "area_width",
        reason: "area must be positive".into(),
    })?;
    Ok(match config.model {
        MobilityModel::Gvmm | MobilityModel::Manhattan => {
            build_manhattan_map(config.manhattan_rows, config.manhattan_cols, area)?
        }
        MobilityModel::Freeway => {
            build_freeway_map(config.freeway_count, config.freeway_lanes, area)?
        }
    })
}

pub fn generate_trace(config: &ScenarioConfig) -> Result<MobilityTrace, MobilityError> {
    let map = build_map(config)?;
    let mut rng = stream(config, "mobility");
    match config.model {
        MobilityModel::Gvmm => match &config.leaders {
            LeaderSource::Internal => generate_gvmm(&config.gvmm_params(), &map, &mut rng),
            LeaderSource::Traffic => generate_gvmm_in_traffic(
                &config.gvmm_params(),
                &config.vehicular_params(),
                &map,
                &mut rng,
            ),
            LeaderSource::File(path) => {
                let leaders = read_leaders(path, config.num_groups)?;
                generate_gvmm_with_leaders(&config.gvmm_params(), &leaders, map.area, &mut rng)
            }
        },
        MobilityModel::Manhattan => generate_manhattan(&config.vehicular_params(), &map, &mut rng),
        MobilityModel::Freeway => generate_freeway(&config.vehicular_params(), &map, &mut rng),
    }
}

fn read_leaders(
    path: &str,
    groups: usize,
) -> Result<Vec<Vec<manet_core::NodeState>>, MobilityError> {
    let fail = |reason: String| MobilityError::InvalidParameter {
        key: "leaders",
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| fail(format!("{path}: {e}")))?;
    let (trace, _) = read_trace(&text).map_err(|e| fail(format!("{path}: {e}")))?;
    if trace.node_count < groups {
        return Err(fail(format!(
            "{path} holds {} nodes, need one per group ({groups})",
            trace.node_count
        )));
    }
    Ok((0..groups).map(|g| trace.node_path(g)).collect())
}

pub fn trace_meta(config: &ScenarioConfig) -> TraceMeta {
    let mut meta = TraceMeta {
        seed: Some(config.seed),
        model: Some(config.model.to_string()),
        ..TraceMeta::default()
    };
    meta.params.insert("config_hash".into(), config.hash());
    for key in ScenarioConfig::KEYS {
        if let Some(v) = config.get(key) {
            meta.params.insert(key.to_string(), v);
        }
    }
    meta
}

pub fn build_flows(
    config: &ScenarioConfig,
    trace: &MobilityTrace,
) -> Result<Vec<TrafficFlow>, SimError> {
    let stop = config
        .flow_stop
        .unwrap_or(trace.duration)
        .min(trace.duration);
    let mut rng = stream(config, "flows");
    select_flows(
        trace.node_count,
        config.flows,
        config.flow_rate,
        config.packet_bits(),
        config.flow_start,
        config.flow_stagger,
        stop,
        &mut rng,
    )
}

pub fn simulate(
    config: &ScenarioConfig,
    trace: &MobilityTrace,
    flows: &[TrafficFlow],
    protocol: Protocol,
) -> Result<SimReport, SimError> {
    let seed = derive_seed(
        config.seed,
        &["sim", config.model.name(), &config.max_speed.to_string()],
    );
    run_simulation(
        trace,
        flows,
        protocol,
        config.radio(),
        config.sim.clone(),
        seed,
    )
}

pub fn na_or(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn metric(v: &MetricValue) -> String {
    na_or(v.is_defined().then_some(v.value))
}

pub const MOBILITY_HEADER: [&str; 14] = [
    "source",
    "model",
    "seed",
    "max_speed",
    "config_hash",
    "range",
    "link_duration",
    "relative_speed",
    "spatial_dependence",
    "episodes",
    "rs_tuples",
    "ds_tuples",
    "ds_zero_speed_skips",
    "errors",
];

/// One analysed trace.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityRow {
    pub source: String,
    pub model: String,
    pub seed: Option<u64>,
    pub max_speed: Option<f64>,
    pub config_hash: String,
    pub metrics: Option<MetricsReport>,
    pub error: Option<String>,
}

impl MobilityRow {
    pub fn analyse(
        source: String,
        model: String,
        seed: Option<u64>,
        max_speed: Option<f64>,
        hash: String,
        trace: &MobilityTrace,
        config: &ScenarioConfig,
    ) -> Self {
        MobilityRow {
            source,
            model,
            seed,
            max_speed,
            config_hash: hash,
            metrics: Some(compute_metrics(trace, config.metrics_config())),
            error: None,
        }
    }

    pub fn record(&self) -> Vec<String> {
        let m = self.metrics.as_ref();
        let count = |f: fn(&MetricsReport) -> usize| {
            m.map_or_else(|| "NA".to_string(), |r| f(r).to_string())
        };
        vec![
            self.source.clone(),
            self.model.clone(),
            self.seed.map_or_else(|| "NA".into(), |s| s.to_string()),
            na_or(self.max_speed),
            self.config_hash.clone(),
            m.map_or_else(|| "NA".into(), |r| r.config.range.to_string()),
            m.map_or_else(|| "NA".into(), |r| metric(&r.link_duration)),
            m.map_or_else(|| "NA".into(), |r| metric(&r.relative_speed)),
            m.map_or_else(|| "NA".into(), |r| metric(&r.spatial_dependence)),
            count(|r| r.episodes),
            count(|r| r.relative_speed.tuples),
            count(|r| r.spatial_dependence.tuples),
            count(|r| r.zero_speed_skips),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

pub fn routing_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "protocol",
        "model",
        "seed",
        "max_speed",
        "config_hash",
        "pdr",
        "nrl",
        "avg_delay",
        "path_optimality",
        "originated",
        "delivered",
        "dropped",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(DropReason::ALL.iter().map(|r| format!("drop_{}", r.name())));
    h.extend(
        [
            "in_flight",
            "routing_transmissions",
            "data_transmissions",
            "conserved",
            "errors",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h
}

/// Outcome of one protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingRow {
    pub protocol: Protocol,
    pub model: String,
    pub seed: u64,
    pub max_speed: f64,
    pub config_hash: String,
    pub report: Option<SimReport>,
    pub error: Option<String>,
}

impl RoutingRow {
    pub fn pdr(&self) -> Option<f64> {
        self.report.as_ref().and_then(|r| compute_pdr(r).ok())
    }

    pub fn nrl(&self) -> Option<f64> {
        self.report.as_ref().and_then(|r| compute_nrl(r).ok())
    }

    pub fn avg_delay(&self) -> Option<f64> {
        self.report.as_ref().and_then(|r| compute_avg_delay(r).ok())
    }

    pub fn path_optimality(&self) -> Option<f64> {
        self.report
            .as_ref()
            .and_then(|r| compute_path_optimality(r).ok())
    }

    pub fn record(&self) -> Vec<String> {
        let mut row = vec![
            self.protocol.to_string(),
            self.model.clone(),
            self.seed.to_string(),
            self.max_speed.to_string(),
            self.config_hash.clone(),
            na_or(self.pdr()),
            na_or(self.nrl()),
            na_or(self.avg_delay()),
            na_or(self.path_optimality()),
        ];
        match &self.report {
            Some(r) => {
                row.push(r.originated.to_string());
                row.push(r.delivered.to_string());
                row.push(r.dropped.total().to_string());
                row.extend(
                    DropReason::ALL
                        .iter()
                        .map(|d| r.dropped.get(*d).to_string()),
                );
                row.push(r.in_flight_at_end.to_string());
                row.push(r.routing_transmissions.to_string());
                row.push(r.data_transmissions.to_string());
                row.push(r.is_conserved().to_string());
            }
            None => row.extend(std::iter::repeat_n(
                "NA".to_string(),
                7 + DropReason::ALL.len(),
            )),
        }
        row.push(self.error.clone().unwrap_or_default());
        row
    }
}

/// Generates, analyses and simulates one (model, speed, seed) cell.
pub fn run_cell(
    config: &ScenarioConfig,
    protocols: &[Protocol],
    with_routing: bool,
) -> (MobilityRow, Vec<RoutingRow>) {
    let hash = config.hash();
    let label = format!("{}-v{}-s{}", config.model, config.max_speed, config.seed);
    let trace = match generate_trace(config) {
        Ok(t) => t,
        Err(e) => {
            let msg = e.to_string();
            let mobility = MobilityRow {
                source: label,
                model: config.model.to_string(),
                seed: Some(config.seed),
                max_speed: Some(config.max_speed),
                config_hash: hash.clone(),
                metrics: None,
                error: Some(msg.clone()),
            };
            let routing = if with_routing {
                protocols
                    .iter()
                    .map(|p| failed_routing(config, *p, &hash, &msg))
                    .collect()
            } else {
                Vec::new()
            };
            return (mobility, routing);
        }
    };
    let mobility = MobilityRow::analyse(
        label,
        config.model.to_string(),
        Some(config.seed),
        Some(config.max_speed),
        hash.clone(),
        &trace,
        config,
    );
    if !with_routing {
        return (mobility, Vec::new());
    }
    let flows = match build_flows(config, &trace) {
        Ok(f) => f,
        Err(e) => {
            let msg = e.to_string();
            return (
                mobility,
                protocols
                    .iter()
                    .map(|p| failed_routing(config, *p, &hash, &msg))
                    .collect(),
            );
        }
    };
    let routing = protocols
        .iter()
        .map(|&protocol| {
            let mut cell = config.clone();
            cell.protocol = protocol;
            let hash = cell.hash();
            match simulate(&cell, &trace, &flows, protocol) {
                Ok(report) => RoutingRow {
                    protocol,
                    model: config.model.to_string(),
                    seed: config.seed,
                    max_speed: config.max_speed,
                    config_hash: hash,
                    report: Some(report),
                    error: None,
                },
                Err(e) => failed_routing(&cell, protocol, &hash, &e.to_string()),
            }
        })
        .collect();
    (mobility, routing)
}

fn failed_routing(
    config: &ScenarioConfig,
    protocol: Protocol,
    hash: &str,
    msg: &str,
) -> RoutingRow {
    RoutingRow {
        protocol,
        model: config.model.to_string(),
        seed: config.seed,
        max_speed: config.max_speed,
        config_hash: hash.to_string(),
        report: None,
        error: Some(msg.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_label_and_seed() {
        let a = derive_seed(1, &["mobility", "gvmm"]);
        assert_eq!(a, derive_seed(1, &["mobility", "gvmm"]));
        assert_ne!(a, derive_seed(2, &["mobility", "gvmm"]));
        assert_ne!(a, derive_seed(1, &["mobility", "freeway"]));
        // label boundaries matter
        assert_ne!(derive_seed(1, &["ab", "c"]), derive_seed(1, &["a", "bc"]));
    }

    #[test]
    fn routing_rows_have_a_cell_per_column() {
        let mut c = ScenarioConfig::default();
        c.num_nodes = 6;
        c.num_groups = 2;
        c.duration = 30.0;
        c.flows = 2;
        c.flow_start = 5.0;
        let (m, rows) = run_cell(&c, &Protocol::ALL, true);
        assert_eq!(m.record().len(), MOBILITY_HEADER.len());
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert_eq!(r.record().len(), routing_header().len());
            assert!(r.report.as_ref().unwrap().is_conserved());
        }
    }

    #[test]
    fn routing_hash_depends_on_protocol() {
        let mut c = ScenarioConfig::default();
        c.num_nodes = 4;
        c.num_groups = 1;
        c.duration = 20.0;
        c.flows = 1;
        c.flow_start = 2.0;
        let (_, rows) = run_cell(&c, &[Protocol::Aodv, Protocol::Dsr], true);
        assert_ne!(rows[0].config_hash, rows[1].config_hash);
        c.protocol = Protocol::Dsr;
        assert_eq!(rows[1].config_hash, c.hash());
    }
}
