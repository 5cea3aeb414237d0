//! Full grid sweep: models × speeds × seeds, each cell generated, analysed and
//! simulated with every protocol.

use std::path::Path;
use std::time::{Duration, Instant};

use manet_core::sim::Protocol;
use rayon::prelude::*;

use crate::config::{MobilityModel, ScenarioConfig};
use crate::scenario::{na_or, routing_header, run_cell, MobilityRow, RoutingRow, MOBILITY_HEADER};

pub const MOBILITY_RUNS: &str = "mobility_runs.csv";
pub const ROUTING_RUNS: &str = "routing_runs.csv";
pub const MOBILITY_SUMMARY: &str = "mobility_summary.csv";
pub const ROUTING_SUMMARY: &str = "routing_summary.csv";

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub sweep_hash: String,
    pub seeds: Vec<u64>,
    pub mobility: Vec<MobilityRow>,
    pub routing: Vec<RoutingRow>,
    /// Wall time per cell, in grid order. Not written to the tables.
    pub cell_times: Vec<Duration>,
}

/// The per-cell config for one grid point.
pub fn cell_config(
    base: &ScenarioConfig,
    model: MobilityModel,
    max_speed: f64,
    seed: u64,
) -> ScenarioConfig {
    let mut c = base.clone();
    c.model = model;
    c.max_speed = max_speed;
    c.seed = seed;
    c
}

pub fn grid(base: &ScenarioConfig) -> Vec<ScenarioConfig> {
    let mut cells = Vec::new();
    for &model in &base.sweep_models {
        for &speed in &base.sweep_speeds {
            for &seed in &base.sweep_seeds {
                cells.push(cell_config(base, model, speed, seed));
            }
        }
    }
    cells
}

pub fn run_sweep(base: &ScenarioConfig, with_routing: bool) -> SweepOutput {
    let results: Vec<_> = grid(base)
        .par_iter()
        .map(|cell| {
            let started = Instant::now();
            let (m, r) = run_cell(cell, &base.sweep_protocols, with_routing);
            (m, r, started.elapsed())
        })
        .collect();
    let mut out = SweepOutput {
        sweep_hash: base.sweep_hash(),
        seeds: base.sweep_seeds.clone(),
        mobility: Vec::with_capacity(results.len()),
        routing: Vec::new(),
        cell_times: Vec::with_capacity(results.len()),
    };
    for (m, r, t) in results {
        out.mobility.push(m);
        out.routing.extend(r);
        out.cell_times.push(t);
    }
    out
}

/// Mean and sample standard deviation of the defined values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Stat {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        let n = v.len();
        if n == 0 {
            return Stat {
                n,
                mean: None,
                std: None,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = (n > 1)
            .then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
        Stat {
            n,
            mean: Some(mean),
            std,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilitySummary {
    pub model: String,
    pub max_speed: f64,
    pub link_duration: Stat,
    pub relative_speed: Stat,
    pub spatial_dependence: Stat,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingSummary {
    pub protocol: Protocol,
    pub model: String,
    pub max_speed: f64,
    pub pdr: Stat,
    pub nrl: Stat,
    pub avg_delay: Stat,
    pub path_optimality: Stat,
    pub failed: usize,
    pub all_conserved: bool,
}

fn same_cell(a_model: &str, a_speed: f64, model: &str, speed: f64) -> bool {
    a_model == model && a_speed == speed
}

impl SweepOutput {
    pub fn mobility_summary(&self, base: &ScenarioConfig) -> Vec<MobilitySummary> {
        let mut out = Vec::new();
        for model in &base.sweep_models {
            for &speed in &base.sweep_speeds {
                let rows: Vec<&MobilityRow> = self
                    .mobility
                    .iter()
                    .filter(|r| {
                        r.max_speed
                            .is_some_and(|v| same_cell(&r.model, v, model.name(), speed))
                    })
                    .collect();
                let pick = |f: fn(
                    &manet_core::metrics::MetricsReport,
                ) -> &manet_core::metrics::MetricValue| {
                    Stat::of(rows.iter().map(|r| {
                        r.metrics
                            .as_ref()
                            .map(f)
                            .and_then(|m| m.is_defined().then_some(m.value))
                    }))
                };
                out.push(MobilitySummary {
                    model: model.to_string(),
                    max_speed: speed,
                    link_duration: pick(|m| &m.link_duration),
                    relative_speed: pick(|m| &m.relative_speed),
                    spatial_dependence: pick(|m| &m.spatial_dependence),
                    failed: rows.iter().filter(|r| r.error.is_some()).count(),
                });
            }
        }
        out
    }

    pub fn routing_summary(&self, base: &ScenarioConfig) -> Vec<RoutingSummary> {
        let mut out = Vec::new();
        for &protocol in &base.sweep_protocols {
            for model in &base.sweep_models {
                for &speed in &base.sweep_speeds {
                    let rows: Vec<&RoutingRow> = self
                        .routing
                        .iter()
                        .filter(|r| {
                            r.protocol == protocol
                                && same_cell(&r.model, r.max_speed, model.name(), speed)
                        })
                        .collect();
                    if rows.is_empty() {
                        continue;
                    }
                    out.push(RoutingSummary {
                        protocol,
                        model: model.to_string(),
                        max_speed: speed,
                        pdr: Stat::of(rows.iter().map(|r| r.pdr())),
                        nrl: Stat::of(rows.iter().map(|r| r.nrl())),
                        avg_delay: Stat::of(rows.iter().map(|r| r.avg_delay())),
                        path_optimality: Stat::of(rows.iter().map(|r| r.path_optimality())),
                        failed: rows.iter().filter(|r| r.error.is_some()).count(),
                        all_conserved: rows
                            .iter()
                            .all(|r| r.report.as_ref().is_some_and(|x| x.is_conserved())),
                    });
                }
            }
        }
        out
    }

    pub fn write_tables(&self, base: &ScenarioConfig, dir: &Path) -> Result<(), csv::Error> {
        std::fs::create_dir_all(dir)?;
        let seeds = self
            .seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(";");

        let mut w = csv::Writer::from_path(dir.join(MOBILITY_RUNS))?;
        w.write_record(MOBILITY_HEADER)?;
        for r in &self.mobility {
            w.write_record(r.record())?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join(MOBILITY_SUMMARY))?;
        let mut header = vec!["model", "max_speed", "seeds", "sweep_hash", "n"];
        header.extend([
            "link_duration_mean",
            "link_duration_std",
            "relative_speed_mean",
            "relative_speed_std",
            "spatial_dependence_mean",
            "spatial_dependence_std",
            "failed_cells",
        ]);
        w.write_record(&header)?;
        for s in self.mobility_summary(base) {
            let mut rec = vec![
                s.model.clone(),
                s.max_speed.to_string(),
                seeds.clone(),
                self.sweep_hash.clone(),
                s.link_duration.n.to_string(),
            ];
            for st in [s.link_duration, s.relative_speed, s.spatial_dependence] {
                rec.push(na_or(st.mean));
                rec.push(na_or(st.std));
            }
            rec.push(s.failed.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;

        if self.routing.is_empty() {
            return Ok(());
        }
        let mut w = csv::Writer::from_path(dir.join(ROUTING_RUNS))?;
        w.write_record(routing_header())?;
        for r in &self.routing {
            w.write_record(r.record())?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join(ROUTING_SUMMARY))?;
        let mut header = vec!["protocol", "model", "max_speed", "seeds", "sweep_hash", "n"];
        header.extend([
            "pdr_mean",
            "pdr_std",
            "nrl_mean",
            "nrl_std",
            "avg_delay_mean",
            "avg_delay_std",
            "path_optimality_mean",
            "path_optimality_std",
            "failed_cells",
            "all_conserved",
        ]);
        w.write_record(&header)?;
        for s in self.routing_summary(base) {
            let mut rec = vec![
                s.protocol.to_string(),
                s.model.clone(),
                s.max_speed.to_string(),
                seeds.clone(),
                self.sweep_hash.clone(),
                s.pdr.n.to_string(),
            ];
            for st in [s.pdr, s.nrl, s.avg_delay, s.path_optimality] {
                rec.push(na_or(st.mean));
                rec.push(na_or(st.std));
            }
            rec.push(s.failed.to_string());
            rec.push(s.all_conserved.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
