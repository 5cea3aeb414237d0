//! Acceptance run over the full experiment grid. Prints one PASS/FAIL line
//! per criterion and exits nonzero if any fails.

use std::time::{Duration, Instant};

use manet_cli::config::{MobilityModel, ScenarioConfig};
use manet_cli::ns2::{export_ns2, parse_ns2, Ns2ParseOptions};
use manet_cli::scenario::{generate_trace, run_cell, trace_meta};
use manet_cli::sweep::{cell_config, run_sweep, MobilitySummary, RoutingSummary, SweepOutput};
use manet_cli::tracefile::write_trace;
use manet_core::geometry::{MobilityTrace, NodeState, SimulationArea, Vec2};
use manet_core::metrics::{compute_metrics, MetricsConfig};
use manet_core::sim::{compute_pdr, run_simulation, Protocol, RadioModel, SimParams, TrafficFlow};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn mean(
    s: &[MobilitySummary],
    model: &str,
    speed: f64,
    f: fn(&MobilitySummary) -> Option<f64>,
) -> f64 {
    s.iter()
        .find(|r| r.model == model && r.max_speed == speed)
        .and_then(f)
        .unwrap_or(f64::NAN)
}

fn ordering(
    summary: &[MobilitySummary],
    speeds: &[f64],
    f: fn(&MobilitySummary) -> Option<f64>,
    gvmm_beats: fn(f64, f64) -> bool,
) -> Outcome {
    let mut wins = 0;
    let mut cells = Vec::new();
    for &v in speeds {
        let g = mean(summary, "gvmm", v, f);
        let m = mean(summary, "manhattan", v, f);
        let w = mean(summary, "freeway", v, f);
        let ok = gvmm_beats(g, m) && gvmm_beats(g, w);
        wins += usize::from(ok);
        cells.push(format!(
            "{v}:{g:.2}/{m:.2}/{w:.2}{}",
            if ok { "" } else { "!" }
        ));
    }
    outcome(
        wins >= 5,
        format!(
            "{wins}/6 speeds (gvmm/manhattan/freeway) {}",
            cells.join(" ")
        ),
    )
}

fn criterion_1(summary: &[MobilitySummary], speeds: &[f64], slowest: Duration) -> Outcome {
    let mut o = ordering(summary, speeds, |r| r.link_duration.mean, |g, x| g > x);
    let fast = slowest <= Duration::from_secs(60);
    o.pass &= fast;
    o.detail = format!("{}; slowest cell {:.1} s", o.detail, slowest.as_secs_f64());
    o
}

// Independent enumeration of the metric definitions over one small trace.
struct Brute {
    ld: Option<f64>,
    rs: Option<f64>,
    ds: Option<f64>,
}

fn brute_force(trace: &MobilityTrace, range: f64, c: f64, rs_limit: Option<f64>) -> Brute {
    let n = trace.node_count;
    let steps = trace.step_count();
    let dt = trace.sample_interval;
    let at = |k: usize, i: usize| trace.samples[k * n + i].state;
    let dist = |a: NodeState, b: NodeState| {
        (a.position.x - b.position.x).hypot(a.position.y - b.position.y)
    };
    let linked = |k: usize, i: usize, j: usize| dist(at(k, i), at(k, j)) <= range;

    // every interval [s, e] that is in range throughout and cannot be extended
    let mut durations = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for s in 0..steps {
                for e in s..steps {
                    let inside = (s..=e).all(|k| linked(k, i, j));
                    let left_closed = s == 0 || !linked(s - 1, i, j);
                    let right_closed = e + 1 == steps || !linked(e + 1, i, j);
                    if inside && left_closed && right_closed {
                        durations.push((e - s + 1) as f64 * dt);
                    }
                }
            }
        }
    }
    let avg = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);

    let mut rs = Vec::new();
    let mut ds = Vec::new();
    for k in 0..steps {
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (a, b) = (at(k, i), at(k, j));
                let d = dist(a, b);
                let dvx = a.speed * a.heading.cos() - b.speed * b.heading.cos();
                let dvy = a.speed * a.heading.sin() - b.speed * b.heading.sin();
                let r = dvx.hypot(dvy);
                if rs_limit.is_none_or(|l| d <= l) && r > 1e-12 {
                    rs.push(r);
                }
                if d <= c * range && a.speed > 0.0 && b.speed > 0.0 {
                    let sr = a.speed.min(b.speed) / a.speed.max(b.speed);
                    let value = (a.heading - b.heading).cos() * sr;
                    if value.abs() > 1e-12 {
                        ds.push(value);
                    }
                }
            }
        }
    }
    Brute {
        ld: avg(&durations),
        rs: avg(&rs),
        ds: avg(&ds),
    }
}

fn handcrafted() -> Vec<MobilityTrace> {
    let area = SimulationArea::new(1000.0, 1000.0).unwrap();
    let build =
        |dt: f64, steps: usize, f: &dyn Fn(usize, usize) -> (f64, f64, f64, f64), nodes: usize| {
            let rows = (0..steps)
                .map(|k| {
                    (0..nodes)
                        .map(|i| {
                            let (x, y, v, h) = f(k, i);
                            NodeState::new(Vec2::new(x, y), v, h)
                        })
                        .collect()
                })
                .collect();
            MobilityTrace::from_steps(area, dt, rows).unwrap()
        };
    use std::f64::consts::{FRAC_PI_2, PI};
    vec![
        // static pair in range
        build(
            1.0,
            5,
            &|_, i| (100.0 + 50.0 * i as f64, 100.0, 0.0, 0.0),
            2,
        ),
        // separating pair, link ends mid-trace
        build(
            1.0,
            10,
            &|k, i| {
                (
                    400.0 + (2.0 * i as f64 - 1.0) * 40.0 * k as f64,
                    500.0,
                    40.0,
                    if i == 0 { PI } else { 0.0 },
                )
            },
            2,
        ),
        // head-on approach that opens a link late
        build(
            1.0,
            12,
            &|k, i| {
                let s = 2.0 * i as f64 - 1.0;
                (
                    500.0 + s * (400.0 - 30.0 * k as f64),
                    300.0,
                    30.0,
                    if i == 0 { 0.0 } else { PI },
                )
            },
            2,
        ),
        // perpendicular crossing: dependence tuples are zero and dropped
        build(
            1.0,
            15,
            &|k, i| {
                if i == 0 {
                    (200.0 + 20.0 * k as f64, 500.0, 20.0, 0.0)
                } else {
                    (340.0, 360.0 + 20.0 * k as f64, 20.0, FRAC_PI_2)
                }
            },
            2,
        ),
        // flapping link: distance alternates around the range
        build(
            1.0,
            20,
            &|k, i| {
                (
                    100.0 + i as f64 * if k % 3 == 0 { 300.0 } else { 200.0 },
                    700.0,
                    0.0,
                    0.0,
                )
            },
            2,
        ),
        // distance exactly at the range counts as linked
        build(
            1.0,
            6,
            &|_, i| (0.0 + 250.0 * i as f64, 0.0, 5.0, 0.3 * i as f64),
            2,
        ),
        // convoy of three with one stationary node
        build(
            1.0,
            8,
            &|k, i| match i {
                2 => (600.0, 620.0, 0.0, 0.0),
                _ => (500.0 + 10.0 * k as f64 + 30.0 * i as f64, 600.0, 10.0, 0.0),
            },
            3,
        ),
        // half-second sampling
        build(
            0.5,
            20,
            &|k, i| {
                let t = 0.5 * k as f64;
                (
                    300.0 + 12.0 * t * i as f64,
                    300.0 + 80.0 * i as f64,
                    12.0 * i as f64,
                    0.7,
                )
            },
            3,
        ),
        // five nodes on a ring, varied speeds and headings
        build(
            1.0,
            10,
            &|k, i| {
                let phase = i as f64 * 2.0 * PI / 5.0 + 0.1 * k as f64;
                (
                    500.0 + 180.0 * phase.cos(),
                    500.0 + 180.0 * phase.sin(),
                    3.0 + i as f64,
                    phase + FRAC_PI_2,
                )
            },
            5,
        ),
        // five nodes, two groups moving in opposite lanes
        build(
            1.0,
            16,
            &|k, i| {
                let east = i < 3;
                let x = if east {
                    100.0 + 25.0 * k as f64 + 15.0 * i as f64
                } else {
                    700.0 - 20.0 * k as f64 + 15.0 * i as f64
                };
                (
                    x,
                    if east { 495.0 } else { 505.0 },
                    if east { 25.0 } else { 20.0 },
                    if east { 0.0 } else { PI },
                )
            },
            5,
        ),
        // speeds and headings read from a fixed table
        build(
            1.0,
            7,
            &|k, i| {
                let table = [1.3, 7.9, 0.0, 4.4, 11.2, 2.7, 9.1];
                let v = table[(k + 2 * i) % 7];
                (
                    150.0 + 60.0 * i as f64 + 3.0 * k as f64,
                    150.0 + 45.0 * (k % 4) as f64,
                    v,
                    0.9 * (i + k) as f64,
                )
            },
            4,
        ),
    ]
}

fn close(a: Option<f64>, b: f64, defined: bool) -> bool {
    match a {
        None => !defined,
        Some(x) => defined && (x - b).abs() <= 1e-9 * x.abs().max(b.abs()).max(1e-300),
    }
}

fn criterion_4() -> Outcome {
    let traces = handcrafted();
    let started = Instant::now();
    let mut mismatches = Vec::new();
    let mut checked = 0;
    for (t, trace) in traces.iter().enumerate() {
        for filter in [None, Some(250.0)] {
            let config = MetricsConfig {
                distance_filter: filter,
                ..MetricsConfig::default()
            };
            let report = compute_metrics(trace, config);
            let brute = brute_force(trace, 250.0, 2.0, filter);
            let pairs = [
                ("LD", brute.ld, report.link_duration),
                ("RS", brute.rs, report.relative_speed),
                ("DS", brute.ds, report.spatial_dependence),
            ];
            for (name, want, got) in pairs {
                checked += 1;
                if !close(want, got.value, got.is_defined()) {
                    mismatches.push(format!("trace {t} {name}: {want:?} vs {}", got.value));
                }
            }
        }
    }
    let elapsed = started.elapsed();
    let pass = mismatches.is_empty() && elapsed <= Duration::from_secs(1) && traces.len() >= 10;
    let detail = if mismatches.is_empty() {
        format!(
            "{} traces, {checked} values match; {:.3} s",
            traces.len(),
            elapsed.as_secs_f64()
        )
    } else {
        mismatches.join("; ")
    };
    outcome(pass, detail)
}

fn static_trace(points: &[(f64, f64)], duration: usize) -> MobilityTrace {
    let area = SimulationArea::new(1000.0, 1000.0).unwrap();
    let row: Vec<NodeState> = points
        .iter()
        .map(|&(x, y)| NodeState::new(Vec2::new(x, y), 0.0, 0.0))
        .collect();
    MobilityTrace::from_steps(area, 1.0, vec![row; duration + 1]).unwrap()
}

fn criterion_5(sweep: &SweepOutput) -> Outcome {
    let data_bits = 4096u32;
    let flow = |dst| TrafficFlow {
        src: 0,
        dst,
        rate: 4096.0,
        packet_bits: data_bits,
        start: 10.0,
        stop: 50.0,
    };
    let radio = RadioModel::default();
    let hop = f64::from(data_bits) / radio.link_bitrate + radio.per_hop_latency;
    let mut problems = Vec::new();

    let pair = static_trace(&[(100.0, 100.0), (200.0, 100.0)], 60);
    for protocol in Protocol::ALL {
        let report =
            run_simulation(&pair, &[flow(1)], protocol, radio, SimParams::default(), 3).unwrap();
        if compute_pdr(&report).ok() != Some(1.0) {
            problems.push(format!("{protocol} pair PDR {:?}", compute_pdr(&report)));
        }
    }

    let chain = static_trace(&[(100.0, 100.0), (300.0, 100.0), (500.0, 100.0)], 60);
    let mut worst: f64 = 0.0;
    for protocol in Protocol::ALL {
        let report =
            run_simulation(&chain, &[flow(2)], protocol, radio, SimParams::default(), 3).unwrap();
        if report.deliveries.len() < 2 {
            problems.push(format!(
                "{protocol} chain delivered {}",
                report.deliveries.len()
            ));
            continue;
        }
        // after discovery every packet crosses two idle hops
        for d in &report.deliveries[1..] {
            worst = worst.max((d.delay() - 2.0 * hop).abs());
        }
    }
    if worst > 1e-6 {
        problems.push(format!("chain delay off by {worst:e} s"));
    }

    let unconserved = sweep
        .routing
        .iter()
        .filter(|r| !r.report.as_ref().is_some_and(|x| x.is_conserved()))
        .count();
    if unconserved > 0 {
        problems.push(format!("{unconserved} sweep runs break conservation"));
    }
    let detail = if problems.is_empty() {
        format!(
            "pair PDR 1.0 for all protocols; chain delay within {worst:.1e} s of {:.6} s; {} sweep runs conserved",
            2.0 * hop,
            sweep.routing.len()
        )
    } else {
        problems.join("; ")
    };
    outcome(problems.is_empty(), detail)
}

fn pdr(s: &[RoutingSummary], p: Protocol, model: &str, v: f64) -> f64 {
    s.iter()
        .find(|r| r.protocol == p && r.model == model && r.max_speed == v)
        .and_then(|r| r.pdr.mean)
        .unwrap_or(f64::NAN)
}

fn delay(s: &[RoutingSummary], p: Protocol, model: &str, v: f64) -> f64 {
    s.iter()
        .find(|r| r.protocol == p && r.model == model && r.max_speed == v)
        .and_then(|r| r.avg_delay.mean)
        .unwrap_or(f64::NAN)
}

fn criterion_6(s: &[RoutingSummary], speeds: &[f64]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in Protocol::ALL {
        let wins = speeds
            .iter()
            .filter(|&&v| pdr(s, p, "gvmm", v) >= pdr(s, p, "freeway", v))
            .count();
        pass &= wins >= 4;
        parts.push(format!("{p} {wins}/6"));
    }
    outcome(pass, parts.join(", "))
}

fn criterion_7(s: &[RoutingSummary], speeds: &[f64]) -> Outcome {
    let (slow, fast) = (
        pdr(s, Protocol::Dsr, "manhattan", 10.0),
        pdr(s, Protocol::Dsr, "manhattan", 60.0),
    );
    let mut pass = fast < slow;
    let mut parts = vec![format!(
        "DSR manhattan PDR {slow:.3} at 10 vs {fast:.3} at 60"
    )];
    for &v in speeds.iter().filter(|&&v| v >= 40.0) {
        let (a, d) = (
            delay(s, Protocol::Aodv, "manhattan", v),
            delay(s, Protocol::Dsr, "manhattan", v),
        );
        pass &= a < d;
        parts.push(format!("delay {v}: aodv {a:.3} dsr {d:.3}"));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_8(base: &ScenarioConfig, sweep: &SweepOutput) -> Outcome {
    let mut problems = Vec::new();
    for model in MobilityModel::ALL {
        let config = cell_config(base, model, 30.0, 7);
        let a = write_trace(&generate_trace(&config).unwrap(), &trace_meta(&config));
        let b = write_trace(&generate_trace(&config).unwrap(), &trace_meta(&config));
        if a != b {
            problems.push(format!("{model} trace bytes differ"));
        }
    }
    let spots = [
        (MobilityModel::Gvmm, 10.0, 1),
        (MobilityModel::Gvmm, 60.0, 5),
        (MobilityModel::Manhattan, 30.0, 2),
        (MobilityModel::Manhattan, 50.0, 4),
        (MobilityModel::Freeway, 20.0, 3),
        (MobilityModel::Freeway, 40.0, 1),
    ];
    for (model, speed, seed) in spots {
        let cell = cell_config(base, model, speed, seed);
        let (m, r) = run_cell(&cell, &base.sweep_protocols, true);
        let in_sweep = sweep.mobility.iter().find(|x| {
            x.model == model.name() && x.max_speed == Some(speed) && x.seed == Some(seed)
        });
        if in_sweep.map(|x| x.record()) != Some(m.record()) {
            problems.push(format!("{model} v{speed} s{seed} mobility row differs"));
        }
        for row in r {
            let found = sweep.routing.iter().find(|x| {
                x.protocol == row.protocol
                    && x.model == row.model
                    && x.max_speed == speed
                    && x.seed == seed
            });
            if found.map(|x| x.record()) != Some(row.record()) {
                problems.push(format!(
                    "{model} v{speed} s{seed} {} row differs",
                    row.protocol
                ));
            }
        }
    }
    let detail = if problems.is_empty() {
        "trace bytes identical for 3 models; 6 sweep cells reproduce exactly".to_string()
    } else {
        problems.join("; ")
    };
    outcome(problems.is_empty(), detail)
}

fn criterion_9(base: &ScenarioConfig) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut problems = Vec::new();
    for (model, seed) in [
        (MobilityModel::Gvmm, 11),
        (MobilityModel::Manhattan, 12),
        (MobilityModel::Freeway, 13),
    ] {
        let trace = generate_trace(&cell_config(base, model, 40.0, seed)).unwrap();
        let options = Ns2ParseOptions {
            sample_interval: Some(trace.sample_interval),
            duration: Some(trace.duration),
            area: Some(trace.area),
        };
        match parse_ns2(&export_ns2(&trace), options) {
            Ok(back) if back.samples.len() == trace.samples.len() => {
                for (a, b) in trace.samples.iter().zip(&back.samples) {
                    worst = worst.max(a.state.position.distance(b.state.position));
                }
            }
            Ok(back) => problems.push(format!("{model}: {} samples back", back.samples.len())),
            Err(e) => problems.push(format!("{model}: {e}")),
        }
    }
    let pass = problems.is_empty() && worst <= 1e-6;
    let detail = if problems.is_empty() {
        format!("3 traces, worst position error {worst:.2e} m")
    } else {
        problems.join("; ")
    };
    outcome(pass, detail)
}

fn main() {
    let base = ScenarioConfig::default();
    let speeds = base.sweep_speeds.clone();
    let started = Instant::now();
    let sweep = run_sweep(&base, true);
    let failed_cells = sweep.mobility.iter().filter(|r| r.error.is_some()).count()
        + sweep.routing.iter().filter(|r| r.error.is_some()).count();
    eprintln!(
        "sweep: {} mobility rows, {} routing rows, {failed_cells} failed, {:.0} s",
        sweep.mobility.len(),
        sweep.routing.len(),
        started.elapsed().as_secs_f64()
    );
    let slowest = sweep.cell_times.iter().max().copied().unwrap_or_default();
    let mobility = sweep.mobility_summary(&base);
    let routing = sweep.routing_summary(&base);

    let results = [
        (
            "1 link duration ordering",
            criterion_1(&mobility, &speeds, slowest),
        ),
        (
            "2 relative speed ordering",
            ordering(&mobility, &speeds, |r| r.relative_speed.mean, |g, x| g < x),
        ),
        (
            "3 spatial dependence ordering",
            ordering(
                &mobility,
                &speeds,
                |r| r.spatial_dependence.mean,
                |g, x| g > x,
            ),
        ),
        ("4 metric oracle equivalence", criterion_4()),
        ("5 routing sanity", criterion_5(&sweep)),
        ("6 gvmm delivery vs freeway", criterion_6(&routing, &speeds)),
        (
            "7 dsr degradation on manhattan",
            criterion_7(&routing, &speeds),
        ),
        ("8 determinism", criterion_8(&base, &sweep)),
        ("9 ns2 round trip", criterion_9(&base)),
    ];
    let mut all = true;
    for (name, o) in &results {
        println!(
            "{} criterion {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        all &= o.pass;
    }
    if !all {
        std::process::exit(1);
    }
}
