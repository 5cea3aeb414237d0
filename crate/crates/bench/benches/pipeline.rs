use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use manet_core::geometry::{MobilityTrace, SimulationArea};
use manet_core::metrics::{compute_metrics, MetricsConfig};
use manet_core::mobility::{
    generate_freeway, generate_gvmm, generate_gvmm_in_traffic, generate_manhattan, GvmmParams,
    VehicularParams,
};
use manet_core::roadmap::{build_freeway_map, build_manhattan_map};
use manet_core::sim::{run_simulation, select_flows, Protocol, RadioModel, SimParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn area() -> SimulationArea {
    SimulationArea::new(1000.0, 1000.0).unwrap()
}

fn gvmm(speed: f64, seed: u64) -> MobilityTrace {
    let params = GvmmParams {
        max_speed: speed,
        ..GvmmParams::default()
    };
    let traffic = VehicularParams::default();
    let map = build_manhattan_map(5, 5, area()).unwrap();
    generate_gvmm_in_traffic(
        &params,
        &traffic,
        &map,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
    .unwrap()
}

fn generation(c: &mut Criterion) {
    let grid = build_manhattan_map(5, 5, area()).unwrap();
    let freeway = build_freeway_map(3, 2, area()).unwrap();
    let vehicles = VehicularParams {
        max_speed: 30.0,
        ..VehicularParams::default()
    };
    let mut g = c.benchmark_group("generate_900s_50_nodes");
    g.sample_size(20);
    g.bench_function("gvmm_internal_leaders", |b| {
        let params = GvmmParams {
            max_speed: 30.0,
            ..GvmmParams::default()
        };
        b.iter(|| generate_gvmm(&params, &grid, &mut ChaCha8Rng::seed_from_u64(1)).unwrap())
    });
    g.bench_function("gvmm_traffic_leaders", |b| b.iter(|| gvmm(30.0, 1)));
    g.bench_function("manhattan", |b| {
        b.iter(|| generate_manhattan(&vehicles, &grid, &mut ChaCha8Rng::seed_from_u64(1)).unwrap())
    });
    g.bench_function("freeway", |b| {
        b.iter(|| generate_freeway(&vehicles, &freeway, &mut ChaCha8Rng::seed_from_u64(1)).unwrap())
    });
    g.finish();
}

fn metrics(c: &mut Criterion) {
    let trace = gvmm(30.0, 2);
    let config = MetricsConfig {
        distance_filter: Some(250.0),
        ..MetricsConfig::default()
    };
    let mut g = c.benchmark_group("metrics_900s_50_nodes");
    g.sample_size(10);
    g.bench_function("compute_metrics", |b| {
        b.iter(|| compute_metrics(&trace, config))
    });
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let trace = gvmm(30.0, 3);
    let flows = select_flows(
        50,
        8,
        4000.0,
        4096,
        10.0,
        1.0,
        trace.duration,
        &mut ChaCha8Rng::seed_from_u64(3),
    )
    .unwrap();
    let mut g = c.benchmark_group("simulate_900s_8_flows");
    g.sample_size(10);
    for protocol in Protocol::ALL {
        g.bench_function(protocol.to_string(), |b| {
            b.iter_batched(
                SimParams::default,
                |params| {
                    run_simulation(&trace, &flows, protocol, RadioModel::default(), params, 3)
                        .unwrap()
                },
                BatchSize::SmallInput,
            )
        });
    }
    g.finish();
}

criterion_group!(benches, generation, metrics, simulation);
criterion_main!(benches);
