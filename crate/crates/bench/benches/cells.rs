use criterion::{black_box, criterion_group, criterion_main, Criterion};

use frosette::constellation::build;
use frosette::geocell::{build_alpha0_tables, CellSystem};
use frosette::sim::associate;
use frosette::{ConstellationConfig, GeoRouter, LatLon};

fn cells(c: &mut Criterion) {
    let cfg = ConstellationConfig::new(16, 8, 2, 1200.0, 53.0, 25.0).unwrap();
    let sys = CellSystem::new(&cfg).unwrap();
    let p = LatLon::from_degrees(40.7, -74.0);
    let cell = sys.locate(p);

    c.bench_function("locate k=2", |b| b.iter(|| sys.locate(black_box(p))));
    c.bench_function("cell_to_location k=2", |b| b.iter(|| sys.location(black_box(&cell)).unwrap()));
    c.bench_function("alpha0 tables k=2", |b| b.iter(|| build_alpha0_tables(black_box(&cfg)).unwrap()));

    let cfg1 = ConstellationConfig::new(16, 8, 1, 1200.0, 53.0, 25.0).unwrap();
    let topo = build(&cfg1).unwrap();
    let sys1 = CellSystem::new(&cfg1).unwrap();
    let router = GeoRouter::new(&topo, &sys1).unwrap();
    let src = associate(LatLon::from_degrees(39.9, 116.4), 1000.0, &topo);
    let dst = sys1.locate(p);
    c.bench_function("geo route 16x16", |b| {
        b.iter(|| router.route(black_box(&src), black_box(&dst), 1000.0).unwrap())
    });
}

criterion_group!(benches, cells);
criterion_main!(benches);
