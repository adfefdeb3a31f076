//! The acceptance suite: twelve end-to-end checks, each against an
//! independent oracle or a published reference value.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::addressing::{bit_widths, decode, encode, Address, GroundAddress};
use crate::constellation::{
    address_to_elements, build, ground_to_space_rtt, min_altitude_coverage, ConstellationConfig,
    SatAddress, Topology,
};
use crate::geocell::{build_alpha0_tables, cell_count, CellGrid, CellSystem};
use crate::geom::{self, great_circle_range, link_range_closed_form, sat_position_eci, subpoint, LatLon};
use crate::georouting::{measure_hop_motions, GeoRouter};
use crate::oracle::{adjacency, bfs, diameter, max_node_disjoint};
use crate::routing::{
    build_fib, disjoint_paths, fib_bound, fib_lookup, hop_bound, hop_label, identity_order,
    shortest_path, FibAction,
};
use crate::sim::{self, Endpoint, Scenario};

type Outcome = std::result::Result<String, String>;

fn cfg(n: u32, m: u32, k: u32, h: f64) -> ConstellationConfig {
    ConstellationConfig::new(n, m, k, h, 53.0, 25.0).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_addr(rng: &mut ChaCha8Rng, c: &ConstellationConfig) -> SatAddress {
    SatAddress::new((0..c.layers()).map(|_| rng.gen_range(0..c.n)).collect())
}

fn c1_altitude_table() -> Outcome {
    let rows = [
        (8, 0, 11848.46, 78.99),
        (8, 1, 1259.58, 8.40),
        (8, 2, 335.33, 2.23),
        (16, 0, 4268.73, 28.46),
        (16, 1, 504.83, 3.36),
        (16, 2, 107.62, 0.72),
    ];
    let mut worst: f64 = 0.0;
    for (n, k, h_ref, rtt_ref) in rows {
        let c = cfg(n, n / 2, k, 1000.0);
        let h = min_altitude_coverage(&c).map_err(|e| e.to_string())?;
        let rtt = ground_to_space_rtt(h, &c.consts) * 1e3;
        let dh = (h - h_ref).abs() / h_ref;
        let dr = (rtt - rtt_ref).abs() / rtt_ref;
        worst = worst.max(dh).max(dr);
        ensure(dh < 0.005 && dr < 0.005, || {
            format!("N={n} k={k}: H={h:.2} (want {h_ref}), RTT={rtt:.3} ms (want {rtt_ref})")
        })?;
    }
    Ok(format!("6 rows, worst relative deviation {:.3}%", worst * 100.0))
}

fn c2_structure() -> Outcome {
    for (n, k) in [(4, 0), (4, 1), (8, 0), (8, 1), (8, 2), (16, 1)] {
        let c = cfg(n, n / 2, k, 1500.0);
        let t = build(&c).map_err(|e| e.to_string())?;
        let nodes = (n as usize).pow(k + 1);
        ensure(t.node_count() == nodes, || format!("N={n} k={k}: {} nodes", t.node_count()))?;
        ensure(t.edges().len() == (k as usize + 1) * nodes, || {
            format!("N={n} k={k}: {} edges", t.edges().len())
        })?;
        let mut set = HashSet::new();
        for e in t.edges() {
            ensure(set.insert((e.from.min(e.to), e.from.max(e.to))), || {
                format!("N={n} k={k}: duplicate edge {e:?}")
            })?;
        }
        let adj = adjacency(&t);
        let want = 2 * (k as usize + 1);
        ensure(adj.iter().all(|a| a.len() == want), || {
            format!("N={n} k={k}: degree not uniformly {want}")
        })?;
    }
    Ok("6 configurations exact".into())
}

fn topo(n: u32, k: u32) -> Topology {
    build(&cfg(n, n / 2, k, 1500.0)).unwrap()
}

fn c3_hop_optimality() -> Outcome {
    let mut pairs = 0usize;
    for (n, k) in [(8, 1), (16, 1)] {
        let t = topo(n, k);
        let adj = adjacency(&t);
        let order = identity_order(&t.config);
        for s in 0..t.node_count() {
            let dist = bfs(&adj, s);
            for (d, &want) in dist.iter().enumerate() {
                let p = shortest_path(t.node(s), t.node(d), &order, &t).map_err(|e| e.to_string())?;
                ensure(p.hops() as u32 == want, || {
                    format!("N={n}: {} -> {} took {} hops, BFS says {want}", t.node(s), t.node(d), p.hops())
                })?;
                ensure(p.hop_labels(n).is_some(), || format!("N={n}: path leaves the edge set"))?;
                pairs += 1;
            }
        }
    }
    Ok(format!("{pairs} pairs match BFS"))
}

fn c4_hop_bound() -> Outcome {
    let mut out = Vec::new();
    for (n, k) in [(8, 1), (16, 1)] {
        let t = topo(n, k);
        let d = diameter(&adjacency(&t));
        let b = hop_bound(&t.config);
        ensure(d == b, || format!("N={n} k={k}: diameter {d}, bound {b}"))?;
        out.push(format!("N={n}: {d}"));
    }
    Ok(format!("diameter equals bound ({})", out.join(", ")))
}

fn c5_fib() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut largest = 0;
    for (n, k) in [(8, 1), (16, 1), (4, 2)] {
        let t = topo(n, k);
        let c = t.config;
        let fibs: Vec<_> = t.nodes().iter().map(|a| build_fib(a, &c).unwrap()).collect();
        let bound = fib_bound(&c);
        for f in &fibs {
            largest = largest.max(f.entries.len());
            ensure(f.entries.len() <= bound, || {
                format!("N={n} k={k}: {} has {} entries > {bound}", f.owner, f.entries.len())
            })?;
        }
        let adj = adjacency(&t);
        for _ in 0..1000 {
            let s = rng.gen_range(0..t.node_count());
            let d = rng.gen_range(0..t.node_count());
            let dst = t.node(d);
            let mut cur = s;
            let mut hops = 0u32;
            loop {
                match fib_lookup(&fibs[cur], dst) {
                    FibAction::Deliver => break,
                    FibAction::Forward { layer, dir } => {
                        cur = t.step_index(cur, layer as usize, dir);
                        hops += 1;
                    }
                }
                ensure(hops <= hop_bound(&c), || format!("FIB walk {s}->{d} does not terminate"))?;
            }
            let want = bfs(&adj, s)[d];
            ensure(cur == d && hops == want, || {
                format!("N={n} k={k}: FIB walk {s}->{d} took {hops}, shortest is {want}")
            })?;
        }
    }
    Ok(format!("3000 walks optimal, largest FIB {largest} entries"))
}

fn c6_multipath() -> Outcome {
    let t = topo(8, 1);
    let adj = adjacency(&t);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut done = 0;
    while done < 200 {
        let s = random_addr(&mut rng, &t.config);
        let d = random_addr(&mut rng, &t.config);
        if s.digits.iter().zip(&d.digits).any(|(a, b)| a == b) {
            continue;
        }
        let dp = disjoint_paths(&s, &d, &t).map_err(|e| e.to_string())?;
        ensure(dp.paths.len() == 4, || format!("{s} -> {d}: {} paths", dp.paths.len()))?;
        let mut used = HashSet::new();
        for p in &dp.paths {
            ensure(p.source() == &s && p.destination() == &d, || format!("{s} -> {d}: bad endpoints"))?;
            ensure(p.is_simple(), || format!("{s} -> {d}: path revisits a node"))?;
            for w in p.nodes.windows(2) {
                ensure(hop_label(&w[0], &w[1], 8).is_some(), || format!("{s} -> {d}: {} -> {} is no link", w[0], w[1]))?;
            }
            for a in &p.nodes[1..p.nodes.len() - 1] {
                ensure(used.insert(a.clone()), || format!("{s} -> {d}: {a} shared"))?;
            }
        }
        let flow = max_node_disjoint(&adj, t.index_of(&s), t.index_of(&d));
        ensure(flow == 4, || format!("{s} -> {d}: max-flow {flow}"))?;
        done += 1;
    }
    Ok("200 pairs, 4 disjoint paths each, max-flow 4".into())
}

fn c7_cells() -> Outcome {
    let mut notes = Vec::new();
    for (n, m, k) in [(16, 8, 1), (8, 6, 2)] {
        let c = cfg(n, m, k, 1500.0);
        let g = CellGrid::new(&c).map_err(|e| e.to_string())?;
        let all = g.enumerate(k);
        let want = ((n - m) as u64).pow(2) * (n as u64).pow(2 * k);
        ensure(all.len() as u64 == want && cell_count(&c) == want, || {
            format!("N={n} m={m} k={k}: {} IDs, want {want}", all.len())
        })?;
        let distinct: HashSet<_> = all.iter().collect();
        ensure(distinct.len() == all.len(), || "duplicate cell IDs".into())?;

        let band = c.inclination_rad.to_degrees().floor() as i32;
        let mut points = 0;
        for lat in -band..=band {
            for lon in -180..180 {
                let p = LatLon::from_degrees(lat as f64, lon as f64);
                let leaf = g.locate(p, k);
                for level in 0..=k {
                    let cell = g.locate(p, level);
                    ensure(cell == leaf.truncate(level), || {
                        format!("({lat},{lon}) level {level}: {cell} is not a prefix of {leaf}")
                    })?;
                    ensure(g.contains(&cell, p) && !g.is_phantom(&cell), || {
                        format!("({lat},{lon}) level {level}: {cell} does not contain its point")
                    })?;
                    let (i, j) = g.to_ij(&cell);
                    let s = g.span(level);
                    for (di, dj) in [(1, 0), (s - 1, 0), (0, 1), (0, s - 1), (1, 1), (s - 1, s - 1), (1, s - 1), (s - 1, 1)] {
                        let other = g.from_ij(level, (i + di) % s, (j + dj) % s);
                        ensure(!g.contains(&other, p), || {
                            format!("({lat},{lon}) level {level}: claimed by {cell} and {other}")
                        })?;
                    }
                }
                points += 1;
            }
        }
        notes.push(format!("N={n} m={m} k={k}: {want} cells, {points} points"));
    }
    Ok(format!("{}; no double claims", notes.join("; ")))
}

fn c8_georouting() -> Outcome {
    // Above the closed-form coverage altitude (504.8 km); see README.
    let c = cfg(16, 8, 1, 1200.0);
    let t = build(&c).map_err(|e| e.to_string())?;
    let cells = CellSystem::new(&c).map_err(|e| e.to_string())?;
    let router = GeoRouter::new(&t, &cells).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let band = c.inclination_rad.sin();
    let sample = |rng: &mut ChaCha8Rng| {
        let z: f64 = rng.gen_range(-band..band);
        LatLon::new(z.asin(), rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
    };
    let (mut fallbacks, mut max_hops) = (0, 0);
    let greedy_bound = hop_bound(&c) as usize;
    let fallback_bound = c.layers() * c.n as usize;
    for trial in 0..10_000 {
        let (a, b) = (sample(&mut rng), sample(&mut rng));
        let time = rng.gen_range(0.0..c.consts.sidereal_day_s);
        let src = sim::associate(a, time, &t);
        let dst = cells.locate(b);
        let r = router.route(&src, &dst, time).map_err(|e| e.to_string())?;
        ensure(r.delivered, || format!("trial {trial}: {src} -> cell {dst} at t={time:.1} not delivered"))?;
        ensure(r.path.is_simple(), || format!("trial {trial}: loop in {:?}", r.path))?;
        ensure(r.path.hop_labels(c.n).is_some(), || format!("trial {trial}: path leaves the edge set"))?;
        ensure(r.greedy_hops <= greedy_bound && r.fallback_hops <= fallback_bound, || {
            format!("trial {trial}: {} greedy + {} fallback hops", r.greedy_hops, r.fallback_hops)
        })?;
        ensure(r.path.hops() <= r.greedy_hops + r.fallback_hops, || format!("trial {trial}: hop accounting"))?;
        fallbacks += (r.fallback_hops > 0) as usize;
        max_hops = max_hops.max(r.path.hops());
    }
    Ok(format!("10000 delivered, {fallbacks} used fallback, max {max_hops} hops"))
}

fn c9_stretch() -> Outcome {
    let c = cfg(16, 2, 1, 878.76);
    let sc = Scenario {
        cfg: c,
        start_s: 0.0,
        end_s: c.period_s(),
        step_s: 10.0,
        endpoints: vec![
            Endpoint { name: "Beijing".into(), location: LatLon::from_degrees(39.9, 116.4) },
            Endpoint { name: "New York".into(), location: LatLon::from_degrees(40.7, -74.0) },
        ],
        experiments: vec![(0, 1)],
        seed: 0,
    };
    let (recs, summary) = sim::run(&sc).map_err(|e| e.to_string())?;
    let x = &summary.experiments[0];
    let floor = recs.iter().all(|r| r.stretch >= 1.0 - 1e-12);
    let line = format!(
        "{} records, median {:.4}, p95 {:.4}, max {:.4}, {} handoffs",
        recs.len(),
        x.median_stretch,
        x.p95_stretch,
        x.max_stretch,
        x.handoffs
    );
    if x.median_stretch <= 1.02 && x.p95_stretch <= 1.05 && floor {
        Ok(line)
    } else {
        let mut s: Vec<f64> = recs.iter().map(|r| r.stretch).collect();
        s.sort_by(f64::total_cmp);
        let deciles: Vec<String> = (0..=10).map(|d| format!("{:.4}", sim::percentile(&s, d as f64 * 10.0))).collect();
        Err(format!("{line}; deciles [{}]", deciles.join(", ")))
    }
}

fn c10_link_delay() -> Outcome {
    let mut checked = (0, 0);
    for (n, m, k) in [(8, 6, 1), (16, 8, 1)] {
        let c = cfg(n, m, k, 1500.0);
        let t = build(&c).map_err(|e| e.to_string())?;
        let period = c.period_s();
        let step = period / 256.0;
        for e in t.edges() {
            if e.layer > 0 {
                if t.node(e.from).digits[e.layer as usize] == n - 1 {
                    continue;
                }
                let tr = sim::link_delay_trace(&t, e, 0.0, period, step).map_err(|e| e.to_string())?;
                let d0 = tr[0].1;
                ensure(tr.iter().all(|&(_, d)| ((d - d0) / d0).abs() <= 1e-12), || {
                    format!("N={n}: intra-orbit edge {e:?} varies")
                })?;
                checked.0 += 1;
            } else {
                for i in 0..64 {
                    let s = i as f64 * period / 64.0;
                    let a = t.edge_range(e, s);
                    let b = t.edge_range(e, s + period / 2.0);
                    ensure((a - b).abs() <= 1e-9, || format!("N={n}: edge {e:?} at t={s}: {a} vs {b}"))?;
                }
                checked.1 += 1;
            }
        }
    }
    Ok(format!("{} intra-orbit edges constant, {} inter-orbit edges T/2-periodic", checked.0, checked.1))
}

fn c11_memory() -> Outcome {
    let c = cfg(16, 8, 3, 1500.0);
    let tables = build_alpha0_tables(&c).map_err(|e| e.to_string())?;
    let mut sink = Vec::new();
    let bytes = tables.write_binary(&mut sink).map_err(|e| e.to_string())?;
    ensure(bytes == sink.len(), || "byte count mismatch".into())?;
    let per_level: Vec<String> = tables.levels.iter().map(|l| (l.len() * 8).to_string()).collect();
    let line = format!("{bytes} bytes serialized (levels {} bytes)", per_level.join(" / "));
    ensure(bytes < 2_000_000, || line.clone())?;
    Ok(line)
}

fn c12_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);

    let mut worst: f64 = 0.0;
    for (n, m) in [(8, 6), (16, 8), (16, 2), (12, 5), (9, 4)] {
        let c = cfg(n, m, 0, 1500.0);
        for _ in 0..200 {
            let i = rng.gen_range(0..n);
            let j = (i + rng.gen_range(1..n)) % n;
            let time = rng.gen_range(0.0..c.period_s());
            let closed = link_range_closed_form(i, j, time, &c).map_err(|e| e.to_string())?;
            let pa = sat_position_eci(&address_to_elements(&SatAddress::new(vec![i]), &c), time);
            let pb = sat_position_eci(&address_to_elements(&SatAddress::new(vec![j]), &c), time);
            worst = worst.max((closed - great_circle_range(pa, pb)).abs());
        }
    }
    ensure(worst < 1e-9, || format!("closed-form range deviates by {worst:e} rad"))?;

    for (n, m, k) in [(8, 6, 1), (16, 8, 1), (16, 2, 2), (5, 3, 3)] {
        measure_hop_motions(&cfg(n, m, k, 1500.0)).map_err(|e| format!("hop motions N={n}: {e}"))?;
    }

    let mut track: f64 = 0.0;
    for (n, m) in [(8, 6), (16, 8), (16, 2)] {
        let c = cfg(n, m, 1, 1500.0);
        for _ in 0..100 {
            let el = address_to_elements(&random_addr(&mut rng, &c), &c);
            let time = rng.gen_range(0.0..c.consts.sidereal_day_s);
            let a = subpoint(&el, time, &c.consts);
            let b = subpoint(&el, time + c.consts.sidereal_day_s, &c.consts);
            track = track.max(geom::great_circle_range_latlon(a, b));
        }
    }
    ensure(track < 1e-9, || format!("ground track drifts {track:e} rad per day"))?;

    let mut round_trips = 0;
    for (n, m, k) in [(16, 8, 1), (8, 6, 2), (16, 8, 3)] {
        let c = cfg(n, m, k, 1500.0);
        let layout = bit_widths(&c).map_err(|e| e.to_string())?;
        let g = CellGrid::new(&c).map_err(|e| e.to_string())?;
        let mut seen = HashSet::new();
        for _ in 0..500 {
            let sat = Address::Satellite { prefix: rng.gen(), sat: random_addr(&mut rng, &c), suffix: 0 };
            let p = LatLon::from_degrees(rng.gen_range(-50.0..50.0), rng.gen_range(-180.0..180.0));
            let ground = Address::Ground(GroundAddress { prefix: rng.gen(), cell: g.locate(p, k), suffix: 0 });
            for a in [sat, ground] {
                let bits = encode(&a, &layout, &c).map_err(|e| e.to_string())?;
                let back = decode(bits, &layout, &c).map_err(|e| e.to_string())?;
                ensure(back == a, || format!("{a:?} decoded as {back:?}"))?;
                seen.insert((bits, format!("{a:?}")));
                round_trips += 1;
            }
        }
        let by_bits: HashSet<u128> = seen.iter().map(|(b, _)| *b).collect();
        ensure(by_bits.len() == seen.len(), || "two addresses share an encoding".into())?;
    }
    Ok(format!(
        "closed form within {worst:.1e} rad, hop motions constant, track repeat {track:.1e} rad, {round_trips} encodings round-trip"
    ))
}

pub struct Check {
    pub name: &'static str,
    pub budget: Duration,
    run: fn() -> Outcome,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_s: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2}. {} ({:.2}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed_s,
            self.detail
        )
    }
}

pub fn checks() -> Vec<Check> {
    let c = |name, secs, run| Check { name, budget: Duration::from_secs(secs), run };
    vec![
        c("altitude table", 1, c1_altitude_table as fn() -> Outcome),
        c("structure counts", 5, c2_structure),
        c("hop optimality", 60, c3_hop_optimality),
        c("hop bound", 60, c4_hop_bound),
        c("fib bound", 60, c5_fib),
        c("multipath", 30, c6_multipath),
        c("cell system", 60, c7_cells),
        c("geo-routing delivery", 120, c8_georouting),
        c("routing stretch", 300, c9_stretch),
        c("link-delay character", 30, c10_link_delay),
        c("memory budget", 60, c11_memory),
        c("property suites", 60, c12_properties),
    ]
}

/// Runs check `id` (1-based); exceeding the time budget counts as a failure.
pub fn run_check(id: usize, check: &Check) -> CheckResult {
    let start = Instant::now();
    let res = (check.run)();
    let took = start.elapsed();
    let res = match res {
        Ok(msg) if took > check.budget => Err(format!("{msg}; took {took:.2?}, budget {:?}", check.budget)),
        other => other,
    };
    let (passed, detail) = match res {
        Ok(m) => (true, m),
        Err(m) => (false, m),
    };
    CheckResult { id, name: check.name, passed, detail, elapsed_s: took.as_secs_f64() }
}

/// Runs every check in order, calling `report` after each.
pub fn run_all(mut report: impl FnMut(&CheckResult)) -> Vec<CheckResult> {
    checks()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let r = run_check(i + 1, c);
            report(&r);
            r
        })
        .collect()
}
