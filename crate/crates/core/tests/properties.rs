use proptest::prelude::*;
use std::collections::HashSet;

use frosette::addressing::{bit_widths, decode, encode, Address, GroundAddress};
use frosette::constellation::{address_to_elements, build};
use frosette::geocell::CellGrid;
use frosette::geom::{self, min_satellites, required_range, subpoint, PhysicalConstants};
use frosette::planner::{select_size, SizeRequest};
use frosette::routing::{build_fib, disjoint_paths, fib_lookup, hop_distance, hop_label, shortest_path};
use frosette::{ConstellationConfig, FibAction, LatLon, SatAddress};

fn config() -> impl Strategy<Value = ConstellationConfig> {
    (3u32..=9, 0u32..=2).prop_flat_map(|(n, k)| {
        (1..n).prop_map(move |m| ConstellationConfig::new(n, m, k, 1500.0, 53.0, 25.0).unwrap())
    })
}

fn config_and_pair() -> impl Strategy<Value = (ConstellationConfig, SatAddress, SatAddress)> {
    config().prop_flat_map(|c| {
        let digits = prop::collection::vec(0..c.n, c.layers());
        (Just(c), digits.clone(), digits).prop_map(|(c, a, b)| (c, SatAddress::new(a), SatAddress::new(b)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn route_length_ignores_layer_order((c, s, d) in config_and_pair(), seed in any::<u64>()) {
        let t = build(&c).unwrap();
        let mut order: Vec<usize> = (0..c.layers()).collect();
        let len = order.len();
        for i in (1..len).rev() {
            order.swap(i, (seed as usize >> (i % 16)) % (i + 1));
        }
        let a = shortest_path(&s, &d, &(0..len).collect::<Vec<_>>(), &t).unwrap();
        let b = shortest_path(&s, &d, &order, &t).unwrap();
        prop_assert_eq!(a.hops(), b.hops());
        prop_assert_eq!(a.hops() as u32, hop_distance(&s, &d, c.n));
        prop_assert!(b.is_simple());
    }

    #[test]
    fn hop_distance_is_a_metric((c, a, b) in config_and_pair(), digits in prop::collection::vec(0u32..9, 3)) {
        let mid = SatAddress::new(digits.iter().take(c.layers()).map(|d| d % c.n).collect());
        prop_assert_eq!(hop_distance(&a, &b, c.n), hop_distance(&b, &a, c.n));
        prop_assert!(hop_distance(&a, &b, c.n) <= hop_distance(&a, &mid, c.n) + hop_distance(&mid, &b, c.n));
        prop_assert_eq!(hop_distance(&a, &a, c.n), 0);
    }

    #[test]
    fn fib_walk_is_shortest((c, s, d) in config_and_pair()) {
        let t = build(&c).unwrap();
        let mut cur = t.index_of(&s);
        let mut hops = 0;
        while let FibAction::Forward { layer, dir } = fib_lookup(&build_fib(t.node(cur), &c).unwrap(), &d) {
            cur = t.step_index(cur, layer as usize, dir);
            hops += 1;
            prop_assert!(hops <= hop_distance(&s, &d, c.n));
        }
        prop_assert_eq!(t.node(cur), &d);
        prop_assert_eq!(hops, hop_distance(&s, &d, c.n));
    }

    #[test]
    fn disjoint_paths_are_disjoint((c, s, d) in config_and_pair()) {
        prop_assume!(s != d);
        let t = build(&c).unwrap();
        let dp = disjoint_paths(&s, &d, &t).unwrap();
        prop_assert_eq!(dp.paths.len(), 2 * c.layers());
        let mut inner = HashSet::new();
        for p in &dp.paths {
            prop_assert_eq!(p.source(), &s);
            prop_assert_eq!(p.destination(), &d);
            prop_assert!(p.is_simple());
            for w in p.nodes.windows(2) {
                prop_assert!(hop_label(&w[0], &w[1], c.n).is_some());
            }
            for a in &p.nodes[1..p.nodes.len() - 1] {
                prop_assert!(inner.insert(a.clone()), "{} reused", a);
            }
        }
    }

    #[test]
    fn subpoint_repeats_daily((c, s, _) in config_and_pair(), t in 0.0f64..2e5) {
        let el = address_to_elements(&s, &c);
        let a = subpoint(&el, t, &c.consts);
        let b = subpoint(&el, t + c.consts.sidereal_day_s, &c.consts);
        prop_assert!(geom::great_circle_range_latlon(a, b) < 1e-9);
    }

    #[test]
    fn satellite_encoding_round_trips((c, s, _) in config_and_pair(), prefix in any::<u64>(), suffix in any::<u64>()) {
        let layout = bit_widths(&c).unwrap();
        let suffix = if layout.suffix_bits >= 64 { suffix } else { suffix & ((1u64 << layout.suffix_bits) - 1) };
        let a = Address::Satellite { prefix, sat: s, suffix };
        let bits = encode(&a, &layout, &c).unwrap();
        prop_assert_eq!(decode(bits, &layout, &c).unwrap(), a);
    }

    #[test]
    fn ground_encoding_round_trips(lat in -52.0f64..52.0, lon in -180.0f64..180.0, k in 0u32..=3, prefix in any::<u64>()) {
        let c = ConstellationConfig::new(16, 8, k, 1500.0, 53.0, 25.0).unwrap();
        let g = CellGrid::new(&c).unwrap();
        let layout = bit_widths(&c).unwrap();
        let a = Address::Ground(GroundAddress { prefix, cell: g.locate(LatLon::from_degrees(lat, lon), k), suffix: 0 });
        let bits = encode(&a, &layout, &c).unwrap();
        prop_assert_eq!(decode(bits, &layout, &c).unwrap(), a);
    }

    #[test]
    fn locate_nests_across_levels(lat in -60.0f64..60.0, lon in -180.0f64..180.0) {
        let c = ConstellationConfig::new(8, 6, 2, 1500.0, 53.0, 25.0).unwrap();
        let g = CellGrid::new(&c).unwrap();
        let p = LatLon::from_degrees(lat, lon);
        let leaf = g.locate(p, 2);
        prop_assert!(!g.is_phantom(&leaf));
        for level in 0..2 {
            prop_assert_eq!(g.locate(p, level), leaf.truncate(level));
        }
    }

    #[test]
    fn min_satellites_is_tight(r in 0.05f64..1.5) {
        let n = min_satellites(r).unwrap();
        prop_assert!(required_range(n).unwrap() <= r + 1e-9);
        if n > 3 {
            prop_assert!(required_range(n - 1).unwrap() > r - 1e-9);
        }
    }

    #[test]
    fn planner_is_monotone_and_sufficient(ms in 0.5f64..80.0, shrink in 0.3f64..1.0, n in 3u32..=16) {
        let consts = PhysicalConstants::default();
        let req = |ms: f64| SizeRequest { rtt_target_s: ms / 1e3, min_elevation_rad: 25f64.to_radians(), base_n: n };
        let big = select_size(&req(ms), &consts).unwrap();
        let small = select_size(&req(ms * shrink), &consts).unwrap();
        prop_assert!(small.total >= big.total);
        let r_need = required_range(big.total).unwrap();
        prop_assert!(r_need <= big.coverage_range_rad + 1e-9);
    }
}
