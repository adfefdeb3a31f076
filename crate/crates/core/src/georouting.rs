//! Geographic routing toward ground cells.
//!
//! A satellite's serving coordinate (α, γ) drifts as α(0) - ω_E·t and
//! γ(0) + 2π·t/T, so the offset between two linked satellites never changes.
//! Routing turns the destination cell into a target satellite address using
//! those offsets and then walks the rings, stopping as soon as the current
//! satellite covers the cell.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::TAU;

use crate::constellation::{address_to_elements, ConstellationConfig, Direction, SatAddress, Topology};
use crate::error::{Error, Result};
use crate::geocell::{CellId, CellSystem, GeoCoord};
use crate::geom::{self, great_circle_range, subpoint_ecef, LatLon, UnitVec3};
use crate::routing::{shortest_path, Path};

pub fn serving_coord(addr: &SatAddress, t: f64, cfg: &ConstellationConfig) -> GeoCoord {
    let el = address_to_elements(addr, cfg);
    GeoCoord::new(
        el.raan_rad - cfg.consts.earth_rate() * t,
        el.phase0_rad + TAU * t / cfg.period_s(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HopMotion {
    pub layer: u32,
    /// Both in [0, 2π); a -1 hop negates them.
    pub delta_alpha: f64,
    pub delta_gamma: f64,
}

const MOTION_CHECKS: usize = 16;
const MOTION_TOL: f64 = 1e-9;
const MOTION_SEED: u64 = 0x5eed_0001;

fn coord_delta(a: GeoCoord, b: GeoCoord) -> (f64, f64) {
    (
        geom::wrap_two_pi(b.alpha_rad - a.alpha_rad),
        geom::wrap_two_pi(b.gamma_rad - a.gamma_rad),
    )
}

fn angle_gap(a: f64, b: f64) -> f64 {
    geom::wrap_pi(a - b).abs()
}

/// Per-layer offset between a satellite and its +1 neighbour.
///
/// Measured on the edge out of 0.0...0 at epoch, then re-checked on that
/// edge at 16 seeded random times within one day.
pub fn measure_hop_motions(cfg: &ConstellationConfig) -> Result<Vec<HopMotion>> {
    let origin = SatAddress::zero(cfg.layers());
    let mut rng = ChaCha8Rng::seed_from_u64(MOTION_SEED);
    let times: Vec<f64> = (0..MOTION_CHECKS)
        .map(|_| rng.gen_range(0.0..cfg.consts.sidereal_day_s))
        .collect();
    let mut out = Vec::with_capacity(cfg.layers());
    for layer in 0..cfg.layers() {
        let next = origin.step(layer, Direction::Plus, cfg.n);
        let (da, dg) = coord_delta(serving_coord(&origin, 0.0, cfg), serving_coord(&next, 0.0, cfg));
        for &t in &times {
            let (a, g) = coord_delta(serving_coord(&origin, t, cfg), serving_coord(&next, t, cfg));
            if angle_gap(a, da) > MOTION_TOL || angle_gap(g, dg) > MOTION_TOL {
                return Err(Error::Inconsistent(format!(
                    "layer {layer} offset drifted at t={t}: ({a}, {g}) vs ({da}, {dg})"
                )));
            }
        }
        out.push(HopMotion {
            layer: layer as u32,
            delta_alpha: da,
            delta_gamma: dg,
        });
    }
    Ok(out)
}

/// Offsets quoted for the construction: layer 0 (2π/N, 2πm/N), layer j (0, 2πm/N^k).
pub fn quoted_hop_motions(cfg: &ConstellationConfig) -> Vec<HopMotion> {
    let n = cfg.n as f64;
    (0..cfg.layers())
        .map(|layer| {
            if layer == 0 {
                HopMotion {
                    layer: 0,
                    delta_alpha: TAU / n,
                    delta_gamma: geom::wrap_two_pi(TAU * cfg.m as f64 / n),
                }
            } else {
                HopMotion {
                    layer: layer as u32,
                    delta_alpha: 0.0,
                    delta_gamma: geom::wrap_two_pi(TAU * cfg.m as f64 / n.powi(cfg.k as i32)),
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeoRouteResult {
    pub path: Path,
    pub terminal: SatAddress,
    pub delivered: bool,
    /// Hops spent on the greedy phases.
    pub greedy_hops: usize,
    /// Hops spent after the greedy phases, before loop erasure.
    pub fallback_hops: usize,
}

/// Router state shared across queries for one constellation.
pub struct GeoRouter<'a> {
    topo: &'a Topology,
    cells: &'a CellSystem,
    motions: Vec<HopMotion>,
    radius: f64,
}

impl<'a> GeoRouter<'a> {
    pub fn new(topo: &'a Topology, cells: &'a CellSystem) -> Result<Self> {
        let cfg = &topo.config;
        Ok(GeoRouter {
            topo,
            cells,
            motions: measure_hop_motions(cfg)?,
            radius: geom::coverage_range(cfg.altitude_km, cfg.min_elevation_rad, &cfg.consts)?,
        })
    }

    pub fn coverage_radius(&self) -> f64 {
        self.radius
    }

    pub fn motions(&self) -> &[HopMotion] {
        &self.motions
    }

    fn subpoint(&self, idx: usize, t: f64) -> UnitVec3 {
        subpoint_ecef(self.topo.elements(idx), t, &self.topo.config.consts)
    }

    fn range_to(&self, idx: usize, target: UnitVec3, t: f64) -> f64 {
        great_circle_range(self.subpoint(idx, t), target)
    }

    fn covers(&self, idx: usize, target: UnitVec3, t: f64) -> bool {
        self.range_to(idx, target, t) <= self.radius
    }

    /// Nearest satellite to a coordinate in each of the two nearest planes.
    fn candidates(&self, target: GeoCoord, t: f64) -> Vec<SatAddress> {
        let cfg = &self.topo.config;
        let n = cfg.n as i64;
        let layers = cfg.layers();
        let origin = SatAddress::zero(layers);
        let o = serving_coord(&origin, t, cfg);
        let step_alpha = self.motions[0].delta_alpha;
        let q = geom::wrap_two_pi(target.alpha_rad - o.alpha_rad) / step_alpha;
        let in_plane = TAU / (cfg.n as f64).powi(cfg.k as i32);
        let slots = (cfg.n as u64).pow(cfg.k);
        let mut out = Vec::with_capacity(2);
        for plane in [q.floor() as i64, q.ceil() as i64] {
            let s0 = plane.rem_euclid(n) as u32;
            let mut base = origin.clone();
            base.digits[0] = s0;
            let b = serving_coord(&base, t, cfg);
            let offset = geom::wrap_two_pi(target.gamma_rad - b.gamma_rad);
            let mut slot = ((offset / in_plane).round() as u64) % slots.max(1);
            let mut digits = vec![0u32; layers];
            digits[0] = s0;
            for d in digits[1..].iter_mut().rev() {
                *d = (slot % cfg.n as u64) as u32;
                slot /= cfg.n as u64;
            }
            out.push(SatAddress::new(digits));
        }
        out
    }

    pub fn route(&self, src: &SatAddress, dst: &CellId, t: f64) -> Result<GeoRouteResult> {
        let center = self.cells.center(dst)?;
        self.route_to_point(src, center, t)
    }

    /// Greedy walk toward the satellite over `target`, then fallback.
    pub fn route_to_point(&self, src: &SatAddress, target: LatLon, t: f64) -> Result<GeoRouteResult> {
        let cfg = &self.topo.config;
        src.validate(cfg)?;
        let tv = target.to_unit();
        let src_idx = self.topo.index_of(src);
        if self.covers(src_idx, tv, t) {
            return Ok(GeoRouteResult {
                path: Path {
                    nodes: vec![src.clone()],
                },
                terminal: src.clone(),
                delivered: true,
                greedy_hops: 0,
                fallback_hops: 0,
            });
        }

        let reps = self.cells.grid.to_geocoords(target);
        let mut cands: Vec<(bool, u32, f64, SatAddress)> = Vec::new();
        for rep in [reps.ascending, reps.descending] {
            for c in self.candidates(rep, t) {
                let idx = self.topo.index_of(&c);
                let r = self.range_to(idx, tv, t);
                let hops = crate::routing::hop_distance(src, &c, cfg.n);
                cands.push((r > self.radius, hops, r, c));
            }
        }
        // Covering candidates first, then fewest hops, then nearest.
        cands.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
                .then(a.3.cmp(&b.3))
        });
        let goal = cands[0].3.clone();
        let order: Vec<usize> = (0..cfg.layers()).collect();
        let (mut nodes, covered) = self.walk(&shortest_path(src, &goal, &order, self.topo)?, tv, t);
        let greedy_hops = nodes.len() - 1;
        let mut fallback_hops = 0;

        if !covered {
            let last = nodes.last().unwrap().clone();
            let nearest = (0..self.topo.node_count())
                .map(|i| (self.range_to(i, tv, t), i))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, i)| self.topo.node(i).clone())
                .expect("topology is never empty");
            let deepest_first: Vec<usize> = (0..cfg.layers()).rev().collect();
            let leg = shortest_path(&last, &nearest, &deepest_first, self.topo)?;
            let (extra, _) = self.walk(&leg, tv, t);
            fallback_hops = extra.len() - 1;
            nodes.extend(extra.into_iter().skip(1));
        }

        let nodes = erase_loops(nodes);
        let terminal = nodes.last().unwrap().clone();
        let delivered = self.covers(self.topo.index_of(&terminal), tv, t);
        Ok(GeoRouteResult {
            path: Path { nodes },
            terminal,
            delivered,
            greedy_hops,
            fallback_hops,
        })
    }

    /// Follows `path` and stops at the first node covering the target.
    fn walk(&self, path: &Path, tv: UnitVec3, t: f64) -> (Vec<SatAddress>, bool) {
        let mut out = Vec::with_capacity(path.nodes.len());
        for a in &path.nodes {
            out.push(a.clone());
            if self.covers(self.topo.index_of(a), tv, t) {
                return (out, true);
            }
        }
        (out, false)
    }
}

/// Drops cycles: on revisiting a node, cut back to its first visit.
fn erase_loops(nodes: Vec<SatAddress>) -> Vec<SatAddress> {
    let mut out: Vec<SatAddress> = Vec::with_capacity(nodes.len());
    for a in nodes {
        if let Some(pos) = out.iter().position(|x| *x == a) {
            out.truncate(pos + 1);
        } else {
            out.push(a);
        }
    }
    out
}

pub fn coverage_check(sat: &SatAddress, target: LatLon, t: f64, cfg: &ConstellationConfig) -> Result<bool> {
    let el = address_to_elements(sat, cfg);
    let r = great_circle_range(subpoint_ecef(&el, t, &cfg.consts), target.to_unit());
    Ok(r <= geom::coverage_range(cfg.altitude_km, cfg.min_elevation_rad, &cfg.consts)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn layer_motions_for_eight_six() {
        let cfg = ConstellationConfig::new(8, 6, 1, 1500.0, 53.0, 25.0).unwrap();
        let m = measure_hop_motions(&cfg).unwrap();
        assert_abs_diff_eq!(m[0].delta_alpha, PI / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m[0].delta_gamma, 1.5 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(m[1].delta_alpha, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m[1].delta_gamma, PI / 4.0, epsilon = 1e-12);
        let quoted = quoted_hop_motions(&cfg);
        assert_abs_diff_eq!(quoted[0].delta_gamma, m[0].delta_gamma, epsilon = 1e-12);
        // 2πm/N^k = 3π/4 differs from the measured π/4.
        assert!((quoted[1].delta_gamma - m[1].delta_gamma).abs() > 1.0);
    }

    #[test]
    fn serving_coord_day_periodic_in_alpha() {
        let cfg = ConstellationConfig::new(8, 6, 1, 1500.0, 53.0, 25.0).unwrap();
        let a = SatAddress::new(vec![3, 2]);
        let c0 = serving_coord(&a, 0.0, &cfg);
        let c1 = serving_coord(&a, cfg.consts.sidereal_day_s, &cfg);
        assert!(angle_gap(c0.alpha_rad, c1.alpha_rad) < 1e-12);
    }

    #[test]
    fn coverage_check_extremes() {
        let cfg = ConstellationConfig::new(8, 6, 0, 1500.0, 53.0, 25.0).unwrap();
        let a = SatAddress::zero(1);
        let el = address_to_elements(&a, &cfg);
        let sp = geom::subpoint(&el, 100.0, &cfg.consts);
        assert!(coverage_check(&a, sp, 100.0, &cfg).unwrap());
        let anti = LatLon::new(-sp.lat_rad, sp.lon_rad + PI);
        assert!(!coverage_check(&a, anti, 100.0, &cfg).unwrap());
    }

    #[test]
    fn loop_erasure() {
        let s = |d: u32| SatAddress::new(vec![d]);
        let got = erase_loops(vec![s(0), s(1), s(2), s(1), s(3)]);
        assert_eq!(got, vec![s(0), s(1), s(3)]);
    }
}
