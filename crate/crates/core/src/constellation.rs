//! Recursive Rosette construction: configuration, digit addresses, the layered
//! ring topology and the altitude theorems.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt;

use crate::error::{Error, Result};
use crate::geom::{
    self, great_circle_range, sat_position_eci, OrbitalElements, PhysicalConstants,
};

/// Upper bound on satellites we are willing to materialize as a graph.
pub const MAX_NODES: u64 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstellationConfig {
    pub n: u32,
    pub m: u32,
    pub k: u32,
    pub altitude_km: f64,
    pub inclination_rad: f64,
    pub min_elevation_rad: f64,
    pub consts: PhysicalConstants,
}

impl ConstellationConfig {
    pub fn new(
        n: u32,
        m: u32,
        k: u32,
        altitude_km: f64,
        inclination_deg: f64,
        min_elevation_deg: f64,
    ) -> Result<Self> {
        let cfg = ConstellationConfig {
            n,
            m,
            k,
            altitude_km,
            inclination_rad: inclination_deg.to_radians(),
            min_elevation_rad: min_elevation_deg.to_radians(),
            consts: PhysicalConstants::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.consts.validate()?;
        if self.n < 3 {
            return Err(Error::Config(format!("N must be at least 3, got {}", self.n)));
        }
        if self.m >= self.n {
            return Err(Error::Config(format!(
                "m must lie in [0, N-1], got m={} with N={}",
                self.m, self.n
            )));
        }
        if !(self.altitude_km.is_finite() && self.altitude_km > 0.0) {
            return Err(Error::Config(format!(
                "altitude must be positive, got {} km",
                self.altitude_km
            )));
        }
        if !(self.inclination_rad >= 0.0 && self.inclination_rad < std::f64::consts::PI) {
            return Err(Error::Config(format!(
                "inclination must lie in [0, 180) degrees, got {}",
                self.inclination_rad.to_degrees()
            )));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.min_elevation_rad) {
            return Err(Error::Config(format!(
                "elevation must lie in [0, 90) degrees, got {}",
                self.min_elevation_rad.to_degrees()
            )));
        }
        if self.checked_sat_count().is_none() {
            return Err(Error::Config(format!(
                "N^(k+1) overflows for N={}, k={}",
                self.n, self.k
            )));
        }
        Ok(())
    }

    fn checked_sat_count(&self) -> Option<u64> {
        (self.n as u64).checked_pow(self.k + 1)
    }

    /// Total satellites N^(k+1).
    pub fn sat_count(&self) -> u64 {
        self.checked_sat_count().unwrap_or(u64::MAX)
    }

    /// Orbital period T = T_E / (N - m).
    pub fn period_s(&self) -> f64 {
        self.consts.sidereal_day_s / (self.n - self.m) as f64
    }

    pub fn orbit_radius_km(&self) -> f64 {
        self.consts.earth_radius_km + self.altitude_km
    }

    pub fn layers(&self) -> usize {
        self.k as usize + 1
    }

    pub fn with_altitude(mut self, altitude_km: f64) -> Self {
        self.altitude_km = altitude_km;
        self
    }
}

/// JSON form of a configuration; angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub n: u32,
    pub m: u32,
    pub k: u32,
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub min_elevation_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantOverrides>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantOverrides {
    pub earth_radius_km: Option<f64>,
    pub sidereal_day_s: Option<f64>,
    pub light_speed_km_s: Option<f64>,
    pub atmosphere_margin_km: Option<f64>,
}

impl ConfigDocument {
    pub fn to_config(&self) -> Result<ConstellationConfig> {
        let mut consts = PhysicalConstants::default();
        if let Some(o) = &self.constants {
            if let Some(v) = o.earth_radius_km {
                consts.earth_radius_km = v;
            }
            if let Some(v) = o.sidereal_day_s {
                consts.sidereal_day_s = v;
            }
            if let Some(v) = o.light_speed_km_s {
                consts.light_speed_km_s = v;
            }
            if let Some(v) = o.atmosphere_margin_km {
                consts.atmosphere_margin_km = v;
            }
        }
        let cfg = ConstellationConfig {
            n: self.n,
            m: self.m,
            k: self.k,
            altitude_km: self.altitude_km,
            inclination_rad: self.inclination_deg.to_radians(),
            min_elevation_rad: self.min_elevation_deg.to_radians(),
            consts,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_config(cfg: &ConstellationConfig) -> Self {
        let d = PhysicalConstants::default();
        let c = cfg.consts;
        let constants = (c != d).then_some(ConstantOverrides {
            earth_radius_km: Some(c.earth_radius_km),
            sidereal_day_s: Some(c.sidereal_day_s),
            light_speed_km_s: Some(c.light_speed_km_s),
            atmosphere_margin_km: Some(c.atmosphere_margin_km),
        });
        ConfigDocument {
            n: cfg.n,
            m: cfg.m,
            k: cfg.k,
            altitude_km: cfg.altitude_km,
            inclination_deg: cfg.inclination_rad.to_degrees(),
            min_elevation_deg: cfg.min_elevation_rad.to_degrees(),
            constants,
        }
    }
}

/// Hierarchical satellite address s0.s1...sk; s0 picks the orbit plane.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SatAddress {
    pub digits: Vec<u32>,
}

impl SatAddress {
    pub fn new(digits: Vec<u32>) -> Self {
        SatAddress { digits }
    }

    pub fn zero(layers: usize) -> Self {
        SatAddress {
            digits: vec![0; layers],
        }
    }

    pub fn validate(&self, cfg: &ConstellationConfig) -> Result<()> {
        if self.digits.len() != cfg.layers() {
            return Err(Error::Config(format!(
                "address {self} has {} digits, expected {}",
                self.digits.len(),
                cfg.layers()
            )));
        }
        for &d in &self.digits {
            if d >= cfg.n {
                return Err(Error::Range {
                    what: "satellite digit",
                    value: d as u64,
                    bound: cfg.n as u64,
                });
            }
        }
        Ok(())
    }

    /// Lexicographic rank; s0 is the most significant digit.
    pub fn index(&self, n: u32) -> usize {
        self.digits
            .iter()
            .fold(0usize, |acc, &d| acc * n as usize + d as usize)
    }

    pub fn from_index(mut idx: usize, n: u32, layers: usize) -> Self {
        let mut digits = vec![0; layers];
        for slot in digits.iter_mut().rev() {
            *slot = (idx % n as usize) as u32;
            idx /= n as usize;
        }
        SatAddress { digits }
    }

    /// Moves one hop along the ring of `layer`.
    pub fn step(&self, layer: usize, dir: Direction, n: u32) -> SatAddress {
        let mut out = self.clone();
        let d = out.digits[layer];
        out.digits[layer] = match dir {
            Direction::Plus => (d + 1) % n,
            Direction::Minus => (d + n - 1) % n,
        };
        out
    }
}

impl fmt::Display for SatAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.digits.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
}

impl Direction {
    pub fn sign(self) -> i32 {
        match self {
            Direction::Plus => 1,
            Direction::Minus => -1,
        }
    }

    pub fn reverse(self) -> Direction {
        match self {
            Direction::Plus => Direction::Minus,
            Direction::Minus => Direction::Plus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighbor {
    pub layer: u32,
    pub dir: Direction,
    pub addr: SatAddress,
}

/// Undirected logical link; `to` is `from` advanced by +1 on `layer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub layer: u32,
}

#[derive(Debug, Clone)]
pub struct Topology {
    pub config: ConstellationConfig,
    nodes: Vec<SatAddress>,
    edges: Vec<Edge>,
    elements: Vec<OrbitalElements>,
}

impl Topology {
    pub fn nodes(&self) -> &[SatAddress] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, idx: usize) -> &SatAddress {
        &self.nodes[idx]
    }

    pub fn index_of(&self, addr: &SatAddress) -> usize {
        addr.index(self.config.n)
    }

    pub fn elements(&self, idx: usize) -> &OrbitalElements {
        &self.elements[idx]
    }

    /// Neighbor index along `layer` in direction `dir`, by digit arithmetic.
    pub fn step_index(&self, idx: usize, layer: usize, dir: Direction) -> usize {
        let n = self.config.n as usize;
        let place = n.pow((self.config.k as usize - layer) as u32);
        let digit = (idx / place) % n;
        let nd = match dir {
            Direction::Plus => (digit + 1) % n,
            Direction::Minus => (digit + n - 1) % n,
        };
        idx - digit * place + nd * place
    }

    /// Inertial direction of satellite `idx` at time `t`.
    pub fn position(&self, idx: usize, t: f64) -> geom::UnitVec3 {
        sat_position_eci(&self.elements[idx], t)
    }

    pub fn edge_range(&self, e: &Edge, t: f64) -> f64 {
        great_circle_range(self.position(e.from, t), self.position(e.to, t))
    }

    /// Edge set as dotted-address triples, for export.
    pub fn to_document(&self) -> TopologyDocument {
        TopologyDocument {
            config: ConfigDocument::from_config(&self.config),
            nodes: self.nodes.iter().map(|a| a.to_string()).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| {
                    (
                        self.nodes[e.from].to_string(),
                        self.nodes[e.to].to_string(),
                        e.layer,
                    )
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyDocument {
    pub config: ConfigDocument,
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String, u32)>,
}

pub fn build(cfg: &ConstellationConfig) -> Result<Topology> {
    cfg.validate()?;
    let count = cfg.sat_count();
    if count > MAX_NODES {
        return Err(Error::Config(format!(
            "{count} satellites is too many to materialize (limit {MAX_NODES})"
        )));
    }
    let layers = cfg.layers();
    let nodes: Vec<SatAddress> = (0..count as usize)
        .map(|i| SatAddress::from_index(i, cfg.n, layers))
        .collect();
    let elements = nodes.iter().map(|a| address_to_elements(a, cfg)).collect();
    let mut topo = Topology {
        config: *cfg,
        nodes,
        edges: Vec::with_capacity(count as usize * layers),
        elements,
    };
    let mut edges = Vec::with_capacity(count as usize * layers);
    for i in 0..count as usize {
        for layer in 0..layers {
            edges.push(Edge {
                from: i,
                to: topo.step_index(i, layer, Direction::Plus),
                layer: layer as u32,
            });
        }
    }
    topo.edges = edges;
    Ok(topo)
}

/// Orbit and epoch phase implied by an address.
pub fn address_to_elements(addr: &SatAddress, cfg: &ConstellationConfig) -> OrbitalElements {
    let n = cfg.n as f64;
    let s0 = addr.digits[0] as f64;
    let mut phase = TAU * cfg.m as f64 * s0 / n;
    let mut scale = 1.0;
    for &d in &addr.digits[1..] {
        scale *= n;
        phase += TAU * d as f64 / scale;
    }
    OrbitalElements {
        raan_rad: geom::wrap_two_pi(TAU * s0 / n),
        inclination_rad: cfg.inclination_rad,
        phase0_rad: geom::wrap_two_pi(phase),
        period_s: cfg.period_s(),
        orbit_radius_km: cfg.orbit_radius_km(),
    }
}

pub fn neighbors(addr: &SatAddress, cfg: &ConstellationConfig) -> Vec<Neighbor> {
    let mut out = Vec::with_capacity(2 * cfg.layers());
    for layer in 0..cfg.layers() {
        for dir in [Direction::Plus, Direction::Minus] {
            out.push(Neighbor {
                layer: layer as u32,
                dir,
                addr: addr.step(layer, dir, cfg.n),
            });
        }
    }
    out
}

/// Lowest H at which N^(k+1) satellites cover the earth.
pub fn min_altitude_coverage(cfg: &ConstellationConfig) -> Result<f64> {
    let r = geom::required_range(cfg.sat_count())?;
    let denom = r.cos() - r.sin() * cfg.min_elevation_rad.tan();
    if denom <= 0.0 {
        return Err(Error::Infeasible(format!(
            "coverage range {r:.6} rad is unreachable at elevation {:.3} deg",
            cfg.min_elevation_rad.to_degrees()
        )));
    }
    Ok(cfg.consts.earth_radius_km * (1.0 / denom - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    /// max(visibility term, coverage term).
    pub altitude_km: f64,
    pub visibility_altitude_km: f64,
    pub coverage_altitude_km: f64,
    /// Largest link range over all edges and one period.
    pub r_max_rad: f64,
    pub r_max_edge: Edge,
    pub r_max_time_s: f64,
    /// Closed-form estimate read literally as sin^2(r_max); None if out of [0, 1].
    pub closed_form_r_max_rad: Option<f64>,
}

/// Samples per period when scanning a time-varying link.
pub const RANGE_SAMPLES: usize = 4096;

pub fn min_altitude_stability(cfg: &ConstellationConfig) -> Result<f64> {
    Ok(stability_report(cfg)?.altitude_km)
}

pub fn stability_report(cfg: &ConstellationConfig) -> Result<StabilityReport> {
    let topo = build(cfg)?;
    let period = cfg.period_s();
    let dt = period / RANGE_SAMPLES as f64;

    // Intra-orbit links keep a fixed separation, one evaluation each.
    let (mut best_r, mut best_e, mut best_t) = (0.0f64, topo.edges[0], 0.0);
    for e in topo.edges.iter().filter(|e| e.layer > 0) {
        let r = topo.edge_range(e, 0.0);
        if r > best_r {
            (best_r, best_e, best_t) = (r, *e, 0.0);
        }
    }
    let inter = topo
        .edges
        .par_iter()
        .filter(|e| e.layer == 0)
        .map(|e| {
            let mut bi = 0usize;
            let mut br = f64::MIN;
            for s in 0..RANGE_SAMPLES {
                let r = topo.edge_range(e, s as f64 * dt);
                if r > br {
                    br = r;
                    bi = s;
                }
            }
            (br, bi, *e)
        })
        .reduce(
            || (f64::MIN, 0, topo.edges[0]),
            |a, b| if b.0 > a.0 { b } else { a },
        );
    if inter.0 > f64::MIN {
        let centre = inter.1 as f64 * dt;
        let (t, r) = geom::golden_max(|t| topo.edge_range(&inter.2, t), centre - dt, centre + dt, 1e-9);
        let r = r.max(inter.0);
        if r > best_r {
            (best_r, best_e, best_t) = (r, inter.2, t.rem_euclid(period));
        }
    }

    let margin = cfg.consts.atmosphere_margin_km;
    let re = cfg.consts.earth_radius_km;
    let half = best_r / 2.0;
    let visibility = if half.cos() <= 0.0 {
        f64::INFINITY
    } else {
        (re + margin) / half.cos() - re
    };
    let coverage = min_altitude_coverage(cfg)?;
    Ok(StabilityReport {
        altitude_km: visibility.max(coverage),
        visibility_altitude_km: visibility,
        coverage_altitude_km: coverage,
        r_max_rad: best_r,
        r_max_edge: best_e,
        r_max_time_s: best_t,
        closed_form_r_max_rad: closed_form_r_max(cfg),
    })
}

fn closed_form_r_max(cfg: &ConstellationConfig) -> Option<f64> {
    let (sh, ch) = (cfg.inclination_rad / 2.0).sin_cos();
    let (sh2, ch2) = (sh * sh, ch * ch);
    let (n, m) = (cfg.n as f64, cfg.m as f64);
    let p = std::f64::consts::PI / n;
    let sq = |v: f64| v.sin() * v.sin();
    let s2 = ch2 * ch2 * sq(m * (m + 1.0) * p)
        + 2.0 * sh2 * ch2 * sq(m * m * p)
        + sh2 * sh2 * sq(m * (m - 1.0) * p)
        + 2.0 * sh2 * ch2 * sq(m * p);
    (0.0..=1.0).contains(&s2).then(|| s2.sqrt().asin())
}

/// Round-trip light time between the ground and a satellite overhead.
pub fn ground_to_space_rtt(altitude_km: f64, consts: &PhysicalConstants) -> f64 {
    2.0 * altitude_km / consts.light_speed_km_s
}
