//! Time-stepped emulation: association, route delays, and the delay-optimal baseline.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::{ConfigDocument, ConstellationConfig, Edge, SatAddress, Topology};
use crate::error::{Error, Result};
use crate::geom::{self, great_circle_range, link_length_delay, subpoint_ecef, LatLon, UnitVec3};
use crate::oracle;
use crate::routing::{identity_order, shortest_path, Path};

/// Steps evaluated in parallel before their records are emitted.
const CHUNK_STEPS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointDocument {
    pub name: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDocument {
    pub src: String,
    pub dst: String,
}

fn default_step() -> f64 {
    10.0
}

/// Scenario file layout. `end_s` defaults to one orbital period after `start_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub config: ConfigDocument,
    #[serde(default)]
    pub start_s: f64,
    #[serde(default)]
    pub end_s: Option<f64>,
    #[serde(default = "default_step")]
    pub step_s: f64,
    pub endpoints: Vec<EndpointDocument>,
    pub experiments: Vec<ExperimentDocument>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Endpoint {
    pub name: String,
    pub location: LatLon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub cfg: ConstellationConfig,
    pub start_s: f64,
    pub end_s: f64,
    pub step_s: f64,
    pub endpoints: Vec<Endpoint>,
    /// Pairs of endpoint indices.
    pub experiments: Vec<(usize, usize)>,
    pub seed: u64,
}

impl ScenarioDocument {
    pub fn to_scenario(&self) -> Result<Scenario> {
        let cfg = self.config.to_config()?;
        let end_s = self.end_s.unwrap_or(self.start_s + cfg.period_s());
        let endpoints: Vec<Endpoint> = self
            .endpoints
            .iter()
            .map(|e| Endpoint {
                name: e.name.clone(),
                location: LatLon::from_degrees(e.lat_deg, e.lon_deg),
            })
            .collect();
        let find = |name: &str| {
            endpoints
                .iter()
                .position(|e| e.name == name)
                .ok_or_else(|| Error::Config(format!("unknown endpoint {name:?}")))
        };
        let experiments = self
            .experiments
            .iter()
            .map(|x| Ok((find(&x.src)?, find(&x.dst)?)))
            .collect::<Result<Vec<_>>>()?;
        let s = Scenario {
            cfg,
            start_s: self.start_s,
            end_s,
            step_s: self.step_s,
            endpoints,
            experiments,
            seed: self.seed,
        };
        s.validate()?;
        Ok(s)
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_s > 0.0 && self.step_s.is_finite()) {
            return Err(Error::Config(format!("step must be positive, got {}", self.step_s)));
        }
        if !(self.start_s.is_finite() && self.end_s.is_finite() && self.end_s > self.start_s) {
            return Err(Error::Config(format!(
                "empty time window [{}, {})",
                self.start_s, self.end_s
            )));
        }
        if self.experiments.is_empty() {
            return Err(Error::Config("scenario has no experiments".into()));
        }
        for e in &self.endpoints {
            if !(-90.0..=90.0).contains(&e.location.lat_rad.to_degrees()) {
                return Err(Error::Config(format!("endpoint {} has a bad latitude", e.name)));
            }
        }
        Ok(())
    }

    /// Sample times start + i·step for every i with t < end.
    pub fn step_count(&self) -> usize {
        ((self.end_s - self.start_s) / self.step_s).ceil() as usize
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start_s + i as f64 * self.step_s
    }

    pub fn experiment_name(&self, i: usize) -> String {
        let (a, b) = self.experiments[i];
        format!("{}->{}", self.endpoints[a].name, self.endpoints[b].name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub t_s: f64,
    pub experiment: String,
    pub src_sat: String,
    pub dst_sat: String,
    pub frosette_hops: usize,
    pub frosette_delay_s: f64,
    pub oracle_hops: usize,
    pub oracle_delay_s: f64,
    pub stretch: f64,
    pub handoff: bool,
    /// Both endpoints inside their serving satellite's coverage.
    pub covered: bool,
    pub seed: u64,
}

/// Satellite nearest to `p` at `t`; ties go to the lower address.
pub fn associate(p: LatLon, t: f64, topo: &Topology) -> SatAddress {
    topo.node(nearest_index(p.to_unit(), t, topo)).clone()
}

fn nearest_index(pv: UnitVec3, t: f64, topo: &Topology) -> usize {
    let consts = &topo.config.consts;
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..topo.node_count() {
        let r = great_circle_range(subpoint_ecef(topo.elements(i), t, consts), pv);
        if r < best.0 {
            best = (r, i);
        }
    }
    best.1
}

fn edge_delay(topo: &Topology, e: &Edge, t: f64) -> f64 {
    let cfg = &topo.config;
    link_length_delay(topo.edge_range(e, t), cfg.altitude_km, &cfg.consts).1
}

fn weighted_adjacency(topo: &Topology, t: f64) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); topo.node_count()];
    for e in topo.edges() {
        let w = edge_delay(topo, e, t);
        adj[e.from].push((e.to, w));
        adj[e.to].push((e.from, w));
    }
    adj
}

/// Minimum-propagation-delay path at the frozen instant `t`.
pub fn delay_oracle(topo: &Topology, t: f64, src: &SatAddress, dst: &SatAddress) -> Result<(Path, f64)> {
    src.validate(&topo.config)?;
    dst.validate(&topo.config)?;
    let (s, d) = (topo.index_of(src), topo.index_of(dst));
    let (dist, prev) = oracle::dijkstra(&weighted_adjacency(topo, t), s);
    let idx = oracle::trace_back(&prev, s, d)
        .ok_or_else(|| Error::Inconsistent(format!("{dst} unreachable from {src}")))?;
    Ok((
        Path {
            nodes: idx.into_iter().map(|i| topo.node(i).clone()).collect(),
        },
        dist[d],
    ))
}

/// Sum of first-principles link delays along `path` at `t`.
pub fn path_delay(topo: &Topology, path: &Path, t: f64) -> f64 {
    let cfg = &topo.config;
    path.nodes
        .windows(2)
        .map(|w| {
            let r = great_circle_range(topo.position(topo.index_of(&w[0]), t), topo.position(topo.index_of(&w[1]), t));
            link_length_delay(r, cfg.altitude_km, &cfg.consts).1
        })
        .sum()
}

/// Delay samples of one edge over [start, end).
pub fn link_delay_trace(topo: &Topology, edge: &Edge, start_s: f64, end_s: f64, step_s: f64) -> Result<Vec<(f64, f64)>> {
    if edge.from >= topo.node_count() || edge.to >= topo.node_count() {
        return Err(Error::Config(format!("edge {edge:?} is not in the topology")));
    }
    if !(step_s > 0.0 && end_s > start_s) {
        return Err(Error::Config("empty sampling window".into()));
    }
    let steps = ((end_s - start_s) / step_s).ceil() as usize;
    Ok((0..steps)
        .map(|i| {
            let t = start_s + i as f64 * step_s;
            (t, edge_delay(topo, edge, t))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub experiment: String,
    pub records: usize,
    pub median_stretch: f64,
    pub p95_stretch: f64,
    pub max_stretch: f64,
    pub max_hops: usize,
    pub handoffs: usize,
    pub coverage_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub steps: usize,
    pub step_s: f64,
    /// Steps at which some link fell below the visibility limit.
    pub invisible_link_steps: usize,
    pub experiments: Vec<ExperimentSummary>,
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

struct StepResult {
    links_visible: bool,
    rows: Vec<(usize, usize, Path, f64, usize, f64, bool)>,
}

fn evaluate_step(sc: &Scenario, topo: &Topology, t: f64, radius: f64) -> Result<StepResult> {
    let cfg = &topo.config;
    let links_visible = topo
        .edges()
        .iter()
        .all(|e| geom::visibility_ok(topo.edge_range(e, t), cfg.altitude_km, &cfg.consts));
    let adj = weighted_adjacency(topo, t);
    let order = identity_order(cfg);
    let mut rows = Vec::with_capacity(sc.experiments.len());
    for &(a, b) in &sc.experiments {
        let (pa, pb) = (sc.endpoints[a].location.to_unit(), sc.endpoints[b].location.to_unit());
        let (sa, sb) = (nearest_index(pa, t, topo), nearest_index(pb, t, topo));
        let up = |p: UnitVec3, s: usize| {
            let sp = subpoint_ecef(topo.elements(s), t, &cfg.consts);
            let slant = geom::slant_range_km(p, sp, cfg.altitude_km, &cfg.consts);
            (slant / cfg.consts.light_speed_km_s, great_circle_range(p, sp) <= radius)
        };
        let (ua, ca) = up(pa, sa);
        let (ub, cb) = up(pb, sb);
        let path = shortest_path(topo.node(sa), topo.node(sb), &order, topo)?;
        let f_delay = ua + path_delay(topo, &path, t) + ub;
        let (dist, prev) = oracle::dijkstra(&adj, sa);
        let o_hops = oracle::trace_back(&prev, sa, sb).map_or(0, |p| p.len() - 1);
        let o_delay = ua + dist[sb] + ub;
        rows.push((sa, sb, path, f_delay, o_hops, o_delay, ca && cb));
    }
    Ok(StepResult { links_visible, rows })
}

/// Runs the scenario, handing each record to `sink` in time order.
pub fn run_streaming(sc: &Scenario, mut sink: impl FnMut(&TraceRecord) -> Result<()>) -> Result<Summary> {
    sc.validate()?;
    let topo = crate::constellation::build(&sc.cfg)?;
    let radius = geom::coverage_range(sc.cfg.altitude_km, sc.cfg.min_elevation_rad, &sc.cfg.consts)?;
    let steps = sc.step_count();
    let ne = sc.experiments.len();
    let mut stretches: Vec<Vec<f64>> = vec![Vec::with_capacity(steps); ne];
    let mut max_hops = vec![0usize; ne];
    let mut handoffs = vec![0usize; ne];
    let mut uncovered = vec![0usize; ne];
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; ne];
    let mut invisible = 0usize;

    for chunk_start in (0..steps).step_by(CHUNK_STEPS) {
        let chunk_end = (chunk_start + CHUNK_STEPS).min(steps);
        let results: Vec<Result<StepResult>> = (chunk_start..chunk_end)
            .into_par_iter()
            .map(|i| evaluate_step(sc, &topo, sc.time(i), radius))
            .collect();
        for (i, res) in (chunk_start..chunk_end).zip(results) {
            let res = res?;
            if !res.links_visible {
                invisible += 1;
            }
            for (x, (sa, sb, path, f_delay, o_hops, o_delay, covered)) in res.rows.into_iter().enumerate() {
                let handoff = prev[x].is_some_and(|p| p != (sa, sb));
                prev[x] = Some((sa, sb));
                let stretch = if o_delay > 0.0 { f_delay / o_delay } else { 1.0 };
                stretches[x].push(stretch);
                max_hops[x] = max_hops[x].max(path.hops());
                handoffs[x] += handoff as usize;
                uncovered[x] += (!covered) as usize;
                sink(&TraceRecord {
                    t_s: sc.time(i),
                    experiment: sc.experiment_name(x),
                    src_sat: topo.node(sa).to_string(),
                    dst_sat: topo.node(sb).to_string(),
                    frosette_hops: path.hops(),
                    frosette_delay_s: f_delay,
                    oracle_hops: o_hops,
                    oracle_delay_s: o_delay,
                    stretch,
                    handoff,
                    covered,
                    seed: sc.seed,
                })?;
            }
        }
    }

    let experiments = (0..ne)
        .map(|x| {
            let mut s = stretches[x].clone();
            s.sort_by(f64::total_cmp);
            ExperimentSummary {
                experiment: sc.experiment_name(x),
                records: s.len(),
                median_stretch: percentile(&s, 50.0),
                p95_stretch: percentile(&s, 95.0),
                max_stretch: s.last().copied().unwrap_or(f64::NAN),
                max_hops: max_hops[x],
                handoffs: handoffs[x],
                coverage_violations: uncovered[x],
            }
        })
        .collect();
    Ok(Summary {
        seed: sc.seed,
        steps,
        step_s: sc.step_s,
        invisible_link_steps: invisible,
        experiments,
    })
}

/// Collects every record in memory.
pub fn run(sc: &Scenario) -> Result<(Vec<TraceRecord>, Summary)> {
    let mut out = Vec::new();
    let summary = run_streaming(sc, |r| {
        out.push(r.clone());
        Ok(())
    })?;
    Ok((out, summary))
}

/// CSV sink with a header row naming every record field.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(w: W) -> Self {
        TraceWriter {
            inner: csv::Writer::from_writer(w),
        }
    }

    pub fn write(&mut self, r: &TraceRecord) -> Result<()> {
        self.inner
            .serialize(r)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io { kind: io.kind(), msg: format!("trace write: {io}") },
                other => Error::Format(format!("trace record: {other:?}")),
            })
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner
            .flush()
            .map_err(|e| Error::Io { kind: e.kind(), msg: format!("trace flush: {e}") })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{address_to_elements, build};
    use crate::geom::subpoint;

    fn topo() -> Topology {
        build(&ConstellationConfig::new(8, 6, 1, 1500.0, 53.0, 25.0).unwrap()).unwrap()
    }

    #[test]
    fn associate_on_subpoint() {
        let t = topo();
        let a = SatAddress::new(vec![5, 3]);
        let p = subpoint(&address_to_elements(&a, &t.config), 1234.0, &t.config.consts);
        assert_eq!(associate(p, 1234.0, &t), a);
    }

    #[test]
    fn oracle_self_is_free() {
        let t = topo();
        let a = SatAddress::new(vec![2, 2]);
        let (p, d) = delay_oracle(&t, 50.0, &a, &a).unwrap();
        assert_eq!(p.hops(), 0);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 50.0), 10.0);
        assert_eq!(percentile(&v, 95.0), 19.0);
        assert_eq!(percentile(&v, 100.0), 20.0);
    }

    #[test]
    fn co_located_endpoints_are_zero_hop() {
        let cfg = ConstellationConfig::new(8, 6, 1, 1500.0, 53.0, 25.0).unwrap();
        let sc = Scenario {
            cfg,
            start_s: 0.0,
            end_s: 600.0,
            step_s: 60.0,
            endpoints: vec![Endpoint {
                name: "a".into(),
                location: LatLon::from_degrees(10.0, 20.0),
            }],
            experiments: vec![(0, 0)],
            seed: 3,
        };
        let (recs, sum) = run(&sc).unwrap();
        assert_eq!(recs.len(), 10);
        assert!(recs.iter().all(|r| r.frosette_hops == 0 && r.stretch == 1.0));
        assert_eq!(sum.experiments[0].median_stretch, 1.0);
        for w in recs.windows(2) {
            assert_eq!(w[1].t_s - w[0].t_s, 60.0);
        }
    }
}
