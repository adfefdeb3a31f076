//! `frosette` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 domain or input error. Errors are
//! also written to stderr as `{"error": kind, "message": text}`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use frosette::addressing::{parse_cell_id, parse_sat_address};
use frosette::constellation::build;
use frosette::geocell::{build_alpha0_tables, Alpha0Table, CellSystem};
use frosette::routing::{
    build_fib, disjoint_paths, fib_bound, shortest_path_with, DirectionRule, Path,
};
use frosette::sim::{self, ScenarioDocument, TraceWriter};
use frosette::{
    select_size, ConfigDocument, ConstellationConfig, Direction, GeoRouter, LatLon, SizeRequest,
};

#[derive(Parser)]
#[command(name = "frosette", version, about = "Recursive Rosette constellation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArg {
    /// Constellation config JSON; defaults to N=8, m=6, k=1, 1500 km, 53 deg, 25 deg.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the topology and cell tables for a config.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Topology JSON destination; stdout if omitted.
        #[arg(long)]
        out_topology: Option<PathBuf>,
        /// Binary alpha0 table destination.
        #[arg(long)]
        out_tables: Option<PathBuf>,
        /// Write the tables as JSON instead of binary.
        #[arg(long, requires = "out_tables")]
        tables_json: bool,
    },
    /// Route between satellites, or from a ground point to a ground point with --geo.
    Route(RouteArgs),
    /// Dump one satellite's forwarding table.
    Fib {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        sat: String,
    },
    /// Cell system queries.
    Cells(CellsArgs),
    /// Size a constellation from an RTT target.
    Size {
        #[arg(long)]
        rtt_ms: f64,
        #[arg(long)]
        elevation_deg: f64,
        #[arg(long)]
        base_n: u32,
    },
    /// Run a scenario and write its trace CSV.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Trace destination; stdout if omitted, in which case the summary goes to stderr.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite.
    Verify {
        /// Emit results as JSON lines instead of text.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct RouteArgs {
    #[command(flatten)]
    cfg: ConfigArg,
    #[arg(long, required_unless_present = "geo", conflicts_with = "geo")]
    from: Option<String>,
    #[arg(long, required_unless_present = "geo", conflicts_with = "geo")]
    to: Option<String>,
    /// Layer order, e.g. 1,0.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["geo", "disjoint"])]
    perm: Option<Vec<usize>>,
    /// Direction by the literal (s - d) mod N <= N/2 rule instead of shortest arc.
    #[arg(long, conflicts_with_all = ["geo", "disjoint"])]
    literal: bool,
    /// Return 2(k+1) node-disjoint paths.
    #[arg(long, conflicts_with = "geo")]
    disjoint: bool,
    #[arg(long, requires_all = ["src_lat", "src_lon", "dst_lat", "dst_lon", "time"])]
    geo: bool,
    #[arg(long, allow_hyphen_values = true)]
    src_lat: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    src_lon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    dst_lat: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    dst_lon: Option<f64>,
    /// Seconds since epoch.
    #[arg(long)]
    time: Option<f64>,
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "query")]
struct CellQuery {
    /// Total cell count at the deepest level.
    #[arg(long)]
    count: bool,
    /// Cell containing a point.
    #[arg(long, num_args = 2, value_names = ["LAT", "LON"], allow_hyphen_values = true)]
    locate: Option<Vec<f64>>,
    /// Reference location of a cell ID such as 1,0/5,3.
    #[arg(long, value_name = "CELLID")]
    to_location: Option<String>,
}

#[derive(Args)]
struct CellsArgs {
    #[command(flatten)]
    cfg: ConfigArg,
    #[command(flatten)]
    query: CellQuery,
    /// Level for --locate; defaults to the deepest.
    #[arg(long)]
    level: Option<u32>,
    /// Precomputed binary tables from `generate --out-tables`.
    #[arg(long)]
    tables: Option<PathBuf>,
}

/// Error carrying the machine-readable kind for stderr.
struct Failure {
    kind: String,
    message: String,
}

impl From<frosette::Error> for Failure {
    fn from(e: frosette::Error) -> Self {
        if let frosette::Error::Io { kind: io::ErrorKind::BrokenPipe, .. } = e {
            return Failure::closed();
        }
        Failure { kind: e.kind().to_string(), message: e.to_string() }
    }
}

impl Failure {
    fn closed() -> Self {
        Failure { kind: "closed".into(), message: String::new() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let closed = e.chain().any(|c| {
            let kind = c
                .downcast_ref::<io::Error>()
                .map(io::Error::kind)
                .or_else(|| c.downcast_ref::<serde_json::Error>().and_then(serde_json::Error::io_error_kind));
            kind == Some(io::ErrorKind::BrokenPipe)
        });
        if closed {
            return Failure::closed();
        }
        match e.downcast_ref::<frosette::Error>() {
            Some(inner) if matches!(inner, frosette::Error::Io { kind: io::ErrorKind::BrokenPipe, .. }) => Failure::closed(),
            Some(inner) => Failure { kind: inner.kind().to_string(), message: format!("{e:#}") },
            None => Failure { kind: "input".into(), message: format!("{e:#}") },
        }
    }
}

type CmdResult = Result<(), Failure>;

fn demo_config() -> ConstellationConfig {
    ConstellationConfig::new(8, 6, 1, 1500.0, 53.0, 25.0).expect("demo config is valid")
}

fn load_config(path: Option<&FsPath>) -> Result<ConstellationConfig, Failure> {
    let Some(path) = path else {
        return Ok(demo_config());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: ConfigDocument =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(doc.to_config()?)
}

fn print_json(v: &Value) -> CmdResult {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).context("writing stdout")?;
    writeln!(out).context("writing stdout")?;
    Ok(())
}

fn create(path: &FsPath) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn dir_str(d: Direction) -> &'static str {
    match d {
        Direction::Plus => "+1",
        Direction::Minus => "-1",
    }
}

fn path_json(p: &Path, n: u32) -> Value {
    let hops: Vec<Value> = p
        .hop_labels(n)
        .unwrap_or_default()
        .into_iter()
        .map(|(layer, d)| json!({"layer": layer, "dir": dir_str(d)}))
        .collect();
    json!({
        "nodes": p.nodes.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
        "hops": p.hops(),
        "labels": hops,
    })
}

fn cmd_generate(config: &FsPath, out_topology: Option<&FsPath>, out_tables: Option<&FsPath>, tables_json: bool) -> CmdResult {
    let cfg = load_config(Some(config))?;
    let topo = build(&cfg)?;
    let doc = topo.to_document();
    let mut summary = json!({
        "nodes": topo.node_count(),
        "edges": topo.edges().len(),
    });
    if let Some(path) = out_tables {
        let tables = build_alpha0_tables(&cfg)?;
        let mut w = create(path)?;
        let bytes = if tables_json {
            let text = serde_json::to_vec(&tables).context("serializing tables")?;
            w.write_all(&text).context("writing tables")?;
            text.len()
        } else {
            tables.write_binary(&mut w).context("writing tables")?
        };
        w.flush().context("writing tables")?;
        summary["table_entries"] = json!(tables.entry_count());
        summary["table_bytes"] = json!(bytes);
    }
    match out_topology {
        Some(path) => {
            let mut w = create(path)?;
            serde_json::to_writer(&mut w, &doc).context("writing topology")?;
            w.flush().context("writing topology")?;
            print_json(&summary)
        }
        None => {
            let mut v = serde_json::to_value(&doc).context("serializing topology")?;
            v["summary"] = summary;
            print_json(&v)
        }
    }
}

fn cmd_route(a: &RouteArgs) -> CmdResult {
    let cfg = load_config(a.cfg.config.as_deref())?;
    if a.geo {
        return cmd_route_geo(a, &cfg);
    }
    let (from, to) = (a.from.as_deref().unwrap_or_default(), a.to.as_deref().unwrap_or_default());
    let s = parse_sat_address(from, &cfg)?;
    let d = parse_sat_address(to, &cfg)?;
    let topo = build(&cfg)?;
    if a.disjoint {
        let dp = disjoint_paths(&s, &d, &topo)?;
        return print_json(&json!({
            "from": s.to_string(),
            "to": d.to_string(),
            "paths": dp.paths.iter().map(|p| path_json(p, cfg.n)).collect::<Vec<_>>(),
            "shortfall": dp.shortfall,
        }));
    }
    let perm = a.perm.clone().unwrap_or_else(|| (0..cfg.layers()).collect());
    let rule = if a.literal { DirectionRule::Literal } else { DirectionRule::MinDistance };
    let p = shortest_path_with(&s, &d, &perm, &cfg, rule)?;
    let mut v = path_json(&p, cfg.n);
    v["perm"] = json!(perm);
    print_json(&v)
}

fn cmd_route_geo(a: &RouteArgs, cfg: &ConstellationConfig) -> CmdResult {
    let (Some(slat), Some(slon), Some(dlat), Some(dlon), Some(t)) = (a.src_lat, a.src_lon, a.dst_lat, a.dst_lon, a.time) else {
        unreachable!("clap enforces the geo arguments");
    };
    for lat in [slat, dlat] {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(frosette::Error::Config(format!("latitude {lat} outside [-90, 90]")).into());
        }
    }
    let topo = build(cfg)?;
    let cells = CellSystem::new(cfg)?;
    let router = GeoRouter::new(&topo, &cells)?;
    let src = sim::associate(LatLon::from_degrees(slat, slon), t, &topo);
    let dst_cell = cells.locate(LatLon::from_degrees(dlat, dlon));
    let r = router.route(&src, &dst_cell, t)?;
    let (clat, clon) = cells.center(&dst_cell)?.to_degrees();
    print_json(&json!({
        "source_satellite": src.to_string(),
        "destination_cell": dst_cell.to_string(),
        "cell_reference_deg": [clat, clon],
        "path": path_json(&r.path, cfg.n),
        "terminal": r.terminal.to_string(),
        "delivered": r.delivered,
        "greedy_hops": r.greedy_hops,
        "fallback_hops": r.fallback_hops,
    }))?;
    if !r.delivered {
        return Err(Failure {
            kind: "coverage".into(),
            message: format!("no satellite covers cell {dst_cell} at t={t}"),
        });
    }
    Ok(())
}

fn cmd_fib(cfg: &ConfigArg, sat: &str) -> CmdResult {
    let cfg = load_config(cfg.config.as_deref())?;
    let owner = parse_sat_address(sat, &cfg)?;
    let fib = build_fib(&owner, &cfg)?;
    let entries: Vec<Value> = fib
        .entries
        .iter()
        .map(|e| json!({"layer": e.layer, "match": e.pattern(fib.digit_bits), "dir": dir_str(e.dir)}))
        .collect();
    print_json(&json!({
        "owner": owner.to_string(),
        "digit_bits": fib.digit_bits,
        "entries": entries,
        "bound": fib_bound(&cfg),
    }))
}

fn read_tables(path: &FsPath) -> Result<Alpha0Table, Failure> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Alpha0Table::read_binary(io::BufReader::new(f))?)
}

fn cmd_cells(a: &CellsArgs) -> CmdResult {
    let cfg = load_config(a.cfg.config.as_deref())?;
    let q = &a.query;
    if q.count {
        let per_level: Vec<u64> = (0..=cfg.k)
            .map(|k| frosette::geocell::cell_count(&ConstellationConfig { k, ..cfg }))
            .collect();
        return print_json(&json!({"count": frosette::geocell::cell_count(&cfg), "per_level": per_level}));
    }
    let cells = match &a.tables {
        Some(path) => CellSystem::from_tables(&cfg, read_tables(path)?)?,
        None => CellSystem::new(&cfg)?,
    };
    if let Some(p) = &q.locate {
        let (lat, lon) = (p[0], p[1]);
        if !(-90.0..=90.0).contains(&lat) {
            return Err(frosette::Error::Config(format!("latitude {lat} outside [-90, 90]")).into());
        }
        let level = a.level.unwrap_or(cfg.k);
        if level > cfg.k {
            return Err(frosette::Error::Level(cfg.k).into());
        }
        let pt = LatLon::from_degrees(lat, lon);
        let cell = cells.grid.locate(pt, level);
        let (_, _, clamped) = cells.grid.trajectory_coords(pt);
        return print_json(&json!({"cell": cell.to_string(), "level": level, "clamped": clamped}));
    }
    if let Some(text) = &q.to_location {
        let cell = parse_cell_id(text, &cfg)?;
        let loc = cells.location(&cell)?;
        let (lat, lon) = cells.grid.to_latlon(loc.ascending).to_degrees();
        return print_json(&json!({
            "cell": cell.to_string(),
            "ascending": {"alpha_rad": loc.ascending.alpha_rad, "gamma_rad": loc.ascending.gamma_rad},
            "descending": {"alpha_rad": loc.descending.alpha_rad, "gamma_rad": loc.descending.gamma_rad},
            "phantom": loc.phantom,
            "reference_deg": [lat, lon],
        }));
    }
    unreachable!("clap requires one query")
}

fn cmd_size(rtt_ms: f64, elevation_deg: f64, base_n: u32) -> CmdResult {
    let req = SizeRequest {
        rtt_target_s: rtt_ms / 1e3,
        min_elevation_rad: elevation_deg.to_radians(),
        base_n,
    };
    let plan = select_size(&req, &Default::default())?;
    print_json(&json!({
        "altitude_km": plan.altitude_km,
        "coverage_range_rad": plan.coverage_range_rad,
        "n_min": plan.n_min,
        "k": plan.k,
        "satellites": plan.total,
    }))
}

fn cmd_simulate(scenario: &FsPath, out: Option<&FsPath>) -> CmdResult {
    let text = std::fs::read_to_string(scenario).with_context(|| format!("reading {}", scenario.display()))?;
    let doc: ScenarioDocument =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", scenario.display()))?;
    let mut sc = doc.to_scenario()?;
    if let Ok(seed) = std::env::var("FROSETTE_SEED") {
        sc.seed = seed
            .trim()
            .parse()
            .map_err(|_| frosette::Error::Config(format!("FROSETTE_SEED={seed:?} is not an unsigned integer")))?;
    }
    let summary = match out {
        Some(path) => {
            let mut w = TraceWriter::new(create(path)?);
            let s = sim::run_streaming(&sc, |r| w.write(r))?;
            w.finish()?;
            s
        }
        None => {
            let mut w = TraceWriter::new(io::stdout().lock());
            let s = sim::run_streaming(&sc, |r| w.write(r))?;
            w.finish()?;
            s
        }
    };
    let v = serde_json::to_value(&summary).context("serializing summary")?;
    if out.is_some() {
        print_json(&v)
    } else {
        eprintln!("{}", serde_json::to_string_pretty(&v).context("serializing summary")?);
        Ok(())
    }
}

fn cmd_verify(as_json: bool) -> CmdResult {
    let results = frosette::verify::run_all(|r| {
        if as_json {
            println!("{}", serde_json::to_string(r).expect("check results serialize"));
        } else {
            println!("{}", r.line());
        }
    });
    let failed: Vec<usize> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            kind: "verify".into(),
            message: format!("failed checks: {failed:?}"),
        })
    }
}

fn run(cli: Cli) -> CmdResult {
    match &cli.command {
        Command::Generate { config, out_topology, out_tables, tables_json } => {
            cmd_generate(config, out_topology.as_deref(), out_tables.as_deref(), *tables_json)
        }
        Command::Route(a) => cmd_route(a),
        Command::Fib { cfg, sat } => cmd_fib(cfg, sat),
        Command::Cells(a) => cmd_cells(a),
        Command::Size { rtt_ms, elevation_deg, base_n } => cmd_size(*rtt_ms, *elevation_deg, *base_n),
        Command::Simulate { scenario, out } => cmd_simulate(scenario, out.as_deref()),
        Command::Verify { json } => cmd_verify(*json),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // Reader went away (e.g. piped into head); nothing left to report.
        Err(f) if f.kind == "closed" => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({"error": f.kind, "message": f.message}));
            ExitCode::from(2)
        }
    }
}
