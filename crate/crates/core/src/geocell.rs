//! Hierarchical ground cells bounded by satellite ground tracks.
//!
//! A ground point has two (α, γ) representations, one on an ascending pass
//! and one on a descending pass. The trajectory labels
//!
//! ```text
//! U = α_asc + γ_asc / (N-m)      V = α_desc + γ_desc / (N-m)
//! ```
//!
//! are constant along every ground track, and the tracks of the constellation
//! sit at multiples of Δ_ℓ = 2π / ((N-m)·N^ℓ). Cells at level ℓ are the squares
//! of that (U, V) lattice. W = U - V depends on latitude only; it is 0 on the
//! northern border (latitude β) and (N-m-1)·Δ_0 on the southern one.
//!
//! Every square of the torus gets an ID, so the count is (N-m)²·N^(2k).
//! Squares whose whole W range lies poleward of ±β hold no ground points
//! ("phantom" cells); the border squares are triangles.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::io::{Read, Write};

use crate::constellation::{address_to_elements, ConstellationConfig, SatAddress};
use crate::error::{Error, Result};
use crate::geom::{self, LatLon, PhysicalConstants};

/// Points this far (in deepest-level cell widths) below a boundary snap up.
const SNAP_CELLS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    /// (row, col) per level, level 0 first.
    pub levels: Vec<(u32, u32)>,
}

impl CellId {
    pub fn new(levels: Vec<(u32, u32)>) -> Self {
        CellId { levels }
    }

    pub fn level(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn parent(&self) -> Option<CellId> {
        (self.levels.len() > 1).then(|| CellId {
            levels: self.levels[..self.levels.len() - 1].to_vec(),
        })
    }

    pub fn truncate(&self, level: u32) -> CellId {
        CellId {
            levels: self.levels[..=level as usize].to_vec(),
        }
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (r, c)) in self.levels.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{r},{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoCoord {
    pub alpha_rad: f64,
    pub gamma_rad: f64,
}

impl GeoCoord {
    pub fn new(alpha_rad: f64, gamma_rad: f64) -> Self {
        GeoCoord {
            alpha_rad: geom::wrap_two_pi(alpha_rad),
            gamma_rad: geom::wrap_two_pi(gamma_rad),
        }
    }
}

/// Both branch representations of a ground point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeoSolutions {
    pub ascending: GeoCoord,
    pub descending: GeoCoord,
    /// The point lay poleward of ±β and was moved onto the border.
    pub clamped: bool,
}

impl GeoSolutions {
    /// One entry when both branches coincide (on the border), else two.
    pub fn coords(&self) -> Vec<GeoCoord> {
        let same = (self.ascending.alpha_rad - self.descending.alpha_rad).abs() < 1e-15
            && (self.ascending.gamma_rad - self.descending.gamma_rad).abs() < 1e-15;
        if same {
            vec![self.ascending]
        } else {
            vec![self.ascending, self.descending]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellLocation {
    pub ascending: GeoCoord,
    pub descending: GeoCoord,
    /// The ID names a square with no ground area; coordinates are clamped.
    pub phantom: bool,
}

/// α of the reference point of the first cell in each row, per level.
///
/// Level ℓ holds one block of 2N-1 rows per row path above it, chained as
/// `index = index * (2N-1) + row`; level 0 holds N-m rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alpha0Table {
    pub n: u32,
    pub m: u32,
    pub k: u32,
    pub inclination_rad: f64,
    pub levels: Vec<Vec<f64>>,
}

const TABLE_MAGIC: &[u8; 4] = b"FRA0";
const TABLE_VERSION: u16 = 1;

impl Alpha0Table {
    pub fn entry_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<usize> {
        let mut bytes = 0;
        let mut put = |w: &mut W, b: &[u8]| -> std::io::Result<()> {
            bytes += b.len();
            w.write_all(b)
        };
        put(&mut w, TABLE_MAGIC)?;
        put(&mut w, &TABLE_VERSION.to_le_bytes())?;
        put(&mut w, &self.n.to_le_bytes())?;
        put(&mut w, &self.m.to_le_bytes())?;
        put(&mut w, &self.k.to_le_bytes())?;
        put(&mut w, &self.inclination_rad.to_le_bytes())?;
        for level in &self.levels {
            put(&mut w, &(level.len() as u64).to_le_bytes())?;
            for v in level {
                put(&mut w, &v.to_le_bytes())?;
            }
        }
        Ok(bytes)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_binary(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        fn take<R: Read, const B: usize>(r: &mut R) -> Result<[u8; B]> {
            let mut buf = [0u8; B];
            r.read_exact(&mut buf)
                .map_err(|e| Error::Format(format!("truncated table: {e}")))?;
            Ok(buf)
        }
        if &take::<_, 4>(&mut r)? != TABLE_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = u16::from_le_bytes(take(&mut r)?);
        if version != TABLE_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let n = u32::from_le_bytes(take(&mut r)?);
        let m = u32::from_le_bytes(take(&mut r)?);
        let k = u32::from_le_bytes(take(&mut r)?);
        let inclination_rad = f64::from_le_bytes(take(&mut r)?);
        if n < 3 || m >= n || k > 16 {
            return Err(Error::Format(format!("implausible header n={n} m={m} k={k}")));
        }
        let mut levels = Vec::with_capacity(k as usize + 1);
        for level in 0..=k {
            let len = u64::from_le_bytes(take(&mut r)?);
            let expect = table_len(n, m, level);
            if Some(len) != expect {
                return Err(Error::Format(format!(
                    "level {level} has {len} entries, expected {expect:?}"
                )));
            }
            let mut v = Vec::with_capacity(len as usize);
            for _ in 0..len {
                v.push(f64::from_le_bytes(take(&mut r)?));
            }
            levels.push(v);
        }
        Ok(Alpha0Table {
            n,
            m,
            k,
            inclination_rad,
            levels,
        })
    }
}

fn table_len(n: u32, m: u32, level: u32) -> Option<u64> {
    ((2 * n - 1) as u64)
        .checked_pow(level)?
        .checked_mul((n - m) as u64)
}

/// Lattice parameters for one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGrid {
    pub n: u32,
    pub m: u32,
    pub k: u32,
    pub inclination_rad: f64,
    span0: u64,
}

impl CellGrid {
    pub fn new(cfg: &ConstellationConfig) -> Result<Self> {
        let span0 = (cfg.n - cfg.m) as u64;
        if cfg.inclination_rad.sin() < 1e-9 {
            return Err(Error::Config("equatorial orbits do not span a cell lattice".into()));
        }
        // Latitude must be monotone in W for the lattice to be one-to-one.
        if cfg.inclination_rad.cos() * span0 as f64 <= 1.0 {
            return Err(Error::Config(format!(
                "cell lattice needs cos(inclination) > 1/(N-m); got cos = {:.4}, N-m = {span0}",
                cfg.inclination_rad.cos()
            )));
        }
        let deepest = (cfg.n as u64)
            .checked_pow(cfg.k)
            .and_then(|p| p.checked_mul(span0))
            .and_then(|s| s.checked_mul(s));
        if deepest.is_none() {
            return Err(Error::Config("cell index space overflows 64 bits".into()));
        }
        Ok(CellGrid {
            n: cfg.n,
            m: cfg.m,
            k: cfg.k,
            inclination_rad: cfg.inclination_rad,
            span0,
        })
    }

    fn mm(&self) -> f64 {
        self.span0 as f64
    }

    /// Lattice cells around the torus at `level`: (N-m)·N^level.
    pub fn span(&self, level: u32) -> u64 {
        self.span0 * (self.n as u64).pow(level)
    }

    /// Lattice spacing Δ_level.
    pub fn delta(&self, level: u32) -> f64 {
        TAU / self.span(level) as f64
    }

    /// Diagonal index of the southern border, (N-m-1)·N^level.
    pub fn south(&self, level: u32) -> u64 {
        (self.span0 - 1) * (self.n as u64).pow(level)
    }

    fn theta(&self, gamma: f64) -> f64 {
        let (s, c) = gamma.sin_cos();
        (s * self.inclination_rad.cos()).atan2(c)
    }

    /// W as a function of the ascending phase γ ∈ [-π/2, π/2].
    pub fn w_of_gamma(&self, gamma_asc: f64) -> f64 {
        PI - 2.0 * self.theta(gamma_asc) - (PI - 2.0 * gamma_asc) / self.mm()
    }

    /// Inverse of `w_of_gamma` by bisection on the closed expression.
    pub fn gamma_of_w(&self, w: f64) -> f64 {
        let w = w.clamp(0.0, self.w_max());
        geom::bisect(|g| self.w_of_gamma(g) - w, -FRAC_PI_2, FRAC_PI_2).unwrap_or(FRAC_PI_2)
    }

    pub fn w_max(&self) -> f64 {
        (self.mm() - 1.0) * self.delta(0)
    }

    pub fn cell_count(&self) -> u64 {
        let s = self.span(self.k);
        s * s
    }

    pub fn to_latlon(&self, c: GeoCoord) -> LatLon {
        let lat = (c.gamma_rad.sin() * self.inclination_rad.sin())
            .clamp(-1.0, 1.0)
            .asin();
        LatLon::new(lat, c.alpha_rad + self.theta(c.gamma_rad))
    }

    pub fn to_geocoords(&self, p: LatLon) -> GeoSolutions {
        let ratio = p.lat_rad.sin() / self.inclination_rad.sin();
        let clamped = ratio.abs() > 1.0;
        let ga = ratio.clamp(-1.0, 1.0).asin();
        let th = self.theta(ga);
        let aa = p.lon_rad - th;
        GeoSolutions {
            ascending: GeoCoord::new(aa, ga),
            descending: GeoCoord::new(aa + 2.0 * th - PI, PI - ga),
            clamped,
        }
    }

    /// (U, W) of a ground point; W is clamped into the physical band.
    pub fn trajectory_coords(&self, p: LatLon) -> (f64, f64, bool) {
        let ratio = p.lat_rad.sin() / self.inclination_rad.sin();
        let clamped = ratio.abs() > 1.0;
        let ga = ratio.clamp(-1.0, 1.0).asin();
        let u = p.lon_rad - self.theta(ga) + ga / self.mm();
        let w = self.w_of_gamma(ga).clamp(0.0, self.w_max());
        (geom::wrap_two_pi(u), w, clamped)
    }

    pub fn validate(&self, cell: &CellId) -> Result<()> {
        if cell.levels.is_empty() || cell.levels.len() > self.k as usize + 1 {
            return Err(Error::Config(format!(
                "cell {cell} has {} levels, expected 1..={}",
                cell.levels.len(),
                self.k + 1
            )));
        }
        let (r0, c0) = cell.levels[0];
        for v in [r0, c0] {
            if v as u64 >= self.span0 {
                return Err(Error::Range {
                    what: "level-0 cell digit",
                    value: v as u64,
                    bound: self.span0,
                });
            }
        }
        for &(r, c) in &cell.levels[1..] {
            if r >= 2 * self.n - 1 {
                return Err(Error::Range {
                    what: "cell row",
                    value: r as u64,
                    bound: (2 * self.n - 1) as u64,
                });
            }
            let cap = row_capacity(self.n, r);
            if c >= cap {
                return Err(Error::Range {
                    what: "cell column",
                    value: c as u64,
                    bound: cap as u64,
                });
            }
        }
        Ok(())
    }

    /// Lattice square (I, J) of a cell at its own level.
    pub fn to_ij(&self, cell: &CellId) -> (u64, u64) {
        let (r0, c0) = cell.levels[0];
        let mut i = c0 as u64;
        let mut j = (c0 as u64 + self.span0 - r0 as u64) % self.span0;
        let n = self.n as i64;
        for &(r, c) in &cell.levels[1..] {
            let d = r as i64 - (n - 1);
            let a = c as i64 + d.max(0);
            let b = a - d;
            i = i * self.n as u64 + a as u64;
            j = j * self.n as u64 + b as u64;
        }
        (i, j)
    }

    pub fn from_ij(&self, level: u32, i: u64, j: u64) -> CellId {
        let n = self.n as u64;
        let mut levels = Vec::with_capacity(level as usize + 1);
        let (mut ii, mut jj) = (i, j);
        for _ in 0..level {
            let a = (ii % n) as i64;
            let b = (jj % n) as i64;
            let d = a - b;
            levels.push(((d + n as i64 - 1) as u32, (a - d.max(0)) as u32));
            ii /= n;
            jj /= n;
        }
        let row0 = (ii + self.span0 - jj) % self.span0;
        levels.push((row0 as u32, ii as u32));
        levels.reverse();
        CellId { levels }
    }

    /// Diagonal index D = (I - J) mod span.
    pub fn diagonal(&self, cell: &CellId) -> u64 {
        let (i, j) = self.to_ij(cell);
        let s = self.span(cell.level());
        (i + s - j) % s
    }

    pub fn is_phantom(&self, cell: &CellId) -> bool {
        self.diagonal(cell) > self.south(cell.level())
    }

    /// Cell at `level` containing `p`; lower edges are inclusive.
    pub fn locate(&self, p: LatLon, level: u32) -> CellId {
        let (u, w, _) = self.trajectory_coords(p);
        let snap = SNAP_CELLS * self.delta(self.k);
        let d = self.delta(level);
        let s = self.span(level);
        let uu = u + snap;
        let vv = u - w + snap;
        let i = ((uu / d).floor() as i64).rem_euclid(s as i64) as u64;
        let mut j = ((vv / d).floor() as i64).rem_euclid(s as i64) as u64;
        let south = self.south(level);
        let diag = (i + s - j) % s;
        if diag > south {
            // Rounding pushed a border point into the empty band; step back.
            if diag - south <= s - diag {
                j = (j + 1) % s;
            } else {
                j = (j + s - 1) % s;
            }
        }
        self.from_ij(level, i, j)
    }

    /// Independent membership test: half-open square and non-empty W overlap.
    pub fn contains(&self, cell: &CellId, p: LatLon) -> bool {
        let level = cell.level();
        let (u, w, _) = self.trajectory_coords(p);
        let snap = SNAP_CELLS * self.delta(self.k);
        let d = self.delta(level);
        let s = self.span(level) as f64;
        let (i, j) = self.to_ij(cell);
        let fu = ((u + snap) / d).rem_euclid(s);
        let fv = ((u - w + snap) / d).rem_euclid(s);
        let inside = |x: f64, lo: u64| {
            let off = (x - lo as f64).rem_euclid(s);
            off < 1.0
        };
        inside(fu, i) && inside(fv, j) && !self.is_phantom(cell)
    }

    pub fn subdivide(&self, parent: &CellId) -> Result<Vec<CellId>> {
        self.validate(parent)?;
        if parent.level() >= self.k {
            return Err(Error::Level(self.k));
        }
        Ok(children(parent, self.n))
    }

    /// All IDs at `level` in lexicographic digit order.
    pub fn enumerate(&self, level: u32) -> Vec<CellId> {
        let mut out = Vec::new();
        for r in 0..self.span0 as u32 {
            for c in 0..self.span0 as u32 {
                out.push(CellId::new(vec![(r, c)]));
            }
        }
        for _ in 0..level {
            out = out.iter().flat_map(|p| children(p, self.n)).collect();
        }
        out
    }

    /// (U, W) of the reference point of a cell: square centre, or the
    /// centroid of the physical triangle on a border row.
    fn reference_uw(&self, level: u32, i: u64, diag: u64) -> (f64, f64, bool) {
        let d = self.delta(level);
        let s = self.span(level);
        let south = self.south(level);
        let u = (i as f64 + 0.5) * d;
        let (shift, w, phantom) = if diag == 0 {
            (1.0 / 6.0, d / 3.0, false)
        } else if diag == south {
            (-1.0 / 6.0, south as f64 * d - d / 3.0, false)
        } else if diag < south {
            (0.0, diag as f64 * d, false)
        } else if diag - south <= s - diag {
            (-1.0 / 6.0, south as f64 * d - d / 3.0, true)
        } else {
            (1.0 / 6.0, d / 3.0, true)
        };
        (u + shift * d, w, phantom)
    }

    fn location_from(&self, u: f64, gamma_asc: f64, phantom: bool) -> CellLocation {
        let aa = u - gamma_asc / self.mm();
        let th = self.theta(gamma_asc);
        CellLocation {
            ascending: GeoCoord::new(aa, gamma_asc),
            descending: GeoCoord::new(aa + 2.0 * th - PI, PI - gamma_asc),
            phantom,
        }
    }

    /// Reference point computed directly, without tables.
    pub fn reference_location(&self, cell: &CellId) -> CellLocation {
        let level = cell.level();
        let (i, _) = self.to_ij(cell);
        let (u, w, phantom) = self.reference_uw(level, i, self.diagonal(cell));
        self.location_from(u, self.gamma_of_w(w), phantom)
    }
}

/// Cells in row `row` of a subdivided parent: N - |row - (N-1)|.
pub fn row_capacity(n: u32, row: u32) -> u32 {
    n - (row as i64 - (n as i64 - 1)).unsigned_abs() as u32
}

fn children(parent: &CellId, n: u32) -> Vec<CellId> {
    let mut out = Vec::with_capacity((n * n) as usize);
    for r in 0..2 * n - 1 {
        for c in 0..row_capacity(n, r) {
            let mut levels = parent.levels.clone();
            levels.push((r, c));
            out.push(CellId { levels });
        }
    }
    out
}

/// (N-m)²·N^(2k).
pub fn cell_count(cfg: &ConstellationConfig) -> u64 {
    let s = (cfg.n - cfg.m) as u64 * (cfg.n as u64).pow(cfg.k);
    s * s
}

/// Ascending phase at which satellite 0's descending pass has trajectory gap `w`.
///
/// Bisection in time on the propagated sub-point; the pass runs from the
/// northern turning point (t = T/4, W = 0) to the southern one (t = 3T/4).
fn gamma_on_track(grid: &CellGrid, cfg: &ConstellationConfig, w: f64) -> f64 {
    let el = address_to_elements(&SatAddress::zero(cfg.layers()), cfg);
    let consts: PhysicalConstants = cfg.consts;
    let period = cfg.period_s();
    let sb = grid.inclination_rad.sin();
    let gamma_at = |t: f64| {
        let p = geom::subpoint(&el, t, &consts);
        (p.lat_rad.sin() / sb).clamp(-1.0, 1.0).asin()
    };
    let (mut lo, mut hi) = (0.25 * period, 0.75 * period);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g = gamma_at(mid);
        let wm = grid.w_of_gamma(g);
        if (wm - w).abs() < 1e-14 {
            return g;
        }
        if wm < w {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    gamma_at(0.5 * (lo + hi))
}

/// Precomputes α of every row's reference point at every level.
pub fn build_alpha0_tables(cfg: &ConstellationConfig) -> Result<Alpha0Table> {
    let grid = CellGrid::new(cfg)?;
    let n = cfg.n as u64;
    let rows = 2 * n - 1;
    let mut cache: HashMap<u64, f64> = HashMap::new();
    let mut levels = Vec::with_capacity(cfg.k as usize + 1);
    for level in 0..=cfg.k {
        let len = table_len(cfg.n, cfg.m, level)
            .ok_or_else(|| Error::Config("alpha0 table size overflows".into()))?;
        let mut entries = Vec::with_capacity(len as usize);
        for idx in 0..len {
            // Unchain the row path: row0 is the most significant digit.
            let mut path = Vec::with_capacity(level as usize + 1);
            let mut rest = idx;
            for _ in 0..level {
                path.push(rest % rows);
                rest /= rows;
            }
            path.push(rest);
            path.reverse();
            let (u_row, diag) = row_offset(&grid, &path);
            let (u_ref, w, _) = grid.reference_uw(level, u_row, diag);
            let key = w.to_bits();
            let gamma = *cache
                .entry(key)
                .or_insert_with(|| gamma_on_track(&grid, cfg, w));
            entries.push(u_ref - gamma / grid.mm());
        }
        levels.push(entries);
    }
    Ok(Alpha0Table {
        n: cfg.n,
        m: cfg.m,
        k: cfg.k,
        inclination_rad: cfg.inclination_rad,
        levels,
    })
}

/// Lattice column of a row's first cell and the row's diagonal index.
fn row_offset(grid: &CellGrid, path: &[u64]) -> (u64, u64) {
    let n = grid.n as i64;
    let mut i: i64 = 0;
    let mut diag: i64 = path[0] as i64;
    let mut span = grid.span0 as i64;
    for &r in &path[1..] {
        let d = r as i64 - (n - 1);
        i = i * n + d.max(0);
        span *= n;
        diag = (diag * n + d).rem_euclid(span);
    }
    (i as u64, diag as u64)
}

/// Cell system with its precomputed tables.
#[derive(Debug, Clone)]
pub struct CellSystem {
    pub grid: CellGrid,
    pub tables: Alpha0Table,
}

impl CellSystem {
    pub fn new(cfg: &ConstellationConfig) -> Result<Self> {
        Ok(CellSystem {
            grid: CellGrid::new(cfg)?,
            tables: build_alpha0_tables(cfg)?,
        })
    }

    pub fn from_tables(cfg: &ConstellationConfig, tables: Alpha0Table) -> Result<Self> {
        if (tables.n, tables.m, tables.k) != (cfg.n, cfg.m, cfg.k) {
            return Err(Error::Format(format!(
                "tables are for N={} m={} k={}",
                tables.n, tables.m, tables.k
            )));
        }
        Ok(CellSystem {
            grid: CellGrid::new(cfg)?,
            tables,
        })
    }

    pub fn locate(&self, p: LatLon) -> CellId {
        self.grid.locate(p, self.grid.k)
    }

    pub fn location(&self, cell: &CellId) -> Result<CellLocation> {
        cell_to_location(cell, cell.level(), &self.grid, &self.tables)
    }

    /// Reference point of the cell on the ground.
    pub fn center(&self, cell: &CellId) -> Result<LatLon> {
        Ok(self.grid.to_latlon(self.location(cell)?.ascending))
    }
}

/// Table lookup: O(target_level + 1) probes.
pub fn cell_to_location(
    cell: &CellId,
    target_level: u32,
    grid: &CellGrid,
    tables: &Alpha0Table,
) -> Result<CellLocation> {
    grid.validate(cell)?;
    if target_level > cell.level() {
        return Err(Error::Level(cell.level()));
    }
    let n = grid.n as i64;
    let rows = (2 * grid.n - 1) as u64;
    let (r0, c0) = cell.levels[0];
    let mut index = r0 as u64;
    let mut d_alpha = c0 as f64 * grid.delta(0);
    let mut u_row = 0.0;
    for level in 1..=target_level {
        let (r, c) = cell.levels[level as usize];
        let dl = grid.delta(level);
        let d = r as i64 - (n - 1);
        index = index * rows + r as u64;
        d_alpha += c as f64 * dl;
        u_row += d.max(0) as f64 * dl;
    }
    let alpha0 = tables.levels[target_level as usize][index as usize];
    let diag = grid.diagonal(&cell.truncate(target_level));
    // Reference U of the row's first cell; γ follows from U = α + γ/(N-m).
    let (u_shift, _, phantom) = grid.reference_uw(target_level, 0, diag);
    let u_first = u_row + u_shift;
    let gamma = grid.mm() * (u_first - alpha0);
    Ok(grid.location_from(u_first + d_alpha, gamma, phantom))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: u32, m: u32, k: u32) -> ConstellationConfig {
        ConstellationConfig::new(n, m, k, 1500.0, 53.0, 25.0).unwrap()
    }

    #[test]
    fn enumeration_matches_count_and_ij_round_trips() {
        for (n, m, k) in [(8, 6, 0), (8, 6, 1), (4, 2, 2), (5, 3, 1)] {
            let c = cfg(n, m, k);
            let g = CellGrid::new(&c).unwrap();
            let all = g.enumerate(k);
            assert_eq!(all.len() as u64, cell_count(&c));
            let mut seen = std::collections::HashSet::new();
            for cell in &all {
                g.validate(cell).unwrap();
                let (i, j) = g.to_ij(cell);
                assert!(seen.insert((i, j)), "{cell} collides");
                assert_eq!(&g.from_ij(k, i, j), cell);
            }
        }
    }

    #[test]
    fn table_sizes_for_sixteen_eight() {
        let c = cfg(16, 8, 2);
        let t = build_alpha0_tables(&c).unwrap();
        let lens: Vec<usize> = t.levels.iter().map(|l| l.len() * 8).collect();
        assert_eq!(lens, vec![64, 1984, 61504]);
        assert_eq!(table_len(16, 8, 3), Some(238_328));
    }

    #[test]
    fn binary_round_trip() {
        let c = cfg(8, 6, 1);
        let t = build_alpha0_tables(&c).unwrap();
        let bytes = t.to_bytes();
        assert_eq!(Alpha0Table::read_binary(&bytes[..]).unwrap(), t);
        assert!(Alpha0Table::read_binary(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Alpha0Table::read_binary(&bad[..]).is_err());
    }

    #[test]
    fn track_phase_agrees_with_closed_inverse() {
        let c = cfg(16, 8, 1);
        let g = CellGrid::new(&c).unwrap();
        for s in 0..=20 {
            let w = g.w_max() * s as f64 / 20.0;
            let a = gamma_on_track(&g, &c, w);
            let b = g.gamma_of_w(w);
            assert!((a - b).abs() < 1e-9, "w={w}: {a} vs {b}");
        }
    }

    #[test]
    fn table_lookup_matches_direct_reference() {
        for (n, m, k) in [(8, 6, 1), (16, 8, 1), (4, 2, 2)] {
            let c = cfg(n, m, k);
            let sys = CellSystem::new(&c).unwrap();
            for level in 0..=k {
                for cell in sys.grid.enumerate(level) {
                    let a = sys.location(&cell).unwrap();
                    let b = sys.grid.reference_location(&cell);
                    assert_eq!(a.phantom, b.phantom);
                    let da = geom::wrap_pi(a.ascending.alpha_rad - b.ascending.alpha_rad).abs();
                    let dg = geom::wrap_pi(a.ascending.gamma_rad - b.ascending.gamma_rad).abs();
                    assert!(da < 1e-9 && dg < 1e-9, "{cell}: {a:?} vs {b:?}");
                }
            }
        }
    }

    #[test]
    fn reference_points_lie_in_their_cells() {
        let c = cfg(8, 6, 1);
        let sys = CellSystem::new(&c).unwrap();
        for level in 0..=1 {
            for cell in sys.grid.enumerate(level) {
                if sys.grid.is_phantom(&cell) {
                    continue;
                }
                let p = sys.grid.to_latlon(sys.location(&cell).unwrap().ascending);
                assert_eq!(sys.grid.locate(p, level), cell);
                assert!(sys.grid.contains(&cell, p));
            }
        }
    }

    #[test]
    fn both_passes_name_the_same_ground_point() {
        let g = CellGrid::new(&cfg(16, 8, 1)).unwrap();
        let p = LatLon::from_degrees(31.0, -97.0);
        let s = g.to_geocoords(p);
        for c in s.coords() {
            let q = g.to_latlon(c);
            assert!(geom::great_circle_range_latlon(p, q) < 1e-12);
        }
    }

    #[test]
    fn parents_contain_children() {
        let c = cfg(8, 6, 2);
        let g = CellGrid::new(&c).unwrap();
        for lat in (-50..=50).step_by(7) {
            for lon in (-180..180).step_by(13) {
                let p = LatLon::from_degrees(lat as f64, lon as f64);
                let leaf = g.locate(p, 2);
                for level in 0..2 {
                    assert_eq!(g.locate(p, level), leaf.truncate(level));
                }
            }
        }
    }

    #[test]
    fn rejects_steep_inclination() {
        let c = ConstellationConfig::new(8, 6, 0, 1500.0, 70.0, 25.0).unwrap();
        assert!(CellGrid::new(&c).is_err());
    }
}
