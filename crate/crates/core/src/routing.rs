//! Topological routing over the digit rings.

use serde::Serialize;

use crate::addressing::bits_for;
use crate::constellation::{ConstellationConfig, Direction, SatAddress, Topology};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Path {
    pub nodes: Vec<SatAddress>,
}

impl Path {
    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn source(&self) -> &SatAddress {
        &self.nodes[0]
    }

    pub fn destination(&self) -> &SatAddress {
        self.nodes.last().expect("paths are never empty")
    }

    /// (layer, direction) of each hop; None if two entries are not adjacent.
    pub fn hop_labels(&self, n: u32) -> Option<Vec<(u32, Direction)>> {
        self.nodes
            .windows(2)
            .map(|w| hop_label(&w[0], &w[1], n))
            .collect()
    }

    pub fn is_simple(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.nodes.iter().all(|a| seen.insert(a))
    }
}

/// Layer and direction of a single ring hop from `a` to `b`.
pub fn hop_label(a: &SatAddress, b: &SatAddress, n: u32) -> Option<(u32, Direction)> {
    if a.digits.len() != b.digits.len() {
        return None;
    }
    let mut diff = a
        .digits
        .iter()
        .zip(&b.digits)
        .enumerate()
        .filter(|(_, (x, y))| x != y);
    let (layer, (&x, &y)) = diff.next()?;
    if diff.next().is_some() {
        return None;
    }
    if (x + 1) % n == y {
        Some((layer as u32, Direction::Plus))
    } else if (y + 1) % n == x {
        Some((layer as u32, Direction::Minus))
    } else {
        None
    }
}

/// How a ring hop direction is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum DirectionRule {
    /// Shorter arc; a tie at exactly N/2 goes counter-clockwise.
    #[default]
    MinDistance,
    /// The pseudo-code's literal test, `(s - d) mod N <= N/2 => +1`. Kept for study.
    Literal,
}

/// Direction and hop count to move digit `s` to `d` on an N-ring.
pub fn ring_step(s: u32, d: u32, n: u32) -> (Direction, u32) {
    ring_step_with(s, d, n, DirectionRule::MinDistance)
}

pub fn ring_step_with(s: u32, d: u32, n: u32, rule: DirectionRule) -> (Direction, u32) {
    let cw = (d + n - s) % n;
    let ccw = (s + n - d) % n;
    if cw == 0 {
        return (Direction::Plus, 0);
    }
    let plus = match rule {
        DirectionRule::MinDistance => cw < ccw,
        DirectionRule::Literal => 2 * ccw <= n,
    };
    if plus {
        (Direction::Plus, cw)
    } else {
        (Direction::Minus, ccw)
    }
}

/// Identity permutation [0, 1, ..., k].
pub fn identity_order(cfg: &ConstellationConfig) -> Vec<usize> {
    (0..cfg.layers()).collect()
}

fn check_permutation(perm: &[usize], layers: usize) -> Result<()> {
    let mut seen = vec![false; layers];
    if perm.len() != layers {
        return Err(Error::Config(format!(
            "permutation has {} entries, expected {layers}",
            perm.len()
        )));
    }
    for &p in perm {
        if p >= layers || seen[p] {
            return Err(Error::Config(format!("{perm:?} is not a permutation of 0..{layers}")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Corrects digits layer by layer in the order `perm`.
pub fn shortest_path(s: &SatAddress, d: &SatAddress, perm: &[usize], topo: &Topology) -> Result<Path> {
    shortest_path_with(s, d, perm, &topo.config, DirectionRule::MinDistance)
}

pub fn shortest_path_with(
    s: &SatAddress,
    d: &SatAddress,
    perm: &[usize],
    cfg: &ConstellationConfig,
    rule: DirectionRule,
) -> Result<Path> {
    s.validate(cfg)?;
    d.validate(cfg)?;
    check_permutation(perm, cfg.layers())?;
    let mut cur = s.clone();
    let mut nodes = vec![cur.clone()];
    for &layer in perm {
        let (dir, dist) = ring_step_with(cur.digits[layer], d.digits[layer], cfg.n, rule);
        for _ in 0..dist {
            cur = cur.step(layer, dir, cfg.n);
            nodes.push(cur.clone());
        }
    }
    Ok(Path { nodes })
}

/// Sum of per-layer ring distances.
pub fn hop_distance(s: &SatAddress, d: &SatAddress, n: u32) -> u32 {
    s.digits
        .iter()
        .zip(&d.digits)
        .map(|(&a, &b)| ring_step(a, b, n).1)
        .sum()
}

/// Worst-case hop count ceil((k+1)·N/2).
pub fn hop_bound(cfg: &ConstellationConfig) -> u32 {
    (cfg.layers() as u32 * cfg.n).div_ceil(2)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FibEntry {
    pub layer: u32,
    /// Leading bits of the relative digit, MSB first.
    pub prefix: u32,
    pub prefix_len: u32,
    pub dir: Direction,
}

impl FibEntry {
    /// Prefix as a string padded with `*`, e.g. "01*".
    pub fn pattern(&self, width: u32) -> String {
        let mut s = String::with_capacity(width as usize);
        for i in 0..width {
            if i < self.prefix_len {
                let bit = (self.prefix >> (self.prefix_len - 1 - i)) & 1;
                s.push(if bit == 1 { '1' } else { '0' });
            } else {
                s.push('*');
            }
        }
        s
    }

    fn matches(&self, rel: u32, width: u32) -> bool {
        self.prefix_len == 0 || rel >> (width - self.prefix_len) == self.prefix
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fib {
    pub owner: SatAddress,
    pub n: u32,
    pub digit_bits: u32,
    pub entries: Vec<FibEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FibAction {
    Deliver,
    Forward { layer: u32, dir: Direction },
}

/// Minimal prefix cover of [lo, hi] in a `width`-bit space.
fn range_prefixes(lo: u32, hi: u32, width: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    let mut lo = lo as u64;
    let hi = hi as u64;
    while lo <= hi {
        let mut size = 0u32;
        while size < width {
            let block = 1u64 << (size + 1);
            if lo % block != 0 || lo + block - 1 > hi {
                break;
            }
            size += 1;
        }
        out.push(((lo >> size) as u32, width - size));
        lo += 1u64 << size;
    }
    out
}

/// Relative-digit prefix FIB; one block of entries per layer.
pub fn build_fib(owner: &SatAddress, cfg: &ConstellationConfig) -> Result<Fib> {
    owner.validate(cfg)?;
    let n = cfg.n;
    let width = bits_for(n as u64);
    // +1 for r in [1, last_plus]; -1 for the rest, including the N/2 tie.
    let last_plus = (n - 1) / 2;
    let top = (1u32 << width) - 1;
    let mut entries = Vec::new();
    for layer in 0..cfg.layers() as u32 {
        if last_plus >= 1 {
            for (prefix, prefix_len) in range_prefixes(1, last_plus, width) {
                entries.push(FibEntry {
                    layer,
                    prefix,
                    prefix_len,
                    dir: Direction::Plus,
                });
            }
        }
        // Codes >= N never occur, so they may be absorbed by the -1 block.
        for (prefix, prefix_len) in range_prefixes(last_plus + 1, top, width) {
            entries.push(FibEntry {
                layer,
                prefix,
                prefix_len,
                dir: Direction::Minus,
            });
        }
    }
    Ok(Fib {
        owner: owner.clone(),
        n,
        digit_bits: width,
        entries,
    })
}

/// Largest FIB size 2(k+1)·ceil(log2(N/2)).
pub fn fib_bound(cfg: &ConstellationConfig) -> usize {
    let half = cfg.n as f64 / 2.0;
    2 * cfg.layers() * half.log2().ceil().max(0.0) as usize
}

/// Highest differing layer first, then prefix match on the relative digit.
pub fn fib_lookup(fib: &Fib, d: &SatAddress) -> FibAction {
    for layer in (0..fib.owner.digits.len()).rev() {
        let s = fib.owner.digits[layer];
        let t = d.digits[layer];
        if s == t {
            continue;
        }
        let rel = (t + fib.n - s) % fib.n;
        for e in fib.entries.iter().filter(|e| e.layer == layer as u32) {
            if e.matches(rel, fib.digit_bits) {
                return FibAction::Forward {
                    layer: e.layer,
                    dir: e.dir,
                };
            }
        }
        unreachable!("fib blocks cover every non-zero relative digit");
    }
    FibAction::Deliver
}

/// Why fewer than 2(k+1) disjoint paths came back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Shortfall {
    SameEndpoints,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DisjointPaths {
    pub paths: Vec<Path>,
    pub shortfall: Option<Shortfall>,
}

/// 2(k+1) internally node-disjoint paths from `s` to `d`.
///
/// Each layer is first reflected so that the relative digit r_j lies in
/// [0, N/2]. For each leading layer j there are two paths:
///
/// * `+`: walk layer j forward to r_j, then the other layers forward in
///   cyclic order j+1, j+2, ... (if r_j = 0: step +1 on j first, back at the end);
/// * `-`: walk layer j backward until one short of r_j, fix the other layers
///   forward in the same cyclic order, then take the last step on j
///   (if r_j = 0: step -1 on j first, back at the end).
pub fn disjoint_paths(s: &SatAddress, d: &SatAddress, topo: &Topology) -> Result<DisjointPaths> {
    let cfg = &topo.config;
    s.validate(cfg)?;
    d.validate(cfg)?;
    if s == d {
        return Ok(DisjointPaths {
            paths: Vec::new(),
            shortfall: Some(Shortfall::SameEndpoints),
        });
    }
    let n = cfg.n as i64;
    let layers = cfg.layers();
    let mut sign = vec![1i64; layers];
    let mut rel = vec![0i64; layers];
    for l in 0..layers {
        let cw = (d.digits[l] as i64 - s.digits[l] as i64).rem_euclid(n);
        if 2 * cw > n {
            sign[l] = -1;
            rel[l] = n - cw;
        } else {
            rel[l] = cw;
        }
    }
    let real = |pos: &[i64]| -> SatAddress {
        SatAddress::new(
            (0..layers)
                .map(|l| (s.digits[l] as i64 + sign[l] * pos[l]).rem_euclid(n) as u32)
                .collect(),
        )
    };

    let mut paths = Vec::with_capacity(2 * layers);
    for j in 0..layers {
        let order: Vec<usize> = (1..layers).map(|o| (j + o) % layers).collect();
        let forward_rest = |pos: &mut Vec<i64>, nodes: &mut Vec<SatAddress>| {
            for &l in &order {
                while pos[l] != rel[l] {
                    pos[l] += 1;
                    nodes.push(real(pos));
                }
            }
        };

        let mut pos = vec![0i64; layers];
        let mut nodes = vec![real(&pos)];
        if rel[j] > 0 {
            while pos[j] != rel[j] {
                pos[j] += 1;
                nodes.push(real(&pos));
            }
            forward_rest(&mut pos, &mut nodes);
        } else {
            pos[j] = 1;
            nodes.push(real(&pos));
            forward_rest(&mut pos, &mut nodes);
            pos[j] = 0;
            nodes.push(real(&pos));
        }
        paths.push(Path { nodes });

        let mut pos = vec![0i64; layers];
        let mut nodes = vec![real(&pos)];
        pos[j] = -1;
        nodes.push(real(&pos));
        if rel[j] > 0 {
            // Backward around the ring to r_j + 1, i.e. position r_j + 1 - N.
            while pos[j] != rel[j] + 1 - n {
                pos[j] -= 1;
                nodes.push(real(&pos));
            }
        }
        forward_rest(&mut pos, &mut nodes);
        pos[j] = rel[j];
        nodes.push(real(&pos));
        paths.push(Path { nodes });
    }
    Ok(DisjointPaths {
        paths,
        shortfall: None,
    })
}
