//! Text formats and the 128-bit address embedding.
//!
//! Layout, most significant bit first:
//!
//! ```text
//! | prefix (64) | flag (1) | payload | suffix |
//! ```
//!
//! The flag is 1 for ground (cell) addresses and 0 for satellites. The payload
//! field is wide enough for either kind and values are right-aligned in it.

use serde::Serialize;

use crate::constellation::{ConstellationConfig, SatAddress};
use crate::error::{Error, Result};
use crate::geocell::{row_capacity, CellId};

pub const DEFAULT_PREFIX_BITS: u32 = 64;

/// Bits needed for values 0..count-1.
pub fn bits_for(count: u64) -> u32 {
    if count <= 1 {
        0
    } else {
        64 - (count - 1).leading_zeros()
    }
}

fn parse_number(text: &str, offset: usize) -> Result<u32> {
    if text.is_empty() {
        return Err(Error::Parse {
            pos: offset,
            msg: "empty field".into(),
        });
    }
    if let Some(bad) = text.find(|c: char| !c.is_ascii_digit()) {
        return Err(Error::Parse {
            pos: offset + bad,
            msg: format!("unexpected character {:?}", text[bad..].chars().next().unwrap()),
        });
    }
    text.parse::<u32>().map_err(|_| Error::Parse {
        pos: offset,
        msg: format!("number {text:?} is too large"),
    })
}

/// Dotted decimal digits, e.g. "0.3".
pub fn parse_sat_address(text: &str, cfg: &ConstellationConfig) -> Result<SatAddress> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::Parse {
            pos: 0,
            msg: "empty address".into(),
        });
    }
    let mut digits = Vec::new();
    let mut offset = 0;
    for field in text.split('.') {
        digits.push(parse_number(field, offset)?);
        offset += field.len() + 1;
    }
    let addr = SatAddress::new(digits);
    addr.validate(cfg)?;
    Ok(addr)
}

/// Slash-separated "row,col" per level, e.g. "1,0/5,3".
pub fn parse_cell_id(text: &str, cfg: &ConstellationConfig) -> Result<CellId> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::Parse {
            pos: 0,
            msg: "empty cell id".into(),
        });
    }
    let mut levels = Vec::new();
    let mut offset = 0;
    for part in text.split('/') {
        let Some((r, c)) = part.split_once(',') else {
            return Err(Error::Parse {
                pos: offset,
                msg: format!("expected row,col in {part:?}"),
            });
        };
        let row = parse_number(r, offset)?;
        let col = parse_number(c, offset + r.len() + 1)?;
        levels.push((row, col));
        offset += part.len() + 1;
    }
    let cell = CellId::new(levels);
    validate_cell(&cell, cfg)?;
    Ok(cell)
}

pub fn validate_cell(cell: &CellId, cfg: &ConstellationConfig) -> Result<()> {
    if cell.levels.is_empty() || cell.levels.len() > cfg.layers() {
        return Err(Error::Config(format!(
            "cell {cell} has {} levels, expected 1..={}",
            cell.levels.len(),
            cfg.layers()
        )));
    }
    let span0 = cfg.n - cfg.m;
    let (r0, c0) = cell.levels[0];
    for v in [r0, c0] {
        if v >= span0 {
            return Err(Error::Range {
                what: "level-0 cell digit",
                value: v as u64,
                bound: span0 as u64,
            });
        }
    }
    for &(r, c) in &cell.levels[1..] {
        if r >= 2 * cfg.n - 1 {
            return Err(Error::Range {
                what: "cell row",
                value: r as u64,
                bound: (2 * cfg.n - 1) as u64,
            });
        }
        let cap = row_capacity(cfg.n, r);
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

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BitLayout {
    pub prefix_bits: u32,
    pub flag_bits: u32,
    /// Width of one satellite digit.
    pub sat_digit_bits: u32,
    pub sat_bits: u32,
    /// (row bits, col bits) per cell level.
    pub cell_level_bits: Vec<(u32, u32)>,
    pub cell_bits: u32,
    pub payload_bits: u32,
    pub suffix_bits: u32,
}

impl BitLayout {
    pub fn total(&self) -> u32 {
        self.prefix_bits + self.flag_bits + self.payload_bits + self.suffix_bits
    }

    fn suffix_shift(&self) -> u32 {
        0
    }

    fn payload_shift(&self) -> u32 {
        self.suffix_bits
    }

    fn flag_shift(&self) -> u32 {
        self.suffix_bits + self.payload_bits
    }

    fn prefix_shift(&self) -> u32 {
        self.flag_shift() + self.flag_bits
    }
}

pub fn bit_widths(cfg: &ConstellationConfig) -> Result<BitLayout> {
    bit_widths_with_prefix(cfg, DEFAULT_PREFIX_BITS)
}

pub fn bit_widths_with_prefix(cfg: &ConstellationConfig, prefix_bits: u32) -> Result<BitLayout> {
    let digit = bits_for(cfg.n as u64);
    let sat_bits = digit * cfg.layers() as u32;
    let row = bits_for((2 * cfg.n - 1) as u64);
    // Level-0 fields are sized for N, not N-m, so widths do not depend on m.
    let mut cell_level_bits = vec![(digit, digit)];
    cell_level_bits.extend(std::iter::repeat((row, digit)).take(cfg.k as usize));
    let cell_bits: u32 = cell_level_bits.iter().map(|(r, c)| r + c).sum();
    let payload_bits = sat_bits.max(cell_bits);
    let used = prefix_bits + 1 + payload_bits;
    if prefix_bits > 64 || used > 127 {
        return Err(Error::Overflow(used));
    }
    Ok(BitLayout {
        prefix_bits,
        flag_bits: 1,
        sat_digit_bits: digit,
        sat_bits,
        cell_level_bits,
        cell_bits,
        payload_bits,
        suffix_bits: 128 - used,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroundAddress {
    pub prefix: u64,
    pub cell: CellId,
    pub suffix: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Address {
    Satellite {
        prefix: u64,
        sat: SatAddress,
        suffix: u64,
    },
    Ground(GroundAddress),
}

fn mask(bits: u32) -> u128 {
    if bits == 0 {
        0
    } else {
        u128::MAX >> (128 - bits)
    }
}

fn check_field(what: &'static str, value: u64, bits: u32) -> Result<()> {
    if bits < 64 && value >> bits != 0 {
        return Err(Error::Range {
            what,
            value,
            bound: 1u64 << bits,
        });
    }
    Ok(())
}

pub fn encode(addr: &Address, layout: &BitLayout, cfg: &ConstellationConfig) -> Result<u128> {
    let (prefix, flag, payload, suffix) = match addr {
        Address::Satellite { prefix, sat, suffix } => {
            sat.validate(cfg)?;
            let mut p: u128 = 0;
            for &d in &sat.digits {
                p = (p << layout.sat_digit_bits) | d as u128;
            }
            (*prefix, 0u128, p, *suffix)
        }
        Address::Ground(g) => {
            validate_cell(&g.cell, cfg)?;
            if g.cell.levels.len() != cfg.layers() {
                return Err(Error::Config(format!(
                    "ground addresses carry a full-depth cell, got {}",
                    g.cell
                )));
            }
            let mut p: u128 = 0;
            for (&(r, c), &(rb, cb)) in g.cell.levels.iter().zip(&layout.cell_level_bits) {
                p = (p << rb) | r as u128;
                p = (p << cb) | c as u128;
            }
            (g.prefix, 1u128, p, g.suffix)
        }
    };
    check_field("prefix", prefix, layout.prefix_bits)?;
    check_field("suffix", suffix, layout.suffix_bits)?;
    Ok(((prefix as u128) << layout.prefix_shift())
        | (flag << layout.flag_shift())
        | (payload << layout.payload_shift())
        | ((suffix as u128) << layout.suffix_shift()))
}

pub fn decode(bits: u128, layout: &BitLayout, cfg: &ConstellationConfig) -> Result<Address> {
    let prefix = ((bits >> layout.prefix_shift()) & mask(layout.prefix_bits)) as u64;
    let flag = (bits >> layout.flag_shift()) & 1;
    let mut payload = (bits >> layout.payload_shift()) & mask(layout.payload_bits);
    let suffix = (bits & mask(layout.suffix_bits)) as u64;
    if flag == 0 {
        let mut digits = vec![0u32; cfg.layers()];
        for slot in digits.iter_mut().rev() {
            *slot = (payload & mask(layout.sat_digit_bits)) as u32;
            payload >>= layout.sat_digit_bits;
        }
        if payload != 0 {
            return Err(Error::Format("stray bits above the satellite digits".into()));
        }
        let sat = SatAddress::new(digits);
        sat.validate(cfg)?;
        Ok(Address::Satellite { prefix, sat, suffix })
    } else {
        let mut levels = vec![(0u32, 0u32); layout.cell_level_bits.len()];
        for (slot, &(rb, cb)) in levels.iter_mut().zip(&layout.cell_level_bits).rev() {
            let c = (payload & mask(cb)) as u32;
            payload >>= cb;
            let r = (payload & mask(rb)) as u32;
            payload >>= rb;
            *slot = (r, c);
        }
        if payload != 0 {
            return Err(Error::Format("stray bits above the cell digits".into()));
        }
        let cell = CellId::new(levels);
        validate_cell(&cell, cfg)?;
        Ok(Address::Ground(GroundAddress { prefix, cell, suffix }))
    }
}

/// Eight colon-separated 16-bit hex groups.
pub fn format_colon_hex(bits: u128) -> String {
    (0..8)
        .map(|i| format!("{:04x}", (bits >> (112 - 16 * i)) & 0xffff))
        .collect::<Vec<_>>()
        .join(":")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: u32, m: u32, k: u32) -> ConstellationConfig {
        ConstellationConfig::new(n, m, k, 1000.0, 53.0, 25.0).unwrap()
    }

    #[test]
    fn parses_and_rejects() {
        let c = cfg(8, 6, 0);
        assert_eq!(parse_sat_address("3", &c).unwrap().digits, vec![3]);
        let c1 = cfg(8, 6, 1);
        assert!(matches!(parse_sat_address("0.8", &c1), Err(Error::Range { .. })));
        assert!(matches!(parse_sat_address("0.x", &c1), Err(Error::Parse { pos: 2, .. })));
        let cell = parse_cell_id("1,0/5,3", &c1).unwrap();
        assert_eq!(cell.levels, vec![(1, 0), (5, 3)]);
        assert_eq!(cell.to_string(), "1,0/5,3");
        // Row 5 of N=8 holds 6 cells.
        assert!(parse_cell_id("1,0/5,6", &c1).is_err());
        assert!(parse_cell_id("2,0", &c1).is_err());
    }

    #[test]
    fn widths_for_sixteen() {
        for (k, want) in [(0, 8), (1, 17), (2, 26), (3, 35)] {
            let l = bit_widths(&cfg(16, 8, k)).unwrap();
            assert_eq!(l.cell_bits, want);
            assert_eq!(l.total(), 128);
        }
        assert_eq!(bit_widths(&cfg(16, 8, 1)).unwrap().sat_bits, 8);
    }

    #[test]
    fn zero_addresses_only_carry_the_flag() {
        let c = cfg(16, 8, 1);
        let l = bit_widths(&c).unwrap();
        let g = Address::Ground(GroundAddress {
            prefix: 0,
            cell: CellId::new(vec![(0, 0), (0, 0)]),
            suffix: 0,
        });
        let bits = encode(&g, &l, &c).unwrap();
        assert_eq!(bits.count_ones(), 1);
        assert_eq!(bits, 1u128 << 63);
        let s = Address::Satellite {
            prefix: 0,
            sat: SatAddress::zero(2),
            suffix: 0,
        };
        assert_eq!(encode(&s, &l, &c).unwrap(), 0);
    }

    #[test]
    fn overflow_detected() {
        let c = ConstellationConfig::new(255, 1, 6, 1000.0, 53.0, 25.0).unwrap();
        assert!(matches!(bit_widths(&c), Err(Error::Overflow(_))));
    }

    #[test]
    fn colon_hex() {
        assert_eq!(format_colon_hex(1u128 << 63), "0000:0000:0000:0000:8000:0000:0000:0000");
    }
}
