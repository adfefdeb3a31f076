//! Constellation sizing from a round-trip-time target.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{coverage_range, min_satellites, PhysicalConstants};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeRequest {
    pub rtt_target_s: f64,
    pub min_elevation_rad: f64,
    pub base_n: u32,
}

impl SizeRequest {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtt_target_s > 0.0 && self.rtt_target_s.is_finite()) {
            return Err(Error::Config(format!("rtt target must be positive, got {}", self.rtt_target_s)));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.min_elevation_rad) {
            return Err(Error::Config(format!(
                "elevation must lie in [0, 90) degrees, got {} rad",
                self.min_elevation_rad
            )));
        }
        if self.base_n < 3 {
            return Err(Error::Config(format!("base N must be at least 3, got {}", self.base_n)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SizePlan {
    pub altitude_km: f64,
    pub coverage_range_rad: f64,
    pub n_min: u64,
    pub k: u32,
    /// N^(k+1).
    pub total: u64,
}

/// Altitude from the RTT budget, then the fewest layers whose satellite
/// count reaches the coverage minimum at that altitude.
pub fn select_size(req: &SizeRequest, consts: &PhysicalConstants) -> Result<SizePlan> {
    req.validate()?;
    let altitude_km = consts.light_speed_km_s * req.rtt_target_s / 2.0;
    let r = coverage_range(altitude_km, req.min_elevation_rad, consts)
        .map_err(|e| Error::Infeasible(format!("no coverage at {altitude_km:.3} km: {e}")))?;
    let n_min = min_satellites(r).map_err(|e| Error::Infeasible(e.to_string()))?;
    let base = req.base_n as u64;
    let mut k = 0u32;
    let mut total = base;
    while total < n_min {
        total = total
            .checked_mul(base)
            .ok_or_else(|| Error::Infeasible(format!("{n_min} satellites exceed 64-bit counts")))?;
        k += 1;
    }
    Ok(SizePlan {
        altitude_km,
        coverage_range_rad: r,
        n_min,
        k,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(ms: f64, n: u32) -> SizeRequest {
        SizeRequest {
            rtt_target_s: ms / 1000.0,
            min_elevation_rad: 25f64.to_radians(),
            base_n: n,
        }
    }

    #[test]
    fn just_above_first_layer_row() {
        let c = PhysicalConstants::default();
        let p = select_size(&req(8.41, 8), &c).unwrap();
        assert_eq!((p.k, p.total), (1, 64));
        // 8.40 ms lands a hair below the 64-satellite altitude.
        let strict = select_size(&req(8.40, 8), &c).unwrap();
        assert!((strict.altitude_km - 1259.13).abs() < 0.01);
        assert_eq!((strict.n_min, strict.k), (65, 2));
    }

    #[test]
    fn base_layer_row() {
        let c = PhysicalConstants::default();
        let p = select_size(&req(79.1, 8), &c).unwrap();
        assert_eq!((p.k, p.total), (0, 8));
        let strict = select_size(&req(79.0, 8), &c).unwrap();
        assert_eq!((strict.n_min, strict.k), (9, 1));
    }

    #[test]
    fn power_of_n_needs_no_extra_layer() {
        let c = PhysicalConstants::default();
        for ms in [0.5, 1.0, 3.0, 10.0, 40.0, 100.0] {
            let p = select_size(&req(ms, 4), &c).unwrap();
            assert!(p.total >= p.n_min);
            assert!(p.k == 0 || p.total / 4 < p.n_min);
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let c = PhysicalConstants::default();
        assert!(select_size(&req(0.0, 8), &c).is_err());
        assert!(select_size(&req(8.0, 2), &c).is_err());
    }
}
