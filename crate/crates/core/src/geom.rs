//! Spherical and orbital geometry.
//!
//! Frames: the inertial frame has its x-axis on the prime meridian at t = 0,
//! z on the rotation axis. Orbits are ideal circles. All angles are radians,
//! lengths kilometres, times seconds.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::constellation::ConstellationConfig;
use crate::error::{Error, Result};

const BISECT_TOL: f64 = 1e-12;
const BISECT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub earth_radius_km: f64,
    pub sidereal_day_s: f64,
    pub light_speed_km_s: f64,
    /// Clearance an inter-satellite chord must keep above the surface.
    pub atmosphere_margin_km: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            earth_radius_km: 6371.0,
            sidereal_day_s: 86164.0905,
            light_speed_km_s: 299_792.458,
            atmosphere_margin_km: 0.0,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        let ok = self.earth_radius_km > 0.0
            && self.sidereal_day_s > 0.0
            && self.light_speed_km_s > 0.0
            && self.atmosphere_margin_km >= 0.0
            && self.earth_radius_km.is_finite()
            && self.sidereal_day_s.is_finite()
            && self.light_speed_km_s.is_finite()
            && self.atmosphere_margin_km.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("bad physical constants: {self:?}")))
        }
    }

    /// Earth rotation rate ω_E in rad/s.
    pub fn earth_rate(&self) -> f64 {
        TAU / self.sidereal_day_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitalElements {
    pub raan_rad: f64,
    pub inclination_rad: f64,
    pub phase0_rad: f64,
    pub period_s: f64,
    pub orbit_radius_km: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat_rad: f64,
    pub lon_rad: f64,
}

impl LatLon {
    pub fn new(lat_rad: f64, lon_rad: f64) -> Self {
        LatLon {
            lat_rad,
            lon_rad: wrap_pi(lon_rad),
        }
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64) -> Self {
        LatLon::new(lat_deg.to_radians(), lon_deg.to_radians())
    }

    pub fn to_degrees(self) -> (f64, f64) {
        (self.lat_rad.to_degrees(), self.lon_rad.to_degrees())
    }

    pub fn to_unit(self) -> UnitVec3 {
        let (sl, cl) = self.lat_rad.sin_cos();
        let (so, co) = self.lon_rad.sin_cos();
        UnitVec3 {
            x: cl * co,
            y: cl * so,
            z: sl,
        }
    }

    pub fn from_unit(v: UnitVec3) -> Self {
        let lat = v.z.clamp(-1.0, 1.0).asin();
        let lon = if v.x * v.x + v.y * v.y < 1e-24 {
            0.0
        } else {
            v.y.atan2(v.x)
        };
        LatLon::new(lat, lon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitVec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitVec3 {
    /// Normalizes the input; a zero vector maps to +x.
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        let n = (x * x + y * y + z * z).sqrt();
        if n == 0.0 {
            return UnitVec3 {
                x: 1.0,
                y: 0.0,
                z: 0.0,
            };
        }
        UnitVec3 {
            x: x / n,
            y: y / n,
            z: z / n,
        }
    }

    pub fn dot(self, o: UnitVec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross_norm(self, o: UnitVec3) -> f64 {
        let cx = self.y * o.z - self.z * o.y;
        let cy = self.z * o.x - self.x * o.z;
        let cz = self.x * o.y - self.y * o.x;
        (cx * cx + cy * cy + cz * cz).sqrt()
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    fn rot_z(self, angle: f64) -> UnitVec3 {
        let (s, c) = angle.sin_cos();
        UnitVec3 {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
            z: self.z,
        }
    }
}

/// Wraps into [0, 2π).
pub fn wrap_two_pi(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Wraps into [-π, π).
pub fn wrap_pi(x: f64) -> f64 {
    let r = wrap_two_pi(x + PI) - PI;
    if r >= PI {
        -PI
    } else {
        r
    }
}

/// Direction of the satellite in the inertial frame.
pub fn sat_position_eci(el: &OrbitalElements, t: f64) -> UnitVec3 {
    let u = TAU * t / el.period_s + el.phase0_rad;
    let (su, cu) = u.sin_cos();
    let (sb, cb) = el.inclination_rad.sin_cos();
    UnitVec3 {
        x: cu,
        y: su * cb,
        z: su * sb,
    }
    .rot_z(el.raan_rad)
}

/// Sub-point direction in the earth-fixed frame.
pub fn subpoint_ecef(el: &OrbitalElements, t: f64, consts: &PhysicalConstants) -> UnitVec3 {
    sat_position_eci(el, t).rot_z(-consts.earth_rate() * t)
}

pub fn subpoint(el: &OrbitalElements, t: f64, consts: &PhysicalConstants) -> LatLon {
    LatLon::from_unit(subpoint_ecef(el, t, consts))
}

/// Central angle between two directions, atan2 form.
pub fn great_circle_range(a: UnitVec3, b: UnitVec3) -> f64 {
    a.cross_norm(b).atan2(a.dot(b))
}

pub fn great_circle_range_latlon(a: LatLon, b: LatLon) -> f64 {
    great_circle_range(a.to_unit(), b.to_unit())
}

/// Closed-form range between base-Rosette satellites `i` and `j` at time `t`.
///
/// Errors when the four-term sum leaves [0, 1] by more than 1e-9.
pub fn link_range_closed_form(i: u32, j: u32, t: f64, cfg: &ConstellationConfig) -> Result<f64> {
    if i == j || i >= cfg.n || j >= cfg.n {
        return Err(Error::Config(format!(
            "closed form needs distinct satellites in [0, {}), got {i} and {j}",
            cfg.n
        )));
    }
    let x = TAU * t / cfg.period_s();
    closed_form_range(
        j as f64 - i as f64,
        j as f64 + i as f64,
        x,
        cfg.n as f64,
        cfg.m as f64,
        cfg.inclination_rad,
    )
}

/// The same four-term form with real-valued index sum/difference and phase `x`.
pub(crate) fn closed_form_range(diff: f64, sum: f64, x: f64, n: f64, m: f64, beta: f64) -> Result<f64> {
    let (sh, ch) = (beta / 2.0).sin_cos();
    let (sh2, ch2) = (sh * sh, ch * ch);
    let p = PI / n;
    let sq = |v: f64| {
        let s = v.sin();
        s * s
    };
    let s2 = ch2 * ch2 * sq((m + 1.0) * diff * p)
        + 2.0 * sh2 * ch2 * sq(m * diff * p)
        + sh2 * sh2 * sq((m - 1.0) * diff * p)
        + 2.0 * sh2 * ch2 * sq(diff * p) * (2.0 * x + 2.0 * m * sum * p).cos();
    if !(-1e-9..=1.0 + 1e-9).contains(&s2) {
        return Err(Error::ClosedFormDomain(s2));
    }
    Ok(2.0 * s2.clamp(0.0, 1.0).sqrt().asin())
}

/// Chord length and one-way light delay for a link spanning `r`.
pub fn link_length_delay(r: f64, altitude_km: f64, consts: &PhysicalConstants) -> (f64, f64) {
    let len = 2.0 * (altitude_km + consts.earth_radius_km) * (r / 2.0).sin();
    (len, len / consts.light_speed_km_s)
}

/// Ground coverage half-angle for a satellite at `altitude_km` seen above `elev`.
pub fn coverage_range(altitude_km: f64, elev: f64, consts: &PhysicalConstants) -> Result<f64> {
    if !(altitude_km.is_finite() && altitude_km > 0.0) {
        return Err(Error::NoSolution(format!(
            "coverage needs a positive altitude, got {altitude_km} km"
        )));
    }
    if !(0.0..FRAC_PI_2).contains(&elev) {
        return Err(Error::NoSolution(format!(
            "elevation {elev} rad outside [0, π/2)"
        )));
    }
    let rho = consts.earth_radius_km / (consts.earth_radius_km + altitude_km);
    let te = elev.tan();
    // f is strictly decreasing on [0, π/2], positive at 0 and negative at π/2.
    let f = |r: f64| r.cos() - rho - te * r.sin();
    bisect(f, 0.0, FRAC_PI_2)
}

/// Coverage half-angle required of each of `total` satellites.
pub fn required_range(total: u64) -> Result<f64> {
    if total < 3 {
        return Err(Error::Config(format!(
            "at least 3 satellites are needed, got {total}"
        )));
    }
    let n = total as f64;
    let arg = PI / 6.0 * n / (n - 2.0);
    if arg >= FRAC_PI_2 {
        return Ok(FRAC_PI_2);
    }
    Ok((1.0 / (3f64.sqrt() * arg.tan())).acos())
}

/// Smallest satellite count whose required coverage half-angle does not exceed `r`.
pub fn min_satellites(r: f64) -> Result<u64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::NoSolution(format!(
            "coverage range must be positive, got {r}"
        )));
    }
    if r >= FRAC_PI_2 {
        return Ok(3);
    }
    let theta = (1.0 / (r.cos() * 3f64.sqrt())).atan();
    let q = 6.0 * theta / PI;
    let real = 2.0 * q / (q - 1.0);
    let n = (real - 1e-6).ceil().max(3.0);
    if !n.is_finite() || n > u64::MAX as f64 {
        return Err(Error::NoSolution(format!("no finite N covers range {r}")));
    }
    Ok(n as u64)
}

/// True iff a chord spanning `r` clears the surface plus the atmosphere margin.
pub fn visibility_ok(r: f64, altitude_km: f64, consts: &PhysicalConstants) -> bool {
    (altitude_km + consts.earth_radius_km) * (r / 2.0).cos()
        > consts.earth_radius_km + consts.atmosphere_margin_km
}

/// Straight-line distance from a ground point to a satellite, in km.
pub fn slant_range_km(ground: UnitVec3, sat: UnitVec3, altitude_km: f64, consts: &PhysicalConstants) -> f64 {
    let re = consts.earth_radius_km;
    let rs = re + altitude_km;
    let c = ground.dot(sat).clamp(-1.0, 1.0);
    (re * re + rs * rs - 2.0 * re * rs * c).max(0.0).sqrt()
}

/// Root of a function that changes sign on [lo, hi].
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoSolution(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    for _ in 0..BISECT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < BISECT_TOL {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Maximizes a unimodal function on [lo, hi] by golden-section search.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..200 {
        if hi - lo < tol {
            break;
        }
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn el(raan: f64, inc_deg: f64, phase: f64) -> OrbitalElements {
        OrbitalElements {
            raan_rad: raan,
            inclination_rad: inc_deg.to_radians(),
            phase0_rad: phase,
            period_s: 6000.0,
            orbit_radius_km: 7000.0,
        }
    }

    #[test]
    fn eci_reference_points() {
        let p = sat_position_eci(&el(0.0, 53.0, 0.0), 0.0);
        assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-15);
        let p = sat_position_eci(&el(0.0, 90.0, FRAC_PI_2), 0.0);
        assert_abs_diff_eq!(p.z, 1.0, epsilon = 1e-15);
        let p = sat_position_eci(&el(0.0, 53.0, 0.0), 3000.0);
        assert_abs_diff_eq!(p.x, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn subpoint_epoch_and_pole() {
        let c = PhysicalConstants::default();
        let s = subpoint(&el(0.0, 53.0, 0.0), 0.0, &c);
        assert_eq!((s.lat_rad, s.lon_rad), (0.0, 0.0));
        let s = subpoint(&el(0.0, 90.0, FRAC_PI_2), 0.0, &c);
        assert_abs_diff_eq!(s.lat_rad, FRAC_PI_2, epsilon = 1e-12);
        assert_eq!(s.lon_rad, 0.0);
    }

    #[test]
    fn range_reference_values() {
        let a = LatLon::new(0.0, 0.0);
        assert_eq!(great_circle_range_latlon(a, a), 0.0);
        assert_abs_diff_eq!(
            great_circle_range_latlon(a, LatLon::new(0.0, PI)),
            PI,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            great_circle_range_latlon(a, LatLon::new(0.0, FRAC_PI_2)),
            FRAC_PI_2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn chord_examples() {
        let c = PhysicalConstants::default();
        assert_eq!(link_length_delay(0.0, 500.0, &c), (0.0, 0.0));
        let (l, d) = link_length_delay(PI, 0.0, &c);
        assert_abs_diff_eq!(l, 2.0 * c.earth_radius_km, epsilon = 1e-9);
        assert_abs_diff_eq!(d, 2.0 * c.earth_radius_km / c.light_speed_km_s, epsilon = 1e-15);
        let (l, d) = link_length_delay(PI / 4.0, 1259.58, &c);
        assert_abs_diff_eq!(l, 5840.19, epsilon = 0.01);
        assert_abs_diff_eq!(d * 1e3, 19.48, epsilon = 0.01);
        // Same chord from two explicit positions.
        let r = 7630.58;
        let a = LatLon::new(0.0, 0.0).to_unit();
        let b = LatLon::new(0.0, PI / 4.0).to_unit();
        let chord = r * ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt();
        assert_abs_diff_eq!(chord, l, epsilon = 1e-9);
    }

    #[test]
    fn coverage_matches_horizon_identity() {
        let c = PhysicalConstants::default();
        for h in [300.0, 1259.58, 11848.46] {
            let r = coverage_range(h, 0.0, &c).unwrap();
            assert_abs_diff_eq!(r.cos(), c.earth_radius_km / (c.earth_radius_km + h), epsilon = 1e-11);
        }
        let r = coverage_range(11848.46, 25f64.to_radians(), &c).unwrap();
        assert_abs_diff_eq!(r, 0.8122, epsilon = 5e-4);
        assert_eq!(min_satellites(r).unwrap(), 8);
        assert!(coverage_range(0.0, 0.1, &c).is_err());
    }

    #[test]
    fn coverage_approaches_quarter_circle() {
        let c = PhysicalConstants::default();
        let mut prev = 0.0;
        for h in [1e3, 1e5, 1e7, 1e9] {
            let r = coverage_range(h, 0.0, &c).unwrap();
            assert!(r > prev && r < FRAC_PI_2);
            prev = r;
        }
        assert!(FRAC_PI_2 - prev < 1e-5);
    }

    #[test]
    fn min_satellites_examples() {
        assert_eq!(min_satellites(0.8122).unwrap(), 8);
        assert_eq!(min_satellites(0.2768).unwrap(), 64);
        assert_eq!(min_satellites(FRAC_PI_2 - 1e-12).unwrap(), 3);
        assert!(min_satellites(0.0).is_err());
    }

    #[test]
    fn visibility_examples() {
        let c = PhysicalConstants::default();
        assert!(visibility_ok(0.0, 10.0, &c));
        assert!(!visibility_ok(0.3, 0.0, &c));
    }

    #[test]
    fn wraps() {
        assert_eq!(wrap_pi(PI), -PI);
        assert_eq!(wrap_two_pi(-0.0), 0.0);
        assert_abs_diff_eq!(wrap_two_pi(-0.5), TAU - 0.5, epsilon = 1e-15);
    }
}
