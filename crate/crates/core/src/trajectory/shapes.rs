//! Closed-form test shapes flown with a smooth phase ramp.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use super::FlatPoint;
use crate::error::{Error, Result};
use crate::mathcore::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShapeKind {
    Figure8,
    Circle,
    Helix,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 3] = [ShapeKind::Circle, ShapeKind::Figure8, ShapeKind::Helix];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Figure8 => "figure8",
            ShapeKind::Circle => "circle",
            ShapeKind::Helix => "helix",
        }
    }

    /// Peak test speed (m/s) without and with the payload.
    pub fn default_speed(self, payload: bool) -> f64 {
        match (self, payload) {
            (ShapeKind::Figure8, false) => 1.7,
            (ShapeKind::Circle, false) => 1.7,
            (ShapeKind::Helix, false) => 1.6,
            (ShapeKind::Figure8, true) => 1.2,
            (ShapeKind::Circle, true) => 1.0,
            (ShapeKind::Helix, true) => 1.0,
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "figure8" | "figure-8" | "fig8" => Ok(ShapeKind::Figure8),
            "circle" => Ok(ShapeKind::Circle),
            "helix" => Ok(ShapeKind::Helix),
            other => Err(Error::InvalidParameter(format!("unknown trajectory shape '{other}'"))),
        }
    }
}

/// Geometry of a test shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeSize {
    pub center: Vec3,
    /// Radius (circle, helix) or x half-width (figure8), m.
    pub scale: f64,
    /// Total height gained by the helix, m. Ignored by the other shapes.
    pub climb: f64,
    /// Duration of each of the speed-up and slow-down ramps, s.
    pub ramp_time: f64,
}

impl ShapeSize {
    pub fn default_for(kind: ShapeKind) -> Self {
        let center = Vec3::new(0.0, 0.0, 1.0);
        match kind {
            ShapeKind::Figure8 => ShapeSize { center, scale: 1.0, climb: 0.0, ramp_time: 2.0 },
            ShapeKind::Circle => ShapeSize { center, scale: 1.0, climb: 0.0, ramp_time: 2.0 },
            ShapeKind::Helix => ShapeSize { center: Vec3::new(0.0, 0.0, 0.6), scale: 0.8, climb: 0.8, ramp_time: 2.0 },
        }
    }
}

/// Smooth unit ramp `s(τ) = 35τ⁴ − 84τ⁵ + 70τ⁶ − 20τ⁷` and its integral and
/// first three derivatives; zero derivatives up to third order at both ends.
fn ramp(tau: f64) -> [f64; 5] {
    let t = tau.clamp(0.0, 1.0);
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let integral = t4 * t * (7.0 - 14.0 * t + 10.0 * t2 - 2.5 * t3);
    let s = t4 * (35.0 - 84.0 * t + 70.0 * t2 - 20.0 * t3);
    let d1 = t3 * (140.0 - 420.0 * t + 420.0 * t2 - 140.0 * t3);
    let d2 = t2 * (420.0 - 1680.0 * t + 2100.0 * t2 - 840.0 * t3);
    let d3 = t * (840.0 - 5040.0 * t + 8400.0 * t2 - 4200.0 * t3);
    [integral, s, d1, d2, d3]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeTrajectory {
    pub kind: ShapeKind,
    pub size: ShapeSize,
    /// Cruise phase rate, rad/s.
    pub phase_rate: f64,
    /// Helix climb per radian of phase.
    climb_per_rad: f64,
    cruise_time: f64,
    duration: f64,
}

impl ShapeTrajectory {
    pub fn new(kind: ShapeKind, size: ShapeSize, max_speed: f64, duration: f64) -> Result<Self> {
        if !(max_speed > 0.0) || !max_speed.is_finite() {
            return Err(Error::InvalidParameter("max speed must be positive".into()));
        }
        if !(size.scale > 0.0 && size.ramp_time > 0.0) || (kind == ShapeKind::Helix && !(size.climb > 0.0)) {
            return Err(Error::InvalidParameter("shape dimensions must be positive".into()));
        }
        let cruise_time = duration - 2.0 * size.ramp_time;
        if !(cruise_time > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "duration {duration} s is too short for two {} s ramps",
                size.ramp_time
            )));
        }
        // Total phase swept = Ω (cruise + ramp), since each ramp integrates to ½ Ω T_r.
        let effective_time = cruise_time + size.ramp_time;
        let (phase_rate, climb_per_rad) = match kind {
            ShapeKind::Helix => {
                let vz = size.climb / effective_time;
                if vz >= max_speed {
                    return Err(Error::InvalidParameter("helix climb rate exceeds max speed".into()));
                }
                let omega = (max_speed * max_speed - vz * vz).sqrt() / size.scale;
                (omega, vz / omega)
            }
            _ => {
                let probe = ShapeTrajectory {
                    kind,
                    size,
                    phase_rate: 1.0,
                    climb_per_rad: 0.0,
                    cruise_time,
                    duration,
                };
                let peak = (0..4096)
                    .map(|i| probe.shape(i as f64 / 4096.0 * 2.0 * PI)[1].norm())
                    .fold(0.0, f64::max);
                (max_speed / peak, 0.0)
            }
        };
        Ok(ShapeTrajectory { kind, size, phase_rate, climb_per_rad, cruise_time, duration })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Position offset from the centre and its first four phase derivatives.
    fn shape(&self, phi: f64) -> [Vec3; 5] {
        let a = self.size.scale;
        let mut out = [Vec3::ZERO; 5];
        for (k, o) in out.iter_mut().enumerate() {
            let shift = k as f64 * PI / 2.0;
            *o = match self.kind {
                ShapeKind::Circle | ShapeKind::Helix => {
                    let xy = Vec3::new(a * (phi + shift).cos(), a * (phi + shift).sin(), 0.0);
                    let z = match (self.kind, k) {
                        (ShapeKind::Helix, 0) => self.climb_per_rad * phi,
                        (ShapeKind::Helix, 1) => self.climb_per_rad,
                        _ => 0.0,
                    };
                    xy + Vec3::E_Z * z
                }
                ShapeKind::Figure8 => {
                    let two_k = 2f64.powi(k as i32);
                    Vec3::new(a * (phi + shift).sin(), 0.5 * a * two_k * (2.0 * phi + shift).sin(), 0.0)
                }
            };
        }
        out
    }

    /// Phase φ(t) and its first four time derivatives.
    fn phase(&self, t: f64) -> [f64; 5] {
        let w = self.phase_rate;
        let tr = self.size.ramp_time;
        let t = t.clamp(0.0, self.duration);
        let t1 = tr;
        let t2 = tr + self.cruise_time;
        if t < t1 {
            let r = ramp(t / tr);
            [w * tr * r[0], w * r[1], w * r[2] / tr, w * r[3] / (tr * tr), w * r[4] / (tr * tr * tr)]
        } else if t < t2 {
            [w * (0.5 * tr + (t - t1)), w, 0.0, 0.0, 0.0]
        } else {
            let tau = (t - t2) / tr;
            let r = ramp(tau);
            let base = w * (0.5 * tr + self.cruise_time);
            // Decelerating ramp: φ̇ = Ω (1 − s(τ)).
            [
                base + w * tr * (tau.clamp(0.0, 1.0) - r[0]),
                w * (1.0 - r[1]),
                -w * r[2] / tr,
                -w * r[3] / (tr * tr),
                -w * r[4] / (tr * tr * tr),
            ]
        }
    }

    pub fn sample(&self, t: f64) -> FlatPoint {
        let [phi, d1, d2, d3, d4] = self.phase(t);
        let [p0, p1, p2, p3, p4] = self.shape(phi);
        // Faà di Bruno up to fourth order for p(φ(t)).
        let vel = p1 * d1;
        let acc = p2 * (d1 * d1) + p1 * d2;
        let jerk = p3 * (d1 * d1 * d1) + p2 * (3.0 * d1 * d2) + p1 * d3;
        let snap = p4 * (d1 * d1 * d1 * d1)
            + p3 * (6.0 * d1 * d1 * d2)
            + p2 * (3.0 * d2 * d2 + 4.0 * d1 * d3)
            + p1 * d4;
        FlatPoint {
            position: self.size.center + p0,
            velocity: vel,
            acceleration: acc,
            jerk,
            snap,
            ..FlatPoint::default()
        }
    }
}
