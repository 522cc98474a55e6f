//! Reference trajectories and their differential-flatness expansion.

mod minsnap;
mod shapes;

pub use minsnap::{make_random_waypoints, solve_min_snap, PolySegment, PolynomialTrajectory, RandomWaypointConfig};
pub use shapes::{ShapeKind, ShapeSize, ShapeTrajectory};

use std::path::Path;

use crate::error::{Error, Result};
use crate::mathcore::{Mat3, Vec3};

/// Flat output (position and yaw) with derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlatPoint {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub jerk: Vec3,
    pub snap: Vec3,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub yaw_accel: f64,
}

/// Full-state reference obtained from the flat output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullReference {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub jerk: Vec3,
    pub rotation: Mat3,
    /// Body frame.
    pub angular_velocity: Vec3,
    pub angular_acceleration: Vec3,
    pub yaw: f64,
}

impl FullReference {
    /// Static reference at `position` with zero yaw.
    pub fn hover(position: Vec3) -> Self {
        FullReference {
            position,
            velocity: Vec3::ZERO,
            acceleration: Vec3::ZERO,
            jerk: Vec3::ZERO,
            rotation: Mat3::IDENTITY,
            angular_velocity: Vec3::ZERO,
            angular_acceleration: Vec3::ZERO,
            yaw: 0.0,
        }
    }
}

/// Position/yaw reference over `[0, duration]`.
#[derive(Debug, Clone, PartialEq)]
pub enum FlatTrajectory {
    Hover { position: Vec3, duration: f64 },
    Shape(ShapeTrajectory),
    Polynomial(PolynomialTrajectory),
    Sampled(SampledTrajectory),
}

impl FlatTrajectory {
    pub fn duration(&self) -> f64 {
        match self {
            FlatTrajectory::Hover { duration, .. } => *duration,
            FlatTrajectory::Shape(s) => s.duration(),
            FlatTrajectory::Polynomial(p) => p.duration(),
            FlatTrajectory::Sampled(s) => s.duration(),
        }
    }

    /// Flat output at `t`, clamped to `[0, duration]`.
    pub fn sample(&self, t: f64) -> FlatPoint {
        match self {
            FlatTrajectory::Hover { position, .. } => FlatPoint { position: *position, ..FlatPoint::default() },
            FlatTrajectory::Shape(s) => s.sample(t),
            FlatTrajectory::Polynomial(p) => p.sample(t),
            FlatTrajectory::Sampled(s) => s.sample(t),
        }
    }
}

/// Builds one of the closed-form test shapes with default geometry.
pub fn make_shape(kind: ShapeKind, size: ShapeSize, max_speed: f64, duration: f64) -> Result<FlatTrajectory> {
    ShapeTrajectory::new(kind, size, max_speed, duration).map(FlatTrajectory::Shape)
}

/// Unit vector `w/|w|` with its first two time derivatives.
fn unit_with_derivatives(w: Vec3, w1: Vec3, w2: Vec3, eps: f64) -> Option<[Vec3; 3]> {
    let n = w.norm();
    if !(n >= eps) {
        return None;
    }
    let u = w / n;
    let n1 = u.dot(w1);
    let u1 = (w1 - u * n1) / n;
    let n2 = u1.dot(w1) + u.dot(w2);
    let u2 = (w2 - u1 * (2.0 * n1) - u * n2) / n;
    Some([u, u1, u2])
}

/// Differential-flatness map from a flat point to attitude, body rates and
/// body angular acceleration, assuming thrust along body z and zero residual.
pub fn expand_point(p: &FlatPoint, gravity: f64) -> Result<FullReference> {
    let thrust = p.acceleration + Vec3::E_Z * gravity;
    let [z, z1, z2] = unit_with_derivatives(thrust, p.jerk, p.snap, 1e-6)
        .ok_or(Error::SingularReference { magnitude: thrust.norm() })?;

    let (s, c) = p.yaw.sin_cos();
    let heading = Vec3::new(c, s, 0.0);
    let heading_perp = Vec3::new(-s, c, 0.0);
    let xc1 = heading_perp * p.yaw_rate;
    let xc2 = heading_perp * p.yaw_accel - heading * (p.yaw_rate * p.yaw_rate);

    let y = z.cross(heading);
    let y1 = z1.cross(heading) + z.cross(xc1);
    let y2 = z2.cross(heading) + z1.cross(xc1) * 2.0 + z.cross(xc2);
    let [yb, yb1, yb2] =
        unit_with_derivatives(y, y1, y2, 1e-6).ok_or(Error::SingularReference { magnitude: y.norm() })?;

    let xb = yb.cross(z);
    let xb1 = yb1.cross(z) + yb.cross(z1);
    let xb2 = yb2.cross(z) + yb1.cross(z1) * 2.0 + yb.cross(z2);

    let omega = Vec3::new(z.dot(yb1), xb.dot(z1), yb.dot(xb1));
    let omega_dot = Vec3::new(z1.dot(yb1) + z.dot(yb2), xb1.dot(z1) + xb.dot(z2), yb1.dot(xb1) + yb.dot(xb2));

    Ok(FullReference {
        position: p.position,
        velocity: p.velocity,
        acceleration: p.acceleration,
        jerk: p.jerk,
        rotation: Mat3::from_cols(xb, yb, z),
        angular_velocity: omega,
        angular_acceleration: omega_dot,
        yaw: p.yaw,
    })
}

/// Expands `traj` at time `t ∈ [0, D]`.
pub fn flat_expand(traj: &FlatTrajectory, t: f64, gravity: f64) -> Result<FullReference> {
    let d = traj.duration();
    if !(t >= -1e-9 && t <= d + 1e-9) {
        return Err(Error::InvalidParameter(format!("time {t} outside trajectory [0, {d}]")));
    }
    expand_point(&traj.sample(t), gravity)
}

/// Trajectory reconstructed from exported samples; linear interpolation
/// between rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrajectory {
    times: Vec<f64>,
    points: Vec<FlatPoint>,
}

impl SampledTrajectory {
    pub fn new(times: Vec<f64>, points: Vec<FlatPoint>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Empty("sampled trajectory"));
        }
        if times.len() != points.len() {
            return Err(Error::LengthMismatch { expected: times.len(), actual: points.len() });
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::UnsortedTimes { index: i + 1 });
        }
        Ok(SampledTrajectory { times, points })
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    pub fn sample(&self, t: f64) -> FlatPoint {
        let t = t + self.times[0];
        let n = self.times.len();
        if t <= self.times[0] {
            return self.points[0];
        }
        if t >= self.times[n - 1] {
            return self.points[n - 1];
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let a = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        let (p, q) = (&self.points[i], &self.points[i + 1]);
        let lerp = |x: Vec3, y: Vec3| x * (1.0 - a) + y * a;
        FlatPoint {
            position: lerp(p.position, q.position),
            velocity: lerp(p.velocity, q.velocity),
            acceleration: lerp(p.acceleration, q.acceleration),
            jerk: lerp(p.jerk, q.jerk),
            snap: lerp(p.snap, q.snap),
            yaw: p.yaw * (1.0 - a) + q.yaw * a,
            yaw_rate: p.yaw_rate * (1.0 - a) + q.yaw_rate * a,
            yaw_accel: p.yaw_accel * (1.0 - a) + q.yaw_accel * a,
        }
    }
}

pub const TRAJECTORY_CSV_HEADER: [&str; 17] = [
    "t", "px", "py", "pz", "vx", "vy", "vz", "ax", "ay", "az", "jx", "jy", "jz", "sx", "sy", "sz", "yaw",
];

/// Writes `traj` sampled every `dt` seconds (end point included).
pub fn export_csv(traj: &FlatTrajectory, dt: f64, path: &Path) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("export step must be positive".into()));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(TRAJECTORY_CSV_HEADER).map_err(|e| Error::csv(path, e))?;
    let n = (traj.duration() / dt).round() as usize;
    for k in 0..=n {
        let t = (k as f64 * dt).min(traj.duration());
        let p = traj.sample(t);
        let mut row = vec![t];
        for v in [p.position, p.velocity, p.acceleration, p.jerk, p.snap] {
            row.extend(v.to_array());
        }
        row.push(p.yaw);
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn import_csv(path: &Path) -> Result<FlatTrajectory> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != TRAJECTORY_CSV_HEADER {
        return Err(Error::parse(path, "unexpected trajectory CSV header"));
    }
    let mut times = Vec::new();
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let v: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path, e.to_string()))?;
        let vec = |i: usize| Vec3::new(v[i], v[i + 1], v[i + 2]);
        times.push(v[0]);
        points.push(FlatPoint {
            position: vec(1),
            velocity: vec(4),
            acceleration: vec(7),
            jerk: vec(10),
            snap: vec(13),
            yaw: v[16],
            ..FlatPoint::default()
        });
    }
    SampledTrajectory::new(times, points).map(FlatTrajectory::Sampled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::vee;

    const G: f64 = 9.81;

    #[test]
    fn hover_reference_is_level() {
        let tr = FlatTrajectory::Hover { position: Vec3::new(0.0, 0.0, 1.0), duration: 5.0 };
        let r = flat_expand(&tr, 1.0, G).unwrap();
        assert_eq!(r.rotation, Mat3::IDENTITY);
        assert_eq!(r.angular_velocity, Vec3::ZERO);
        assert_eq!(r.angular_acceleration, Vec3::ZERO);
    }

    #[test]
    fn constant_acceleration_is_static_tilt() {
        let a = 3.0;
        let p = FlatPoint { acceleration: Vec3::new(a, 0.0, 0.0), ..FlatPoint::default() };
        let r = expand_point(&p, G).unwrap();
        let pitch = r.rotation.0[0][2].atan2(r.rotation.0[2][2]);
        assert!((pitch - a.atan2(G)).abs() < 1e-12);
        assert!(r.angular_velocity.max_abs() < 1e-15);
        assert!(r.angular_acceleration.max_abs() < 1e-15);
    }

    #[test]
    fn free_fall_reference_is_singular() {
        let p = FlatPoint { acceleration: Vec3::new(0.0, 0.0, -G), ..FlatPoint::default() };
        assert!(matches!(expand_point(&p, G), Err(Error::SingularReference { .. })));
    }

    #[test]
    fn time_outside_range_is_rejected() {
        let tr = FlatTrajectory::Hover { position: Vec3::ZERO, duration: 1.0 };
        assert!(flat_expand(&tr, 1.5, G).is_err());
        assert!(flat_expand(&tr, -0.1, G).is_err());
    }

    #[test]
    fn circle_rates_match_finite_differences() {
        let tr = make_shape(ShapeKind::Circle, ShapeSize::default_for(ShapeKind::Circle), 1.7, 12.0).unwrap();
        let h = 1e-5;
        for &t in &[0.5, 1.3, 3.0, 6.2, 10.7] {
            let r = flat_expand(&tr, t, G).unwrap();
            let a = flat_expand(&tr, t - h, G).unwrap();
            let b = flat_expand(&tr, t + h, G).unwrap();
            let r_dot = (b.rotation - a.rotation) * (0.5 / h);
            let skew = r.rotation.transpose() * r_dot;
            let w = vee(&(skew - skew.transpose())).unwrap() * 0.5;
            assert!((w - r.angular_velocity).max_abs() < 1e-4, "t={t}");
            let w_dot = (b.angular_velocity - a.angular_velocity) / (2.0 * h);
            assert!((w_dot - r.angular_acceleration).max_abs() < 1e-4, "t={t}");
            assert!(r.rotation.orthogonality_error() < 1e-9);
        }
    }

    #[test]
    fn yawing_reference_rates_match_finite_differences() {
        let base = FlatPoint {
            acceleration: Vec3::new(1.0, -0.5, 0.3),
            jerk: Vec3::new(0.2, 0.4, -0.1),
            snap: Vec3::new(-0.3, 0.1, 0.2),
            yaw: 0.4,
            yaw_rate: 0.7,
            yaw_accel: -0.2,
            ..FlatPoint::default()
        };
        let at = |dt: f64| {
            let mut p = base;
            p.acceleration = base.acceleration + base.jerk * dt + base.snap * (0.5 * dt * dt);
            p.jerk = base.jerk + base.snap * dt;
            p.yaw = base.yaw + base.yaw_rate * dt + 0.5 * base.yaw_accel * dt * dt;
            p.yaw_rate = base.yaw_rate + base.yaw_accel * dt;
            expand_point(&p, G).unwrap()
        };
        let h = 1e-5;
        let (a, r, b) = (at(-h), at(0.0), at(h));
        let skew = r.rotation.transpose() * ((b.rotation - a.rotation) * (0.5 / h));
        let w = vee(&(skew - skew.transpose())).unwrap() * 0.5;
        assert!((w - r.angular_velocity).max_abs() < 1e-6);
        let w_dot = (b.angular_velocity - a.angular_velocity) / (2.0 * h);
        assert!((w_dot - r.angular_acceleration).max_abs() < 1e-5);
    }

    #[test]
    fn csv_export_import() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let tr = make_shape(ShapeKind::Figure8, ShapeSize::default_for(ShapeKind::Figure8), 1.7, 10.0).unwrap();
        export_csv(&tr, 0.01, &path).unwrap();
        let back = import_csv(&path).unwrap();
        assert!((back.duration() - 10.0).abs() < 1e-12);
        for &t in &[0.0, 2.5, 7.0, 10.0] {
            assert!((back.sample(t).position - tr.sample(t).position).max_abs() < 1e-12);
        }
        // Between rows the import interpolates linearly.
        assert!((back.sample(3.005).position - tr.sample(3.005).position).max_abs() < 1e-4);
    }
}
